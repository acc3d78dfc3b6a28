import os

import numpy as np
import pytest
from click.testing import CliRunner

from sandpile.grid import Grid, ObstacleField
from sandpile.logs import init_logging, load_settings

os.environ["SANDPILE_SETTINGS"] = "sandpile.config.TestingConfig"


@pytest.fixture(scope="session", autouse=True)
def settings():
    """Testing settings with quiet logging."""
    settings = load_settings("sandpile.config.TestingConfig")
    init_logging(settings)
    return settings


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def grid_1d():
    return Grid(1, 15)


@pytest.fixture
def grid_2d():
    return Grid(2, 7)


@pytest.fixture
def one_node():
    """1D grid with a single interior node, h = 0.5."""
    return Grid(1, 1)


@pytest.fixture
def unit_obstacle():
    def build(g: Grid) -> ObstacleField:
        return ObstacleField.constant(g, 1.0)

    return build


@pytest.fixture
def runner(monkeypatch, tmp_path):
    """Create a click CLI runner working inside a temporary directory."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("SANDPILE_SETTINGS", "sandpile.config.TestingConfig")
    return CliRunner()
