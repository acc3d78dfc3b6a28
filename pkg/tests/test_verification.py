import math

import numpy as np
import pytest

from sandpile import verification
from sandpile.grid import Grid, ObstacleField
from sandpile.problems import Problem
from sandpile.state_solver import RunReport, SolverParams
from sandpile.verification import (
    SUITE_NAMES,
    Check,
    Verdict,
    check_seed,
    control_gradient_fd,
    oracle_admm_hand_case,
    penalty_monotone,
    penalty_newton_ratio,
    penalty_vanishing,
    run_suites,
    sensitivity_newton_ratio,
    state_uniqueness,
)


class TestCheck:
    """Test pass/fail bookkeeping of single checks."""

    def test_upper_bound(self):
        assert Check("s", "c", 0.5, 1.0).passed
        assert not Check("s", "c", 1.5, 1.0).passed

    def test_lower_bound(self):
        assert Check("s", "c", 1.5, 1.0, relation=">=").passed

    def test_strict_bound_rejects_equality(self):
        assert Check("s", "c", -1e-9, 0.0, relation="<").passed
        assert not Check("s", "c", 0.0, 0.0, relation="<").passed

    def test_unknown_relation(self):
        with pytest.raises(ValueError, match="relation"):
            Check("s", "c", 0.0, 0.0, relation="==")

    def test_non_finite_fails(self):
        check = Check("s", "c", math.nan, 1.0)
        assert not check.passed
        assert not Check("s", "c", math.inf, 1.0, relation=">=").passed

    def test_to_dict_serializes_infinity(self):
        assert Check("s", "c", math.inf, 1.0).to_dict()["value"] == "inf"


class TestVerdict:
    """Test the aggregate verdict."""

    def test_recorded_checks_do_not_fail(self):
        verdict = Verdict([Check("s", "a", 0.5, 1.0), Check("s", "b", 2.0, 1.0, asserted=False)], seed=0, threads=1)
        assert verdict.passed
        assert verdict.failures == []

    def test_failures_listed(self):
        verdict = Verdict([Check("s", "a", 2.0, 1.0)], seed=0, threads=1)
        assert not verdict.passed
        assert verdict.to_dict()["failed"] == ["s/a"]


class TestChecks:
    """Run check groups directly, the expensive ones with fewer samples."""

    def test_penalty_vanishing(self, rng):
        assert all(c.passed for c in penalty_vanishing(rng))

    def test_penalty_monotone(self, rng):
        assert all(c.passed for c in penalty_monotone(rng))

    def test_penalty_newton_ratio(self, rng):
        (check,) = penalty_newton_ratio(rng)
        assert check.asserted
        assert check.passed, check.detail

    def test_sensitivity_newton_ratio(self, rng):
        checks = sensitivity_newton_ratio(rng, samples=2)
        asserted = [c for c in checks if c.asserted]
        assert [c.name for c in asserted] == ["newton_ratio_decay"]
        assert asserted[0].passed, asserted[0].detail
        assert len(asserted[0].detail["kink_margins"]) == 2

    def test_state_uniqueness(self, rng):
        (check,) = state_uniqueness(rng)
        assert check.passed, check.detail
        assert all(n <= 200 for n in check.detail["iterations"])

    def test_control_gradient_fd(self, rng):
        (check,) = control_gradient_fd(rng)
        assert check.passed, check.detail
        assert check.detail["points"] == 10

    def test_admm_hand_case(self, rng):
        assert all(c.passed for c in oracle_admm_hand_case(rng))


def test_superlinear_tail_prefers_latest_long_stage():
    reports = [
        RunReport(grid={}, params={}, contraction=[0.6, 0.3, 0.0], stage=0),
        RunReport(grid={}, params={}, contraction=[0.4, 0.1, 0.01, 0.0], stage=1),
        RunReport(grid={}, params={}, contraction=[0.0], stage=2),
    ]
    g = Grid(1, 7)
    problem = Problem("pile", g, 0.05, g.zeros(), ObstacleField.constant(g, 1.0))
    contraction, source = verification._superlinear_tail(problem, SolverParams(eps=0.05, gamma=1.0), reports)
    assert source == "stage 1"
    assert contraction == [0.4, 0.1, 0.01, 0.0]


def test_superlinear_tail_falls_back_to_cold_start():
    g = Grid(1, 31)
    problem = Problem("pile", g, 0.05, np.full(g.num_nodes, 5.0), ObstacleField.constant(g, 1.0))
    params = SolverParams(eps=0.05, gamma=10.0)
    contraction, source = verification._superlinear_tail(problem, params, [])
    assert source == "cold start at gamma=10"
    assert len(contraction) >= 3
    assert contraction[-1] == 0.0


class TestRunSuites:
    """Test suite selection and deterministic scheduling."""

    def test_unknown_suite(self):
        with pytest.raises(KeyError):
            run_suites("everything")

    def test_penalty_suite_is_thread_independent(self):
        serial = run_suites("penalty", seed=3, threads=1)
        parallel = run_suites("penalty", seed=3, threads=3)
        assert [c.to_dict() for c in serial.checks] == [c.to_dict() for c in parallel.checks]

    def test_suite_names(self):
        assert SUITE_NAMES == ("penalty", "state", "sensitivity", "control", "oracle")

    def test_seed_depends_on_check_not_position(self):
        assert check_seed(0, "state", state_uniqueness) == check_seed(0, "state", state_uniqueness)
        assert check_seed(0, "state", state_uniqueness) != check_seed(1, "state", state_uniqueness)
        assert check_seed(0, "penalty", penalty_monotone) != check_seed(0, "penalty", penalty_vanishing)

    def test_selection_does_not_change_draws(self, monkeypatch):
        def first_draw(rng):
            return [Check("b", "draw", float(rng.random()), 1.0)]

        def other_draw(rng):
            return [Check("a", "draw", float(rng.random()), 1.0)]

        monkeypatch.setattr(verification, "SUITES", {"a": [other_draw], "b": [first_draw]})
        monkeypatch.setattr(verification, "SUITE_NAMES", ("a", "b"))
        alone = run_suites("b", seed=5)
        together = run_suites("all", seed=5)
        assert alone.checks[0].value == together.checks[1].value
