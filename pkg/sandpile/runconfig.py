"""Run configuration files (TOML).

Sections: problem, solver, schedule, control, output, verify. Every key is
declared below; unknown sections or keys and values of the wrong type are
rejected with the line they appear on. Relative file paths resolve against
the directory of the config file.
"""

from __future__ import annotations

import re
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger

from sandpile.control import ControlParams, SourceBasis
from sandpile.errors import ConfigError, FieldFormatError, GridError
from sandpile.fields import read_cells, read_nodal
from sandpile.grid import Grid, GradientMode, NodalField, ObstacleField
from sandpile.state_solver import Armijo, Schedule, SolverParams

FORMAT_VERSION = 1

FLOAT = "float"
FLOAT_LIST = "float list"
POINT_LIST = "point list"

SCHEMA: dict[str, dict[str, Any]] = {
    "problem": {
        "d": int,
        "n": int,
        "eps": FLOAT,
        "f_file": str,
        "f_value": FLOAT,
        "phi_file": str,
        "phi_value": FLOAT,
        "alpha_degrees": FLOAT,
        "nu": FLOAT,
        "u_init_file": str,
    },
    "solver": {
        "gamma": FLOAT,
        "mode": str,
        "mu": FLOAT,
        "tol_res": FLOAT,
        "max_iter": int,
        "tol_lin": FLOAT,
        "damping": str,
        "c1": FLOAT,
        "backtrack": FLOAT,
        "max_backtracks": int,
        "linear_solver": str,
    },
    "schedule": {"gammas": FLOAT_LIST, "mus": FLOAT_LIST},
    "control": {
        "u_d_file": str,
        "f_init_file": str,
        "lambda": FLOAT,
        "descent": str,
        "step": FLOAT,
        "max_outer": int,
        "tol_grad": FLOAT,
        "barzilai_borwein": bool,
        "basis_centers": POINT_LIST,
        "basis_width": FLOAT,
    },
    "output": {"plot_data": bool},
    "verify": {"seed": int, "threads": int},
}

CHOICES = {
    ("solver", "mode"): ("nabla", "incremental"),
    ("solver", "damping"): ("armijo", "none"),
    ("solver", "linear_solver"): ("direct", "cg"),
    ("control", "descent"): ("armijo", "fixed"),
}


def _line_of(text: str, section: str | None, key: str | None = None) -> int | None:
    """Line number of a section header, or of a key inside a section."""
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        header = re.fullmatch(r"\[\s*([A-Za-z0-9_\-]+)\s*\]", line)
        if header:
            current = header.group(1)
            if key is None and current == section:
                return lineno
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*=", line):
            return lineno
    return None


def _check_type(value: Any, kind: Any) -> bool:
    if kind == FLOAT:
        return isinstance(value, int | float) and not isinstance(value, bool)
    if kind == FLOAT_LIST:
        return isinstance(value, list) and all(_check_type(v, FLOAT) for v in value)
    if kind == POINT_LIST:
        return isinstance(value, list) and all(_check_type(v, FLOAT_LIST) for v in value)
    if kind is int:
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, kind)


@dataclass
class RunConfig:
    data: dict[str, dict[str, Any]]
    text: str = ""
    base_dir: Path = field(default_factory=Path)
    path: Path | None = None

    @classmethod
    def load(cls, path: Path | str, require_problem: bool = True) -> RunConfig:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        return cls.parse(text, path.parent, path, require_problem)

    @classmethod
    def parse(
        cls,
        text: str,
        base_dir: Path | str = ".",
        path: Path | None = None,
        require_problem: bool = True,
    ) -> RunConfig:
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            match = re.search(r"line (\d+)", str(e))
            raise ConfigError(f"malformed config: {e}", int(match.group(1)) if match else None) from e

        version = raw.pop("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise ConfigError(
                f"unsupported format_version {version!r}, expected {FORMAT_VERSION}",
                _line_of(text, None, "format_version"),
            )
        data: dict[str, dict[str, Any]] = {}
        for section, values in raw.items():
            if section not in SCHEMA or not isinstance(values, dict):
                raise ConfigError(f"unknown section [{section}]", _line_of(text, section))
            for key, value in values.items():
                line = _line_of(text, section, key)
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]", line)
                kind = SCHEMA[section][key]
                if not _check_type(value, kind):
                    expected = kind if isinstance(kind, str) else kind.__name__
                    raise ConfigError(f"{section}.{key} must be a {expected}, got {value!r}", line)
                choices = CHOICES.get((section, key))
                if choices and value not in choices:
                    raise ConfigError(f"{section}.{key} must be one of {choices}, got {value!r}", line)
            data[section] = dict(values)

        config = cls(data, text, Path(base_dir), path)
        if require_problem:
            config._check_required()
        return config

    def _check_required(self):
        problem = self.data.get("problem")
        if problem is None:
            raise ConfigError("missing [problem] section")
        for key in ("d", "n", "eps"):
            if key not in problem:
                raise ConfigError(f"[problem] needs {key!r}", _line_of(self.text, "problem"))
        if "f_file" in problem and "f_value" in problem:
            raise ConfigError("give either f_file or f_value", self.line("problem", "f_value"))
        if "schedule" not in self.data and "gamma" not in self.data.get("solver", {}):
            raise ConfigError("[solver] needs 'gamma' when no [schedule] is given")

    def line(self, section: str, key: str | None = None) -> int | None:
        return _line_of(self.text, section, key)

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.data.get(section, {}).get(key, default)

    def resolve(self, section: str, key: str) -> Path:
        return self.base_dir / self.data[section][key]

    def _wrap(self, section: str, key: str | None, build):
        try:
            return build()
        except (ValueError, GridError, FieldFormatError) as e:
            raise ConfigError(str(e), self.line(section, key)) from e

    def grid(self) -> Grid:
        return self._wrap("problem", "n", lambda: Grid(int(self.get("problem", "d")), int(self.get("problem", "n"))))

    @property
    def eps(self) -> float:
        return float(self.get("problem", "eps"))

    def source(self, g: Grid) -> NodalField:
        if "f_file" in self.data["problem"]:
            return self._wrap("problem", "f_file", lambda: read_nodal(self.resolve("problem", "f_file"), g))
        value = float(self.get("problem", "f_value", 0.0))
        return self._wrap("problem", "f_value", lambda: g.check_nodal(np.full(g.num_nodes, value), "source"))

    def obstacle(self, g: Grid) -> ObstacleField:
        problem = self.data["problem"]

        def build():
            if "phi_file" in problem:
                phi = read_cells(self.resolve("problem", "phi_file"), g)
                return ObstacleField(g, phi, float(problem.get("nu", np.min(phi))))
            if "alpha_degrees" in problem:
                return ObstacleField.from_angle(g, problem["alpha_degrees"])
            value = float(problem.get("phi_value", 1.0))
            return ObstacleField(g, np.full(g.num_cells, value), float(problem.get("nu", value)))

        return self._wrap("problem", None, build)

    def initial_state(self, g: Grid) -> NodalField | None:
        if "u_init_file" not in self.data["problem"]:
            return None
        return self._wrap("problem", "u_init_file", lambda: read_nodal(self.resolve("problem", "u_init_file"), g))

    def solver_params(self) -> SolverParams:
        solver = self.data.get("solver", {})
        gammas = self.get("schedule", "gammas")

        def build():
            mode = GradientMode.nabla()
            if solver.get("mode") == "incremental":
                if "mu" not in solver:
                    raise ValueError("solver.mode = 'incremental' needs solver.mu")
                mode = GradientMode.incremental(solver["mu"])
                self.grid().mu_steps(solver["mu"])
            damping = None
            if solver.get("damping", "armijo") == "armijo":
                damping = Armijo(
                    c1=solver.get("c1", 1e-4),
                    backtrack=solver.get("backtrack", 0.5),
                    max_backtracks=solver.get("max_backtracks", 30),
                )
            gamma = solver.get("gamma", gammas[-1] if gammas else 0.0)
            return SolverParams(
                eps=self.eps,
                gamma=float(gamma),
                mode=mode,
                tol_res=float(solver.get("tol_res", 1e-10)),
                max_iter=int(solver.get("max_iter", 25)),
                tol_lin=float(solver.get("tol_lin", 1e-10)),
                damping=damping,
                linear_solver=solver.get("linear_solver", "direct"),
            )

        return self._wrap("solver", None, build)

    def schedule(self) -> Schedule | None:
        if "schedule" not in self.data:
            return None
        gammas = self.get("schedule", "gammas")
        if not gammas:
            raise ConfigError("[schedule] needs a non-empty 'gammas'", self.line("schedule", "gammas"))
        mus = self.get("schedule", "mus")
        for mu in mus or ():
            self._wrap("schedule", "mus", lambda mu=mu: self.grid().mu_steps(mu))
        return self._wrap(
            "schedule",
            "gammas",
            lambda: Schedule(tuple(map(float, gammas)), None if mus is None else tuple(map(float, mus))),
        )

    def control_params(self, g: Grid) -> ControlParams:
        control = self.data.get("control")
        if control is None:
            raise ConfigError("optimize needs a [control] section")
        if "u_d_file" not in control:
            raise ConfigError("[control] needs 'u_d_file'", self.line("control"))
        u_d = self._wrap("control", "u_d_file", lambda: read_nodal(self.resolve("control", "u_d_file"), g))
        return self._wrap(
            "control",
            None,
            lambda: ControlParams(
                u_d=u_d,
                lam=float(control.get("lambda", 0.0)),
                descent=control.get("descent", "armijo"),
                step=float(control.get("step", 1.0)),
                max_outer=int(control.get("max_outer", 100)),
                tol_grad=float(control.get("tol_grad", 1e-8)),
                barzilai_borwein=control.get("barzilai_borwein", True),
            ),
        )

    def initial_control(self, g: Grid) -> NodalField:
        if "f_init_file" in self.data.get("control", {}):
            return self._wrap("control", "f_init_file", lambda: read_nodal(self.resolve("control", "f_init_file"), g))
        return g.zeros()

    def basis(self, g: Grid) -> SourceBasis | None:
        centers = self.get("control", "basis_centers")
        if centers is None:
            return None
        return self._wrap(
            "control",
            "basis_centers",
            lambda: SourceBasis(g, np.asarray(centers), float(self.get("control", "basis_width", 0.1))),
        )

    @property
    def plot_data(self) -> bool:
        return bool(self.get("output", "plot_data", False))

    def resolved(self) -> dict[str, Any]:
        """Config echo for output documents: explicit keys plus the effective solver setup."""
        out: dict[str, Any] = {"format_version": FORMAT_VERSION}
        out.update({section: dict(values) for section, values in self.data.items()})
        out["solver_effective"] = self.solver_params().to_dict()
        schedule = self.schedule()
        out["schedule_effective"] = None if schedule is None else schedule.to_dict()
        if self.path is not None:
            out["source"] = str(self.path)
        logger.debug(f"Resolved config: {out}")
        return out
