"""Property suites behind `sandpile verify`.

Every suite is a list of check functions; each takes its own seeded
generator and returns named measurements against thresholds. Asserted
checks decide the verdict, recorded checks are reported only. Check
functions run in a thread pool and are collected in submission order, so
the verdict does not depend on scheduling.
"""

from __future__ import annotations

import math
import operator
import time
import zlib
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np
from loguru import logger
from tqdm import tqdm

from sandpile.control import ControlParams, ReducedProblem, optimize
from sandpile.grid import (
    Grid,
    GradientMode,
    ObstacleField,
    apply_operator,
    dual_h1_norm,
    gradient,
    h1_norm,
    l2_inner,
    l2_norm,
    mass_weighted,
    stiffness_apply,
)
from sandpile.oracle import (
    KINK_MARGIN,
    dense_matrix,
    dense_newton_matrix,
    dense_solve,
    fd_directional,
    generic_field,
    inherited_coercivity_probe,
    kink_distance,
    monotonicity_gap,
    newton_ratio_probe,
    run_admm,
    slack_of,
)
from sandpile.penalty import (
    feasibility_violation,
    penalty_apply,
    penalty_deriv_apply,
    penalty_jets,
)
from sandpile.problems import (
    Problem,
    benchmark_1d,
    benchmark_2d,
    centred_bump,
    paraboloid,
    source_variant_1d,
    tracking_1d,
)
from sandpile.sensitivity import solve_adjoint, solve_sensitivity
from sandpile.state_solver import (
    COLD_START_MAX_ITER,
    DEFAULT_GAMMAS,
    Schedule,
    SolverParams,
    newton_step,
    path_follow,
    residual,
    solve_state,
)

SUITE_NAMES = ("penalty", "state", "sensitivity", "control", "oracle")
PROBE_SCALES = (1e-1, 1e-2, 1e-3, 1e-4)
# ratios below this are roundoff, the decay test is vacuous there
RATIO_FLOOR = 1e-12
RELATIONS = {"<=": operator.le, "<": operator.lt, ">=": operator.ge}


@dataclass
class Check:
    suite: str
    name: str
    value: float
    threshold: float
    relation: str = "<="
    asserted: bool = True
    passed: bool = False
    detail: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        self.passed = bool(RELATIONS[self.relation](self.value, self.threshold))
        if not math.isfinite(self.value):
            self.passed = False

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["value"] = self.value if math.isfinite(self.value) else str(self.value)
        return out


@dataclass
class Verdict:
    checks: list[Check]
    seed: int
    threads: int
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.asserted)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if c.asserted and not c.passed]

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "seed": self.seed,
            "threads": self.threads,
            "wall_time": self.wall_time,
            "asserted": sum(c.asserted for c in self.checks),
            "failed": [f"{c.suite}/{c.name}" for c in self.failures],
            "checks": [c.to_dict() for c in self.checks],
        }


def _random_obstacle(g: Grid, rng: np.random.Generator) -> ObstacleField:
    return ObstacleField(g, 0.5 + rng.random(g.num_cells), 0.5)


def _cell_lp(g: Grid, z, p: float) -> float:
    lengths = np.linalg.norm(np.atleast_2d(z), axis=1)
    return float((g.cell_volume * np.sum(lengths**p)) ** (1.0 / p))


# penalty


def penalty_vanishing(rng: np.random.Generator) -> list[Check]:
    worst = 0.0
    for g in (Grid(1, 31), Grid(2, 15)):
        for _ in range(25):
            phi = _random_obstacle(g, rng)
            u = rng.standard_normal(g.num_nodes)
            slopes = np.linalg.norm(gradient(g, u), axis=1)
            u *= 0.9 * np.min(phi.phi / np.maximum(slopes, 1e-300))
            worst = max(worst, float(np.max(np.abs(penalty_apply(g, u, phi, GradientMode.nabla())))))
    return [Check("penalty", "vanishing_on_admissible_set", worst, 0.0, detail={"fields": 50})]


def penalty_monotone(rng: np.random.Generator) -> list[Check]:
    worst = math.inf
    worst_gap = math.inf
    for g in (Grid(1, 31), Grid(2, 15)):
        for mode in (GradientMode.nabla(), GradientMode.incremental(2 * g.h)):
            for _ in range(50):
                phi = _random_obstacle(g, rng)
                u = 2 * g.h * rng.standard_normal(g.num_nodes)
                z = rng.standard_normal(g.num_nodes)
                quad = float(penalty_deriv_apply(g, u, phi, mode, z) @ z)
                worst = min(worst, quad / h1_norm(g, z) ** 2)
                u2 = u + g.h * rng.standard_normal(g.num_nodes)
                worst_gap = min(worst_gap, monotonicity_gap(g, phi, mode, u, u2) / h1_norm(g, u - u2) ** 2)
    return [
        Check("penalty", "derivative_monotone", worst, -1e-12, ">=", detail={"pairs": 200}),
        Check("penalty", "operator_monotone", worst_gap, -1e-12, ">=", detail={"pairs": 200}),
    ]


def penalty_newton_ratio(rng: np.random.Generator) -> list[Check]:
    """Remainder of the cellwise penalty, L^4 -> L^2 norms, D_mu slopes."""
    g = Grid(2, 15)
    mode = GradientMode.incremental(2 * g.h)
    phi = ObstacleField.constant(g, 1.0)

    def F(x):
        return penalty_jets(apply_operator(g, x, mode), phi.phi).values

    def G_F(x, v):
        jets = penalty_jets(apply_operator(g, x, mode), phi.phi)
        return np.einsum("cij,cj->ci", jets.derivs, apply_operator(g, v, mode))

    worst = 0.0
    curves = []
    for _ in range(20):
        u = generic_field(g, phi, mode, rng, scale=0.1)
        direction = 0.1 * rng.standard_normal(g.num_nodes)
        ratios = newton_ratio_probe(
            F,
            G_F,
            u,
            direction,
            PROBE_SCALES,
            norm_num=lambda z: _cell_lp(g, z, 2.0),
            norm_den=lambda v: _cell_lp(g, apply_operator(g, v, mode), 4.0),
        )
        first, last = ratios[0][1], ratios[-1][1]
        curves.append([r for _, r in ratios])
        if first > RATIO_FLOOR:
            worst = max(worst, last / first)
    return [Check("penalty", "newton_ratio_decay", worst, 0.1, detail={"ratios": curves})]


# state


def _superlinear_tail(problem: Problem, params: SolverParams, reports) -> tuple[list[float], str]:
    """Contraction ratios of the last stage with at least three, else of a cold solve."""
    for report in reversed(reports):
        if len(report.contraction) >= 3:
            return report.contraction, f"stage {report.stage}"
    cold = replace(params, max_iter=COLD_START_MAX_ITER)
    _, report = solve_state(problem.grid, problem.f, problem.phi, cold)
    return report.contraction, f"cold start at gamma={params.gamma:g}"


def _path_checks(problem: Problem) -> list[Check]:
    name = problem.name
    g = problem.grid
    params = SolverParams(eps=problem.eps, gamma=DEFAULT_GAMMAS[-1])
    start = time.perf_counter()
    u, reports = path_follow(g, problem.f, problem.phi, params, Schedule())
    elapsed = time.perf_counter() - start

    violations = [r.violation_h for r in reports]
    increments = [r.increment_h1 for r in reports if r.increment_h1 is not None]
    contraction, tail_from = _superlinear_tail(problem, params, reports)
    checks = [
        Check("state", f"{name}/stage_iterations", max(r.iterations for r in reports), 25),
        Check("state", f"{name}/final_residual", max(r.final_residual for r in reports), 1e-10),
        Check("state", f"{name}/step_bound", max(max(r.step_bound, default=0.0) for r in reports), 1.05),
        Check(
            "state",
            f"{name}/violation_nonincreasing",
            max((b - a for a, b in zip(violations, violations[1:], strict=False)), default=0.0),
            1e-12,
            detail={"violations": violations},
        ),
        Check("state", f"{name}/final_violation", violations[-1], 1e-3),
        Check(
            "state",
            f"{name}/increments_decreasing",
            max((b - a for a, b in zip(increments, increments[1:], strict=False)), default=0.0),
            0.0,
            asserted=False,
            detail={"increments_h1": increments},
        ),
        Check(
            "state",
            f"{name}/contraction_decreasing",
            max((b - a for a, b in zip(contraction[-3:], contraction[-2:], strict=False)), default=0.0),
            1e-12,
            asserted=len(contraction) >= 3,
            detail={"contraction": contraction, "from": tail_from},
        ),
    ]
    if g.d == 2:
        checks.append(Check("state", f"{name}/runtime_seconds", elapsed, 60.0))
    logger.info(f"{name}: path-following took {elapsed:.2f}s, final violation {violations[-1]:.2e}")
    return checks


def state_benchmark_1d(rng: np.random.Generator) -> list[Check]:
    return _path_checks(benchmark_1d())


def state_benchmark_2d(rng: np.random.Generator) -> list[Check]:
    return _path_checks(benchmark_2d())


def state_source_variant(rng: np.random.Generator) -> list[Check]:
    problem = source_variant_1d()
    params = SolverParams(eps=problem.eps, gamma=DEFAULT_GAMMAS[-1])
    u, reports = path_follow(problem.grid, problem.f, problem.phi, params, Schedule())
    return [
        Check("state", "source-1d/final_violation", reports[-1].violation_h, 1e-3, asserted=False),
    ]


def state_lipschitz(rng: np.random.Generator) -> list[Check]:
    """|u(f+h) - u(f)|_h1 <= |h^d h|_dual / eps."""
    g = Grid(1, 31)
    phi = ObstacleField.constant(g, 1.0)
    params = SolverParams(eps=0.05, gamma=100.0)
    schedule = Schedule((1.0, 10.0, 100.0))
    worst = 0.0
    for _ in range(5):
        f = centred_bump(g, 8.0) + rng.standard_normal(g.num_nodes)
        h_dir = rng.standard_normal(g.num_nodes)
        u1, _ = path_follow(g, f, phi, params, schedule)
        u2, _ = solve_state(g, f + h_dir, phi, params, u1)
        bound = dual_h1_norm(g, mass_weighted(g, h_dir)) / params.eps
        worst = max(worst, h1_norm(g, u2 - u1) / bound)
    return [Check("state", "lipschitz_solution_map", worst, 1.0 + 1e-6)]


def state_determinism(rng: np.random.Generator) -> list[Check]:
    problem = benchmark_1d()
    params = SolverParams(eps=problem.eps, gamma=DEFAULT_GAMMAS[-1])
    runs = []
    for _ in range(2):
        g = Grid(problem.grid.d, problem.grid.n)
        phi = ObstacleField(g, problem.phi.phi, problem.phi.nu)
        u, reports = path_follow(g, problem.f, phi, params, Schedule())
        runs.append((u, [r.residual_dual for r in reports]))
    same = np.array_equal(runs[0][0], runs[1][0]) and runs[0][1] == runs[1][1]
    return [Check("state", "bench-1d/bit_identical_rerun", 0.0 if same else 1.0, 0.0)]


def state_uniqueness(rng: np.random.Generator) -> list[Check]:
    """Zero and random initial states reach the same solution."""
    g = Grid(1, 31)
    phi = ObstacleField.constant(g, 1.0)
    f = np.full(g.num_nodes, 5.0)
    worst = 0.0
    iterations = []
    for gamma in (10.0, 100.0):
        params = SolverParams(eps=0.05, gamma=gamma)
        u_ref, _ = path_follow(g, f, phi, params, Schedule(tuple(x for x in DEFAULT_GAMMAS if x <= gamma)))
        cold = replace(params, max_iter=COLD_START_MAX_ITER)
        for _ in range(3):
            u, report = solve_state(g, f, phi, cold, 0.2 * rng.standard_normal(g.num_nodes))
            iterations.append(report.iterations)
            worst = max(worst, h1_norm(g, u - u_ref))
    return [Check("state", "unique_solution_from_random_starts", worst, 10 * 1e-10, detail={"iterations": iterations})]


# sensitivity


def sensitivity_newton_ratio(rng: np.random.Generator, samples: int = 10) -> list[Check]:
    """Remainder of f -> u(f) against solve_sensitivity, D_mu penalty."""
    g = Grid(2, 15)
    mode = GradientMode.incremental(2 * g.h)
    phi = ObstacleField.constant(g, 1.0)
    params = SolverParams(eps=0.05, gamma=100.0, mode=mode, tol_res=1e-11)
    schedule = Schedule((1.0, 10.0, 100.0))
    scales = (1e-1, 1e-2, 1e-3)

    worst_shifted = 0.0
    worst_base = 0.0
    curves: dict[str, list[list[float]]] = {"shifted": [], "base": []}
    margins = []
    for _ in range(samples):
        candidates = []
        for _attempt in range(20):
            f = 8.0 + rng.standard_normal(g.num_nodes)
            u_f, _ = path_follow(g, f, phi, params, schedule)
            candidates.append((f, u_f, kink_distance(slack_of(g, u_f, phi, mode))))
            if candidates[-1][2] >= KINK_MARGIN:
                break
        f, u_f, margin = max(candidates, key=lambda c: c[2])
        margins.append(margin)
        direction = 0.1 * rng.standard_normal(g.num_nodes)
        states: dict[bytes, np.ndarray] = {}

        def F(x, u_f=u_f, states=states):
            key = x.tobytes()
            if key not in states:
                states[key] = solve_state(g, x, phi, params, u_f)[0]
            return states[key]

        def shifted(x, v, F=F):
            return solve_sensitivity(g, F(x), v, phi, params)

        def base(x, v, u_f=u_f):
            return solve_sensitivity(g, u_f, v, phi, params)

        for label, G in (("shifted", shifted), ("base", base)):
            ratios = newton_ratio_probe(
                F, G, f, direction, scales, lambda w: h1_norm(g, w), lambda v: l2_norm(g, v)
            )
            curves[label].append([r for _, r in ratios])
            first, last = ratios[0][1], ratios[-1][1]
            quotient = last / first if first > 1e-9 else 0.0
            if label == "shifted":
                worst_shifted = max(worst_shifted, quotient)
            else:
                worst_base = max(worst_base, quotient)
    return [
        Check("sensitivity", "newton_ratio_decay", worst_shifted, 0.2, detail={"ratios": curves["shifted"], "kink_margins": margins}),
        Check("sensitivity", "newton_ratio_decay_at_base_point", worst_base, 0.2, asserted=False, detail={"ratios": curves["base"]}),
    ]


def sensitivity_dense_oracle(rng: np.random.Generator) -> list[Check]:
    worst = 0.0
    worst_symmetry = 0.0
    for g in (Grid(1, 15), Grid(2, 7)):
        phi = ObstacleField.constant(g, 1.0)
        for gamma in (0.0, 100.0):
            params = SolverParams(eps=0.05, gamma=gamma)
            u = 2 * g.h * rng.standard_normal(g.num_nodes)
            a, b = rng.standard_normal(g.num_nodes), rng.standard_normal(g.num_nodes)
            w = solve_sensitivity(g, u, a, phi, params)
            reference = dense_solve(dense_newton_matrix(g, u, phi, params), mass_weighted(g, a))
            worst = max(worst, float(np.linalg.norm(w - reference) / np.linalg.norm(reference)))
            lhs = float(w @ b)
            rhs = float(a @ solve_adjoint(g, u, b, phi, params))
            worst_symmetry = max(worst_symmetry, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    return [
        Check("sensitivity", "dense_oracle_match", worst, 1e-9),
        Check("sensitivity", "adjoint_symmetry", worst_symmetry, 1e-10),
    ]


def sensitivity_coercivity(rng: np.random.Generator) -> list[Check]:
    worst = math.inf
    for g in (Grid(1, 31), Grid(2, 15)):
        phi = ObstacleField.constant(g, 1.0)
        params = SolverParams(eps=0.05, gamma=100.0)
        u = 2 * g.h * rng.standard_normal(g.num_nodes)
        worst = min(worst, inherited_coercivity_probe(g, u, phi, params, rng))
    return [Check("sensitivity", "inherited_coercivity", worst, 1.0 - 1e-9, ">=")]


# control


def control_gradient_fd(rng: np.random.Generator) -> list[Check]:
    g = Grid(1, 31)
    phi = ObstacleField.constant(g, 1.0)
    sparams = SolverParams(eps=0.05, gamma=100.0, tol_res=1e-12)
    cparams = ControlParams(u_d=paraboloid(g), lam=1e-4)
    worst = 0.0
    points = 0
    for _ in range(200):
        if points == 10:
            break
        f = centred_bump(g, 6.0) + rng.standard_normal(g.num_nodes)
        problem = ReducedProblem(g, phi, cparams, sparams)
        u_f = problem.state(f)
        if kink_distance(slack_of(g, u_f, phi, GradientMode.nabla())) < KINK_MARGIN:
            continue
        points += 1
        grad = problem.gradient(f)
        e = rng.standard_normal(g.num_nodes)
        e /= l2_norm(g, e)
        exact = l2_inner(g, grad, e)
        fd = fd_directional(problem.objective, f, e, 1e-5)
        worst = max(worst, abs(fd - exact) / max(abs(exact), 1e-12))
    if points < 10:
        worst = math.inf
    return [Check("control", "reduced_gradient_fd", worst, 1e-3, detail={"points": points})]


def _lq_reference(g: Grid, eps: float, u_d, lam: float):
    """argmin 1/2|S f - u_d|^2 + lam |f|^2 with S = h^d (eps A)^{-1}, by normal equations."""
    A = dense_matrix(lambda v: stiffness_apply(g, eps, v), g.num_nodes)
    S = dense_solve(A, g.cell_volume * np.eye(g.num_nodes))
    return dense_solve(S.T @ S + 2 * lam * np.eye(g.num_nodes), S.T @ u_d)


def control_linear_quadratic(rng: np.random.Generator) -> list[Check]:
    worst = 0.0
    for g in (Grid(1, 15), Grid(2, 7)):
        phi = ObstacleField.constant(g, 1.0)
        u_d = paraboloid(g) + 0.01 * rng.standard_normal(g.num_nodes)
        lam = 0.05
        reference = _lq_reference(g, 0.05, u_d, lam)
        result = optimize(
            g,
            g.zeros(),
            phi,
            ControlParams(u_d=u_d, lam=lam, tol_grad=1e-9, max_outer=500),
            SolverParams(eps=0.05, gamma=0.0),
        )
        worst = max(worst, l2_norm(g, result.f - reference) / l2_norm(g, reference))
    return [Check("control", "linear_quadratic_oracle", worst, 1e-6)]


def control_tracking(rng: np.random.Generator) -> list[Check]:
    problem = tracking_1d()
    if problem.u_d is None:
        raise RuntimeError("tracking benchmark without a target")
    g = problem.grid
    sparams = SolverParams(eps=problem.eps, gamma=1e3)
    result = optimize(
        g, g.zeros(), problem.phi, ControlParams(u_d=problem.u_d, lam=problem.lam, max_outer=50), sparams
    )
    js = [r.j for r in result.trace]
    steps = [b - a for a, b in zip(js, js[1:], strict=False)]
    return [
        Check("control", "tracking/j_decreasing", max(steps, default=-1.0), 0.0, "<", detail={"status": result.status}),
        Check("control", "tracking/j_reduction", js[-1] / js[0], 0.2, detail={"j0": js[0], "j_final": js[-1]}),
    ]


def control_lambda_sweep(rng: np.random.Generator) -> list[Check]:
    problem = tracking_1d()
    if problem.u_d is None:
        raise RuntimeError("tracking benchmark without a target")
    g = problem.grid
    sparams = SolverParams(eps=problem.eps, gamma=1e3)
    sizes = []
    for lam in (1e-6, 1e-4, 1e-2):
        result = optimize(g, g.zeros(), problem.phi, ControlParams(u_d=problem.u_d, lam=lam, max_outer=20), sparams)
        sizes.append(l2_norm(g, result.f))
    growth = max(b - a for a, b in zip(sizes, sizes[1:], strict=False))
    return [Check("control", "lambda_sweep_norm_nonincreasing", growth, 0.0, asserted=False, detail={"f_l2": sizes})]


# oracle


def _admm_checks(problem: Problem) -> list[Check]:
    g = problem.grid
    admm = run_admm(g, problem.f, problem.phi, problem.eps)
    reference = l2_norm(g, admm.u)
    checks = [
        Check("oracle", f"{problem.name}/admm_feasibility", feasibility_violation(g, admm.u, problem.phi), 1e-6, detail={"iterations": admm.iterations}),
    ]
    for mode, asserted in ((GradientMode.nabla(), True), (GradientMode.incremental(g.h), False)):
        params = SolverParams(eps=problem.eps, gamma=DEFAULT_GAMMAS[-1], mode=mode)
        u, _ = path_follow(g, problem.f, problem.phi, params, Schedule())
        gap = l2_norm(g, u - admm.u) / max(reference, 1e-8)
        checks.append(Check("oracle", f"{problem.name}/path_vs_admm[{mode.label}]", gap, 1e-2, asserted=asserted))
    return checks


def oracle_admm_1d(rng: np.random.Generator) -> list[Check]:
    return _admm_checks(benchmark_1d())


def oracle_admm_2d(rng: np.random.Generator) -> list[Check]:
    return _admm_checks(benchmark_2d())


def oracle_admm_hand_case(rng: np.random.Generator) -> list[Check]:
    g = Grid(1, 1)
    u = run_admm(g, np.array([1.0]), ObstacleField.constant(g, 1.0), 0.1).u
    return [Check("oracle", "admm_single_node", abs(float(u[0]) - 0.5), 1e-8)]


def oracle_dense_vs_iterative(rng: np.random.Generator) -> list[Check]:
    """Newton steps of both inner solvers, measured in the dense system."""
    worst_residual = 0.0
    worst_gap = 0.0
    tol_lin = 1e-10
    for g in (Grid(1, 15), Grid(2, 7)):
        phi = ObstacleField.constant(g, 1.0)
        f = 5.0 + rng.standard_normal(g.num_nodes)
        for method in ("direct", "cg"):
            params = SolverParams(eps=0.05, gamma=100.0, tol_lin=tol_lin, linear_solver=method)
            u = 2 * g.h * rng.standard_normal(g.num_nodes)
            rhs = -residual(g, u, f, phi, params)
            A = dense_newton_matrix(g, u, phi, params)
            v = newton_step(g, u, f, phi, params)
            reference = dense_solve(A, rhs)
            worst_residual = max(worst_residual, float(np.linalg.norm(A @ v - rhs) / np.linalg.norm(rhs)))
            worst_gap = max(worst_gap, float(np.linalg.norm(v - reference) / np.linalg.norm(reference)))
    return [
        Check("oracle", "dense_vs_iterative_residual", worst_residual, 10 * tol_lin),
        Check("oracle", "dense_vs_iterative_solution_gap", worst_gap, 1e-6, asserted=False),
    ]


SUITES: dict[str, list[Callable[[np.random.Generator], list[Check]]]] = {
    "penalty": [penalty_vanishing, penalty_monotone, penalty_newton_ratio],
    "state": [
        state_benchmark_1d,
        state_benchmark_2d,
        state_source_variant,
        state_lipschitz,
        state_uniqueness,
        state_determinism,
    ],
    "sensitivity": [sensitivity_newton_ratio, sensitivity_dense_oracle, sensitivity_coercivity],
    "control": [control_gradient_fd, control_linear_quadratic, control_tracking, control_lambda_sweep],
    "oracle": [oracle_admm_hand_case, oracle_admm_1d, oracle_admm_2d, oracle_dense_vs_iterative],
}


def check_seed(seed: int, suite: str, fn: Callable) -> list[int]:
    """Seed material of one check group; independent of which suites are selected."""
    return [seed, zlib.crc32(f"{suite}/{fn.__name__}".encode())]


def _run_task(task: tuple[str, Callable[[np.random.Generator], list[Check]]], seed: int) -> list[Check]:
    suite, fn = task
    rng = np.random.default_rng(check_seed(seed, suite, fn))
    try:
        return fn(rng)
    except Exception as e:
        logger.error(f"Check {suite}/{fn.__name__} raised {type(e).__name__}: {e}")
        return [Check(suite, fn.__name__, math.inf, 0.0, detail={"error": f"{type(e).__name__}: {e}"})]


def run_suites(
    selector: str = "all", seed: int = 0, threads: int = 1, progress: bool = False
) -> Verdict:
    if selector != "all" and selector not in SUITES:
        raise KeyError(f"Unknown suite {selector!r}; choose from all, {', '.join(SUITE_NAMES)}")
    names = SUITE_NAMES if selector == "all" else (selector,)
    tasks = [(suite, fn) for suite in names for fn in SUITES[suite]]
    logger.info(f"Running {len(tasks)} check groups from {', '.join(names)} with {threads} threads")

    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        results = list(
            tqdm(
                executor.map(lambda task: _run_task(task, seed), tasks),
                total=len(tasks),
                desc="verify",
                disable=not progress,
            )
        )
    checks = [c for group in results for c in group]
    verdict = Verdict(checks, seed, threads, time.perf_counter() - start)
    for c in checks:
        if not c.passed:
            level = "ERROR" if c.asserted else "WARNING"
            logger.log(level, f"{c.suite}/{c.name}: {c.value!r} {c.relation} {c.threshold!r} failed")
    logger.info(
        f"Verification {'passed' if verdict.passed else 'FAILED'}: "
        f"{len(checks)} checks, {len(verdict.failures)} asserted failures"
    )
    return verdict
