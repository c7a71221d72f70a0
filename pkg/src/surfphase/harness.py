"""Operator property checks and time-step convergence sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diagnostics import ConvergenceRow, convergence_rows, l2_error_pair
from .linsolve import SolverConfig, SolverError, pcg, project_pair
from .model import Model, ModelParams, State
from .rng import DEFAULT_SEED, SplitMix64
from .schemes import SchemeKind, StepOperator, freeze, make_step_preconditioner, march, operator_quadratic_form
from .spectral import Grid

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-10
POSITIVITY_TOL = 1e-9
DENSE_TOL = 1e-8


def smooth_random_field(grid: Grid, gen: SplitMix64, kmax: float = 4.0) -> np.ndarray:
    """Low-pass filtered uniform noise, rescaled to unit max-norm."""
    noise = gen.uniform(-1.0, 1.0, grid.shape)
    spec = np.where(grid.ksq <= kmax**2, grid.fft(noise), 0.0)
    f = grid.ifft(spec)
    f = f - f.mean()
    return f / np.max(np.abs(f))


def random_state(model: Model, gen: SplitMix64) -> State:
    g = model.grid
    phi = 0.9 * smooth_random_field(g, gen.split(0)) + 0.1 * gen.uniform(-1, 1, 1)[0]
    rho = 0.5 + 0.35 * smooth_random_field(g, gen.split(1))
    return model.init_state(phi, rho)


def random_zero_mean_pair(grid: Grid, gen: SplitMix64) -> np.ndarray:
    return project_pair(np.stack([gen.split(0).uniform(-1, 1, grid.shape), gen.split(1).uniform(-1, 1, grid.shape)]))


def dense_operator(op: Callable[[np.ndarray], np.ndarray], grid: Grid) -> np.ndarray:
    """Materialize ``op`` column by column on projected unit impulses."""
    n = 2 * grid.size
    mat = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        col = op(project_pair(e.reshape((2,) + grid.shape)))
        mat[:, j] = col.ravel()
    return mat


def dense_solve(mat: np.ndarray, rhs: np.ndarray, grid: Grid) -> np.ndarray:
    """Direct solve on the zero-mean subspace via a bordered system."""
    n = mat.shape[0]
    m = grid.size
    border = np.zeros((n, 2))
    border[:m, 0] = 1.0
    border[m:, 1] = 1.0
    full = np.block([[mat, border], [border.T, np.zeros((2, 2))]])
    sol = np.linalg.solve(full, np.concatenate([rhs.ravel(), [0.0, 0.0]]))
    return sol[:n].reshape(rhs.shape)


@dataclass
class PropertyRow:
    n: int
    kind: str
    symmetry_defect: float
    positivity_defect: float
    dense_defect: float | None = None

    @property
    def passed(self) -> bool:
        ok = self.symmetry_defect <= SYMMETRY_TOL and self.positivity_defect <= POSITIVITY_TOL
        return ok and (self.dense_defect is None or self.dense_defect <= DENSE_TOL)


@dataclass
class PropertyReport:
    rows: list[PropertyRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def lines(self) -> list[str]:
        out = []
        for r in self.rows:
            dense = "-" if r.dense_defect is None else f"{r.dense_defect:.2e}"
            out.append(
                f"n={r.n:<3d} {r.kind:<6s} symmetry={r.symmetry_defect:.2e} "
                f"positivity={r.positivity_defect:.2e} dense={dense} {'PASS' if r.passed else 'FAIL'}"
            )
        return out


def operator_property_harness(
    sizes=(16, 32),
    trials: int = 20,
    seed: int = DEFAULT_SEED,
    params: ModelParams | None = None,
    dt: float = 1e-3,
    dense_n: int = 8,
) -> PropertyReport:
    """Randomized symmetry/positivity checks per scheme plus a dense-solve comparison."""
    params = params or ModelParams()
    root = SplitMix64(seed)
    report = PropertyReport()
    for si, n in enumerate(sizes):
        model = Model(Grid(n), params)
        for ki, kind in enumerate(SchemeKind):
            sym = pos = 0.0
            for t in range(trials):
                gen = root.split(1000 * si + 100 * ki + t)
                co = freeze(model, random_state(model, gen.split(0)), random_state(model, gen.split(1)), kind)
                op = StepOperator(model, co, dt)
                x = random_zero_mean_pair(model.grid, gen.split(2))
                y = random_zero_mean_pair(model.grid, gen.split(3))
                ax, ay = op(x), op(y)
                axx, ayy = _ip(model, ax, x), _ip(model, ay, y)
                sym = max(sym, abs(_ip(model, ax, y) - _ip(model, ay, x)) / np.sqrt(axx * ayy))
                expansion = operator_quadratic_form(model, co, dt, x[0], x[1])
                pos = max(pos, abs(axx - expansion) / axx)
            report.rows.append(PropertyRow(n, kind.value, sym, pos))
    model = Model(Grid(dense_n), params)
    for ki, kind in enumerate(SchemeKind):
        gen = root.split(90000 + ki)
        co = freeze(model, random_state(model, gen.split(0)), random_state(model, gen.split(1)), kind)
        op = StepOperator(model, co, dt)
        rhs = random_zero_mean_pair(model.grid, gen.split(2))
        mat = dense_operator(op, model.grid)
        x_dense = dense_solve(mat, rhs, model.grid)
        x_cg, _ = pcg(op, rhs, make_step_preconditioner(model, co, dt), SolverConfig(rel_tol=1e-13, abs_tol=1e-300))
        defect = float(np.linalg.norm(x_cg - x_dense) / np.linalg.norm(x_dense))
        report.rows.append(PropertyRow(dense_n, kind.value, 0.0, 0.0, defect))
    return report


def _ip(model: Model, a: np.ndarray, b: np.ndarray) -> float:
    return model.grid.inner(a, b)


def nsteps_for(t_end: float, dt: float) -> int:
    n = round(t_end / dt)
    if n < 1 or abs(n * dt - t_end) > 1e-9 * max(t_end, 1.0):
        raise ValueError(f"t_end={t_end} is not an integer multiple of dt={dt}")
    return int(n)


def solve_to(
    model: Model, state0: State, dt: float, t_end: float, kind, solver_cfg=None, bootstrap="cn", observer=None
) -> State:
    """March to ``t_end``; ``observer`` (if given) sees every :class:`StepReport`."""
    state = state0
    for report in march(model, state0, dt, nsteps_for(t_end, dt), kind, solver_cfg, bootstrap=bootstrap):
        state = report.state_new
        if observer is not None:
            observer(report)
    return state


def convergence_sweep(
    model: Model,
    state0: State,
    kind,
    dts,
    t_end: float,
    benchmark_dt: float,
    benchmark_kind=SchemeKind.BDF2,
    solver_cfg: SolverConfig | None = None,
    benchmark: State | None = None,
    bootstrap: str = "cn",
    observer=None,
) -> list[ConvergenceRow]:
    """Errors at ``t_end`` against a fine-step benchmark, with pairwise orders."""
    dts = list(dts)
    if not benchmark_dt < min(dts):
        raise ValueError("benchmark_dt must be smaller than every sweep dt")
    for dt in dts:
        nsteps_for(t_end, dt)
    if benchmark is None:
        benchmark = solve_to(model, state0, benchmark_dt, t_end, benchmark_kind, solver_cfg, observer=observer)
    errors = []
    for dt in dts:
        try:
            final = solve_to(model, state0, dt, t_end, kind, solver_cfg, bootstrap, observer)
        except SolverError as exc:
            raise SolverError(f"sweep aborted at dt={dt}: {exc}", exc.stats) from exc
        errors.append(l2_error_pair(model.grid, final, benchmark))
        log.info("dt=%g error=%.3e", dt, errors[-1])
    return convergence_rows(dts, errors)
