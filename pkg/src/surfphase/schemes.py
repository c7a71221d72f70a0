"""Linear IEQ time steps: first order, BDF2 and Crank-Nicolson.

All three schemes share one template.  With frozen coefficients
``phi*``, ``Z*``, ``H*`` (extrapolated from known levels) and a "base"
combination ``S_b`` of known levels, the auxiliary variables are affine in the
new phases::

    U' = A + 2 phi* phi'          A = U_b - 2 phi* phi_b
    V' = B + rho' - Z*.grad phi'   B = V_b - rho_b + Z*.grad phi_b
    W' = C + H* rho' / 2          C = W_b - H* rho_b / 2

The chemical potentials use ``S_eff = w S' + (1 - w) S^n`` for S in
(phi, U, V, W), and the phases obey ``phi' - phi_b = kappa dt M1 lap mu_phi``.

=========  ===  =====  ==================  ======================
scheme      w   kappa  extrapolation        base
=========  ===  =====  ==================  ======================
first       1    1     S^n                  S^n
bdf2        1   2/3    2 S^n - S^{n-1}      (4 S^n - S^{n-1}) / 3
cn         1/2   1     (3 S^n - S^{n-1})/2  S^n
=========  ===  =====  ==================  ======================

Eliminating the chemical potentials with the zero-mean inverse Laplacian
gives one symmetric positive definite system per step in the mean-free parts
of (phi', rho'), with effective factor ``c = w * kappa``.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .diagnostics import EnergyRecord
from .linsolve import SolverConfig, SolveStats, make_preconditioner, pcg, project_pair
from .model import Model, State


class SchemeKind(enum.Enum):
    FIRST_ORDER = "first"
    BDF2 = "bdf2"
    CRANK_NICOLSON = "cn"

    @classmethod
    def parse(cls, value) -> "SchemeKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"first": "first", "ls1": "first", "first_order": "first", "firstorder": "first",
                   "bdf2": "bdf2", "ls2": "bdf2", "cn": "cn", "crank_nicolson": "cn", "cranknicolson": "cn"}
        if key not in aliases:
            raise ValueError(f"unknown scheme {value!r}")
        return cls(aliases[key])

    @property
    def needs_history(self) -> bool:
        return self is not SchemeKind.FIRST_ORDER


# (implicit weight, time factor, extrapolation weights, base weights)
_WEIGHTS = {
    SchemeKind.FIRST_ORDER: (1.0, 1.0, (1.0, 0.0), (1.0, 0.0)),
    SchemeKind.BDF2: (1.0, 2.0 / 3.0, (2.0, -1.0), (4.0 / 3.0, -1.0 / 3.0)),
    SchemeKind.CRANK_NICOLSON: (0.5, 1.0, (1.5, -0.5), (1.0, 0.0)),
}


@dataclass
class FrozenCoeffs:
    kind: SchemeKind
    phi_star: np.ndarray
    h_star: np.ndarray
    z_star: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    phi_base: np.ndarray
    rho_base: np.ndarray
    state_n: State
    weight: float
    time_factor: float

    @property
    def c_eff(self) -> float:
        return self.weight * self.time_factor


@dataclass
class StepReport:
    state_new: State
    solve: SolveStats
    energies: EnergyRecord
    wall_time: float = 0.0
    w_positive: bool = True


def _combine(weights, s_n, s_nm1):
    a, b = weights
    if b == 0.0:
        return s_n if a == 1.0 else a * s_n
    return a * s_n + b * s_nm1


def _zdot(z: np.ndarray, vec: np.ndarray) -> np.ndarray:
    return np.sum(z * vec, axis=0)


def freeze(model: Model, state_n: State, state_nm1: State | None, kind) -> FrozenCoeffs:
    """Assemble the explicit coefficient fields for one step from known levels."""
    kind = SchemeKind.parse(kind)
    if state_nm1 is None:
        if kind is SchemeKind.BDF2:
            raise ValueError("BDF2 needs the previous time level; bootstrap the first step")
        # first-step CN falls back to constant extrapolation
        state_nm1 = state_n
    w, kappa, star, base = _WEIGHTS[kind]
    g = model.grid

    phi_star = _combine(star, state_n.phi, state_nm1.phi)
    rho_star = _combine(star, state_n.rho, state_nm1.rho)
    z_star = model.z_field(phi_star)
    h_star = model.h_field(rho_star)
    if g.dealias:
        phi_star = g.truncate(phi_star)
        h_star = g.truncate(h_star)
        z_star = np.stack([g.truncate(zc) for zc in z_star])

    phi_b = _combine(base, state_n.phi, state_nm1.phi)
    rho_b = _combine(base, state_n.rho, state_nm1.rho)
    u_b = _combine(base, state_n.u, state_nm1.u)
    v_b = _combine(base, state_n.v, state_nm1.v)
    w_b = _combine(base, state_n.w, state_nm1.w)

    a = u_b - 2 * phi_star * phi_b
    b = v_b - rho_b + _zdot(z_star, g.gradient(phi_b))
    c = w_b - 0.5 * h_star * rho_b
    return FrozenCoeffs(kind, phi_star, h_star, z_star, a, b, c, phi_b, rho_b, state_n, w, kappa)


def aux_rhs_first(model: Model, state_n: State) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(A1, B1, C1)`` of the first-order auxiliary updates."""
    co = freeze(model, state_n, None, SchemeKind.FIRST_ORDER)
    return co.a, co.b, co.c


def update_aux(model: Model, co: FrozenCoeffs, phi_new: np.ndarray, rho_new: np.ndarray):
    """Algebraic update of (U, V, W) from the new phases."""
    u = co.a + 2 * co.phi_star * phi_new
    v = co.b + rho_new - _zdot(co.z_star, model.grid.gradient(phi_new))
    w = co.c + 0.5 * co.h_star * rho_new
    return u, v, w


def chemical_potentials(model: Model, co: FrozenCoeffs, phi_new: np.ndarray, rho_new: np.ndarray):
    """``(mu_phi, mu_rho)`` of the scheme for given new phases (full, not mean-shifted)."""
    p, g = model.params, model.grid
    u, v, w = update_aux(model, co, phi_new, rho_new)
    sn, wt = co.state_n, co.weight
    if wt != 1.0:
        phi_new = wt * phi_new + (1 - wt) * sn.phi
        u = wt * u + (1 - wt) * sn.u
        v = wt * v + (1 - wt) * sn.v
        w = wt * w + (1 - wt) * sn.w
    mu_phi = -p.eps * g.laplacian(phi_new) + co.phi_star * u / p.eps + p.alpha * g.divergence(v * co.z_star)
    mu_rho = p.alpha * v + p.beta * co.h_star * w
    return mu_phi, mu_rho


class StepOperator:
    """Condensed SPD operator on zero-mean (phi, rho) pairs.

    ``y_phi = -(1/(c M1 dt)) lap^-1 x_phi - eps lap x_phi + P(x)``,
    ``y_rho = -(1/(c M2 dt)) lap^-1 x_rho + Q(x)``, outputs projected to zero mean.
    """

    def __init__(self, model: Model, co: FrozenCoeffs, dt: float):
        p, g = model.params, model.grid
        self.grid = g
        self.co = co
        c = co.c_eff
        self.sym_phi = g.inv_ksq / (c * p.m1 * dt) + p.eps * g.ksq
        self.sym_rho = g.inv_ksq / (c * p.m2 * dt)
        self.mass_phi = 2.0 / p.eps * co.phi_star**2
        self.mass_rho = 0.5 * p.beta * co.h_star**2
        self.alpha = p.alpha

    def __call__(self, x: np.ndarray) -> np.ndarray:
        g, co = self.grid, self.co
        x1, x2 = x[0], x[1]
        x1_hat = g.fft(x1)
        q = x2 - _zdot(co.z_star, g.gradient_from_hat(x1_hat))
        y1 = g.ifft(self.sym_phi * x1_hat + self.alpha * g.divergence_hat(q * co.z_star)) + self.mass_phi * x1
        y2 = g.ifft(self.sym_rho * g.fft(x2)) + self.alpha * q + self.mass_rho * x2
        return project_pair(np.stack([y1, y2]))


def apply_operator(model: Model, co: FrozenCoeffs, dt: float, x_phi: np.ndarray, x_rho: np.ndarray):
    """Apply the condensed operator to a zero-mean pair; returns ``(y_phi, y_rho)``."""
    g = model.grid
    g._check_zero_mean(x_phi)
    g._check_zero_mean(x_rho)
    y = StepOperator(model, co, dt)(np.stack([x_phi, x_rho]))
    return y[0], y[1]


def operator_quadratic_form(model: Model, co: FrozenCoeffs, dt: float, x_phi: np.ndarray, x_rho: np.ndarray) -> float:
    """Sum-of-squares expansion of ``(A x, x)`` for zero-mean ``x``."""
    p, g = model.params, model.grid
    c = co.c_eff
    zgrad = _zdot(co.z_star, g.gradient(x_phi))
    return (
        g.norm_hminus1(x_phi) ** 2 / (c * p.m1 * dt)
        + g.norm_hminus1(x_rho) ** 2 / (c * p.m2 * dt)
        + p.eps * g.dirichlet(x_phi)
        + 2.0 / p.eps * g.norm_l2(co.phi_star * x_phi) ** 2
        + 0.5 * p.beta * g.norm_l2(co.h_star * x_rho) ** 2
        + p.alpha * g.norm_l2(x_rho - zgrad) ** 2
    )


def build_rhs(model: Model, co: FrozenCoeffs, dt: float) -> tuple[np.ndarray, float, float]:
    """Right-hand side of the condensed system and the conserved means.

    Returns ``(rhs, mean_phi, mean_rho)`` with ``rhs`` a zero-mean pair.
    """
    p, g = model.params, model.grid
    # the scheme conserves the mean of the base combination, which equals the
    # mean of the current level whenever the history itself conserves mass
    m_phi, m_rho = g.mean(co.phi_base), g.mean(co.rho_base)
    c = co.c_eff
    # chemical potentials at the constant (mean) part of the unknowns carry
    # every known contribution: sources plus the operator applied to the means
    const_phi = np.full(g.shape, m_phi)
    const_rho = np.full(g.shape, m_rho)
    mu_phi0, mu_rho0 = chemical_potentials(model, co, const_phi, const_rho)
    hist_phi = g.ifft(g.inv_ksq * g.fft(co.phi_base)) / (c * p.m1 * dt)
    hist_rho = g.ifft(g.inv_ksq * g.fft(co.rho_base)) / (c * p.m2 * dt)
    rhs = np.stack([hist_phi - mu_phi0 / co.weight, hist_rho - mu_rho0 / co.weight])
    return project_pair(rhs), m_phi, m_rho


def discrete_energy(model: Model, state: State, prev: State | None = None, kind=SchemeKind.FIRST_ORDER) -> float:
    """Modified energy dissipated by the scheme.

    First order and Crank-Nicolson use the quadratized energy of one level;
    BDF2 uses the two-level form with each square ``||x||^2`` replaced by
    ``(||x'||^2 + ||2x' - x||^2) / 2``.
    """
    kind = SchemeKind.parse(kind)
    if kind is not SchemeKind.BDF2 or prev is None:
        return model.energy_quadratized(state)
    p, g = model.params, model.grid

    def pair(a, b):
        return 0.5 * (float(np.sum(a * a)) + float(np.sum((2 * a - b) ** 2))) * g.cell_volume

    grad = 0.5 * (g.dirichlet(state.phi) + g.dirichlet(2 * state.phi - prev.phi))
    return (
        0.5 * p.eps * grad
        + pair(state.u, prev.u) / (4 * p.eps)
        + 0.5 * p.alpha * pair(state.v, prev.v)
        + p.beta * pair(state.w, prev.w)
        - p.beta * p.b_shift * g.volume
    )


def make_step_preconditioner(model: Model, co: FrozenCoeffs, dt: float):
    g = model.grid
    return make_preconditioner(
        g,
        model.params,
        dt,
        co.c_eff,
        phi_sq_mean=g.mean(co.phi_star**2),
        h_sq_mean=g.mean(co.h_star**2),
        z_sq_mean=g.mean(np.sum(co.z_star**2, axis=0)),
    )


def step(
    model: Model,
    state_n: State,
    state_nm1: State | None,
    dt: float,
    kind,
    solver_cfg: SolverConfig | None = None,
) -> StepReport:
    """Advance one time step; raises :class:`~surfphase.linsolve.SolverError` on failure."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    kind = SchemeKind.parse(kind)
    solver_cfg = solver_cfg or SolverConfig()
    t0 = time.perf_counter()
    g = model.grid

    co = freeze(model, state_n, state_nm1, kind)
    rhs, m_phi, m_rho = build_rhs(model, co, dt)
    op = StepOperator(model, co, dt)
    precond = make_step_preconditioner(model, co, dt) if solver_cfg.precondition else None
    x, stats = pcg(op, rhs, precond, solver_cfg)

    phi_new = x[0] + m_phi
    rho_new = x[1] + m_rho
    u, v, w = update_aux(model, co, phi_new, rho_new)
    new = State(phi_new, rho_new, u, v, w, time=state_n.time + dt)
    w_ok = model.check_w_positive(new)

    mu_phi, mu_rho = chemical_potentials(model, co, phi_new, rho_new)
    prev = state_n if kind is SchemeKind.BDF2 else None
    record = EnergyRecord(
        time=new.time,
        e_original=model.energy_original(phi_new, rho_new),
        e_discrete=discrete_energy(model, new, prev, kind),
        mass_phi=g.mean(phi_new),
        mass_rho=g.mean(rho_new),
        grad_mu_phi_sq=g.dirichlet(mu_phi),
        grad_mu_rho_sq=g.dirichlet(mu_rho),
        cg_iters=stats.iterations,
    )
    return StepReport(new, stats, record, time.perf_counter() - t0, w_ok)


def bdf2_bootstrap(model: Model, state0: State, dt: float, solver_cfg: SolverConfig | None = None):
    """First level for BDF2: one Crank-Nicolson step with ``phi° = phi^0``."""
    report = step(model, state0, state0, dt, SchemeKind.CRANK_NICOLSON, solver_cfg)
    return report.state_new, report


def initial_record(model: Model, state: State) -> EnergyRecord:
    g = model.grid
    return EnergyRecord(
        time=state.time,
        e_original=model.energy_original(state.phi, state.rho),
        e_discrete=model.energy_quadratized(state),
        mass_phi=g.mean(state.phi),
        mass_rho=g.mean(state.rho),
        grad_mu_phi_sq=float("nan"),
        grad_mu_rho_sq=float("nan"),
        cg_iters=0,
    )


def march(
    model: Model,
    state: State,
    dt: float,
    nsteps: int,
    kind,
    solver_cfg: SolverConfig | None = None,
    prev: State | None = None,
    bootstrap: str = "cn",
) -> Iterator[StepReport]:
    """Yield one :class:`StepReport` per step, managing multi-step history.

    ``prev`` resumes a multi-step scheme mid-run.  Without it BDF2 starts
    with a bootstrap step (``"cn"`` or ``"first"``) and Crank-Nicolson with
    constant extrapolation.
    """
    kind = SchemeKind.parse(kind)
    for _ in range(nsteps):
        if kind is SchemeKind.BDF2 and prev is None:
            if bootstrap == "cn":
                report = step(model, state, state, dt, SchemeKind.CRANK_NICOLSON, solver_cfg)
            elif bootstrap == "first":
                report = step(model, state, None, dt, SchemeKind.FIRST_ORDER, solver_cfg)
            else:
                raise ValueError(f"unknown bootstrap {bootstrap!r}")
            # report the BDF2 energy of the pair (1, 0) so the series is uniform
            report.energies.e_discrete = discrete_energy(model, report.state_new, state, kind)
        else:
            report = step(model, state, prev if kind.needs_history else None, dt, kind, solver_cfg)
        prev, state = state, report.state_new
        yield report
