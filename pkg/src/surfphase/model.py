"""Binary fluid-surfactant free energy, its quadratized form and auxiliary fields."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import ClassVar

import numpy as np

from .spectral import Grid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the two-field model.

    Defaults are the standard benchmark set: ``eps_hat=1e-4``, ``M1=M2=0.01``,
    ``eps=0.05``, ``alpha=0.01``, ``beta=0.05``, ``B=1``.  ``eta`` smooths
    ``|grad phi|`` where the gradient vanishes.
    """

    eps: float = 0.05
    alpha: float = 0.01
    beta: float = 0.05
    b_shift: float = 1.0
    m1: float = 0.01
    m2: float = 0.01
    eps_hat: float = 1e-4
    eta: float = 1e-6

    def __post_init__(self):
        for name in ("eps", "alpha", "beta", "b_shift", "m1", "m2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.eps_hat < 0.5:
            raise ValueError(f"eps_hat must lie in (0, 1/2), got {self.eps_hat}")
        if not self.eta >= 0:
            raise ValueError(f"eta must be non-negative, got {self.eta}")
        # G_reg is convex and symmetric about 1/2, so its minimum is G_reg(1/2)
        if not G_reg(0.5, self.eps_hat) + self.b_shift > 0:
            raise ValueError(f"b_shift={self.b_shift} does not keep G_reg + B positive")

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def G_reg(rho, eps_hat: float):
    """Regularized Flory-Huggins potential, C^2 and convex on the real line."""
    r = np.asarray(rho, dtype=float)
    out = np.empty_like(r)
    hi = r >= 1 - eps_hat
    lo = r <= eps_hat
    mid = ~(hi | lo)
    rm = r[mid]
    out[mid] = rm * np.log(rm) + (1 - rm) * np.log(1 - rm)
    rh = r[hi]
    out[hi] = rh * np.log(rh) + (1 - rh) ** 2 / (2 * eps_hat) + (1 - rh) * np.log(eps_hat) - eps_hat / 2
    rl = r[lo]
    out[lo] = (1 - rl) * np.log(1 - rl) + rl**2 / (2 * eps_hat) + rl * np.log(eps_hat) - eps_hat / 2
    return out if out.ndim else float(out)


def g_reg(rho, eps_hat: float):
    """Derivative of :func:`G_reg`."""
    r = np.asarray(rho, dtype=float)
    out = np.empty_like(r)
    hi = r >= 1 - eps_hat
    lo = r <= eps_hat
    mid = ~(hi | lo)
    rm = r[mid]
    out[mid] = np.log(rm / (1 - rm))
    rh = r[hi]
    out[hi] = np.log(rh) + 1 - (1 - rh) / eps_hat - np.log(eps_hat)
    rl = r[lo]
    out[lo] = -np.log(1 - rl) - 1 + rl / eps_hat + np.log(eps_hat)
    return out if out.ndim else float(out)


@dataclass
class State:
    """Solution at one time level: phases, auxiliaries U, V, W and the time."""

    phi: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    time: float = 0.0
    fields: ClassVar[tuple[str, ...]] = ("phi", "rho", "u", "v", "w")

    def __post_init__(self):
        shapes = {getattr(self, f).shape for f in self.fields}
        if len(shapes) != 1:
            raise ValueError(f"state fields disagree in shape: {shapes}")

    def copy(self) -> "State":
        return State(*(getattr(self, f).copy() for f in self.fields), time=self.time)

    def as_dict(self) -> dict[str, np.ndarray]:
        return {f: getattr(self, f) for f in self.fields}


class Model:
    """Free energy and nonlinear coefficient fields on a fixed grid."""

    def __init__(self, grid: Grid, params: ModelParams | None = None):
        self.grid = grid
        self.params = params or ModelParams()

    def G(self, rho):
        return G_reg(rho, self.params.eps_hat)

    def g(self, rho):
        return g_reg(rho, self.params.eps_hat)

    def h_field(self, rho: np.ndarray) -> np.ndarray:
        """``H = g(rho) / sqrt(G(rho) + B)`` pointwise."""
        return self.g(rho) / np.sqrt(self.G(rho) + self.params.b_shift)

    def grad_magnitude(self, phi: np.ndarray, grad: np.ndarray | None = None) -> np.ndarray:
        """Regularized ``sqrt(|grad phi|^2 + eta^2)``."""
        if grad is None:
            grad = self.grid.gradient(phi)
        return np.sqrt(np.sum(grad**2, axis=0) + self.params.eta**2)

    def z_field(self, phi: np.ndarray) -> np.ndarray:
        """Unit normal ``grad phi / |grad phi|_eta``; 0 where the gradient and eta vanish."""
        grad = self.grid.gradient(phi)
        mag = self.grad_magnitude(phi, grad)
        with np.errstate(invalid="ignore", divide="ignore"):
            z = grad / mag
        return np.where(mag > 0, z, 0.0)

    def energy_original(self, phi: np.ndarray, rho: np.ndarray) -> float:
        p, g = self.params, self.grid
        mag = self.grad_magnitude(phi)
        bulk = (phi**2 - 1) ** 2 / (4 * p.eps) + 0.5 * p.alpha * (rho - mag) ** 2 + p.beta * self.G(rho)
        return 0.5 * p.eps * g.dirichlet(phi) + float(np.sum(bulk)) * g.cell_volume

    def energy_quadratized(self, state: State) -> float:
        p, g = self.params, self.grid
        bulk = state.u**2 / (4 * p.eps) + 0.5 * p.alpha * state.v**2 + p.beta * state.w**2
        return 0.5 * p.eps * g.dirichlet(state.phi) + float(np.sum(bulk)) * g.cell_volume - p.beta * p.b_shift * g.volume

    def init_state(self, phi0: np.ndarray, rho0: np.ndarray) -> State:
        phi0 = np.asarray(phi0, dtype=float)
        rho0 = np.asarray(rho0, dtype=float)
        if phi0.shape != self.grid.shape or rho0.shape != self.grid.shape:
            raise ValueError(f"initial fields must have shape {self.grid.shape}")
        shifted = self.G(rho0) + self.params.b_shift
        if np.any(shifted <= 0):
            raise ValueError("G_reg(rho0) + B must be positive everywhere")
        return State(
            phi=phi0.copy(),
            rho=rho0.copy(),
            u=phi0**2 - 1,
            v=rho0 - self.grad_magnitude(phi0),
            w=np.sqrt(shifted),
            time=0.0,
        )

    def mass(self, f: np.ndarray) -> float:
        return self.grid.mean(f)

    def check_w_positive(self, state: State) -> bool:
        ok = bool(np.all(state.w > 0))
        if not ok:
            log.debug("W lost positivity at t=%g (min %.3e)", state.time, float(state.w.min()))
        return ok
