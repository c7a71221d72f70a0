"""Matrix-free preconditioned conjugate gradients on zero-mean field pairs.

Unknowns are stacked arrays of shape ``(2, *grid.shape)`` holding the
mean-free parts of (phi, rho).  Every iterate is re-projected onto the
zero-mean subspace, where the step operators are symmetric positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .spectral import Grid

Operator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_iter: int = 1000
    precondition: bool = True

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("solver tolerances must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")


@dataclass
class SolveStats:
    iterations: int = 0
    final_residual: float = 0.0
    converged: bool = False
    history: list[float] = field(default_factory=list, repr=False)


class SolverError(RuntimeError):
    """PCG failed; ``stats`` describes how far it got."""

    def __init__(self, message: str, stats: SolveStats):
        super().__init__(message)
        self.stats = stats


def project_pair(x: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, x.ndim))
    return x - x.mean(axis=axes, keepdims=True)


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.vdot(a, b).real)


def pcg(
    apply: Operator,
    rhs: np.ndarray,
    precond: Operator | None = None,
    cfg: SolverConfig | None = None,
    x0: np.ndarray | None = None,
    callback: Callable[[np.ndarray], None] | None = None,
) -> tuple[np.ndarray, SolveStats]:
    """Solve ``apply(x) = rhs`` on the zero-mean subspace.

    Stops when the true residual satisfies ``||r|| <= max(rel_tol*||rhs||, abs_tol)``
    in the Euclidean norm.  Raises :class:`SolverError` on non-convergence or
    when a search direction has non-positive curvature.  ``callback`` sees
    each iterate.
    """
    cfg = cfg or SolverConfig()
    if precond is None or not cfg.precondition:
        precond = _identity
    rhs = project_pair(rhs)
    stats = SolveStats()
    bnorm = np.sqrt(_dot(rhs, rhs))
    tol = max(cfg.rel_tol * bnorm, cfg.abs_tol)

    x = np.zeros_like(rhs) if x0 is None else project_pair(np.array(x0, dtype=float))
    r = rhs - apply(x) if x0 is not None else rhs.copy()
    rnorm = np.sqrt(_dot(r, r))
    stats.history.append(rnorm)
    if rnorm <= tol:
        stats.converged = True
        stats.final_residual = rnorm / bnorm if bnorm > 0 else 0.0
        return x, stats

    z = project_pair(precond(r))
    p = z.copy()
    rz = _dot(r, z)
    while stats.iterations < cfg.max_iter:
        ap = project_pair(apply(p))
        curv = _dot(p, ap)
        if not curv > 0:
            stats.final_residual = rnorm / bnorm
            raise SolverError(f"non-positive curvature {curv:.3e} at iteration {stats.iterations}", stats)
        step = rz / curv
        x += step * p
        r -= step * ap
        stats.iterations += 1
        if callback is not None:
            callback(x)
        rnorm = np.sqrt(_dot(r, r))
        if rnorm <= tol:
            # guard against drift of the recursive residual
            r = project_pair(rhs - apply(x))
            rnorm = np.sqrt(_dot(r, r))
            stats.history.append(rnorm)
            if rnorm <= tol:
                stats.converged = True
                break
            z = project_pair(precond(r))
            p = z.copy()
            rz = _dot(r, z)
            continue
        stats.history.append(rnorm)
        z = project_pair(precond(r))
        rz_new = _dot(r, z)
        p = project_pair(z + (rz_new / rz) * p)
        rz = rz_new

    stats.final_residual = rnorm / bnorm
    if not stats.converged:
        raise SolverError(
            f"PCG did not converge in {cfg.max_iter} iterations (relative residual {stats.final_residual:.3e})",
            stats,
        )
    return project_pair(x), stats


def _identity(r: np.ndarray) -> np.ndarray:
    return r


class SpectralPreconditioner:
    """Constant-coefficient, per-field diagonal approximation in Fourier space.

    For ``k != 0`` the phi-block symbol is
    ``1/(c M1 dt |k|^2) + eps |k|^2 + alpha <|Z*|^2> |k|^2 + (2/eps) <phi*^2>``
    and the rho-block symbol ``1/(c M2 dt |k|^2) + alpha + (beta/2) <H*^2>``,
    with ``<.>`` the domain average.  Calling the object applies the inverse.
    """

    def __init__(
        self,
        grid: Grid,
        params,
        dt: float,
        c: float,
        phi_sq_mean: float = 0.0,
        h_sq_mean: float = 0.0,
        z_sq_mean: float = 0.0,
    ):
        self.grid = grid
        ksq = grid.ksq
        inv = grid.inv_ksq
        sym_phi = inv / (c * params.m1 * dt) + (params.eps + params.alpha * z_sq_mean) * ksq
        sym_phi = sym_phi + 2.0 / params.eps * phi_sq_mean
        sym_rho = inv / (c * params.m2 * dt) + params.alpha + 0.5 * params.beta * h_sq_mean
        zero = ksq == 0
        sym_phi = np.where(zero, 0.0, sym_phi)
        sym_rho = np.where(zero, 0.0, sym_rho)
        self.symbols = (sym_phi, sym_rho)
        self.inv_symbols = tuple(np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, s)) for s in self.symbols)

    def _mult(self, x: np.ndarray, symbols) -> np.ndarray:
        g = self.grid
        return np.stack([g.ifft(s * g.fft(xi)) for s, xi in zip(symbols, x)])

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return self._mult(r, self.inv_symbols)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Apply the approximating operator itself."""
        return self._mult(x, self.symbols)


def make_preconditioner(grid: Grid, params, dt: float, c: float, **means) -> SpectralPreconditioner:
    return SpectralPreconditioner(grid, params, dt, c, **means)
