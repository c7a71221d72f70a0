"""Energy/mass records, error norms and convergence-order bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spectral import Grid

CSV_COLUMNS = ("time", "e_discrete", "e_original", "mass_phi", "mass_rho", "cg_iters")


@dataclass
class EnergyRecord:
    time: float
    e_original: float
    e_discrete: float
    mass_phi: float
    mass_rho: float
    grad_mu_phi_sq: float
    grad_mu_rho_sq: float
    cg_iters: int = 0

    def csv_row(self) -> list[str]:
        return [repr(float(getattr(self, c))) if c != "cg_iters" else str(self.cg_iters) for c in CSV_COLUMNS]


@dataclass
class ConvergenceRow:
    dt: float
    error_l2: float
    observed_order: float | None = None


def l2_error_pair(grid: Grid, a, b) -> float:
    """``||phi_a - phi_b|| + ||rho_a - rho_b||`` (plain sum of the two L2 errors)."""
    return grid.norm_l2(a.phi - b.phi) + grid.norm_l2(a.rho - b.rho)


def observed_orders(dts: Sequence[float], errors: Sequence[float]) -> list[float | None]:
    """Pairwise orders ``log(e_prev/e) / log(dt_prev/dt)``; the first entry is None."""
    out: list[float | None] = [None]
    for i in range(1, len(errors)):
        out.append(math.log(errors[i - 1] / errors[i]) / math.log(dts[i - 1] / dts[i]))
    return out[: len(errors)]


def convergence_rows(dts: Sequence[float], errors: Sequence[float]) -> list[ConvergenceRow]:
    return [ConvergenceRow(dt, e, o) for dt, e, o in zip(dts, errors, observed_orders(dts, errors))]


def energy_increases(values: Sequence[float], rel_slack: float = 1e-10) -> list[tuple[int, float]]:
    """Steps where ``E[i+1] - E[i]`` exceeds ``rel_slack * (1 + |E[i]|)``."""
    bad = []
    for i in range(len(values) - 1):
        jump = values[i + 1] - values[i]
        if jump > rel_slack * (1 + abs(values[i])):
            bad.append((i, jump))
    return bad


def mass_drift(records: Sequence[EnergyRecord]) -> tuple[float, float]:
    """Largest deviation of the phi and rho means from their first value."""
    mp = np.array([r.mass_phi for r in records])
    mr = np.array([r.mass_rho for r in records])
    return float(np.max(np.abs(mp - mp[0]))), float(np.max(np.abs(mr - mr[0])))
