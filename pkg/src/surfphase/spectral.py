"""Periodic collocation grid and Fourier pseudo-spectral operators.

Fields are plain numpy arrays of shape ``(n,) * dim`` in physical space;
vector fields carry a leading axis of length ``dim``.  Transforms are real
(``rfftn``), so the last axis of every spectrum has ``n // 2 + 1`` entries.

The first-derivative symbol ``i k`` is zeroed on the Nyquist frequency so
that ``gradient`` and ``divergence`` are exact negative adjoints on real
grid functions.  The Laplacian keeps the full ``-|k|^2`` symbol, which makes
it invertible on every non-constant mode.  For fields without Nyquist
content the two agree exactly.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

MEAN_TOL = 1e-12


class Grid:
    """Uniform periodic grid on ``[0, length)^dim`` with ``n`` points per axis."""

    def __init__(self, n: int, dim: int = 2, length: float = 2 * np.pi, dealias: bool = False):
        if dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {dim}")
        if int(n) != n or n < 8:
            raise ValueError(f"n must be an integer >= 8, got {n}")
        if not length > 0:
            raise ValueError(f"length must be positive, got {length}")
        self.n = int(n)
        self.dim = dim
        self.length = float(length)
        self.dealias = bool(dealias)

    def __repr__(self) -> str:
        return f"Grid(n={self.n}, dim={self.dim}, length={self.length!r}, dealias={self.dealias})"

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def volume(self) -> float:
        return self.length**self.dim

    @cached_property
    def points(self) -> np.ndarray:
        """1-D collocation coordinates ``j * length / n``."""
        return np.arange(self.n) * self.h

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Full coordinate arrays, one per axis (``indexing='ij'``)."""
        return tuple(np.meshgrid(*([self.points] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in standard FFT ordering (one axis)."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n) * (2 * np.pi / self.length)

    @cached_property
    def _k_axes(self) -> tuple[np.ndarray, ...]:
        # broadcastable wavenumber arrays in rfftn layout
        scale = 2 * np.pi / self.length
        full = np.fft.fftfreq(self.n, d=1.0 / self.n) * scale
        half = np.fft.rfftfreq(self.n, d=1.0 / self.n) * scale
        axes = []
        for ax in range(self.dim):
            k = half if ax == self.dim - 1 else full
            shape = [1] * self.dim
            shape[ax] = k.size
            axes.append(k.reshape(shape))
        return tuple(axes)

    @cached_property
    def _ik(self) -> tuple[np.ndarray, ...]:
        nyq = self.n // 2 * (2 * np.pi / self.length)
        out = []
        for k in self._k_axes:
            kd = np.where(np.isclose(np.abs(k), nyq), 0.0, k) if self.n % 2 == 0 else k
            out.append(1j * kd)
        return tuple(out)

    @cached_property
    def ksq(self) -> np.ndarray:
        """``|k|^2`` in rfftn layout."""
        return sum(k**2 for k in self._k_axes)

    @cached_property
    def inv_ksq(self) -> np.ndarray:
        """``1/|k|^2`` with the zero mode set to zero."""
        out = np.zeros_like(self.ksq)
        nz = self.ksq > 0
        out[nz] = 1.0 / self.ksq[nz]
        return out

    @cached_property
    def _dealias_mask(self) -> np.ndarray:
        kmax = self.n / 3 * (2 * np.pi / self.length)
        mask = np.ones(self.ksq.shape, dtype=bool)
        for k in self._k_axes:
            mask &= np.abs(k) < kmax
        return mask

    # transforms -----------------------------------------------------------

    def fft(self, f: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(f, axes=tuple(range(-self.dim, 0)))

    def ifft(self, f_hat: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(f_hat, s=self.shape, axes=tuple(range(-self.dim, 0)))

    # differential operators -------------------------------------------------

    def gradient(self, f: np.ndarray) -> np.ndarray:
        return self.gradient_from_hat(self.fft(f))

    def gradient_from_hat(self, f_hat: np.ndarray) -> np.ndarray:
        return np.stack([self.ifft(ik * f_hat) for ik in self._ik])

    def divergence(self, v: np.ndarray) -> np.ndarray:
        return self.ifft(self.divergence_hat(v))

    def divergence_hat(self, v: np.ndarray) -> np.ndarray:
        """Spectrum of ``div v``; lets callers fuse further spectral terms."""
        acc = self._ik[0] * self.fft(v[0])
        for ik, comp in zip(self._ik[1:], v[1:]):
            acc = acc + ik * self.fft(comp)
        return acc

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.ifft(-self.ksq * self.fft(f))

    def inv_laplacian_zeromean(self, f: np.ndarray) -> np.ndarray:
        """Solve ``lap v = f`` with ``mean(v) = 0``; ``f`` must have zero mean."""
        self._check_zero_mean(f)
        return self.ifft(-self.inv_ksq * self.fft(f))

    def truncate(self, f: np.ndarray) -> np.ndarray:
        """2/3-rule truncation of ``f``; identity when dealiasing is off."""
        if not self.dealias:
            return f
        return self.ifft(np.where(self._dealias_mask, self.fft(f), 0.0))

    # averages and inner products --------------------------------------------

    def mean(self, f: np.ndarray) -> float:
        return float(np.mean(f))

    def project_zero_mean(self, f: np.ndarray) -> np.ndarray:
        return f - np.mean(f, axis=tuple(range(-self.dim, 0)), keepdims=True)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """L2 inner product by the periodic trapezoid rule (sums over vector axes too)."""
        return float(np.vdot(f, g).real) * self.cell_volume

    def norm_l2(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def norm_hminus1(self, f: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(-self.inv_laplacian_zeromean(f), f), 0.0)))

    def dirichlet(self, f: np.ndarray) -> float:
        """``||grad f||^2`` evaluated as ``(f, -lap f)`` via Parseval.

        Consistent with ``laplacian`` on every mode, including Nyquist, which
        is what the discrete energy laws need.
        """
        f_hat = self.fft(f)
        w = np.full(f_hat.shape, 2.0)
        w[..., 0] = 1.0
        if self.n % 2 == 0:
            w[..., -1] = 1.0
        s = np.sum(w * self.ksq * (f_hat.real**2 + f_hat.imag**2))
        return float(s) * self.cell_volume / self.size

    def _check_zero_mean(self, f: np.ndarray) -> None:
        m = float(np.mean(f))
        scale = float(np.max(np.abs(f))) if f.size else 0.0
        if abs(m) > MEAN_TOL * scale:
            raise ValueError(f"field mean {m:.3e} is not zero; project before inverting")
