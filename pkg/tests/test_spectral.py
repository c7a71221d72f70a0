import math

import numpy as np
import pytest

from surfphase.spectral import Grid


def test_grid_layout():
    g = Grid(16)
    assert g.shape == (16, 16)
    assert g.size == 256
    assert np.allclose(g.points, np.arange(16) * 2 * np.pi / 16)
    k = g.wavenumbers
    assert sorted(np.abs(k).tolist()).count(8.0) == 1
    assert np.max(np.abs(k)) == 8
    assert len(set(k.tolist())) == 16
    assert Grid(8, dim=3).size == 512


@pytest.mark.parametrize("bad", [dict(n=4), dict(n=16, dim=1), dict(n=16, length=0.0), dict(n=10.5)])
def test_grid_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        Grid(**bad)


def test_round_trip(rng):
    g = Grid(32)
    f = rng.standard_normal(g.shape)
    back = g.ifft(g.fft(f))
    assert np.max(np.abs(back - f)) <= 1e-12 * np.max(np.abs(f))


def test_gradient_of_constant_and_sine(grid32):
    x, y = grid32.coords
    assert np.max(np.abs(grid32.gradient(np.full(grid32.shape, 3.0)))) < 1e-14
    gx, gy = grid32.gradient(np.sin(x))
    assert np.max(np.abs(gx - np.cos(x))) < 1e-12
    assert np.max(np.abs(gy)) < 1e-12


def test_gradient_of_accuracy_profile(grid32):
    x, y = grid32.coords
    gx, gy = grid32.gradient(0.1 * np.cos(3 * x) + 0.4 * np.cos(y))
    assert np.max(np.abs(gx + 0.3 * np.sin(3 * x))) < 1e-12
    assert np.max(np.abs(gy + 0.4 * np.sin(y))) < 1e-12


def test_divergence_examples(grid32):
    x, y = grid32.coords
    const = np.stack([np.full(grid32.shape, 2.0), np.full(grid32.shape, -1.0)])
    assert np.max(np.abs(grid32.divergence(const))) < 1e-13
    f = np.sin(x) * np.sin(y)
    assert np.max(np.abs(grid32.divergence(grid32.gradient(f)) + 2 * f)) < 1e-12
    assert np.max(np.abs(grid32.divergence(np.stack([np.cos(y), np.cos(x)])))) < 1e-13


def test_div_grad_matches_laplacian(rng):
    g = Grid(32)
    # band-limited data: the two only differ on the Nyquist mode
    f = g.ifft(np.where(g.ksq < 12**2, g.fft(rng.standard_normal(g.shape)), 0))
    lap = g.laplacian(f)
    assert np.max(np.abs(g.divergence(g.gradient(f)) - lap)) <= 1e-12 * np.max(np.abs(lap))


def test_laplacian_eigenfunction(grid32):
    x, _ = grid32.coords
    assert np.max(np.abs(grid32.laplacian(np.sin(2 * x)) + 4 * np.sin(2 * x))) < 1e-12
    assert np.max(np.abs(grid32.laplacian(np.ones(grid32.shape)))) < 1e-14


def test_laplacian_against_finite_differences():
    g = Grid(512)
    x, _ = g.coords
    f = np.exp(np.cos(x))
    fd = (np.roll(f, -1, axis=0) - 2 * f + np.roll(f, 1, axis=0)) / g.h**2
    err = np.max(np.abs(g.laplacian(f) - fd))
    # second-order truncation error, bounded by h^2/12 * max|f''''|
    assert err < g.h**2 * 20 / 12
    assert err > 0


def test_inverse_laplacian(grid32, rng):
    x, _ = grid32.coords
    assert np.max(np.abs(grid32.inv_laplacian_zeromean(np.zeros(grid32.shape)))) == 0
    assert np.max(np.abs(grid32.inv_laplacian_zeromean(np.sin(x)) + np.sin(x))) < 1e-12
    f = grid32.project_zero_mean(rng.standard_normal(grid32.shape))
    back = grid32.inv_laplacian_zeromean(grid32.laplacian(f))
    assert np.max(np.abs(back - f)) <= 1e-10 * np.max(np.abs(f))
    assert abs(grid32.mean(back)) < 1e-14


def test_inverse_laplacian_rejects_nonzero_mean(grid32):
    with pytest.raises(ValueError, match="mean"):
        grid32.inv_laplacian_zeromean(np.ones(grid32.shape))


def test_mean_and_projection(grid32, rng):
    x, _ = grid32.coords
    assert grid32.mean(np.full(grid32.shape, 3.0)) == 3.0
    assert np.all(grid32.project_zero_mean(np.full(grid32.shape, 3.0)) == 0)
    assert abs(grid32.mean(np.sin(x))) < 1e-16
    noise = rng.uniform(-1, 1, grid32.shape)
    f = 0.3 + 0.001 * (noise - noise.mean())
    assert abs(grid32.mean(f) - 0.3) < 1e-14


def test_norms(grid32, rng):
    x, _ = grid32.coords
    f = rng.standard_normal(grid32.shape)
    assert grid32.inner(f, f) > 0
    assert grid32.inner(np.zeros(grid32.shape), np.zeros(grid32.shape)) == 0
    assert grid32.norm_l2(np.sin(x)) == pytest.approx(math.sqrt(2 * math.pi**2), rel=1e-13)
    assert grid32.norm_hminus1(np.sin(x)) == pytest.approx(grid32.norm_l2(np.sin(x)), rel=1e-13)


def test_parseval(grid32, rng):
    f = rng.standard_normal(grid32.shape)
    f_hat = np.fft.fftn(f)
    spectral = math.sqrt(np.sum(np.abs(f_hat) ** 2) / f.size * grid32.cell_volume)
    assert grid32.norm_l2(f) == pytest.approx(spectral, rel=1e-12)


def test_adjointness(grid32, rng):
    f = rng.standard_normal(grid32.shape)
    v = rng.standard_normal((2,) + grid32.shape)
    lhs = grid32.inner(grid32.gradient(f), v)
    rhs = -grid32.inner(f, grid32.divergence(v))
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_dirichlet_matches_minus_laplacian_pairing(grid32, rng):
    f = rng.standard_normal(grid32.shape)
    assert grid32.dirichlet(f) == pytest.approx(grid32.inner(f, -grid32.laplacian(f)), rel=1e-12)
    x, _ = grid32.coords
    # smooth field: equals the plain squared gradient norm
    assert grid32.dirichlet(np.sin(x)) == pytest.approx(2 * math.pi**2, rel=1e-13)


def test_dealias_truncation():
    g = Grid(24, dealias=True)
    x, _ = g.coords
    f = np.sin(x) + np.sin(10 * x)
    assert np.max(np.abs(g.truncate(f) - np.sin(x))) < 1e-13
    assert Grid(24).truncate(f) is f


def test_three_dimensional_operators():
    g = Grid(16, dim=3)
    x, y, z = g.coords
    f = np.sin(x) * np.cos(2 * z)
    assert np.max(np.abs(g.laplacian(f) + 5 * f)) < 1e-12
    grad = g.gradient(f)
    assert grad.shape == (3, 16, 16, 16)
    assert np.max(np.abs(grad[2] + 2 * np.sin(x) * np.sin(2 * z))) < 1e-12
