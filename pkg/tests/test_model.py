import math

import numpy as np
import pytest

from surfphase.model import G_reg, Model, ModelParams, State, g_reg
from surfphase.spectral import Grid

EH = 1e-4


def fh(r):
    return r * math.log(r) + (1 - r) * math.log(1 - r)


def test_params_defaults_and_validation():
    p = ModelParams()
    assert (p.eps, p.alpha, p.beta, p.b_shift, p.m1, p.m2, p.eps_hat, p.eta) == (0.05, 0.01, 0.05, 1.0, 0.01, 0.01, 1e-4, 1e-6)
    for bad in (dict(eps=0), dict(alpha=-1), dict(m2=0), dict(eps_hat=0.5), dict(eta=-1e-3), dict(b_shift=0.5)):
        with pytest.raises(ValueError):
            ModelParams(**bad)
    assert ModelParams(eta=0.0).eta == 0.0
    assert p.replace(alpha=0.2).alpha == 0.2


def test_potential_values():
    assert G_reg(0.5, EH) == pytest.approx(math.log(0.5), abs=1e-15)
    assert g_reg(0.5, EH) == 0.0
    assert g_reg(0.3, EH) == pytest.approx(math.log(3 / 7), rel=1e-14)
    for r in (EH * 1.0001, 0.1, 0.37, 0.9, 1 - EH * 1.0001):
        assert G_reg(r, EH) == pytest.approx(fh(r), rel=1e-14, abs=1e-15)


def test_potential_breakpoints_continuous():
    # G_reg evaluates the regularized branch exactly at each breakpoint;
    # compare it with the logarithmic branch there
    for b in (EH, 1 - EH):
        assert abs(G_reg(b, EH) - fh(b)) < 1e-12
        assert abs(g_reg(b, EH) - math.log(b / (1 - b))) < 1e-10
    lo, hi = g_reg(np.array([EH - 1e-12, EH + 1e-12]), EH)
    assert abs(hi - lo) < 1e-7


def _fd_samples(d):
    return np.concatenate([np.linspace(-1, 2, 1000), [EH - d, EH + d, 1 - EH - d, 1 - EH + d]])


@pytest.mark.xfail(
    strict=True,
    reason="central-difference truncation |G'''| d^2/6 is about 1.4e-3 at eps_hat + d, where G''' ~ -1/rho^2",
)
def test_derivative_matches_finite_differences_at_1e5_step():
    d = 1e-5
    rho = _fd_samples(d)
    fd = (G_reg(rho + d, EH) - G_reg(rho - d, EH)) / (2 * d)
    assert np.max(np.abs(g_reg(rho, EH) - fd)) <= 1e-6


def test_derivative_matches_finite_differences():
    d = 1e-8
    rho = _fd_samples(1e-5)
    fd = (G_reg(rho + d, EH) - G_reg(rho - d, EH)) / (2 * d)
    g = g_reg(rho, EH)
    assert np.max(np.abs(g - fd) / np.maximum(1.0, np.abs(g))) <= 1e-6


def test_fd_truncation_accounts_for_the_1e5_gap():
    d = 1e-5
    r = EH + d
    fd = (G_reg(r + d, EH) - G_reg(r - d, EH)) / (2 * d)
    third = -1 / r**2 + 1 / (1 - r) ** 2
    # the stencil touches the breakpoint, so allow 10% slack on the estimate
    assert abs(fd - g_reg(r, EH)) == pytest.approx(abs(third) * d**2 / 6, rel=0.1)


def test_potential_is_convex():
    rho = np.linspace(-1, 2, 1001)
    mid = 0.5 * (rho[:-2] + rho[2:])
    assert np.all(G_reg(mid, EH) <= 0.5 * (G_reg(rho[:-2], EH) + G_reg(rho[2:], EH)) + 1e-12)


def test_h_field(model32):
    g = model32.grid
    assert np.max(np.abs(model32.h_field(np.full(g.shape, 0.5)))) == 0
    h = model32.h_field(np.full(g.shape, 0.3))
    assert h[0, 0] == pytest.approx(math.log(3 / 7) / math.sqrt(fh(0.3) + 1), rel=1e-14)
    assert np.all(np.isfinite(model32.h_field(np.full(g.shape, -5.0))))


def test_z_field(model32):
    g = model32.grid
    x, y = g.coords
    assert np.max(np.abs(model32.z_field(np.full(g.shape, 0.7)))) == 0
    phi = np.sin(x) + 0.3 * np.cos(2 * y)
    z = model32.z_field(phi)
    zn = np.sqrt(np.sum(z**2, axis=0))
    assert np.all(zn <= 1)
    steep = np.sqrt(np.sum(g.gradient(phi) ** 2, axis=0)) > 1e3 * model32.params.eta
    assert np.all(np.abs(zn[steep] - 1) <= 1e-6)
    assert np.allclose(model32.z_field(2 * phi)[:, steep], z[:, steep], atol=1e-6)
    flat = Model(g, ModelParams(eta=0.0)).z_field(np.zeros(g.shape))
    assert np.all(flat == 0)


def test_energy_of_constant_states(model32):
    g, p = model32.grid, model32.params
    vol = g.volume
    one, half = np.ones(g.shape), np.full(g.shape, 0.5)
    # |grad phi| is the regularized magnitude, eta for constants
    e1 = vol * (0.5 * p.alpha * (0.5 - p.eta) ** 2 + p.beta * math.log(0.5))
    assert model32.energy_original(one, half) == pytest.approx(e1, rel=1e-13)
    e0 = vol * (1 / (4 * p.eps) + 0.5 * p.alpha * (0.5 - p.eta) ** 2 + p.beta * math.log(0.5))
    assert model32.energy_original(0 * one, half) == pytest.approx(e0, rel=1e-13)


def test_quadratized_energy_of_constant_state(model32):
    g, p = model32.grid, model32.params
    w = math.sqrt(1 + math.log(0.5))
    s = State(np.ones(g.shape), np.full(g.shape, 0.5), np.zeros(g.shape), np.full(g.shape, 0.5), np.full(g.shape, w))
    expected = g.volume * (p.alpha / 8 + p.beta * (1 + math.log(0.5)) - p.beta * p.b_shift)
    assert model32.energy_quadratized(s) == pytest.approx(expected, rel=1e-13)


def test_init_state(model32):
    g, p = model32.grid, model32.params
    x, y = g.coords
    s = model32.init_state(np.zeros(g.shape), np.full(g.shape, 0.5))
    assert np.all(s.u == -1)
    assert s.w[0, 0] == pytest.approx(math.sqrt(1 + math.log(0.5)), rel=1e-14)
    assert s.w[0, 0] == pytest.approx(0.5539, abs=1e-4)
    assert s.time == 0.0
    with pytest.raises(ValueError):
        model32.init_state(np.zeros((4, 4)), np.zeros((4, 4)))


def test_init_state_v_against_finite_differences():
    g = Grid(256)
    model = Model(g, ModelParams())
    x, y = g.coords
    phi = 0.1 * np.cos(3 * x) + 0.4 * np.cos(y)
    rho = 0.2 * np.sin(2 * x) + 0.5 * np.sin(y)
    s = model.init_state(phi, rho)
    gx = (np.roll(phi, -1, 0) - np.roll(phi, 1, 0)) / (2 * g.h)
    gy = (np.roll(phi, -1, 1) - np.roll(phi, 1, 1)) / (2 * g.h)
    v_fd = rho - np.sqrt(gx**2 + gy**2 + model.params.eta**2)
    # central differences: error ~ h^2 |phi'''| / 6
    assert np.max(np.abs(s.v - v_fd)) < g.h**2 * 2.7 / 6


def test_quadratized_equals_original_at_init(model32):
    g = model32.grid
    x, y = g.coords
    s = model32.init_state(0.1 * np.cos(3 * x) + 0.4 * np.cos(y), 0.2 * np.sin(2 * x) + 0.5 * np.sin(y))
    e_orig = model32.energy_original(s.phi, s.rho)
    assert model32.energy_quadratized(s) == pytest.approx(e_orig, rel=1e-10)
    p = model32.params
    assert model32.energy_quadratized(s) + p.beta * p.b_shift * g.volume >= 0


def test_state_shape_check():
    a = np.zeros((8, 8))
    with pytest.raises(ValueError):
        State(a, a, a, a, np.zeros((4, 4)))
    s = State(a, a, a, a, a + 1, time=2.0)
    c = s.copy()
    c.phi[0, 0] = 5
    assert s.phi[0, 0] == 0 and c.time == 2.0
    assert list(s.as_dict()) == ["phi", "rho", "u", "v", "w"]


def test_w_positivity_check(model32):
    g = model32.grid
    a = np.zeros(g.shape)
    assert model32.check_w_positive(State(a, a, a, a, a + 1))
    assert not model32.check_w_positive(State(a, a, a, a, a - 1))
