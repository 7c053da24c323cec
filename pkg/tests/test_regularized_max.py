import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad, quad

from pshglue.complex_calculus import is_strictly_psh
from pshglue.errors import ConfigError, DomainError
from pshglue.potentials import VarietySpec, euclidean_potential, log_pole_potential, quadratic_potential
from pshglue.regularized_max import (DEFAULT_KERNEL, MollifierKernel, RegMaxParams, fd_hessian_2d, probe_grid,
                                     reg_max, reg_max_field, reg_max_hessian)
from pshglue.sampling import ball_samples

# reg_max(0, 0) for delta = 1 and the default kernel; frozen from a 2-D quadrature of
# E[max(h1, h2)] / 2 (0.10822510822510889) and from the 1-D autocorrelation integral.
DIAGONAL_VALUE = 25 / 231

finite = st.floats(-1e3, 1e3, allow_nan=False)
deltas = st.floats(1e-3, 10.0)


def rho15(h):
    return 15 / 16 * (1 - h * h) ** 2 if abs(h) <= 1 else 0.0


def quadrature_oracle(x, y, delta):
    a = delta / 2
    val, _ = dblquad(lambda h2, h1: max(x + a * h1, y + a * h2) * rho15(h1) * rho15(h2),
                     -1, 1, -1, 1, epsabs=1e-13, epsrel=1e-13)
    return val


def test_kernel_exact_coefficients():
    k = DEFAULT_KERNEL
    assert k.rho_coeffs == (Fraction(15, 16), 0, Fraction(-15, 8), 0, Fraction(15, 16))
    assert k.diagonal_constant == Fraction(50, 231)
    assert k.degree == 4 and k.regularity == 6
    assert MollifierKernel.from_degree(6).power == 3
    with pytest.raises(ConfigError):
        MollifierKernel(1)
    with pytest.raises(ConfigError):
        MollifierKernel.from_degree(5)


def test_kernel_mass_and_autocorrelation():
    k = DEFAULT_KERNEL
    assert abs(quad(lambda h: float(k.rho(h)), -1, 1)[0] - 1) < 1e-14
    for s in (0.0, 0.3, 1.1, 1.9):
        ref = quad(lambda h: rho15(h) * rho15(h + s), -1, 1 - s, epsabs=1e-14)[0]
        assert abs(k.autocorrelation(s) - ref) < 1e-13
    assert k.autocorrelation(2.5) == 0.0
    assert abs(quad(lambda s: float(k.autocorrelation(s)), -2, 2)[0] - 1) < 1e-13


def test_diagonal_value():
    assert reg_max(0.0, 0.0, RegMaxParams(1.0)) == pytest.approx(DIAGONAL_VALUE, abs=1e-15)
    auto = quad(lambda s: s * quad(lambda h: rho15(h) * rho15(h + s), -1, 1 - s, epsabs=1e-15)[0], 0, 2,
                epsabs=1e-15)[0]
    assert abs(auto / 2 - DIAGONAL_VALUE) < 1e-13


@pytest.mark.parametrize("x, y, delta", [(0.0, 0.0, 1.0), (0.3, 0.1, 0.5), (-1.0, -1.4, 0.5), (2.0, 2.2, 1.0)])
def test_closed_form_matches_quadrature(x, y, delta):
    assert abs(reg_max(x, y, RegMaxParams(delta)) - quadrature_oracle(x, y, delta)) < 1e-11


def test_exact_outside_band():
    p = RegMaxParams(0.5)
    assert reg_max(1.0, 0.5, p) == 1.0
    assert reg_max(0.1, 0.7, p) == 0.7
    assert reg_max(1.0, 0.6, p) > 1.0


def test_negative_infinity():
    p = RegMaxParams(0.5)
    assert reg_max(-np.inf, 0.3, p) == 0.3
    assert reg_max(np.array([-np.inf, 1.0]), np.array([2.0, -np.inf]), p).tolist() == [2.0, 1.0]


def test_params_validation():
    with pytest.raises(ConfigError):
        RegMaxParams(0.0)
    with pytest.raises(ConfigError):
        RegMaxParams(math.inf)


@settings(max_examples=200, deadline=None)
@given(finite, finite, deltas)
def test_contract(x, y, delta):
    p = RegMaxParams(delta)
    v = reg_max(x, y, p)
    m = max(x, y)
    if abs(x - y) >= delta:
        assert v == m
    else:
        assert m <= v <= m + delta / 2
    assert v == reg_max(y, x, p)


@settings(max_examples=100, deadline=None)
@given(finite, finite, st.floats(0, 5), deltas)
def test_monotone_and_equivariant(x, y, c, delta):
    p = RegMaxParams(delta)
    v = reg_max(x, y, p)
    assert reg_max(x + c, y, p) >= v
    assert reg_max(x + c, y + c, p) == pytest.approx(v + c, abs=1e-9 * (1 + abs(v) + c))


@settings(max_examples=100, deadline=None)
@given(finite, finite, deltas, st.sampled_from([0.25, 0.5, 2.0, 4.0]))
def test_positive_homogeneity(x, y, delta, s):
    assert reg_max(s * x, s * y, RegMaxParams(s * delta)) == s * reg_max(x, y, RegMaxParams(delta))


def test_hessian_formula_against_fd():
    p = RegMaxParams(0.5)
    x = np.linspace(-0.6, 0.6, 41)
    y = np.zeros_like(x)
    H = reg_max_hessian(x, y, p)
    F = fd_hessian_2d(lambda a, b: reg_max(a, b, p), x, y, 1e-4)
    assert np.max(np.abs(H - F)) < 1e-5
    assert np.all(np.linalg.eigvalsh(H)[:, 0] == 0)


def test_gradient_sums_to_one():
    p = RegMaxParams(0.5)
    h = 1e-6
    for x, y in [(0.1, 0.0), (0.3, 0.5), (-0.2, 0.1)]:
        gx = (reg_max(x + h, y, p) - reg_max(x - h, y, p)) / (2 * h)
        gy = (reg_max(x, y + h, p) - reg_max(x, y - h, p)) / (2 * h)
        assert abs(gx + gy - 1) < 1e-8
        assert 0 <= gx <= 1


def test_smoothness_across_band_edge():
    # second derivative rho~(|x - y| / a) / a vanishes at the band edge together with
    # its first derivatives, so the regularized max is at least C^3 there
    k = DEFAULT_KERNEL
    s = np.array([2 - 1e-3, 2.0])
    assert np.all(k.autocorrelation(s) < 1e-12)


@pytest.mark.parametrize("degree", [4, 6])
def test_probe_grid(degree):
    r = probe_grid(RegMaxParams(0.5, MollifierKernel.from_degree(degree)))
    assert r.passed, r.summary_lines()


def test_field_keeps_psh(rng):
    f = euclidean_potential(2)
    g = quadratic_potential(np.eye(2), center=[0.5, 0], constant=0.1)
    h = reg_max_field(f, g, RegMaxParams(0.3))
    rep = is_strictly_psh(h, ball_samples(rng, 2, 200, 1.5), margin=0.5)
    assert rep.passed


def test_field_drops_pole_from_domain():
    Z = VarietySpec.linear([[0, 1]])
    phi = log_pole_potential(Z)
    h = reg_max_field(phi, euclidean_potential(2), RegMaxParams(0.1))
    assert h.domain.varieties == ()
    assert h([1.0, 0.0]) == 1.0
    assert reg_max_field(phi, phi).domain.varieties == (Z,)
    with pytest.raises(DomainError):
        reg_max_field(phi, euclidean_potential(3))
