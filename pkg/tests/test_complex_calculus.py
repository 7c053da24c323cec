import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from pshglue.complex_calculus import (FDScheme, directional_derivative, generalized_min_eigenvalue,
                                      hermitize, is_strictly_psh, jacobi_eigenvalues, levi_form,
                                      levi_forms, min_eigenvalue, real_form)
from pshglue.errors import ConfigError, NumericError, StencilError
from pshglue.potentials import (Domain, PotentialField, VarietySpec, affine_combine, constant_potential,
                                euclidean_potential, fubini_study_potential, from_callable, hopf_potential,
                                log_pole_potential)
from pshglue.sampling import ball_samples


def fs_levi_oracle():
    """1-D Fubini-Study Levi form from symbolic differentiation in real coordinates."""
    x, y = sp.symbols("x y", real=True)
    f = sp.log(1 + x ** 2 + y ** 2)
    levi = sp.simplify((sp.diff(f, x, 2) + sp.diff(f, y, 2)) / 4)
    return sp.lambdify((x, y), levi, "numpy")


def test_scheme_validation():
    with pytest.raises(ConfigError):
        FDScheme(step=0)
    with pytest.raises(ConfigError):
        FDScheme(order=3)
    assert FDScheme() == FDScheme(1e-4, 4)


def test_levi_of_euclidean_is_identity(rng):
    f = euclidean_potential(2)
    for z in ball_samples(rng, 2, 5, 3.0):
        assert np.allclose(levi_form(f, z), np.eye(2), atol=1e-7)


def test_levi_of_log_modulus_vanishes():
    f = log_pole_potential(VarietySpec.linear([[1]]))
    # 1/2 log|z|^2 = log|z|; harmonic off the origin
    assert abs(levi_form(f, [1.0 + 0j])[0, 0]) < 1e-7


def test_fubini_study_matches_symbolic_oracle():
    oracle = fs_levi_oracle()
    f = fubini_study_potential(1)
    L = levi_form(f, [0.5 + 0j])[0, 0]
    assert abs(L.imag) == 0.0
    assert abs(L.real - oracle(0.5, 0.0)) < 1e-6
    assert abs(oracle(0.5, 0.0) - 1 / (1 + 0.25) ** 2) < 1e-15


def test_levi_form_is_exactly_hermitian(rng):
    f = from_callable(lambda z: np.abs(z[..., 0]) ** 4 + (z[..., 0] * np.conj(z[..., 1])).real ** 2
                      + np.sin(z[..., 1].imag), 2)
    for z in ball_samples(rng, 2, 10, 1.0):
        L = levi_form(f, z)
        assert np.array_equal(L, np.conj(L.T))


def test_levi_of_off_diagonal_quadratic():
    # f = 2 Re(z1 conj(z2)) has Levi form [[0, 1], [1, 0]]
    f = from_callable(lambda z: 2 * (z[..., 0] * np.conj(z[..., 1])).real, 2)
    L = levi_form(f, [0.3 - 0.1j, 0.7 + 0.2j])
    assert np.allclose(L, [[0, 1], [1, 0]], atol=1e-8)
    # f = 2 Re(i z1 conj(z2)) -> [[0, i], [-i, 0]] in the (z_j, zbar_k) convention
    g = from_callable(lambda z: 2 * (1j * z[..., 0] * np.conj(z[..., 1])).real, 2)
    assert np.allclose(levi_form(g, [0.1j, 0.4]), [[0, 1j], [-1j, 0]], atol=1e-8)


def test_order_two_and_four_agree_on_quadratics():
    f = euclidean_potential(3)
    z = np.array([0.1, -0.2j, 0.3 + 0.3j])
    L2 = levi_form(f, z, FDScheme(1e-3, 2))
    L4 = levi_form(f, z, FDScheme(1e-3, 4))
    assert np.allclose(L2, L4, atol=1e-9)


def test_stencil_leaving_domain_raises():
    f = hopf_potential((1.0, 2.0))
    with pytest.raises(StencilError):
        levi_form(f, [1e-4, 0.0])  # the -h node hits the origin


def test_non_finite_values_raise():
    f = from_callable(lambda z: np.where(z[..., 0].real > 0, np.inf, 0.0), 1)
    with pytest.raises(NumericError):
        levi_form(f, [0.0])


def test_batched_levi_matches_pointwise(rng):
    f = fubini_study_potential(2)
    z = ball_samples(rng, 2, 9000, 1.0)
    L = levi_forms(f, z)
    for i in (0, 4095, 4096, 8999):
        assert np.allclose(L[i], levi_form(f, z[i]), rtol=0, atol=1e-8)  # roundoff floor eps/h^2


def test_real_form_metric_convention():
    L = np.array([[2.0, 1 + 1j], [1 - 1j, 3.0]])
    G = real_form(L)
    assert np.allclose(G, G.T)
    u = np.array([0.3 + 0.1j, -0.2 + 0.5j])
    v = np.array([1.0 - 0.4j, 0.25j])
    ur = np.concatenate([u.real, u.imag])
    vr = np.concatenate([v.real, v.imag])
    assert np.isclose(ur @ G @ vr, np.real(np.sum(L * np.outer(u, np.conj(v)))))


# --------------------------------------------------------------------------
# eigenvalues


def test_min_eigenvalue_examples():
    assert min_eigenvalue(np.eye(3)) == 1.0
    assert min_eigenvalue(np.diag([2.0, -1.0])) == -1.0
    H = np.array([[2, 1 + 1j], [1 - 1j, 2]])
    assert abs(min_eigenvalue(H) - (2 - math.sqrt(2))) < 1e-14


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16])
def test_jacobi_matches_lapack(n, rng):
    for _ in range(5):
        M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        H = hermitize(M)
        ours = jacobi_eigenvalues(H)
        ref = np.linalg.eigvalsh(H)
        scale = np.max(np.abs(ref))
        assert np.max(np.abs(ours - ref)) <= 1e-10 * scale


def test_jacobi_batched_and_degenerate():
    H = np.stack([np.eye(4), np.zeros((4, 4)), np.diag([1e-300, 0, 0, 0]), np.ones((4, 4))])
    ev = jacobi_eigenvalues(H)
    assert np.allclose(ev[0], 1) and np.all(ev[1] == 0)
    assert np.allclose(ev[3], [0, 0, 0, 4], atol=1e-14)


def test_jacobi_ill_conditioned():
    Q = np.linalg.qr(np.arange(1, 17).reshape(4, 4) + 1j * np.eye(4))[0]
    d = np.array([1e-12, 1e-6, 1.0, 1e6])
    H = Q @ np.diag(d) @ Q.conj().T
    ev = jacobi_eigenvalues(H)
    assert np.allclose(ev, d, rtol=0, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_jacobi_property(n, seed):
    r = np.random.default_rng(seed)
    H = hermitize(r.standard_normal((n, n)) + 1j * r.standard_normal((n, n)))
    ev = jacobi_eigenvalues(H)
    assert np.all(np.diff(ev) >= 0)
    assert abs(ev.sum() - np.trace(H).real) <= 1e-12 * max(1.0, np.abs(H).sum())
    assert np.allclose(ev, np.linalg.eigvalsh(H), atol=1e-11 * max(1.0, np.abs(ev).max()))


def test_generalized_min_eigenvalue():
    L = -np.eye(2)
    G = np.diag([1.0, 4.0])
    assert np.isclose(generalized_min_eigenvalue(L, G), -1.0)
    G2 = np.array([[2.0, 0.5j], [-0.5j, 1.0]])
    L2 = np.array([[1.0, 0.2], [0.2, -0.3]])
    ref = np.min(np.linalg.eigvals(np.linalg.solve(G2, L2)).real)
    assert np.isclose(generalized_min_eigenvalue(L2, G2), ref)


# --------------------------------------------------------------------------
# directional derivatives


def test_directional_derivative_examples():
    f = euclidean_potential(2)
    assert abs(directional_derivative(f, [1, 0], [1, 0]) - 2) < 1e-10
    assert abs(directional_derivative(constant_potential(2, 3.0), [0.2, 0.1j], [1, 1, 0, 0])) < 1e-10


def test_hopf_euler_field():
    f = hopf_potential((1.0, 2.0))
    z = np.array([0.5, 0.5], dtype=complex)
    v = f.homogeneity.apply(z)
    assert abs(directional_derivative(f, z, v) - 2 * f(z)) < 1e-6
    # e^{2t} scaling oracle: central difference of t -> f(exp(tA) z) at t = 0
    t = 1e-5
    w = np.array([1.0, 2.0])
    fd = (f(np.exp(t * w) * z) - f(np.exp(-t * w) * z)) / (2 * t)
    assert abs(fd - 2 * f(z)) < 1e-6


def test_real_and_complex_tangent_agree():
    f = fubini_study_potential(2)
    z = np.array([0.3, -0.2j])
    v = np.array([0.1 + 0.7j, -0.4 + 0.2j])
    vr = np.concatenate([v.real, v.imag])
    assert directional_derivative(f, z, v) == directional_derivative(f, z, vr)


# --------------------------------------------------------------------------
# psh certificate


def test_is_strictly_psh_examples(rng):
    z = ball_samples(rng, 2, 100, 1.0)
    rep = is_strictly_psh(euclidean_potential(2), z, margin=0.5)
    assert rep.passed
    assert abs(rep.details["measured_margin"] - 1) < 1e-6
    neg = is_strictly_psh(affine_combine(euclidean_potential(2), 0, 0), z)
    assert not neg.passed
    minus = from_callable(lambda w: -np.sum(np.abs(w) ** 2, axis=-1), 2)
    bad = is_strictly_psh(minus, z)
    assert not bad.passed and bad.certificate("strict_psh").worst_value < -0.99


def test_is_strictly_psh_records_stencil_errors():
    f = hopf_potential((1.0, 1.0))
    rep = is_strictly_psh(f, [[1e-4, 0], [0.5, 0.5]])
    assert not rep.passed
    assert rep.details["errors"][0]["index"] == 0


def test_is_strictly_psh_requires_samples():
    with pytest.raises(ConfigError):
        is_strictly_psh(euclidean_potential(2), np.zeros((0, 2)))
