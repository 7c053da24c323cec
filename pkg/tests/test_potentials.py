import math

import numpy as np
import pytest
from scipy.optimize import brentq

from pshglue.errors import ConfigError, DomainError, NumericError
from pshglue.potentials import (Domain, Polynomial, RadialOperator, VarietySpec, add_fields, affine_combine,
                                compose_linear, constant_potential, distance_term, euclidean_potential,
                                fubini_study_potential, hopf_potential, hopf_residual, hopf_solve,
                                log_pole_potential, potential_from_config, quadratic_potential,
                                sine_gaussian_potential)
from pshglue.sampling import ball_samples


def test_polynomial_linear_and_general():
    p = Polynomial.linear([0, 1])
    assert p.is_linear
    assert np.allclose(p.linear_coefficients(), [0, 1])
    q = Polynomial.from_config({"terms": [[[2, 0], [1, 1]], [1, [0, 2]]]}, 2)
    z = np.array([1 + 1j, 2.0])
    assert q(z) == 2 * (1 + 1j) * 2 + 4
    assert not q.is_linear
    with pytest.raises(ConfigError):
        q.linear_coefficients()
    with pytest.raises(ConfigError):
        Polynomial(2, ((1, (1,)),))


def test_variety_bases_and_projection():
    Z = VarietySpec.linear([[1, 1j, 0]])
    N, T = Z.normal_basis(), Z.tangent_basis()
    assert N.shape == (3, 1) and T.shape == (3, 2)
    assert np.allclose(np.hstack([N, T]).conj().T @ np.hstack([N, T]), np.eye(3), atol=1e-12)
    z = np.array([0.3 - 1j, 0.2, 1.5j])
    w = Z.project(z)
    assert abs(Z.generators[0](w)) < 1e-14
    assert np.isclose(Z.distance(z), np.linalg.norm(z - w))
    assert np.isclose(Z.distance(z), abs(Z.generators[0](z)) / math.sqrt(2))


def test_variety_validation():
    with pytest.raises(ConfigError):
        VarietySpec(())
    with pytest.raises(ConfigError):
        VarietySpec.linear([[0, 0]])
    nonlinear = VarietySpec.from_config([{"terms": [[1, [2, 0]]]}], 2)
    with pytest.raises(ConfigError):
        nonlinear.normal_basis()
    assert np.isclose(nonlinear.distance(np.array([0.5, 3.0])), 0.25)


def test_radial_operator():
    A = RadialOperator.diagonal([1, 2])
    assert A.is_diagonal and A.spectral_abscissa == 1.0 and A.eigenvector_condition == 1.0
    assert RadialOperator.from_config(A.to_config()) == A
    with pytest.raises(ConfigError):
        RadialOperator.diagonal([1, -1])
    J = RadialOperator(np.array([[1.0, 1.0], [0.0, 1.0]]))
    assert J.outside_verified_envelope
    M = RadialOperator(np.array([[1.0, 0.5j], [0.0, 2.0]]))
    assert RadialOperator.from_config(M.to_config()) == M
    assert not M.outside_verified_envelope


def test_domain_violations_and_intersection():
    Z = VarietySpec.linear([[0, 1]])
    d = Domain(2, punctured=True, varieties=(Z,))
    z = np.array([[0, 0], [1, 0], [1, 0.5], [1e-9, 0]], dtype=complex)
    assert d.violations(z).tolist() == [True, True, False, True]
    b1 = Domain(2, balls=(((0, 0), 1.0),))
    b2 = Domain(2, balls=(((3, 0), 1.0),))
    with pytest.raises(DomainError):
        b1.intersect(b2)
    assert d.intersect(b1).without_varieties([Z]).varieties == ()


def test_potential_call_checks():
    f = hopf_potential((1, 2))
    with pytest.raises(DomainError):
        f([0, 0])
    with pytest.raises(DomainError):
        f([1, 2, 3])
    g = log_pole_potential(VarietySpec.linear([[0, 1]]))
    assert g.raw(np.array([1, 0])) == -np.inf
    with pytest.raises(DomainError):
        g([1, 0])
    bad = affine_combine(euclidean_potential(1), 1, np.inf)
    with pytest.raises(NumericError):
        bad([1])


def test_hopf_golden_ratio():
    # 1/phi + 1/phi^2 = 1
    assert abs(hopf_potential((1, 2))([1, 1]) - (1 + math.sqrt(5)) / 2) < 1e-14


def test_hopf_against_brentq(rng):
    alpha = np.array([1.0, 1.0, 3.0])
    z = ball_samples(rng, 3, 50, 5.0)
    phi = hopf_solve(z, alpha)
    for zz, p in zip(z, phi):
        ref = brentq(lambda s: hopf_residual(zz, s, alpha), 1e-12, 1e6, xtol=1e-15, rtol=1e-15)
        assert abs(p - ref) <= 1e-12 * ref
    assert np.max(np.abs(hopf_residual(z, phi, alpha))) < 1e-13


def test_hopf_extremes():
    alpha = np.array([0.5, 4.0])
    z = np.array([[1e-50, 0], [1e50, 0], [0, 1e-100], [3, 1e-200]], dtype=complex)
    phi = hopf_solve(z, alpha)
    assert np.all(np.isfinite(phi)) and np.all(phi > 0)
    # single nonzero coordinate: phi = |z_j|^(2 / alpha_j)
    assert np.allclose(phi[:3], [1e-200, 1e200, 1e-50], rtol=1e-12)
    assert np.isclose(phi[3], 81.0, rtol=1e-12)
    assert hopf_solve(np.zeros(2), alpha) == 0.0


def test_hopf_equal_weights_is_euclidean(rng):
    z = ball_samples(rng, 3, 20, 2.0, inner_radius=0.1)
    assert np.allclose(hopf_potential((1, 1, 1))(z), np.sum(np.abs(z) ** 2, axis=1), rtol=1e-14)


def test_hopf_homogeneity(rng):
    f = hopf_potential((1, 2))
    z = ball_samples(rng, 2, 20, 2.0, inner_radius=0.1)
    for t in (-1.0, 0.3, 2.0):
        w = np.exp(t * np.array([1, 2])) * z
        assert np.allclose(f(w), np.exp(2 * t) * f(z), rtol=1e-13)


def test_log_pole_and_distance():
    Z = VarietySpec.linear([[0, 1]])
    f = log_pole_potential(Z)
    assert np.isclose(f([3, 2j]), math.log(2))
    d = distance_term(Z, 1.0)
    assert d([0, 2]) == 4.0
    with pytest.raises(ConfigError):
        distance_term(Z, -1)


def test_affine_and_sum():
    f = euclidean_potential(2)
    assert affine_combine(f, 1, 0) is f
    g = affine_combine(f, 2, 1)
    assert g([1, 1j]) == 5
    assert affine_combine(f, 0, 3)([5, 5]) == 3
    with pytest.raises(ConfigError):
        affine_combine(f, -1, 0)
    h = add_fields(f, constant_potential(2, 1.0), sine_gaussian_potential(2, 0.5))
    z = np.array([0.4, 0.1j])
    assert np.isclose(h(z), 0.17 + 1 + 0.5 * math.sin(0.4) * math.exp(-0.17))


def test_compose_linear():
    Z = VarietySpec.linear([[0, 1]])
    f = compose_linear(euclidean_potential(2), Z.tangent_basis())
    assert f.dimension == 1 and np.isclose(f([2j]), 4)


def test_quadratic_and_fs():
    q = quadratic_potential([[2, 1j], [-1j, 1]], center=[1, 0], constant=0.5)
    assert np.isclose(q([1, 0]), 0.5)
    # the matrix is replaced by its Hermitian part
    assert np.isclose(quadratic_potential([[1, 1], [0, 1]])([1, 1]), 3.0)
    assert np.isclose(fubini_study_potential(2)([1, 1]), math.log(3))


@pytest.mark.parametrize("cfg", [
    {"kind": "euclidean", "dimension": 2},
    {"kind": "hopf", "weights": [1, 2]},
    {"kind": "fubini_study", "dimension": 2},
    {"kind": "constant", "dimension": 2, "value": 1.5},
    {"kind": "sine_gaussian", "dimension": 2, "amplitude": 0.3},
    {"kind": "quadratic", "matrix": [[1, [0, 0.5]], [[0, -0.5], 2]]},
    {"kind": "log_pole", "dimension": 2, "generators": [[0, 1]]},
    {"kind": "distance", "dimension": 2, "generators": [[0, 1]], "c1": 0.5},
    {"kind": "affine", "a": 2, "b": 1, "base": {"kind": "euclidean", "dimension": 2}},
    {"kind": "sum", "terms": [{"kind": "euclidean", "dimension": 2}, {"kind": "constant", "dimension": 2}]},
])
def test_config_round_trip(cfg):
    f = potential_from_config(cfg)
    g = potential_from_config(f.to_config())
    z = np.array([[0.3, 0.7j], [1.1, -0.2]])
    assert np.allclose(f(z), g(z), rtol=1e-15)


def test_config_errors_name_the_key():
    with pytest.raises(ConfigError, match="weights"):
        potential_from_config({"kind": "hopf"})
    with pytest.raises(ConfigError, match="kind"):
        potential_from_config({})
    with pytest.raises(ConfigError, match="banana"):
        potential_from_config({"kind": "banana"})
