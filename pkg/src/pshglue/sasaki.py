"""Sasakian checks on level sets of homogeneous potentials.

The cone metric is g(u, v) = Re sum_jk L_jk u_j conj(v_k) with L the Levi form
of the potential; for |z|^2 this is the Euclidean metric and the level set
{|z|^2 = 1} is the round sphere with Reeb field xi(p) = i p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np

from .complex_calculus import DEFAULT_SCHEME, FDScheme, directional_derivative, levi_form, real_form
from .errors import ConfigError, DomainError
from .potentials import PotentialField
from .report import Certificate, VerificationReport, point_payload
from .sampling import complex_to_real, real_to_complex

LEVEL_TOL = 1e-9
CURVATURE_STEP = 1e-3
CURVATURE_TOL = 1e-3


@dataclass(frozen=True)
class LevelSetStructure:
    potential: PotentialField
    level: float = 1.0

    def __post_init__(self):
        if self.potential.homogeneity is None:
            raise ConfigError("a level-set structure needs a homogeneous potential")
        if not self.level > 0:
            raise ConfigError("level must be positive")

    @property
    def operator(self):
        return self.potential.homogeneity

    @property
    def is_round(self) -> bool:
        A = self.operator.matrix
        return (self.potential.spec or {}).get("kind") == "euclidean" and np.array_equal(
            A, np.eye(A.shape[0])) and self.level == 1.0

    def check_on_level(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=complex)
        val = float(self.potential(p))
        if abs(val - self.level) > LEVEL_TOL * max(1.0, self.level):
            raise DomainError(f"point {p} is off the level set ({val!r} vs {self.level!r})")
        return p

    def metric(self, p, scheme: FDScheme = DEFAULT_SCHEME) -> np.ndarray:
        """Real 2n x 2n cone metric at p."""
        return real_form(levi_form(self.potential, p, scheme))


def reeb_field(structure: LevelSetStructure, p) -> np.ndarray:
    """xi(p) = J X_A(p) = i A p as a complex tangent vector."""
    p = structure.check_on_level(p)
    return 1j * structure.operator.apply(p)


def reeb_tangency_residual(structure: LevelSetStructure, p, scheme: FDScheme = DEFAULT_SCHEME) -> float:
    """|d phi(xi)| at p (zero iff xi is tangent to the level set)."""
    xi = reeb_field(structure, p)
    return abs(directional_derivative(structure.potential, p, xi, scheme))


def reeb_norm(structure: LevelSetStructure, p, scheme: FDScheme = DEFAULT_SCHEME) -> float:
    """|xi|_g in the cone metric; 1 on the round sphere, reported otherwise."""
    xi = complex_to_real(reeb_field(structure, p))
    G = structure.metric(p, scheme)
    return math.sqrt(float(xi @ G @ xi))


def reeb_report(structure: LevelSetStructure, points, tol: float = 1e-8,
                scheme: FDScheme = DEFAULT_SCHEME) -> VerificationReport:
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    res = np.array([reeb_tangency_residual(structure, p, scheme) for p in pts])
    norms = np.array([reeb_norm(structure, p, scheme) for p in pts])
    i = int(np.argmax(res))
    report = VerificationReport(f"reeb:{structure.potential.label}")
    report.add(Certificate("reeb_tangency", bool(np.all(res <= tol)), point_payload(pts[i]),
                           float(res[i]), tol, len(pts)))
    report.details["reeb_norm_min"] = float(norms.min())
    report.details["reeb_norm_max"] = float(norms.max())
    return report


# --------------------------------------------------------------------------
# curvature of the round sphere in a gnomonic chart


def _tangent_frame(p_real: np.ndarray) -> np.ndarray:
    """Orthonormal frame (columns) of the tangent space p^perp in R^2n."""
    m = len(p_real)
    q, _ = np.linalg.qr(np.column_stack([p_real, np.eye(m)]))
    frame = q[:, 1:m]
    return frame


class GnomonicChart:
    """Chart u -> (p + E u) / |p + E u| of the unit sphere centred at p.

    The pulled-back metric is computed from the chart Jacobian and the ambient
    metric ``G`` (the identity for the round sphere).
    """

    def __init__(self, p_real: np.ndarray, ambient: np.ndarray | None = None):
        self.p = np.asarray(p_real, dtype=float)
        self.E = _tangent_frame(self.p)
        self.G = np.eye(len(self.p)) if ambient is None else np.asarray(ambient, dtype=float)
        self.dim = self.E.shape[1]

    def embed(self, u: np.ndarray) -> np.ndarray:
        w = self.p + self.E @ u
        return w / np.linalg.norm(w)

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        w = self.p + self.E @ u
        r = np.linalg.norm(w)
        x = w / r
        return (self.E - np.outer(x, x @ self.E)) / r

    def metric(self, u: np.ndarray) -> np.ndarray:
        J = self.jacobian(u)
        return J.T @ self.G @ J

    def components(self, v_real: np.ndarray) -> np.ndarray:
        """Chart components of an ambient tangent vector at the centre."""
        return self.E.T @ v_real


_D1 = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}


def _partials(fn, u: np.ndarray, h: float) -> np.ndarray:
    """Array of d fn / d u_a stacked on a new leading axis (order-4 central differences)."""
    out = []
    for a in range(len(u)):
        acc = 0.0
        for k, w in _D1.items():
            e = np.zeros_like(u)
            e[a] = k * h
            acc = acc + w * fn(u + e)
        out.append(acc / h)
    return np.stack(out)


def christoffel(chart: GnomonicChart, u: np.ndarray, h: float = CURVATURE_STEP) -> np.ndarray:
    """Gamma[c, a, b] = 1/2 g^{cd} (d_a g_bd + d_b g_ad - d_d g_ab), metric derivatives by FD."""
    g = chart.metric(u)
    dg = _partials(chart.metric, u, h)  # dg[d, a, b] = d_d g_ab
    ginv = np.linalg.inv(g)
    lower = 0.5 * (np.einsum("abd->dab", dg) + np.einsum("bad->dab", dg) - dg)
    # lower[d, a, b] = 1/2 (d_a g_bd + d_b g_ad - d_d g_ab)
    return np.einsum("cd,dab->cab", ginv, lower)


def riemann(chart: GnomonicChart, h: float = CURVATURE_STEP) -> np.ndarray:
    """R[l, k, i, j] at the chart centre with R(d_i, d_j) d_k = R[l, k, i, j] d_l.

    R^l_kij = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik,
    the outer derivatives again by finite differences of the Christoffel symbols.
    """
    u0 = np.zeros(chart.dim)
    G0 = christoffel(chart, u0, h)
    dG = _partials(lambda u: christoffel(chart, u, h), u0, h)  # dG[i, l, j, k] = d_i Gamma^l_jk
    term1 = np.einsum("iljk->lkij", dG)
    term2 = np.einsum("jlik->lkij", dG)
    term3 = np.einsum("lim,mjk->lkij", G0, G0)
    term4 = np.einsum("ljm,mik->lkij", G0, G0)
    return term1 - term2 + term3 - term4


def curvature_operator(R: np.ndarray, X: np.ndarray, Y: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """R(X, Y) Z in chart components."""
    return np.einsum("lkij,k,i,j->l", R, Z, X, Y)


def _random_tangent(rng: np.random.Generator, p_real: np.ndarray) -> np.ndarray:
    v = rng.standard_normal(len(p_real))
    v -= (v @ p_real) * p_real
    return v / np.linalg.norm(v)


def sasaki_triples(rng: np.random.Generator, n: int, count: int) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Random (p, X, Y): p uniform on S^{2n-1}, X and Y unit tangent vectors (real coordinates)."""
    out = []
    for _ in range(count):
        p = rng.standard_normal(2 * n)
        p /= np.linalg.norm(p)
        out.append((p, _random_tangent(rng, p), _random_tangent(rng, p)))
    return out


def verify_sasaki_identity(structure: LevelSetStructure, samples, tol: float = CURVATURE_TOL,
                           h: float = CURVATURE_STEP) -> VerificationReport:
    """Curvature identities of a Sasakian structure on the round sphere.

    ``samples`` are triples (p, X, Y) in real coordinates with p on S^{2n-1}
    and X, Y tangent at p.  Certified, with xi = i p:

    * ``R(X,xi)Y``:  R(X, xi) Y = g(xi, Y) X - g(X, Y) xi
    * ``R(X,Y)xi``:  R(X, Y) xi = g(xi, Y) X - g(xi, X) Y
    * ``sectional_curvature_xi``: g(R(X', xi) xi, X') = 1 for X' the unit part of X orthogonal to xi.

    The residual of the mixed form R(X, Y) xi = g(xi, Y) X - g(X, Y) xi is
    recorded in the details; it is not an identity (take X = Y orthogonal to xi).
    """
    if not structure.is_round:
        raise ConfigError("curvature identities are only verified on the round sphere |z|^2 = 1")
    report = VerificationReport("sasaki_identity")
    res_a, res_b, res_lit, sect = [], [], [], []
    pts = []
    for p, X, Y in samples:
        p = np.asarray(p, dtype=float)
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        pc = structure.check_on_level(real_to_complex(p))
        xi_amb = complex_to_real(reeb_field(structure, pc))
        for v in (X, Y):
            if abs(v @ p) > 1e-10 * max(1.0, np.linalg.norm(v)):
                raise DomainError("X and Y must be tangent to the sphere at p")
        chart = GnomonicChart(p)
        R = riemann(chart, h)
        g0 = chart.metric(np.zeros(chart.dim))
        x, y, xi = chart.components(X), chart.components(Y), chart.components(xi_amb)

        def g(a, b):
            return float(a @ g0 @ b)

        def norm(v):
            return math.sqrt(max(g(v, v), 0.0))

        lhs_a = curvature_operator(R, X=x, Y=xi, Z=y)
        rhs_a = g(xi, y) * x - g(x, y) * xi
        lhs_b = curvature_operator(R, X=x, Y=y, Z=xi)
        rhs_b = g(xi, y) * x - g(xi, x) * y
        rhs_lit = g(xi, y) * x - g(x, y) * xi
        res_a.append(norm(lhs_a - rhs_a))
        res_b.append(norm(lhs_b - rhs_b))
        res_lit.append(norm(lhs_b - rhs_lit))
        xp = x - g(x, xi) * xi / g(xi, xi)
        if norm(xp) > 1e-8:
            xp = xp / norm(xp)
            sect.append(g(curvature_operator(R, X=xp, Y=xi, Z=xi), xp))
        else:
            sect.append(1.0)
        pts.append(pc)

    for name, vals in (("R(X,xi)Y", res_a), ("R(X,Y)xi", res_b)):
        vals = np.asarray(vals)
        i = int(np.argmax(vals))
        report.add(Certificate(name, bool(np.all(vals <= tol)), point_payload(pts[i]),
                               float(vals[i]), tol, len(vals)))
    dev = np.abs(np.asarray(sect) - 1.0)
    j = int(np.argmax(dev))
    report.add(Certificate("sectional_curvature_xi", bool(np.all(dev <= tol)), point_payload(pts[j]),
                           float(dev[j]), tol, len(dev)))
    report.details["mixed_form_residual_max"] = float(np.max(res_lit))
    report.details["residuals"] = [{"R(X,xi)Y": a, "R(X,Y)xi": b, "sectional": s}
                                   for a, b, s in zip(res_a, res_b, sect)]
    return report


# --------------------------------------------------------------------------
# Reeb directions and quasi-regular deformation


def _as_fraction(value: float, max_denominator: int = 10 ** 4, tol: float = 1e-12) -> Fraction | None:
    f = Fraction(value).limit_denominator(max_denominator)
    return f if abs(float(f) - value) <= tol * max(1.0, abs(value)) else None


@dataclass(frozen=True)
class ReebDirection:
    """Infinitesimal torus direction: xi acts by z_j -> exp(i w_j s) z_j.

    ``ratios`` (w_j / w_1 as fractions) is present exactly when the direction
    is quasi-regular.  ``irrational`` marks directions known to be irrational
    so that orbit checks look for non-return instead of a period.
    """

    weights: tuple[float, ...]
    ratios: tuple[Fraction, ...] | None = None
    irrational: bool = False
    deviation: float = field(default=0.0, compare=False)
    denominator: int | None = field(default=None, compare=False)
    dirichlet_bound: float | None = field(default=None, compare=False)

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if not w or all(x == 0 for x in w):
            raise ConfigError("Reeb direction must not vanish")
        if any(not x > 0 for x in w):
            raise ConfigError("Reeb weights must be positive")
        object.__setattr__(self, "weights", w)
        if self.ratios is None and not self.irrational:
            fr = [_as_fraction(x / w[0]) for x in w]
            if all(f is not None for f in fr):
                object.__setattr__(self, "ratios", tuple(fr))

    @property
    def is_rational(self) -> bool:
        return self.ratios is not None


def quasi_regular_deform(direction: ReebDirection | Sequence[float], q_max: int) -> ReebDirection:
    """Closest direction (sup norm on the ratios w_j / w_1) with common denominator <= q_max.

    Exhaustive over denominators 1..q_max; ties go to the smallest denominator.
    The first weight is kept.  For m = n - 1 free ratios Dirichlet guarantees a
    deviation of at most q_max^(-1/m), recorded as ``dirichlet_bound``.
    """
    if isinstance(direction, ReebDirection):
        weights = direction.weights
    else:
        weights = tuple(float(x) for x in direction)
        ReebDirection(weights, irrational=True)  # validation only
    if int(q_max) != q_max or q_max < 1:
        raise ConfigError("q_max must be a positive integer")
    w0 = weights[0]
    r = np.array(weights[1:]) / w0
    m = len(r)
    best = None
    for q in range(1, int(q_max) + 1):
        p = np.maximum(np.rint(q * r), 1).astype(int)
        dev = float(np.max(np.abs(r - p / q))) if m else 0.0
        if best is None or dev < best[0] - 1e-15:
            best = (dev, q, p)
        if dev == 0.0:
            break
    dev, q, p = best
    ratios = (Fraction(1),) + tuple(Fraction(int(k), q) for k in p)
    ratios = tuple(f.limit_denominator(q) for f in ratios)
    out = tuple(w0 * float(f) for f in ratios)
    bound = float(q_max) ** (-1.0 / m) if m else 0.0
    return ReebDirection(out, ratios, False, dev, q, bound)


def torus_flow(direction: ReebDirection, p, s):
    """p_j -> exp(i w_j s) p_j; ``s`` may be an array (result shape s.shape + p.shape)."""
    p = np.asarray(p, dtype=complex)
    s = np.asarray(s, dtype=float)
    w = np.asarray(direction.weights)
    return np.exp(1j * s[..., None] * w) * p


def orbit_period(direction: ReebDirection) -> float:
    """Common period 2 pi D / (w_1 gcd(n_j)) for ratios n_j / D in lowest common terms."""
    if not direction.is_rational:
        raise ConfigError("orbit period needs a rational direction")
    D = reduce(math.lcm, (f.denominator for f in direction.ratios))
    nums = [int(f * D) for f in direction.ratios]
    g = reduce(math.gcd, nums)
    return 2 * math.pi * D / (direction.weights[0] * g)


def orbit_closure_check(direction: ReebDirection, structure: LevelSetStructure, p, tol: float = 1e-12,
                        window: tuple[float, float] = (2 * math.pi, 40 * math.pi), grid: int = 100_000,
                        separation: float = 1e-2, level_samples: int = 257) -> VerificationReport:
    """Closed orbits for rational directions, sampled non-return for flagged irrational ones."""
    p = structure.check_on_level(p)
    report = VerificationReport("orbit_closure")
    if direction.is_rational and not direction.irrational:
        T = orbit_period(direction)
        err = float(np.linalg.norm(torus_flow(direction, p, T) - p))
        report.add(Certificate("closed_orbit", err <= tol, point_payload(p), err, tol, 1))
        report.details.update(period=T, mode="rational")
        s_level = np.linspace(0.0, T, level_samples)
    elif direction.irrational:
        s = np.linspace(window[0], window[1], grid)
        dist = np.linalg.norm(torus_flow(direction, p, s) - p, axis=-1)
        k = int(np.argmin(dist))
        report.add(Certificate("no_return", bool(dist[k] > separation), point_payload(p),
                               float(dist[k]), separation, grid))
        report.details.update(mode="irrational", closest_return_s=float(s[k]), window=list(window),
                              note="sampled evidence of non-return, not a proof")
        s_level = np.linspace(window[0], window[1], level_samples)
    else:
        raise ConfigError("direction is not rational; set the irrational flag to check non-return")
    vals = np.asarray(structure.potential(torus_flow(direction, p, s_level)), dtype=float)
    lev = np.abs(vals - structure.level)
    i = int(np.argmax(lev))
    report.add(Certificate("level_preserved", bool(np.all(lev <= LEVEL_TOL * max(1.0, structure.level))),
                           point_payload(p), float(lev[i]), LEVEL_TOL, len(lev)))
    return report
