"""Catalog of scalar potentials on flat coordinate models of C^n.

Every evaluator is vectorised: it takes a complex array of shape ``(..., n)``
and returns a real array of shape ``(...)``.  :class:`PotentialField` wraps an
evaluator with its domain, optional homogeneity operator and a serialisable
spec so that configs can round-trip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, NumericError

EXCLUSION_RADIUS = 1e-8
HOPF_MAX_ITER = 200


# --------------------------------------------------------------------------
# polynomial generators and varieties


def parse_complex(value: Any) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigError(f"complex number must be [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict):
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    return complex(value)


@dataclass(frozen=True)
class Polynomial:
    """Polynomial map C^n -> C given as ``(coefficient, exponents)`` terms."""

    dimension: int
    terms: tuple[tuple[complex, tuple[int, ...]], ...]

    def __post_init__(self):
        for _, exps in self.terms:
            if len(exps) != self.dimension or any(e < 0 for e in exps):
                raise ConfigError(f"bad exponent vector {exps} for dimension {self.dimension}")

    @classmethod
    def linear(cls, coefficients: Sequence) -> Polynomial:
        coeffs = [parse_complex(c) for c in coefficients]
        n = len(coeffs)
        terms = []
        for j, c in enumerate(coeffs):
            if c != 0:
                exps = [0] * n
                exps[j] = 1
                terms.append((c, tuple(exps)))
        return cls(n, tuple(terms))

    @classmethod
    def from_config(cls, data: Any, dimension: int) -> Polynomial:
        if isinstance(data, dict) and "terms" in data:
            terms = tuple((parse_complex(c), tuple(int(e) for e in exps))
                          for c, exps in data["terms"])
            return cls(dimension, terms)
        if isinstance(data, (list, tuple)):
            if len(data) != dimension:
                raise ConfigError(f"linear generator needs {dimension} coefficients, got {len(data)}")
            return cls.linear(data)
        raise ConfigError(f"cannot parse generator {data!r}")

    def to_config(self) -> Any:
        if self.is_linear:
            return [[c.real, c.imag] for c in self.linear_coefficients()]
        return {"terms": [[[c.real, c.imag], list(e)] for c, e in self.terms]}

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c, _ in self.terms)

    @property
    def is_linear(self) -> bool:
        return all(sum(e) == 1 for c, e in self.terms if c != 0)

    def linear_coefficients(self) -> np.ndarray:
        if not self.is_linear:
            raise ConfigError("generator is not linear")
        out = np.zeros(self.dimension, dtype=complex)
        for c, e in self.terms:
            out[e.index(1)] += c
        return out

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape[:-1], dtype=complex)
        for c, exps in self.terms:
            mono = np.full(z.shape[:-1], c, dtype=complex)
            for j, e in enumerate(exps):
                if e:
                    mono = mono * z[..., j] ** e
            out = out + mono
        return out


@dataclass(frozen=True)
class VarietySpec:
    """Common zero set Z of a list of polynomial generators."""

    generators: tuple[Polynomial, ...]

    def __post_init__(self):
        if not self.generators:
            raise ConfigError("a variety needs at least one generator")
        dims = {g.dimension for g in self.generators}
        if len(dims) != 1:
            raise ConfigError("generators have mismatched dimensions")
        if all(g.is_zero for g in self.generators):
            raise ConfigError("all generators vanish identically; Z would be the whole space")

    @classmethod
    def linear(cls, rows: Sequence[Sequence]) -> VarietySpec:
        return cls(tuple(Polynomial.linear(r) for r in rows))

    @classmethod
    def from_config(cls, data: Sequence, dimension: int) -> VarietySpec:
        return cls(tuple(Polynomial.from_config(g, dimension) for g in data))

    def to_config(self) -> list:
        return [g.to_config() for g in self.generators]

    @property
    def dimension(self) -> int:
        return self.generators[0].dimension

    @property
    def is_linear(self) -> bool:
        return all(g.is_linear for g in self.generators)

    def sum_sq(self, z: np.ndarray) -> np.ndarray:
        return sum(np.abs(g(z)) ** 2 for g in self.generators)

    def normal_basis(self) -> np.ndarray:
        """Orthonormal basis (columns) of the Hermitian orthogonal complement of Z."""
        if not self.is_linear:
            raise ConfigError("normal directions are only available for linear Z")
        G = np.array([g.linear_coefficients() for g in self.generators])
        # g(z) = G_k . z = <z, conj(G_k)>, so the normal space is spanned by conj(G_k).
        u, s, _ = np.linalg.svd(G.conj().T, full_matrices=False)
        rank = int(np.sum(s > 1e-12 * s.max()))
        return u[:, :rank]

    def tangent_basis(self) -> np.ndarray:
        """Orthonormal basis (columns) of Z itself."""
        N = self.normal_basis()
        n = self.dimension
        u, s, _ = np.linalg.svd(np.eye(n) - N @ N.conj().T)
        rank = n - N.shape[1]
        return u[:, :rank]

    def normal_projector(self) -> np.ndarray:
        N = self.normal_basis()
        return N @ N.conj().T

    def project(self, z: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto linear Z."""
        P = self.normal_projector()
        z = np.asarray(z, dtype=complex)
        return z - z @ P.T

    def distance(self, z: np.ndarray) -> np.ndarray:
        """Euclidean distance to Z (exact for linear Z, ``sqrt(sum |g_k|^2)`` proxy otherwise)."""
        z = np.asarray(z, dtype=complex)
        if self.is_linear:
            P = self.normal_projector()
            return np.linalg.norm(z @ P.T, axis=-1)
        return np.sqrt(self.sum_sq(z))


# --------------------------------------------------------------------------
# radial operators


@dataclass(frozen=True, eq=False)
class RadialOperator:
    """Linear operator A generating the field X_A(z) = A z and the flow exp(tA)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError("radial operator must be a square matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if np.min(np.linalg.eigvals(m).real) <= 0:
            raise ConfigError("radial operator needs spectrum with positive real part")

    @classmethod
    def diagonal(cls, weights: Sequence[float]) -> RadialOperator:
        return cls(np.diag(np.asarray(weights, dtype=complex)))

    @classmethod
    def identity(cls, n: int) -> RadialOperator:
        return cls(np.eye(n, dtype=complex))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.matrix == np.diag(np.diag(self.matrix))))

    @property
    def weights(self) -> np.ndarray:
        return np.diag(self.matrix).copy()

    @property
    def spectral_abscissa(self) -> float:
        """Smallest real part of the spectrum: the slowest contraction rate of exp(-tA)."""
        return float(np.min(np.linalg.eigvals(self.matrix).real))

    @property
    def eigenvector_condition(self) -> float:
        if self.is_diagonal:
            return 1.0
        _, v = np.linalg.eig(self.matrix)
        return float(np.linalg.cond(v))

    @property
    def outside_verified_envelope(self) -> bool:
        """True for (numerically) non-diagonalisable operators, e.g. Jordan blocks."""
        return self.eigenvector_condition > 1e8

    def apply(self, z: np.ndarray) -> np.ndarray:
        """X_A(z) = A z for points of shape (..., n)."""
        return np.asarray(z, dtype=complex) @ self.matrix.T

    def __eq__(self, other):
        return isinstance(other, RadialOperator) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def to_config(self) -> dict:
        if self.is_diagonal and np.all(self.weights.imag == 0):
            return {"weights": self.weights.real.tolist()}
        return {"matrix": [[[c.real, c.imag] for c in row] for row in self.matrix]}

    @classmethod
    def from_config(cls, data: dict) -> RadialOperator:
        if "weights" in data:
            return cls.diagonal([float(w) for w in data["weights"]])
        if "matrix" in data:
            return cls(np.array([[parse_complex(c) for c in row] for row in data["matrix"]]))
        raise ConfigError("radial operator config needs 'weights' or 'matrix'")


# --------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Domain:
    """Flat domain: C^n, optionally minus the origin, minus varieties, inside balls."""

    dimension: int
    punctured: bool = False
    varieties: tuple[VarietySpec, ...] = ()
    balls: tuple[tuple[tuple[complex, ...], float], ...] = ()
    exclusion: float = EXCLUSION_RADIUS

    @classmethod
    def full(cls, n: int) -> Domain:
        return cls(n)

    def describe(self) -> str:
        parts = ["C^%d" % self.dimension]
        if self.punctured:
            parts.append("minus origin")
        if self.varieties:
            parts.append("minus %d variet%s" % (len(self.varieties), "y" if len(self.varieties) == 1 else "ies"))
        if self.balls:
            parts.append("inside %d ball(s)" % len(self.balls))
        return ", ".join(parts)

    def violations(self, z: np.ndarray) -> np.ndarray:
        """Boolean mask of points that are NOT in the domain."""
        z = np.asarray(z, dtype=complex)
        bad = ~np.all(np.isfinite(z), axis=-1)
        if self.punctured:
            bad |= np.linalg.norm(z, axis=-1) <= self.exclusion
        for v in self.varieties:
            bad |= v.distance(z) <= self.exclusion
        for center, radius in self.balls:
            bad |= np.linalg.norm(z - np.asarray(center), axis=-1) > radius
        return bad

    def intersect(self, other: Domain) -> Domain:
        if self.dimension != other.dimension:
            raise DomainError("domains live in different dimensions")
        balls = tuple(dict.fromkeys(self.balls + other.balls))
        for i, (c1, r1) in enumerate(balls):
            for c2, r2 in balls[i + 1:]:
                if np.linalg.norm(np.asarray(c1) - np.asarray(c2)) > r1 + r2:
                    raise DomainError("domain intersection is empty (disjoint balls)")
        return Domain(self.dimension, self.punctured or other.punctured,
                      tuple(dict.fromkeys(self.varieties + other.varieties)), balls,
                      max(self.exclusion, other.exclusion))

    def without_varieties(self, removed: Sequence[VarietySpec]) -> Domain:
        kept = tuple(v for v in self.varieties if v not in removed)
        return Domain(self.dimension, self.punctured, kept, self.balls, self.exclusion)


# --------------------------------------------------------------------------
# potential fields


@dataclass(frozen=True, eq=False)
class PotentialField:
    """A real function on a flat domain.

    ``poles`` lists varieties along which the evaluator tends to -inf (and
    returns -inf on the variety itself when called through :meth:`raw`).
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    dimension: int
    domain: Domain
    homogeneity: RadialOperator | None = None
    label: str = "potential"
    spec: dict | None = None
    poles: tuple[VarietySpec, ...] = field(default=())

    def raw(self, z: np.ndarray) -> np.ndarray:
        """Evaluate without domain or finiteness checks."""
        return self.evaluator(np.asarray(z, dtype=complex))

    def _coerce(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if z.ndim == 0 or z.shape[-1] != self.dimension:
            raise DomainError(f"{self.label}: expected points with {self.dimension} coordinates, "
                              f"got shape {z.shape}")
        return z

    def __call__(self, z) -> Any:
        z = self._coerce(z)
        bad = self.domain.violations(z)
        if np.any(bad):
            first = z[bad][0] if z.ndim > 1 else z
            raise DomainError(f"{self.label}: point {first} outside domain ({self.domain.describe()})")
        with np.errstate(all="ignore"):
            val = np.asarray(self.evaluator(z), dtype=float)
        if not np.all(np.isfinite(val)):
            raise NumericError(f"{self.label}: non-finite value")
        return float(val) if val.ndim == 0 else val

    def to_config(self) -> dict:
        if self.spec is None:
            raise ConfigError(f"{self.label} has no serialisable spec")
        return self.spec


def _as_points(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


def euclidean_potential(n: int) -> PotentialField:
    """f(z) = |z|^2, homogeneous for the identity operator."""
    if n < 1:
        raise ConfigError("dimension must be >= 1")
    return PotentialField(
        lambda z: np.sum(np.abs(_as_points(z)) ** 2, axis=-1),
        n, Domain.full(n), RadialOperator.identity(n), "euclidean",
        {"kind": "euclidean", "dimension": n},
    )


def quadratic_potential(matrix, center=None, constant: float = 0.0) -> PotentialField:
    """f(z) = (z-c)^H M (z-c) + k for a Hermitian matrix M.

    Its Levi form is M^T (equivalently the Hermitian form v -> v^H M v).
    """
    M = np.array(matrix, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ConfigError("quadratic potential needs a square matrix")
    M = 0.5 * (M + M.conj().T)
    n = M.shape[0]
    c = np.zeros(n, dtype=complex) if center is None else np.asarray(center, dtype=complex)
    if c.shape != (n,):
        raise ConfigError("center has the wrong dimension")

    def evaluate(z):
        w = _as_points(z) - c
        return np.einsum("...j,jk,...k->...", w.conj(), M, w).real + constant

    spec = {"kind": "quadratic", "dimension": n,
            "matrix": [[[v.real, v.imag] for v in row] for row in M],
            "center": [[v.real, v.imag] for v in c], "constant": float(constant)}
    return PotentialField(evaluate, n, Domain.full(n), None, "quadratic", spec)


def fubini_study_potential(n: int) -> PotentialField:
    """f(z) = log(1 + |z|^2)."""
    return PotentialField(
        lambda z: np.log1p(np.sum(np.abs(_as_points(z)) ** 2, axis=-1)),
        n, Domain.full(n), None, "fubini_study", {"kind": "fubini_study", "dimension": n},
    )


def constant_potential(n: int, value: float = 0.0) -> PotentialField:
    return PotentialField(
        lambda z: np.full(_as_points(z).shape[:-1], float(value)),
        n, Domain.full(n), None, "constant", {"kind": "constant", "dimension": n, "value": value},
    )


def sine_gaussian_potential(n: int, amplitude: float, coordinate: int = 0) -> PotentialField:
    """f(z) = amplitude * sin(Re z_k) * exp(-|z|^2)."""
    if not 0 <= coordinate < n:
        raise ConfigError("coordinate index out of range")

    def evaluate(z):
        z = _as_points(z)
        return amplitude * np.sin(z[..., coordinate].real) * np.exp(-np.sum(np.abs(z) ** 2, axis=-1))

    spec = {"kind": "sine_gaussian", "dimension": n, "amplitude": amplitude, "coordinate": coordinate}
    return PotentialField(evaluate, n, Domain.full(n), None, "sine_gaussian", spec)


def hopf_solve(z: np.ndarray, alpha: np.ndarray, max_iter: int = HOPF_MAX_ITER) -> np.ndarray:
    """Positive root of sum_j |z_j|^2 phi^(-alpha_j) = 1 for every point in ``z``.

    Works with s = log(phi): G(s) = log sum_j |z_j|^2 exp(-alpha_j s) is convex
    and decreasing, so Newton started from the lower bracket
    s_lo = max_j log|z_j|^2 / alpha_j (where G >= 0) climbs monotonically to the
    root.  Steps that leave the bracket [s_lo, s_hi] are replaced by bisection.
    The origin maps to 0.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape[:-1]
    r = (np.abs(z) ** 2).reshape(-1, z.shape[-1])
    with np.errstate(divide="ignore"):
        logr = np.log(r)
    zero = np.all(r == 0, axis=1)
    n = r.shape[1]
    lo = np.max(logr / alpha, axis=1)
    hi = np.max((logr + math.log(n)) / alpha, axis=1)
    lo[zero] = 0.0
    hi[zero] = 0.0
    s = lo.copy()
    active = ~zero
    polish = np.zeros_like(active)
    for _ in range(max_iter):
        if not np.any(active):
            break
        idx = np.nonzero(active)[0]
        e = np.exp(logr[idx] - np.outer(s[idx], alpha))
        tot = e.sum(axis=1)
        G = np.log(tot)
        dG = -(e @ alpha) / tot
        pos = G > 0
        lo[idx] = np.where(pos, s[idx], lo[idx])
        hi[idx] = np.where(pos, hi[idx], s[idx])
        step = -G / dG
        new = s[idx] + step
        outside = ~((new >= lo[idx]) & (new <= hi[idx]))
        new = np.where(outside, 0.5 * (lo[idx] + hi[idx]), new)
        tiny = np.abs(new - s[idx]) <= 1e-14 * np.maximum(1.0, np.abs(s[idx]))
        s[idx] = new
        # one extra polishing step after the tolerance is first met
        done = tiny & polish[idx]
        polish[idx] |= tiny
        active[idx[done | (G == 0)]] = False
    if np.any(active):
        bad = np.nonzero(active)[0][0]
        raise NumericError(f"hopf root did not converge in {max_iter} iterations "
                           f"(bracket [{math.exp(lo[bad])!r}, {math.exp(hi[bad])!r}])")
    phi = np.exp(s)
    phi[zero] = 0.0
    return phi.reshape(shape)


def hopf_potential(alpha: Sequence[float]) -> PotentialField:
    """Implicit potential solving sum_j |z_j|^2 phi^(-alpha_j) = 1 on C^n minus 0.

    Homogeneous for A = diag(alpha): phi(exp(tA) z) = exp(2t) phi(z).  All
    weights equal to 1 gives |z|^2.  A Hopf parameter lambda_j (|lambda_j| < 1)
    corresponds to alpha_j = -log|lambda_j| up to a common scale.
    """
    a = np.asarray(alpha, dtype=float)
    if a.ndim != 1 or a.size < 1 or np.any(~(a > 0)):
        raise ConfigError("hopf weights must be positive")
    n = a.size
    return PotentialField(
        lambda z: hopf_solve(z, a), n, Domain(n, punctured=True), RadialOperator.diagonal(a),
        "hopf", {"kind": "hopf", "dimension": n, "weights": a.tolist()},
    )


def hopf_residual(z: np.ndarray, phi: np.ndarray, alpha: Sequence[float]) -> np.ndarray:
    """F(phi) = sum_j |z_j|^2 phi^(-alpha_j) - 1."""
    z = np.asarray(z, dtype=complex)
    a = np.asarray(alpha, dtype=float)
    return np.sum(np.abs(z) ** 2 * np.asarray(phi)[..., None] ** (-a), axis=-1) - 1.0


def log_pole_potential(spec: VarietySpec) -> PotentialField:
    """f(z) = 1/2 log sum_k |g_k(z)|^2, with logarithmic poles along Z."""
    n = spec.dimension

    def evaluate(z):
        s = spec.sum_sq(_as_points(z))
        with np.errstate(divide="ignore"):
            return np.where(s < 1e-300, -np.inf, 0.5 * np.log(np.maximum(s, 1e-300)))

    return PotentialField(evaluate, n, Domain(n, varieties=(spec,)), None, "log_pole",
                          {"kind": "log_pole", "dimension": n, "generators": spec.to_config()},
                          poles=(spec,))


def affine_combine(f: PotentialField, a: float, b: float) -> PotentialField:
    """g = a f + b with a >= 0."""
    if not a >= 0:
        raise ConfigError("affine_combine needs a >= 0 to preserve plurisubharmonicity")
    if a == 1 and b == 0:
        return f
    spec = None
    if f.spec is not None:
        spec = {"kind": "affine", "dimension": f.dimension, "a": a, "b": b, "base": f.spec}
    if a == 0:
        return PotentialField(lambda z: np.full(_as_points(z).shape[:-1], float(b)),
                              f.dimension, Domain.full(f.dimension), None, f"0*{f.label}+{b}", spec)
    ev = f.evaluator
    return PotentialField(lambda z: a * ev(z) + b, f.dimension, f.domain, None,
                          f"{a}*{f.label}+{b}", spec, f.poles)


def add_fields(*fields: PotentialField) -> PotentialField:
    """Pointwise sum on the intersection of domains."""
    if not fields:
        raise ConfigError("nothing to add")
    dom = fields[0].domain
    for f in fields[1:]:
        dom = dom.intersect(f.domain)
    evs = [f.evaluator for f in fields]
    spec = None
    if all(f.spec is not None for f in fields):
        spec = {"kind": "sum", "dimension": fields[0].dimension, "terms": [f.spec for f in fields]}
    poles = tuple(dict.fromkeys(p for f in fields for p in f.poles))
    return PotentialField(lambda z: sum(ev(z) for ev in evs), fields[0].dimension, dom, None,
                          "+".join(f.label for f in fields), spec, poles)


def compose_linear(f: PotentialField, basis: np.ndarray, label: str | None = None) -> PotentialField:
    """Pull back f along w -> basis @ w (e.g. restriction to a linear subspace)."""
    B = np.asarray(basis, dtype=complex)
    m = B.shape[1]
    ev = f.evaluator
    return PotentialField(lambda w: ev(_as_points(w) @ B.T), m, Domain.full(m), None,
                          label or f"{f.label}|sub")


def distance_term(spec: VarietySpec, c1: float) -> PotentialField:
    """f(z) = c1 d(z, Z)^2 for linear Z; its Levi form is c1 times the normal projector."""
    if not spec.is_linear:
        raise ConfigError("distance_term supports only linear varieties")
    if c1 < 0:
        raise ConfigError("c1 must be non-negative")
    P = spec.normal_projector()
    n = spec.dimension

    def evaluate(z):
        w = _as_points(z) @ P.T
        return c1 * np.sum(np.abs(w) ** 2, axis=-1)

    return PotentialField(evaluate, n, Domain.full(n), None, "distance_term",
                          {"kind": "distance", "dimension": n, "c1": c1, "generators": spec.to_config()})


def from_callable(fn: Callable[[np.ndarray], np.ndarray], n: int, domain: Domain | None = None,
                  label: str = "custom") -> PotentialField:
    return PotentialField(fn, n, domain or Domain.full(n), None, label)


def potential_from_config(data: dict) -> PotentialField:
    """Build a potential from its structured config (see README for the format)."""
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError("potential config needs a 'kind' key")
    kind = data["kind"]
    try:
        if kind == "euclidean":
            return euclidean_potential(int(data["dimension"]))
        if kind == "hopf":
            return hopf_potential([float(w) for w in data["weights"]])
        if kind == "fubini_study":
            return fubini_study_potential(int(data["dimension"]))
        if kind == "constant":
            return constant_potential(int(data["dimension"]), float(data.get("value", 0.0)))
        if kind == "sine_gaussian":
            return sine_gaussian_potential(int(data["dimension"]), float(data["amplitude"]),
                                           int(data.get("coordinate", 0)))
        if kind == "quadratic":
            M = [[parse_complex(v) for v in row] for row in data["matrix"]]
            center = data.get("center")
            if center is not None:
                center = [parse_complex(v) for v in center]
            return quadratic_potential(M, center, float(data.get("constant", 0.0)))
        if kind == "log_pole":
            n = int(data["dimension"])
            return log_pole_potential(VarietySpec.from_config(data["generators"], n))
        if kind == "distance":
            n = int(data["dimension"])
            return distance_term(VarietySpec.from_config(data["generators"], n), float(data["c1"]))
        if kind == "affine":
            return affine_combine(potential_from_config(data["base"]), float(data["a"]), float(data["b"]))
        if kind == "sum":
            return add_fields(*[potential_from_config(t) for t in data["terms"]])
    except KeyError as exc:
        raise ConfigError(f"potential of kind {kind!r} is missing key {exc.args[0]!r}") from None
    raise ConfigError(f"unknown potential kind {kind!r}")
