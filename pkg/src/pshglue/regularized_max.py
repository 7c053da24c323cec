"""Regularized maximum of two functions.

For an even polynomial mollifier rho on [-1, 1] with unit mass,

    max_delta(x, y) = E[max(x + a h1, y + a h2)],   h1, h2 ~ rho,  a = delta / 2.

With S = h2 - h1 (density rho~ = rho * rho on [-2, 2]) this collapses to

    max_delta(x, y) = max(x, y) + a g(|x - y| / a),   g(u) = int_u^2 (s - u) rho~(s) ds,

and g vanishes for u >= 2, i.e. for |x - y| >= delta.  g is a single
polynomial on [0, 2]; it is derived exactly (rational arithmetic) once per
kernel and stored in powers of t = 2 - u so that evaluation near the band
edge has no cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy as sp

from .errors import ConfigError, DomainError
from .potentials import PotentialField


@lru_cache(maxsize=None)
def _kernel_polynomials(power: int) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...], tuple[Fraction, ...]]:
    """Exact coefficients (ascending) of rho(h), rho~(s) on [0, 2] and g(2 - t)."""
    h, s, t = sp.symbols("h s t", real=True)
    base = (1 - h ** 2) ** power
    c = 1 / sp.integrate(base, (h, -1, 1))
    rho = sp.expand(c * base)
    auto = sp.expand(sp.integrate(rho * rho.subs(h, h + s), (h, -1, 1 - s)))
    u = sp.Symbol("u", real=True)
    g = sp.integrate((s - u) * auto, (s, u, 2))
    g_t = sp.expand(g.subs(u, 2 - t))

    def coeffs(expr, var):
        poly = sp.Poly(expr, var)
        out = [Fraction(0)] * (poly.degree() + 1)
        for (k,), v in poly.terms():
            out[k] = Fraction(int(sp.fraction(v)[0]), int(sp.fraction(v)[1]))
        return tuple(out)

    return coeffs(rho, h), coeffs(auto, s), coeffs(g_t, t)


@dataclass(frozen=True)
class MollifierKernel:
    """rho(h) = c (1 - h^2)^power on [-1, 1], normalised to unit mass.

    ``power`` >= 2 makes rho and rho' vanish at the endpoints; the default
    power 2 is (15/16)(1 - h^2)^2; see :attr:`regularity` for the class it yields.
    """

    power: int = 2
    rho_coeffs: tuple[Fraction, ...] = field(init=False, repr=False)
    autocorrelation_coeffs: tuple[Fraction, ...] = field(init=False, repr=False)
    g_coeffs: tuple[Fraction, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.power) != self.power or self.power < 2:
            raise ConfigError("kernel power must be an integer >= 2")
        rho, auto, g = _kernel_polynomials(int(self.power))
        object.__setattr__(self, "rho_coeffs", rho)
        object.__setattr__(self, "autocorrelation_coeffs", auto)
        object.__setattr__(self, "g_coeffs", g)

    @classmethod
    def from_degree(cls, degree: int) -> MollifierKernel:
        """Kernel of even polynomial degree ``degree`` (= 2 * power)."""
        if degree % 2 or degree < 4:
            raise ConfigError("kernel degree must be even and >= 4")
        return cls(degree // 2)

    @property
    def degree(self) -> int:
        return 2 * self.power

    @property
    def regularity(self) -> int:
        """k such that the regularized max is C^k (and not C^(k+1)).

        Its second derivatives are rho~(|x - y| / a) / a.  rho~ is a polynomial P
        on [0, 2] reflected to [-2, 0]; it is C^j across 0 where j + 1 is the
        lowest odd power present in P, and vanishes to order 2*power + 1 at +-2.
        """
        odd = [k for k, c in enumerate(self.autocorrelation_coeffs) if k % 2 and c != 0]
        at_zero = (odd[0] - 1) if odd else 10 ** 6
        return 2 + min(at_zero, 2 * self.power)

    def rho(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        val = np.polynomial.polynomial.polyval(h, [float(c) for c in self.rho_coeffs])
        return np.where(np.abs(h) <= 1, val, 0.0)

    def autocorrelation(self, s) -> np.ndarray:
        """rho~(s) = int rho(h) rho(h + s) dh, even, supported on [-2, 2]."""
        a = np.abs(np.asarray(s, dtype=float))
        val = np.polynomial.polynomial.polyval(a, [float(c) for c in self.autocorrelation_coeffs])
        return np.where(a <= 2, val, 0.0)

    @property
    def diagonal_constant(self) -> Fraction:
        """g(0) = int_0^2 s rho~(s) ds, so max_delta(x, x) = x + (delta/2) g(0)."""
        return sum(c * 2 ** k for k, c in enumerate(self.g_coeffs))

    def g(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        t = 2.0 - u
        coeffs = [float(c) for c in self.g_coeffs]
        val = np.polynomial.polynomial.polyval(t, coeffs)
        return np.where(u < 2.0, val, 0.0)


DEFAULT_KERNEL = MollifierKernel()


@dataclass(frozen=True)
class RegMaxParams:
    delta: float = 1.0
    kernel: MollifierKernel = DEFAULT_KERNEL

    def __post_init__(self):
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise ConfigError("delta must be a positive finite number")


def reg_max(x, y, params: RegMaxParams = RegMaxParams()):
    """Regularized maximum; equals max(x, y) bit-exactly wherever |x - y| >= delta.

    Accepts scalars or broadcastable arrays.  -inf in either argument is allowed
    and yields the other argument.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = np.maximum(x, y)
    a = 0.5 * params.delta
    with np.errstate(invalid="ignore"):
        gap = np.abs(x - y)
        outside = ~(gap < params.delta)
        u = np.where(outside, 2.0, gap / a)
        out = np.where(outside, m, m + a * params.kernel.g(u))
    return float(out) if out.ndim == 0 else out


def reg_max_field(f: PotentialField, g: PotentialField, params: RegMaxParams = RegMaxParams()) -> PotentialField:
    """z -> reg_max(f(z), g(z)) on the common domain.

    A pole locus of one argument (where it tends to -inf) is not removed from
    the domain when the other argument is defined there: the result simply
    follows the other argument near it.
    """
    if f.dimension != g.dimension:
        raise DomainError("reg_max_field arguments live in different dimensions")
    dom = f.domain.intersect(g.domain)
    removable = [v for v in f.poles if v not in g.domain.varieties]
    removable += [v for v in g.poles if v not in f.domain.varieties]
    dom = dom.without_varieties(removable)
    poles = tuple(p for p in f.poles if p in g.poles)
    fe, ge = f.evaluator, g.evaluator

    def evaluate(z):
        with np.errstate(invalid="ignore"):
            return np.asarray(reg_max(fe(z), ge(z), params))

    spec = None
    if f.spec is not None and g.spec is not None:
        spec = {"kind": "reg_max", "dimension": f.dimension, "delta": params.delta,
                "kernel_degree": params.kernel.degree, "first": f.spec, "second": g.spec}
    return PotentialField(evaluate, f.dimension, dom, None,
                          f"max_{params.delta}({f.label},{g.label})", spec, poles)


def reg_max_hessian(x, y, params: RegMaxParams = RegMaxParams()) -> np.ndarray:
    """Exact Hessian of reg_max: (rho~(|x-y|/a)/a) [[1, -1], [-1, 1]]."""
    a = 0.5 * params.delta
    w = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) / a
    k = params.kernel.autocorrelation(w) / a
    return k[..., None, None] * np.array([[1.0, -1.0], [-1.0, 1.0]])


def fd_hessian_2d(fn, x, y, h: float = 1e-3) -> np.ndarray:
    """Hessian of fn(x, y) from directional second differences (polarization).

    f_xy = (D2_{e1+e2} - D2_{e1} - D2_{e2}) / 2 uses the same step in every
    direction, so directions in which fn is affine carry no truncation error.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    f0 = fn(x, y)

    def d2(dx, dy):
        return (fn(x + dx, y + dy) - 2 * f0 + fn(x - dx, y - dy)) / h ** 2

    fxx = d2(h, 0.0)
    fyy = d2(0.0, h)
    fxy = 0.5 * (d2(h, h) - fxx - fyy)
    return np.stack([np.stack([fxx, fxy], -1), np.stack([fxy, fyy], -1)], -2)


def probe_grid(params: RegMaxParams = RegMaxParams(0.5), resolution: int = 200, extent: float = 3.0,
               hessian_step: float = 1e-3, hessian_tol: float = 1e-8):
    """Certify the reg_max contract on a resolution x resolution grid over [-extent, extent]^2.

    Certificates: bit-exact max outside the band, max <= reg_max <= max + delta/2
    inside it, and a positive semidefinite finite-difference Hessian.
    """
    from .report import Certificate, VerificationReport

    axis = np.linspace(-extent, extent, resolution)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    X, Y = X.ravel(), Y.ravel()
    val = reg_max(X, Y, params)
    m = np.maximum(X, Y)
    outside = np.abs(X - Y) >= params.delta
    mismatch = outside & (val != m)
    report = VerificationReport("regmax_probe")
    k = int(np.argmax(mismatch)) if np.any(mismatch) else 0
    report.add(Certificate("exact_outside_band", not np.any(mismatch), [float(X[k]), float(Y[k])],
                           float(np.count_nonzero(mismatch)), 0.0, int(np.count_nonzero(outside))))
    band = ~outside
    excess = np.maximum(m - val, val - m - 0.5 * params.delta)
    excess = np.where(band, excess, -np.inf)
    j = int(np.argmax(excess))
    report.add(Certificate("band_bounds", bool(excess[j] <= 0), [float(X[j]), float(Y[j])],
                           float(excess[j]), 0.0, int(np.count_nonzero(band))))
    H = fd_hessian_2d(lambda a, b: reg_max(a, b, params), X, Y, hessian_step)
    lam = np.linalg.eigvalsh(H)[:, 0]
    i = int(np.argmin(lam))
    report.add(Certificate("hessian_psd", bool(lam[i] >= -hessian_tol), [float(X[i]), float(Y[i])],
                           float(lam[i]), hessian_tol, len(lam)))
    report.details.update(delta=params.delta, kernel_degree=params.kernel.degree, resolution=resolution,
                          extent=extent, hessian_step=hessian_step,
                          diagonal_constant=str(params.kernel.diagonal_constant))
    return report
