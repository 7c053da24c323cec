"""Radial flows exp(tA), level-set projection and per-ray sphere certificates.

For a potential with X_A(f) = 2f the function t -> f(exp(tA) z) equals
exp(2t) f(z), so each flow line meets the level set {f = lambda} exactly once,
at t* = log(lambda / f(z)) / 2.  The certificates here check that numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .complex_calculus import DEFAULT_SCHEME, FDScheme, directional_derivatives
from .errors import ConfigError, DomainError, InconsistentMetadataError
from .potentials import PotentialField, RadialOperator
from .report import Certificate, VerificationReport, point_payload

LEVEL_TOL = 1e-9


def expm(M: np.ndarray, tol: float = 1e-16) -> np.ndarray:
    """Matrix exponential by Taylor series with scaling and squaring.

    M is scaled by 2^-s so that ||M / 2^s||_1 <= 1/2, the series is summed until
    the tail bound drops below ``tol`` and the result is squared s times.
    """
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    norm = np.linalg.norm(M, 1)
    s = 0 if norm <= 0.5 else int(math.ceil(math.log2(norm / 0.5)))
    X = M / 2.0 ** s
    xn = np.linalg.norm(X, 1)
    total = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    k = 0
    while True:
        k += 1
        term = term @ X / k
        total = total + term
        # tail after term k is bounded by ||X||^(k+1)/(k+1)! * 1/(1 - ||X||/(k+2))
        tail = xn ** (k + 1) / math.factorial(k + 1) / (1 - xn / (k + 2))
        if tail < tol or k > 60:
            break
    for _ in range(s):
        total = total @ total
    return total


@dataclass(frozen=True)
class FlowLine:
    base: np.ndarray
    operator: RadialOperator

    def __post_init__(self):
        b = np.asarray(self.base, dtype=complex)
        if not np.any(b != 0):
            raise DomainError("a flow line needs a nonzero base point")
        object.__setattr__(self, "base", b)

    def __call__(self, t):
        return flow(self.operator, self.base, t)


def as_operator(A) -> RadialOperator:
    return A if isinstance(A, RadialOperator) else RadialOperator(np.asarray(A, dtype=complex))


def flow(A: RadialOperator, z, t):
    """exp(tA) z.  ``t`` may be an array; the result then has shape t.shape + z.shape."""
    A = as_operator(A)
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    if A.is_diagonal:
        w = A.weights
        return np.exp(t[..., None] * w) * z if t.ndim else np.exp(float(t) * w) * z
    if t.ndim == 0:
        return z @ expm(float(t) * A.matrix).T
    out = np.stack([z @ expm(float(tt) * A.matrix).T for tt in t.ravel()])
    return out.reshape(t.shape + z.shape)


def closed_form_time(f: PotentialField, z, level: float) -> float:
    val = float(f(z))
    if not val > 0:
        raise DomainError(f"{f.label}({z}) = {val} is not positive")
    if not level > 0:
        raise ConfigError("level must be positive")
    return 0.5 * math.log(level / val)


def project_to_level(f: PotentialField, z, level: float) -> np.ndarray:
    """The unique point of the flow line through z on {f = level}."""
    if f.homogeneity is None:
        raise InconsistentMetadataError(f"{f.label} carries no homogeneity operator")
    t = closed_form_time(f, z, level)
    p = flow(f.homogeneity, z, t)
    if abs(float(f(p)) - level) > LEVEL_TOL * level:
        raise InconsistentMetadataError(
            f"{f.label}: projected value {float(f(p))!r} misses level {level!r}; "
            "declared homogeneity is wrong")
    return p


def _pairs(samples, ts) -> tuple[np.ndarray, np.ndarray]:
    z = np.atleast_2d(np.asarray(samples, dtype=complex))
    t = np.atleast_1d(np.asarray(ts, dtype=float))
    if len(t) == len(z):
        return z, t
    zz = np.repeat(z, len(t), axis=0)
    tt = np.tile(t, len(z))
    return zz, tt


def verify_homogeneity(f: PotentialField, A: RadialOperator, samples, ts, tol: float = 1e-8,
                       fd_tol: float = 1e-6, scheme: FDScheme = DEFAULT_SCHEME) -> VerificationReport:
    """Check f(exp(tA) z) = e^{2t} f(z) and X_A(f) = 2f.

    ``ts`` of the same length as ``samples`` is zipped with them, otherwise
    every (z, t) combination is used.  Both residuals are relative to the
    expected value.
    """
    A = as_operator(A)
    report = VerificationReport(f"homogeneity:{f.label}")
    z, t = _pairs(samples, ts)
    base = np.asarray(f(z), dtype=float)
    moved = np.stack([flow(A, zi, ti) for zi, ti in zip(z, t)]) if not A.is_diagonal else \
        np.exp(t[:, None] * A.weights) * z
    expect = np.exp(2 * t) * base
    rel = np.abs(np.asarray(f(moved), dtype=float) - expect) / np.abs(expect)
    i = int(np.argmax(rel))
    report.add(Certificate("finite_homogeneity", bool(np.all(rel <= tol)),
                           point_payload(z[i]), float(rel[i]), tol, len(z)))

    pts = np.atleast_2d(np.asarray(samples, dtype=complex))
    vals = np.asarray(f(pts), dtype=float)
    d = directional_derivatives(f, pts, A.apply(pts), scheme)
    rel_inf = np.abs(d - 2 * vals) / np.abs(2 * vals)
    j = int(np.argmax(rel_inf))
    report.add(Certificate("infinitesimal_homogeneity", bool(np.all(rel_inf <= fd_tol)),
                           point_payload(pts[j]), float(rel_inf[j]), fd_tol, len(pts)))
    return report


def _crossing(f: PotentialField, A: RadialOperator, z, level: float, t_range, grid: int):
    A = as_operator(A)
    ts = np.linspace(t_range[0], t_range[1], grid)
    g = np.asarray(f(flow(A, z, ts)), dtype=float)
    increasing = bool(np.all(np.diff(g) > 0))
    min_step = float(np.min(np.diff(g)))
    sign = np.sign(g - level)
    changes = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    exact = np.nonzero(sign == 0)[0]
    count = len(changes) + len(exact)
    root = None
    if count == 1:
        if len(exact):
            root = float(ts[exact[0]])
        else:
            k = changes[0]
            root = brentq(lambda s: float(f(flow(A, z, s))) - level, ts[k], ts[k + 1],
                          xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    out_of_range = count == 0 and (level > g.max() or level < g.min())
    return dict(increasing=increasing, min_step=min_step, count=count, root=root,
                out_of_range=out_of_range, spacing=float(ts[1] - ts[0]))


def check_unique_intersection(f: PotentialField, A: RadialOperator, z, level: float,
                              t_range=(-10.0, 10.0), grid: int = 2001,
                              tol: float = 1e-8) -> VerificationReport:
    """Certify that t -> f(exp(tA) z) is increasing and crosses ``level`` once.

    The crossing is refined with Brent's method and compared to the closed
    form t* = log(level / f(z)) / 2.  When the level is never reached on the
    sampled range the report is flagged ``range_too_small`` and carries no
    crossing certificates.
    """
    report = VerificationReport(f"ray:{f.label}")
    z = np.asarray(z, dtype=complex)
    res = _crossing(f, A, z, level, t_range, grid)
    report.add(Certificate("strictly_increasing", res["increasing"], point_payload(z),
                           res["min_step"], 0.0, grid))
    t_star = closed_form_time(f, z, level)
    report.details.update(crossings=res["count"], closed_form_t=t_star, grid_spacing=res["spacing"])
    if res["out_of_range"]:
        report.details["status"] = "range_too_small"
        return report
    report.details["status"] = "ok" if res["count"] == 1 else "multiple_crossings"
    report.add(Certificate("single_crossing", res["count"] == 1, point_payload(z),
                           float(res["count"]), 1.0, grid))
    if res["root"] is not None:
        dev = abs(res["root"] - t_star)
        report.details.update(crossing_t=res["root"], deviation=dev)
        report.add(Certificate("crossing_matches_closed_form", dev <= tol, point_payload(z),
                               dev, tol, 1))
    return report


def ray_sweep(f: PotentialField, A: RadialOperator, rays, level: float, t_range=(-10.0, 10.0),
              grid: int = 2001, tol: float = 1e-8) -> tuple[VerificationReport, list[dict]]:
    """check_unique_intersection over many rays plus projection residuals.

    Returns the merged report (worst case per certificate) and one CSV-ready row
    per ray with its id, crossing time and level residual.
    """
    A = as_operator(A)
    report = VerificationReport(f"ray_sweep:{f.label}")
    rows = []
    worst = {}
    statuses = {}
    for k, z in enumerate(np.atleast_2d(np.asarray(rays, dtype=complex))):
        r = check_unique_intersection(f, A, z, level, t_range, grid, tol)
        p = project_to_level(f, z, level)
        resid = abs(float(f(p)) - level) / level
        rows.append({"ray": k, "crossing_t": r.details.get("crossing_t"),
                     "closed_form_t": r.details["closed_form_t"],
                     "deviation": r.details.get("deviation"), "residual": resid,
                     "crossings": r.details["crossings"]})
        statuses[r.details["status"]] = statuses.get(r.details["status"], 0) + 1
        r.add(Certificate("projection_on_level", resid <= LEVEL_TOL, point_payload(z), resid,
                          LEVEL_TOL, 1))
        for c in r.certificates:
            acc = worst.setdefault(c.name, {"pass": True, "count": 0, "worst": None, "point": None,
                                            "tol": c.tolerance})
            acc["pass"] &= c.passed
            acc["count"] += c.sample_count
            bad = _badness(c)
            if acc["worst"] is None or bad > _badness_value(c.name, acc["worst"]):
                acc["worst"], acc["point"] = c.worst_value, c.worst_point
    for name, acc in worst.items():
        report.add(Certificate(name, acc["pass"], acc["point"], acc["worst"], acc["tol"], acc["count"]))
    report.details["rays"] = len(rows)
    report.details["status_counts"] = statuses
    return report, rows


def _badness_value(name: str, value: float) -> float:
    if name == "strictly_increasing":
        return -value
    if name == "single_crossing":
        return abs(value - 1)
    return value


def _badness(c: Certificate) -> float:
    return _badness_value(c.name, c.worst_value)


def halving_iterations(A: RadialOperator, t_neg: float) -> int:
    """Iterations of exp(t_neg A) guaranteed to halve every norm.

    ||exp(k t A)|| <= kappa exp(k t mu) with mu the spectral abscissa and kappa
    the eigenvector condition number, so k = ceil(log(2 kappa) / (|t| mu)).
    """
    A = as_operator(A)
    mu = A.spectral_abscissa
    kappa = A.eigenvector_condition
    return max(1, int(math.ceil(math.log(2 * kappa) / (abs(t_neg) * mu) - 1e-12)))


def contraction_check(A: RadialOperator, samples, t_neg: float) -> VerificationReport:
    """Certify |exp(t_neg A) z| < |z| and halving of norms after the computed iteration count."""
    if not t_neg < 0:
        raise ConfigError("contraction_check needs t_neg < 0")
    A = as_operator(A)
    report = VerificationReport("contraction")
    z = np.atleast_2d(np.asarray(samples, dtype=complex))
    norms = np.linalg.norm(z, axis=1)
    step = flow(A, z, t_neg) if A.is_diagonal else z @ expm(t_neg * A.matrix).T
    ratio = np.linalg.norm(step, axis=1) / norms
    i = int(np.argmax(ratio))
    report.add(Certificate("single_step_contraction", bool(np.all(ratio < 1)), point_payload(z[i]),
                           float(ratio[i]), 1.0, len(z)))
    k = halving_iterations(A, t_neg)
    E = expm(t_neg * A.matrix)
    w = z.copy()
    for _ in range(k):
        w = w @ E.T
    ratio_k = np.linalg.norm(w, axis=1) / norms
    j = int(np.argmax(ratio_k))
    report.add(Certificate("halving", bool(np.all(ratio_k <= 0.5)), point_payload(z[j]),
                           float(ratio_k[j]), 0.5, len(z)))
    report.details.update(iterations=k, spectral_abscissa=A.spectral_abscissa,
                          eigenvector_condition=A.eigenvector_condition,
                          outside_verified_envelope=A.outside_verified_envelope)
    return report
