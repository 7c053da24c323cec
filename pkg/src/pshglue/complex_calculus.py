"""Finite-difference complex calculus and Hermitian eigen-certificates.

Coordinates are split as ``x = (Re z_1..Re z_n, Im z_1..Im z_n)``.  The Levi
form is assembled from the real Hessian through

    d^2 f / dz_j dzbar_k = 1/4 (f_{x_j x_k} + f_{y_j y_k}) + i/4 (f_{x_j y_k} - f_{y_j x_k}).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, NumericError, StencilError
from .potentials import PotentialField
from .report import Certificate, VerificationReport, point_payload

CHUNK = 4096


@dataclass(frozen=True)
class FDScheme:
    step: float = 1e-4
    order: int = 4

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigError("finite-difference step must be positive")
        if self.order not in (2, 4):
            raise ConfigError("finite-difference order must be 2 or 4")


DEFAULT_SCHEME = FDScheme()

_FIRST = {
    2: {-1: -0.5, 1: 0.5},
    4: {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12},
}
_SECOND = {
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    4: {-2: -1 / 12, -1: 4 / 3, 0: -5 / 2, 1: 4 / 3, 2: -1 / 12},
}


@lru_cache(maxsize=None)
def hessian_stencil(dim: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Unique stencil offsets (K, dim) and the weights (K, dim*dim) for the real Hessian.

    Diagonal entries use the 1-D second-difference stencil, mixed entries the
    tensor product of two first-difference stencils.
    """
    index: dict[tuple[int, ...], int] = {}
    rows: list[dict[int, float]] = []

    def slot(offset: tuple[int, ...]) -> dict[int, float]:
        if offset not in index:
            index[offset] = len(rows)
            rows.append({})
        return rows[index[offset]]

    for a in range(dim):
        for k, w in _SECOND[order].items():
            off = [0] * dim
            off[a] = k
            entry = slot(tuple(off))
            entry[a * dim + a] = entry.get(a * dim + a, 0.0) + w
        for b in range(a + 1, dim):
            for k, wk in _FIRST[order].items():
                for m, wm in _FIRST[order].items():
                    off = [0] * dim
                    off[a] = k
                    off[b] = m
                    entry = slot(tuple(off))
                    for e in (a * dim + b, b * dim + a):
                        entry[e] = entry.get(e, 0.0) + wk * wm
    offsets = np.array(list(index.keys()), dtype=float)
    weights = np.zeros((len(rows), dim * dim))
    for i, row in enumerate(rows):
        for e, w in row.items():
            weights[i, e] = w
    offsets.setflags(write=False)
    weights.setflags(write=False)
    return offsets, weights


def hermitize(m: np.ndarray) -> np.ndarray:
    """Exact Hermitian part (M + M^H)/2 for a matrix or a stack of matrices."""
    m = np.asarray(m, dtype=complex)
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def _stencil_points(f: PotentialField, z: np.ndarray, scheme: FDScheme) -> tuple[np.ndarray, np.ndarray]:
    n = f.dimension
    offsets, weights = hessian_stencil(2 * n, scheme.order)
    disp = scheme.step * (offsets[:, :n] + 1j * offsets[:, n:])
    return z[:, None, :] + disp[None, :, :], weights


def _check_stencil(f: PotentialField, pts: np.ndarray) -> np.ndarray:
    """Per-centre mask of stencils that leave the domain."""
    return np.any(f.domain.violations(pts), axis=-1)


def real_hessians(f: PotentialField, points, scheme: FDScheme = DEFAULT_SCHEME) -> np.ndarray:
    """Real Hessians (N, 2n, 2n) of f at ``points`` (N, n)."""
    z = np.atleast_2d(np.asarray(points, dtype=complex))
    n = f.dimension
    out = np.empty((len(z), 2 * n, 2 * n))
    for start in range(0, len(z), CHUNK):
        zc = z[start:start + CHUNK]
        pts, weights = _stencil_points(f, zc, scheme)
        bad = _check_stencil(f, pts)
        if np.any(bad):
            raise StencilError(f"{f.label}: finite-difference stencil at {zc[bad][0]} leaves "
                               f"the domain ({f.domain.describe()})")
        with np.errstate(all="ignore"):
            vals = np.asarray(f.raw(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NumericError(f"{f.label}: non-finite value on the stencil")
        out[start:start + CHUNK] = (vals @ weights).reshape(-1, 2 * n, 2 * n) / scheme.step ** 2
    return out


def levi_from_real_hessian(H: np.ndarray) -> np.ndarray:
    n = H.shape[-1] // 2
    hxx = H[..., :n, :n]
    hyy = H[..., n:, n:]
    hxy = H[..., :n, n:]
    hyx = H[..., n:, :n]
    return hermitize(0.25 * (hxx + hyy) + 0.25j * (hxy - hyx))


def levi_forms(f: PotentialField, points, scheme: FDScheme = DEFAULT_SCHEME) -> np.ndarray:
    """Batched Levi forms (N, n, n)."""
    return levi_from_real_hessian(real_hessians(f, points, scheme))


def levi_form(f: PotentialField, z, scheme: FDScheme = DEFAULT_SCHEME) -> np.ndarray:
    """Levi form (d^2 f / dz_j dzbar_k) at a single point, exactly Hermitian."""
    z = np.asarray(z, dtype=complex).reshape(1, -1)
    return levi_forms(f, z, scheme)[0]


def real_form(L: np.ndarray) -> np.ndarray:
    """Real symmetric matrix G with g(u, v) = Re sum_jk L_jk u_j conj(v_k) on R^2n."""
    P, Q = L.real, L.imag
    return np.block([[P, Q], [-Q, P]])


# --------------------------------------------------------------------------
# cyclic Jacobi for complex Hermitian matrices


def jacobi_eigenvalues(H, tol: float = 1e-15, max_sweeps: int = 60) -> np.ndarray:
    """Eigenvalues (ascending) of a Hermitian matrix or a stack (..., n, n).

    Each rotation first removes the phase of the pivot a_pq with a diagonal
    unitary, then applies the real symmetric Jacobi rotation.  All matrices
    of the stack are rotated together.
    """
    A = hermitize(H)
    shape = A.shape[:-2]
    n = A.shape[-1]
    A = A.reshape(-1, n, n).copy()
    if n == 1:
        return A[:, 0, 0].real.reshape(shape + (1,))
    scale = np.maximum(np.sum(np.abs(A) ** 2, axis=(1, 2)), np.finfo(float).tiny)
    # pivots below this are left alone; they cannot affect the eigenvalues at double precision
    negligible = 1e-30 * np.sqrt(scale)
    upper = np.triu_indices(n, 1)
    for _ in range(max_sweeps):
        off = np.sum(np.abs(A[:, upper[0], upper[1]]) ** 2, axis=1) * 2
        if np.all(off <= (tol ** 2) * scale):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[:, p, q]
                mag = np.abs(apq)
                active = mag > negligible
                if not np.any(active):
                    continue
                safe = np.where(active, mag, 1.0)
                e = np.where(active, apq / safe, 1.0)
                theta = (A[:, q, q].real - A[:, p, p].real) / (2 * safe)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ec = np.conj(e)
                # A <- A V with V = D R (D removes the pivot phase, R the real rotation)
                colp = A[:, :, p].copy()
                colq = A[:, :, q].copy()
                A[:, :, p] = c[:, None] * colp - (s * ec)[:, None] * colq
                A[:, :, q] = s[:, None] * colp + (c * ec)[:, None] * colq
                # A <- V^H A
                rowp = A[:, p, :].copy()
                rowq = A[:, q, :].copy()
                A[:, p, :] = c[:, None] * rowp - (s * e)[:, None] * rowq
                A[:, q, :] = s[:, None] * rowp + (c * e)[:, None] * rowq
                A[:, p, q] = np.where(active, 0.0, A[:, p, q])
                A[:, q, p] = np.where(active, 0.0, A[:, q, p])
                A[:, p, p] = A[:, p, p].real
                A[:, q, q] = A[:, q, q].real
    else:
        raise NumericError("Jacobi iteration did not converge")
    ev = np.sort(np.diagonal(A, axis1=1, axis2=2).real, axis=1)
    return ev.reshape(shape + (n,))


def min_eigenvalue(H) -> float | np.ndarray:
    """Smallest eigenvalue of a Hermitian form (or of each form in a stack)."""
    ev = jacobi_eigenvalues(H)[..., 0]
    return float(ev) if np.ndim(ev) == 0 else ev


def generalized_min_eigenvalue(L, G) -> np.ndarray:
    """Smallest eigenvalue of the pencil (L, G) with G positive definite, batched.

    Reduces to R^{-1} L R^{-H} with G = R R^H (Cholesky).
    """
    L = hermitize(L)
    G = hermitize(G)
    R = np.linalg.cholesky(G)
    Rinv = np.linalg.inv(R)
    M = Rinv @ L @ np.conj(np.swapaxes(Rinv, -1, -2))
    return jacobi_eigenvalues(M)[..., 0]


# --------------------------------------------------------------------------
# directional derivatives and psh certificates


def _as_complex_tangent(v, n: int) -> np.ndarray:
    v = np.asarray(v)
    if np.iscomplexobj(v):
        if v.shape[-1] != n:
            raise ConfigError("complex tangent vector has the wrong dimension")
        return v.astype(complex)
    v = v.astype(float)
    if v.shape[-1] == 2 * n:
        return v[..., :n] + 1j * v[..., n:]
    if v.shape[-1] == n:
        return v.astype(complex)
    raise ConfigError("tangent vector has the wrong dimension")


def directional_derivatives(f: PotentialField, points, vectors, scheme: FDScheme = DEFAULT_SCHEME) -> np.ndarray:
    """Central-difference derivatives of f along ``vectors`` (batched)."""
    z = np.atleast_2d(np.asarray(points, dtype=complex))
    v = np.broadcast_to(_as_complex_tangent(vectors, f.dimension), z.shape)
    ks = np.array(sorted(_FIRST[scheme.order]))
    ws = np.array([_FIRST[scheme.order][k] for k in ks])
    pts = z[:, None, :] + (scheme.step * ks)[None, :, None] * v[:, None, :]
    bad = _check_stencil(f, pts)
    if np.any(bad):
        raise StencilError(f"{f.label}: derivative stencil at {z[bad][0]} leaves the domain")
    with np.errstate(all="ignore"):
        vals = np.asarray(f.raw(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericError(f"{f.label}: non-finite value on the stencil")
    return vals @ ws / scheme.step


def directional_derivative(f: PotentialField, z, v, scheme: FDScheme = DEFAULT_SCHEME) -> float:
    """Derivative of f at z along the real tangent vector v.

    ``v`` is either a real vector of length 2n (Re parts then Im parts) or a
    complex vector of length n.
    """
    z = np.asarray(z, dtype=complex).reshape(1, -1)
    v = _as_complex_tangent(v, f.dimension).reshape(1, -1)
    return float(directional_derivatives(f, z, v, scheme)[0])


def min_levi_eigenvalues(f: PotentialField, points, scheme: FDScheme = DEFAULT_SCHEME,
                         skip_errors: bool = False) -> tuple[np.ndarray, list[tuple[int, str]]]:
    """Min eigenvalue of the Levi form at each point.

    With ``skip_errors`` the points whose stencil fails are returned as NaN and
    listed as ``(index, message)`` instead of aborting the sweep.
    """
    z = np.atleast_2d(np.asarray(points, dtype=complex))
    out = np.full(len(z), np.nan)
    errors: list[tuple[int, str]] = []
    if skip_errors:
        pts, _ = _stencil_points(f, z, scheme)
        bad = _check_stencil(f, pts)
        for i in np.nonzero(bad)[0]:
            errors.append((int(i), "stencil leaves the domain"))
        good = np.nonzero(~bad)[0]
    else:
        good = np.arange(len(z))
    if len(good):
        try:
            out[good] = jacobi_eigenvalues(levi_forms(f, z[good], scheme))[:, 0]
        except NumericError:
            if not skip_errors:
                raise
            for i in good:
                try:
                    out[i] = min_eigenvalue(levi_form(f, z[i], scheme))
                except (NumericError, StencilError) as exc:
                    errors.append((int(i), str(exc)))
    return out, errors


def is_strictly_psh(f: PotentialField, samples, margin: float = 0.0,
                    scheme: FDScheme = DEFAULT_SCHEME) -> VerificationReport:
    """Passes iff min eig(Levi form) > margin at every sample.

    Stencil and numeric failures are recorded per point and fail the report.
    """
    z = np.atleast_2d(np.asarray(samples, dtype=complex))
    if len(z) == 0:
        raise ConfigError("is_strictly_psh needs at least one sample")
    report = VerificationReport(f"psh:{f.label}")
    mins, errors = min_levi_eigenvalues(f, z, scheme, skip_errors=True)
    finite = np.isfinite(mins)
    if np.any(finite):
        i = int(np.nanargmin(mins))
        worst, worst_pt = float(mins[i]), z[i]
    else:
        worst, worst_pt = float("nan"), None
    ok = not errors and bool(np.all(mins[finite] > margin)) and bool(np.all(finite))
    report.add(Certificate("strict_psh", ok, point_payload(worst_pt), worst, margin, len(z)))
    report.details["errors"] = [{"index": i, "message": m} for i, m in errors]
    report.details["measured_margin"] = worst
    return report
