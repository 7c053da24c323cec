"""Gluing a Kähler potential along a linear submanifold Z of a flat ball.

Given an ambient potential Phi (omega = i ddbar Phi), a linear Z and a
function u0 whose values on Z prescribe omega_0 = omega|Z + i ddbar u0, the
construction is

    phi = 1/2 log sum |g_k|^2                  (logarithmic poles along Z)
    u   = u0(pi_Z z) + c1 d(z, Z)^2            (extension off Z)
    psi = max_delta((eps / C) phi + A, u)

with C from i ddbar phi >= -C omega and A large enough that the first branch
wins by delta outside the tube U = {d(z, Z) < r}.  Then omega' = omega + i ddbar psi
restricts to omega_0 on Z and stays >= eps omega everywhere on the samples.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .complex_calculus import DEFAULT_SCHEME, FDScheme, generalized_min_eigenvalue, levi_forms, min_eigenvalue
from .errors import ConfigError, DomainError, InfeasibleError, InvalidAmbientError
from .parallel import chunked_map
from .potentials import (Domain, PotentialField, VarietySpec, add_fields, affine_combine, compose_linear,
                         distance_term, log_pole_potential, potential_from_config)
from .regularized_max import MollifierKernel, RegMaxParams, reg_max_field
from .report import Certificate, VerificationReport, point_payload
from .sampling import ball_samples, grid_in_ball, make_rng, sphere_samples


@dataclass(frozen=True)
class GluingProblem:
    """Flat gluing data on the closed ball of radius ``region_radius``.

    ``target`` is a potential on C^n that is only ever read on Z: its values
    at pi_Z(z) define u0.
    """

    ambient: PotentialField
    variety: VarietySpec
    target: PotentialField
    region_radius: float = 2.0

    def __post_init__(self):
        n = self.ambient.dimension
        if self.variety.dimension != n or self.target.dimension != n:
            raise ConfigError("ambient, variety and target must share the dimension")
        if not self.variety.is_linear:
            raise ConfigError("gluing supports only linear varieties")
        if not self.region_radius > 0:
            raise ConfigError("region_radius must be positive")
        if self.variety.tangent_basis().shape[1] == 0:
            raise ConfigError("Z is a point; there is nothing to restrict to")

    @property
    def dimension(self) -> int:
        return self.ambient.dimension

    @classmethod
    def from_config(cls, data: dict) -> GluingProblem:
        try:
            ambient = potential_from_config(data["ambient"])
            n = ambient.dimension
            return cls(ambient, VarietySpec.from_config(data["variety"], n),
                       potential_from_config(data["target"]), float(data.get("region_radius", 2.0)))
        except KeyError as exc:
            raise ConfigError(f"problem config is missing key {exc.args[0]!r}") from None

    def to_config(self) -> dict:
        return {"ambient": self.ambient.to_config(), "variety": self.variety.to_config(),
                "target": self.target.to_config(), "region_radius": self.region_radius}


@dataclass(frozen=True)
class GluingConfig:
    """Constants of the construction and sampling densities.

    ``c_floor`` is the lower bound imposed on C in units of omega (C is at
    least c_floor / min eig(omega) over the samples); it keeps eps / C finite
    when phi is pluriharmonic.  ``a_shift`` is added to the computed A and is
    only meant for negative controls.
    """

    epsilon: float
    delta: float
    c1: float
    neighborhood_radius: float
    sample_density: int = 30
    max_samples: int = 100_000
    seed: int = 0
    c_safety: float = 1.25
    c_floor: float = 0.25
    c_sample_distance: float | None = None
    kernel_degree: int = 4
    restriction_samples: int = 200
    tube_samples: int = 2000
    restriction_tol: float = 1e-5
    positivity_tol: float = 1e-4
    tube_tol: float = 1e-4
    fd_step: float = 1e-4
    a_shift: float = 0.0

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5:
            raise ConfigError("epsilon must lie in (0, 1/2)")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if not self.c1 >= 0:
            raise ConfigError("c1 must be non-negative")
        if not self.neighborhood_radius > 0:
            raise ConfigError("neighborhood_radius must be positive")
        if int(self.sample_density) != self.sample_density or self.sample_density < 2:
            raise ConfigError("sample_density must be an integer >= 2")
        if self.c_safety < 1:
            raise ConfigError("c_safety must be >= 1")
        if not self.c_floor >= 0:
            raise ConfigError("c_floor must be non-negative")
        for name in ("restriction_tol", "positivity_tol", "tube_tol", "fd_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        MollifierKernel.from_degree(self.kernel_degree)

    @property
    def regmax(self) -> RegMaxParams:
        return RegMaxParams(self.delta, MollifierKernel.from_degree(self.kernel_degree))

    @property
    def scheme(self) -> FDScheme:
        return FDScheme(self.fd_step, 4)

    @property
    def c_distance(self) -> float:
        return self.neighborhood_radius / 4 if self.c_sample_distance is None else self.c_sample_distance

    @classmethod
    def from_config(cls, data: dict) -> GluingConfig:
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown gluing config key {unknown[0]!r}")
        for key in ("epsilon", "delta", "c1", "neighborhood_radius"):
            if key not in data:
                raise ConfigError(f"gluing config is missing key {key!r}")
        return cls(**data)

    def to_config(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> GluingConfig:
        data = self.to_config()
        data.update(changes)
        return GluingConfig(**data)


@dataclass
class GluingResult:
    psi: PotentialField
    C: float
    A: float
    report: VerificationReport
    phi: PotentialField
    u: PotentialField
    branch: PotentialField
    C_raw: float = 0.0
    details: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# samples


@dataclass
class SampleSets:
    grid: np.ndarray
    on_z: np.ndarray
    on_z_coords: np.ndarray
    tube: np.ndarray


def tube_samples(rng: np.random.Generator, spec: VarietySpec, count: int, radius: float,
                 region_radius: float, inner: float | None = None) -> np.ndarray:
    """Points at distance in [inner, radius) from Z inside the region ball.

    Distances are log-uniform so that the thin layer near Z and the gluing
    band are both represented.
    """
    T = spec.tangent_basis()
    N = spec.normal_basis()
    k, m = T.shape[1], N.shape[1]
    inner = radius * 1e-4 if inner is None else inner
    out = []
    have = 0
    while have < count:
        batch = 2 * (count - have) + 16
        w = ball_samples(rng, k, batch, region_radius)
        dirs = sphere_samples(rng, m, batch)
        d = np.exp(rng.uniform(np.log(inner), np.log(radius), size=batch))
        z = w @ T.T + (d[:, None] * dirs) @ N.T
        keep = z[np.linalg.norm(z, axis=1) <= region_radius]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:count]


def sample_sets(problem: GluingProblem, config: GluingConfig) -> SampleSets:
    """Deterministic sample sets for a (problem, config) pair."""
    rng = make_rng(config.seed)
    n = problem.dimension
    R = problem.region_radius
    grid = grid_in_ball(config.sample_density, n, R, config.max_samples, rng)
    T = problem.variety.tangent_basis()
    w = ball_samples(rng, T.shape[1], config.restriction_samples, R)
    tube = tube_samples(rng, problem.variety, config.tube_samples, config.neighborhood_radius, R)
    return SampleSets(grid, w @ T.T, w, tube)


# --------------------------------------------------------------------------
# stages


def _min_eigs(f: PotentialField, points: np.ndarray, scheme: FDScheme, workers: int) -> np.ndarray:
    return chunked_map(lambda p: min_eigenvalue(levi_forms(f, p, scheme)), points, workers)


def estimate_C(phi: PotentialField, ambient: PotentialField, samples, safety: float = 1.25,
               scheme: FDScheme = DEFAULT_SCHEME, workers: int = 1) -> float:
    """Smallest C >= 0 with levi(phi) + C levi(Phi) >= 0 on the samples, times ``safety``."""
    z = np.atleast_2d(np.asarray(samples, dtype=complex))
    if len(z) == 0:
        raise InfeasibleError("estimate_C: no samples")

    def chunk(p):
        G = levi_forms(ambient, p, scheme)
        try:
            return generalized_min_eigenvalue(levi_forms(phi, p, scheme), G)
        except np.linalg.LinAlgError:
            bad = min_eigenvalue(G) <= 0
            raise InvalidAmbientError(f"ambient Levi form is not positive definite at {p[bad][0]}") from None

    lam = chunked_map(chunk, z, workers)
    return safety * max(0.0, -float(np.min(lam)))


def extend_u(problem: GluingProblem, config: GluingConfig) -> PotentialField:
    """u(z) = u0(pi_Z z) + c1 d(z, Z)^2."""
    spec = problem.variety
    u0 = problem.target
    P = spec.normal_projector()
    c1 = float(config.c1)
    ev = u0.evaluator

    def evaluate(z):
        z = np.asarray(z, dtype=complex)
        w = spec.project(z)
        bad = u0.domain.violations(w)
        if np.any(bad):
            raise DomainError(f"projection {w[bad][0]} leaves the domain of u0")
        return ev(w) + c1 * np.sum(np.abs(z @ P.T) ** 2, axis=-1)

    n = problem.dimension
    spec_cfg = None
    if u0.spec is not None:
        spec_cfg = {"kind": "extension", "dimension": n, "c1": c1, "target": u0.spec,
                    "generators": spec.to_config()}
    return PotentialField(evaluate, n, Domain(n), None, f"ext({u0.label})", spec_cfg)


def _tube_profile(problem: GluingProblem, config: GluingConfig, samples: np.ndarray, workers: int = 1):
    """Levi forms needed for (1 - eps) omega + i ddbar u as an affine function of c1."""
    scheme = config.scheme
    u_zero = extend_u(problem, config.replace(c1=0.0))
    dist = distance_term(problem.variety, 1.0)
    base = chunked_map(lambda p: (1 - config.epsilon) * levi_forms(problem.ambient, p, scheme)
                       + levi_forms(u_zero, p, scheme), samples, workers)
    slope = chunked_map(lambda p: levi_forms(dist, p, scheme), samples, workers)
    return base, slope


def _tube_margin(base: np.ndarray, slope: np.ndarray, c1: float) -> float:
    return float(np.min(min_eigenvalue(base + c1 * slope)))


def minimal_c1(problem: GluingProblem, config: GluingConfig, samples=None, margin: float = 0.0,
               tol: float = 1e-9, c1_max: float = 1e8, workers: int = 1) -> float:
    """Smallest c1 (to ``tol``) with (1 - eps) omega + i ddbar u > margin on the tube samples.

    The Levi form of u is affine in c1, so the sweep is computed once and the
    bisection only re-evaluates eigenvalues.
    """
    if samples is None:
        samples = sample_sets(problem, config).tube
    base, slope = _tube_profile(problem, config, np.atleast_2d(samples), workers)
    if _tube_margin(base, slope, 0.0) > margin:
        return 0.0
    hi = 1.0
    while _tube_margin(base, slope, hi) <= margin:
        hi *= 2
        if hi > c1_max:
            raise InfeasibleError("no c1 makes (1 - eps) omega + i ddbar u positive on the tube")
    lo = hi / 2 if hi > 1 else 0.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _tube_margin(base, slope, mid) > margin:
            hi = mid
        else:
            lo = mid
    return hi


def search_tube(problem: GluingProblem, config: GluingConfig, radii, workers: int = 1) -> list[dict]:
    """Minimal c1 for each candidate tube radius; None marks an infeasible radius."""
    out = []
    for r in radii:
        cfg = config.replace(neighborhood_radius=float(r))
        try:
            c1 = minimal_c1(problem, cfg, workers=workers)
        except InfeasibleError:
            c1 = None
        out.append({"radius": float(r), "c1_min": c1})
    return out


def choose_A(problem: GluingProblem, config: GluingConfig, phi: PotentialField, u: PotentialField,
             C: float, samples) -> float:
    """Smallest A with (eps / C) phi + A >= u + delta on the samples outside U, plus delta."""
    z = np.atleast_2d(np.asarray(samples, dtype=complex))
    z = z[problem.variety.distance(z) >= config.neighborhood_radius]
    if len(z) == 0:
        raise InfeasibleError("choose_A: no samples outside U (the tube covers the region)")
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.asarray(u.raw(z), dtype=float) + config.delta - (config.epsilon / C) * np.asarray(phi.raw(z))
    if not np.all(np.isfinite(need)):
        raise InfeasibleError("choose_A: unbounded discrepancy outside U; enlarge U")
    return float(np.max(need)) + config.delta


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except InfeasibleError as exc:
        raise InfeasibleError(f"{name}: {exc}") from exc


def glue(problem: GluingProblem, config: GluingConfig, workers: int = 1,
         samples: SampleSets | None = None) -> GluingResult:
    """Build psi and certify omega' = omega + i ddbar psi."""
    samples = samples or sample_sets(problem, config)
    scheme = config.scheme
    phi = log_pole_potential(problem.variety)

    far = samples.grid[problem.variety.distance(samples.grid) >= config.c_distance]
    if len(far) == 0:
        raise InfeasibleError("estimate_C: no samples away from Z")
    C_raw = _stage("estimate_C", estimate_C, phi, problem.ambient, far, 1.0, scheme, workers)
    omega_min = float(np.min(_min_eigs(problem.ambient, samples.grid, scheme, workers)))
    if not omega_min > 0:
        raise InvalidAmbientError("ambient Levi form is not positive definite on the region")
    C = max(config.c_safety * C_raw, config.c_floor / omega_min)
    if not C > 0:
        raise InfeasibleError("estimate_C: C = 0; set c_floor > 0")

    base, slope = _tube_profile(problem, config, samples.tube, workers)
    tube_margin = _tube_margin(base, slope, config.c1)
    if not tube_margin > 0:
        try:
            need = minimal_c1(problem, config, samples.tube, workers=workers)
            hint = f"c1 must exceed {need:.6g}"
        except InfeasibleError:
            hint = "no c1 works for this radius"
        raise InfeasibleError(f"extend_u: (1 - eps) omega + i ddbar u is not positive on the tube; {hint}")
    u = extend_u(problem, config)

    A = _stage("choose_A", choose_A, problem, config, phi, u, C, samples.grid) + config.a_shift
    branch = affine_combine(phi, config.epsilon / C, A)
    psi = reg_max_field(branch, u, config.regmax)
    result = GluingResult(psi, C, A, VerificationReport("glue"), phi, u, branch, C_raw,
                          {"omega_min": omega_min, "tube_margin": tube_margin})
    result.report = verify_extension(result, problem, config, workers, samples)
    return result


# --------------------------------------------------------------------------
# certificates


def _pullback_levi(L: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Levi form of f(T w) from the ambient Levi form of f."""
    return np.einsum("ja,njk,kb->nab", T, L, np.conj(T))


def verify_extension(result: GluingResult, problem: GluingProblem, config: GluingConfig,
                     workers: int = 1, samples: SampleSets | None = None) -> VerificationReport:
    """Restriction, global positivity and branch-exactness certificates."""
    samples = samples or sample_sets(problem, config)
    scheme = config.scheme
    eps, delta = config.epsilon, config.delta
    Phi, psi, u, branch = problem.ambient, result.psi, result.u, result.branch
    report = VerificationReport("glue")
    omega_prime = add_fields(Phi, psi)

    # (i) omega'|Z = omega_0, computed intrinsically on Z and from the ambient Levi form
    T = problem.variety.tangent_basis()
    w = samples.on_z_coords
    target = levi_forms(compose_linear(Phi, T), w, scheme) + levi_forms(compose_linear(problem.target, T), w, scheme)
    intrinsic = levi_forms(compose_linear(omega_prime, T), w, scheme)
    ambient = _pullback_levi(levi_forms(omega_prime, samples.on_z, scheme), T)
    res_int = np.max(np.abs(intrinsic - target), axis=(1, 2))
    res_amb = np.max(np.abs(ambient - target), axis=(1, 2))
    res = np.maximum(res_int, res_amb)
    i = int(np.argmax(res))
    report.add(Certificate("restriction", bool(np.all(res <= config.restriction_tol)),
                           point_payload(samples.on_z[i]), float(res[i]), config.restriction_tol, len(res)))

    # (ii) omega' >= eps omega on the grid
    lam_prime = _min_eigs(omega_prime, samples.grid, scheme, workers)
    lam_omega = _min_eigs(Phi, samples.grid, scheme, workers)
    slack = lam_prime - eps * lam_omega
    j = int(np.argmin(slack))
    report.add(Certificate("global_positivity", bool(np.all(slack >= -config.positivity_tol)),
                           point_payload(samples.grid[j]), float(slack[j]), config.positivity_tol, len(slack)))

    # (iii) psi = u where the u branch wins by delta, psi = first branch outside U
    pts = np.concatenate([samples.grid, samples.tube])
    with np.errstate(all="ignore"):
        b = np.asarray(branch.raw(pts), dtype=float)
        uu = np.asarray(u.raw(pts), dtype=float)
        pp = np.asarray(psi.raw(pts), dtype=float)
        on_z_u = np.asarray(u.raw(samples.on_z), dtype=float)
        on_z_psi = np.asarray(psi.raw(samples.on_z), dtype=float)
    near = b < uu - delta
    near_bad = np.concatenate([pts[near][pp[near] != uu[near]], samples.on_z[on_z_psi != on_z_u]])
    outside = problem.variety.distance(pts) >= config.neighborhood_radius
    gap = b[outside] - uu[outside]
    out_bad_mask = ~(gap >= delta) | (pp[outside] != b[outside])
    out_bad = pts[outside][out_bad_mask]
    near_fail, out_fail = len(near_bad), len(out_bad)
    failures = near_fail + out_fail
    worst_pt = None
    if out_fail:
        worst_pt = out_bad[int(np.argmin(gap[out_bad_mask]))]
    elif near_fail:
        worst_pt = near_bad[0]
    report.add(Certificate("branch_exactness", failures == 0, point_payload(worst_pt), float(failures), 0.0,
                           int(np.count_nonzero(near) + len(samples.on_z) + np.count_nonzero(outside))))

    report.details.update(
        C=result.C, C_raw=result.C_raw, A=result.A, epsilon=eps, delta=delta, c1=config.c1,
        neighborhood_radius=config.neighborhood_radius,
        restriction_intrinsic=float(np.max(res_int)), restriction_ambient=float(np.max(res_amb)),
        min_eig_omega_prime=float(np.min(lam_prime)),
        near_z_samples=int(np.count_nonzero(near) + len(samples.on_z)), near_z_failures=near_fail,
        outside_u_samples=int(np.count_nonzero(outside)), outside_u_failures=out_fail,
        min_outside_gap=float(np.min(gap)) if len(gap) else None,
        band_samples=int(np.count_nonzero(np.abs(b - uu) < delta)),
        grid_samples=len(samples.grid), tube_samples=len(samples.tube))
    report.config = {"gluing": config.to_config()}
    return report


def verify_tube(result: GluingResult, problem: GluingProblem, config: GluingConfig,
                workers: int = 1, samples: SampleSets | None = None) -> VerificationReport:
    """i ddbar psi >= -(1 - eps) omega on the tube U, eigenvalue profile taken pointwise."""
    samples = samples or sample_sets(problem, config)
    scheme = config.scheme
    lam_psi = _min_eigs(result.psi, samples.tube, scheme, workers)
    lam_omega = _min_eigs(problem.ambient, samples.tube, scheme, workers)
    slack = lam_psi + (1 - config.epsilon) * lam_omega
    i = int(np.argmin(slack))
    report = VerificationReport("tube")
    report.add(Certificate("tube_lower_bound", bool(np.all(slack >= -config.tube_tol)),
                           point_payload(samples.tube[i]), float(slack[i]), config.tube_tol, len(slack)))
    report.details["min_eig_psi"] = float(np.min(lam_psi))
    return report


def branch_labels(result: GluingResult, z: np.ndarray, delta: float) -> np.ndarray:
    with np.errstate(all="ignore"):
        b = np.asarray(result.branch.raw(z), dtype=float)
        uu = np.asarray(result.u.raw(z), dtype=float)
    return np.where(b - uu >= delta, "phi", np.where(uu - b >= delta, "u", "band"))


def sweep_rows(result: GluingResult, problem: GluingProblem, config: GluingConfig, points,
               workers: int = 1) -> list[dict[str, Any]]:
    """One CSV-ready row per point: coordinates, min eig of omega', psi and branch."""
    z = np.atleast_2d(np.asarray(points, dtype=complex))
    lam = _min_eigs(add_fields(problem.ambient, result.psi), z, config.scheme, workers)
    with np.errstate(all="ignore"):
        psi = np.asarray(result.psi.raw(z), dtype=float)
    labels = branch_labels(result, z, config.delta)
    rows = []
    for k in range(len(z)):
        row = {}
        for j in range(z.shape[1]):
            row[f"re_z{j + 1}"] = float(z[k, j].real)
            row[f"im_z{j + 1}"] = float(z[k, j].imag)
        row.update(min_eig=float(lam[k]), psi=float(psi[k]), branch=str(labels[k]))
        rows.append(row)
    return rows


def write_csv(path, rows: list[dict[str, Any]]) -> None:
    if not rows:
        raise ConfigError("nothing to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
