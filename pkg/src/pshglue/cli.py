"""Command-line front end.

Every subcommand reads a JSON config, runs one pipeline, writes
``<out>/report.json`` (keys sorted, the wall-clock data isolated under
"timing") and optionally CSV rows.  Exit codes: 0 all certificates pass,
1 a certificate failed, 2 configuration or IO error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import cone_flow, extension, sasaki
from .complex_calculus import FDScheme, is_strictly_psh, levi_forms, min_eigenvalue
from .errors import ConfigError, DomainError, GeometryError, InfeasibleError
from .parallel import chunked_map, default_workers
from .potentials import RadialOperator, parse_complex, euclidean_potential, potential_from_config
from .regularized_max import MollifierKernel, RegMaxParams, probe_grid
from .report import Certificate, VerificationReport, point_payload
from .sampling import ball_samples, make_rng

COMMANDS = ("levi", "psh-check", "regmax-probe", "glue", "flow", "project",
            "sasaki-check", "reeb-deform", "orbit-check")


class Context:
    def __init__(self, config: dict, seed: int | None, workers: int, out: Path, csv: bool):
        self.config = config
        self._seed = seed
        self.workers = workers
        self.out = out
        self.csv = csv
        self.csv_files: dict[str, list[dict]] = {}

    def require(self, key: str, section: dict | None = None) -> Any:
        src = self.config if section is None else section
        if key not in src:
            raise ConfigError(f"missing config key {key!r}")
        return src[key]

    @property
    def seed(self) -> int:
        seed = self._seed if self._seed is not None else self.config.get("seed")
        if seed is None:
            raise ConfigError("missing config key 'seed' (required for random sampling; or pass --seed)")
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError("config key 'seed' must be an unsigned 64-bit integer")
        return seed

    def rng(self) -> np.random.Generator:
        return make_rng(self.seed)

    def tolerance(self, key: str, default: float) -> float:
        value = float(self.config.get(key, default))
        if not value > 0:
            raise ConfigError(f"config key {key!r} must be positive")
        return value

    def scheme(self) -> FDScheme:
        fd = self.config.get("fd", {})
        return FDScheme(float(fd.get("step", 1e-4)), int(fd.get("order", 4)))


def _points(data, n: int | None = None) -> np.ndarray:
    try:
        pts = np.array([[parse_complex(c) for c in row] for row in data], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed 'points': {exc}") from None
    if pts.ndim != 2 or len(pts) == 0 or (n is not None and pts.shape[1] != n):
        raise ConfigError("'points' must be a non-empty list of points of the potential's dimension")
    return pts


def _samples(ctx: Context, n: int) -> np.ndarray:
    """Explicit ``points`` or seeded ``samples: {count, radius, inner_radius}``."""
    if "points" in ctx.config:
        return _points(ctx.config["points"], n)
    spec = ctx.require("samples")
    count = int(ctx.require("count", spec))
    if count <= 0:
        raise ConfigError("config key 'samples.count' must be positive")
    return ball_samples(ctx.rng(), n, count, float(spec.get("radius", 1.0)),
                        inner_radius=float(spec.get("inner_radius", 0.0)))


def _operator(data) -> RadialOperator:
    if "weights" in data:
        return RadialOperator.diagonal([float(w) for w in data["weights"]])
    if "matrix" in data:
        return RadialOperator(np.array([[parse_complex(v) for v in row] for row in data["matrix"]]))
    raise ConfigError("operator config needs key 'weights' or 'matrix'")


# --------------------------------------------------------------------------
# commands


def cmd_levi(ctx: Context) -> VerificationReport:
    f = potential_from_config(ctx.require("potential"))
    z = _samples(ctx, f.dimension)
    L = chunked_map(lambda p: levi_forms(f, p, ctx.scheme()), z, ctx.workers)
    lam = min_eigenvalue(L)
    report = VerificationReport(f"levi:{f.label}")
    finite = np.all(np.isfinite(L), axis=(1, 2))
    report.add(Certificate("finite_levi_form", bool(np.all(finite)), None,
                           float(np.count_nonzero(~finite)), 0.0, len(z)))
    if "expected" in ctx.config:
        E = np.array([[parse_complex(v) for v in row] for row in ctx.config["expected"]])
        tol = ctx.tolerance("tolerance", 1e-6)
        err = np.max(np.abs(L - E), axis=(1, 2))
        i = int(np.argmax(err))
        report.add(Certificate("levi_matches_expected", bool(err[i] <= tol), point_payload(z[i]),
                               float(err[i]), tol, len(z)))
    report.details["levi_forms"] = [[[complex(v) for v in row] for row in m] for m in L]
    report.details["min_eigenvalues"] = lam.tolist()
    if ctx.csv:
        ctx.csv_files["levi.csv"] = [_coords(p) | {"min_eig": float(v)} for p, v in zip(z, lam)]
    return report


def cmd_psh_check(ctx: Context) -> VerificationReport:
    f = potential_from_config(ctx.require("potential"))
    z = _samples(ctx, f.dimension)
    margin = float(ctx.config.get("margin", 0.0))
    if margin < 0:
        raise ConfigError("config key 'margin' must be non-negative")
    report = is_strictly_psh(f, z, margin, ctx.scheme())
    if ctx.csv:
        lam = chunked_map(lambda p: min_eigenvalue(levi_forms(f, p, ctx.scheme())), z, ctx.workers)
        ctx.csv_files["psh.csv"] = [_coords(p) | {"min_eig": float(v)} for p, v in zip(z, lam)]
    return report


def cmd_regmax_probe(ctx: Context) -> VerificationReport:
    params = RegMaxParams(float(ctx.config.get("delta", 0.5)),
                          MollifierKernel.from_degree(int(ctx.config.get("kernel_degree", 4))))
    grid = ctx.config.get("grid", {})
    return probe_grid(params, int(grid.get("resolution", 200)), float(grid.get("extent", 3.0)),
                      float(ctx.config.get("hessian_step", 1e-3)), ctx.tolerance("hessian_tol", 1e-8))


def cmd_glue(ctx: Context) -> VerificationReport:
    problem = extension.GluingProblem.from_config(ctx.require("problem"))
    gluing = dict(ctx.require("gluing"))
    gluing["seed"] = ctx.seed
    config = extension.GluingConfig.from_config(gluing)
    samples = extension.sample_sets(problem, config)
    try:
        result = extension.glue(problem, config, ctx.workers, samples)
    except InfeasibleError as exc:
        report = VerificationReport("glue")
        report.add(Certificate("feasibility", False, None, float("nan"), 0.0, 0))
        report.details["infeasible"] = str(exc)
        return report
    report = result.report
    tube = extension.verify_tube(result, problem, config, ctx.workers, samples)
    report.details["tube"] = {c.name: c.to_dict() for c in tube.certificates} | tube.details
    if ctx.csv:
        count = int(ctx.config.get("csv_points", 2000))
        idx = np.linspace(0, len(samples.grid) - 1, min(count, len(samples.grid))).astype(int)
        pts = np.concatenate([samples.grid[idx], samples.tube])
        ctx.csv_files["glue.csv"] = extension.sweep_rows(result, problem, config, pts, ctx.workers)
    return report


def cmd_flow(ctx: Context) -> VerificationReport:
    f = potential_from_config(ctx.require("potential"))
    A = _operator(ctx.require("operator"))
    level = float(ctx.config.get("level", 1.0))
    rays_cfg = ctx.require("rays")
    rng = ctx.rng()
    count = int(ctx.require("count", rays_cfg))
    rays = ball_samples(rng, f.dimension, count, float(rays_cfg.get("radius", 1.0)),
                        inner_radius=float(rays_cfg.get("inner_radius", 0.1)))
    t_range = tuple(float(t) for t in ctx.config.get("t_range", (-10.0, 10.0)))
    grid = int(ctx.config.get("grid", 2001))
    report, rows = cone_flow.ray_sweep(f, A, rays, level, t_range, grid, ctx.tolerance("tolerance", 1e-8))
    report.experiment_id = f"flow:{f.label}"
    ts = [float(t) for t in ctx.config.get("ts", [-0.5, 0.25, 0.75])]
    report.merge(cone_flow.verify_homogeneity(f, A, rays, ts, ctx.tolerance("homogeneity_tol", 1e-8),
                                              ctx.tolerance("fd_tol", 1e-6), ctx.scheme()))
    t_neg = float(ctx.config.get("t_neg", -math.log(2)))
    report.merge(cone_flow.contraction_check(A, rays, t_neg))
    if ctx.csv:
        ctx.csv_files["rays.csv"] = rows
    return report


def cmd_project(ctx: Context) -> VerificationReport:
    f = potential_from_config(ctx.require("potential"))
    level = float(ctx.config.get("level", 1.0))
    if not level > 0:
        raise ConfigError("config key 'level' must be positive")
    z = _samples(ctx, f.dimension)
    p = np.array([cone_flow.project_to_level(f, zz, level) for zz in z])
    res = np.abs(np.asarray(f(p), dtype=float) - level) / level
    i = int(np.argmax(res))
    tol = ctx.tolerance("tolerance", 1e-9)
    report = VerificationReport(f"project:{f.label}")
    report.add(Certificate("projection_on_level", bool(res[i] <= tol), point_payload(z[i]),
                           float(res[i]), tol, len(z)))
    report.details["projected"] = [point_payload(q) for q in p]
    if ctx.csv:
        ctx.csv_files["project.csv"] = [_coords(q) | {"residual": float(r)} for q, r in zip(p, res)]
    return report


def cmd_sasaki_check(ctx: Context) -> VerificationReport:
    n = int(ctx.config.get("dimension", 2))
    count = int(ctx.config.get("samples", 20))
    structure = sasaki.LevelSetStructure(euclidean_potential(n), 1.0)
    triples = sasaki.sasaki_triples(ctx.rng(), n, count)
    report = sasaki.verify_sasaki_identity(structure, triples, ctx.tolerance("tolerance", 1e-3),
                                           float(ctx.config.get("step", sasaki.CURVATURE_STEP)))
    pts = np.array([t[0][:n] + 1j * t[0][n:] for t in triples])
    report.merge(sasaki.reeb_report(structure, pts, ctx.tolerance("tangency_tol", 1e-8)))
    if ctx.csv:
        ctx.csv_files["sasaki.csv"] = [_coords(p) | r for p, r in zip(pts, report.details["residuals"])]
    return report


def _direction(ctx: Context) -> sasaki.ReebDirection:
    weights = [float(w) for w in ctx.require("weights")]
    return sasaki.ReebDirection(tuple(weights), irrational=bool(ctx.config.get("irrational", False)))


def cmd_reeb_deform(ctx: Context) -> VerificationReport:
    direction = _direction(ctx)
    q_max = ctx.require("q_max")
    if isinstance(q_max, bool) or not isinstance(q_max, int):
        raise ConfigError("config key 'q_max' must be a positive integer")
    out = sasaki.quasi_regular_deform(direction, q_max)
    report = VerificationReport("reeb_deform")
    bound = out.dirichlet_bound
    report.add(Certificate("dirichlet_bound", bool(out.deviation <= bound), None, out.deviation, bound,
                           out.denominator))
    report.details.update(weights=list(out.weights), ratios=[str(r) for r in out.ratios],
                          denominator=out.denominator, deviation=out.deviation, input=list(direction.weights))
    return report


def cmd_orbit_check(ctx: Context) -> VerificationReport:
    direction = _direction(ctx)
    pot = ctx.config.get("potential")
    f = euclidean_potential(len(direction.weights)) if pot is None else potential_from_config(pot)
    structure = sasaki.LevelSetStructure(f, float(ctx.config.get("level", 1.0)))
    p = _points([ctx.require("point")], f.dimension)[0]
    window = tuple(float(s) for s in ctx.config.get("window", (2 * math.pi, 40 * math.pi)))
    return sasaki.orbit_closure_check(direction, structure, p, ctx.tolerance("tolerance", 1e-12), window,
                                      int(ctx.config.get("grid", 100_000)),
                                      ctx.tolerance("separation", 1e-2))


HANDLERS: dict[str, Callable[[Context], VerificationReport]] = {
    "levi": cmd_levi, "psh-check": cmd_psh_check, "regmax-probe": cmd_regmax_probe, "glue": cmd_glue,
    "flow": cmd_flow, "project": cmd_project, "sasaki-check": cmd_sasaki_check,
    "reeb-deform": cmd_reeb_deform, "orbit-check": cmd_orbit_check,
}


def _coords(z) -> dict[str, float]:
    row = {}
    for j, c in enumerate(np.asarray(z, dtype=complex)):
        row[f"re_z{j + 1}"] = float(c.real)
        row[f"im_z{j + 1}"] = float(c.imag)
    return row


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pshglue", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
        p.add_argument("--workers", type=int, default=None,
                       help="worker threads for sample sweeps (default: available CPUs)")
        p.add_argument("--csv", action="store_true", help="also write CSV rows")
    return parser


def run(command: str, config_path, out_dir, seed: int | None = None, workers: int | None = None,
        csv: bool = False, stderr=None) -> int:
    stderr = stderr or sys.stderr
    started = time.perf_counter()
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        if command not in HANDLERS:
            raise ConfigError(f"unknown command {command!r}")
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc.strerror or exc}") from None
        try:
            config = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(config, dict):
            raise ConfigError("config must be a JSON object")
        if workers is not None and workers < 1:
            raise ConfigError("--workers must be >= 1")
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc.strerror or exc}") from None
        ctx = Context(config, seed, workers or default_workers(), out, csv)
        report = HANDLERS[command](ctx)
        report.config = config
        report.timing = {"started": stamp, "seconds": round(time.perf_counter() - started, 3)}
        try:
            (out / "report.json").write_text(report.to_json(), encoding="utf-8")
            for name, rows in ctx.csv_files.items():
                extension.write_csv(out / name, rows)
        except OSError as exc:
            raise ConfigError(f"cannot write output: {exc.strerror or exc}") from None
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: malformed config ({type(exc).__name__}: {exc})", file=stderr)
        return 2
    except GeometryError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    for line in report.summary_lines():
        print(line)
    return 0 if report.passed else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.out, args.seed, args.workers, args.csv)


if __name__ == "__main__":
    sys.exit(main())
