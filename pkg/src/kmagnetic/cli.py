"""Command-line front end: ``kmagnetic <command> CONFIG [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .errors import (
    ConfigError,
    CorrectorDivergenceError,
    DegenerateCurveError,
    InvalidArgumentError,
    IrregularCurveError,
    KMagneticError,
    SearchFailureError,
    ShootingFailureError,
)
from .field import check_gauss_law
from .functionals import Jeps, enclosed_center, energy
from .loops import Loop, geodesic_curvature, is_embedded, length_functional, phase_align_distance
from .melnikov import distinctness_check, find_stable_critical_points, melnikov_value
from .reduction import ReductionOptions, critical_search, reduced_energy
from .shooting import ShootingOptions, cross_validate, cross_validate_loop
from .sphere import fibonacci_sphere

log = logging.getLogger("kmagnetic")

EXIT_OK, EXIT_INPUT, EXIT_DIVERGENCE, EXIT_CURVE = 0, 2, 3, 4
IDENTICAL_TOL = 1e-9
DISTINCT_TOL = 1e-6


def _floats(v) -> list[float]:
    return [float(x) for x in np.ravel(v)]


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _write_rows(path: Path, header: str, rows) -> None:
    lines = [header]
    lines += [",".join(f"{float(x):.17g}" for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _eps_tag(eps: float) -> str:
    return f"{eps:g}"


def _reduction_options(cfg: RunConfig) -> ReductionOptions:
    return ReductionOptions(
        n=cfg.loop_points,
        tol=cfg.tolerances["corrector"],
        solution_tol=cfg.tolerances["solution"],
        quad=cfg.melnikov_quad,
    )


def _prepare(cfg: RunConfig) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    check_gauss_law(cfg.field)
    return cfg.output_dir


# -- commands ----------------------------------------------------------------

def cmd_melnikov_scan(cfg: RunConfig) -> dict:
    out = _prepare(cfg)
    K, quad = cfg.field, cfg.melnikov_quad
    grid = fibonacci_sphere(cfg.grid_points)
    values = [melnikov_value(z, K, quad) for z in grid]
    _write_rows(out / "melnikov_grid.csv", "z_x,z_y,z_z,F",
                (list(z) + [f] for z, f in zip(grid, values)))
    report = find_stable_critical_points(K, seeds=fibonacci_sphere(cfg.seeds), quad=quad)
    summary = {
        "field": K.description,
        "constant_landscape": report.constant_landscape,
        "stability_note": report.stability_note,
        "critical_points": [
            {
                "z": _floats(c.z),
                "value": c.value,
                "type": c.kind,
                "hessian_eigenvalues": _floats(c.eigenvalues),
                "hessian_condition": c.condition,
                "gradient_norm": c.gradient_norm,
            }
            for c in report.critical_points
        ],
    }
    _write_json(out / "melnikov_critical_points.json", summary)
    dist = distinctness_check(K, quad=quad)
    _write_json(out / "distinctness.json", {
        "candidate_axes": [_floats(w) for w in dist.candidate_axes],
        "pairs": [{"F_w": a, "F_minus_w": b} for a, b in dist.pairs],
        "condition_holds": dist.condition_holds,
        "scale": dist.scale,
    })
    return summary


def _pair_status(d: float) -> str:
    if d <= IDENTICAL_TOL:
        return "identical"
    if d <= DISTINCT_TOL:
        return "possibly identical"
    return "distinct"


def cmd_solve(cfg: RunConfig) -> dict:
    out = _prepare(cfg)
    K = cfg.field
    opts = _reduction_options(cfg)
    seeds = fibonacci_sphere(cfg.seeds)
    report = {"field": K.description, "levels": []}
    for eps in cfg.epsilon:
        result = critical_search(eps, K, seeds, opts)
        if result.failed_seeds:
            log.warning("corrector diverged at eps=%g for seeds %s", eps, result.failed_seeds)
        sols = [c for c in result.points if c.is_solution]
        entries = []
        for k, cp in enumerate(sols):
            u = cp.state.corrected_loop
            if not is_embedded(u):
                log.warning("solution %d at eps=%g is not embedded; dropped", k, eps)
                continue
            name = f"solve_eps{_eps_tag(eps)}_sol{len(entries)}.csv"
            u.to_csv(out / name)
            kappa = geodesic_curvature(u)
            entry = {
                "loop": name,
                "center": _floats(cp.z),
                "classification": cp.classification,
                "energy": cp.energy,
                "residual": cp.state.residual_sup,
                "multiplier_norm": cp.multiplier_norm,
                "curvature_error": float(np.max(np.abs(kappa - eps * K.eval(u.samples)))),
                "speed_cv": float(np.std(u.speed) / np.mean(u.speed)),
                "embedded": True,
                "newton_iters": cp.state.newton_iters,
                "oracle_distance": None,
                "oracle_period_rel_error": None,
            }
            if cfg.cross_validate:
                cv = cross_validate(cp.state, K, ShootingOptions(tol=cfg.tolerances["shooting"]))
                entry["oracle_distance"] = cv.distance
                entry["oracle_period_rel_error"] = cv.period_rel_error
                entry["oracle_closure_error"] = cv.closure_error
            entries.append((entry, u))
        # pairwise comparison modulo orientation-preserving reparameterization
        docs = []
        for i, (entry, u) in enumerate(entries):
            others = [v for j, (_, v) in enumerate(entries) if j != i]
            dists = [phase_align_distance(u, v)[0] for v in others]
            rev = [phase_align_distance(u, v.reversed())[0] for v in others]
            nearest = min(dists, default=float("inf"))
            entry["nearest_solution_distance"] = nearest
            entry["pair_status"] = _pair_status(nearest)
            entry["distinct_pair"] = nearest > DISTINCT_TOL
            entry["same_trace_opposite_orientation"] = bool(any(d <= DISTINCT_TOL for d in rev))
            docs.append(entry)
        level = {
            "epsilon": eps,
            "degenerate_landscape": result.degenerate_landscape,
            "failed_seeds": result.failed_seeds,
            "solutions": docs,
        }
        if result.degenerate_landscape:
            level["note"] = (
                "flat reduced energy: every corrected loop solves the equation; "
                "for constant K these are the circles of geodesic curvature eps*K"
            )
        report["levels"].append(level)
    _write_json(out / "solve_report.json", report)
    return report


def cmd_shoot(cfg: RunConfig, loop_path) -> dict:
    out = _prepare(cfg)
    loop = _load_loop(loop_path)
    eps = cfg.epsilon[0]
    cv = cross_validate_loop(loop, eps, cfg.field, ShootingOptions(tol=cfg.tolerances["shooting"]))
    cv.orbit.samples.to_csv(out / "shoot_orbit.csv")
    summary = {
        "epsilon": eps,
        "speed": cv.speed,
        "period": cv.period,
        "expected_period": cv.expected_period,
        "period_rel_error": cv.period_rel_error,
        "closure_error": cv.closure_error,
        "speed_drift": cv.orbit.speed_drift,
        "oracle_distance": cv.distance,
        "phase": cv.phase,
        "newton_iters": cv.orbit.iterations,
    }
    _write_json(out / "shoot_summary.json", summary)
    return summary


def verify_loop(loop: Loop, eps: float, K) -> dict:
    L = length_functional(loop)
    loop.require_regular()
    u, d1, d2 = loop.samples, loop.d1, loop.d2
    speed = loop.speed
    el = d2 + (speed ** 2)[:, None] * u - (speed * eps * K.eval(u))[:, None] * np.cross(u, d1)
    kappa = geodesic_curvature(loop)
    pole = -enclosed_center(loop)
    br = energy(pole, loop, K, eps)
    return {
        "epsilon": eps,
        "residual_sup": float(np.max(np.abs(el))),
        "jeps_sup": float(np.max(np.abs(Jeps(eps, loop, K)))),
        "speed_cv": float(np.std(speed) / np.mean(speed)),
        "curvature_error": float(np.max(np.abs(kappa - eps * K.eval(u)))),
        "embedded": bool(is_embedded(loop)),
        "length": L,
        "energy": asdict(br),
        "pole": _floats(pole),
    }


def cmd_verify(cfg: RunConfig, loop_path) -> dict:
    out = _prepare(cfg)
    loop = _load_loop(loop_path)
    report = verify_loop(loop, cfg.epsilon[0], cfg.field)
    _write_json(out / "verify_report.json", report)
    for key in ("residual_sup", "jeps_sup", "speed_cv", "curvature_error", "embedded"):
        print(f"{key}: {report[key]}")
    e = report["energy"]
    print(f"energy: {e['energy']!r} (length {e['length']!r}, area {e['area']!r})")
    return report


def cmd_landscape(cfg: RunConfig) -> dict:
    out = _prepare(cfg)
    K = cfg.field
    opts = _reduction_options(cfg)
    grid = fibonacci_sphere(cfg.seeds)
    files = {}
    for eps in cfg.epsilon:
        rows = []
        for z in grid:
            s = reduced_energy(eps, z, K, opts)
            rows.append(list(z) + [s.energy, s.leading])
        name = "landscape.csv" if len(cfg.epsilon) == 1 else f"landscape_eps{_eps_tag(eps)}.csv"
        _write_rows(out / name, "z_x,z_y,z_z,E,E0", rows)
        files[eps] = name
    return {"files": files}


def _load_loop(path) -> Loop:
    if path is None:
        raise ConfigError("this command needs --loop FILE")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"loop file {p} does not exist")
    return Loop.from_csv(p)


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kmagnetic", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("melnikov-scan", "solve", "shoot", "verify", "landscape"):
        p = sub.add_parser(name)
        p.add_argument("config", help="run configuration (JSON or YAML)")
        p.add_argument("--epsilon", type=float, nargs="+")
        p.add_argument("--loop-points", type=int)
        p.add_argument("--out", help="output directory")
        if name in ("shoot", "verify"):
            p.add_argument("--loop", help="loop CSV with header theta,x,y,z")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(args.epsilon, args.loop_points, args.out)
        if args.command == "melnikov-scan":
            cmd_melnikov_scan(cfg)
        elif args.command == "solve":
            cmd_solve(cfg)
        elif args.command == "shoot":
            cmd_shoot(cfg, args.loop)
        elif args.command == "verify":
            cmd_verify(cfg, args.loop)
        else:
            cmd_landscape(cfg)
    except (DegenerateCurveError, IrregularCurveError) as exc:
        print(f"error: invalid curve: {exc}", file=sys.stderr)
        return EXIT_CURVE
    except (CorrectorDivergenceError, SearchFailureError, ShootingFailureError) as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ConfigError, InvalidArgumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KMagneticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def main() -> None:
    sys.exit(run())
