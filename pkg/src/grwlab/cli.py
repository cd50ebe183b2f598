"""Batch runner: ``grwlab run <config.toml>``.

Exit status: 0 every asserted check passed, 1 some asserted check failed,
2 configuration error, 3 internal-consistency fault in the engine.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from grwlab import __version__, catalog, exprlang, identities, theorems
from grwlab.ambient import InternalConsistencyError, IntervalDomainError, Spacetime
from grwlab.fiber import ChartDomainError, FiberMetric, MetricDegeneracyError
from grwlab.hypersurface import DegenerateHypersurfaceError, GraphDomainError, GraphHypersurface, frame_at

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_FAULT = 0, 1, 2, 3
CSV_HEADER = ["surface", "check", "point_coords", "lhs", "rhs", "residual", "margin", "pass"]
REJECTABLE = (
    DegenerateHypersurfaceError,
    GraphDomainError,
    IntervalDomainError,
    ChartDomainError,
    MetricDegeneracyError,
    exprlang.ExprDomainError,
)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    spacetime: dict
    hypersurfaces: list[dict]
    use_fixtures: bool
    mode: str
    counts: list[int]
    box: list[list[float]] | None
    seed: int | None
    checks: list[str]
    informational: list[str]
    tolerances: dict[str, float]
    theorems: list[str]
    out_dir: str
    write_csv: bool = True
    jobs: int = 1
    extra: dict = field(default_factory=dict)


def _req(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing field '{where}.{key}'")
    return table[key]


def _table(raw: dict, key: str) -> dict:
    v = raw.get(key, {})
    if not isinstance(v, dict):
        raise ConfigError(f"field '{key}' must be a table")
    return v


def parse_config(raw: dict, base_dir: Path | None = None) -> RunConfig:
    sp = _table(raw, "spacetime")
    _req(sp, "name", "spacetime")
    hs = _table(raw, "hypersurfaces")
    graphs = []
    for k, g in enumerate(hs.get("graphs", [])):
        if isinstance(g, str):
            g = {"u": g}
        if not isinstance(g, dict) or "u" not in g:
            raise ConfigError(f"field 'hypersurfaces.graphs[{k}]' needs a 'u' expression")
        graphs.append({"u": str(g["u"]), "name": str(g.get("name", f"graph_{k}"))})
    use_fixtures = bool(hs.get("fixtures", not graphs))
    sm = _table(raw, "sampling")
    mode = sm.get("mode", "grid")
    if mode not in ("grid", "random"):
        raise ConfigError(f"field 'sampling.mode' must be 'grid' or 'random', got {mode!r}")
    counts = sm.get("counts", sm.get("count", [5, 5] if mode == "grid" else 25))
    counts = [counts] if isinstance(counts, int) else list(counts)
    if not counts or any(not isinstance(c, int) or c < 1 for c in counts):
        raise ConfigError("field 'sampling.counts' must be positive integers")
    seed = sm.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise ConfigError("field 'sampling.seed' must be an integer")
    ch = _table(raw, "checks")
    names = ch.get("names", "all")
    names = list(identities.CHECKS) if names == "all" else list(names)
    info = list(ch.get("informational", []))
    for n in names + info:
        if n not in identities.CHECKS:
            raise ConfigError(f"field 'checks.names': unknown check {n!r}; registry: {', '.join(identities.CHECKS)}")
    tols = {str(k): float(v) for k, v in _table(raw, "tolerances").items()}
    for n in tols:
        if n not in identities.CHECKS:
            raise ConfigError(f"field 'tolerances': unknown check {n!r}; registry: {', '.join(identities.CHECKS)}")
    th = list(_table(raw, "theorems").get("ids", []))
    for t in th:
        if t not in theorems.THEOREM_IDS:
            raise ConfigError(f"field 'theorems.ids': unknown theorem {t!r}; expected one of {theorems.THEOREM_IDS}")
    out = _table(raw, "output")
    out_dir = str(out.get("dir", "grwlab-out"))
    if base_dir is not None and not os.path.isabs(out_dir):
        out_dir = str(base_dir / out_dir)
    return RunConfig(
        spacetime=dict(sp),
        hypersurfaces=graphs,
        use_fixtures=use_fixtures,
        mode=mode,
        counts=counts,
        box=sm.get("box"),
        seed=seed,
        checks=names,
        informational=info,
        tolerances=tols,
        theorems=th,
        out_dir=out_dir,
        write_csv=bool(out.get("csv", True)),
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from None
    return parse_config(raw, path.parent)


def build_spacetime(sp: dict) -> Spacetime:
    name = sp["name"]
    m = sp.get("m", 2)
    if not isinstance(m, int) or m < 2:
        raise ConfigError("field 'spacetime.m' must be an integer >= 2")
    params = dict(sp.get("params", {}))
    if name == "custom":
        params["rho"] = _req(sp, "rho", "spacetime")
        if "interval" in sp:
            params["interval"] = tuple(float(v) for v in sp["interval"])
        fib = sp.get("fiber", "euclidean")
        if isinstance(fib, dict):
            kind = fib.get("kind", "euclidean")
            box = fib.get("box")
            if kind == "custom":
                params["fiber"] = FiberMetric.custom(_req(fib, "metric", "spacetime.fiber"), box)
            else:
                params["fiber"] = FiberMetric(m, kind, box=tuple(map(tuple, box)) if box else ())
        else:
            params["fiber"] = fib
    try:
        return catalog.make_named(name, m, params)
    except exprlang.ParseError as exc:
        raise ConfigError(f"field 'spacetime.rho': {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"field 'spacetime': {exc}") from None


def build_surfaces(cfg: RunConfig, S: Spacetime) -> list[GraphHypersurface]:
    out = catalog.fixture_hypersurfaces(S) if cfg.use_fixtures else []
    box = catalog.default_box(S)
    for k, g in enumerate(cfg.hypersurfaces):
        try:
            out.append(GraphHypersurface.from_text(g["u"], S, name=g["name"], box=box))
        except (exprlang.ParseError, ValueError) as exc:
            raise ConfigError(f"field 'hypersurfaces.graphs[{k}]': {exc}") from None
    return out


def sample_points(cfg: RunConfig, S: Spacetime) -> list[tuple[float, ...]]:
    box = cfg.box if cfg.box is not None else catalog.default_box(S)
    if len(box) != S.m:
        raise ConfigError(f"field 'sampling.box' needs {S.m} intervals")
    for lo, hi in box:
        if not lo < hi:
            raise ConfigError("field 'sampling.box' has an empty interval")
    corners = [tuple(float(c) for c in pt) for pt in itertools.product(*box)]
    if not all(S.fiber.contains(c) for c in corners):
        raise ConfigError(f"field 'sampling.box' leaves the fiber chart {S.fiber.box}")
    if cfg.mode == "grid":
        counts = cfg.counts if len(cfg.counts) == S.m else cfg.counts[:1] * S.m
        axes = [np.linspace(lo, hi, n) if n > 1 else np.array([(lo + hi) / 2]) for (lo, hi), n in zip(box, counts)]
        return [tuple(float(v) for v in p) for p in itertools.product(*axes)]
    if cfg.seed is None:
        raise ConfigError("field 'sampling.seed' is required when mode = 'random'")
    rng = np.random.default_rng(cfg.seed)
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    pts = lo + (hi - lo) * rng.random((cfg.counts[0], S.m))
    return [tuple(float(v) for v in p) for p in pts]


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def _evaluate(job) -> list[dict] | dict:
    """Run every selected check on one (surface, point); a rejection returns a single dict."""
    Mh, x, checks, tols, info = job
    try:
        frame_at(Mh, x)
        recs = []
        for name in checks:
            r = identities.run_check(name, Mh, x, tols.get(name))
            asserted = r.asserted and name not in info
            recs.append(
                {
                    "surface": Mh.name,
                    "check": name,
                    "point": list(x),
                    "lhs": r.lhs,
                    "rhs": r.rhs,
                    "residual": r.residual,
                    "relative_residual": r.relative_residual,
                    "margin": r.margin,
                    "pass": bool(r.passed),
                    "asserted": asserted,
                    "note": r.note,
                }
            )
        return recs
    except REJECTABLE as exc:
        return {"surface": Mh.name, "point": list(x), "reason": f"{type(exc).__name__}: {exc}"}


def run(cfg: RunConfig) -> tuple[dict, int]:
    t0 = time.perf_counter()
    S = build_spacetime(cfg.spacetime)
    surfaces = build_surfaces(cfg, S)
    pts = sample_points(cfg, S)
    jobs = [(Mh, x, cfg.checks, cfg.tolerances, set(cfg.informational)) for Mh in surfaces for x in pts]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_evaluate, jobs, chunksize=16))
    else:
        results = [_evaluate(j) for j in jobs]

    records, rejected = [], []
    for res in results:
        if isinstance(res, dict):
            rejected.append(res)
        else:
            records.extend(res)

    aggregate = {}
    for name in cfg.checks:
        recs = [r for r in records if r["check"] == name]
        asserted = [r for r in recs if r["asserted"]]
        margins = [r["margin"] for r in recs if r["margin"] is not None]
        aggregate[name] = {
            "count": len(recs),
            "asserted_count": len(asserted),
            "max_abs_residual": max((abs(r["residual"]) for r in recs), default=None),
            "max_relative_residual": max((r["relative_residual"] for r in recs), default=None),
            "min_margin": min(margins, default=None),
            "failures": sum(1 for r in asserted if not r["pass"]),
            "pass": all(r["pass"] for r in asserted),
        }

    surface_info, theorem_reports = [], []
    for Mh in surfaces:
        good = [tuple(x) for x in pts if not any(r["surface"] == Mh.name and tuple(r["point"]) == x for r in rejected)]
        entry = {"name": Mh.name, "u": exprlang.pretty(Mh.u), "points": len(pts), "rejected": len(pts) - len(good)}
        if good:
            is_slice, witness = theorems.slice_classifier(Mh, good)
            entry["is_slice"] = is_slice
            entry["slice_witness"] = list(witness) if witness else None
            for tid in cfg.theorems:
                rep = theorems.theorem_report(tid, Mh, good).to_dict()
                rep["surface"] = Mh.name
                theorem_reports.append(rep)
        surface_info.append(entry)

    overall = all(a["pass"] for a in aggregate.values())
    report = {
        "engine_version": __version__,
        "config": {
            **asdict(cfg),
            "tolerances": {n: cfg.tolerances.get(n, identities.DEFAULT_TOLERANCES[n]) for n in cfg.checks},
        },
        "spacetime": {"name": S.name, "m": S.m, "rho": exprlang.pretty(S.warp.expr), "interval": list(S.warp.interval)},
        "surfaces": surface_info,
        "checks": aggregate,
        "theorems": theorem_reports,
        "totals": {
            "evaluations": len(jobs),
            "evaluated": len(jobs) - len(rejected),
            "rejected": len(rejected),
            "records": len(records),
        },
        "rejected": rejected,
        "records": records,
        "pass": overall,
        "wall_clock_seconds": time.perf_counter() - t0,
    }
    return report, EXIT_PASS if overall else EXIT_FAIL


def points_csv(records: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(
            [
                r["surface"],
                r["check"],
                ";".join(repr(float(v)) for v in r["point"]),
                _fmt(r["lhs"]),
                _fmt(r["rhs"]),
                _fmt(r["residual"]),
                _fmt(r["margin"]),
                "true" if r["pass"] else "false",
            ]
        )
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, (set, tuple)):
        return list(o)
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_outputs(report: dict, cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(report), fh, indent=2, default=_json_default)
        fh.write("\n")
    if cfg.write_csv:
        with open(out / "points.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(points_csv(report["records"]))
    return out


def _parse_tol(items: list[str]) -> dict[str, float]:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects NAME=VALUE, got {item!r}")
        if name not in identities.CHECKS:
            raise ConfigError(f"--tol: unknown check {name!r}; registry: {', '.join(identities.CHECKS)}")
        try:
            out[name] = float(value)
        except ValueError:
            raise ConfigError(f"--tol {name}: {value!r} is not a number") from None
    return out


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="grwlab", description="Certify hypersurface identities in GRW spacetimes.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the checks described by a TOML config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides output.dir)")
    p_run.add_argument("--seed", type=int, help="sampling seed (falls back to GRWLAB_SEED)")
    p_run.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
    p_run.add_argument("--checks", help="comma-separated check names")
    p_run.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.out_dir = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        elif cfg.seed is None and os.environ.get("GRWLAB_SEED"):
            try:
                cfg.seed = int(os.environ["GRWLAB_SEED"])
            except ValueError:
                raise ConfigError("GRWLAB_SEED must be an integer") from None
        if args.checks:
            names = [c.strip() for c in args.checks.split(",") if c.strip()]
            for n in names:
                if n not in identities.CHECKS:
                    raise ConfigError(f"--checks: unknown check {n!r}; registry: {', '.join(identities.CHECKS)}")
            cfg.checks = names
        cfg.tolerances.update(_parse_tol(args.tol))
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg.jobs = args.jobs
        report, status = run(cfg)
    except ConfigError as exc:
        print(f"grwlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InternalConsistencyError, theorems.EngineFault) as exc:
        print(f"grwlab: internal fault: {exc}", file=sys.stderr)
        return EXIT_FAULT

    out = write_outputs(report, cfg)
    for name, agg in report["checks"].items():
        flag = "PASS" if agg["pass"] else "FAIL"
        print(f"{flag} {name}: n={agg['count']} max|res|={agg['max_abs_residual']!r} min margin={agg['min_margin']!r}")
    print(f"{'PASS' if report['pass'] else 'FAIL'} overall; rejected={report['totals']['rejected']}; report in {out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
