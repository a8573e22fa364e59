"""Command-line front end: ``renewrisk <subcommand> --config FILE``.

Each run writes ``<out>/<run-id>/`` with ``config.resolved`` (reloadable
YAML), one or more CSVs and ``summary.json``.  CSVs hold no timing data, so
the same config and seed reproduce them byte for byte.  The run id is a
hash of subcommand, resolved config and worker count.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, classcheck, mc
from .asymptotic import uniformity_profile
from .config import ConfigError, load_config, resolved_yaml
from .renewal import renewal_function

log = logging.getLogger("renewrisk")

SCHEMA_VERSION = "1.0"
SUBCOMMANDS = ("simulate", "ruin", "ratio", "asymptotic", "renewal", "classcheck")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

ESTIMATE_COLUMNS = ["x", "t", "estimate", "stderr", "ci95_lo", "ci95_hi", "n", "hits", "zero_hit", "method", "seed"]
RATIO_COLUMNS = ["x", "t", "mc", "mc_stderr", "rhs", "ratio", "ratio_ci_lo", "ratio_ci_hi", "sup_dev",
                 "method", "n", "hits", "trunc_T"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# -- subcommand bodies -------------------------------------------------------------

def _estimate_rows(results, xs, ts):
    rows = []
    for t, row in zip(ts, results):
        for x, res in zip(xs, row):
            rows.append({"x": x, "t": t, "estimate": res.estimate, "stderr": res.stderr,
                         "ci95_lo": res.ci95[0], "ci95_hi": res.ci95[1], "n": res.n, "hits": res.hits,
                         "zero_hit": res.zero_hit, "method": res.method, "seed": res.seed})
    return rows


def _infinite_proxy(scn, xs):
    spec = scn.asymptotic_spec()
    from .asymptotic import rhs_detail
    return max(rhs_detail(spec, x, math.inf).trunc_T for x in xs)


def _cmd_estimate(cfg, workers, ruin):
    scn, s = cfg.scenario, cfg.settings
    xs, ts = list(scn.x_values), list(scn.horizons)
    if not xs:
        raise ConfigError("simulate/ruin need run.x values")
    kw = dict(workers=workers, chunk_size=s.chunk_size)
    if any(math.isinf(t) for t in ts):
        kw["t_inf_proxy"] = _infinite_proxy(scn, xs)
    if ruin:
        results = mc.estimate_ruin_grid(scn, xs, ts, s.n, s.seed, **kw)
    elif s.method == "importance":
        results = [[mc.estimate_entrance_is(scn, x, t, s.n, s.seed, kappa=s.kappa, defensive=s.defensive, **kw)
                    for x in xs] for t in ts]
    else:
        results = mc.estimate_entrance_grid(scn, xs, ts, s.n, s.seed, **kw)
    rows = _estimate_rows(results, xs, ts)
    meta = [dict(r.to_dict(), x=x, t=t) for t, row in zip(ts, results) for x, r in zip(xs, row)]
    name = "ruin.csv" if ruin else "entrance.csv"
    return {name: (ESTIMATE_COLUMNS, rows)}, {"estimators": meta, "t_inf_proxy": kw.get("t_inf_proxy")}


def _cmd_ratio(cfg, workers):
    scn, s = cfg.scenario, cfg.settings
    kw = dict(workers=workers, chunk_size=s.chunk_size)
    if s.method == "importance":
        kw.update(kappa=s.kappa, defensive=s.defensive)
    if s.level is not None:
        table = mc.ratio_table_at_level(scn, s.level, scn.horizons, s.n, s.seed, s.method, scale=s.scale, **kw)
    else:
        table = mc.ratio_table(scn, scn.x_values, scn.horizons, s.n, s.seed, s.method, **kw)
    rows = list(table.rows) + [{"x": u["x"], "t": "sup", "sup_dev": u["sup_dev"]} for u in table.uniformity]
    return {"ratio.csv": (RATIO_COLUMNS, rows)}, {"uniformity": table.uniformity, "level": s.level}


def _cmd_asymptotic(cfg, workers):
    scn = cfg.scenario
    if not scn.x_values:
        raise ConfigError("asymptotic needs run.x values")
    rows = uniformity_profile(scn.asymptotic_spec(), scn.x_values, scn.horizons)
    return {"asymptotic.csv": (["x", "t", "rhs", "method", "trunc_T", "est_err"], rows)}, {}


def _cmd_renewal(cfg, workers):
    scn, s = cfg.scenario, cfg.settings
    ts = [t for t in (s.renewal_t or scn.horizons) if math.isfinite(t)]
    if not ts:
        raise ConfigError("renewal needs finite horizons (renewal.t or run.horizons)")
    t_max = s.renewal_t_max or max(ts)
    rf = renewal_function(scn.arrivals, t_max)
    rows = [{"t": t, "lambda": float(rf(t)), "method": rf.method, "h": rf.h, "est_err": rf.est_err} for t in ts]
    return {"renewal.csv": (["t", "lambda", "method", "h", "est_err"], rows)}, {"t_max": t_max}


def _cmd_classcheck(cfg, workers):
    cc = cfg.settings.classcheck
    tail = cfg.classcheck_tail
    xs = cc["x"] or [10.0, 100.0, 1e3, 1e4]
    conv = classcheck.convolution_ratio(tail, xs)
    lt = classcheck.long_tail_ratio(tail, cc["a"], [x for x in xs if x > cc["a"]])
    pd = classcheck.pd_ratio(tail, cc["v"])
    mz = classcheck.matuszewska_lower(tail, cc["v_grid"])
    files = {
        "convolution.csv": (["x", "ratio", "est_err"],
                            [{"x": x, "ratio": r, "est_err": e} for x, r, e in zip(conv.x, conv.ratio, conv.est_err)]),
        "long_tail.csv": (["x", "a", "ratio"], [{"x": x, "a": lt.a, "ratio": r} for x, r in zip(lt.x, lt.ratio)]),
        "pd.csv": (["log_x", "v", "ratio"], [{"log_x": l, "v": pd.v, "ratio": r} for l, r in zip(pd.log_x, pd.ratio)]),
        "matuszewska.csv": (["v", "fstar"], [{"v": v, "fstar": f} for v, f in zip(mz.v_grid, mz.fstar)]),
    }
    verdicts = {
        "convolution": conv.verdict, "long_tail": lt.flag, "pd": pd.verdict, "pd_max_top": pd.max_top,
        "matuszewska_lower": mz.estimate, "matuszewska_label": mz.label,
        "matuszewska_at_grid_bound": mz.at_grid_bound, "caveat": classcheck.CAVEAT,
    }
    return files, {"verdicts": verdicts}


COMMANDS = {
    "simulate": lambda cfg, w: _cmd_estimate(cfg, w, ruin=False),
    "ruin": lambda cfg, w: _cmd_estimate(cfg, w, ruin=True),
    "ratio": _cmd_ratio,
    "asymptotic": _cmd_asymptotic,
    "renewal": _cmd_renewal,
    "classcheck": _cmd_classcheck,
}


# -- entry point -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="renewrisk", description="Rare-set entrance and ruin under renewal arrivals.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config_path", nargs="?", help="scenario file (same as --config)")
        sp.add_argument("--config", dest="config_flag", help="scenario file")
        sp.add_argument("--seed", type=int, help="override run.seed")
        sp.add_argument("--workers", type=int, default=1, help="worker processes for Monte Carlo")
        sp.add_argument("--out", default="out", help="output root directory (default: out)")
        sp.add_argument("--run-id", help="output subdirectory name (default: content hash)")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    path = args.config_flag or args.config_path
    if not path:
        log.error("no config given (use --config FILE)")
        return EXIT_CONFIG
    if args.workers < 1:
        log.error("--workers must be >= 1")
        return EXIT_CONFIG
    try:
        cfg = load_config(path, seed=args.seed)
        files, extra = COMMANDS[args.command](cfg, args.workers)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (ValueError, TypeError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG

    text = resolved_yaml(cfg)
    run_id = args.run_id or f"{args.command}-" + hashlib.sha256(
        f"{args.command}\n{args.workers}\n{text}".encode()).hexdigest()[:12]
    out = Path(args.out) / run_id
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(text, encoding="utf-8")
    for name, (columns, rows) in files.items():
        _write_csv(out / name, columns, rows)
    summary = {"schema_version": SCHEMA_VERSION, "package_version": __version__, "command": args.command,
               "run_id": run_id, "seed": cfg.settings.seed, "workers": args.workers,
               "chunk_size": cfg.settings.chunk_size, "files": sorted(files), "config": cfg.resolved}
    summary.update(extra)
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2) + "\n", encoding="utf-8")
    print(out)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
