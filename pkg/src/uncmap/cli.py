"""Command-line surface: prior, run, eval, curve, frontiers, report.

Every subcommand exits 0 on success and nonzero with a single
machine-readable ``error: <type>: <message>`` line on stderr otherwise.
A config file of ``key = value`` lines can seed `run`; flags override it.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiment
from .analysis import (FrontierParams, SirenParams, build_uncertainty_map,
                       extract_frontiers, siren, siren_curve)
from .belief import PriorSpec, derive_prior
from .dispersion import RectangleSpec
from .grid import load_layer


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def _parse_config_file(path: str) -> dict:
    """key = value lines; '#' comments; values parsed as JSON when possible."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def cmd_prior(args) -> int:
    sigma = np.asarray(_floats(args.sigma_max))
    sides = np.asarray(_floats(args.s))
    prior = derive_prior(PriorSpec(sigma_max_per_axis=sigma,
                                   sides=RectangleSpec(sides)))
    print(json.dumps(prior.as_dict(), indent=1))
    return 0


def cmd_run(args) -> int:
    kwargs = _parse_config_file(args.config) if args.config else {}
    for key, flag in (("fixture", args.fixture), ("layout", args.layout),
                      ("pps", args.pps), ("sigma_max", args.sigma_max),
                      ("t_h", args.t_h), ("repeats", args.repeats),
                      ("max_steps", args.max_steps)):
        if flag is not None:
            kwargs[key] = flag
    if args.seed is not None:
        kwargs["seeds"] = tuple(range(args.seed,
                                      args.seed
                                      + kwargs.get("repeats", 5)))
    if args.sigma_override:
        kwargs["sigma_override"] = True
    if "sides" in kwargs:
        kwargs["sides"] = tuple(kwargs["sides"])
    if "seeds" in kwargs:
        kwargs["seeds"] = tuple(kwargs["seeds"])
    config = experiment.ScenarioConfig(**kwargs)
    records = experiment.run_scenario(config, out_dir=args.out,
                                      workers=args.workers)
    for rec in records:
        row = rec.summary_row()
        print(f"seed={row['seed']} steps={row['steps']} "
              f"siren={row['final_siren']} coverage={row['coverage']} "
              f"stop={row['stopping_reason']}")
    return 0


def cmd_eval(args) -> int:
    dp = load_layer(Path(args.layers) / "dp")
    sigma = np.asarray(_floats(args.sigma_max))
    sides = np.asarray(_floats(args.s))
    prior = derive_prior(PriorSpec(sigma_max_per_axis=sigma,
                                   sides=RectangleSpec(sides)))
    report = siren(dp, prior, SirenParams.from_prior(prior, mode=args.mode))
    print(report.to_json())
    return 0


def cmd_curve(args) -> int:
    lo, hi, step = (float(v) for v in args.range.split(":"))
    sigmas = np.arange(lo, hi + step / 2.0, step)
    rows = siren_curve(sigmas, sigma_max=args.sigma_max)
    out = "\n".join(["sigma,term"] +
                    [f"{s:.9g},{t:.9g}" for s, t in rows]) + "\n"
    if args.out:
        Path(args.out).write_text(out)
    else:
        sys.stdout.write(out)
    return 0


def cmd_frontiers(args) -> int:
    um = load_layer(Path(args.layers) / "um")
    occupancy = load_layer(Path(args.layers) / "occupancy")
    explored_path = Path(args.layers) / "explored"
    if explored_path.with_suffix(".json").exists():
        explored = load_layer(explored_path).values > 0.5
    else:
        explored = np.ones_like(um.values, dtype=bool)
    params = FrontierParams(t_h=args.t_h, u_beta=args.u_beta,
                            obstacle_clearance=args.clearance,
                            raw_gradient=args.raw_gradient)
    fs = extract_frontiers(um, occupancy, explored, params)
    print(fs.to_json())
    return 0


def cmd_report(args) -> int:
    rows = experiment.read_summary(args.summary)
    groups = {}
    for row in rows:
        key = (row["layout"], int(row["pps"]))
        groups.setdefault(key, []).append(float(row["final_siren"]))
    table = experiment.aggregate_boxplots(groups)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    experiment.write_boxplots_csv(table, out_dir / "boxplots.csv")
    pairs = [(float(r["median_landmark_sigma"]), float(r["median_um"]))
             for r in rows if int(r["pps"]) in (3, 4)
             and not math.isnan(float(r["median_landmark_sigma"]))]
    lines = ["slope,intercept,pearson_r,n"]
    if len(pairs) >= 3:
        fit = experiment.fit_line(*zip(*pairs))
        lines.append(f"{fit.slope:.9g},{fit.intercept:.9g},"
                     f"{fit.pearson_r:.9g},{fit.n}")
    (out_dir / "regression.csv").write_text("\n".join(lines) + "\n")
    for row in table:
        print(f"{row['group']}: median={row['median']:.6g} "
              f"iqr={row['iqr']:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uncmap",
        description="Dispersion-probability maps, uncertainty frontiers, "
                    "and the exploration study harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prior", help="derive unknown-cell prior constants")
    p.add_argument("--sigma-max", required=True,
                   help="comma-separated per-axis sigmas")
    p.add_argument("--s", required=True,
                   help="comma-separated rectangle sides")
    p.set_defaults(fn=cmd_prior)

    p = sub.add_parser("run", help="run one scenario batch")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--fixture", choices=("corridor", "warehouse"))
    p.add_argument("--layout", choices=tuple(experiment.LAYOUTS))
    p.add_argument("--pps", type=int, choices=(1, 2, 3, 4))
    p.add_argument("--sigma-max", type=float, dest="sigma_max")
    p.add_argument("--sigma-override", action="store_true")
    p.add_argument("--t-h", type=float, dest="t_h")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int, help="first seed of the batch")
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("eval", help="recompute the map score from layers")
    p.add_argument("--layers", required=True,
                   help="run directory holding dp layer files")
    p.add_argument("--sigma-max", required=True)
    p.add_argument("--s", required=True)
    p.add_argument("--mode", default="dp_approximation",
                   choices=("dp_approximation", "closed_form_sigma"))
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("curve", help="signed relative-entropy curve CSV")
    p.add_argument("--sigma-max", type=float, dest="sigma_max",
                   default=1.0)
    p.add_argument("--range", required=True, help="lo:hi:step")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_curve)

    p = sub.add_parser("frontiers", help="dump frontiers for saved layers")
    p.add_argument("--layers", required=True,
                   help="run directory holding um/occupancy layers")
    p.add_argument("--t-h", type=float, dest="t_h", default=0.2)
    p.add_argument("--u-beta", type=float, dest="u_beta", required=True)
    p.add_argument("--clearance", type=float, default=0.5)
    p.add_argument("--raw-gradient", action="store_true")
    p.set_defaults(fn=cmd_frontiers)

    p = sub.add_parser("report", help="boxplot and regression CSVs")
    p.add_argument("--summary", required=True, help="summary.csv path")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
