"""Command-line entry point.

    fairbayes-dpp oracle    [--p-values ...] [--cost C]
    fairbayes-dpp synthetic [--preset table1] [--replications N] ...
    fairbayes-dpp sweep     --preset sample-size|minority|cost ...
    fairbayes-dpp tabular   --csv FILE --label COL --group COL --numeric ... ...

Exit status: 0 on success, 2 when the sufficient condition fails, 1 on any
other error.  Set FAIRBAYES_WORKERS to run replications in parallel.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .calibration import CalibrationConfig
from .data import CSVSchema
from .errors import ConditionFailure, FairBayesError
from .experiments import CONDITION_FAILED, OK, emit_report, preset, run
from .gaussian_oracle import GaussianModelSpec, solve_fair_optimal
from .score_model import TrainConfig

log = logging.getLogger("fairbayes_dpp")

_INT_KEYS = {"replications", "seed", "n_train", "n_test", "epochs", "batch_size", "anchor_group"}
_FLOAT_KEYS = {"cost", "grid_step", "condition_slack", "condition_alpha", "ppv_match_tol",
               "learning_rate", "l2", "p_y1", "p_y0", "p_a1", "sigma", "train_frac",
               "calib_frac", "test_frac"}
_LIST_KEYS = {"numeric", "categorical", "sweep_values", "p_values"}


def read_config(path) -> dict:
    """Parse a ``key = value`` file; an optional ``[experiment]`` header is allowed."""
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(text)
    out = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            out[key.replace("-", "_")] = _coerce(key.replace("-", "_"), raw)
    return out


def _coerce(key, raw):
    raw = raw.strip()
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return None if raw.lower() in ("", "none") else float(raw)
    if key in _LIST_KEYS:
        items = [s.strip() for s in raw.replace(";", ",").split(",") if s.strip()]
        if key in ("sweep_values", "p_values"):
            return [float(s) for s in items]
        return items
    if key == "with_replacement":
        return raw.lower() in ("1", "true", "yes", "on")
    return raw


def _add_common(p):
    p.add_argument("--config", help="key = value file; command-line flags take precedence")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="-", help="output path ('-' for stdout)")
    p.add_argument("--format", choices=("json", "table", "csv"), default="table")
    p.add_argument("--replications", type=int)
    p.add_argument("--cost", type=float)
    p.add_argument("--grid-step", type=float)
    p.add_argument("--condition-slack", type=float)
    p.add_argument("--condition-alpha", type=float)
    p.add_argument("--anchor-group", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--no-timings", action="store_true", help="omit wall-clock timings from json")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_synthetic(p):
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--p-y1", type=float, help="P(Y=1|A=1)")
    p.add_argument("--p-y0", type=float, help="P(Y=1|A=0)")
    p.add_argument("--p-a1", type=float, help="P(A=1)")
    p.add_argument("--sigma", type=float)
    p.add_argument("--sweep-values", type=float, nargs="+")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairbayes-dpp", description="Group-wise threshold post-processing for predictive parity.")
    sub = parser.add_subparsers(dest="command", required=True)

    o = sub.add_parser("oracle", help="closed-form fair and unconstrained optima")
    o.add_argument("--p-values", type=float, nargs="+", default=[0.2, 0.3, 0.4, 0.5, 0.6])
    o.add_argument("--cost", type=float, default=0.5)
    o.add_argument("--p-a1", type=float, default=0.3)
    o.add_argument("--p-y0", type=float, default=0.2)
    o.add_argument("--sigma", type=float, default=2.0)
    o.add_argument("--format", choices=("json", "table"), default="table")
    o.add_argument("--out", default="-")

    s = sub.add_parser("synthetic", help="replicated synthetic Gaussian study")
    s.add_argument("--preset", default="table1",
                   choices=("table1", "table1-p0.6", "multiclass3", "multiclass5"))
    _add_common(s)
    _add_synthetic(s)

    w = sub.add_parser("sweep", help="synthetic parameter sweeps")
    w.add_argument("--preset", required=True, choices=("sample-size", "minority", "cost"))
    _add_common(w)
    _add_synthetic(w)

    t = sub.add_parser("tabular", help="bootstrap experiment on a CSV file")
    t.add_argument("--preset", choices=("adult", "compas"), default="adult")
    t.add_argument("--csv")
    t.add_argument("--label")
    t.add_argument("--group")
    t.add_argument("--numeric", nargs="*")
    t.add_argument("--categorical", nargs="*")
    _add_common(t)
    return parser


def _settings(args) -> dict:
    opts = read_config(args.config) if getattr(args, "config", None) else {}
    for key, val in vars(args).items():
        if val is not None and key not in ("config", "command", "preset", "out", "format",
                                          "no_timings", "verbose"):
            opts[key] = val
    return opts


def _experiment(args):
    opts = _settings(args)
    extra = {}
    if args.command == "tabular":
        path = opts.get("csv")
        if not path or "label" not in opts or "group" not in opts:
            raise ValueError("tabular needs --csv, --label and --group (or the same keys in --config)")
        extra = dict(csv_path=str(path), schema=CSVSchema(
            opts["label"], opts["group"], opts.get("numeric", ()), opts.get("categorical", ())))
    cfg = preset(args.preset, **extra)
    train = {k: opts[k] for k in ("learning_rate", "epochs", "batch_size", "l2") if k in opts}
    calib = {k: opts[k] for k in ("cost", "grid_step", "condition_slack", "condition_alpha",
                                  "anchor_group", "ppv_match_tol") if k in opts}
    top = {k: opts[k] for k in ("replications", "seed", "n_train", "n_test") if k in opts}
    cfg = replace(cfg, train_cfg=replace(cfg.train_cfg, **train),
                  calib_cfg=replace(cfg.calib_cfg, **calib), **top)

    if cfg.kind == "tabular":
        split = {k: opts[k] for k in ("train_frac", "calib_frac", "test_frac", "with_replacement")
                 if k in opts}
        return replace(cfg, split=replace(cfg.split, **split))

    if any(k in opts for k in ("p_y1", "p_y0", "p_a1", "sigma")):
        if cfg.model.num_groups != 2:
            raise ValueError("--p-y1/--p-y0/--p-a1 apply to two-group models only")
        m = cfg.model
        cfg = replace(cfg, model=GaussianModelSpec.table1(
            opts.get("p_y1", m.label_probs[1]), opts.get("p_a1", m.group_probs[1]),
            opts.get("p_y0", m.label_probs[0]), opts.get("sigma", m.sigma)))
    if "sweep_values" in opts:
        if cfg.sweep is None:
            raise ValueError(f"preset {args.preset} has no sweep parameter")
        cfg = replace(cfg, sweep=(cfg.sweep[0], tuple(opts["sweep_values"])))
    return cfg


def _oracle(args) -> int:
    rows = []
    for p in args.p_values:
        spec = GaussianModelSpec.table1(p, args.p_a1, args.p_y0, args.sigma)
        rows.append({"p": p, **solve_fair_optimal(spec, args.cost).to_dict()})
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        head = f"{'p':>5}  {'Fair ACC':>8}  {'Uncon DPP':>9}  {'Uncon ACC':>9}  {'t*':>7}  {'T0(t*)':>7}\n"
        text = head + "".join(
            f"{r['p']:>5g}  {r['fair_accuracy']:>8.3f}  {r['uncon_dpp']:>9.3f}  "
            f"{r['uncon_accuracy']:>9.3f}  {r['t_star']:>7.4f}  {r['matched_thresholds']['0']:>7.4f}\n"
            for r in rows)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "oracle":
            return _oracle(args)
        cfg = _experiment(args)
        report = run(cfg)
        emit_report(report, args.format, args.out, include_timings=not args.no_timings)
    except ConditionFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FairBayesError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    stuck = [p for p in report.points
             if p.status == CONDITION_FAILED or (p.replications and p.counts.get(OK, 0) == 0
                                                 and p.counts.get(CONDITION_FAILED, 0) > 0)]
    if stuck and len(stuck) == len(report.points):
        print("error: the sufficient condition failed everywhere; consider other fairness measures",
              file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
