"""Replicated experiments: synthetic Gaussian studies, parameter sweeps and CSV data.

Each replication draws its randomness from ``SeedSequence([seed, index])``
alone, so every point of a sweep reuses the same streams (common random
numbers) and reports are reproducible bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .calibration import CalibrationConfig, ThresholdSet, calibrate
from .data import CSVSchema, SplitSpec, group_views, load_csv, split
from .errors import (
    CalibrationInfeasibleError,
    CalibrationInputError,
    ConditionFailure,
    ConfigError,
    DegenerateTestError,
    OracleInfeasibleError,
)
from .gaussian_oracle import GaussianModelSpec, OracleFairSolution, sample, solve_fair_optimal
from .metrics import EvalReport, evaluate, paired_t_one_sided
from .score_model import TrainConfig, train

log = logging.getLogger(__name__)

KINDS = ("synthetic-table1", "synthetic-sweep", "tabular")
SWEEP_PARAMS = ("p_Y1", "p_A0", "cost", "n_train")
METRICS = ("accuracy", "dpp", "cost_risk")
WORKERS_ENV = "FAIRBAYES_WORKERS"

OK = "ok"
CONDITION_FAILED = "condition-failed"
INFEASIBLE = "calibration-infeasible"


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: GaussianModelSpec | None = None
    csv_path: str | None = None
    schema: CSVSchema | None = None
    train_cfg: TrainConfig = TrainConfig()
    calib_cfg: CalibrationConfig = CalibrationConfig()
    n_train: int = 50000
    n_test: int = 5000
    replications: int = 20
    seed: int = 0
    sweep: tuple | None = None
    split: SplitSpec = SplitSpec()
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.sweep is not None:
            param, values = self.sweep
            if param not in SWEEP_PARAMS:
                raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}")
            object.__setattr__(self, "sweep", (param, tuple(values)))
        if self.kind == "tabular":
            if self.csv_path is None or self.schema is None:
                raise ConfigError("tabular experiments need csv_path and schema")
        elif self.model is None:
            raise ConfigError("synthetic experiments need a GaussianModelSpec")

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "name": self.name,
            "model": None if self.model is None else self.model.to_dict(),
            "csv_path": self.csv_path,
            "schema": None if self.schema is None else vars(self.schema),
            "train_cfg": vars(self.train_cfg),
            "calib_cfg": vars(self.calib_cfg),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "replications": self.replications,
            "seed": self.seed,
            "sweep": None if self.sweep is None else [self.sweep[0], list(self.sweep[1])],
            "split": vars(self.split),
        }
        return json.loads(json.dumps(d))


@dataclass
class ReplicationRecord:
    index: int
    status: str
    baseline: EvalReport
    fair: EvalReport | None = None
    thresholds: dict | None = None
    anchor_t: float | None = None
    condition_lhs: float | None = None
    condition_rhs: float | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "status": self.status,
            "baseline": self.baseline.to_dict(),
            "fair": None if self.fair is None else self.fair.to_dict(),
            "thresholds": None if self.thresholds is None else {str(a): t for a, t in self.thresholds.items()},
            "anchor_t": self.anchor_t,
            "condition_lhs": self.condition_lhs,
            "condition_rhs": self.condition_rhs,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d) -> "ReplicationRecord":
        return cls(
            index=d["index"], status=d["status"], baseline=EvalReport.from_dict(d["baseline"]),
            fair=None if d["fair"] is None else EvalReport.from_dict(d["fair"]),
            thresholds=None if d["thresholds"] is None else {int(a): t for a, t in d["thresholds"].items()},
            anchor_t=d["anchor_t"], condition_lhs=d["condition_lhs"],
            condition_rhs=d["condition_rhs"], message=d["message"],
        )


def _mean_std(values) -> list:
    """[mean, sample std]; entries are None when undefined."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return [None, None]
    return [float(np.mean(v)), float(np.std(v, ddof=1)) if v.size > 1 else None]


@dataclass
class PointResult:
    param: str | None
    value: float | None
    status: str = OK
    replications: list = field(default_factory=list)
    oracle: OracleFairSolution | None = None
    message: str = ""
    # filled in by summarize()
    aggregates: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    ttest: dict | None = None

    def summarize(self):
        ok = [r for r in self.replications if r.status == OK]
        self.counts = {s: sum(r.status == s for r in self.replications)
                       for s in (OK, CONDITION_FAILED, INFEASIBLE)}
        self.aggregates = {
            "fair": {m: _mean_std([getattr(r.fair, m) for r in ok]) for m in METRICS},
            "baseline": {m: _mean_std([getattr(r.baseline, m) for r in self.replications]) for m in METRICS},
        }
        self.ttest = None
        if len(ok) >= 2:
            try:
                t, p = paired_t_one_sided([r.fair.dpp for r in ok], [r.baseline.dpp for r in ok])
                self.ttest = {"t": t, "p_value": p, "pairs": len(ok)}
            except DegenerateTestError as exc:
                self.ttest = {"t": None, "p_value": None, "pairs": len(ok), "error": str(exc)}
        return self

    def to_dict(self) -> dict:
        return {
            "param": self.param,
            "value": self.value,
            "status": self.status,
            "message": self.message,
            "counts": self.counts,
            "aggregates": self.aggregates,
            "ttest": self.ttest,
            "oracle": None if self.oracle is None else self.oracle.to_dict(),
            "replications": [r.to_dict() for r in self.replications],
        }

    @classmethod
    def from_dict(cls, d) -> "PointResult":
        return cls(
            param=d["param"], value=d["value"], status=d["status"],
            replications=[ReplicationRecord.from_dict(r) for r in d["replications"]],
            oracle=None if d["oracle"] is None else OracleFairSolution.from_dict(d["oracle"]),
            message=d["message"], aggregates=d["aggregates"], counts=d["counts"], ttest=d["ttest"],
        )


@dataclass
class ExperimentReport:
    name: str
    kind: str
    config: dict
    points: list = field(default_factory=list)
    timings: dict | None = None

    def to_dict(self, include_timings: bool = True) -> dict:
        d = {"name": self.name, "kind": self.kind, "config": self.config,
             "points": [p.to_dict() for p in self.points]}
        if include_timings and self.timings is not None:
            d["timings"] = self.timings
        return d

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2, allow_nan=False)

    @classmethod
    def from_dict(cls, d) -> "ExperimentReport":
        return cls(name=d["name"], kind=d["kind"], config=d["config"],
                   points=[PointResult.from_dict(p) for p in d["points"]],
                   timings=d.get("timings"))

    @property
    def condition_failures(self) -> int:
        return sum(p.counts.get(CONDITION_FAILED, 0) + (p.status == CONDITION_FAILED) for p in self.points)


def point_settings(cfg: ExperimentConfig, param: str | None, value):
    """Model spec, calibration config and training size for one sweep point."""
    spec, calib, n_train = cfg.model, cfg.calib_cfg, cfg.n_train
    if param == "p_Y1":
        probs = list(spec.label_probs)
        probs[1] = float(value)
        spec = replace(spec, label_probs=tuple(probs))
    elif param == "p_A0":
        if spec.num_groups != 2:
            raise ConfigError("the p_A0 sweep needs a two-group model")
        spec = replace(spec, group_probs=(float(value), 1.0 - float(value)))
    elif param == "cost":
        calib = replace(calib, cost=float(value))
    elif param == "n_train":
        n_train = int(value)
    return spec, calib, n_train


def _seeds(seed: int, index: int, k: int):
    return np.random.SeedSequence([seed, index]).spawn(k)


def _fit_seed(ss) -> int:
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _one_pipeline(index, train_ds, calib_ds, test_ds, train_cfg, calib_cfg) -> ReplicationRecord:
    model = train(train_ds, train_cfg)
    test_scores = model.predict(test_ds.features, test_ds.groups)
    c = calib_cfg.cost
    baseline_ts = ThresholdSet.constant(c, range(test_ds.num_groups))
    baseline = evaluate(baseline_ts.apply(test_scores, test_ds.groups), test_ds.labels, test_ds.groups, c)
    try:
        views = group_views(calib_ds, model.predict(calib_ds.features, calib_ds.groups))
        res = calibrate(views, calib_cfg)
    except (CalibrationInfeasibleError, CalibrationInputError) as exc:
        return ReplicationRecord(index, INFEASIBLE, baseline, message=str(exc))
    if not res.condition_holds:
        return ReplicationRecord(index, CONDITION_FAILED, baseline, condition_lhs=res.condition_lhs,
                                 condition_rhs=res.condition_rhs, message=res.message)
    fair = evaluate(res.thresholds.apply(test_scores, test_ds.groups), test_ds.labels, test_ds.groups, c)
    return ReplicationRecord(index, OK, baseline, fair, dict(res.thresholds.thresholds), res.anchor_t,
                             res.condition_lhs, res.condition_rhs)


def _synthetic_replication(args) -> ReplicationRecord:
    index, seed, spec, n_train, n_test, train_cfg, calib_cfg = args
    s_train, s_test, s_fit = _seeds(seed, index, 3)
    train_ds = sample(spec, n_train, s_train)
    test_ds = sample(spec, n_test, s_test)
    train_cfg = replace(train_cfg, seed=_fit_seed(s_fit))
    # synthetic runs calibrate on the training sample
    return _one_pipeline(index, train_ds, train_ds, test_ds, train_cfg, calib_cfg)


def _tabular_replication(args) -> ReplicationRecord:
    index, seed, ds, split_spec, train_cfg, calib_cfg = args
    s_split, s_fit = _seeds(seed, index, 2)
    parts = split(ds, replace(split_spec, seed=_fit_seed(s_split)))
    train_cfg = replace(train_cfg, seed=_fit_seed(s_fit))
    return _one_pipeline(index, *parts, train_cfg, calib_cfg)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _map(fn, jobs):
    jobs = list(jobs)
    workers = min(_workers(), len(jobs))
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _points(cfg: ExperimentConfig):
    if cfg.sweep is None:
        return [(None, None)]
    return [(cfg.sweep[0], v) for v in cfg.sweep[1]]


def run_synthetic(cfg: ExperimentConfig, record_timings: bool = True) -> ExperimentReport:
    """Replicate the synthetic study at every sweep point.

    Each replication samples train/test sets, fits the score model,
    calibrates on the training sample and evaluates the calibrated rule and
    the unconstrained rule (every threshold at c) on the test sample.  A
    single-point run raises :class:`ConditionFailure` when the population
    condition fails; in a sweep the offending point is marked and skipped.
    """
    if cfg.kind == "tabular":
        raise ConfigError("run_synthetic needs a synthetic experiment config")
    report = ExperimentReport(cfg.name or cfg.kind, cfg.kind, cfg.to_dict())
    start = time.perf_counter()
    timings = {"points": []}
    for param, value in _points(cfg):
        t0 = time.perf_counter()
        spec, calib, n_train = point_settings(cfg, param, value)
        point = PointResult(param, value)
        try:
            point.oracle = solve_fair_optimal(spec, calib.cost)
        except OracleInfeasibleError as exc:
            if cfg.sweep is None:
                raise
            point.status, point.message = CONDITION_FAILED, str(exc)
            log.warning("%s=%s: %s", param, value, exc)
        if point.status == OK:
            jobs = ((i, cfg.seed, spec, n_train, cfg.n_test, cfg.train_cfg, calib)
                    for i in range(cfg.replications))
            point.replications = _map(_synthetic_replication, jobs)
        report.points.append(point.summarize())
        timings["points"].append(time.perf_counter() - t0)
    timings["total"] = time.perf_counter() - start
    report.timings = timings if record_timings else None
    return report


def run_tabular(cfg: ExperimentConfig, record_timings: bool = True) -> ExperimentReport:
    """Bootstrap train/validation/test splits of a CSV file.

    Thresholds are learned on the validation split.  Replications whose
    validation data fail the condition are kept and counted but excluded
    from the fair-classifier statistics and the paired test.
    """
    if cfg.kind != "tabular":
        raise ConfigError("run_tabular needs a tabular experiment config")
    start = time.perf_counter()
    ds, group_map = load_csv(cfg.csv_path, cfg.schema)
    config = cfg.to_dict()
    config["group_map"] = group_map
    report = ExperimentReport(cfg.name or cfg.kind, cfg.kind, config)
    point = PointResult(None, None)
    if cfg.model is not None:
        try:
            point.oracle = solve_fair_optimal(cfg.model, cfg.calib_cfg.cost)
        except OracleInfeasibleError as exc:
            point.message = str(exc)
    jobs = ((i, cfg.seed, ds, cfg.split, cfg.train_cfg, cfg.calib_cfg) for i in range(cfg.replications))
    point.replications = _map(_tabular_replication, jobs)
    report.points.append(point.summarize())
    if record_timings:
        report.timings = {"total": time.perf_counter() - start}
    return report


def run(cfg: ExperimentConfig, record_timings: bool = True) -> ExperimentReport:
    if cfg.kind == "tabular":
        return run_tabular(cfg, record_timings)
    return run_synthetic(cfg, record_timings)


def sweep_slope(report: ExperimentReport, method: str = "fair", metric: str = "dpp") -> float:
    """Least-squares slope of a mean metric against the swept value."""
    pts = [(p.value, p.aggregates[method][metric][0]) for p in report.points
           if p.value is not None and p.aggregates.get(method, {}).get(metric, [None])[0] is not None]
    if len(pts) < 2:
        raise ValueError("need at least two sweep points with results")
    x, y = map(np.asarray, zip(*pts))
    return float(np.polyfit(x.astype(float), y.astype(float), 1)[0])


# ---------------------------------------------------------------- reporting

CSV_FIELDS = ("param", "value", "replication", "method", "status", "accuracy", "dpp",
              "cost_risk", "overall_ppv")


def _fmt(ms) -> str:
    mean, std = ms
    if mean is None:
        return "-"
    return f"{mean:.3f}" if std is None else f"{mean:.3f} ({std:.3f})"


def format_table(report: ExperimentReport) -> str:
    """Fixed-width table with mean (std) cells, three decimals."""
    theory = any(p.oracle is not None for p in report.points)
    head = [report.points[0].param or "point" if report.points else "point"]
    if theory:
        head += ["Fair ACC*", "Uncon DPP*", "Uncon ACC*"]
    head += ["FairBayes-DPP DPP", "FairBayes-DPP ACC", "Uncon DPP", "Uncon ACC",
             "ok", "cond-fail", "infeasible", "p-value"]
    rows = []
    for p in report.points:
        row = ["-" if p.value is None else f"{p.value:g}"]
        if theory:
            o = p.oracle
            row += ["-"] * 3 if o is None else [f"{o.fair_accuracy:.3f}", f"{o.uncon_dpp:.3f}",
                                                f"{o.uncon_accuracy:.3f}"]
        agg = p.aggregates or {"fair": {}, "baseline": {}}
        none = [None, None]
        row += [_fmt(agg["fair"].get("dpp", none)), _fmt(agg["fair"].get("accuracy", none)),
                _fmt(agg["baseline"].get("dpp", none)), _fmt(agg["baseline"].get("accuracy", none))]
        row += [str(p.counts.get(OK, 0)), str(p.counts.get(CONDITION_FAILED, 0) + (p.status == CONDITION_FAILED)),
                str(p.counts.get(INFEASIBLE, 0))]
        pv = (p.ttest or {}).get("p_value")
        row.append("-" if pv is None else f"{pv:.3g}")
        rows.append(row)
    widths = [max(len(r[i]) for r in [head, *rows]) for i in range(len(head))]
    line = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths))  # noqa: E731
    out = [line(head), "-" * len(line(head))] + [line(r) for r in rows]
    if theory:
        out.append("* closed-form values of the population model")
    return "\n".join(out) + "\n"


def format_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for p in report.points:
        for r in p.replications:
            for method, ev in (("fair", r.fair), ("baseline", r.baseline)):
                row = {"param": p.param or "", "value": "" if p.value is None else p.value,
                       "replication": r.index, "method": method, "status": r.status}
                if ev is not None:
                    row.update(accuracy=ev.accuracy, dpp=ev.dpp, cost_risk=ev.cost_risk,
                               overall_ppv="" if ev.overall_ppv is None else ev.overall_ppv)
                w.writerow(row)
    return buf.getvalue()


def emit_report(report: ExperimentReport, fmt: str = "json", path=None,
                include_timings: bool = True) -> None:
    """Write ``report`` as json, table or csv to ``path`` (stdout for None or '-')."""
    if fmt == "json":
        text = report.to_json(include_timings) + "\n"
    elif fmt == "table":
        text = format_table(report)
    elif fmt == "csv":
        text = format_csv(report)
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    Path(path).write_text(text)


# ---------------------------------------------------------------- presets

SYNTHETIC_TRAIN = TrainConfig(learning_rate=0.5, epochs=20, batch_size=512)
SYNTHETIC_CALIB = CalibrationConfig(cost=0.5, grid_step=0.001, condition_alpha=0.05)


def preset(name: str, **overrides) -> ExperimentConfig:
    """Named experiment configurations; keyword overrides replace fields."""
    base = dict(train_cfg=SYNTHETIC_TRAIN, calib_cfg=SYNTHETIC_CALIB, n_test=5000,
                replications=20, name=name)
    if name == "table1":
        cfg = dict(kind="synthetic-table1", model=GaussianModelSpec.table1(0.6), n_train=50000,
                   sweep=("p_Y1", (0.2, 0.3, 0.4, 0.5, 0.6)))
    elif name == "table1-p0.6":
        cfg = dict(kind="synthetic-table1", model=GaussianModelSpec.table1(0.6), n_train=50000)
    elif name == "sample-size":
        cfg = dict(kind="synthetic-sweep", model=GaussianModelSpec.table1(0.6), n_train=25000,
                   sweep=("n_train", (5000, 10000, 15000, 20000, 25000)))
    elif name == "minority":
        cfg = dict(kind="synthetic-sweep", model=GaussianModelSpec.table1(0.6), n_train=25000,
                   sweep=("p_A0", (0.5, 0.6, 0.7, 0.8, 0.9)))
    elif name == "cost":
        cfg = dict(kind="synthetic-sweep", model=GaussianModelSpec.table1(0.5), n_train=25000,
                   sweep=("cost", (0.4, 0.5, 0.6, 0.7, 0.8)))
    elif name == "multiclass3":
        cfg = dict(kind="synthetic-sweep",
                   model=GaussianModelSpec((0.3, 0.3, 0.4), (0.2, 0.6, 0.3)), n_train=50000)
    elif name == "multiclass5":
        cfg = dict(kind="synthetic-sweep",
                   model=GaussianModelSpec((0.2, 0.3, 0.2, 0.15, 0.15), (0.2, 0.6, 0.3, 0.4, 0.2)),
                   n_train=50000)
    elif name in ("adult", "compas"):
        # reference batch size, epochs and learning rate for these datasets
        batch, epochs, lr = (512, 200, 1e-1) if name == "adult" else (2048, 500, 5e-4)
        cfg = dict(kind="tabular", train_cfg=TrainConfig(lr, epochs, batch),
                   calib_cfg=CalibrationConfig(cost=0.5), replications=20)
    else:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    base.update(cfg)
    base.update(overrides)
    return ExperimentConfig(**base)


PRESETS = ("table1", "table1-p0.6", "sample-size", "minority", "cost", "multiclass3",
           "multiclass5", "adult", "compas")
