"""Config-driven 1-to-1 / 1-to-N / M-to-N experiments and report emission."""

from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__
from .disagg import make_disaggregator
from .errors import (
    DataError,
    DegenerateError,
    DomainError,
    EmptyInputError,
    NilmTransferError,
    ParseError,
    ValidationError,
)
from .metrics import (
    CLASSIFICATION_METRICS,
    METRIC_IDS,
    ConfusionCounts,
    MetricKind,
    MetricValue,
    compute,
    confusion,
    metric_kind,
)
from .timeseries import HouseholdRecord, derive_states, load_household, threshold_states
from .transfer import (
    INDEPENDENCE_NOTE,
    GeneralisationRatio,
    SeenScore,
    TransferReport,
    build_report,
    format_percent,
    format_value,
)

log = logging.getLogger(__name__)

SEEN, UNSEEN = "seen", "unseen"
RESULTS_CSV_HEADER = ("algorithm", "appliance", "metric", "house_id", "role", "value")


@dataclass(frozen=True)
class AlgorithmConfig:
    id: str
    type: str
    params: Mapping = field(default_factory=dict)

    def to_dict(self):
        return {"id": self.id, "type": self.type, "params": dict(self.params)}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    algorithms: tuple[AlgorithmConfig, ...]
    appliances: tuple[str, ...]
    training_houses: tuple[str, ...]
    seen_tests: tuple[str, ...]
    unseen_tests: tuple[str, ...] = ()
    interval: int = 10
    train_window: int = 14 * 86_400
    test_window: int = 14 * 86_400
    metrics: tuple[str, ...] = ("F1", "MAE")
    thresholds: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        try:
            algorithms = tuple(
                AlgorithmConfig(a.get("id", a["type"]), a["type"], dict(a.get("params", {})))
                for a in d["algorithms"]
            )
            config = cls(
                experiment_id=str(d["experiment_id"]),
                algorithms=algorithms,
                appliances=tuple(d["appliances"]),
                training_houses=tuple(d["training_houses"]),
                seen_tests=tuple(d["seen_tests"]),
                unseen_tests=tuple(d.get("unseen_tests", ())),
                interval=int(d.get("interval", 10)),
                train_window=int(d.get("train_window", 14 * 86_400)),
                test_window=int(d.get("test_window", 14 * 86_400)),
                metrics=tuple(m.upper() for m in d.get("metrics", ("F1", "MAE"))),
                thresholds={k: float(v) for k, v in d.get("thresholds", {}).items()},
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"invalid experiment config: {exc!r}") from None
        config.validate()
        return config

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "algorithms": [a.to_dict() for a in self.algorithms],
            "appliances": list(self.appliances),
            "training_houses": list(self.training_houses),
            "seen_tests": list(self.seen_tests),
            "unseen_tests": list(self.unseen_tests),
            "interval": self.interval,
            "train_window": self.train_window,
            "test_window": self.test_window,
            "metrics": list(self.metrics),
            "thresholds": dict(self.thresholds),
            "seed": self.seed,
        }

    def validate(self) -> None:
        def no_dupes(name, items):
            if len(set(items)) != len(items):
                raise ValidationError(f"{name} contains duplicates: {list(items)}")

        for name in ("appliances", "training_houses", "seen_tests", "unseen_tests"):
            no_dupes(name, getattr(self, name))
        no_dupes("algorithm ids", [a.id for a in self.algorithms])
        if not self.algorithms:
            raise ValidationError("no algorithms configured")
        if not self.appliances:
            raise ValidationError("no appliances configured")
        if not self.training_houses:
            raise ValidationError("no training houses configured")
        if not self.seen_tests:
            raise ValidationError("at least one seen test is required")
        if not set(self.seen_tests) <= set(self.training_houses):
            raise ValidationError("seen tests must be training houses")
        overlap = set(self.unseen_tests) & set(self.training_houses)
        if overlap:
            raise ValidationError(f"unseen houses overlap the training set: {sorted(overlap)}")
        unknown = [m for m in self.metrics if m not in METRIC_IDS]
        if unknown or not self.metrics:
            raise ValidationError(f"unknown or missing metrics: {unknown}")
        if self.interval <= 0:
            raise ValidationError("interval must be > 0")
        for name in ("train_window", "test_window"):
            w = getattr(self, name)
            if w < self.interval or w % self.interval:
                raise ValidationError(f"{name} must be a positive multiple of the interval")
        for a in self.algorithms:
            make_disaggregator(a.type, **a.params)

    @property
    def gr(self) -> GeneralisationRatio:
        return GeneralisationRatio(len(self.seen_tests), len(self.unseen_tests))


@dataclass(frozen=True)
class EvaluationResult:
    algorithm_id: str
    appliance_id: str
    house_id: str
    role: str
    confusion: ConfusionCounts
    metrics: Mapping[str, MetricValue | None]

    def to_dict(self) -> dict:
        return {
            "algorithm_id": self.algorithm_id,
            "appliance_id": self.appliance_id,
            "house_id": self.house_id,
            "role": self.role,
            "confusion": {
                "tp": self.confusion.tp,
                "fp": self.confusion.fp,
                "tn": self.confusion.tn,
                "fn": self.confusion.fn,
            },
            "metrics": {
                k: None if v is None else {"value": v.value, "degenerate": v.degenerate}
                for k, v in self.metrics.items()
            },
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvaluationResult":
        return cls(
            d["algorithm_id"],
            d["appliance_id"],
            d["house_id"],
            d["role"],
            ConfusionCounts(**d["confusion"]),
            {
                k: None if v is None else MetricValue(k, v["value"], metric_kind(k), v["degenerate"])
                for k, v in d["metrics"].items()
            },
        )


@dataclass(frozen=True)
class ScoreRow:
    algorithm: str
    appliance: str
    metric: str
    house_id: str
    role: str
    value: float | None


@dataclass
class ExperimentRun:
    config: ExperimentConfig | None
    evaluations: list[EvaluationResult]
    reports: list[TransferReport]
    skipped: list[dict]
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "config": None if self.config is None else self.config.to_dict(),
            "evaluations": [e.to_dict() for e in self.evaluations],
            "reports": [r.to_dict() for r in self.reports],
            "skipped": self.skipped,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentRun":
        return cls(
            config=None if d.get("config") is None else ExperimentConfig.from_dict(d["config"]),
            evaluations=[EvaluationResult.from_dict(e) for e in d.get("evaluations", [])],
            reports=[TransferReport.from_dict(r) for r in d["reports"]],
            skipped=list(d.get("skipped", [])),
            provenance=dict(d.get("provenance", {})),
        )


# --------------------------------------------------------------------------
# report assembly (shared by `run` and `score`)


def assemble_reports(rows: Iterable[ScoreRow], gr: GeneralisationRatio | None = None):
    """Group per-house scores into transfer reports.

    One report is built per (algorithm, appliance, metric, seen house); with
    several seen houses each report's MGL is relative to its own seen house
    and no aggregate MGL is produced. Groups whose G-loss is undefined (seen
    score of 0 or a missing value) land in the returned ``skipped`` list with
    the reason and the AUH/EUH where it can be computed.
    """
    groups: dict[tuple, dict[str, dict[str, float | None]]] = defaultdict(lambda: {SEEN: {}, UNSEEN: {}})
    for r in rows:
        if r.role not in (SEEN, UNSEEN):
            raise ValidationError(f"role must be 'seen' or 'unseen', got {r.role!r}")
        bucket = groups[(r.algorithm, r.appliance, r.metric.upper())][r.role]
        if r.house_id in bucket:
            raise ValidationError(f"duplicate {r.role} score for {r.algorithm}/{r.appliance}/{r.metric}/{r.house_id}")
        bucket[r.house_id] = r.value

    reports, skipped = [], []
    for key in sorted(groups):
        algorithm, appliance, metric = key
        seen, unseen = groups[key][SEEN], groups[key][UNSEEN]
        if not seen:
            raise ValidationError(f"no seen score for {algorithm}/{appliance}/{metric}")
        group_gr = gr or GeneralisationRatio(len(seen), len(unseen))
        kind = metric_kind(metric)
        unseen_items = sorted(unseen.items())
        mean_unseen = None
        if unseen_items and all(v is not None for _, v in unseen_items):
            mean_unseen = sum(sorted(v for _, v in unseen_items)) / len(unseen_items)
        for seen_house in sorted(seen):
            seen_value = seen[seen_house]
            reason = None
            if seen_value is None:
                reason = "seen score undefined"
            elif any(v is None for _, v in unseen_items):
                reason = "unseen score undefined for " + ", ".join(h for h, v in unseen_items if v is None)
            else:
                try:
                    reports.append(
                        build_report(
                            SeenScore(metric, seen_value, seen_house),
                            unseen_items,
                            kind,
                            algorithm_id=algorithm,
                            appliance_id=appliance,
                            gr=group_gr,
                        )
                    )
                except DomainError as exc:
                    reason = f"G-loss undefined: {exc}"
            if reason:
                skipped.append(
                    {
                        "algorithm_id": algorithm,
                        "appliance_id": appliance,
                        "metric_id": metric,
                        "kind": kind.value,
                        "seen_house": seen_house,
                        "seen_value": seen_value,
                        "auh_or_euh": mean_unseen,
                        "gr": str(group_gr),
                        "reason": reason,
                    }
                )
    return reports, skipped


def read_results_csv(path) -> list[ScoreRow]:
    """Parse a per-house results CSV (``algorithm,appliance,metric,house_id,role,value``)."""
    rows = []
    try:
        fh = Path(path).open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RESULTS_CSV_HEADER:
            raise ParseError(f"header must be {','.join(RESULTS_CSV_HEADER)}", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RESULTS_CSV_HEADER):
                raise ParseError(f"expected {len(RESULTS_CSV_HEADER)} fields, got {len(row)}", lineno)
            alg, app, metric, house, role, value = (c.strip() for c in row)
            if metric.upper() not in METRIC_IDS:
                raise ParseError(f"unknown metric {metric!r}", lineno)
            try:
                v = None if value == "" else float(value)
            except ValueError:
                raise ParseError(f"cannot parse value {value!r}", lineno) from None
            rows.append(ScoreRow(alg, app, metric.upper(), house, role.lower(), v))
    if not rows:
        raise ParseError("no result rows")
    return rows


def score(rows: Iterable[ScoreRow]) -> ExperimentRun:
    reports, skipped = assemble_reports(rows)
    return ExperimentRun(None, [], reports, skipped, {"tool_version": __version__, "notes": [INDEPENDENCE_NOTE]})


# --------------------------------------------------------------------------
# running


def _load_houses(config: ExperimentConfig, data_root: Path) -> dict[str, HouseholdRecord]:
    houses = {}
    refs = sorted(set(config.training_houses) | set(config.seen_tests) | set(config.unseen_tests))
    for ref in refs:
        try:
            houses[ref] = load_household(data_root / ref, config.interval, config.thresholds)
        except (NilmTransferError, OSError, KeyError) as exc:
            raise DataError(f"house {ref}: {exc}") from exc
    return houses


def _windows(config: ExperimentConfig, house: HouseholdRecord, training: bool) -> dict:
    s0 = house.aggregate.start
    end = house.aggregate.end
    t_train = (s0, s0 + config.train_window)
    t_test = (t_train[1], t_train[1] + config.test_window)
    if not training and t_test[1] > end:
        t_test = (s0, s0 + config.test_window)
    if t_test[1] > end:
        raise DataError(
            f"house {house.house_id}: needs {(t_test[1] - s0)} s of data, has {end - s0} s"
        )
    out = {"test": list(t_test)}
    if training:
        out["train"] = list(t_train)
    return out


def evaluate(model, house: HouseholdRecord, appliances, metrics, algorithm_id, role) -> list[EvaluationResult]:
    output = model.disaggregate(house.aggregate)
    results = []
    for app_id in appliances:
        truth = house.appliance(app_id)
        pred = output[app_id]
        counts = confusion(threshold_states(pred.values, truth.on_threshold), derive_states(truth))
        values = {}
        for m in metrics:
            try:
                values[m] = compute(m, counts=counts, pred=pred, truth=truth.series)
            except (DegenerateError, EmptyInputError) as exc:
                log.warning("%s/%s/%s on %s undefined: %s", algorithm_id, app_id, m, house.house_id, exc)
                values[m] = None
        results.append(EvaluationResult(algorithm_id, app_id, house.house_id, role, counts, values))
    return results


def run_experiment(
    config: ExperimentConfig, data_root, houses: Mapping[str, HouseholdRecord] | None = None
) -> ExperimentRun:
    """Train every algorithm on the training houses and score it on seen and unseen houses."""
    config.validate()
    if houses is None:
        houses = _load_houses(config, Path(data_root))
    for ref in set(config.training_houses) | set(config.unseen_tests):
        missing = [a for a in config.appliances if a not in houses[ref].appliance_ids]
        if missing:
            raise DataError(f"house {ref}: missing appliances {missing}")

    windows = {}
    for ref in sorted(houses):
        windows[ref] = _windows(config, houses[ref], ref in config.training_houses)
    train_set = [houses[r].window(*windows[r]["train"]) for r in sorted(config.training_houses)]
    tests = [(r, SEEN) for r in sorted(config.seen_tests)] + [(r, UNSEEN) for r in sorted(config.unseen_tests)]

    evaluations = []
    for alg in config.algorithms:
        log.info("training %s on %s", alg.id, [h.house_id for h in train_set])
        model = make_disaggregator(alg.type, **alg.params).train(train_set, list(config.appliances), config.seed)
        for ref, role in tests:
            test_house = houses[ref].window(*windows[ref]["test"])
            evaluations.extend(evaluate(model, test_house, config.appliances, config.metrics, alg.id, role))

    rows = [
        ScoreRow(e.algorithm_id, e.appliance_id, m, e.house_id, e.role, None if v is None else v.value)
        for e in evaluations
        for m, v in e.metrics.items()
    ]
    reports, skipped = assemble_reports(rows, gr=config.gr)
    provenance = {
        "tool_version": __version__,
        "windows": windows,
        "interval": config.interval,
        "notes": [
            INDEPENDENCE_NOTE,
            f"all houses resampled to {config.interval} s",
            "test windows aligned by duration only",
        ],
    }
    return ExperimentRun(config, evaluations, reports, skipped, provenance)


# --------------------------------------------------------------------------
# emission


def to_json(run: ExperimentRun) -> str:
    return json.dumps(run.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _row_entries(reports, skipped):
    """(algorithm, appliance, seen_house) -> metric -> (seen, unseen mean, mgl, kind)."""
    table: dict[tuple, dict[str, tuple]] = defaultdict(dict)
    for r in reports:
        table[(r.algorithm_id, r.appliance_id, r.seen.house_id)][r.metric_id] = (
            r.seen.value,
            r.auh_or_euh,
            r.mgl,
            r.kind,
        )
    for s in skipped:
        table[(s["algorithm_id"], s["appliance_id"], s["seen_house"])][s["metric_id"]] = (
            s["seen_value"],
            s["auh_or_euh"],
            None,
            MetricKind(s["kind"]),
        )
    return table


def render_case_table(reports: Sequence[TransferReport], skipped: Sequence[dict] = ()) -> str:
    """Per-appliance table: ``<metric>_s | AUH/EUH | MGL`` for each metric, one row per algorithm."""
    table = _row_entries(reports, skipped)
    metrics = []
    for entry in table.values():
        for m in entry:
            if m not in metrics:
                metrics.append(m)
    metrics.sort(key=lambda m: (metric_kind(m) is MetricKind.REGRESSION, METRIC_IDS.index(m)))
    multi_seen = len({k[2] for k in table}) > 1
    lines = []
    for appliance in sorted({k[1] for k in table}):
        header = ["Algorithm"] + (["Seen house"] if multi_seen else [])
        for m in metrics:
            unseen = "AUH" if m in CLASSIFICATION_METRICS else "EUH"
            header += [f"{m}_s", unseen, "MGL [%]"]
        rows = []
        for key in sorted(k for k in table if k[1] == appliance):
            entry = table[key]
            row = [key[0]] + ([key[2]] if multi_seen else [])
            for m in metrics:
                seen, mean_u, loss, _ = entry.get(m, (None, None, None, None))
                row += [format_value(seen), format_value(mean_u), format_percent(loss).replace(" %", "")]
            rows.append(row)
        lines.append(f"Appliance: {appliance}")
        lines.extend(_grid(header, rows))
        lines.append("")
    return "\n".join(lines)


def render_transfer_summary(reports: Sequence[TransferReport]) -> str:
    """Table with columns seen score | AUH/EUH | MGL | GR (+ MGL from rounded inputs)."""
    header = ["Algorithm", "Appliance", "Seen", "Unseen houses", "MGL", "GR", "MGL (rounded inputs)"]
    rows = []
    for r in sorted(reports, key=lambda r: (r.algorithm_id, r.appliance_id, r.metric_id, r.seen.house_id)):
        rows.append(
            [
                r.algorithm_id,
                r.appliance_id,
                f"{r.metric_id} = {format_value(r.seen.value)}",
                "-" if r.auh_or_euh is None else f"{r.unseen_label} = {format_value(r.auh_or_euh)}",
                format_percent(r.mgl),
                str(r.gr),
                format_percent(r.mgl_from_rounded),
            ]
        )
    return "\n".join(_grid(header, rows))


def _grid(header, rows) -> list[str]:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    fmt = " | ".join("{:<%d}" % w for w in widths)
    out = [fmt.format(*header), "-+-".join("-" * w for w in widths)]
    out.extend(fmt.format(*map(str, r)) for r in rows)
    return out


def render_table(run: ExperimentRun) -> str:
    parts = []
    if run.config is not None:
        parts.append(f"Experiment {run.config.experiment_id}  GR {run.config.gr}")
        parts.append("")
    parts.append(render_case_table(run.reports, run.skipped))
    parts.append(render_transfer_summary(run.reports))
    if run.skipped:
        parts.append("")
        parts.append("Not scored:")
        for s in run.skipped:
            parts.append(f"  {s['algorithm_id']}/{s['appliance_id']}/{s['metric_id']} ({s['seen_house']}): {s['reason']}")
    return "\n".join(parts) + "\n"


def emit_report(run: ExperimentRun, format: str = "json") -> str:
    if format == "json":
        return to_json(run)
    if format == "table":
        return render_table(run)
    raise ValueError(f"unknown format {format!r}")


def load_run(path) -> ExperimentRun:
    try:
        return ExperimentRun.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: not a stored run ({exc!r})") from None
