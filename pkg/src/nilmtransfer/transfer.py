"""Transferability metrics: generalisation ratio, generalisation loss, mean
generalisation loss and the accuracy/error on unseen houses.

All arithmetic runs at full float precision. Rendered strings are rounded
half-up to two decimals. Reports also carry ``mgl_from_rounded``, the MGL
recomputed from the two-decimal seen score and AUH/EUH, which is the
convention used by published summary tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

from .errors import DomainError, EmptyInputError
from .metrics import MetricKind, metric_kind

INDEPENDENCE_NOTE = "houses are assumed to be independent observations; not verified"


def round_half_up(x: float, places: int = 2) -> float:
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP))


def format_value(x: float | None, places: int = 2) -> str:
    if x is None:
        return "n/a"
    return f"{Decimal(repr(float(x))).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)}"


def format_percent(x: float | None) -> str:
    if x is None:
        return "n/a"
    text = f"{format_value(x)} %"
    if round_half_up(x) < 0:
        text += " (gain)"
    return text


# --------------------------------------------------------------------------
# scalar metrics


def g_loss_classification(acc_s: float, acc_u: float) -> float:
    """Relative accuracy drop on an unseen house, in percent.

    Negative when the unseen house scores higher than the seen one.
    """
    if not acc_s > 0:
        raise DomainError(f"G-loss needs a positive seen accuracy, got {acc_s!r}")
    if acc_s > 1 or not 0 <= acc_u <= 1:
        raise DomainError(f"accuracies must lie in [0, 1], got seen={acc_s!r} unseen={acc_u!r}")
    return 100.0 * (1.0 - acc_u / acc_s)


def g_loss_regression(err_s: float, err_u: float) -> float:
    """Relative error increase on an unseen house, in percent."""
    if not err_s > 0:
        raise DomainError(f"G-loss needs a positive seen error, got {err_s!r}")
    if not err_u >= 0 or not math.isfinite(err_u):
        raise DomainError(f"unseen error must be finite and >= 0, got {err_u!r}")
    return 100.0 * (err_u / err_s - 1.0)


def g_loss(kind: MetricKind, seen: float, unseen: float) -> float:
    if MetricKind(kind) is MetricKind.CLASSIFICATION:
        return g_loss_classification(seen, unseen)
    return g_loss_regression(seen, unseen)


def _mean(values: Sequence[float], what: str) -> float:
    values = [float(v) for v in values]
    if not values:
        raise EmptyInputError(f"{what} needs at least one unseen house")
    if len(values) == 1:
        return values[0]
    return math.fsum(values) / len(values)


def mgl(g_losses: Iterable[float]) -> float:
    return _mean(list(g_losses), "MGL")


def auh(values: Iterable[float]) -> float:
    values = list(values)
    if any(not 0 <= v <= 1 for v in values):
        raise DomainError("AUH expects accuracies in [0, 1]")
    return _mean(values, "AUH")


def euh(values: Iterable[float]) -> float:
    values = list(values)
    if any(not v >= 0 for v in values):
        raise DomainError("EUH expects non-negative errors")
    return _mean(values, "EUH")


@dataclass(frozen=True, order=True)
class GeneralisationRatio:
    seen_tests: int
    unseen_tests: int

    def __post_init__(self):
        if self.seen_tests < 0 or self.unseen_tests < 0:
            raise DomainError("test counts must be non-negative")

    def __str__(self) -> str:
        return f"{self.seen_tests}:{self.unseen_tests}"

    @classmethod
    def parse(cls, text: str) -> "GeneralisationRatio":
        seen, unseen = text.split(":")
        return cls(int(seen), int(unseen))


def generalisation_ratio(seen: int, unseen: int) -> GeneralisationRatio:
    return GeneralisationRatio(int(seen), int(unseen))


# --------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class SeenScore:
    metric_id: str
    value: float
    house_id: str

    @property
    def kind(self) -> MetricKind:
        return metric_kind(self.metric_id)


@dataclass(frozen=True)
class UnseenScore:
    house_id: str
    value: float
    g_loss: float

    def __post_init__(self):
        if not math.isfinite(self.g_loss):
            raise DomainError("G-loss must be finite")


@dataclass(frozen=True)
class TransferReport:
    """One row of a transferability summary.

    ``auh_or_euh``, ``mgl`` and ``mgl_from_rounded`` are ``None`` when the
    experiment has no unseen test.
    """

    algorithm_id: str
    appliance_id: str
    metric_id: str
    kind: MetricKind
    seen: SeenScore
    unseen: tuple[UnseenScore, ...]
    auh_or_euh: float | None
    mgl: float | None
    mgl_from_rounded: float | None
    gr: GeneralisationRatio
    notes: tuple[str, ...] = field(default=())

    @property
    def unseen_label(self) -> str:
        return "AUH" if self.kind is MetricKind.CLASSIFICATION else "EUH"

    def rendered(self) -> dict:
        return {
            "seen": format_value(self.seen.value),
            self.unseen_label: format_value(self.auh_or_euh),
            "mgl": format_percent(self.mgl),
            "mgl_from_rounded": format_percent(self.mgl_from_rounded),
            "gr": str(self.gr),
            "unseen": {u.house_id: format_percent(u.g_loss) for u in self.unseen},
        }

    def to_dict(self) -> dict:
        return {
            "algorithm_id": self.algorithm_id,
            "appliance_id": self.appliance_id,
            "metric_id": self.metric_id,
            "kind": self.kind.value,
            "seen": {"house_id": self.seen.house_id, "value": self.seen.value},
            "unseen": [
                {"house_id": u.house_id, "value": u.value, "g_loss": u.g_loss} for u in self.unseen
            ],
            "auh_or_euh": self.auh_or_euh,
            "mgl": self.mgl,
            "mgl_from_rounded": self.mgl_from_rounded,
            "gr": str(self.gr),
            "notes": list(self.notes),
            "rendered": self.rendered(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TransferReport":
        return cls(
            algorithm_id=d["algorithm_id"],
            appliance_id=d["appliance_id"],
            metric_id=d["metric_id"],
            kind=MetricKind(d["kind"]),
            seen=SeenScore(d["metric_id"], d["seen"]["value"], d["seen"]["house_id"]),
            unseen=tuple(UnseenScore(u["house_id"], u["value"], u["g_loss"]) for u in d["unseen"]),
            auh_or_euh=d["auh_or_euh"],
            mgl=d["mgl"],
            mgl_from_rounded=d["mgl_from_rounded"],
            gr=GeneralisationRatio.parse(d["gr"]),
            notes=tuple(d.get("notes", ())),
        )


def build_report(
    seen: SeenScore,
    unseen_scores: Mapping[str, float] | Iterable[tuple[str, float]],
    kind: MetricKind | str | None = None,
    *,
    algorithm_id: str = "",
    appliance_id: str = "",
    gr: GeneralisationRatio | None = None,
) -> TransferReport:
    """Assemble a :class:`TransferReport` from a seen score and per-house unseen scores.

    Parameters
    ----------
    seen : SeenScore
        Score on the house the model was trained on.
    unseen_scores : mapping or iterable of (house_id, value)
        Scores on unseen houses. May be empty, in which case the report
        carries no AUH/EUH or MGL.
    kind : MetricKind, optional
        Defaults to the kind of ``seen.metric_id``.
    gr : GeneralisationRatio, optional
        Defaults to ``1:N``. Pass the experiment-wide ratio for M-to-N runs.
    """
    kind = MetricKind(kind) if kind is not None else seen.kind
    items = list(unseen_scores.items() if isinstance(unseen_scores, Mapping) else unseen_scores)
    houses = [h for h, _ in items]
    if len(set(houses)) != len(houses):
        raise DomainError(f"duplicate unseen house ids: {houses}")
    if gr is None:
        gr = GeneralisationRatio(1, len(items))
    elif gr.unseen_tests != len(items):
        raise DomainError(f"GR {gr} does not match {len(items)} unseen scores")

    unseen = tuple(UnseenScore(h, float(v), g_loss(kind, seen.value, float(v))) for h, v in items)
    notes = [INDEPENDENCE_NOTE]
    if not unseen:
        return TransferReport(
            algorithm_id, appliance_id, seen.metric_id, kind, seen, (), None, None, None, gr, tuple(notes)
        )
    values = [u.value for u in unseen]
    mean_unseen = auh(values) if kind is MetricKind.CLASSIFICATION else euh(values)
    mean_loss = mgl(u.g_loss for u in unseen)
    seen_rounded = round_half_up(seen.value)
    # a seen score below 0.005 rounds to zero, which leaves the rounded-input MGL undefined
    mgl_rounded = g_loss(kind, seen_rounded, round_half_up(mean_unseen)) if seen_rounded > 0 else None
    if gr.seen_tests > 1:
        notes.append("M-to-N experiment: MGL is relative to this seen house only")
    if mean_loss < 0:
        notes.append("negative MGL: performance gain on unseen houses")
    return TransferReport(
        algorithm_id,
        appliance_id,
        seen.metric_id,
        kind,
        seen,
        unseen,
        mean_unseen,
        mean_loss,
        mgl_rounded,
        gr,
        tuple(notes),
    )


def check_report(report: TransferReport, rel: float = 1e-9) -> list[str]:
    """Return the list of violated report invariants (empty when consistent)."""
    problems = []
    n = len(report.unseen)
    if report.gr.unseen_tests != n:
        problems.append(f"GR {report.gr} but {n} unseen scores")
    if len({u.house_id for u in report.unseen}) != n:
        problems.append("an unseen house appears more than once")
    if n == 0:
        if report.auh_or_euh is not None or report.mgl is not None:
            problems.append("AUH/EUH or MGL present without unseen houses")
        return problems
    values = [u.value for u in report.unseen]
    mean_v = math.fsum(values) / n
    mean_g = math.fsum(u.g_loss for u in report.unseen) / n
    scale_v = max(1.0, abs(mean_v))
    scale_g = max(1.0, abs(mean_g))
    if abs(report.auh_or_euh - mean_v) > rel * scale_v:
        problems.append("AUH/EUH is not the mean of unseen values")
    if abs(report.mgl - mean_g) > rel * scale_g:
        problems.append("MGL is not the mean of unseen G-losses")
    if not min(values) - rel * scale_v <= report.auh_or_euh <= max(values) + rel * scale_v:
        problems.append("AUH/EUH outside the range of unseen values")
    s = report.seen.value
    if report.kind is MetricKind.CLASSIFICATION:
        identity = 100.0 * (1.0 - report.auh_or_euh / s)
        if any(u.g_loss > 100.0 + 1e-9 for u in report.unseen):
            problems.append("classification G-loss above 100 %")
    else:
        identity = 100.0 * (report.auh_or_euh / s - 1.0)
    if abs(identity - report.mgl) > rel * max(1.0, abs(identity)):
        problems.append("MGL does not match the AUH/EUH identity")
    return problems
