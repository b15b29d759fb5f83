"""Disaggregator interface and desk-scale baselines.

A disaggregator is trained on a list of households and returns a frozen
:class:`TrainedModel`; ``model.disaggregate(aggregate)`` yields one estimated
power series per appliance. Any third-party algorithm can be scored by the
runner once it implements :class:`Disaggregator`.

Baselines
---------
``co``
    Combinatorial optimisation: per-timestep exhaustive search over learned
    appliance power levels.
``edge_match``
    Hart-style step detection pairing rising and falling edges with
    per-appliance ON power.
``always_off`` / ``mean``
    Trivial references.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar, Mapping, Sequence

import numpy as np

from .errors import CapacityError, ConfigurationError, DomainError, StateError
from .timeseries import DEFAULT_ON_THRESHOLD, HouseholdRecord, PowerSeries

DEFAULT_MAX_COMBINATIONS = 100_000


@dataclass(frozen=True)
class ApplianceModel:
    appliance_id: str
    states: tuple[float, ...]
    on_threshold: float = DEFAULT_ON_THRESHOLD

    def __post_init__(self):
        states = tuple(float(s) for s in self.states)
        if len(states) < 2:
            raise DomainError(f"{self.appliance_id}: at least two states are required")
        if states[0] != 0.0:
            raise DomainError(f"{self.appliance_id}: first state must be 0 W (OFF)")
        if any(b <= a for a, b in zip(states, states[1:])):
            raise DomainError(f"{self.appliance_id}: states must be strictly ascending")
        object.__setattr__(self, "states", states)


@dataclass(frozen=True)
class DisaggregationOutput:
    estimates: Mapping[str, PowerSeries]

    def __getitem__(self, appliance_id: str) -> PowerSeries:
        return self.estimates[appliance_id]

    def __iter__(self):
        return iter(self.estimates)


# --------------------------------------------------------------------------
# combinatorial optimisation


@dataclass(frozen=True)
class COSolution:
    indices: tuple[int, ...]
    levels: tuple[float, ...]
    residual: float

    @property
    def total(self) -> float:
        return float(sum(self.levels))


class _COTable:
    """All state combinations, ordered by total power and then tie-break preference."""

    def __init__(self, states: Sequence[Sequence[float]], max_combinations: int):
        if not states:
            raise DomainError("at least one appliance is required")
        for s in states:
            if len(s) < 2:
                raise DomainError("every appliance needs at least two states")
        count = int(np.prod([len(s) for s in states], dtype=np.float64))
        if count > max_combinations:
            raise CapacityError(
                f"{count} state combinations exceed the limit of {max_combinations}; "
                "reduce the number of states per appliance"
            )
        levels = [np.asarray(s, dtype=float) for s in states]
        idx = np.array(list(itertools.product(*[range(len(s)) for s in states])), dtype=np.int64)
        totals = np.zeros(len(idx))
        for j, lv in enumerate(levels):
            totals = totals + lv[idx[:, j]]
        # ascending total; among equal totals the lexicographically greatest
        # index tuple first, so earlier appliances take the higher state
        order = np.lexsort(tuple(-idx[:, j] for j in reversed(range(idx.shape[1]))) + (totals,))
        idx, totals = idx[order], totals[order]
        first = np.ones(len(totals), dtype=bool)
        first[1:] = totals[1:] != totals[:-1]
        self.levels = levels
        self.uniq_totals = totals[first]
        self.uniq_idx = idx[first]

    def solve(self, y: np.ndarray) -> np.ndarray:
        """Row ``t`` holds the chosen state index per appliance for ``y[t]``."""
        u = self.uniq_totals
        hi = np.clip(np.searchsorted(u, y, side="left"), 0, len(u) - 1)
        lo = np.clip(hi - 1, 0, len(u) - 1)
        pick = np.where(np.abs(y - u[hi]) < np.abs(y - u[lo]), hi, lo)
        return self.uniq_idx[pick]


def co_solve(
    states: Sequence[Sequence[float]], y: float, max_combinations: int = DEFAULT_MAX_COMBINATIONS
) -> COSolution:
    """State assignment minimising ``|y - sum of levels|``.

    Ties go to the lower total power, then to the assignment where earlier
    appliances hold higher state indices.
    """
    table = _COTable(states, max_combinations)
    row = table.solve(np.array([float(y)]))[0]
    levels = tuple(float(table.levels[j][i]) for j, i in enumerate(row))
    return COSolution(tuple(int(i) for i in row), levels, abs(float(y) - float(np.sum(levels))))


def kmeans_1d(x: np.ndarray, k: int, max_iter: int = 100) -> tuple[float, ...]:
    """1-D k-means with the first centre pinned at 0 W.

    Returns the sorted distinct non-empty centres, always starting with 0.
    """
    x = np.asarray(x, dtype=float)
    x = x[~np.isnan(x)]
    positive = x[x > 0]
    if positive.size == 0:
        return (0.0,)
    qs = (np.arange(1, k) - 0.5) / (k - 1)
    centres = np.concatenate([[0.0], np.quantile(positive, qs)])
    for _ in range(max_iter):
        label = np.argmin(np.abs(x[:, None] - centres[None, :]), axis=1)
        new = centres.copy()
        for j in range(1, k):
            members = x[label == j]
            if members.size:
                new[j] = members.mean()
        if np.array_equal(new, centres):
            break
        centres = new
    label = np.argmin(np.abs(x[:, None] - centres[None, :]), axis=1)
    used = sorted({0.0} | {float(centres[j]) for j in np.unique(label) if j > 0 and centres[j] > 0})
    return tuple(used)


# --------------------------------------------------------------------------
# model and disaggregator plumbing


_MODEL_TYPES: dict[str, type["TrainedModel"]] = {}


@dataclass(frozen=True)
class TrainedModel:
    type_name: ClassVar[str] = ""

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.type_name:
            _MODEL_TYPES[cls.type_name] = cls

    @property
    def appliance_ids(self) -> list[str]:
        raise NotImplementedError

    def _estimate(self, y: np.ndarray) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def disaggregate(self, aggregate: PowerSeries) -> DisaggregationOutput:
        y = aggregate.values
        gap = np.isnan(y)
        with np.errstate(invalid="ignore"):
            raw = self._estimate(y)
        out = {}
        for app_id in self.appliance_ids:
            est = np.maximum(np.asarray(raw[app_id], dtype=float), 0.0)
            est[gap] = np.nan
            out[app_id] = aggregate.with_values(est)
        return DisaggregationOutput(out)

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"type": self.type_name, **self.params()}

    @staticmethod
    def from_dict(d: Mapping) -> "TrainedModel":
        d = dict(d)
        try:
            cls = _MODEL_TYPES[d.pop("type")]
        except KeyError:
            raise ConfigurationError(f"unknown model type in {d!r}") from None
        return cls._from_params(d)


@dataclass(frozen=True)
class COModel(TrainedModel):
    type_name: ClassVar[str] = "co"
    appliances: tuple[ApplianceModel, ...]
    max_combinations: int = DEFAULT_MAX_COMBINATIONS

    @property
    def appliance_ids(self):
        return [a.appliance_id for a in self.appliances]

    def _estimate(self, y):
        table = _COTable([a.states for a in self.appliances], self.max_combinations)
        chosen = table.solve(y)
        return {
            a.appliance_id: table.levels[j][chosen[:, j]] for j, a in enumerate(self.appliances)
        }

    def params(self):
        return {
            "appliances": [
                {"appliance_id": a.appliance_id, "states": list(a.states), "on_threshold": a.on_threshold}
                for a in self.appliances
            ],
            "max_combinations": self.max_combinations,
        }

    @classmethod
    def _from_params(cls, d):
        return cls(tuple(ApplianceModel(**a) for a in d["appliances"]), d.get("max_combinations", DEFAULT_MAX_COMBINATIONS))


@dataclass(frozen=True)
class EdgeMatchModel(TrainedModel):
    type_name: ClassVar[str] = "edge_match"
    on_power: tuple[tuple[str, float], ...]
    edge_threshold: float = 30.0
    tolerance: float = 20.0

    @property
    def appliance_ids(self):
        return [a for a, _ in self.on_power]

    def _estimate(self, y):
        return edge_match_values(y, self.on_power, self.edge_threshold, self.tolerance)

    def params(self):
        return {
            "on_power": {a: p for a, p in self.on_power},
            "edge_threshold": self.edge_threshold,
            "tolerance": self.tolerance,
        }

    @classmethod
    def _from_params(cls, d):
        return cls(tuple(d["on_power"].items()), d["edge_threshold"], d["tolerance"])


@dataclass(frozen=True)
class AlwaysOffModel(TrainedModel):
    type_name: ClassVar[str] = "always_off"
    appliances: tuple[str, ...]

    @property
    def appliance_ids(self):
        return list(self.appliances)

    def _estimate(self, y):
        return {a: np.zeros_like(y) for a in self.appliances}

    def params(self):
        return {"appliances": list(self.appliances)}

    @classmethod
    def _from_params(cls, d):
        return cls(tuple(d["appliances"]))


@dataclass(frozen=True)
class MeanModel(TrainedModel):
    type_name: ClassVar[str] = "mean"
    means: tuple[tuple[str, float], ...]

    @property
    def appliance_ids(self):
        return [a for a, _ in self.means]

    def _estimate(self, y):
        return {a: np.full_like(y, m) for a, m in self.means}

    def params(self):
        return {"means": {a: m for a, m in self.means}}

    @classmethod
    def _from_params(cls, d):
        return cls(tuple(d["means"].items()))


def edge_match_values(
    y: np.ndarray, on_power: Sequence[tuple[str, float]], edge_threshold: float = 30.0, tolerance: float = 20.0
) -> dict[str, np.ndarray]:
    """Assign aggregate steps to appliances by their ON power.

    A rising step within ``tolerance`` of an OFF appliance's ON power turns it
    on (closest match wins); a falling step of matching size turns the closest
    ON appliance off. Unmatched steps are ignored and an appliance left on
    stays on until the end of the series.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    est = {a: np.zeros(n) for a, _ in on_power}
    delta = np.diff(y)
    with np.errstate(invalid="ignore"):
        edges = np.flatnonzero(np.abs(delta) >= edge_threshold)
    on_since: dict[str, int] = {}
    powers = list(on_power)
    for i in edges.tolist():
        step = float(delta[i])
        size = abs(step)
        if step > 0:
            pool = [(abs(size - p), k) for k, (a, p) in enumerate(powers) if a not in on_since]
        else:
            pool = [(abs(size - p), k) for k, (a, p) in enumerate(powers) if a in on_since]
        pool = [c for c in pool if c[0] <= tolerance]
        if not pool:
            continue
        app, power = powers[min(pool)[1]]
        if step > 0:
            on_since[app] = i + 1
        else:
            est[app][on_since.pop(app) : i + 1] = power
    for app, start in on_since.items():
        est[app][start:] = dict(powers)[app]
    return est


class Disaggregator:
    """Base class: subclasses implement :meth:`train` returning a :class:`TrainedModel`."""

    name: ClassVar[str] = ""

    def train(self, houses: Sequence[HouseholdRecord], appliances: Sequence[str], seed: int = 0) -> TrainedModel:
        raise NotImplementedError

    @staticmethod
    def _training_data(houses, appliances):
        if not houses:
            raise ConfigurationError("no training houses")
        data = {}
        for app_id in appliances:
            chunks, threshold = [], None
            for h in houses:
                try:
                    trace = h.appliance(app_id)
                except KeyError:
                    raise ConfigurationError(f"appliance {app_id!r} missing from training house {h.house_id}") from None
                threshold = trace.on_threshold if threshold is None else threshold
                v = trace.series.values
                chunks.append(v[~np.isnan(v)])
            values = np.concatenate(chunks)
            if values.size == 0:
                raise ConfigurationError(f"appliance {app_id!r} has no training data")
            data[app_id] = (values, threshold)
        return data


@dataclass
class CO(Disaggregator):
    name: ClassVar[str] = "co"
    k: int = 3
    max_combinations: int = DEFAULT_MAX_COMBINATIONS

    def train(self, houses, appliances, seed=0):
        if self.k < 2:
            raise ConfigurationError("CO needs k >= 2 states per appliance")
        models = []
        for app_id, (values, threshold) in self._training_data(houses, appliances).items():
            states = kmeans_1d(values, self.k)
            if len(states) < 2:
                states = (0.0, float(threshold))
            models.append(ApplianceModel(app_id, states, threshold))
        model = COModel(tuple(models), self.max_combinations)
        _COTable([a.states for a in model.appliances], self.max_combinations)
        return model


@dataclass
class EdgeMatch(Disaggregator):
    name: ClassVar[str] = "edge_match"
    edge_threshold: float = 30.0
    tolerance: float = 20.0

    def train(self, houses, appliances, seed=0):
        on_power = []
        for app_id, (values, threshold) in self._training_data(houses, appliances).items():
            on = values[values >= threshold]
            on_power.append((app_id, float(np.median(on)) if on.size else float(threshold)))
        return EdgeMatchModel(tuple(on_power), float(self.edge_threshold), float(self.tolerance))


@dataclass
class AlwaysOff(Disaggregator):
    name: ClassVar[str] = "always_off"

    def train(self, houses, appliances, seed=0):
        self._training_data(houses, appliances)
        return AlwaysOffModel(tuple(appliances))


@dataclass
class MeanPredictor(Disaggregator):
    name: ClassVar[str] = "mean"

    def train(self, houses, appliances, seed=0):
        data = self._training_data(houses, appliances)
        return MeanModel(tuple((a, float(np.mean(v))) for a, (v, _) in data.items()))


ALGORITHMS: dict[str, type[Disaggregator]] = {
    cls.name: cls for cls in (CO, EdgeMatch, AlwaysOff, MeanPredictor)
}


def make_disaggregator(kind: str, **params) -> Disaggregator:
    try:
        cls = ALGORITHMS[kind]
    except KeyError:
        raise ConfigurationError(f"unknown algorithm {kind!r}; choose from {sorted(ALGORITHMS)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {kind}: {exc}") from None


def train(disaggregator: Disaggregator, training_houses, appliances, seed: int = 0) -> TrainedModel:
    return disaggregator.train(list(training_houses), list(appliances), seed)


def disaggregate(model, aggregate: PowerSeries) -> DisaggregationOutput:
    if not isinstance(model, TrainedModel):
        raise StateError(f"expected a trained model, got {type(model).__name__}; call train() first")
    return model.disaggregate(aggregate)


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path) -> TrainedModel:
    return TrainedModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
