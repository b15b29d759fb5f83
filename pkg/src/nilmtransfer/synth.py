"""Deterministic synthetic households.

The aggregate of a generated house is::

    aggregate(t) = max(0, base_load + sum_i appliance_i(t) + noise(t))

with zero-mean Gaussian ``noise``. Every random draw comes from a Philox
(counter-based) generator keyed by the house seed and a CRC32 of the
appliance id, so results do not depend on platform or generation order.
"""

from __future__ import annotations

import enum
import json
import math
import zlib
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DomainError
from .timeseries import DEFAULT_ON_THRESHOLD, ApplianceTrace, HouseholdRecord, PowerSeries

DAY = 86_400
DEFAULT_INTERVAL = 10
DEFAULT_WINDOW = 14 * DAY
NOISE_KEY = "__noise__"


class Pattern(str, enum.Enum):
    CYCLING = "CYCLING"
    PROGRAM = "PROGRAM"
    SPIKE = "SPIKE"


@dataclass(frozen=True)
class ApplianceSpec:
    """Parameters of one synthetic appliance.

    ``CYCLING`` uses ``power``, ``period`` and ``duty``. ``PROGRAM`` runs the
    ``(duration, power)`` ``segments`` in order, ``daily_rate`` times a day on
    average. ``SPIKE`` draws ``burst``-second pulses of ``power`` at
    ``daily_rate``. ``jitter`` is the relative standard deviation applied to
    every power and duration draw.
    """

    appliance_id: str
    pattern: Pattern
    power: float = 0.0
    period: float = 0.0
    duty: float = 0.0
    segments: tuple[tuple[float, float], ...] = ()
    daily_rate: float = 0.0
    burst: float = 0.0
    jitter: float = 0.0
    on_threshold: float = DEFAULT_ON_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "pattern", Pattern(self.pattern))
        object.__setattr__(self, "segments", tuple((float(d), float(p)) for d, p in self.segments))
        name = self.appliance_id
        if self.jitter < 0:
            raise DomainError(f"{name}: jitter must be >= 0")
        if self.on_threshold <= 0:
            raise DomainError(f"{name}: on_threshold must be > 0")
        if self.pattern is Pattern.CYCLING:
            if self.power < 0 or self.period <= 0:
                raise DomainError(f"{name}: CYCLING needs power >= 0 and period > 0")
            if not 0 < self.duty < 1:
                raise DomainError(f"{name}: duty fraction must lie in (0, 1)")
        elif self.pattern is Pattern.PROGRAM:
            if not self.segments:
                raise DomainError(f"{name}: PROGRAM needs at least one segment")
            if any(d <= 0 or p < 0 for d, p in self.segments):
                raise DomainError(f"{name}: segment durations must be > 0 and powers >= 0")
            if self.daily_rate < 0:
                raise DomainError(f"{name}: daily_rate must be >= 0")
        else:
            if self.power < 0 or self.burst <= 0 or self.daily_rate < 0:
                raise DomainError(f"{name}: SPIKE needs power >= 0, burst > 0 and daily_rate >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pattern"] = self.pattern.value
        d["segments"] = [list(s) for s in self.segments]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ApplianceSpec":
        return cls(**d)


@dataclass(frozen=True)
class HouseSpec:
    house_id: str
    appliances: tuple[ApplianceSpec, ...]
    noise_sigma: float = 0.0
    base_load: float = 0.0
    seed: int = 0
    dataset_id: str = "synthetic"

    def __post_init__(self):
        apps = tuple(self.appliances)
        if not apps:
            raise DomainError("a house needs at least one appliance")
        ids = [a.appliance_id for a in apps]
        if len(set(ids)) != len(ids):
            raise DomainError(f"duplicate appliance ids: {ids}")
        if self.noise_sigma < 0 or self.base_load < 0:
            raise DomainError("noise_sigma and base_load must be >= 0")
        object.__setattr__(self, "appliances", apps)

    def to_dict(self) -> dict:
        return {
            "house_id": self.house_id,
            "dataset_id": self.dataset_id,
            "seed": self.seed,
            "noise_sigma": self.noise_sigma,
            "base_load": self.base_load,
            "appliances": [a.to_dict() for a in self.appliances],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HouseSpec":
        d = dict(d)
        d["appliances"] = tuple(ApplianceSpec.from_dict(a) for a in d["appliances"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HouseSpec":
        return cls.from_dict(json.loads(text))


def _rng(seed: int, key: str, *extra: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(key.encode("utf-8")), *extra])
    return np.random.Generator(np.random.Philox(ss))


def _factor(rng: np.random.Generator, jitter: float) -> float:
    return max(0.1, 1.0 + jitter * rng.standard_normal())


def _fill(trace: np.ndarray, t0: float, t1: float, power: float, interval: int) -> None:
    i0 = max(0, math.ceil(t0 / interval))
    i1 = min(trace.size, math.ceil(t1 / interval))
    if i1 > i0:
        np.maximum(trace[i0:i1], power, out=trace[i0:i1])


def appliance_trace(spec: ApplianceSpec, seed: int, n: int, interval: int) -> np.ndarray:
    """Power of one appliance at ``n`` samples spaced ``interval`` seconds apart."""
    rng = _rng(seed, spec.appliance_id)
    trace = np.zeros(n)
    duration = n * interval
    j = spec.jitter
    if spec.pattern is Pattern.CYCLING:
        t = -rng.uniform(0, spec.period) if j > 0 else 0.0
        while t < duration:
            on = spec.duty * spec.period * _factor(rng, j)
            off = (1 - spec.duty) * spec.period * _factor(rng, j)
            _fill(trace, t, t + on, spec.power * _factor(rng, j), interval)
            t += on + off
        return trace
    segments = spec.segments if spec.pattern is Pattern.PROGRAM else ((spec.burst, spec.power),)
    count = rng.poisson(spec.daily_rate * duration / DAY)
    for t in np.sort(rng.uniform(0, duration, size=count)):
        for seg_len, seg_power in segments:
            d = seg_len * _factor(rng, j)
            _fill(trace, t, t + d, seg_power * _factor(rng, j), interval)
            t += d
    return trace


def generate(
    spec: HouseSpec, start: int = 0, duration: int = 2 * DEFAULT_WINDOW, interval: int = DEFAULT_INTERVAL
) -> HouseholdRecord:
    """Realise ``spec`` over ``[start, start + duration)``."""
    if interval <= 0 or duration < interval:
        raise DomainError("duration must cover at least one interval")
    n = int(duration // interval)
    traces = [appliance_trace(a, spec.seed, n, interval) for a in spec.appliances]
    total = np.full(n, float(spec.base_load))
    for tr in traces:
        total = total + tr
    if spec.noise_sigma > 0:
        total = total + spec.noise_sigma * _rng(spec.seed, NOISE_KEY).standard_normal(n)
    aggregate = np.maximum(total, 0.0)
    return HouseholdRecord(
        house_id=spec.house_id,
        dataset_id=spec.dataset_id,
        aggregate=PowerSeries(start, interval, aggregate),
        appliances=tuple(
            ApplianceTrace(a.appliance_id, PowerSeries(start, interval, tr), a.on_threshold)
            for a, tr in zip(spec.appliances, traces)
        ),
        noise_floor=spec.noise_sigma,
    )


def perturb(spec: HouseSpec, scale: float, seed: int, house_id: str | None = None) -> HouseSpec:
    """Scale every power and duration by an independent factor from ``U[1-scale, 1+scale]``.

    Duty fractions and event rates are kept. With ``scale == 0`` only the seed
    (and therefore the realisation) changes.
    """
    if scale < 0:
        raise DomainError(f"perturbation scale must be >= 0, got {scale}")
    rng = _rng(seed, spec.house_id, 1)

    def f(value: float, positive: bool = False) -> float:
        out = value * rng.uniform(1 - scale, 1 + scale) if scale else value
        if out < 0 or (positive and out <= 0):
            raise DomainError(f"perturbation scale {scale} produced a non-positive parameter")
        return out

    apps = []
    for a in spec.appliances:
        apps.append(
            replace(
                a,
                power=f(a.power),
                period=f(a.period, positive=True) if a.pattern is Pattern.CYCLING else a.period,
                burst=f(a.burst, positive=True) if a.pattern is Pattern.SPIKE else a.burst,
                segments=tuple((f(d, positive=True), f(p)) for d, p in a.segments),
            )
        )
    return replace(
        spec,
        house_id=house_id or spec.house_id,
        appliances=tuple(apps),
        base_load=f(spec.base_load),
        seed=seed,
    )


def default_house_spec(house_id: str = "synth_1", seed: int = 0) -> HouseSpec:
    """A small household: fridge, freezer, washing machine and kettle."""
    return HouseSpec(
        house_id=house_id,
        seed=seed,
        base_load=0.0,
        noise_sigma=3.0,
        appliances=(
            ApplianceSpec("fridge", Pattern.CYCLING, power=120.0, period=1800.0, duty=0.35, jitter=0.05),
            ApplianceSpec("freezer", Pattern.CYCLING, power=90.0, period=2700.0, duty=0.4, jitter=0.05),
            ApplianceSpec(
                "washing_machine",
                Pattern.PROGRAM,
                segments=((900.0, 2000.0), (2400.0, 300.0), (600.0, 500.0)),
                daily_rate=0.5,
                jitter=0.05,
            ),
            ApplianceSpec("kettle", Pattern.SPIKE, power=2000.0, burst=150.0, daily_rate=4.0, jitter=0.05),
        ),
    )


def unseen_specs(base: HouseSpec, count: int, scale: float, seed: int = 1) -> list[HouseSpec]:
    """``count`` perturbed copies of ``base`` with ids ``<base>_u1`` ... ``<base>_uN``."""
    return [
        perturb(base, scale, seed=seed * 1000 + k, house_id=f"{base.house_id}_u{k}")
        for k in range(1, count + 1)
    ]


def load_house_specs(path) -> list[HouseSpec]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    items: Iterable[dict] = doc["houses"] if "houses" in doc else [doc]
    return [HouseSpec.from_dict(d) for d in items]
