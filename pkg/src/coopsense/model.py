"""Scenario and schedule data model plus the expected-throughput evaluator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .detection import SensingRequirements, coop_sensing_time_hom
from .errors import InvalidScheduleError, ScenarioError

__all__ = [
    "ChannelSpec",
    "Scenario",
    "Job",
    "Schedule",
    "ThroughputReport",
    "capacity",
    "validate_schedule",
    "evaluate_schedule",
    "payoff",
]


def capacity(bandwidth_hz: float, su_snr: float) -> float:
    """Shannon capacity of a channel in bits/s."""
    if not bandwidth_hz > 0:
        raise ScenarioError(f"bandwidth must be positive, got {bandwidth_hz}")
    if su_snr < 0:
        raise ScenarioError(f"SU SNR must be non-negative, got {su_snr}")
    return bandwidth_hz * math.log2(1.0 + su_snr)


@dataclass(frozen=True)
class ChannelSpec:
    bandwidth_hz: float
    occupancy: float
    su_snr: float
    pu_snr: float | tuple[float, ...]
    sampling_hz: float | None = None

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ScenarioError(f"bandwidth_hz must be positive, got {self.bandwidth_hz}")
        if not 0.0 <= self.occupancy <= 1.0:
            raise ScenarioError(f"occupancy must lie in [0, 1], got {self.occupancy}")
        if self.su_snr < 0:
            raise ScenarioError(f"su_snr must be non-negative, got {self.su_snr}")
        if np.ndim(self.pu_snr):
            object.__setattr__(self, "pu_snr", tuple(float(g) for g in self.pu_snr))
        if np.any(np.asarray(self.pu_snr) <= 0):
            raise ScenarioError("pu_snr entries must be positive (linear scale)")
        if self.sampling_hz is not None and not self.sampling_hz > 0:
            raise ScenarioError(f"sampling_hz must be positive, got {self.sampling_hz}")

    @property
    def fs(self) -> float:
        return 2.0 * self.bandwidth_hz if self.sampling_hz is None else self.sampling_hz

    @property
    def capacity(self) -> float:
        return capacity(self.bandwidth_hz, self.su_snr)

    @property
    def weight(self) -> float:
        """Expected capacity C(1-u) the channel offers when it is idle."""
        return self.capacity * (1.0 - self.occupancy)

    @property
    def is_het(self) -> bool:
        return isinstance(self.pu_snr, tuple)


@dataclass(frozen=True)
class Scenario:
    slot_s: float
    channels: tuple[ChannelSpec, ...]
    n_sensors: int
    requirements: SensingRequirements
    noise_power: float = 1e-5
    traffic_p00: float | None = None
    robust: object | None = None
    snr_dist: object | None = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.slot_s > 0:
            raise ScenarioError(f"slot_s must be positive, got {self.slot_s}")
        if len(self.channels) < 1:
            raise ScenarioError("a scenario needs at least one channel")
        if int(self.n_sensors) != self.n_sensors or self.n_sensors < 1:
            raise ScenarioError(f"n_sensors must be a positive integer, got {self.n_sensors}")
        object.__setattr__(self, "n_sensors", int(self.n_sensors))
        for m, ch in enumerate(self.channels):
            if ch.is_het and len(ch.pu_snr) != self.n_sensors:
                raise ScenarioError(
                    f"channel {m}: pu_snr has {len(ch.pu_snr)} entries, expected {self.n_sensors}"
                )

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def is_het(self) -> bool:
        return any(ch.is_het for ch in self.channels)

    @property
    def weights(self) -> np.ndarray:
        return np.array([ch.weight for ch in self.channels])

    @property
    def capacities(self) -> np.ndarray:
        return np.array([ch.capacity for ch in self.channels])

    @property
    def occupancies(self) -> np.ndarray:
        return np.array([ch.occupancy for ch in self.channels])

    @property
    def sampling_rates(self) -> np.ndarray:
        return np.array([ch.fs for ch in self.channels])

    def snr_matrix(self) -> np.ndarray:
        """Detection SNR of every (channel, sensor) pair, shape (M, N)."""
        out = np.empty((self.n_channels, self.n_sensors))
        for m, ch in enumerate(self.channels):
            out[m] = ch.pu_snr
        return out

    def channel_snr(self, m: int) -> float:
        ch = self.channels[m]
        if ch.is_het:
            raise ScenarioError(f"channel {m} has per-sensor SNRs; no single SNR defined")
        return float(ch.pu_snr)

    def tau_table(self, n_max: int | None = None) -> np.ndarray:
        """Homogeneous cooperative sensing times, shape (M, n_max + 1).

        Column 0 is ``inf``: a channel without sensors is never sensed.
        """
        n_max = self.n_sensors if n_max is None else n_max
        out = np.full((self.n_channels, n_max + 1), np.inf)
        for m, ch in enumerate(self.channels):
            g = self.channel_snr(m)
            for n in range(1, n_max + 1):
                out[m, n] = coop_sensing_time_hom(self.requirements, g, n, ch.fs)
        return out

    def with_sensors(self, n: int) -> "Scenario":
        return replace(self, n_sensors=n)

    def with_channels(self, channels: Iterable[ChannelSpec]) -> "Scenario":
        return replace(self, channels=tuple(channels))

    def with_requirements(self, **changes) -> "Scenario":
        return replace(self, requirements=replace(self.requirements, **changes))

    def with_snr_matrix(self, snrs: np.ndarray) -> "Scenario":
        snrs = np.asarray(snrs, dtype=float)
        if snrs.shape[0] != self.n_channels:
            raise ScenarioError(f"SNR matrix has {snrs.shape[0]} rows, expected {self.n_channels}")
        chans = tuple(replace(ch, pu_snr=tuple(row)) for ch, row in zip(self.channels, snrs))
        return replace(self, channels=chans, n_sensors=snrs.shape[1])

    def with_uniform_snr(self, gamma: float) -> "Scenario":
        return replace(self, channels=tuple(replace(ch, pu_snr=float(gamma)) for ch in self.channels))


@dataclass(frozen=True)
class Job:
    channel: int
    sensors: tuple[int, ...]
    start_s: float
    duration_s: float

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(sorted(int(s) for s in self.sensors)))

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s


@dataclass(frozen=True)
class Schedule:
    """Sensing jobs plus the resulting per-channel completion times."""

    jobs: tuple[Job, ...]
    completion: tuple[float, ...]

    @classmethod
    def from_jobs(cls, jobs: Iterable[Job], n_channels: int, slot_s: float) -> "Schedule":
        jobs = tuple(jobs)
        completion = [slot_s] * n_channels
        for job in jobs:
            if 0 <= job.channel < n_channels:
                done = job.end_s if job.end_s <= slot_s else slot_s
                completion[job.channel] = min(completion[job.channel], done)
        return cls(jobs=jobs, completion=tuple(completion))

    @classmethod
    def empty(cls, n_channels: int, slot_s: float) -> "Schedule":
        return cls(jobs=(), completion=(slot_s,) * n_channels)

    def sensed_channels(self) -> list[int]:
        return sorted({job.channel for job in self.jobs})

    def sensors_of(self, channel: int) -> tuple[int, ...]:
        members = set()
        for job in self.jobs:
            if job.channel == channel:
                members.update(job.sensors)
        return tuple(sorted(members))

    def allocation(self, n_channels: int) -> tuple[int, ...]:
        return tuple(len(self.sensors_of(m)) for m in range(n_channels))


@dataclass(frozen=True)
class ThroughputReport:
    total_bps: float
    per_channel_bps: tuple[float, ...]
    strategy_name: str = ""

    def normalized(self, scenario: Scenario) -> float:
        return self.total_bps / float(scenario.weights.sum())


def validate_schedule(scenario: Scenario, schedule: Schedule) -> list[str]:
    """Feasibility violations of ``schedule``, ordered by job index; empty when valid."""
    problems: list[str] = []
    M, N, T = scenario.n_channels, scenario.n_sensors, scenario.slot_s
    jobs = schedule.jobs
    for j, job in enumerate(jobs):
        if not 0 <= job.channel < M:
            problems.append(f"job {j}: channel {job.channel} out of range")
        if not job.sensors:
            problems.append(f"job {j}: empty sensor set")
        bad = [s for s in job.sensors if not 0 <= s < N]
        if bad:
            problems.append(f"job {j}: sensor index out of range {bad}")
        if not (job.start_s >= 0 and job.duration_s >= 0) or not math.isfinite(job.end_s):
            problems.append(f"job {j}: negative or non-finite timing")
        for k in range(j):
            other = jobs[k]
            if other.channel == job.channel and (other.start_s, other.duration_s) != (
                job.start_s,
                job.duration_s,
            ):
                problems.append(f"job {j}: cooperators not synchronized with job {k} on channel {job.channel}")
            shared = set(other.sensors) & set(job.sensors)
            if shared and other.start_s < job.end_s and job.start_s < other.end_s:
                if not (other.channel == job.channel and other.start_s == job.start_s):
                    problems.append(f"job {j}: sensor overlap with job {k} (sensors {sorted(shared)})")
                else:
                    problems.append(f"job {j}: sensor overlap with job {k} (duplicate sensors {sorted(shared)})")
    if len(schedule.completion) != M:
        problems.append(f"schedule: {len(schedule.completion)} completion times for {M} channels")
    else:
        expected = Schedule.from_jobs(jobs, M, T).completion
        for m, (got, want) in enumerate(zip(schedule.completion, expected)):
            if got != want:
                problems.append(f"channel {m}: completion {got} inconsistent with jobs ({want})")
    return problems


def payoff(weight: float, completion: float, slot_s: float) -> float:
    """Expected throughput contribution of one channel, clamped at zero."""
    return max(slot_s - completion, 0.0) * weight / slot_s


def evaluate_schedule(scenario: Scenario, schedule: Schedule, strategy_name: str = "") -> ThroughputReport:
    """Total expected normalized throughput of a valid schedule."""
    problems = validate_schedule(scenario, schedule)
    if problems:
        raise InvalidScheduleError(problems)
    T = scenario.slot_s
    per = tuple(payoff(ch.weight, t_i, T) for ch, t_i in zip(scenario.channels, schedule.completion))
    return ThroughputReport(total_bps=math.fsum(per), per_channel_bps=per, strategy_name=strategy_name)


def throughput_of(scenario: Scenario, completion: Sequence[float]) -> float:
    """Expected throughput for raw completion times (no schedule validation)."""
    T = scenario.slot_s
    return math.fsum(payoff(ch.weight, t, T) for ch, t in zip(scenario.channels, completion))
