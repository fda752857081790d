"""Scheduling strategies for sensors with per-channel, per-sensor detection SNRs."""

from __future__ import annotations

import enum
import itertools
import math
from functools import lru_cache
from typing import Sequence

import numpy as np

from .detection import Fusion, coop_sensing_time_hom, subset_sensing_times
from .errors import SizeGuardError
from .model import Job, Scenario, Schedule
from .strategies import best_sequential_subset, ratio_order

__all__ = [
    "HetSeqVariant",
    "HetParVariant",
    "HetSeqParVariant",
    "SubsetTimes",
    "het_sequential",
    "het_parallel",
    "het_seqpar",
    "brute_force_het_parallel",
    "brute_force_het_seqpar",
    "HET_PAR_MAX_SENSORS",
    "HET_SEQPAR_MAX",
]

HET_PAR_MAX_SENSORS = 12
HET_SEQPAR_MAX = (10, 10)


class HetSeqVariant(str, enum.Enum):
    OPT = "opt"
    AVG = "avg"


class HetParVariant(str, enum.Enum):
    DP_OPT = "dp_opt"
    DP_SIM = "dp_sim"
    AVG_GREEDY = "avg_greedy"


class HetSeqParVariant(str, enum.Enum):
    DP_OPT = "dp_opt"
    HEURISTIC = "heuristic"


def _members(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


class SubsetTimes:
    """Cooperative sensing times tau_{m,S}, computed on demand and memoized."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.snr = scenario.snr_matrix()
        self.fs = scenario.sampling_rates
        self.reqs = scenario.requirements
        self._tau = lru_cache(maxsize=None)(self._tau_uncached)

    def _tau_uncached(self, m: int, users: tuple[int, ...]) -> float:
        row = np.zeros((1, self.snr.shape[1]), dtype=bool)
        row[0, list(users)] = True
        return float(subset_sensing_times(self.snr[m], row, self.reqs, self.fs[m])[0])

    def tau(self, m: int, users: Sequence[int]) -> float:
        users = tuple(sorted(users))
        if not users:
            return math.inf
        return self._tau(m, users)

    def table(self, m: int) -> np.ndarray:
        """tau_{m,S} for every user mask S (index 0 is ``inf``)."""
        N = self.snr.shape[1]
        masks = np.arange(1 << N)
        bits = ((masks[:, None] >> np.arange(N)[None, :]) & 1).astype(bool)
        return subset_sensing_times(self.snr[m], bits, self.reqs, self.fs[m])

    def optimal(self, m: int, users: Sequence[int]) -> tuple[tuple[int, ...], float]:
        """Best of all prefixes of ``users`` ranked by SNR on channel m (all of them under OR)."""
        users = sorted(users, key=lambda i: (-self.snr[m, i], i))
        if not users:
            return (), math.inf
        if self.reqs.fusion is Fusion.OR:
            return tuple(sorted(users)), self.tau(m, users)
        best, best_tau = None, math.inf
        for size in range(1, len(users) + 1):
            tau = self.tau(m, users[:size])
            if tau < best_tau:
                best, best_tau = users[:size], tau
        return tuple(sorted(best)), best_tau

    def average_set(self, m: int, users: Sequence[int]) -> tuple[tuple[int, ...], float]:
        """Sensors at or above the mean SNR and the time they would need at that mean."""
        g = self.snr[m, list(users)]
        mean = float(g.mean())
        chosen = tuple(sorted(u for u, x in zip(users, g) if x >= mean * (1.0 - 1e-12)))
        tau = coop_sensing_time_hom(self.reqs, mean, len(chosen), self.fs[m])
        return chosen, tau


def _payoff(weight: float, tau: float, slot_s: float) -> float:
    return weight * max(slot_s - tau, 0.0) / slot_s


# -- sequential -----------------------------------------------------------------


def het_sequential(scenario: Scenario, variant="opt") -> Schedule:
    """One channel at a time, each sensed by its own sensor set.

    ``opt`` uses each channel's optimal sensor subset. ``avg`` uses the sensors
    at or above the channel's mean SNR, plans with the homogeneous time at the
    mean SNR, and then runs each job for the time that set really needs.
    """
    variant = HetSeqVariant(variant)
    M, N, T = scenario.n_channels, scenario.n_sensors, scenario.slot_s
    times = SubsetTimes(scenario)
    w = scenario.weights
    everyone = list(range(N))
    if variant is HetSeqVariant.OPT:
        sets, plan_tau = zip(*(times.optimal(m, everyone) for m in range(M)))
        real_tau = plan_tau
    else:
        sets, plan_tau = zip(*(times.average_set(m, everyone) for m in range(M)))
        real_tau = tuple(times.tau(m, sets[m]) for m in range(M))
    chosen, _ = best_sequential_subset(w, plan_tau, T, range(M))
    rest = [c for c in ratio_order(w, plan_tau, range(M)) if c not in chosen]
    jobs = []
    t = 0.0
    for c in chosen + rest:
        if t >= T:
            break
        jobs.append(Job(c, sets[c], t, real_tau[c]))
        t += real_tau[c]
    return Schedule.from_jobs(jobs, M, T)


# -- parallel ---------------------------------------------------------------------


def _parallel_jobs(scenario: Scenario, sets: Sequence[tuple[int, ...]], times: SubsetTimes) -> Schedule:
    jobs = [Job(m, s, 0.0, times.tau(m, s)) for m, s in enumerate(sets) if s]
    return Schedule.from_jobs(jobs, scenario.n_channels, scenario.slot_s)


def _het_par_dp(scenario: Scenario, times: SubsetTimes) -> list[tuple[int, ...]]:
    M, N, T = scenario.n_channels, scenario.n_sensors, scenario.slot_s
    if N > HET_PAR_MAX_SENSORS:
        raise SizeGuardError(f"het parallel DP needs N <= {HET_PAR_MAX_SENSORS}, got N={N}")
    full = 1 << N
    masks = np.arange(full)
    value = np.full(full, -np.inf)
    value[0] = 0.0
    choices = np.zeros((M, full), dtype=np.int64)
    for m in range(M):
        pay = scenario.weights[m] * np.clip(T - times.table(m), 0.0, None) / T
        pay[0] = 0.0
        new = value.copy()
        pick = np.zeros(full, dtype=np.int64)
        for U in range(1, full):
            base = masks[(masks & U) == 0]
            cand = value[base] + pay[U]
            dest = base | U
            better = cand > new[dest]
            new[dest[better]] = cand[better]
            pick[dest[better]] = U
        value = new
        choices[m] = pick
    state = int(np.flatnonzero(value == value.max())[0])
    sets: list[tuple[int, ...]] = [()] * M
    for m in range(M - 1, -1, -1):
        U = int(choices[m, state])
        sets[m] = _members(U)
        state ^= U
    return sets


def _het_par_sim(scenario: Scenario, times: SubsetTimes) -> list[tuple[int, ...]]:
    M, N, T = scenario.n_channels, scenario.n_sensors, scenario.slot_s
    w = scenario.weights
    sets: list[list[int]] = [[] for _ in range(M)]
    current = [0.0] * M
    free = list(range(N))
    while free:
        best = None
        for m in range(M):
            for u in free:
                gain = _payoff(w[m], times.tau(m, sets[m] + [u]), T) - current[m]
                if best is None or gain > best[0]:
                    best = (gain, m, u)
        gain, m, u = best
        if gain < 0:
            break
        sets[m].append(u)
        current[m] = _payoff(w[m], times.tau(m, sets[m]), T)
        free.remove(u)
    return [tuple(sorted(s)) for s in sets]


def _het_par_avg(scenario: Scenario, times: SubsetTimes) -> list[tuple[int, ...]]:
    M, N = scenario.n_channels, scenario.n_sensors
    w = scenario.weights
    everyone = list(range(N))
    plan = [times.average_set(m, everyone)[1] for m in range(M)]
    order = ratio_order(w, plan, range(M))
    sets: list[list[int]] = [[] for _ in range(M)]
    free = set(everyone)
    while free:
        for m in order:
            if not free:
                break
            u = min(free, key=lambda i: (-times.snr[m, i], i))
            sets[m].append(u)
            free.discard(u)
    return [tuple(sorted(s)) for s in sets]


def het_parallel(scenario: Scenario, variant="dp_opt") -> Schedule:
    """Disjoint sensor sets, every channel sensed from t=0.

    ``dp_opt`` is exact over all disjoint set assignments (sensors may stay
    idle). ``dp_sim`` adds one (sensor, channel) pair at a time by largest
    marginal gain, re-ranked after every assignment, and stops when every
    remaining gain is negative. ``avg_greedy`` hands out each channel's best
    remaining sensor round-robin over channels ranked by the mean-SNR time.
    """
    variant = HetParVariant(variant)
    times = SubsetTimes(scenario)
    solver = {
        HetParVariant.DP_OPT: _het_par_dp,
        HetParVariant.DP_SIM: _het_par_sim,
        HetParVariant.AVG_GREEDY: _het_par_avg,
    }[variant]
    return _parallel_jobs(scenario, solver(scenario, times), times)


# -- sequential-parallel ------------------------------------------------------------


def _subset_min(values: np.ndarray, n_bits: int) -> tuple[np.ndarray, np.ndarray]:
    """Min over subsets along the last axis, with the minimizing subset."""
    out = values.copy()
    arg = np.broadcast_to(np.arange(values.shape[-1]), values.shape).copy()
    masks = np.arange(values.shape[-1])
    for b in range(n_bits):
        has = masks[(masks >> b) & 1 == 1]
        lower = out[..., has ^ (1 << b)]
        better = lower < out[..., has]
        out[..., has] = np.where(better, lower, out[..., has])
        arg[..., has] = np.where(better, arg[..., has ^ (1 << b)], arg[..., has])
    return out, arg


def _lane_values(scenario: Scenario, best_tau: np.ndarray) -> np.ndarray:
    """Sequential throughput of every channel set X for every user set U.

    ``best_tau[m, U]`` is the fastest time any subset of U achieves on m.
    Returns shape (2^N, 2^M).
    """
    M, T = scenario.n_channels, scenario.slot_s
    w = scenario.weights
    n_users = best_tau.shape[1]
    chan_masks = np.arange(1 << M)
    tau_u = best_tau.T  # (U, m)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.isfinite(tau_u), w[None, :] / tau_u, -np.inf)
    order = np.lexsort((np.broadcast_to(np.arange(M), ratio.shape), -ratio), axis=-1)
    prefix = np.zeros((n_users, chan_masks.size))
    value = np.zeros((n_users, chan_masks.size))
    rows = np.arange(n_users)
    for r in range(M):
        c = order[:, r]
        bit = ((chan_masks[None, :] >> c[:, None]) & 1).astype(bool)
        tau = tau_u[rows, c][:, None]
        step = np.where(bit, tau, 0.0)
        prefix = prefix + step
        gain = np.where(bit, w[c][:, None] * np.clip(T - prefix, 0.0, None) / T, 0.0)
        value = value + np.nan_to_num(gain, nan=0.0)
    out = value.copy()
    for b in range(M):
        has = chan_masks[(chan_masks >> b) & 1 == 1]
        out[:, has] = np.maximum(out[:, has], out[:, has ^ (1 << b)])
    out[0, :] = 0.0
    return out


def _het_seqpar_dp(scenario: Scenario, times: SubsetTimes) -> list[tuple[int, int]]:
    M, N = scenario.n_channels, scenario.n_sensors
    if M > HET_SEQPAR_MAX[0] or N > HET_SEQPAR_MAX[1]:
        raise SizeGuardError(
            f"het sequential-parallel DP needs M <= {HET_SEQPAR_MAX[0]} and N <= "
            f"{HET_SEQPAR_MAX[1]}, got M={M}, N={N}"
        )
    raw = np.stack([times.table(m) for m in range(M)])
    best_tau, _ = _subset_min(raw, N)
    lane = _lane_values(scenario, best_tau)  # (U, X)
    n_u = 1 << N
    # all (F, U) with U a nonempty subset of F, grouped by F
    pairs = [(F, U) for F in range(n_u) for U in range(1, n_u) if U & F == U]
    pF = np.array([p[0] for p in pairs], dtype=np.int64)
    pU = np.array([p[1] for p in pairs], dtype=np.int64)
    starts = np.flatnonzero(np.r_[True, pF[1:] != pF[:-1]])
    groups = pF[starts]
    v = np.zeros((1 << M, n_u))
    for S in range(1, 1 << M):
        low = S & -S
        rest = S ^ low
        best = v[rest].copy()
        sub = rest
        while True:
            X = sub | low
            cand = lane[pU, X] + v[S ^ X, pF ^ pU]
            best[groups] = np.maximum(best[groups], np.maximum.reduceat(cand, starts))
            if sub == 0:
                break
            sub = (sub - 1) & rest
        v[S] = best
    lanes = []
    S, F = (1 << M) - 1, n_u - 1
    while S and F:
        low = S & -S
        rest = S ^ low
        if v[S, F] == v[rest, F]:
            S = rest
            continue
        found = None
        for X in sorted((sub | low) for sub in _all_submasks(rest)):
            for U in range(1, n_u):
                if U & F == U and lane[U, X] + v[S ^ X, F ^ U] == v[S, F]:
                    found = (X, U)
                    break
            if found:
                break
        X, U = found
        lanes.append((X, U))
        S ^= X
        F ^= U
    return lanes


def _all_submasks(mask: int) -> list[int]:
    out = []
    sub = mask
    while True:
        out.append(sub)
        if sub == 0:
            return out
        sub = (sub - 1) & mask


def _best_subset_of(times: SubsetTimes, m: int, users: tuple[int, ...]) -> tuple[tuple[int, ...], float]:
    best, best_tau = (), math.inf
    for size in range(1, len(users) + 1):
        for subset in itertools.combinations(users, size):
            tau = times.tau(m, subset)
            if tau < best_tau:
                best, best_tau = subset, tau
    return best, best_tau


def _lane_schedule(scenario, lanes_sets, times) -> Schedule:
    """lanes_sets: list of (channels, {channel: sensor set})."""
    jobs = []
    w = scenario.weights
    T = scenario.slot_s
    for chans, sets in lanes_sets:
        taus = {c: times.tau(c, sets[c]) for c in chans}
        tau_vec = np.full(scenario.n_channels, np.inf)
        for c, t in taus.items():
            tau_vec[c] = t
        order, _ = best_sequential_subset(w, tau_vec, T, chans)
        t = 0.0
        for c in order:
            jobs.append(Job(c, sets[c], t, taus[c]))
            t += taus[c]
    return Schedule.from_jobs(jobs, scenario.n_channels, T)


def _het_seqpar_heuristic(scenario: Scenario, times: SubsetTimes):
    M, N, T = scenario.n_channels, scenario.n_sensors, scenario.slot_s
    w = scenario.weights
    channels = list(range(M))
    users = list(range(N))
    lanes = []
    while channels and users:
        plans = {m: times.optimal(m, users) for m in channels}
        score = {m: _payoff(w[m], plans[m][1], T) / len(plans[m][0]) for m in channels}
        pick = max(channels, key=lambda m: (score[m], -m))
        if score[pick] <= 0:
            break
        lane_users = set(plans[pick][0])
        members = [m for m in channels if set(plans[m][0]) <= lane_users]
        lanes.append((members, {m: plans[m][0] for m in members}))
        channels = [m for m in channels if m not in members]
        users = [u for u in users if u not in lane_users]
    return lanes


def het_seqpar(scenario: Scenario, variant="dp_opt") -> Schedule:
    """Parallel lanes of sensors, each lane sensing its channels one after another.

    ``dp_opt`` searches all (channel set, sensor set) lanes; inside a lane every
    channel uses the fastest subset of the lane's sensors. ``heuristic`` opens a
    lane for the channel with the best throughput per sensor of its optimal set
    and adds every channel whose optimal set fits inside that lane.
    """
    variant = HetSeqParVariant(variant)
    times = SubsetTimes(scenario)
    if variant is HetSeqParVariant.HEURISTIC:
        return _lane_schedule(scenario, _het_seqpar_heuristic(scenario, times), times)
    lanes = []
    for X, U in _het_seqpar_dp(scenario, times):
        users = _members(U)
        chans = list(_members(X))
        lanes.append((chans, {c: _best_subset_of(times, c, users)[0] for c in chans}))
    return _lane_schedule(scenario, lanes, times)


# -- brute-force oracles -------------------------------------------------------


def brute_force_het_parallel(scenario: Scenario) -> Schedule:
    """Every assignment of each sensor to one channel or to no channel."""
    M, N, T = scenario.n_channels, scenario.n_sensors, scenario.slot_s
    if M > 3 or N > 4:
        raise SizeGuardError(f"brute-force het parallel needs M <= 3 and N <= 4, got M={M}, N={N}")
    times = SubsetTimes(scenario)
    w = scenario.weights
    best_v, best_sets = -math.inf, None
    for labels in itertools.product(range(-1, M), repeat=N):
        sets = [tuple(u for u in range(N) if labels[u] == m) for m in range(M)]
        v = sum(_payoff(w[m], times.tau(m, s), T) for m, s in enumerate(sets) if s)
        if v > best_v:
            best_v, best_sets = v, sets
    return _parallel_jobs(scenario, best_sets, times)


def brute_force_het_seqpar(scenario: Scenario) -> float:
    """Best lane throughput by exhaustive search; returns the value only."""
    M, N, T = scenario.n_channels, scenario.n_sensors, scenario.slot_s
    if M > 3 or N > 3:
        raise SizeGuardError(f"brute-force het sequential-parallel needs M <= 3 and N <= 3, got M={M}, N={N}")
    times = SubsetTimes(scenario)
    w = scenario.weights

    def lane_value(chans, users):
        taus = {c: _best_subset_of(times, c, users)[1] for c in chans}
        best = 0.0
        for perm in itertools.permutations(chans):
            t, v = 0.0, 0.0
            for c in perm:
                t += taus[c]
                v += _payoff(w[c], t, T)
            best = max(best, v)
        return best

    best = 0.0
    for chan_labels in itertools.product(range(-1, M), repeat=M):
        for user_labels in itertools.product(range(-1, M), repeat=N):
            v = 0.0
            for g in range(M):
                chans = tuple(c for c in range(M) if chan_labels[c] == g)
                users = tuple(u for u in range(N) if user_labels[u] == g)
                if chans and users:
                    v += lane_value(chans, users)
            best = max(best, v)
    return best
