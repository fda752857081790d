"""Scheduling strategies for homogeneous sensors.

Every strategy takes a :class:`~coopsense.model.Scenario` whose channels carry
a single detection SNR each, and returns a :class:`~coopsense.model.Schedule`
(parallel variants also return the per-channel user counts).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.optimize import brentq

from .detection import coop_sensing_time_hom
from .errors import DomainError, FitError, SizeGuardError
from .model import Job, Scenario, Schedule, throughput_of

__all__ = [
    "AnalyticKind",
    "RelaxedResult",
    "AnalyticCheck",
    "payoff_table",
    "ratio_order",
    "best_sequential_subset",
    "sequential_schedule",
    "parallel_schedule",
    "parallel_dp",
    "parallel_marginal",
    "parallel_greedy",
    "greedy_allocation",
    "fit_exponential",
    "parallel_relaxed",
    "seqpar_tables",
    "seqpar_dp",
    "seqpar_greedy",
    "iterative_parallel",
    "hom_analytic",
    "analytic_check",
    "iter_compositions",
    "brute_force_parallel",
    "brute_force_seqpar",
    "SEQPAR_MAX_CHANNELS",
    "SEQPAR_MAX_SENSORS",
]

SEQPAR_MAX_CHANNELS = 16
SEQPAR_MAX_SENSORS = 16
BRUTE_PAR_LIMITS = (4, 6)
BRUTE_SEQPAR_LIMITS = (4, 4)


# -- shared helpers -----------------------------------------------------------


def payoff_table(weights: np.ndarray, taus: np.ndarray, slot_s: float) -> np.ndarray:
    """Channel payoff w * (T - tau)^+ / T for every (channel, user count)."""
    gain = np.clip(slot_s - taus, 0.0, None)
    return np.asarray(weights)[:, None] * gain / slot_s


def ratio_order(weights: Sequence[float], taus: Sequence[float], channels: Sequence[int]) -> list[int]:
    """Channels by decreasing w / tau, lower index first on ties."""
    return sorted(channels, key=lambda c: (-weights[c] / taus[c], c))


def best_sequential_subset(
    weights: Sequence[float], taus: Sequence[float], slot_s: float, channels: Sequence[int]
) -> tuple[list[int], float]:
    """Optimal sequential plan restricted to ``channels``.

    Returns the channels to sense, in sensing order, and the throughput. With
    the completion clamp at T, sorting by w / tau alone is not optimal: a
    channel that no longer fits can crowd out two that would. The optimal plan
    is a subset that fits in the slot, sensed in ratio order; a Pareto sweep
    over (elapsed time, value) states along the ratio order finds it.
    """
    T = slot_s
    states: list[tuple[float, float, tuple[int, ...]]] = [(0.0, 0.0, ())]
    for c in ratio_order(weights, taus, channels):
        tau = taus[c]
        grown = [
            (t + tau, v + weights[c] * (T - t - tau) / T, chosen + (c,))
            for t, v, chosen in states
            if t + tau <= T
        ]
        if not grown:
            continue
        merged = sorted(states + grown, key=lambda s: (s[0], -s[1]))
        states = []
        best_v = -math.inf
        for state in merged:
            if state[1] > best_v:
                states.append(state)
                best_v = state[1]
    t, v, chosen = max(states, key=lambda s: (s[1], -s[0]))
    return list(chosen), v


def _hom_taus(scenario: Scenario, n_max: int | None = None) -> np.ndarray:
    return scenario.tau_table(n_max)


def _check_seqpar_size(scenario: Scenario) -> None:
    if scenario.n_channels > SEQPAR_MAX_CHANNELS or scenario.n_sensors > SEQPAR_MAX_SENSORS:
        raise SizeGuardError(
            f"sequential-parallel solvers need M <= {SEQPAR_MAX_CHANNELS} and N <= "
            f"{SEQPAR_MAX_SENSORS}, got M={scenario.n_channels}, N={scenario.n_sensors}"
        )


# -- sequential -----------------------------------------------------------------


def sequential_schedule(scenario: Scenario) -> Schedule:
    """All sensors sense channels one after another."""
    T, M, N = scenario.slot_s, scenario.n_channels, scenario.n_sensors
    taus = _hom_taus(scenario)[:, N]
    w = scenario.weights
    chosen, _ = best_sequential_subset(w, taus, T, range(M))
    rest = [c for c in ratio_order(w, taus, range(M)) if c not in chosen]
    jobs = []
    t = 0.0
    everyone = tuple(range(N))
    for c in chosen + rest:
        if t >= T:
            break
        jobs.append(Job(c, everyone, t, float(taus[c])))
        t += taus[c]
    return Schedule.from_jobs(jobs, M, T)


# -- parallel ---------------------------------------------------------------------


def parallel_schedule(scenario: Scenario, allocation: Sequence[int], taus: np.ndarray | None = None) -> Schedule:
    """Schedule in which channel i is sensed from t=0 by a block of k_i sensors."""
    if len(allocation) != scenario.n_channels or any(k < 0 for k in allocation):
        raise DomainError(f"allocation {tuple(allocation)} does not match {scenario.n_channels} channels")
    if sum(allocation) > scenario.n_sensors:
        raise DomainError(f"allocation {tuple(allocation)} uses more than {scenario.n_sensors} sensors")
    taus = _hom_taus(scenario) if taus is None else taus
    jobs = []
    nxt = 0
    for c, k in enumerate(allocation):
        if k > 0:
            jobs.append(Job(c, tuple(range(nxt, nxt + k)), 0.0, float(taus[c, k])))
            nxt += k
    return Schedule.from_jobs(jobs, scenario.n_channels, scenario.slot_s)


def _stage_dp(pay: np.ndarray, n_users: int, exact: bool = True) -> tuple[tuple[int, ...], float]:
    """Max-plus resource allocation over channels in index order.

    ``pay[c, k]`` is the payoff of giving k users to channel c. Each stage
    keeps the largest k among equally good choices.
    """
    M = pay.shape[0]
    best = np.full(n_users + 1, -np.inf)
    best[0] = 0.0
    choice = np.zeros((M, n_users + 1), dtype=int)
    for c in range(M):
        new = np.full(n_users + 1, -np.inf)
        pick = np.zeros(n_users + 1, dtype=int)
        for k in range(n_users, -1, -1):
            cand = np.full(n_users + 1, -np.inf)
            cand[k:] = best[: n_users + 1 - k] + pay[c, k]
            better = cand > new
            new = np.where(better, cand, new)
            pick = np.where(better, k, pick)
        best, choice[c] = new, pick
    if exact:
        s = n_users
    else:
        s = int(np.flatnonzero(best == best.max())[-1])
    value = float(best[s])
    alloc = [0] * M
    for c in range(M - 1, -1, -1):
        alloc[c] = int(choice[c, s])
        s -= alloc[c]
    return tuple(alloc), value


def parallel_dp(scenario: Scenario) -> tuple[tuple[int, ...], Schedule]:
    """Optimal integer allocation of all N sensors, each channel sensed from t=0.

    Solved with the Bellman recursion over channels. The completion clamp makes
    per-channel payoffs non-concave in k, so the one-user-at-a-time marginal
    rule (:func:`parallel_marginal`) is not always optimal.
    """
    taus = _hom_taus(scenario)
    pay = payoff_table(scenario.weights, taus, scenario.slot_s)
    alloc, _ = _stage_dp(pay, scenario.n_sensors)
    return alloc, parallel_schedule(scenario, alloc, taus)


def parallel_marginal(scenario: Scenario) -> tuple[tuple[int, ...], Schedule]:
    """Assign users one at a time to the channel with the largest marginal gain."""
    taus = _hom_taus(scenario)
    pay = payoff_table(scenario.weights, taus, scenario.slot_s)
    k = np.zeros(scenario.n_channels, dtype=int)
    rows = np.arange(scenario.n_channels)
    for _ in range(scenario.n_sensors):
        gain = pay[rows, k + 1] - pay[rows, k]
        k[int(np.argmax(gain))] += 1
    alloc = tuple(int(x) for x in k)
    return alloc, parallel_schedule(scenario, alloc, taus)


def greedy_allocation(weights: Sequence[float], n_users: int) -> tuple[int, ...]:
    """Proportional rounding of users to channel weights, repaired to sum to N."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        share = np.full(w.size, n_users / w.size)
    else:
        share = n_users * w / total
    k = np.floor(share + 0.5).astype(int)
    by_weight = sorted(range(w.size), key=lambda c: (-w[c], c))
    diff = n_users - int(k.sum())
    if diff > 0:
        k[by_weight[0]] += diff
    else:
        excess = -diff
        for c in by_weight:
            if excess == 0:
                break
            take = min(excess, int(k[c]))
            k[c] -= take
            excess -= take
    return tuple(int(x) for x in k)


def parallel_greedy(scenario: Scenario) -> tuple[tuple[int, ...], Schedule]:
    """Users split in proportion to C(1-u), ignoring sensing times."""
    alloc = greedy_allocation(scenario.weights, scenario.n_sensors)
    return alloc, parallel_schedule(scenario, alloc)


# -- constraint relaxation ------------------------------------------------------


@dataclass(frozen=True)
class RelaxedResult:
    allocation: tuple[float, ...]
    bound: float
    grid_bound: float
    fit_bound: float | None
    fit_params: tuple[tuple[float, float], ...] | None


def fit_exponential(ks: Sequence[float], taus: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit of tau_k ~ a * exp(-b k) on log tau."""
    ks = np.asarray(ks, dtype=float)
    y = np.log(np.asarray(taus, dtype=float))
    if ks.size < 2:
        raise FitError("need at least two points for an exponential fit")
    slope, intercept = np.polyfit(ks, y, 1)
    b = -slope
    if not b > 0 or not np.isfinite(intercept):
        raise FitError(f"sensing times do not decay with k (fitted b={b:.3g})")
    return float(math.exp(intercept)), float(b)


def _real_payoff(scenario: Scenario, c: int, n: float) -> float:
    if n <= 0:
        return 0.0
    ch = scenario.channels[c]
    try:
        tau = coop_sensing_time_hom(scenario.requirements, scenario.channel_snr(c), n, ch.fs)
    except DomainError:
        return 0.0
    return ch.weight * max(scenario.slot_s - tau, 0.0) / scenario.slot_s


def _water_fill(a: np.ndarray, b: np.ndarray, w: np.ndarray, n_users: float, slot_s: float) -> np.ndarray:
    """Maximize sum w (T - a e^{-b k}) / T over k >= 0 with sum k = N."""
    live = w > 0
    if not live.any():
        return np.full(w.size, n_users / w.size)
    scale = np.where(live, a * b * w / slot_s, 1.0)

    def alloc(log_lam: float) -> np.ndarray:
        return np.where(live, np.maximum(0.0, (np.log(scale) - log_lam) / b), 0.0)

    lo = float(np.log(scale[live]).min() - b[live].max() * n_users - 1.0)
    hi = float(np.log(scale[live]).max())
    log_lam = brentq(lambda x: alloc(x).sum() - n_users, lo, hi, xtol=1e-14)
    k = alloc(log_lam)
    return k * (n_users / k.sum())


def parallel_relaxed(scenario: Scenario, resolution: float = 0.01) -> RelaxedResult:
    """Upper bound on parallel throughput with real-valued user counts.

    Two backends: an exact max-plus search on a grid of step at most
    ``resolution * N`` that contains every integer point, and an exponential
    fit of tau_k per channel followed by Lagrangian water-filling. The fitted
    allocation is scored with the true sensing times; the bound is the better
    of the two.
    """
    N, M, T = scenario.n_sensors, scenario.n_channels, scenario.slot_s
    q = max(1, math.ceil(1.0 / (resolution * N)))
    units = q * N
    grid = np.arange(units + 1) / q
    pay = np.array([[_real_payoff(scenario, c, x) for x in grid] for c in range(M)])
    units_alloc, grid_bound = _stage_dp(pay, units)
    best_alloc = tuple(u / q for u in units_alloc)
    bound = grid_bound

    fit_bound = None
    params = None
    if N >= 2:
        taus = _hom_taus(scenario)
        ks = np.arange(1, N + 1)
        try:
            params = tuple(fit_exponential(ks, taus[c, 1:]) for c in range(M))
        except FitError:
            params = None
        if params is not None:
            a = np.array([p[0] for p in params])
            b = np.array([p[1] for p in params])
            k = _water_fill(a, b, scenario.weights, float(N), T)
            fit_bound = math.fsum(_real_payoff(scenario, c, float(k[c])) for c in range(M))
            if fit_bound > bound:
                bound = fit_bound
                best_alloc = tuple(float(x) for x in k)
    return RelaxedResult(best_alloc, bound, grid_bound, fit_bound, params)


# -- sequential-parallel --------------------------------------------------------


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    out = np.zeros_like(x)
    while np.any(x):
        out += x & 1
        x >>= 1
    return out


def _subset_max(values: np.ndarray, n_bits: int) -> np.ndarray:
    """out[S] = max over subsets Y of S of values[Y] (along axis 0)."""
    out = values.copy()
    masks = np.arange(out.shape[0])
    for b in range(n_bits):
        has = masks[(masks >> b) & 1 == 1]
        out[has] = np.maximum(out[has], out[has ^ (1 << b)])
    return out


def seqpar_tables(scenario: Scenario) -> np.ndarray:
    """R_s(X, n): best sequential throughput of channel set X with n cooperators.

    Shape (2^M, N + 1); column 0 is ``-inf`` since a lane needs a sensor.
    """
    _check_seqpar_size(scenario)
    M, N, T = scenario.n_channels, scenario.n_sensors, scenario.slot_s
    taus = _hom_taus(scenario)
    w = scenario.weights
    masks = np.arange(1 << M)
    table = np.full((1 << M, N + 1), -np.inf)
    for n in range(1, N + 1):
        prefix = np.zeros(masks.size)
        value = np.zeros(masks.size)
        for c in ratio_order(w, taus[:, n], range(M)):
            bit = ((masks >> c) & 1).astype(float)
            prefix += bit * taus[c, n]
            value += bit * w[c] * np.clip(T - prefix, 0.0, None) / T
        table[:, n] = _subset_max(value, M)
    return table


def _submasks(mask: int) -> np.ndarray:
    bits = [b for b in range(mask.bit_length()) if mask >> b & 1]
    idx = np.arange(1 << len(bits))
    out = np.zeros(idx.size, dtype=np.int64)
    for i, b in enumerate(bits):
        out |= ((idx >> i) & 1) << b
    return out


def _lane_jobs(scenario: Scenario, channel_mask: int, users: tuple[int, ...], taus: np.ndarray) -> list[Job]:
    n = len(users)
    chans = [c for c in range(scenario.n_channels) if channel_mask >> c & 1]
    order, _ = best_sequential_subset(scenario.weights, taus[:, n], scenario.slot_s, chans)
    jobs = []
    t = 0.0
    for c in order:
        jobs.append(Job(c, users, t, float(taus[c, n])))
        t += taus[c, n]
    return jobs


def _lanes_schedule(scenario: Scenario, lanes: Sequence[tuple[int, int]], taus: np.ndarray) -> Schedule:
    jobs = []
    nxt = 0
    for mask, n in lanes:
        users = tuple(range(nxt, nxt + n))
        nxt += n
        jobs.extend(_lane_jobs(scenario, mask, users, taus))
    return Schedule.from_jobs(jobs, scenario.n_channels, scenario.slot_s)


def seqpar_dp(scenario: Scenario) -> Schedule:
    """Optimal split of channels into lanes, each run sequentially by its own sensors.

    Value iteration over (channel set, users left): the lane containing the
    lowest remaining channel is chosen together with its user count, or that
    channel is left unsensed. Sensors may stay idle.
    """
    _check_seqpar_size(scenario)
    M, N = scenario.n_channels, scenario.n_sensors
    R = seqpar_tables(scenario)
    full = (1 << M) - 1
    v = np.full((1 << M, N + 1), -np.inf)
    v[0, :] = 0.0
    choice_x = np.zeros((1 << M, N + 1), dtype=np.int64)
    choice_j = np.zeros((1 << M, N + 1), dtype=np.int64)
    jj, nn = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    valid = (jj >= 1) & (jj <= nn)
    rem = np.where(valid, nn - jj, 0)
    for S in range(1, full + 1):
        low = S & -S
        rest = S ^ low
        subs = _submasks(rest)
        X = subs | low
        others = rest ^ subs
        Rx = R[X][:, jj]  # (K, j, n)
        Vo = v[others][:, rem]
        total = np.where(valid[None], Rx + Vo, -np.inf)
        flat = total.reshape(total.shape[0] * (N + 1), N + 1)
        arg = np.argmax(flat, axis=0)
        cand = flat[arg, np.arange(N + 1)]
        skip = v[rest]
        take = cand > skip
        v[S] = np.where(take, cand, skip)
        choice_x[S] = np.where(take, X[arg // (N + 1)], 0)
        choice_j[S] = np.where(take, arg % (N + 1), 0)
    lanes = []
    S, n = full, N
    while S:
        x = int(choice_x[S, n])
        if x == 0:
            S ^= S & -S
            continue
        j = int(choice_j[S, n])
        lanes.append((x, j))
        S ^= x
        n -= j
    return _lanes_schedule(scenario, lanes, _hom_taus(scenario))


def seqpar_greedy(scenario: Scenario) -> Schedule:
    """Greedy pick of (channel set, users) pairs by throughput per user.

    Pairs are taken in decreasing R_s / n (ties: fewer channels, then lower
    channel indices, then fewer users) while they do not clash with earlier
    picks. As with the knapsack greedy, the result is compared with the single
    most valuable pair, which here is the plain sequential schedule; the
    better of the two is returned.
    """
    _check_seqpar_size(scenario)
    M, N = scenario.n_channels, scenario.n_sensors
    R = seqpar_tables(scenario)
    taus = _hom_taus(scenario)
    entries = []
    for mask in range(1, 1 << M):
        chans = tuple(c for c in range(M) if mask >> c & 1)
        for n in range(1, N + 1):
            entries.append((-R[mask, n] / n, len(chans), chans, n, mask))
    entries.sort()
    used, left, lanes, total = 0, N, [], 0.0
    for neg_ratio, _, _, n, mask in entries:
        if -neg_ratio <= 0:
            break
        if mask & used or n > left:
            continue
        lanes.append((mask, n))
        used |= mask
        left -= n
        total += R[mask, n]
        if left == 0:
            break
    full = (1 << M) - 1
    if R[full, N] > total:
        return _lanes_schedule(scenario, [(full, N)], taus)
    return _lanes_schedule(scenario, lanes, taus)


# -- iterative parallel ---------------------------------------------------------


def iterative_parallel(scenario: Scenario) -> Schedule:
    """Repeated parallel decisions at each earliest job completion.

    A busy sensor can be given a new channel; the job then starts when the
    last of its cooperators is free. Only jobs with positive payoff are
    committed, and the decision point moves to the earliest completion among
    the jobs just committed.
    """
    M, N, T = scenario.n_channels, scenario.n_sensors, scenario.slot_s
    taus = _hom_taus(scenario)
    w = scenario.weights
    free = np.zeros(N)
    remaining = list(range(M))
    jobs: list[Job] = []
    t_ref = 0.0
    first = True
    while remaining and t_ref < T:
        if first:
            alloc, _ = parallel_dp(scenario)
            blocks = []
            nxt = 0
            for c, k in enumerate(alloc):
                if k:
                    blocks.append((c, tuple(range(nxt, nxt + k)), 0.0))
                    nxt += k
            first = False
        else:
            blocks = _iterative_step(w, taus, T, free, remaining, t_ref)
        new_jobs = []
        for c, users, start in blocks:
            tau = float(taus[c, len(users)])
            if start + tau < T and w[c] > 0:
                new_jobs.append(Job(c, users, start, tau))
        if not new_jobs:
            break
        for job in new_jobs:
            free[list(job.sensors)] = job.end_s
            remaining.remove(job.channel)
        jobs.extend(new_jobs)
        t_ref = min(job.end_s for job in new_jobs)
    return Schedule.from_jobs(jobs, M, T)


def _iterative_step(w, taus, T, free, remaining, t_ref):
    N = free.size
    order_users = sorted(range(N), key=lambda u: (free[u], u))
    ready = np.maximum(t_ref, free[order_users])
    chans = sorted(remaining, key=lambda c: (-w[c], c))
    # best[s]: value with the first s sorted users handed out
    best = np.full(N + 1, -np.inf)
    best[0] = 0.0
    picks = []
    for c in chans:
        new = best.copy()
        pick = np.zeros(N + 1, dtype=int)
        for s in range(N + 1):
            if best[s] == -np.inf:
                continue
            for k in range(1, N - s + 1):
                end = ready[s + k - 1] + taus[c, k]
                val = best[s] + w[c] * max(T - end, 0.0) / T
                if val > new[s + k]:
                    new[s + k] = val
                    pick[s + k] = k
        best = new
        picks.append(pick)
    s = int(np.argmax(best))
    blocks = []
    for c, pick in zip(reversed(chans), reversed(picks)):
        k = int(pick[s])
        if k:
            users = tuple(order_users[s - k : s])
            blocks.append((c, users, float(ready[s - 1])))
            s -= k
    return blocks


# -- closed forms -----------------------------------------------------------------


class AnalyticKind(str, enum.Enum):
    PAR = "par"
    PAR_GH = "par_gh"
    SEQ = "seq"


def hom_analytic(kind, M: int, N: int, weight: float, slot_s: float, taus: Sequence[float]) -> float:
    """Closed-form throughput for M identical channels.

    ``taus[n]`` is the cooperative sensing time with n users (``taus[0]`` is
    ignored). The formulas are evaluated as stated, without clamping.
    """
    kind = AnalyticKind(kind)
    T, W = slot_s, weight

    def gain(n: int) -> float:
        return 0.0 if n == 0 else (T - taus[n])

    if kind is AnalyticKind.PAR:
        L, r = divmod(N, M)
        return ((M - r) * gain(L) + (r * gain(L + 1) if r else 0.0)) * W / T
    if kind is AnalyticKind.SEQ:
        K = min(int(math.floor(T / taus[N])), M)
        return K * W * (T - (K + 1) / 2 * taus[N]) / T
    Q = int(math.floor(N / M + 0.5))
    if N < M:
        return N * gain(1) * W / T
    if M * Q == N:
        return M * gain(Q) * W / T
    if M * Q < N:
        return ((M - 1) * gain(Q) + gain(N - (M - 1) * Q)) * W / T
    t = math.ceil((M * Q - N) / Q)
    if not (N + (t - 1) * Q < M * Q <= N + t * Q):
        raise DomainError(f"no branch of the greedy closed form applies (M={M}, N={N})")
    # the last channel keeps what is left after t - 1 channels are drained
    return ((M - t) * gain(Q) + gain(N - (M - t) * Q)) * W / T


@dataclass(frozen=True)
class AnalyticCheck:
    analytic: float
    simulated: float
    diverged: bool
    reason: str = ""


def analytic_check(scenario: Scenario, kind) -> AnalyticCheck:
    """Compare a closed form with the schedule it describes.

    ``diverged`` flags inputs where the parallel closed form is known not to
    describe the optimal schedule: a group whose sensing time reaches the
    slot, or a per-channel payoff that is not concave in the user count (the
    even split is then no longer guaranteed optimal).
    """
    kind = AnalyticKind(kind)
    M, N, T = scenario.n_channels, scenario.n_sensors, scenario.slot_s
    taus = _hom_taus(scenario)
    tau_row = taus[0]
    weight = float(scenario.weights[0])
    analytic = hom_analytic(kind, M, N, weight, T, tau_row)
    if kind is AnalyticKind.SEQ:
        sim = throughput_of(scenario, sequential_schedule(scenario).completion)
        return AnalyticCheck(analytic, sim, False)
    if kind is AnalyticKind.PAR_GH:
        _, sched = parallel_greedy(scenario)
        sim = throughput_of(scenario, sched.completion)
        if 2 * N < M:
            # every share rounds to zero and the surplus rule stacks all users on one channel
            return AnalyticCheck(analytic, sim, True, "rounding leaves all users on one channel")
        return AnalyticCheck(analytic, sim, False)
    _, sched = parallel_dp(scenario)
    sim = throughput_of(scenario, sched.completion)
    L, r = divmod(N, M)
    sizes = sorted({L} | ({L + 1} if r else set()))
    if any(n >= 1 and tau_row[n] >= T for n in sizes):
        return AnalyticCheck(analytic, sim, True, "a sensing group needs the whole slot")

    # identical channels with a concave payoff in k: the even split is optimal
    f = np.concatenate(([0.0], weight * np.clip(T - tau_row[1 : N + 1], 0.0, None) / T))
    if np.any(np.diff(f, 2) > 1e-12 * max(weight, 1.0)):
        return AnalyticCheck(analytic, sim, True, "payoff is not concave in the number of users")
    return AnalyticCheck(analytic, sim, False)


# -- brute-force oracles -------------------------------------------------------


def iter_compositions(n: int, m: int) -> Iterator[tuple[int, ...]]:
    """All m-tuples of non-negative integers summing to n, first entry largest first."""
    if m == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in iter_compositions(n - first, m - 1):
            yield (first,) + rest


def brute_force_parallel(scenario: Scenario) -> tuple[tuple[int, ...], Schedule]:
    """Exhaustive search over all allocations of N users to M channels."""
    M, N = scenario.n_channels, scenario.n_sensors
    if M > BRUTE_PAR_LIMITS[0] or N > BRUTE_PAR_LIMITS[1]:
        raise SizeGuardError(f"brute-force parallel needs M <= 4 and N <= 6, got M={M}, N={N}")
    taus = _hom_taus(scenario)
    pay = payoff_table(scenario.weights, taus, scenario.slot_s)
    best, best_v = None, -math.inf
    for k in iter_compositions(N, M):
        v = math.fsum(pay[c, k[c]] for c in range(M))
        if v > best_v:
            best, best_v = k, v
    return best, parallel_schedule(scenario, best, taus)


def _lane_value_by_permutation(scenario: Scenario, chans: Sequence[int], taus: np.ndarray) -> tuple[float, tuple[int, ...]]:
    T = scenario.slot_s
    w = scenario.weights
    best, best_order = 0.0, ()
    for perm in itertools.permutations(chans):
        t, v = 0.0, 0.0
        for c in perm:
            t += taus[c]
            v += w[c] * max(T - t, 0.0) / T
        if v > best:
            best, best_order = v, perm
    return best, best_order


def brute_force_seqpar(scenario: Scenario) -> Schedule:
    """Exhaustive search over lane partitions, user splits and lane orders."""
    M, N, T = scenario.n_channels, scenario.n_sensors, scenario.slot_s
    if M > BRUTE_SEQPAR_LIMITS[0] or N > BRUTE_SEQPAR_LIMITS[1]:
        raise SizeGuardError(f"brute-force sequential-parallel needs M <= 4 and N <= 4, got M={M}, N={N}")
    taus = _hom_taus(scenario)
    cache: dict[tuple[tuple[int, ...], int], tuple[float, tuple[int, ...]]] = {}

    def lane(chans, n):
        key = (chans, n)
        if key not in cache:
            cache[key] = _lane_value_by_permutation(scenario, chans, taus[:, n])
        return cache[key]

    best_v, best_plan = -math.inf, None
    # label -1: unsensed; labels 0..M-1: lanes (canonical: first use in order)
    for labels in itertools.product(range(-1, M), repeat=M):
        seen = [l for l in labels if l >= 0]
        order_ok = all(l <= max(seen[:i], default=-1) + 1 for i, l in enumerate(seen))
        if not order_ok:
            continue
        groups = sorted({l for l in seen})
        lanes = [tuple(c for c in range(M) if labels[c] == g) for g in groups]
        for split in itertools.product(range(1, N + 1), repeat=len(lanes)):
            if sum(split) > N:
                continue
            v = 0.0
            plan = []
            for chans, n in zip(lanes, split):
                val, perm = lane(chans, n)
                v += val
                plan.append((perm, n))
            if v > best_v:
                best_v, best_plan = v, plan
    jobs = []
    nxt = 0
    for perm, n in best_plan or []:
        users = tuple(range(nxt, nxt + n))
        nxt += n
        t = 0.0
        for c in perm:
            if t >= T:
                break
            jobs.append(Job(c, users, t, float(taus[c, n])))
            t += taus[c, n]
    return Schedule.from_jobs(jobs, M, T)
