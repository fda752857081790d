"""Traffic estimation and robust schedule selection.

Primary traffic on each channel is a two-state Markov chain. The duty cycle is
estimated by the sample mean of W observations, which makes the throughput of
a schedule a random quantity; schedules are then chosen subject to a bound on
that variance. Uncertain detection SNR is handled the same way through the
inverse moments of a truncated exponential SNR.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .detection import sensing_constant
from .errors import DomainError, InfeasibleError, NoSolutionError, SizeGuardError
from .model import Scenario, Schedule
from .strategies import iter_compositions

__all__ = [
    "make_rng",
    "DtmcTraffic",
    "TruncExpSnr",
    "RobustSpec",
    "RobustChoice",
    "dtmc_simulate",
    "estimate_duty_cycle",
    "estimator_variance",
    "lag_correlation",
    "throughput_variance_traffic",
    "parallel_space",
    "rop1_solve",
    "rop_min_samples",
    "rop_min_variance",
    "expint_e1",
    "trunc_exp_inverse_moments",
    "rop4_solve",
    "ROP_MAX_SENSORS",
    "ROP_MAX_CHANNELS",
]

ROP_MAX_SENSORS = 12
ROP_MAX_CHANNELS = 8
EULER_GAMMA = 0.5772156649015329


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; every stream is fully determined by ``seed``."""
    return np.random.Generator(np.random.Philox(int(seed)))


# -- traffic model ---------------------------------------------------------------


@dataclass(frozen=True)
class DtmcTraffic:
    """Two-state chain: state 1 means the primary user is active."""

    p01: float
    p11: float

    def __post_init__(self):
        for name in ("p01", "p11"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")

    @classmethod
    def from_duty_cycle(cls, u: float, p00: float) -> "DtmcTraffic":
        """Chain with stationary occupancy ``u`` and idle self-transition ``p00``."""
        if not 0.0 <= u < 1.0:
            raise DomainError(f"duty cycle must lie in [0, 1), got {u}")
        p01 = 1.0 - p00
        if u == 0.0:
            if p01 != 0.0:
                raise DomainError("u = 0 needs p00 = 1")
            return cls(0.0, 0.0)
        p10 = p01 * (1.0 - u) / u
        if p10 > 1.0:
            raise DomainError(f"no chain has u={u} with p00={p00} (p10 would be {p10:.3g})")
        return cls(p01, 1.0 - p10)

    @property
    def p00(self) -> float:
        return 1.0 - self.p01

    @property
    def p10(self) -> float:
        return 1.0 - self.p11

    @property
    def u(self) -> float:
        denom = self.p01 + self.p10
        return 0.0 if denom == 0 else self.p01 / denom

    @property
    def r(self) -> float:
        return self.p11 - self.p01


def dtmc_simulate(
    traffic: DtmcTraffic,
    w: int,
    seed: int | np.random.Generator,
    n_chains: int | None = None,
    start: int | None = None,
) -> np.ndarray:
    """Sample paths of length ``w``; shape (w,) or (n_chains, w).

    The first state is stationary unless ``start`` pins it.
    """
    if w < 1:
        raise DomainError(f"need at least one sample, got w={w}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    k = 1 if n_chains is None else int(n_chains)
    out = np.empty((k, w), dtype=np.int8)
    if start is None:
        z = rng.random(k) < traffic.u
    else:
        z = np.full(k, bool(start))
    out[:, 0] = z
    for t in range(1, w):
        p_on = np.where(z, traffic.p11, traffic.p01)
        z = rng.random(k) < p_on
        out[:, t] = z
    return out[0] if n_chains is None else out


def estimate_duty_cycle(samples) -> float | np.ndarray:
    """Sample mean of the binary occupancy observations (along the last axis)."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0 or arr.shape[-1] == 0:
        raise DomainError("need at least one sample")
    est = arr.mean(axis=-1)
    return float(est) if np.ndim(est) == 0 else est


def _check_r(r: float) -> None:
    if not -1.0 <= r < 1.0:
        raise DomainError(f"need -1 <= r < 1, got r={r}")


def estimator_variance(u: float, r: float, w: int) -> float:
    """Variance of the W-sample mean of a stationary two-state chain."""
    _check_r(r)
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"u must lie in [0, 1], got {u}")
    if w < 1:
        raise DomainError(f"need w >= 1, got {w}")
    base = u * (1.0 - u)
    corr = 2.0 * base * r * (r**w - w * r + w - 1.0) / (w * w * (1.0 - r) ** 2)
    return base / w + corr


def lag_correlation(u: float, p01: float, p11: float, j: int) -> float:
    """E{z_i z_(i+j)} for the stationary chain."""
    r = p11 - p01
    _check_r(r)
    if j < 0:
        raise DomainError(f"lag must be non-negative, got {j}")
    return u * p01 * (1.0 - r**j) / (1.0 - r) + u * r**j


def _opportunity(scenario: Scenario, completion: Sequence[float]) -> np.ndarray:
    T = scenario.slot_s
    return np.clip(T - np.asarray(completion, dtype=float), 0.0, None) / T


def throughput_variance_traffic(
    scenario: Scenario,
    schedule: Schedule,
    samples: Sequence[int],
    traffic: Sequence[DtmcTraffic],
) -> float:
    """Variance of the estimated throughput when every duty cycle is estimated."""
    return _traffic_variance(_traffic_coeffs(scenario, schedule.completion), samples, traffic)


def _traffic_coeffs(scenario: Scenario, completion: Sequence[float]) -> np.ndarray:
    return (_opportunity(scenario, completion) * scenario.capacities) ** 2


def _traffic_variance(coeffs: np.ndarray, samples: Sequence[int], traffic: Sequence[DtmcTraffic]) -> float:
    if len(samples) != coeffs.size or len(traffic) != coeffs.size:
        raise DomainError("need one sample count and one traffic model per channel")
    terms = [c * estimator_variance(tr.u, tr.r, int(w)) for c, w, tr in zip(coeffs, samples, traffic)]
    return math.fsum(terms)


# -- strategy space and Algorithm-4 style selection ----------------------------------


@dataclass(frozen=True)
class RobustSpec:
    eta: float
    budget: int | None = None
    samples: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.eta < 0:
            raise DomainError(f"variance threshold must be non-negative, got {self.eta}")
        if self.samples is not None:
            object.__setattr__(self, "samples", tuple(int(w) for w in self.samples))
            if any(w < 1 for w in self.samples):
                raise DomainError("every channel needs at least one traffic sample")


@dataclass(frozen=True)
class RobustChoice:
    allocation: tuple[int, ...]
    throughput_bps: float
    variance: float
    max_throughput_bps: float
    loss: float
    rank: int = 0


def parallel_space(scenario: Scenario) -> list[tuple[int, ...]]:
    """All allocations of N users to M channels, in a fixed canonical order."""
    M, N = scenario.n_channels, scenario.n_sensors
    if N > ROP_MAX_SENSORS or M > ROP_MAX_CHANNELS:
        raise SizeGuardError(
            f"enumerating parallel allocations needs N <= {ROP_MAX_SENSORS} and M <= "
            f"{ROP_MAX_CHANNELS}, got N={N}, M={M}"
        )
    return list(iter_compositions(N, M))


def _select(
    space: Sequence[tuple[int, ...]],
    mean_fn: Callable[[tuple[int, ...]], float],
    var_fn: Callable[[tuple[int, ...]], float],
    eta: float,
) -> RobustChoice:
    """Rank by expected throughput (stable) and return the first feasible entry."""
    means = [mean_fn(k) for k in space]
    order = sorted(range(len(space)), key=lambda i: -means[i])
    r_max = means[order[0]]
    for rank, i in enumerate(order):
        var = var_fn(space[i])
        if var <= eta:
            loss = 0.0 if r_max <= 0 else (r_max - means[i]) / r_max
            return RobustChoice(space[i], means[i], var, r_max, loss, rank)
    raise NoSolutionError(f"no strategy has throughput variance <= {eta:.6g}")


def _parallel_completion(scenario: Scenario, alloc: Sequence[int], taus: np.ndarray) -> list[float]:
    T = scenario.slot_s
    return [T if k == 0 else min(float(taus[c, k]), T) for c, k in enumerate(alloc)]


def rop1_solve(
    scenario: Scenario,
    traffic: Sequence[DtmcTraffic],
    samples: Sequence[int],
    eta: float,
    space: Sequence[tuple[int, ...]] | None = None,
) -> RobustChoice:
    """Best parallel allocation whose estimated-throughput variance is at most ``eta``."""
    space = parallel_space(scenario) if space is None else list(space)
    taus = scenario.tau_table()
    w = scenario.weights

    def completion(k):
        return _parallel_completion(scenario, k, taus)

    def mean(k):
        return math.fsum(_opportunity(scenario, completion(k)) * w)

    def var(k):
        return _traffic_variance(_traffic_coeffs(scenario, completion(k)), samples, traffic)

    return _select(space, mean, var, eta)


def _variance_curve(coeff: float, tr: DtmcTraffic) -> Callable[[int], float]:
    return lambda n: coeff * estimator_variance(tr.u, tr.r, n)


def _greedy_samples(
    curves: Sequence[Callable[[int], float]],
    stop: Callable[[list[int], float], bool],
) -> tuple[list[int], float]:
    """Start from one sample per channel and add samples where variance drops most."""
    W = [1] * len(curves)
    current = [f(1) for f in curves]
    total = math.fsum(current)
    heap = [(-(current[i] - curves[i](2)), i) for i in range(len(curves))]
    heapq.heapify(heap)
    while not stop(W, total):
        gain, i = heapq.heappop(heap)
        if -gain <= 0:
            break
        W[i] += 1
        current[i] = curves[i](W[i])
        total = math.fsum(current)
        heapq.heappush(heap, (-(current[i] - curves[i](W[i] + 1)), i))
    return W, total


def rop_min_samples(
    design: int,
    scenario: Scenario,
    schedule: Schedule,
    traffic: Sequence[DtmcTraffic],
    eta: float,
) -> list[int]:
    """Fewest traffic samples that keep the throughput variance at most ``eta``.

    Design 1 uses the same W on every channel; design 2 lets W differ.
    """
    if not eta > 0:
        raise InfeasibleError(f"variance threshold must be positive, got {eta}")
    coeffs = _traffic_coeffs(scenario, schedule.completion)
    M = coeffs.size
    if design == 1:

        def var(n: int) -> float:
            return _traffic_variance(coeffs, [n] * M, traffic)

        if var(1) <= eta:
            return [1] * M
        hi = 2
        while var(hi) > eta:
            hi *= 2
        lo = hi // 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if var(mid) <= eta:
                hi = mid
            else:
                lo = mid
        return [hi] * M
    if design == 2:
        curves = [_variance_curve(c, tr) for c, tr in zip(coeffs, traffic)]
        W, total = _greedy_samples(curves, lambda W, v: v <= eta)
        return W
    raise DomainError(f"design must be 1 or 2, got {design}")


def rop_min_variance(
    scenario: Scenario,
    schedule: Schedule,
    traffic: Sequence[DtmcTraffic],
    budget: int,
) -> tuple[list[int], float]:
    """Split a total sample budget over channels to minimize throughput variance."""
    coeffs = _traffic_coeffs(scenario, schedule.completion)
    M = coeffs.size
    if budget < M:
        raise InfeasibleError(f"budget {budget} is below one sample per channel ({M})")
    curves = [_variance_curve(c, tr) for c, tr in zip(coeffs, traffic)]
    return _greedy_samples(curves, lambda W, v: sum(W) >= budget)


# -- uncertain detection SNR ------------------------------------------------------


def _e1_scalar(x: float) -> float:
    if not x > 0:
        raise DomainError(f"E1 needs x > 0, got {x}")
    if x <= 1.0:
        total, term = 0.0, 1.0
        for k in range(1, 200):
            term *= -x / k
            add = term / k
            total += add
            if abs(add) < 1e-17 * abs(total):
                break
        return -EULER_GAMMA - math.log(x) - total
    # modified Lentz evaluation of the continued fraction
    tiny = 1e-300
    b = x + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 500):
        a = -i * i
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x)


def expint_e1(x):
    """Exponential integral E1(x) = int_x^inf e^{-t} / t dt for x > 0."""
    if np.ndim(x):
        return np.vectorize(_e1_scalar, otypes=[float])(x)
    return _e1_scalar(float(x))


@dataclass(frozen=True)
class TruncExpSnr:
    """Exponential SNR density with rate ``beta`` restricted to (phi_l, phi_u)."""

    beta: float
    phi_l: float
    phi_u: float

    def __post_init__(self):
        if not 0.0 < self.phi_l < self.phi_u:
            raise DomainError(f"need 0 < phi_l < phi_u, got ({self.phi_l}, {self.phi_u})")
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")

    @property
    def _span(self) -> float:
        # P(phi_l < g < phi_u) / exp(-beta phi_l)
        return -math.expm1(-self.beta * (self.phi_u - self.phi_l))

    def pdf(self, g):
        g = np.asarray(g, dtype=float)
        inside = (g > self.phi_l) & (g < self.phi_u)
        dens = self.beta * np.exp(-self.beta * (g - self.phi_l)) / self._span
        return np.where(inside, dens, 0.0)

    def mean(self) -> float:
        b, lo, hi = self.beta, self.phi_l, self.phi_u
        tail = math.exp(-b * (hi - lo))
        return ((lo + 1.0 / b) - (hi + 1.0 / b) * tail) / self._span

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        v = rng.random(size)
        return self.phi_l - np.log1p(-v * self._span) / self.beta

    @classmethod
    def from_mean(cls, mean: float, phi_l: float, phi_u: float) -> "TruncExpSnr":
        """Rate that gives the truncated law the requested mean.

        The mean falls from the midpoint of the interval (rate -> 0) towards
        ``phi_l`` as the rate grows, so it must lie below the midpoint.
        """
        mid = 0.5 * (phi_l + phi_u)
        if not phi_l < mean < mid:
            raise DomainError(f"mean must lie in ({phi_l:.6g}, {mid:.6g}) for a positive rate, got {mean}")

        def excess(log_b: float) -> float:
            return cls(math.exp(log_b), phi_l, phi_u).mean() - mean

        hi = math.log(1.0 / (phi_u - phi_l))
        while excess(hi) > 0:
            hi += 2.0
        lo = hi
        while excess(lo) < 0:
            lo -= 2.0
        return cls(math.exp(brentq(excess, lo, hi, xtol=1e-14)), phi_l, phi_u)


def trunc_exp_inverse_moments(dist: TruncExpSnr) -> tuple[float, float, float]:
    """(E{1/g}, E{1/g^2}, Var{1/g}) for the truncated exponential SNR."""
    b, lo, hi = dist.beta, dist.phi_l, dist.phi_u
    span = dist._span
    e1_gap = expint_e1(b * lo) - expint_e1(b * hi)
    # all terms carry a common factor exp(-b lo) that cancels with the normalizer
    scaled_gap = e1_gap * math.exp(b * lo)
    m1 = b * scaled_gap / span
    edge = 1.0 / lo - math.exp(-b * (hi - lo)) / hi
    m2 = b * (edge - b * scaled_gap) / span
    return m1, m2, m2 - m1 * m1


def rop4_solve(
    scenario: Scenario,
    dist: TruncExpSnr,
    eta: float,
    space: Sequence[tuple[int, ...]] | None = None,
) -> RobustChoice:
    """Best parallel allocation under an uncertain SNR shared by all channels.

    Sensing times scale as A_i / g. A channel whose expected sensing time
    fills the slot is counted as unsensed, both in the mean and the variance.
    """
    space = parallel_space(scenario) if space is None else list(space)
    e_inv, _, var_inv = trunc_exp_inverse_moments(dist)
    T = scenario.slot_s
    w = scenario.weights
    fs = scenario.sampling_rates
    reqs = scenario.requirements
    consts = {}

    def A(c, k):
        if (c, k) not in consts:
            consts[c, k] = sensing_constant(reqs, k, fs[c])
        return consts[c, k]

    def sensed(k):
        return [c for c, n in enumerate(k) if n > 0 and A(c, n) * e_inv < T]

    def mean(k):
        return math.fsum((T - A(c, k[c]) * e_inv) * w[c] / T for c in sensed(k))

    def var(k):
        return var_inv * math.fsum(A(c, k[c]) * w[c] / T for c in sensed(k)) ** 2

    return _select(space, mean, var, eta)
