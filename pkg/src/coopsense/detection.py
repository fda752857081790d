"""Detection-theoretic sensing times.

Everything here works on linear SNR values and returns times in seconds.
Decibel conversion happens only at the I/O boundary (``db_to_linear``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from .errors import DomainError, InfeasibleError

__all__ = [
    "Fusion",
    "SensingRequirements",
    "HetSensingSolution",
    "db_to_linear",
    "linear_to_db",
    "q_func",
    "q_inv",
    "sensing_time_single",
    "per_user_targets",
    "coop_sensing_time_hom",
    "sensing_constant",
    "subset_sensing_times",
    "het_coop_sensing_time",
    "het_optimal_subset",
    "matched_filter_probabilities",
]


class Fusion(str, enum.Enum):
    OR = "or"
    AND = "and"

    @classmethod
    def parse(cls, value: "str | Fusion") -> "Fusion":
        if isinstance(value, Fusion):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DomainError(f"unknown fusion rule {value!r}; expected 'or' or 'and'") from None


@dataclass(frozen=True)
class SensingRequirements:
    """Cumulative detection targets after fusion."""

    qd_target: float
    qf_target: float
    sampling_hz: float = 5000.0
    fusion: Fusion = Fusion.OR

    def __post_init__(self):
        object.__setattr__(self, "fusion", Fusion.parse(self.fusion))
        if not 0.0 < self.qf_target < self.qd_target < 1.0:
            raise DomainError(
                f"need 0 < qf < qd < 1, got qf={self.qf_target}, qd={self.qd_target}"
            )
        if not self.sampling_hz > 0:
            raise DomainError(f"sampling_hz must be positive, got {self.sampling_hz}")


@dataclass(frozen=True)
class HetSensingSolution:
    """Cooperative sensing time of a sensor subset and its per-sensor thresholds."""

    tau: float
    thresholds: tuple[float, ...]
    subset: tuple[int, ...]


def db_to_linear(db):
    if np.ndim(db):
        return 10.0 ** (np.asarray(db, dtype=float) / 10.0)
    return 10.0 ** (db / 10.0)


def linear_to_db(lin):
    if np.ndim(lin):
        return 10.0 * np.log10(np.asarray(lin, dtype=float))
    return 10.0 * math.log10(lin)


def q_func(x):
    """Standard normal tail probability P(Z > x)."""
    return ndtr(-np.asarray(x, dtype=float)) if np.ndim(x) else float(ndtr(-x))


def q_inv(p):
    """Inverse of :func:`q_func` on the open interval (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise DomainError(f"q_inv needs 0 < p < 1, got {p!r}")
    out = -ndtri(arr)
    return out if np.ndim(p) else float(out)


def sensing_time_single(pf: float, pd: float, gamma: float, fs: float) -> float:
    """Minimum single-sensor sensing time for the matched filter in AWGN."""
    if not 0.0 < pf < pd < 1.0:
        raise DomainError(f"need 0 < pf < pd < 1, got pf={pf}, pd={pd}")
    if not gamma > 0 or not fs > 0:
        raise DomainError(f"gamma and fs must be positive, got gamma={gamma}, fs={fs}")
    return (q_inv(pf) - q_inv(pd)) ** 2 / (gamma * fs)


def per_user_targets(reqs: SensingRequirements, n: float) -> tuple[float, float]:
    """Per-sensor (pf, pd) that meet the cumulative targets with ``n`` identical sensors.

    ``n`` may be fractional; the continuous relaxation of the parallel strategy
    evaluates the same expressions at real-valued user counts.
    """
    if not n > 0:
        raise DomainError(f"number of cooperating sensors must be positive, got {n}")
    if reqs.fusion is Fusion.OR:
        pf = -math.expm1(math.log1p(-reqs.qf_target) / n)
        pd = -math.expm1(math.log1p(-reqs.qd_target) / n)
    else:
        pf = math.exp(math.log(reqs.qf_target) / n)
        pd = math.exp(math.log(reqs.qd_target) / n)
    if not 0.0 < pf < pd < 1.0:
        raise DomainError(f"per-user targets pf={pf}, pd={pd} are not a valid detector")
    return pf, pd


def sensing_constant(reqs: SensingRequirements, n: float, sampling_hz: float | None = None) -> float:
    """The SNR-free factor A with tau = A / gamma for ``n`` homogeneous cooperators."""
    fs = reqs.sampling_hz if sampling_hz is None else sampling_hz
    pf, pd = per_user_targets(reqs, n)
    return (q_inv(pf) - q_inv(pd)) ** 2 / fs


def coop_sensing_time_hom(
    reqs: SensingRequirements, gamma: float, n: float, sampling_hz: float | None = None
) -> float:
    """Cooperative sensing time of ``n`` sensors that share the same SNR."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    return sensing_constant(reqs, n, sampling_hz) / gamma


# -- heterogeneous sensors ---------------------------------------------------
#
# Matched filter with N_s = tau * fs samples, PU power theta = gamma * sigma^2:
#   P_f = Q(eps / (sigma^2 sqrt(N_s gamma)))
#   P_d = Q(eps / (sigma^2 sqrt(N_s gamma)) - sqrt(N_s gamma))
# so with x = Q^{-1}(P_f) and t = sqrt(tau fs): Q^{-1}(P_d) = x - t sqrt(gamma).
# The false-alarm budget is split evenly over the subset; the minimum tau is
# then the root of a scalar equation that is monotone in t.


def _hom_pf(reqs: SensingRequirements, n: np.ndarray) -> np.ndarray:
    if reqs.fusion is Fusion.OR:
        return -np.expm1(np.log1p(-reqs.qf_target) / n)
    return np.exp(np.log(reqs.qf_target) / n)


def _hom_pd(reqs: SensingRequirements, n: np.ndarray) -> np.ndarray:
    if reqs.fusion is Fusion.OR:
        return -np.expm1(np.log1p(-reqs.qd_target) / n)
    return np.exp(np.log(reqs.qd_target) / n)


def _detection_margin(reqs, x, sqrt_g, mask, t):
    """Signed slack of the cumulative detection target; increasing in ``t``."""
    z = x[:, None] - t[:, None] * sqrt_g
    if reqs.fusion is Fusion.AND:
        # log Q_d - log Q_d*, Q_d = prod Q(z)
        terms = np.where(mask, log_ndtr(-z), 0.0)
        return terms.sum(axis=1) - math.log(reqs.qd_target)
    # log(1 - Q_d*) - log(1 - Q_d), 1 - Q_d = prod (1 - Q(z))
    terms = np.where(mask, log_ndtr(z), 0.0)
    return math.log1p(-reqs.qd_target) - terms.sum(axis=1)


def subset_sensing_times(
    snrs: Sequence[float] | np.ndarray,
    masks: np.ndarray,
    reqs: SensingRequirements,
    sampling_hz: float | None = None,
) -> np.ndarray:
    """Cooperative sensing time for many sensor subsets at once.

    ``masks`` is a boolean array of shape (K, N) selecting sensors from
    ``snrs``; rows with no sensor selected get ``inf``.
    """
    fs = reqs.sampling_hz if sampling_hz is None else sampling_hz
    g = np.asarray(snrs, dtype=float)
    if np.any(g <= 0):
        raise DomainError("all SNRs must be positive")
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    out = np.full(masks.shape[0], np.inf)
    n = masks.sum(axis=1)
    live = n > 0
    if not live.any():
        return out
    mask = masks[live]
    nn = n[live].astype(float)
    x = -ndtri(_hom_pf(reqs, nn))
    xd = -ndtri(_hom_pd(reqs, nn))
    sqrt_g = np.sqrt(g)[None, :]
    # every member reaching the homogeneous per-user pd is sufficient
    weakest = np.where(mask, sqrt_g, np.inf).min(axis=1)
    hi = (x - xd) / weakest
    lo = np.zeros_like(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ok = _detection_margin(reqs, x, sqrt_g, mask, mid) >= 0.0
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
        if np.all(hi - lo <= 1e-15 * hi):
            break
    out[live] = hi * hi / fs
    return out


def matched_filter_probabilities(thresholds, tau, snrs, fs, noise_power):
    """Per-sensor (P_f, P_d) of the matched filter for the given thresholds."""
    eps = np.asarray(thresholds, dtype=float)
    g = np.asarray(snrs, dtype=float)
    scale = noise_power * np.sqrt(tau * fs * g)
    pf = q_func(eps / scale)
    pd = q_func((eps - tau * fs * g * noise_power) / scale)
    return np.asarray(pf), np.asarray(pd)


def het_coop_sensing_time(
    snrs: Sequence[float],
    reqs: SensingRequirements,
    noise_power: float = 1e-5,
    tau_cap: float | None = None,
    sampling_hz: float | None = None,
    subset: Sequence[int] | None = None,
) -> HetSensingSolution:
    """Minimum cooperative sensing time of sensors with distinct SNRs.

    All sensors in ``subset`` (default: all of them) cooperate with a common
    sensing time. Raises :class:`InfeasibleError` when the time exceeds
    ``tau_cap``.
    """
    g = np.asarray(snrs, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise DomainError("snrs must be a nonempty 1-D sequence")
    idx = tuple(range(g.size)) if subset is None else tuple(int(i) for i in subset)
    if not idx:
        raise DomainError("subset must not be empty")
    mask = np.zeros((1, g.size), dtype=bool)
    mask[0, list(idx)] = True
    fs = reqs.sampling_hz if sampling_hz is None else sampling_hz
    tau = float(subset_sensing_times(g, mask, reqs, fs)[0])
    if tau_cap is not None and tau > tau_cap:
        raise InfeasibleError(f"required sensing time {tau:.6g} s exceeds cap {tau_cap:.6g} s")
    x = float(-ndtri(_hom_pf(reqs, np.array([float(len(idx))]))[0]))
    eps = tuple(float(x * noise_power * math.sqrt(tau * fs * g[i])) for i in idx)
    return HetSensingSolution(tau=tau, thresholds=eps, subset=idx)


def het_optimal_subset(
    snrs: Sequence[float],
    reqs: SensingRequirements,
    noise_power: float = 1e-5,
    tau_cap: float | None = None,
    sampling_hz: float | None = None,
    early_stop: bool = False,
) -> HetSensingSolution:
    """Best cooperating subset among prefixes of the SNR-sorted sensors.

    Sensors are ranked by decreasing SNR (ties: lower index first) and all
    prefixes {1}, {1,2}, ... are compared. The time along the prefixes is not
    always unimodal, so stopping at the first increase (``early_stop=True``)
    can miss the optimum. Under OR fusion extra sensors never slow sensing
    down, so the full set is used.
    """
    g = np.asarray(snrs, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise DomainError("snrs must be a nonempty 1-D sequence")
    if reqs.fusion is Fusion.OR:
        return het_coop_sensing_time(g, reqs, noise_power, tau_cap, sampling_hz)
    order = sorted(range(g.size), key=lambda i: (-g[i], i))
    best = None
    for size in range(1, g.size + 1):
        sol = het_coop_sensing_time(g, reqs, noise_power, None, sampling_hz, order[:size])
        if early_stop and best is not None and sol.tau > best.tau:
            break
        if best is None or sol.tau < best.tau:
            best = sol
    if tau_cap is not None and best.tau > tau_cap:
        raise InfeasibleError(f"required sensing time {best.tau:.6g} s exceeds cap {tau_cap:.6g} s")
    return best
