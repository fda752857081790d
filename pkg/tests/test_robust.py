"""Traffic estimation, robust selection and SNR-uncertainty moments."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as hst
from scipy import integrate
from scipy.special import exp1

from conftest import hom_scenario
from coopsense.detection import db_to_linear
from coopsense.errors import DomainError, InfeasibleError, NoSolutionError, SizeGuardError
from coopsense.model import Schedule, evaluate_schedule
from coopsense.robust import (
    DtmcTraffic,
    RobustSpec,
    TruncExpSnr,
    dtmc_simulate,
    estimate_duty_cycle,
    estimator_variance,
    expint_e1,
    lag_correlation,
    make_rng,
    parallel_space,
    rop1_solve,
    rop4_solve,
    rop_min_samples,
    rop_min_variance,
    throughput_variance_traffic,
    trunc_exp_inverse_moments,
)
from coopsense.scenario import bundled_scenario, traffic_models
from coopsense.strategies import parallel_dp, parallel_schedule


def variance_double_sum(u: float, r: float, w: int) -> float:
    """Var of the sample mean from the stationary covariance u(1-u) r^|i-j|."""
    idx = np.arange(w)
    cov = u * (1 - u) * r ** np.abs(idx[:, None] - idx[None, :])
    return float(cov.sum()) / w**2


def lag_by_matrix_power(tr: DtmcTraffic, j: int) -> float:
    P = np.array([[tr.p00, tr.p01], [tr.p10, tr.p11]])
    return tr.u * np.linalg.matrix_power(P, j)[1, 1]


def e1_quad(x: float) -> float:
    val, _ = integrate.quad(lambda t: math.exp(-t) / t, x, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    return val


@pytest.fixture(scope="module")
def fig9():
    return bundled_scenario("fig9")


class TestDtmc:
    def test_from_duty_cycle(self):
        tr = DtmcTraffic.from_duty_cycle(0.3, 0.9)
        assert tr.p01 == pytest.approx(0.1)
        assert tr.p10 == pytest.approx(7 / 30)
        assert tr.u == pytest.approx(0.3)
        assert tr.r == pytest.approx(2 / 3)

    def test_fig9_mixing(self, fig9):
        rs = [tr.r for tr in traffic_models(fig9)]
        assert rs == pytest.approx([0.0, 0.5, 2 / 3, 0.75, 0.8, 2 / 3])

    def test_invalid(self):
        with pytest.raises(DomainError):
            DtmcTraffic(1.2, 0.5)
        with pytest.raises(DomainError):
            DtmcTraffic.from_duty_cycle(0.2, 0.5)

    def test_absorbing_zero(self):
        z = dtmc_simulate(DtmcTraffic(0.0, 0.5), 50, seed=1, start=0)
        assert not z.any()

    def test_reproducible(self):
        tr = DtmcTraffic.from_duty_cycle(0.3, 0.9)
        assert np.array_equal(dtmc_simulate(tr, 100, 42), dtmc_simulate(tr, 100, 42))
        assert not np.array_equal(dtmc_simulate(tr, 100, 42), dtmc_simulate(tr, 100, 43))

    def test_iid_when_r_zero(self):
        tr = DtmcTraffic(0.3, 0.3)
        z = dtmc_simulate(tr, 200_000, seed=5).astype(float)
        corr = np.corrcoef(z[:-1], z[1:])[0, 1]
        assert abs(corr) < 3 / math.sqrt(z.size)

    def test_stationary_mean(self):
        tr = DtmcTraffic.from_duty_cycle(0.3, 0.9)
        z = dtmc_simulate(tr, 10, seed=11, n_chains=100_000)
        sd = math.sqrt(estimator_variance(0.3, tr.r, 10) / 100_000)
        assert abs(z.mean() - 0.3) < 4 * sd
        # every time step is stationary, not just the average
        assert abs(z[:, 0].mean() - 0.3) < 4 * math.sqrt(0.21 / 100_000)

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            dtmc_simulate(DtmcTraffic(0.1, 0.5), 0, seed=1)


class TestEstimator:
    def test_examples(self):
        assert estimate_duty_cycle([1, 1, 1]) == 1.0
        assert estimate_duty_cycle([0, 1, 0, 1]) == 0.5
        with pytest.raises(DomainError):
            estimate_duty_cycle([])

    def test_variance_reductions(self):
        assert estimator_variance(0.3, 0.0, 20) == pytest.approx(0.21 / 20, rel=1e-15)
        for r in (-0.5, 0.3, 0.9):
            assert estimator_variance(0.3, r, 1) == pytest.approx(0.21, rel=1e-12)
        with pytest.raises(DomainError):
            estimator_variance(0.3, 1.0, 10)

    @given(hst.floats(0.01, 0.99), hst.floats(-0.9, 0.95), hst.integers(1, 300))
    def test_matches_double_sum(self, u, r, w):
        assert estimator_variance(u, r, w) == pytest.approx(variance_double_sum(u, r, w), rel=1e-9, abs=1e-15)

    def test_correlation_sign(self):
        for u in np.arange(0.1, 1.0, 0.1):
            for w in range(2, 60):
                iid = u * (1 - u) / w
                assert estimator_variance(u, 0.5, w) >= iid
                assert estimator_variance(u, -0.5, w) <= iid

    def test_strictly_decreasing_in_w(self):
        ws = np.arange(1, 501)
        for u in np.arange(0.1, 1.0, 0.1):
            for r in (-0.5, 0.0, 0.5, 0.9):
                v = np.array([estimator_variance(u, r, int(w)) for w in ws])
                assert np.all(np.diff(v) < 0)
        assert estimator_variance(0.3, 0.9, 10**7) < 1e-6

    def test_monte_carlo(self):
        tr = DtmcTraffic.from_duty_cycle(0.3, 0.9)
        est = dtmc_simulate(tr, 20, seed=3, n_chains=200_000).mean(axis=1)
        want = estimator_variance(0.3, tr.r, 20)
        assert est.var(ddof=1) == pytest.approx(want, rel=0.03)
        assert abs(est.mean() - 0.3) < 4 * math.sqrt(want / est.size)


class TestLagCorrelation:
    def test_zero_lag(self):
        assert lag_correlation(0.3, 0.1, 0.77, 0) == pytest.approx(0.3)

    def test_independent(self):
        assert lag_correlation(0.3, 0.3, 0.3, 4) == pytest.approx(0.09)

    @given(hst.floats(0.05, 0.95), hst.floats(0.05, 0.95), hst.integers(0, 30))
    def test_matches_matrix_power(self, p01, p11, j):
        tr = DtmcTraffic(p01, p11)
        assert lag_correlation(tr.u, p01, p11, j) == pytest.approx(lag_by_matrix_power(tr, j), rel=1e-10)

    def test_monte_carlo(self):
        tr = DtmcTraffic.from_duty_cycle(0.3, 0.9)
        z = dtmc_simulate(tr, 4, seed=9, n_chains=1_000_000).astype(float)
        prod = z[:, 0] * z[:, 3]
        want = lag_correlation(0.3, tr.p01, tr.p11, 3)
        assert abs(prod.mean() - want) < 3 * prod.std() / math.sqrt(prod.size)


class TestThroughputVariance:
    def test_zero_weight_channel(self):
        s = hom_scenario(bandwidths=(2000.0,), occupancies=(0.3,))
        tr = [DtmcTraffic.from_duty_cycle(0.3, 0.9)]
        assert throughput_variance_traffic(s, Schedule.empty(1, s.slot_s), [5], tr) == 0.0

    def test_decreasing_in_w(self, fig9):
        _, sched = parallel_dp(fig9)
        tr = traffic_models(fig9)
        v = [throughput_variance_traffic(fig9, sched, [w] * 6, tr) for w in (20, 100, 500, 10**7)]
        assert v[0] > v[1] > v[2] > v[3] >= 0 and v[3] < 1e-3 * v[0]

    def test_monte_carlo_one_channel(self):
        s = hom_scenario(bandwidths=(2500.0,), occupancies=(0.3,), n_sensors=2)
        _, sched = parallel_dp(s)
        tr = DtmcTraffic.from_duty_cycle(0.3, 0.9)
        u_hat = dtmc_simulate(tr, 20, seed=21, n_chains=200_000).mean(axis=1)
        T, C = s.slot_s, s.capacities[0]
        r_hat = (T - sched.completion[0]) * C * (1 - u_hat) / T
        want = throughput_variance_traffic(s, sched, [20], [tr])
        assert r_hat.var(ddof=1) == pytest.approx(want, rel=0.03)

    def test_length_mismatch(self, fig9):
        with pytest.raises(DomainError):
            throughput_variance_traffic(fig9, parallel_dp(fig9)[1], [20], traffic_models(fig9))


class TestRop1:
    def test_unconstrained_is_parallel_optimum(self, fig9):
        choice = rop1_solve(fig9, traffic_models(fig9), [20] * 6, math.inf)
        alloc, sched = parallel_dp(fig9)
        assert choice.allocation == alloc == (0, 2, 2, 2, 2, 2)
        assert choice.throughput_bps == pytest.approx(evaluate_schedule(fig9, sched).total_bps)
        assert choice.loss == 0.0

    def test_zero_threshold(self, fig9):
        with pytest.raises(NoSolutionError):
            rop1_solve(fig9, traffic_models(fig9), [20] * 6, 0.0)

    def test_monotone_step_curve(self, fig9):
        tr = traffic_models(fig9)
        etas = np.geomspace(1e5, 5e7, 40)
        losses, rates = [], []
        for eta in etas:
            try:
                c = rop1_solve(fig9, tr, [20] * 6, eta)
            except NoSolutionError:
                continue
            assert c.variance <= eta
            losses.append(c.loss)
            rates.append(c.throughput_bps)
        assert np.all(np.diff(losses) <= 1e-12)
        assert np.all(np.diff(rates) >= -1e-9)
        assert len(set(np.round(losses, 12))) < len(losses)

    def test_space_guard(self):
        with pytest.raises(SizeGuardError):
            parallel_space(hom_scenario(n_sensors=13))

    def test_first_feasible_in_mean_order(self, fig9):
        tr = traffic_models(fig9)
        eta = 5e6
        c = rop1_solve(fig9, tr, [20] * 6, eta)
        taus = fig9.tau_table()
        better = []
        for k in parallel_space(fig9):
            sched = parallel_schedule(fig9, k, taus)
            mean = evaluate_schedule(fig9, sched).total_bps
            if mean > c.throughput_bps + 1e-9:
                better.append(throughput_variance_traffic(fig9, sched, [20] * 6, tr))
        assert all(v > eta for v in better)


def brute_min_samples(curves, eta, cap=200):
    best = None
    for W in itertools.product(range(1, cap + 1), repeat=len(curves)):
        if sum(f(w) for f, w in zip(curves, W)) <= eta and (best is None or sum(W) < sum(best)):
            best = W
    return best


class TestSampleDesign:
    def _toy(self, rng):
        s = hom_scenario(bandwidths=tuple(rng.uniform(1000, 5000, 2)), occupancies=(0.3, 0.4), n_sensors=2)
        _, sched = parallel_dp(s)
        tr = [DtmcTraffic.from_duty_cycle(0.3, 0.9), DtmcTraffic.from_duty_cycle(0.4, 0.85)]
        return s, sched, tr

    def test_one_channel_designs_coincide(self):
        s = hom_scenario(bandwidths=(2500.0,), occupancies=(0.3,), n_sensors=2)
        _, sched = parallel_dp(s)
        tr = [DtmcTraffic.from_duty_cycle(0.3, 0.9)]
        for eta in (1e4, 1e5, 1e6):
            assert rop_min_samples(1, s, sched, tr, eta) == rop_min_samples(2, s, sched, tr, eta)

    def test_design2_matches_brute_force(self, rng):
        for _ in range(4):
            s, sched, tr = self._toy(rng)
            full = throughput_variance_traffic(s, sched, [1, 1], tr)
            eta = full * float(rng.uniform(0.02, 0.3))
            W = rop_min_samples(2, s, sched, tr, eta)
            assert throughput_variance_traffic(s, sched, W, tr) <= eta

            def curve(i):
                return lambda w: throughput_variance_traffic(
                    s, sched, [w if j == i else 10**9 for j in range(2)], tr
                ) - throughput_variance_traffic(s, sched, [10**9, 10**9], tr)

            best = brute_min_samples([curve(0), curve(1)], eta)
            assert sum(W) == sum(best)

    def test_design1_is_smallest_uniform(self, fig9):
        _, sched = parallel_dp(fig9)
        tr = traffic_models(fig9)
        for sigma in (2000.0, 3000.0, 4000.0):
            W = rop_min_samples(1, fig9, sched, tr, sigma**2)
            assert len(set(W)) == 1
            assert throughput_variance_traffic(fig9, sched, W, tr) <= sigma**2
            assert throughput_variance_traffic(fig9, sched, [W[0] - 1] * 6, tr) > sigma**2

    def test_design2_not_worse(self, fig9):
        _, sched = parallel_dp(fig9)
        tr = traffic_models(fig9)
        for sigma in np.linspace(1500, 5000, 15):
            assert sum(rop_min_samples(2, fig9, sched, tr, sigma**2)) <= sum(rop_min_samples(1, fig9, sched, tr, sigma**2))

    def test_about_a_hundred_samples_at_3550(self, fig9):
        _, sched = parallel_dp(fig9)
        tr = traffic_models(fig9)
        total = sum(rop_min_samples(1, fig9, sched, tr, 3550.0**2))
        assert 100 <= total <= 300

    def test_errors(self, fig9):
        _, sched = parallel_dp(fig9)
        tr = traffic_models(fig9)
        with pytest.raises(InfeasibleError):
            rop_min_samples(1, fig9, sched, tr, 0.0)
        with pytest.raises(DomainError):
            rop_min_samples(3, fig9, sched, tr, 1e6)
        with pytest.raises(InfeasibleError):
            rop_min_variance(fig9, sched, tr, 5)

    def test_budget_equals_channels(self, fig9):
        W, _ = rop_min_variance(fig9, parallel_dp(fig9)[1], traffic_models(fig9), 6)
        assert W == [1] * 6

    def test_rop3_matches_brute_force(self, rng):
        s, sched, tr = self._toy(rng)
        for budget in (2, 7, 40, 150):
            W, var = rop_min_variance(s, sched, tr, budget)
            best = min(
                throughput_variance_traffic(s, sched, [a, budget - a], tr) for a in range(1, budget)
            ) if budget > 2 else throughput_variance_traffic(s, sched, [1, 1], tr)
            assert var == pytest.approx(best, rel=1e-12)
            assert sum(W) == budget

    def test_budget_round_trip(self, rng):
        for _ in range(50):
            m = int(rng.integers(1, 6))
            s = hom_scenario(
                bandwidths=tuple(rng.uniform(1000, 5000, m)), occupancies=tuple(rng.uniform(0.05, 0.6, m)),
                n_sensors=int(rng.integers(1, 7)),
            )
            _, sched = parallel_dp(s)
            tr = [
                DtmcTraffic.from_duty_cycle(
                    ch.occupancy, float(rng.uniform(max(0.5, 1 - ch.occupancy / (1 - ch.occupancy)), 0.95))
                )
                for ch in s.channels
            ]
            full = throughput_variance_traffic(s, sched, [1] * m, tr)
            if full == 0:
                continue
            eta = full * float(rng.uniform(0.01, 0.5))
            W2 = rop_min_samples(2, s, sched, tr, eta)
            W3, var = rop_min_variance(s, sched, tr, sum(W2))
            assert W3 == W2
            assert var <= eta


class TestExpint:
    def test_anchors(self):
        assert expint_e1(1.0) == pytest.approx(0.2193839343955203, rel=1e-10)
        assert expint_e1(0.1) == pytest.approx(1.8229239584193906, rel=1e-10)
        assert 0 < expint_e1(50.0) < 1e-23

    @pytest.mark.parametrize("x", [1e-8, 1e-3, 0.05, 0.5, 0.999, 1.0, 1.001, 2.0, 7.5, 30.0, 200.0])
    def test_quadrature_oracle(self, x):
        assert expint_e1(x) == pytest.approx(e1_quad(x), rel=1e-10)

    @given(hst.floats(1e-6, 600.0))
    def test_against_scipy(self, x):
        assert expint_e1(x) == pytest.approx(float(exp1(x)), rel=1e-10)

    def test_vectorized(self):
        xs = np.array([0.2, 1.0, 3.0])
        assert expint_e1(xs) == pytest.approx(exp1(xs), rel=1e-12)

    @pytest.mark.parametrize("x", [0.0, -1.0])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            expint_e1(x)


def moment_quad(dist: TruncExpSnr, power: int) -> float:
    val, _ = integrate.quad(
        lambda g: dist.pdf(g) / g**power, dist.phi_l, dist.phi_u, epsabs=0, epsrel=1e-13, limit=400
    )
    return val


class TestTruncExp:
    def test_pdf_normalized(self):
        d = TruncExpSnr(2.0, 0.0316, 0.794)
        total, _ = integrate.quad(d.pdf, d.phi_l, d.phi_u, epsrel=1e-13)
        assert total == pytest.approx(1.0, rel=1e-12)

    def test_mean_and_samples(self):
        d = TruncExpSnr(2.0, 0.0316, 0.794)
        mq, _ = integrate.quad(lambda g: g * d.pdf(g), d.phi_l, d.phi_u, epsrel=1e-13)
        assert d.mean() == pytest.approx(mq, rel=1e-10)
        x = d.sample(make_rng(1), 400_000)
        assert x.min() > d.phi_l and x.max() < d.phi_u
        assert x.mean() == pytest.approx(d.mean(), rel=5e-3)

    def test_from_mean(self):
        lo, hi = db_to_linear(-15.0), db_to_linear(-1.0)
        d = TruncExpSnr.from_mean(db_to_linear(-5.0), lo, hi)
        assert d.mean() == pytest.approx(db_to_linear(-5.0), rel=1e-10)
        with pytest.raises(DomainError):
            TruncExpSnr.from_mean(0.5 * (lo + hi) * 1.01, lo, hi)

    def test_invalid(self):
        with pytest.raises(DomainError):
            TruncExpSnr(1.0, 0.5, 0.4)
        with pytest.raises(DomainError):
            TruncExpSnr(0.0, 0.1, 0.4)

    def test_moments_fig9_bounds(self):
        d = TruncExpSnr(1.0, 0.0316, 0.794)
        m1, m2, var = trunc_exp_inverse_moments(d)
        assert m1 == pytest.approx(moment_quad(d, 1), rel=1e-8)
        assert m2 == pytest.approx(moment_quad(d, 2), rel=1e-8)
        assert var == pytest.approx(m2 - m1 * m1, rel=1e-12)

    def test_uniform_limit(self):
        lo, hi = 0.0316, 0.794
        m1, _, _ = trunc_exp_inverse_moments(TruncExpSnr(1e-6, lo, hi))
        assert m1 == pytest.approx(math.log(hi / lo) / (hi - lo), abs=1e-4)

    def test_point_mass_limit(self):
        m1, _, _ = trunc_exp_inverse_moments(TruncExpSnr(1.0, 0.3, 0.3 + 1e-6))
        assert m1 == pytest.approx(1 / 0.3, abs=1e-4)


class TestRop4:
    def test_point_mass_matches_deterministic(self):
        g0 = db_to_linear(-5.0)
        s = hom_scenario(n_sensors=6)
        d = TruncExpSnr(1.0, g0 * (1 - 1e-9), g0 * (1 + 1e-9))
        choice = rop4_solve(s, d, math.inf)
        alloc, sched = parallel_dp(s.with_uniform_snr(g0))
        assert choice.throughput_bps == pytest.approx(evaluate_schedule(s, sched).total_bps, rel=1e-6)
        assert choice.allocation == alloc

    def test_ladder(self, fig9):
        d = fig9.snr_dist.distribution()
        losses = []
        for eta in np.geomspace(1e5, 1e9, 60):
            try:
                c = rop4_solve(fig9, d, eta)
            except NoSolutionError:
                continue
            assert c.variance <= eta
            losses.append(c.loss)
        assert losses and np.all(np.diff(losses) <= 1e-12)
        assert 1 < len(set(np.round(losses, 12))) < len(losses)
        assert losses[-1] == 0.0

    def test_zero_threshold(self, fig9):
        with pytest.raises(NoSolutionError):
            rop4_solve(fig9, fig9.snr_dist.distribution(), 0.0)


class TestRobustSpec:
    def test_validation(self):
        with pytest.raises(DomainError):
            RobustSpec(eta=-1.0)
        with pytest.raises(DomainError):
            RobustSpec(eta=1.0, samples=(0, 3))
        assert RobustSpec(eta=1.0, samples=[2, 3]).samples == (2, 3)
