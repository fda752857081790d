"""Shared scenario builders for the test suite."""

from __future__ import annotations

import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coopsense.detection import SensingRequirements, db_to_linear
from coopsense.model import ChannelSpec, Scenario

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

FIG6_BANDWIDTHS = (1000, 1500, 2000, 2500, 3000, 5000)
FIG6_OCCUPANCY = (0.1, 0.2, 0.3, 0.4, 0.5, 0.3)


def hom_scenario(
    bandwidths=FIG6_BANDWIDTHS,
    occupancies=FIG6_OCCUPANCY,
    n_sensors=4,
    pu_snr_db=-5.0,
    su_snr_db=10.0,
    slot_s=0.005,
    qd=0.9,
    qf=0.15,
    fusion="or",
    sampling_hz=None,
) -> Scenario:
    snrs = np.broadcast_to(np.asarray(pu_snr_db, dtype=float), (len(bandwidths),))
    chans = tuple(
        ChannelSpec(b, u, db_to_linear(su_snr_db), db_to_linear(g), sampling_hz)
        for b, u, g in zip(bandwidths, occupancies, snrs)
    )
    reqs = SensingRequirements(qd, qf, 5000.0, fusion)
    return Scenario(slot_s, chans, n_sensors, reqs)


def random_hom_scenario(rng: np.random.Generator, max_m: int = 4, max_n: int = 6) -> Scenario:
    """Small homogeneous scenario whose sensing times are comparable to the slot."""
    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    return hom_scenario(
        bandwidths=rng.uniform(1000, 5000, m),
        occupancies=rng.uniform(0.0, 0.9, m),
        n_sensors=n,
        pu_snr_db=rng.uniform(-10.0, 0.0, m),
        su_snr_db=float(rng.uniform(0.0, 20.0)),
        qd=float(rng.uniform(0.8, 0.97)),
        qf=float(rng.uniform(0.05, 0.2)),
        fusion=str(rng.choice(["or", "and"])),
    )


def random_het_scenario(
    rng: np.random.Generator, m: int, n: int, fusion: str = "and", low_db=-12.0, high_db=0.0
) -> Scenario:
    base = random_hom_scenario(rng, 1, 1)
    base = hom_scenario(
        bandwidths=rng.uniform(1000, 5000, m),
        occupancies=rng.uniform(0.0, 0.8, m),
        n_sensors=n,
        qd=base.requirements.qd_target,
        qf=base.requirements.qf_target,
        fusion=fusion,
    )
    return base.with_snr_matrix(db_to_linear(rng.uniform(low_db, high_db, (m, n))))


@pytest.fixture
def fig6() -> Scenario:
    return hom_scenario()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
