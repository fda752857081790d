"""Reading and writing scenario files (YAML or JSON)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .detection import SensingRequirements, db_to_linear, linear_to_db
from .errors import CoopSenseError, ScenarioError
from .model import ChannelSpec, Scenario
from .robust import DtmcTraffic, RobustSpec, TruncExpSnr

__all__ = [
    "SnrDistSpec",
    "DEFAULTS",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "bundled_scenario",
    "bundled_names",
    "traffic_models",
]


@dataclass(frozen=True)
class SnrDistSpec:
    """Truncated exponential detection SNR, given in dB."""

    mean_db: float
    low_db: float
    high_db: float

    def distribution(self) -> TruncExpSnr:
        return TruncExpSnr.from_mean(
            db_to_linear(self.mean_db), db_to_linear(self.low_db), db_to_linear(self.high_db)
        )


_FIG6_CHANNELS = [
    {"bandwidth_hz": b, "occupancy": u, "su_snr_db": 10.0, "pu_snr_db": -5.0}
    for b, u in zip((1000, 1500, 2000, 2500, 3000, 5000), (0.1, 0.2, 0.3, 0.4, 0.5, 0.3))
]

DEFAULTS: dict[str, Any] = {
    "slot_s": 0.005,
    "fusion": "or",
    "qd": 0.9,
    "qf": 0.15,
    "n_sensors": 4,
    "noise_power": 1e-5,
    "channels": _FIG6_CHANNELS,
}

_TOP_KEYS = {"slot_s", "fusion", "qd", "qf", "n_sensors", "noise_power", "channels", "traffic", "robust", "snr_dist", "name", "notes"}
_CHANNEL_KEYS = {"bandwidth_hz", "occupancy", "su_snr_db", "pu_snr_db", "sampling_hz"}


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _channel(raw: Mapping[str, Any], m: int) -> ChannelSpec:
    if not isinstance(raw, Mapping):
        raise ScenarioError(f"channels[{m}]: expected a mapping")
    unknown = set(raw) - _CHANNEL_KEYS
    if unknown:
        raise ScenarioError(f"channels[{m}]: unknown fields {sorted(unknown)}")
    missing = {"bandwidth_hz", "occupancy"} - set(raw)
    if missing:
        raise ScenarioError(f"channels[{m}]: missing fields {sorted(missing)}")
    pu = raw.get("pu_snr_db", -5.0)
    if isinstance(pu, (list, tuple)):
        pu_snr = tuple(db_to_linear(_number(x, f"channels[{m}].pu_snr_db")) for x in pu)
    else:
        pu_snr = db_to_linear(_number(pu, f"channels[{m}].pu_snr_db"))
    fs = raw.get("sampling_hz")
    return ChannelSpec(
        bandwidth_hz=_number(raw["bandwidth_hz"], f"channels[{m}].bandwidth_hz"),
        occupancy=_number(raw["occupancy"], f"channels[{m}].occupancy"),
        su_snr=db_to_linear(_number(raw.get("su_snr_db", 10.0), f"channels[{m}].su_snr_db")),
        pu_snr=pu_snr,
        sampling_hz=None if fs is None else _number(fs, f"channels[{m}].sampling_hz"),
    )


def scenario_from_dict(data: Mapping[str, Any]) -> Scenario:
    """Build a scenario; missing top-level fields fall back to :data:`DEFAULTS`."""
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario fields {sorted(unknown)}")
    merged = {**DEFAULTS, **data}
    channels = merged["channels"]
    if not isinstance(channels, list) or not channels:
        raise ScenarioError("channels must be a nonempty list")
    n = merged["n_sensors"]
    if isinstance(n, bool) or not isinstance(n, int):
        raise ScenarioError(f"n_sensors must be an integer, got {n!r}")

    traffic_p00 = None
    if merged.get("traffic") is not None:
        tr = merged["traffic"]
        if not isinstance(tr, Mapping) or "p00" not in tr:
            raise ScenarioError("traffic block needs a p00 field")
        traffic_p00 = _number(tr["p00"], "traffic.p00")

    robust = None
    if merged.get("robust") is not None:
        rb = merged["robust"]
        if not isinstance(rb, Mapping):
            raise ScenarioError("robust block must be a mapping")
        samples = rb.get("samples")
        if isinstance(samples, int):
            samples = [samples] * len(channels)
        robust = RobustSpec(
            eta=_number(rb.get("eta", float("inf")), "robust.eta"),
            budget=rb.get("budget"),
            samples=None if samples is None else tuple(samples),
        )

    snr_dist = None
    if merged.get("snr_dist") is not None:
        sd = merged["snr_dist"]
        try:
            snr_dist = SnrDistSpec(
                _number(sd["mean_db"], "snr_dist.mean_db"),
                _number(sd["low_db"], "snr_dist.low_db"),
                _number(sd["high_db"], "snr_dist.high_db"),
            )
        except (KeyError, TypeError):
            raise ScenarioError("snr_dist needs mean_db, low_db and high_db") from None

    try:
        reqs = SensingRequirements(
            qd_target=_number(merged["qd"], "qd"),
            qf_target=_number(merged["qf"], "qf"),
            fusion=merged["fusion"],
        )
        return Scenario(
            slot_s=_number(merged["slot_s"], "slot_s"),
            channels=tuple(_channel(c, m) for m, c in enumerate(channels)),
            n_sensors=n,
            requirements=reqs,
            noise_power=_number(merged["noise_power"], "noise_power"),
            traffic_p00=traffic_p00,
            robust=robust,
            snr_dist=snr_dist,
        )
    except ScenarioError:
        raise
    except (CoopSenseError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    """Inverse of :func:`scenario_from_dict` (values in dB where the file uses dB)."""
    reqs = scenario.requirements
    chans = []
    for ch in scenario.channels:
        pu = [linear_to_db(g) for g in ch.pu_snr] if ch.is_het else linear_to_db(ch.pu_snr)
        entry = {
            "bandwidth_hz": ch.bandwidth_hz,
            "occupancy": ch.occupancy,
            "su_snr_db": linear_to_db(ch.su_snr) if ch.su_snr > 0 else float("-inf"),
            "pu_snr_db": pu,
        }
        if ch.sampling_hz is not None:
            entry["sampling_hz"] = ch.sampling_hz
        chans.append(entry)
    out: dict[str, Any] = {
        "slot_s": scenario.slot_s,
        "fusion": reqs.fusion.value,
        "qd": reqs.qd_target,
        "qf": reqs.qf_target,
        "n_sensors": scenario.n_sensors,
        "noise_power": scenario.noise_power,
        "channels": chans,
    }
    if scenario.traffic_p00 is not None:
        out["traffic"] = {"p00": scenario.traffic_p00}
    if scenario.robust is not None:
        rb = scenario.robust
        out["robust"] = {"eta": rb.eta, "budget": rb.budget, "samples": list(rb.samples) if rb.samples else None}
    if scenario.snr_dist is not None:
        sd = scenario.snr_dist
        out["snr_dist"] = {"mean_db": sd.mean_db, "low_db": sd.low_db, "high_db": sd.high_db}
    return out


def _parse_text(text: str, suffix: str) -> Any:
    try:
        if suffix == ".json":
            return json.loads(text)
        return yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ScenarioError(f"cannot parse scenario: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc.strerror}") from exc
    data = _parse_text(text, path.suffix.lower())
    return scenario_from_dict(data if data is not None else {})


def bundled_names() -> list[str]:
    root = resources.files("coopsense") / "scenarios"
    return sorted(p.name.rsplit(".", 1)[0] for p in root.iterdir() if p.name.endswith(".yaml"))


def bundled_scenario(name: str) -> Scenario:
    """One of the scenario files shipped with the package (e.g. ``"fig6"``)."""
    res = resources.files("coopsense") / "scenarios" / f"{name}.yaml"
    if not res.is_file():
        raise ScenarioError(f"no bundled scenario {name!r}; available: {', '.join(bundled_names())}")
    return scenario_from_dict(yaml.safe_load(res.read_text(encoding="utf-8")) or {})


def traffic_models(scenario: Scenario) -> list[DtmcTraffic]:
    """Per-channel Markov traffic with the scenario's occupancies and p00."""
    if scenario.traffic_p00 is None:
        raise ScenarioError("scenario has no traffic block (traffic.p00)")
    return [DtmcTraffic.from_duty_cycle(ch.occupancy, scenario.traffic_p00) for ch in scenario.channels]
