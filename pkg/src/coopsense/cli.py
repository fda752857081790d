"""Command-line entry point: ``coopsense plan|sweep|simulate|robust``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import het_strategies as hs
from . import strategies as st
from .detection import db_to_linear
from .errors import CoopSenseError, NoSolutionError, ScenarioError, SizeGuardError
from .model import Scenario, Schedule, evaluate_schedule
from .robust import (
    RobustSpec,
    make_rng,
    rop1_solve,
    rop4_solve,
    rop_min_samples,
    rop_min_variance,
    throughput_variance_traffic,
)
from .scenario import bundled_names, bundled_scenario, load_scenario, traffic_models

CSV_HEADER = [
    "strategy",
    "fusion",
    "param",
    "value",
    "throughput_bps",
    "variance",
    "samples_total",
    "runtime_ms",
    "seed",
    "error",
]

EXIT_OK, EXIT_INPUT, EXIT_SIZE, EXIT_NO_SOLUTION = 0, 2, 3, 4
Z90 = 1.6448536269514722  # two-sided 90% normal quantile


class InputError(CoopSenseError):
    pass


def _relaxed_schedule(scenario: Scenario) -> Schedule:
    raise InputError("par-relax yields a bound, not a schedule")


HOM_STRATEGIES: dict[str, Callable[[Scenario], Schedule]] = {
    "seq": st.sequential_schedule,
    "par-dp": lambda s: st.parallel_dp(s)[1],
    "par-marginal": lambda s: st.parallel_marginal(s)[1],
    "par-gh": lambda s: st.parallel_greedy(s)[1],
    "seqpar-dp": st.seqpar_dp,
    "seqpar-gh": st.seqpar_greedy,
    "iter-par": st.iterative_parallel,
}
HET_STRATEGIES: dict[str, Callable[[Scenario], Schedule]] = {
    "het-seq-opt": lambda s: hs.het_sequential(s, "opt"),
    "het-seq-avg": lambda s: hs.het_sequential(s, "avg"),
    "het-par-dp": lambda s: hs.het_parallel(s, "dp_opt"),
    "het-par-dpsim": lambda s: hs.het_parallel(s, "dp_sim"),
    "het-par-avg": lambda s: hs.het_parallel(s, "avg_greedy"),
    "het-seqpar-dp": lambda s: hs.het_seqpar(s, "dp_opt"),
    "het-seqpar-h": lambda s: hs.het_seqpar(s, "heuristic"),
}
STRATEGY_NAMES = [*HOM_STRATEGIES, "par-relax", *HET_STRATEGIES]
SWEEP_PARAMS = ("n_sensors", "n_channels", "qd", "eta", "snr_mean", "samples")


@dataclass
class Result:
    strategy: str
    fusion: str
    param: str = ""
    value: float | str = ""
    throughput_bps: float | str = ""
    variance: float | str = ""
    samples_total: int | str = ""
    runtime_ms: float | str = ""
    seed: int | str = ""
    error: str = ""
    extra: dict | None = None

    def csv_row(self) -> list[str]:
        return [_fmt(getattr(self, k)) for k in CSV_HEADER]

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in CSV_HEADER}
        out.update(self.extra or {})
        return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


# -- helpers --------------------------------------------------------------------------


def _load(path: str) -> Scenario:
    if path.startswith("bundled:"):
        return bundled_scenario(path.split(":", 1)[1])
    return load_scenario(path)


def _with_fusion(scenario: Scenario, fusion: str | None) -> Scenario:
    return scenario if fusion is None else scenario.with_requirements(fusion=fusion)


def _strategy(name: str) -> Callable[[Scenario], Schedule]:
    fn = HOM_STRATEGIES.get(name) or HET_STRATEGIES.get(name)
    if fn is None and name != "par-relax":
        raise InputError(f"unknown strategy {name!r}; valid names: {', '.join(STRATEGY_NAMES)}")
    return fn


def parse_grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / step + 1e-9))
            values = [a + i * step for i in range(n + 1)]
        else:
            values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad value list {text!r}; use a:b:step or v1,v2,...") from None
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise InputError(f"values must be nonempty and strictly increasing: {text!r}")
    return [round(v, 12) for v in values]


def parse_count_grid(text: str) -> list[float]:
    """``a:b:n`` gives n points from a to b; a comma list is taken as is."""
    if "," in text or ":" not in text:
        return parse_grid(text)
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise InputError(f"bad grid {text!r}; use a:b:n") from None
    if n < 1 or (n > 1 and b <= a):
        raise InputError(f"bad grid {text!r}; need b > a and n >= 1")
    return [float(v) for v in np.linspace(a, b, n)]


def _run(scenario: Scenario, name: str) -> tuple[float, Schedule | None, dict]:
    if name == "par-relax":
        rel = st.parallel_relaxed(scenario)
        return rel.bound, None, {"allocation": list(rel.allocation)}
    sched = _strategy(name)(scenario)
    report = evaluate_schedule(scenario, sched, name)
    extra = {"allocation": list(sched.allocation(scenario.n_channels))}
    return report.total_bps, sched, extra


def _traffic_variance(scenario: Scenario, sched: Schedule | None) -> tuple[float | str, int | str]:
    if sched is None or scenario.traffic_p00 is None or scenario.robust is None or not scenario.robust.samples:
        return "", ""
    W = scenario.robust.samples
    return throughput_variance_traffic(scenario, sched, W, traffic_models(scenario)), sum(W)


def _emit(results: Sequence[Result], out: str, stream) -> None:
    if out == "json":
        json.dump([r.as_dict() for r in results], stream, indent=2, default=str)
        stream.write("\n")
        return
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in results:
        writer.writerow(r.csv_row())


# -- commands ---------------------------------------------------------------------------


def cmd_plan(args, stream) -> int:
    scenario = _with_fusion(_load(args.scenario), args.fusion)
    _strategy(args.strategy)
    fusion = scenario.requirements.fusion.value
    t0 = time.perf_counter()
    value, sched, extra = _run(scenario, args.strategy)
    runtime = (time.perf_counter() - t0) * 1e3
    variance, samples = _traffic_variance(scenario, sched)
    result = Result(
        args.strategy,
        fusion,
        throughput_bps=value,
        variance=variance,
        samples_total=samples,
        runtime_ms=runtime if args.timing else "",
        extra=extra,
    )
    if args.out == "text":
        stream.write(f"strategy {args.strategy} ({fusion.upper()} fusion), "
                     f"M={scenario.n_channels}, N={scenario.n_sensors}\n")
        if sched is not None:
            stream.write("channel  sensors          start_ms  duration_ms  end_ms\n")
            for job in sorted(sched.jobs, key=lambda j: (j.start_s, j.channel)):
                members = ",".join(str(s) for s in job.sensors)
                stream.write(f"{job.channel:>7}  {members:<15}  {job.start_s * 1e3:8.4f}  "
                             f"{job.duration_s * 1e3:11.4f}  {job.end_s * 1e3:6.4f}\n")
            unsensed = [m for m in range(scenario.n_channels) if m not in sched.sensed_channels()]
            if unsensed:
                stream.write(f"unsensed channels: {', '.join(map(str, unsensed))}\n")
        stream.write(f"allocation: {extra['allocation']}\n")
        stream.write(f"throughput: {value:.6f} bit/s\n")
        if variance != "":
            stream.write(f"variance: {variance:.6f} (bit/s)^2 with {samples} traffic samples\n")
        return EXIT_OK
    if args.out == "json" and sched is not None:
        result.extra["jobs"] = [
            {"channel": j.channel, "sensors": list(j.sensors), "start_s": j.start_s, "duration_s": j.duration_s}
            for j in sched.jobs
        ]
        result.extra["completion_s"] = list(sched.completion)
    _emit([result], args.out, stream)
    return EXIT_OK


def _apply_param(scenario: Scenario, param: str, value: float) -> Scenario:
    if param == "n_sensors":
        n = int(round(value))
        if scenario.is_het:
            raise InputError("n_sensors sweeps need a scenario with one SNR per channel")
        return scenario.with_sensors(n)
    if param == "n_channels":
        k = int(round(value))
        if k < 1:
            raise ScenarioError("n_channels must be at least 1")
        base = scenario.channels
        return scenario.with_channels(base[i % len(base)] for i in range(k))
    if param == "qd":
        return scenario.with_requirements(qd_target=value)
    if param == "snr_mean":
        return scenario.with_uniform_snr(db_to_linear(value))
    rb = scenario.robust or RobustSpec(eta=math.inf)
    if param == "eta":
        return replace(scenario, robust=replace(rb, eta=value))
    if param == "samples":
        return replace(scenario, robust=replace(rb, samples=(int(round(value)),) * scenario.n_channels))
    raise InputError(f"unknown sweep parameter {param!r}")


def _robust_point(scenario: Scenario, mode: str) -> tuple[float, float, dict]:
    rb = scenario.robust or RobustSpec(eta=math.inf)
    if mode == "rop1":
        W = rb.samples or (20,) * scenario.n_channels
        choice = rop1_solve(scenario, traffic_models(scenario), W, rb.eta)
    else:
        if scenario.snr_dist is None:
            raise ScenarioError("rop4 needs an snr_dist block")
        choice = rop4_solve(scenario, scenario.snr_dist.distribution(), rb.eta)
    extra = {"allocation": list(choice.allocation), "loss": choice.loss}
    return choice.throughput_bps, choice.variance, extra


def cmd_sweep(args, stream) -> int:
    if "=" not in args.vary:
        raise InputError("--vary must look like PARAM=a:b:step")
    param, grid = args.vary.split("=", 1)
    if param not in SWEEP_PARAMS:
        raise InputError(f"unknown sweep parameter {param!r}; valid: {', '.join(SWEEP_PARAMS)}")
    values = parse_grid(grid)
    names = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not names:
        raise InputError("--strategies must name at least one strategy")
    for name in names:
        if name not in ("rop1", "rop4"):
            _strategy(name)
    base = _with_fusion(_load(args.scenario), args.fusion)
    fusion = base.requirements.fusion.value
    results = []
    for name in names:
        for value in values:
            row = Result(name, fusion, param, value)
            t0 = time.perf_counter()
            try:
                scenario = _apply_param(base, param, value)
                if name in ("rop1", "rop4"):
                    thr, var, extra = _robust_point(scenario, name)
                    row.throughput_bps, row.variance, row.extra = thr, var, extra
                    row.strategy = f"{name} k={'-'.join(map(str, extra['allocation']))} loss={extra['loss']:.6g}"
                else:
                    thr, sched, extra = _run(scenario, name)
                    row.throughput_bps, row.extra = thr, extra
                    row.variance, row.samples_total = _traffic_variance(scenario, sched)
            except SizeGuardError as exc:
                row.error = f"size-guard: {exc}"
            except NoSolutionError as exc:
                row.error = f"no-solution: {exc}"
            except CoopSenseError as exc:
                row.error = f"{type(exc).__name__}: {exc}"
            if args.timing:
                row.runtime_ms = (time.perf_counter() - t0) * 1e3
            if args.normalize and isinstance(row.throughput_bps, float) and not row.error:
                row.throughput_bps /= float(scenario.weights.sum())
            results.append(row)
    _emit(results, args.out, stream)
    return EXIT_OK


def _ci_halfwidth(values: np.ndarray) -> float | str:
    if values.size < 2:
        return ""
    return float(Z90 * values.std(ddof=1) / math.sqrt(values.size))


def cmd_simulate(args, stream) -> int:
    scenario = _with_fusion(_load(args.scenario), args.fusion)
    if scenario.snr_dist is None:
        raise ScenarioError("simulate needs an snr_dist block (mean_db, low_db, high_db)")
    if args.runs < 1:
        raise InputError("--runs must be at least 1")
    default = list(HET_STRATEGIES) if args.het else ["seq", "par-dp", "seqpar-dp"]
    names = [s.strip() for s in args.strategies.split(",")] if args.strategies else default
    for name in names:
        _strategy(name)
    dist = scenario.snr_dist.distribution()
    M, N = scenario.n_channels, scenario.n_sensors
    streams = np.random.SeedSequence(args.seed).spawn(args.runs)
    draws = []
    for ss in streams:
        rng = np.random.Generator(np.random.Philox(ss))
        if args.het:
            draws.append(scenario.with_snr_matrix(dist.sample(rng, (M, N))))
        else:
            chans = [replace(ch, pu_snr=float(g)) for ch, g in zip(scenario.channels, dist.sample(rng, M))]
            draws.append(scenario.with_channels(chans))
    fusion = scenario.requirements.fusion.value
    mean_scenario = scenario.with_uniform_snr(db_to_linear(scenario.snr_dist.mean_db))
    results = []
    for name in names:
        t0 = time.perf_counter()
        row = Result(name, fusion, "ci90_halfwidth", seed=args.seed)
        try:
            vals = np.array([_run(s, name)[0] for s in draws])
            row.throughput_bps = float(np.mean(vals))
            row.value = _ci_halfwidth(vals)
            row.variance = float(vals.var(ddof=1)) if vals.size > 1 else ""
            row.extra = {"runs": args.runs}
        except SizeGuardError as exc:
            row.error = f"size-guard: {exc}"
        except CoopSenseError as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        if args.timing:
            row.runtime_ms = (time.perf_counter() - t0) * 1e3
        results.append(row)
        ref = Result(name, fusion, "mean_snr_db", scenario.snr_dist.mean_db)
        try:
            ref.throughput_bps = _run(mean_scenario, name)[0]
        except CoopSenseError as exc:
            ref.error = f"{type(exc).__name__}: {exc}"
        results.append(ref)
    _emit(results, args.out, stream)
    return EXIT_OK


def _robust_schedule(scenario: Scenario, name: str) -> Schedule:
    return _strategy(name)(scenario)


def cmd_robust(args, stream) -> int:
    scenario = _with_fusion(_load(args.scenario), args.fusion)
    fusion = scenario.requirements.fusion.value
    results: list[Result] = []
    mode = args.mode
    if mode in ("rop1", "rop4"):
        if not args.eta_grid:
            raise InputError(f"{mode} needs --eta-grid")
        etas = parse_count_grid(args.eta_grid)
        if args.sigma:
            etas = [e * e for e in etas]
        samples = args.samples
        for eta in etas:
            row = Result(mode, fusion, "eta", eta)
            try:
                scen = _apply_param(scenario, "eta", eta)
                if samples is not None:
                    scen = _apply_param(scen, "samples", samples)
                thr, var, extra = _robust_point(scen, mode)
                row.throughput_bps, row.variance, row.extra = thr, var, extra
                if mode == "rop1":
                    row.samples_total = sum(scen.robust.samples or (20,) * scen.n_channels)
                row.strategy = f"{mode} k={'-'.join(map(str, extra['allocation']))} loss={extra['loss']:.6g}"
            except NoSolutionError as exc:
                row.error = f"no-solution: {exc}"
            results.append(row)
    elif mode == "rop2":
        if not args.sigma_grid:
            raise InputError("rop2 needs --sigma-grid (throughput standard deviations in bit/s)")
        sched = _robust_schedule(scenario, args.strategy)
        thr = evaluate_schedule(scenario, sched).total_bps
        traffic = traffic_models(scenario)
        designs = [args.design] if args.design else [1, 2]
        for design in designs:
            for sigma in parse_count_grid(args.sigma_grid):
                row = Result(f"rop2-design{design}", fusion, "sigma", sigma, throughput_bps=thr)
                try:
                    W = rop_min_samples(design, scenario, sched, traffic, sigma * sigma)
                    row.samples_total = sum(W)
                    row.variance = throughput_variance_traffic(scenario, sched, W, traffic)
                    row.extra = {"samples": W}
                except CoopSenseError as exc:
                    row.error = f"{type(exc).__name__}: {exc}"
                results.append(row)
    elif mode == "rop3":
        if not args.budget:
            raise InputError("rop3 needs --budget (one value or a list)")
        sched = _robust_schedule(scenario, args.strategy)
        thr = evaluate_schedule(scenario, sched).total_bps
        traffic = traffic_models(scenario)
        for budget in parse_grid(args.budget):
            row = Result("rop3", fusion, "budget", int(budget), throughput_bps=thr)
            try:
                W, var = rop_min_variance(scenario, sched, traffic, int(budget))
                row.variance, row.samples_total, row.extra = var, sum(W), {"samples": W}
            except CoopSenseError as exc:
                row.error = f"{type(exc).__name__}: {exc}"
            results.append(row)
    _emit(results, args.out, stream)
    if results and all(r.error for r in results):
        return EXIT_NO_SOLUTION
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopsense",
        description="Cooperative multi-channel spectrum-sensing schedules and robust selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, outs=("csv", "json")):
        p.add_argument("--scenario", required=True,
                       help="YAML/JSON scenario file, or bundled:NAME (" + ", ".join(bundled_names()) + ")")
        p.add_argument("--fusion", choices=["or", "and"], help="override the scenario's fusion rule")
        p.add_argument("--out", choices=outs, default=outs[0])
        p.add_argument("--quiet", action="store_true", help="suppress diagnostics on stderr")
        p.add_argument("--timing", action="store_true", help="fill the runtime_ms column")

    p = sub.add_parser("plan", help="compute one schedule and its expected throughput")
    common(p, ("text", "json", "csv"))
    p.add_argument("--strategy", required=True, help="one of: " + ", ".join(STRATEGY_NAMES))

    p = sub.add_parser("sweep", help="vary one parameter over a grid")
    common(p)
    p.add_argument("--vary", required=True, help="PARAM=a:b:step or PARAM=v1,v2 with PARAM in " + ", ".join(SWEEP_PARAMS))
    p.add_argument("--strategies", required=True, help="comma-separated strategy names (rop1/rop4 allowed)")
    p.add_argument("--normalize", action="store_true", help="divide throughput by sum of C(1-u)")

    p = sub.add_parser("simulate", help="Monte Carlo over random detection SNRs")
    common(p)
    p.add_argument("--runs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--het", action="store_true", help="draw one SNR per (channel, sensor)")
    p.add_argument("--strategies", help="comma-separated strategy names")

    p = sub.add_parser("robust", help="robust selection and traffic-sample design")
    common(p)
    p.add_argument("--mode", required=True, choices=["rop1", "rop2", "rop3", "rop4"])
    p.add_argument("--eta-grid", help="variance thresholds a:b:n (n points) or a list")
    p.add_argument("--sigma", action="store_true", help="read --eta-grid as standard deviations")
    p.add_argument("--sigma-grid", help="throughput standard deviations for rop2, a:b:n or a list")
    p.add_argument("--budget", help="total sample budget(s) for rop3")
    p.add_argument("--design", type=int, choices=[1, 2], help="rop2 design (default: both)")
    p.add_argument("--samples", type=int, help="per-channel traffic samples W for rop1")
    p.add_argument("--strategy", default="par-dp", help="schedule used by rop2/rop3")
    return parser


COMMANDS = {"plan": cmd_plan, "sweep": cmd_sweep, "simulate": cmd_simulate, "robust": cmd_robust}


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    buffer = io.StringIO()
    try:
        code = COMMANDS[args.command](args, buffer)
    except SizeGuardError as exc:
        if not args.quiet:
            stderr.write(f"error: size guard: {exc}\n")
        return EXIT_SIZE
    except NoSolutionError as exc:
        if not args.quiet:
            stderr.write(f"error: no solution: {exc}\n")
        return EXIT_NO_SOLUTION
    except (CoopSenseError, ValueError) as exc:
        if not args.quiet:
            stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_INPUT
    stdout.write(buffer.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())
