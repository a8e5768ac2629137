"""Experiment campaigns: device-count sweeps, crossover search, capacity.

A sweep simulates every (data rate, payload, device count, replication)
combination on one shared channel and aggregates replications into mean
and sample standard deviation per point.  Each point derives its own seed
from the master seed and the point coordinates, so results are independent
of sweep composition and order.

Crossovers compare LoRa against LoRa-E goodput as functions of offered
load (generated packets per hour, device count x duty-cycle-max rate) and
locate where the LoRa-E curve first rises above the LoRa curve.  Aggregate
capacity scales a measured per-channel peak load by the number of channels
(and data rates, for LoRa, which gets one scenario per DR).
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from pathlib import Path
from statistics import mean, stdev
from typing import Iterable, Sequence

import numpy as np

from .engine import Scenario, ScenarioResult, run
from .params import (LORA, LORA_DR_COUNT_EU, DataRateProfile, RegionalPlan,
                     dr_profile, max_packet_rate, regional_plan, time_on_air)
from .traffic import DeviceConfig


@dataclass(frozen=True, slots=True)
class SweepSpec:
    """Parameter grid for one campaign on one region."""

    region: str
    dr_aliases: tuple[str, ...]
    payload_bytes: tuple[int, ...]
    device_counts: tuple[int, ...]
    horizon_ms: int = 4 * 3_600_000
    replications: int = 3
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if not self.device_counts or min(self.device_counts) < 1:
            raise ValueError("device_counts must be non-empty and positive")
        if not self.dr_aliases or not self.payload_bytes:
            raise ValueError("dr_aliases and payload_bytes must be non-empty")
        if self.horizon_ms <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon_ms}")


@dataclass(frozen=True, slots=True)
class AggregatePoint:
    """Replication average of one sweep point."""

    region: str
    dr: str
    payload_bytes: int
    devices: int
    offered_pkts_per_hour: float
    mean_goodput_bytes_per_hour: float
    std_goodput_bytes_per_hour: float
    mean_decoded_pkts_per_hour: float
    std_decoded_pkts_per_hour: float
    replications: int


@dataclass(frozen=True, slots=True)
class CrossoverQuery:
    """Which LoRa DR meets which LoRa-E DR, at what payload size."""

    lora_dr: str
    lorae_dr: str
    payload_bytes: int
    region: str = "EU868"

    def __post_init__(self) -> None:
        if self.lora_dr not in {f"DR{i}" for i in range(6)}:
            raise ValueError(f"lora_dr must be DR0..DR5, got {self.lora_dr}")
        if self.lorae_dr not in {"DR8", "DR9"}:
            raise ValueError(f"lorae_dr must be DR8 or DR9, got {self.lorae_dr}")


@dataclass(frozen=True, slots=True)
class CrossoverResult:
    load_pkts_per_hour: float
    query: CrossoverQuery


class CrossoverNotFound(RuntimeError):
    """No sign change brackets a crossover on the sweept load range."""

    def __init__(self, query: CrossoverQuery, loads: Sequence[float],
                 lora_goodput: Sequence[float], lorae_goodput: Sequence[float]):
        self.query = query
        self.loads = tuple(loads)
        self.lora_goodput = tuple(lora_goodput)
        self.lorae_goodput = tuple(lorae_goodput)
        ends = (f"load [{loads[0]:.0f}, {loads[-1]:.0f}] pkt/h: "
                f"LoRa goodput [{lora_goodput[0]:.0f}, {lora_goodput[-1]:.0f}], "
                f"LoRa-E goodput [{lorae_goodput[0]:.0f}, {lorae_goodput[-1]:.0f}] B/h"
                if loads else "empty load range")
        super().__init__(
            f"no LoRa/LoRa-E goodput crossover bracketed for {query.lora_dr} vs "
            f"{query.lorae_dr} at {query.payload_bytes} B; {ends}")


def point_seed(master_seed: int, region: str, dr: str, payload_bytes: int,
               devices: int, replication: int) -> int:
    """Deterministic per-point seed, independent of sweep composition."""
    entropy = (master_seed, zlib.crc32(region.encode()), zlib.crc32(dr.encode()),
               payload_bytes, devices, replication)
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def build_scenario(region: str, dr: str, payload_bytes: int, devices: int,
                   horizon_ms: int, seed: int) -> Scenario:
    profile = dr_profile(region, dr)
    plan = regional_plan(region, dr)
    configs = tuple(DeviceConfig(i, profile, payload_bytes, plan) for i in range(devices))
    return Scenario(devices=configs, horizon_ms=horizon_ms, master_seed=seed)


def sweep(spec: SweepSpec) -> list[ScenarioResult]:
    """One ScenarioResult per (dr, payload, devices, replication), sorted."""
    results: list[ScenarioResult] = []
    for dr in spec.dr_aliases:
        for payload in spec.payload_bytes:
            for count in spec.device_counts:
                for rep in range(spec.replications):
                    seed = point_seed(spec.master_seed, spec.region, dr,
                                      payload, count, rep)
                    scenario = build_scenario(spec.region, dr, payload, count,
                                              spec.horizon_ms, seed)
                    results.append(run(scenario))
    return results


def aggregate(spec: SweepSpec, results: Iterable[ScenarioResult]) -> list[AggregatePoint]:
    """Group sweep rows by (dr, payload, devices); mean and sample stddev."""
    groups: dict[tuple[str, int, int], list[ScenarioResult]] = {}
    for r in results:
        groups.setdefault((r.dr_label, int(r.payload_label), r.device_count), []).append(r)
    points = []
    for (dr, payload, devices), rows in sorted(groups.items()):
        goodputs = [r.goodput_bytes_per_hour for r in rows]
        rates = [r.throughput_packets_per_hour for r in rows]
        points.append(AggregatePoint(
            region=spec.region,
            dr=dr,
            payload_bytes=payload,
            devices=devices,
            offered_pkts_per_hour=rows[0].offered_load_packets_per_hour,
            mean_goodput_bytes_per_hour=mean(goodputs),
            std_goodput_bytes_per_hour=stdev(goodputs) if len(goodputs) > 1 else 0.0,
            mean_decoded_pkts_per_hour=mean(rates),
            std_decoded_pkts_per_hour=stdev(rates) if len(rates) > 1 else 0.0,
            replications=len(rows),
        ))
    return points


def per_device_rate(region: str, dr: str, payload_bytes: int) -> float:
    """Duty-cycle-max packets/hour for one device (pure arithmetic)."""
    profile = dr_profile(region, dr)
    plan = regional_plan(region, dr)
    return max_packet_rate(plan, time_on_air(profile, payload_bytes))


def _goodput_curve(spec: SweepSpec, dr: str, payload: int
                   ) -> tuple[np.ndarray, np.ndarray]:
    """(loads, mean goodputs) over spec.device_counts for one DR."""
    one = SweepSpec(region=spec.region, dr_aliases=(dr,), payload_bytes=(payload,),
                    device_counts=spec.device_counts, horizon_ms=spec.horizon_ms,
                    replications=spec.replications, master_seed=spec.master_seed)
    points = aggregate(one, sweep(one))
    points.sort(key=lambda p: p.devices)
    loads = np.array([p.offered_pkts_per_hour for p in points])
    goodputs = np.array([p.mean_goodput_bytes_per_hour for p in points])
    return loads, goodputs


def crossover_load(query: CrossoverQuery,
                   lora_curve: tuple[np.ndarray, np.ndarray],
                   lorae_curve: tuple[np.ndarray, np.ndarray]) -> float:
    """First load where the LoRa-E goodput curve rises above the LoRa one.

    The two curves live on different load grids; their difference is
    evaluated on the merged grid inside the overlapping range, and the
    first LoRa-ahead to LoRa-E-ahead transition is located by linear
    interpolation.  A crossover must be bracketed: the range has to start
    with LoRa ahead (or tied) and end with LoRa-E ahead somewhere.
    """
    lora_loads, lora_g = lora_curve
    lorae_loads, lorae_g = lorae_curve
    lo = max(lora_loads.min(), lorae_loads.min())
    hi = min(lora_loads.max(), lorae_loads.max())
    grid = np.unique(np.concatenate([lora_loads, lorae_loads]))
    grid = grid[(grid >= lo) & (grid <= hi)]
    g_lora = np.interp(grid, lora_loads, lora_g)
    g_lorae = np.interp(grid, lorae_loads, lorae_g)
    diff = g_lorae - g_lora
    if grid.size == 0 or diff[0] > 0 or not (diff > 0).any():
        raise CrossoverNotFound(query, grid.tolist(), g_lora.tolist(), g_lorae.tolist())
    i = int(np.argmax(diff > 0))          # first point strictly ahead
    x0, x1 = grid[i - 1], grid[i]
    d0, d1 = diff[i - 1], diff[i]
    return float(x0 + (x1 - x0) * (0.0 - d0) / (d1 - d0))


def find_crossover(query: CrossoverQuery, spec: SweepSpec) -> CrossoverResult:
    """Smallest load at which LoRa-E mean goodput exceeds LoRa's."""
    lora_curve = _goodput_curve(spec, query.lora_dr, query.payload_bytes)
    lorae_curve = _goodput_curve(spec, query.lorae_dr, query.payload_bytes)
    load = crossover_load(query, lora_curve, lorae_curve)
    return CrossoverResult(load_pkts_per_hour=load, query=query)


def aggregate_capacity(region: str, dr: str, per_channel_peak_pkts_per_hour: float) -> float:
    """Network-wide capacity: per-channel peak load scaled by channel count.

    Legacy LoRa additionally multiplies by its 6 DR configurations, each of
    which runs as an independent network on the same 8 channels.
    """
    plan = regional_plan(region, dr)
    profile = dr_profile(region, dr)
    dr_configs = LORA_DR_COUNT_EU if profile.family == LORA else 1
    return per_channel_peak_pkts_per_hour * plan.num_ocw_channels * dr_configs


def peak_point(points: Sequence[AggregatePoint]) -> AggregatePoint:
    """Sweep point with the highest mean goodput."""
    if not points:
        raise ValueError("no sweep points to take a peak over")
    return max(points, key=lambda p: p.mean_goodput_bytes_per_hour)


RESULT_COLUMNS = ["devices", "dr", "payload", "offered_pkts_h", "decoded_pkts_h",
                  "goodput_B_h", "loss_header", "loss_payload", "loss_collision", "seed"]

AGGREGATE_COLUMNS = ["devices", "dr", "payload", "offered_pkts_h",
                     "goodput_B_h_mean", "goodput_B_h_std",
                     "decoded_pkts_h_mean", "decoded_pkts_h_std", "replications"]


def emit(path: str | Path, header: Sequence[str], rows: Sequence[Sequence[object]],
         comments: Sequence[str] = ()) -> None:
    """Write a deterministic CSV; metadata comments precede the header row."""
    if not rows:
        raise ValueError("refusing to write an empty table")
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    lines.extend(",".join(str(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def emit_results(results: Sequence[ScenarioResult], path: str | Path) -> None:
    from .engine import csv_row
    emit(path, RESULT_COLUMNS, [csv_row(r) for r in results])


def emit_aggregate(points: Sequence[AggregatePoint], path: str | Path,
                   xscale: str = "log") -> None:
    rows = [[p.devices, p.dr, p.payload_bytes,
             round(p.offered_pkts_per_hour, 3),
             round(p.mean_goodput_bytes_per_hour, 3),
             round(p.std_goodput_bytes_per_hour, 3),
             round(p.mean_decoded_pkts_per_hour, 3),
             round(p.std_decoded_pkts_per_hour, 3),
             p.replications] for p in points]
    emit(path, AGGREGATE_COLUMNS, rows,
         comments=[f"xscale: {xscale}", "x: devices", "y: goodput_B_h_mean"])


def log_spaced_counts(lo: int, hi: int, n: int) -> tuple[int, ...]:
    """n distinct log-spaced integers from lo to hi inclusive."""
    if lo < 1 or hi < lo or n < 1:
        raise ValueError(f"need 1 <= lo <= hi and n >= 1, got {lo}, {hi}, {n}")
    raw = np.geomspace(lo, hi, n)
    counts = sorted({int(round(x)) for x in raw})
    return tuple(counts)


def _aloha_peak_devices(region: str, dr: str, payload_bytes: int) -> float:
    toa = time_on_air(dr_profile(region, dr), payload_bytes)
    rate = per_device_rate(region, dr, payload_bytes)
    return 3_600_000 / (2 * rate * toa)   # vulnerable window 2 x ToA


def default_capacity_counts(region: str, dr: str, payload_bytes: int) -> tuple[int, ...]:
    """Device grid bracketing a goodput peak: dense near it, sparse flanks.

    LoRa peaks where offered load x collision survival is maximal (about
    50 devices at DR0); LoRa-E peaks are found empirically, so its grid is
    log-spaced over a wide range.
    """
    profile = dr_profile(region, dr)
    if profile.family == LORA:
        n = _aloha_peak_devices(region, dr, payload_bytes)
        base = {round(n * f) for f in (0.35, 0.7, 1.0, 1.1, 1.2, 1.4, 2.0)}
        return tuple(sorted(max(1, c) for c in base))
    return log_spaced_counts(500, 32_000, 13)
