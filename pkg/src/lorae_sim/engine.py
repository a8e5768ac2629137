"""Collision engine: places emissions on a ms x sub-carrier grid and decodes.

A scenario is one shared radio channel: a single 125 kHz channel for LoRa,
or a single OCW channel (280/688/3120 sub-carriers) for LoRa-E.  Emissions
are integer-millisecond, half-open time intervals bound to one sub-carrier
(or to the whole channel for LoRa).  Two emissions collide iff they share
the carrier and their intervals intersect; any intersection destroys both.
There is no capture effect and no partial-overlap survival.

Decoding: a LoRa-E packet needs at least one uncollided header replica and
at least ``ceil(coding_rate x fragment_count)`` uncollided fragments; a
LoRa packet needs its single emission uncollided.

``run`` is the vectorised scenario driver; ``build_attempts`` exposes the
same scenario as per-packet objects for inspection and cross-checking.
Both consume identical RNG draws: per device (in index order) the arrival
schedule first, then one block of hopping seeds, then one block of grids.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .hopping import SEED_COUNT, CarrierId, hop_hash_array, hopping_sequence
from .params import LORA, LORA_E, DataRateProfile, RegionalPlan, max_packet_rate
from .params import lorae_fragment_durations, lora_time_on_air
from .traffic import ArrivalSchedule, DeviceConfig, device_stream, generate_schedule

DEFAULT_HORIZON_MS = 4 * 3_600_000   # 4 simulated hours


class ScenarioConfigError(ValueError):
    """Scenario mixes incompatible devices (family or channel plan)."""


class Outcome(enum.Enum):
    DECODED = "decoded"
    LOST_HEADER = "lost_header"        # every header replica collided
    LOST_PAYLOAD = "lost_payload"      # too few clean fragments to rebuild
    LOST_COLLISION = "lost_collision"  # LoRa single-emission collision


class EmissionKind(enum.Enum):
    HEADER_REPLICA = "header"
    FRAGMENT = "fragment"
    LORA_PACKET = "lora"


@dataclass(slots=True)
class Emission:
    """One contiguous transmission on one carrier; ``carrier`` None = whole
    LoRa channel.  ``index`` numbers replicas/fragments within the packet."""

    owner: int
    kind: EmissionKind
    index: int
    carrier: CarrierId | None
    t_start_ms: int
    t_end_ms: int
    collided: bool = False

    def __post_init__(self) -> None:
        if self.t_end_ms <= self.t_start_ms:
            raise ValueError("emission must have positive duration")


@dataclass(slots=True)
class TransmissionAttempt:
    """One packet: its draws, its emissions and (after adjudication) its fate."""

    packet_id: int
    device_id: int
    profile: DataRateProfile
    payload_bytes: int
    start_ms: int
    grid: int = 0
    seed: int | None = None
    emissions: list[Emission] = field(default_factory=list)
    outcome: Outcome | None = None


@dataclass(frozen=True, slots=True)
class Scenario:
    """Device population sharing one channel over one simulated horizon."""

    devices: tuple[DeviceConfig, ...]
    horizon_ms: int = DEFAULT_HORIZON_MS
    master_seed: int = 0

    def __post_init__(self) -> None:
        if not self.devices:
            raise ScenarioConfigError("scenario needs at least one device")
        if self.horizon_ms <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon_ms}")
        families = {d.profile.family for d in self.devices}
        if len(families) > 1:
            raise ScenarioConfigError(
                f"LoRa and LoRa-E devices cannot share a scenario, got {sorted(families)}")
        if len({d.plan for d in self.devices}) > 1:
            raise ScenarioConfigError("all devices must share one channel plan")
        if len({d.device_id for d in self.devices}) != len(self.devices):
            raise ScenarioConfigError("device ids must be unique")

    @property
    def family(self) -> str:
        return self.devices[0].profile.family

    @property
    def plan(self) -> RegionalPlan:
        return self.devices[0].plan

    def offered_load_pkts_per_hour(self) -> float:
        return sum(max_packet_rate(d.plan, d.time_on_air_ms) for d in self.devices)


@dataclass(frozen=True, slots=True)
class ScenarioResult:
    """Aggregate counters of one run, normalised to per-hour rates."""

    device_count: int
    dr_label: str
    payload_label: str
    master_seed: int
    horizon_ms: int
    generated_packets: int
    decoded_packets: int
    offered_load_packets_per_hour: float
    throughput_packets_per_hour: float
    goodput_bytes_per_hour: float
    loss_breakdown: dict[Outcome, int]

    def __post_init__(self) -> None:
        losses = sum(self.loss_breakdown.values())
        if self.decoded_packets + losses != self.generated_packets:
            raise ValueError("decoded + losses must equal generated")


CSV_COLUMNS = ["devices", "dr", "payload", "offered_pkts_h", "decoded_pkts_h",
               "goodput_B_h", "loss_header", "loss_payload", "loss_collision", "seed"]


def csv_row(result: ScenarioResult) -> list[object]:
    return [
        result.device_count,
        result.dr_label,
        result.payload_label,
        round(result.offered_load_packets_per_hour, 3),
        round(result.throughput_packets_per_hour, 3),
        round(result.goodput_bytes_per_hour, 3),
        result.loss_breakdown.get(Outcome.LOST_HEADER, 0),
        result.loss_breakdown.get(Outcome.LOST_PAYLOAD, 0),
        result.loss_breakdown.get(Outcome.LOST_COLLISION, 0),
        result.master_seed,
    ]


def lora_grid_duration_ms(profile: DataRateProfile, payload_bytes: int) -> int:
    """LoRa airtime rounded up to the engine's whole-ms grid."""
    return math.ceil(lora_time_on_air(profile, payload_bytes))


def fragment_threshold(profile: DataRateProfile, fragment_count: int) -> int:
    """Clean fragments needed to decode: ceil(coding_rate x count)."""
    return math.ceil(profile.coding_rate * fragment_count)


# ---------------------------------------------------------------------------
# Draw order (shared by the object and vectorised paths)

@dataclass(frozen=True, slots=True)
class _PacketDraws:
    device: DeviceConfig
    schedule: ArrivalSchedule
    seeds: np.ndarray   # one 9-bit hopping seed per packet (LoRa-E only)
    grids: np.ndarray   # one grid index per packet (LoRa-E only)


def _draw_packets(scenario: Scenario) -> list[_PacketDraws]:
    """Per-device schedules and per-packet hopping draws, in a fixed order."""
    out: list[_PacketDraws] = []
    lorae = scenario.family == LORA_E
    for index, dev in enumerate(scenario.devices):
        rng = device_stream(scenario.master_seed, index)
        schedule = generate_schedule(dev, scenario.horizon_ms, rng)
        n = len(schedule.start_times)
        if lorae:
            seeds = rng.integers(0, SEED_COUNT, size=n, dtype=np.uint32)
            grids = rng.integers(0, dev.plan.num_grids, size=n, dtype=np.uint32)
        else:
            seeds = np.empty(0, dtype=np.uint32)
            grids = np.empty(0, dtype=np.uint32)
        out.append(_PacketDraws(dev, schedule, seeds, grids))
    return out


# ---------------------------------------------------------------------------
# Object path

def enumerate_emissions(attempt: TransmissionAttempt, plan: RegionalPlan,
                        profile: DataRateProfile) -> list[Emission]:
    """Emissions of one packet: header replicas back-to-back, then fragments.

    LoRa-E replicas and fragments all hop: sequence position k (replicas
    first) takes slot k of the packet's hopping sequence on its fixed grid.
    LoRa emits one whole-channel interval of the packet's airtime.
    """
    if profile.family == LORA:
        dur = lora_grid_duration_ms(profile, attempt.payload_bytes)
        return [Emission(attempt.packet_id, EmissionKind.LORA_PACKET, 0, None,
                         attempt.start_ms, attempt.start_ms + dur)]
    durations = lorae_fragment_durations(profile, attempt.payload_bytes)
    n_head = profile.header_replicas
    slots = hopping_sequence(attempt.seed, n_head + len(durations), plan.carriers_per_grid)
    emissions: list[Emission] = []
    t = attempt.start_ms
    for i in range(n_head):
        carrier = CarrierId(0, attempt.grid, slots[i])
        emissions.append(Emission(attempt.packet_id, EmissionKind.HEADER_REPLICA, i,
                                  carrier, t, t + profile.header_duration_ms))
        t += profile.header_duration_ms
    for j, dur in enumerate(durations):
        carrier = CarrierId(0, attempt.grid, slots[n_head + j])
        emissions.append(Emission(attempt.packet_id, EmissionKind.FRAGMENT, j,
                                  carrier, t, t + dur))
        t += dur
    return emissions


def _carrier_key(emission: Emission, carriers_per_grid: int) -> int:
    if emission.carrier is None:
        return 0
    return emission.carrier.grid * carriers_per_grid + emission.carrier.slot


def detect_collisions(emissions: list[Emission], carriers_per_grid: int = 1) -> None:
    """Set ``collided`` on every emission that overlaps a same-carrier one.

    Flags are symmetric (both parties marked) and idempotent.  Sweep per
    carrier in start order: an emission overlaps an earlier one iff its
    start precedes the running max end, and overlaps a later one iff the
    next start precedes its own end.
    """
    groups: dict[int, list[Emission]] = {}
    for em in emissions:
        groups.setdefault(_carrier_key(em, carriers_per_grid), []).append(em)
    for group in groups.values():
        group.sort(key=lambda em: em.t_start_ms)
        prev_max_end = -1
        for i, em in enumerate(group):
            hit = em.t_start_ms < prev_max_end
            if i + 1 < len(group) and group[i + 1].t_start_ms < em.t_end_ms:
                hit = True
            if hit:
                em.collided = True
            prev_max_end = max(prev_max_end, em.t_end_ms)


def adjudicate(attempt: TransmissionAttempt) -> Outcome:
    """Decide a packet's fate from its emissions' collision flags."""
    if attempt.profile.family == LORA:
        (em,) = attempt.emissions
        return Outcome.LOST_COLLISION if em.collided else Outcome.DECODED
    headers = [em for em in attempt.emissions if em.kind is EmissionKind.HEADER_REPLICA]
    fragments = [em for em in attempt.emissions if em.kind is EmissionKind.FRAGMENT]
    clean_headers = sum(not em.collided for em in headers)
    clean_fragments = sum(not em.collided for em in fragments)
    if clean_headers == 0:
        return Outcome.LOST_HEADER
    if clean_fragments < fragment_threshold(attempt.profile, len(fragments)):
        return Outcome.LOST_PAYLOAD
    return Outcome.DECODED


def build_attempts(scenario: Scenario) -> list[TransmissionAttempt]:
    """All packets of a scenario as objects, emissions enumerated, no flags."""
    attempts: list[TransmissionAttempt] = []
    plan = scenario.plan
    for draws in _draw_packets(scenario):
        dev = draws.device
        for i, start in enumerate(draws.schedule.start_times):
            attempt = TransmissionAttempt(
                packet_id=len(attempts),
                device_id=dev.device_id,
                profile=dev.profile,
                payload_bytes=dev.payload_bytes,
                start_ms=start,
                grid=int(draws.grids[i]) if draws.grids.size else 0,
                seed=int(draws.seeds[i]) if draws.seeds.size else None,
            )
            attempt.emissions = enumerate_emissions(attempt, plan, dev.profile)
            attempts.append(attempt)
    return attempts


# ---------------------------------------------------------------------------
# Vectorised path

def _collide_arrays(key: np.ndarray, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Exact all-pairs overlap flags via a sorted per-carrier sweep."""
    if key.size == 0:
        return np.zeros(0, dtype=bool)
    order = np.lexsort((start, key))
    k = key[order].astype(np.int64)
    s = start[order].astype(np.int64)
    e = end[order].astype(np.int64)
    big = int(e.max()) + 1 if e.size else 1
    group_cummax = np.maximum.accumulate(k * big + e)   # k sorted, so per-group
    same_prev = np.empty(k.shape, dtype=bool)
    same_prev[0] = False
    same_prev[1:] = k[1:] == k[:-1]
    prev_max_end = np.full(k.shape, -1, dtype=np.int64)
    prev_max_end[1:] = group_cummax[:-1] - k[1:] * big
    hit_earlier = same_prev & (s < prev_max_end)
    hit_later = np.zeros(k.shape, dtype=bool)
    hit_later[:-1] = (k[1:] == k[:-1]) & (s[1:] < e[:-1])
    collided = np.empty(k.shape, dtype=bool)
    collided[order] = hit_earlier | hit_later
    return collided


def _lorae_template(profile: DataRateProfile, payload_bytes: int
                    ) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-packet emission offsets/durations; returns (offsets, durs, n_head)."""
    durations = lorae_fragment_durations(profile, payload_bytes)
    n_head = profile.header_replicas
    durs = np.array((profile.header_duration_ms,) * n_head + durations, dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(durs[:-1])))
    return offsets, durs, n_head


def _lorae_slots(seeds: np.ndarray, n_hops: int, carriers_per_grid: int) -> np.ndarray:
    """Hop slots per packet, shape (n_packets, n_hops), repeats adjusted."""
    hops = np.arange(n_hops, dtype=np.uint32)[None, :]
    slots = (hop_hash_array(seeds[:, None], hops) % np.uint32(carriers_per_grid)
             ).astype(np.int32)
    cpg = np.int32(carriers_per_grid)
    for h in range(1, n_hops):
        same = slots[:, h] == slots[:, h - 1]
        slots[same, h] = (slots[same, h] + 1) % cpg
    return slots


def _aggregate(scenario: Scenario, outcomes: dict[Outcome, int],
               decoded_bytes: int) -> ScenarioResult:
    per_hour = 3_600_000 / scenario.horizon_ms
    decoded = outcomes.pop(Outcome.DECODED, 0)
    outcomes = {k: v for k, v in outcomes.items() if v}
    generated = decoded + sum(outcomes.values())
    drs = sorted({d.profile.alias for d in scenario.devices})
    payloads = sorted({d.payload_bytes for d in scenario.devices})
    return ScenarioResult(
        device_count=len(scenario.devices),
        dr_label="+".join(drs),
        payload_label="+".join(str(p) for p in payloads),
        master_seed=scenario.master_seed,
        horizon_ms=scenario.horizon_ms,
        generated_packets=generated,
        decoded_packets=decoded,
        offered_load_packets_per_hour=scenario.offered_load_pkts_per_hour(),
        throughput_packets_per_hour=decoded * per_hour,
        goodput_bytes_per_hour=decoded_bytes * per_hour,
        loss_breakdown=outcomes,
    )


def run(scenario: Scenario) -> ScenarioResult:
    """Simulate one scenario deterministically and return its counters."""
    draws = _draw_packets(scenario)
    if scenario.family == LORA:
        return _run_lora(scenario, draws)
    return _run_lorae(scenario, draws)


def _run_lora(scenario: Scenario, draws: list[_PacketDraws]) -> ScenarioResult:
    starts, payloads, durs = [], [], []
    for d in draws:
        dur = lora_grid_duration_ms(d.device.profile, d.device.payload_bytes)
        for t in d.schedule.start_times:
            starts.append(t)
            payloads.append(d.device.payload_bytes)
            durs.append(dur)
    start = np.asarray(starts, dtype=np.int64)
    end = start + np.asarray(durs, dtype=np.int64)
    key = np.zeros(start.shape, dtype=np.int64)   # one shared channel
    collided = _collide_arrays(key, start, end)
    decoded = ~collided
    outcomes = {Outcome.DECODED: int(decoded.sum()),
                Outcome.LOST_COLLISION: int(collided.sum())}
    decoded_bytes = int(np.asarray(payloads, dtype=np.int64)[decoded].sum())
    return _aggregate(scenario, outcomes, decoded_bytes)


def _run_lorae(scenario: Scenario, draws: list[_PacketDraws]) -> ScenarioResult:
    plan = scenario.plan
    cpg = plan.carriers_per_grid
    key_parts: list[np.ndarray] = []
    start_parts: list[np.ndarray] = []
    end_parts: list[np.ndarray] = []
    owner_parts: list[np.ndarray] = []
    head_parts: list[np.ndarray] = []
    meta: list[tuple[int, int]] = []   # per packet: payload bytes, decode threshold
    next_packet = 0
    for d in draws:
        n = len(d.schedule.start_times)
        if n == 0:
            continue
        profile = d.device.profile
        offsets, durs, n_head = _lorae_template(profile, d.device.payload_bytes)
        n_em = len(durs)
        slots = _lorae_slots(d.seeds, n_em, cpg)                    # (n, n_em)
        keys = d.grids.astype(np.int64)[:, None] * cpg + slots
        starts = np.asarray(d.schedule.start_times, dtype=np.int64)[:, None] + offsets
        owners = next_packet + np.arange(n, dtype=np.int64)
        key_parts.append(keys.ravel())
        start_parts.append(starts.ravel())
        end_parts.append((starts + durs).ravel())
        owner_parts.append(np.repeat(owners, n_em))
        head_parts.append(np.tile(np.arange(n_em) < n_head, n))
        threshold = fragment_threshold(profile, n_em - n_head)
        meta.extend((d.device.payload_bytes, threshold) for _ in range(n))
        next_packet += n
    if next_packet == 0:
        return _aggregate(scenario, {}, 0)
    key = np.concatenate(key_parts)
    start = np.concatenate(start_parts)
    end = np.concatenate(end_parts)
    owner = np.concatenate(owner_parts)
    is_head = np.concatenate(head_parts)
    collided = _collide_arrays(key, start, end)
    clean = ~collided
    n_pkts = next_packet
    clean_heads = np.bincount(owner[is_head & clean], minlength=n_pkts)
    clean_frags = np.bincount(owner[~is_head & clean], minlength=n_pkts)
    payload_arr = np.asarray([m[0] for m in meta], dtype=np.int64)
    thresholds = np.asarray([m[1] for m in meta], dtype=np.int64)
    lost_header = clean_heads == 0
    decoded = ~lost_header & (clean_frags >= thresholds)
    lost_payload = ~lost_header & ~decoded
    outcomes = {Outcome.DECODED: int(decoded.sum()),
                Outcome.LOST_HEADER: int(lost_header.sum()),
                Outcome.LOST_PAYLOAD: int(lost_payload.sum())}
    decoded_bytes = int(payload_arr[decoded].sum())
    return _aggregate(scenario, outcomes, decoded_bytes)


def run_reference(scenario: Scenario) -> ScenarioResult:
    """Object-path twin of :func:`run` for cross-checking small scenarios."""
    attempts = build_attempts(scenario)
    emissions = [em for a in attempts for em in a.emissions]
    detect_collisions(emissions, scenario.plan.carriers_per_grid)
    outcomes: dict[Outcome, int] = {}
    decoded_bytes = 0
    for a in attempts:
        a.outcome = adjudicate(a)
        outcomes[a.outcome] = outcomes.get(a.outcome, 0) + 1
        if a.outcome is Outcome.DECODED:
            decoded_bytes += a.payload_bytes
    return _aggregate(scenario, outcomes, decoded_bytes)
