"""Synthetic layered microservice topologies and telemetry streams.

Traffic follows a flow-conservation model: every entry service receives the
profile's entry curve, and each service forwards its incoming total along its
outgoing edges in proportion to per-edge routing ratios (times a small
multiplicative jitter). Gameday windows skew the routing ratios, deployment
shifts replace a service's ratio vector from a given minute onward.

Randomness comes from numpy's PCG64 generator seeded through ``SeedSequence``
with a per-purpose spawn key, so every minute can be generated independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import check_keys, parse_floats, parse_flat, parse_ints, read_flat
from .errors import ConfigError, InfeasibleDensityError, UsageError
from .graph import GraphSnapshot, Profile, ServiceRegistry
from .telemetry import SnapshotCorpus, TelemetryRecord, auto_partition

MINUTES_PER_DAY = 1440

# spawn keys for independent random streams
_TOPOLOGY, _GAMEDAY_SIGNS, _JITTER = 0, 1, 2


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class ServiceTopology:
    layer_sizes: tuple[int, ...]
    layer_of: tuple[int, ...]
    # sorted by (src, dst); ids are topologically ordered
    edges: tuple[tuple[int, int], ...]
    base_ratio: dict[tuple[int, int], float] = field(hash=False)

    @property
    def n(self) -> int:
        return len(self.layer_of)

    def names(self) -> list[str]:
        counters = [0] * len(self.layer_sizes)
        out = []
        for layer in self.layer_of:
            out.append(f"svc-l{layer}-{counters[layer]:02d}")
            counters[layer] += 1
        return out

    def out_edges(self, src: int) -> list[tuple[int, int]]:
        return [e for e in self.edges if e[0] == src]

    def entry_services(self) -> list[int]:
        return [i for i, layer in enumerate(self.layer_of) if layer == 0]

    def out_degree_by_layer(self) -> list[float]:
        counts = [0] * len(self.layer_sizes)
        for src, _ in self.edges:
            counts[self.layer_of[src]] += 1
        return [c / size for c, size in zip(counts, self.layer_sizes)]


def default_densities(layer_sizes) -> list[float]:
    """Edge probabilities giving a tent-shaped mean out-degree, peaking mid-graph."""
    hops = len(layer_sizes) - 1
    out = []
    for k in range(hops):
        pos = (k + 0.5) / hops
        target_degree = 1.5 + 3.0 * (1.0 - abs(2.0 * pos - 1.0))
        out.append(min(1.0, target_degree / layer_sizes[k + 1]))
    return out


def generate_topology(layer_sizes, densities=None, seed: int = 0,
                      intra_density: float = 0.0) -> ServiceTopology:
    layer_sizes = tuple(int(s) for s in layer_sizes)
    if len(layer_sizes) < 3 or min(layer_sizes) < 1:
        raise UsageError(f"need >= 3 layers of size >= 1, got {list(layer_sizes)}")
    if densities is None:
        densities = default_densities(layer_sizes)
    densities = [float(d) for d in densities]
    if len(densities) != len(layer_sizes) - 1:
        raise InfeasibleDensityError(
            f"{len(layer_sizes) - 1} inter-layer densities required, got {len(densities)}")
    for k, d in enumerate(densities):
        if not 0.0 < d <= 1.0:
            raise InfeasibleDensityError(f"density {d} for layer {k} cannot keep the graph connected")
    if not 0.0 <= intra_density < 1.0:
        raise InfeasibleDensityError(f"intra-layer density {intra_density} outside [0, 1)")

    rng = _rng(seed, _TOPOLOGY)
    starts = np.cumsum((0,) + layer_sizes)
    layers = [list(range(starts[k], starts[k + 1])) for k in range(len(layer_sizes))]
    layer_of = tuple(k for k, size in enumerate(layer_sizes) for _ in range(size))
    edges: set[tuple[int, int]] = set()

    for k, density in enumerate(densities):
        upper, lower = layers[k], layers[k + 1]
        mask = rng.random((len(upper), len(lower))) < density
        for i, src in enumerate(upper):
            for j, dst in enumerate(lower):
                if mask[i, j]:
                    edges.add((src, dst))
        for dst in lower:
            if not any((src, dst) in edges for src in upper):
                edges.add((int(rng.choice(upper)), dst))
        for src in upper:
            if not any((src, dst) in edges for dst in lower):
                edges.add((src, int(rng.choice(lower))))
        # within-layer calls only on interior layers, low id -> high id keeps it acyclic
        if intra_density > 0 and 0 < k:
            for a in range(len(upper)):
                for b in range(a + 1, len(upper)):
                    if rng.random() < intra_density:
                        edges.add((upper[a], upper[b]))

    ordered = tuple(sorted(edges))
    base_ratio = {}
    for src in range(len(layer_of)):
        outs = [e for e in ordered if e[0] == src]
        if not outs:
            continue
        w = rng.uniform(0.2, 1.0, size=len(outs))
        w = w / w.sum()
        for e, r in zip(outs, w):
            base_ratio[e] = float(r)
    return ServiceTopology(layer_sizes, layer_of, ordered, base_ratio)


@dataclass(frozen=True)
class TrafficProfile:
    kind: Profile
    base_tps: float = 1000.0
    daily_amplitude: float = 0.3
    event_surge: float = 2.0
    gameday_level: float = 3.0
    ratio_jitter: float = 0.02
    gameday_distortion: float = 0.30

    def __post_init__(self):
        if not (0 <= self.ratio_jitter < 1 and 0 <= self.gameday_distortion < 1):
            raise ConfigError("jitter and distortion must lie in [0, 1)")
        if not (self.base_tps > 0 and 0 <= self.daily_amplitude < 1):
            raise ConfigError("base_tps must be > 0 and daily_amplitude in [0, 1)")

    def entry_tps(self, minute: int, window: tuple[int, int] | None = None) -> float:
        daily = self.base_tps * (1.0 + self.daily_amplitude * math.sin(2 * math.pi * minute / MINUTES_PER_DAY))
        if self.kind is Profile.EVENT and window is not None:
            start, end = window
            bump = math.sin(math.pi * (minute - start + 0.5) / (end - start))
            return daily * (1.0 + self.event_surge * bump)
        if self.kind is Profile.GAMEDAY:
            return self.base_tps * self.gameday_level
        return daily


@dataclass
class Scenario:
    topology: ServiceTopology
    schedule: list[tuple[int, int, Profile]] = field(default_factory=list)
    deployment_shifts: list[tuple[int, int, tuple[float, ...]]] = field(default_factory=list)
    rng_seed: int = 0
    base_tps: float = 1000.0
    daily_amplitude: float = 0.3
    event_surge: float = 2.0
    gameday_level: float = 3.0
    jitter: float = 0.02
    distortion: float = 0.30
    duration: int | None = None

    def __post_init__(self):
        windows = sorted(self.schedule)
        for start, end, _ in windows:
            if end <= start or start < 0:
                raise ConfigError(f"bad schedule window {start}-{end}")
        for (_, e1, _), (s2, _, _) in zip(windows, windows[1:]):
            if s2 < e1:
                raise ConfigError("schedule windows overlap")
        self.schedule = windows
        for minute, sid, ratios in self.deployment_shifts:
            outs = self.topology.out_edges(sid)
            if len(ratios) != len(outs):
                raise ConfigError(f"shift at minute {minute}: service {sid} has {len(outs)} outgoing edges, "
                                  f"got {len(ratios)} ratios")
            if abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) <= 0:
                raise ConfigError(f"shift at minute {minute}: ratios must be positive and sum to 1")
        self.deployment_shifts = sorted(self.deployment_shifts)
        self._gameday_signs = _rng(self.rng_seed, _GAMEDAY_SIGNS).choice(
            [-1.0, 1.0], size=len(self.topology.edges))
        self._profiles = {kind: TrafficProfile(kind, self.base_tps, self.daily_amplitude, self.event_surge,
                                               self.gameday_level, self.jitter, self.distortion)
                          for kind in (Profile.BASELINE, Profile.EVENT, Profile.GAMEDAY)}

    @property
    def total_minutes(self) -> int:
        if self.duration is not None:
            return self.duration
        return max((end for _, end, _ in self.schedule), default=MINUTES_PER_DAY)

    def window_at(self, minute: int) -> tuple[Profile, tuple[int, int] | None]:
        for start, end, kind in self.schedule:
            if start <= minute < end:
                return kind, (start, end)
        return Profile.BASELINE, None

    def profile(self, kind: Profile) -> TrafficProfile:
        return self._profiles[kind]

    def ratios_at(self, minute: int) -> dict[tuple[int, int], float]:
        ratios = dict(self.topology.base_ratio)
        for when, sid, vector in self.deployment_shifts:
            if when <= minute:
                for e, r in zip(self.topology.out_edges(sid), vector):
                    ratios[e] = r
        kind, _ = self.window_at(minute)
        if kind is Profile.GAMEDAY and self.distortion > 0:
            skewed = {e: ratios[e] * (1.0 + self.distortion * sign)
                      for e, sign in zip(self.topology.edges, self._gameday_signs)}
            totals: dict[int, float] = {}
            for (src, _), r in skewed.items():
                totals[src] = totals.get(src, 0.0) + r
            ratios = {e: r / totals[e[0]] for e, r in skewed.items()}
        return ratios


def minute_edges(scenario: Scenario, minute: int) -> tuple[Profile, dict[tuple[int, int], float]]:
    topo = scenario.topology
    kind, window = scenario.window_at(minute)
    profile = scenario.profile(kind)
    ratios = scenario.ratios_at(minute)
    noise = _rng(scenario.rng_seed, _JITTER, minute).uniform(-1.0, 1.0, size=len(topo.edges))

    inflow = [0.0] * topo.n
    entry = profile.entry_tps(minute, window)
    for sid in topo.entry_services():
        inflow[sid] = entry
    edges = {}
    # edges are sorted by src and ids are topologically ordered
    for idx, (src, dst) in enumerate(topo.edges):
        tps = inflow[src] * ratios[(src, dst)] * (1.0 + profile.ratio_jitter * noise[idx])
        if tps > 0:
            edges[(src, dst)] = tps
            inflow[dst] += tps
    return kind, edges


def generate_snapshots(scenario: Scenario, duration_minutes: int | None = None) -> list[GraphSnapshot]:
    duration = scenario.total_minutes if duration_minutes is None else duration_minutes
    if duration < 1:
        raise UsageError("duration must be at least one minute")
    out = []
    for minute in range(duration):
        kind, edges = minute_edges(scenario, minute)
        out.append(GraphSnapshot(minute, kind, edges))
    return out


def generate_stream(scenario: Scenario, duration_minutes: int | None = None) -> list[TelemetryRecord]:
    names = scenario.topology.names()
    records = []
    for snap in generate_snapshots(scenario, duration_minutes):
        for (src, dst), tps in snap.edges.items():
            records.append(TelemetryRecord(snap.timestamp * 60, names[src], names[dst], tps))
    return records


def simulate_corpus(scenario: Scenario, duration_minutes: int | None = None) -> SnapshotCorpus:
    registry = ServiceRegistry(scenario.topology.names())
    snapshots = generate_snapshots(scenario, duration_minutes)
    layers = dict(zip(registry.names, scenario.topology.layer_of))
    return SnapshotCorpus(registry, snapshots, auto_partition(snapshots), layers)


SCENARIO_KEYS = ("layer_sizes", "densities", "intra_density", "seed", "duration", "schedule", "shifts",
                 "base_tps", "daily_amplitude", "event_surge", "gameday_level", "jitter", "distortion")


def scenario_from_dict(values: dict[str, str], seed: int | None = None) -> Scenario:
    """Build a scenario from flat config values.

    ``schedule = baseline:0-1440, event:1440-1700``;
    ``shifts = 2000@svc-l2-03=0.3/0.7; ...`` (service by name or id).
    """
    check_keys(values, SCENARIO_KEYS, "scenario")
    try:
        layer_sizes = parse_ints(values.get("layer_sizes", "4,12,30,12,4"))
        densities = parse_floats(values["densities"]) if "densities" in values else None
        rng_seed = int(values.get("seed", "0")) if seed is None else seed
        topology = generate_topology(layer_sizes, densities, rng_seed,
                                     float(values.get("intra_density", "0")))
        schedule = []
        for item in filter(None, (s.strip() for s in values.get("schedule", "").split(","))):
            kind, span = item.split(":")
            start, end = span.split("-")
            schedule.append((int(start), int(end), Profile.parse(kind)))
        names = topology.names()
        shifts = []
        for item in filter(None, (s.strip() for s in values.get("shifts", "").split(";"))):
            head, vector = item.split("=")
            minute, service = head.split("@")
            service = service.strip()
            sid = names.index(service) if service in names else int(service)
            shifts.append((int(minute), sid, tuple(parse_floats(vector))))
        knobs = {k: float(values[k]) for k in ("base_tps", "daily_amplitude", "event_surge",
                                               "gameday_level", "jitter", "distortion") if k in values}
        duration = int(values["duration"]) if "duration" in values else None
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"scenario: cannot parse value ({exc})") from None
    return Scenario(topology, schedule, shifts, rng_seed, duration=duration, **knobs)


def load_scenario(path, seed: int | None = None) -> Scenario:
    return scenario_from_dict(read_flat(path), seed)


def parse_scenario(text: str, seed: int | None = None) -> Scenario:
    return scenario_from_dict(parse_flat(text), seed)
