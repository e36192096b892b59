"""Raw telemetry parsing, minute aggregation and on-disk snapshot corpora.

Corpus directory layout::

    registry.tsv          id<TAB>name
    manifest.tsv          filename<TAB>partition
    layers.tsv            name<TAB>layer   (optional, written by the simulator)
    snapshots/<minute>.snap
"""

from __future__ import annotations

import enum
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import (CorpusIOError, FormatVersionMismatch, MalformedLineError,
                     NonPositiveWeightError, SelfEdgeError, SvcGraphError, UsageError)
from .files import atomic_write_text
from .graph import GraphSnapshot, Profile, ServiceRegistry

log = logging.getLogger(__name__)

SNAPSHOT_MAGIC = "svcgraph-snapshot"
SNAPSHOT_VERSION = "v1"


class Partition(enum.Enum):
    TRAIN = "train"
    REFERENCE = "reference"
    EVALUATE = "evaluate"


@dataclass(frozen=True)
class TelemetryRecord:
    timestamp: int  # epoch seconds
    source: str
    destination: str
    tps: float

    def __post_init__(self):
        if self.source == self.destination:
            raise SelfEdgeError(f"self edge on service {self.source!r}")
        if not self.tps > 0:
            raise NonPositiveWeightError(f"{self.source}->{self.destination} has tps {self.tps}")

    def to_line(self) -> str:
        return f"{self.timestamp},{self.source},{self.destination},{self.tps!r}"


def parse_record(line: str) -> TelemetryRecord:
    parts = line.strip().split(",")
    if len(parts) != 4:
        raise MalformedLineError(f"expected 4 fields, got {len(parts)}: {line.strip()!r}")
    ts, src, dst, tps = (p.strip() for p in parts)
    try:
        timestamp = int(ts)
        value = float(tps)
    except ValueError:
        raise MalformedLineError(f"unparseable number in {line.strip()!r}") from None
    if not src or not dst:
        raise MalformedLineError(f"empty service name in {line.strip()!r}")
    if not math.isfinite(value):
        raise MalformedLineError(f"non-finite tps in {line.strip()!r}")
    return TelemetryRecord(timestamp, src, dst, value)


def read_telemetry(lines: Iterable[str]) -> tuple[list[TelemetryRecord], int]:
    """Parse CSV lines, skipping comments/blank lines. Returns (records, skipped)."""
    records, skipped = [], 0
    for lineno, line in enumerate(lines, 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            records.append(parse_record(line))
        except SvcGraphError as exc:
            skipped += 1
            log.debug("line %d skipped: %s", lineno, exc)
    if skipped:
        log.warning("skipped %d malformed telemetry line(s)", skipped)
    return records, skipped


def aggregate_minutes(records: Iterable[TelemetryRecord], registry: ServiceRegistry,
                      profile: Profile = Profile.BASELINE) -> list[GraphSnapshot]:
    buckets: dict[int, dict[tuple[str, str], list[float]]] = defaultdict(lambda: defaultdict(list))
    for rec in records:
        buckets[rec.timestamp // 60][(rec.source, rec.destination)].append(rec.tps)

    # new names are registered sorted so ids do not depend on record order
    new_names = sorted({name for bucket in buckets.values() for pair in bucket for name in pair
                        if name not in registry})
    for name in new_names:
        registry.register(name)

    snapshots = []
    for minute in sorted(buckets):
        edges = {(registry.id_of(s), registry.id_of(d)): math.fsum(vals)
                 for (s, d), vals in buckets[minute].items()}
        snapshots.append(GraphSnapshot(minute, profile, edges))
    return snapshots


@dataclass
class SnapshotCorpus:
    registry: ServiceRegistry
    snapshots: list[GraphSnapshot]
    partitions: list[Partition]
    layers: dict[str, int] | None = field(default=None)

    def __post_init__(self):
        if len(self.snapshots) != len(self.partitions):
            raise UsageError("one partition label per snapshot required")
        for prev, cur in zip(self.snapshots, self.snapshots[1:]):
            if cur.timestamp <= prev.timestamp:
                raise UsageError(f"snapshots not strictly increasing at minute {cur.timestamp}")
        n = len(self.registry)
        for snap, part in zip(self.snapshots, self.partitions):
            for src, dst in snap.edges:
                if not (0 <= src < n and 0 <= dst < n):
                    raise UsageError(f"snapshot {snap.timestamp} references unknown id")
            if part is Partition.REFERENCE and snap.profile is not Profile.EVENT:
                raise UsageError(f"reference snapshot {snap.timestamp} is {snap.profile.value}, not event")

    def select(self, partition: Partition) -> list[GraphSnapshot]:
        return [s for s, p in zip(self.snapshots, self.partitions) if p is partition]

    def by_minute(self, minute: int) -> GraphSnapshot:
        for snap in self.snapshots:
            if snap.timestamp == minute:
                return snap
        raise UsageError(f"no snapshot at minute {minute}")


def auto_partition(snapshots: list[GraphSnapshot]) -> list[Partition]:
    """Baseline and 4 of every 5 event minutes train; every 5th event minute is reference."""
    parts, n_event = [], 0
    for snap in snapshots:
        if snap.profile is Profile.BASELINE:
            parts.append(Partition.TRAIN)
        elif snap.profile is Profile.EVENT:
            parts.append(Partition.REFERENCE if n_event % 5 == 4 else Partition.TRAIN)
            n_event += 1
        else:
            parts.append(Partition.EVALUATE)
    return parts


def format_snapshot(snap: GraphSnapshot) -> str:
    lines = [f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} {snap.timestamp} {snap.profile.value}"]
    for (src, dst) in sorted(snap.edges):
        lines.append(f"{src}\t{dst}\t{snap.edges[(src, dst)]!r}")
    return "\n".join(lines) + "\n"


def parse_snapshot(text: str, source: str = "<snapshot>") -> GraphSnapshot:
    lines = text.splitlines()
    if not lines:
        raise CorpusIOError(f"{source}: empty snapshot file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != SNAPSHOT_MAGIC:
        raise CorpusIOError(f"{source}: bad snapshot header {lines[0]!r}")
    if header[1] != SNAPSHOT_VERSION:
        raise FormatVersionMismatch(f"{source}: version {header[1]}, expected {SNAPSHOT_VERSION}")
    timestamp, profile = int(header[2]), Profile.parse(header[3])
    edges = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        try:
            src, dst, tps = line.split("\t")
            edges[(int(src), int(dst))] = float(tps)
        except ValueError:
            raise CorpusIOError(f"{source}: bad edge line {line!r}") from None
    return GraphSnapshot(timestamp, profile, edges)


def snapshot_filename(snap: GraphSnapshot) -> str:
    return f"snapshots/{snap.timestamp}.snap"


def save_registry(registry: ServiceRegistry, path) -> None:
    atomic_write_text(path, "".join(f"{sid}\t{name}\n" for sid, name in registry.entries))


def load_registry(path) -> ServiceRegistry:
    registry = ServiceRegistry()
    for line in _read(path).splitlines():
        if not line:
            continue
        sid, name = line.split("\t", 1)
        if registry.register(name) != int(sid):
            raise CorpusIOError(f"{path}: registry ids not dense at {sid}")
    return registry


def save_corpus(corpus: SnapshotCorpus, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_registry(corpus.registry, directory / "registry.tsv")
    manifest = []
    for snap, part in zip(corpus.snapshots, corpus.partitions):
        fname = snapshot_filename(snap)
        atomic_write_text(directory / fname, format_snapshot(snap))
        manifest.append(f"{fname}\t{part.value}\n")
    if corpus.layers is not None:
        atomic_write_text(directory / "layers.tsv",
                          "".join(f"{name}\t{layer}\n" for name, layer in corpus.layers.items()))
    atomic_write_text(directory / "manifest.tsv", "".join(manifest))


def load_corpus(directory) -> SnapshotCorpus:
    directory = Path(directory)
    registry = load_registry(directory / "registry.tsv")
    snapshots, partitions = [], []
    for line in _read(directory / "manifest.tsv").splitlines():
        if not line.strip():
            continue
        fname, part = line.split("\t")
        try:
            partitions.append(Partition(part.strip()))
        except ValueError:
            raise CorpusIOError(f"manifest: unknown partition {part!r}") from None
        snapshots.append(parse_snapshot(_read(directory / fname), source=fname))
    layers = None
    if (directory / "layers.tsv").exists():
        layers = {}
        for line in _read(directory / "layers.tsv").splitlines():
            if line:
                name, layer = line.rsplit("\t", 1)
                layers[name] = int(layer)
    return SnapshotCorpus(registry, snapshots, partitions, layers)


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusIOError(f"cannot read {path}: {exc.strerror}") from exc
