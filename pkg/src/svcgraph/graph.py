"""Service registry, minute snapshots and the dense matrices fed to the model."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import EmptySnapshotError, NonPositiveWeightError, SelfEdgeError, UsageError


class Profile(enum.Enum):
    BASELINE = "baseline"
    EVENT = "event"
    GAMEDAY = "gameday"
    SYNTHETIC = "synthetic"

    @classmethod
    def parse(cls, text: str) -> "Profile":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise UsageError(f"unknown profile {text!r}") from None


class ServiceRegistry:
    """Append-only name <-> dense id mapping shared by every snapshot of a corpus."""

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = []
        self._ids: dict[str, int] = {}
        for name in names:
            self.register(name)

    def register(self, name: str) -> int:
        if not name:
            raise UsageError("service name must be non-empty")
        sid = self._ids.get(name)
        if sid is None:
            sid = len(self._names)
            self._names.append(name)
            self._ids[name] = sid
        return sid

    def id_of(self, name: str) -> int:
        return self._ids[name]

    def name_of(self, sid: int) -> str:
        return self._names[sid]

    def __contains__(self, name) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)

    def __eq__(self, other) -> bool:
        return isinstance(other, ServiceRegistry) and self._names == other._names

    @property
    def names(self) -> list[str]:
        return list(self._names)

    @property
    def entries(self) -> list[tuple[int, str]]:
        return list(enumerate(self._names))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for sid, name in self.entries:
            h.update(f"{sid}\t{name}\n".encode("utf-8"))
        return h.hexdigest()

    def __repr__(self) -> str:
        return f"ServiceRegistry({len(self)} services)"


def register_service(registry: ServiceRegistry, name: str) -> int:
    return registry.register(name)


@dataclass(frozen=True)
class GraphSnapshot:
    """One minute of directed service-to-service traffic, keyed by registry ids."""

    timestamp: int
    profile: Profile
    edges: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        # plain ints/floats so serialized snapshots never carry numpy reprs
        edges = {(int(src), int(dst)): float(tps) for (src, dst), tps in self.edges.items()}
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "timestamp", int(self.timestamp))
        for (src, dst), tps in edges.items():
            if src == dst:
                raise SelfEdgeError(f"self edge on service {src}")
            if not tps > 0:
                raise NonPositiveWeightError(f"edge {src}->{dst} has tps {tps}")

    def active_nodes(self) -> set[int]:
        nodes = set()
        for src, dst in self.edges:
            nodes.add(src)
            nodes.add(dst)
        return nodes

    def total_tps(self) -> float:
        return sum(self.edges.values())

    def with_edges(self, edges: Mapping[tuple[int, int], float], profile: Profile | None = None) -> "GraphSnapshot":
        return GraphSnapshot(self.timestamp, profile or self.profile, dict(edges))


def build_snapshot(registry: ServiceRegistry, timestamp: int, profile: Profile,
                   edge_list: Iterable[tuple[str, str, float]]) -> GraphSnapshot:
    edges: dict[tuple[int, int], float] = {}
    for src_name, dst_name, tps in edge_list:
        if src_name == dst_name:
            raise SelfEdgeError(f"self edge on service {src_name!r}")
        if not tps > 0:
            raise NonPositiveWeightError(f"edge {src_name}->{dst_name} has tps {tps}")
        key = (registry.register(src_name), registry.register(dst_name))
        edges[key] = edges.get(key, 0.0) + float(tps)
    return GraphSnapshot(int(timestamp), profile, edges)


def propagation_matrix(a_norm: np.ndarray) -> np.ndarray:
    """Symmetric-normalized GCN operator D^-1/2 (S + I) D^-1/2 with S = (A + A^T)/2."""
    s = (a_norm + a_norm.T) / 2.0
    s_tilde = s + np.eye(s.shape[0])
    dinv = 1.0 / np.sqrt(s_tilde.sum(axis=1))
    # outer() keeps P bit-exactly symmetric
    return s_tilde * np.outer(dinv, dinv)


@dataclass(frozen=True, eq=False)
class NormalizedSnapshot:
    base: GraphSnapshot
    scale: float
    a_norm: np.ndarray

    @cached_property
    def target(self) -> np.ndarray:
        """Symmetrized normalized adjacency; what the decoder reconstructs."""
        return (self.a_norm + self.a_norm.T) / 2.0

    @cached_property
    def p(self) -> np.ndarray:
        return propagation_matrix(self.a_norm)

    @property
    def n(self) -> int:
        return self.a_norm.shape[0]

    def degree(self) -> np.ndarray:
        return (self.a_norm > 0).sum(axis=0) + (self.a_norm > 0).sum(axis=1)


def normalize_weights(snapshot: GraphSnapshot, n: int) -> NormalizedSnapshot:
    if not snapshot.edges:
        raise EmptySnapshotError(f"snapshot at minute {snapshot.timestamp} has no edges")
    scale = max(snapshot.edges.values())
    a = np.zeros((n, n))
    for (src, dst), tps in snapshot.edges.items():
        a[src, dst] = tps / scale
    return NormalizedSnapshot(snapshot, scale, a)
