"""Reference embeddings, cosine anomaly scores, fan-out diagnostics and PCA."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (DegenerateDataError, EmptyReferenceError, InvalidThresholdError,
                     ShapeMismatchError, UsageError)
from .gae import ModelParams, embed
from .graph import GraphSnapshot, Profile, ServiceRegistry
from .linalg import jacobi_eigh

DEFAULT_TAU = 0.98
NORM_EPS = 1e-12


class Mark(enum.Enum):
    """Why a service carries no cosine score."""
    ABSENT = "absent"          # inactive in the test snapshot
    NEVER_PRESENT = "never-present"  # inactive in every reference snapshot
    DEGENERATE = "degenerate"  # near-zero embedding row


@dataclass(frozen=True, eq=False)
class ReferenceEmbedding:
    z_ref: np.ndarray
    presence: np.ndarray  # per-node count of reference snapshots with nonzero degree

    @property
    def never_present(self) -> np.ndarray:
        return self.presence == 0


def build_reference(params: ModelParams, snapshots: Sequence[GraphSnapshot]) -> ReferenceEmbedding:
    if not snapshots:
        raise EmptyReferenceError("no reference snapshots")
    bad = [s.timestamp for s in snapshots if s.profile is not Profile.EVENT]
    if bad:
        raise UsageError(f"reference snapshots must be event profile (minute {bad[0]})")
    n, d = params.w0.shape[0], params.w1.shape[1]
    total = np.zeros((n, d))
    presence = np.zeros(n, dtype=int)
    for snap in snapshots:
        z = embed(params, snap).z
        active = np.zeros(n, dtype=bool)
        active[list(snap.active_nodes())] = True
        total[active] += z[active]
        presence += active
    z_ref = np.zeros((n, d))
    seen = presence > 0
    z_ref[seen] = total[seen] / presence[seen, None]
    return ReferenceEmbedding(z_ref, presence)


def cosine_scores(z_test: np.ndarray, z_ref: np.ndarray) -> list[float | Mark]:
    """Row-wise cosine similarity; rows with norm below 1e-12 on either side are DEGENERATE."""
    if z_test.shape != z_ref.shape:
        raise ShapeMismatchError(f"{z_test.shape} vs {z_ref.shape}")
    out: list[float | Mark] = []
    for a, b in zip(z_test, z_ref):
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na < NORM_EPS or nb < NORM_EPS:
            out.append(Mark.DEGENERATE)
        else:
            out.append(float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)))
    return out


@dataclass
class AnomalyReport:
    scores: list[float | Mark]
    flags: list[bool]
    tau: float
    timestamp: int | None = None
    # (service id, "test-only" | "reference-only")
    presence_anomalies: list[tuple[int, str]] = field(default_factory=list)

    def flagged(self) -> list[int]:
        return [i for i, f in enumerate(self.flags) if f]

    def scored(self) -> list[int]:
        return [i for i, s in enumerate(self.scores) if not isinstance(s, Mark)]

    def to_tsv(self, registry: ServiceRegistry) -> str:
        presence = dict(self.presence_anomalies)
        lines = ["service_name\tscore\tflag\tnote"]
        for i, score in enumerate(self.scores):
            notes = []
            if isinstance(score, Mark):
                value = "NA"
                notes.append(score.value)
            else:
                value = f"{score:.12f}"
            if i in presence:
                notes.append(f"presence:{presence[i]}")
            lines.append(f"{registry.name_of(i)}\t{value}\t{int(self.flags[i])}\t{','.join(notes)}")
        return "\n".join(lines) + "\n"


def flag_anomalies(scores: Sequence[float | Mark], tau: float = DEFAULT_TAU,
                   timestamp: int | None = None,
                   presence_anomalies: Sequence[tuple[int, str]] = ()) -> AnomalyReport:
    if not 0.0 < tau < 1.0:
        raise InvalidThresholdError(f"tau must lie in (0, 1), got {tau}")
    flags = [not isinstance(s, Mark) and s < tau for s in scores]
    return AnomalyReport(list(scores), flags, tau, timestamp, list(presence_anomalies))


def score_snapshot(params: ModelParams, reference: ReferenceEmbedding, snapshot: GraphSnapshot,
                   tau: float = DEFAULT_TAU) -> AnomalyReport:
    """Embed one test snapshot and score every service against the reference."""
    z = embed(params, snapshot).z
    scores = cosine_scores(z, reference.z_ref)
    active = snapshot.active_nodes()
    presence = []
    for i in range(len(scores)):
        in_ref = not reference.never_present[i]
        if i in active and not in_ref:
            presence.append((i, "test-only"))
        elif i not in active and in_ref:
            presence.append((i, "reference-only"))
        if i not in active:
            scores[i] = Mark.ABSENT
        elif not in_ref:
            scores[i] = Mark.NEVER_PRESENT
    return flag_anomalies(scores, tau, snapshot.timestamp, presence)


# --- fan-out diagnostics -------------------------------------------------

class Undefined(enum.Enum):
    NO_INCOMING = "undefined"


UNDEFINED = Undefined.NO_INCOMING


def incoming_total(snapshot: GraphSnapshot, service: int) -> float:
    return sum(tps for (_, dst), tps in snapshot.edges.items() if dst == service)


def fanout_ratios(snapshot: GraphSnapshot, service: int) -> dict[tuple[int, int], float | Undefined]:
    """Each outgoing edge's TPS over the service's total incoming TPS."""
    incoming = incoming_total(snapshot, service)
    out = {}
    for (src, dst), tps in sorted(snapshot.edges.items()):
        if src == service:
            out[(src, dst)] = tps / incoming if incoming > 0 else UNDEFINED
    return out


def incoming_shares(snapshot: GraphSnapshot, service: int) -> dict[tuple[int, int], float]:
    """Each upstream edge's share of the service's incoming TPS."""
    incoming = incoming_total(snapshot, service)
    return {e: tps / incoming for e, tps in sorted(snapshot.edges.items()) if e[1] == service}


class EdgeChange(enum.Enum):
    APPEARED = "appeared"
    DISAPPEARED = "disappeared"


@dataclass(frozen=True)
class FanoutEdgeDiff:
    edge: tuple[int, int]
    ratio_a: float | Undefined | None
    ratio_b: float | Undefined | None
    abs_pct_diff: float | Undefined | EdgeChange


@dataclass
class FanoutDiff:
    service: int
    edges: list[FanoutEdgeDiff]

    def to_tsv(self, registry: ServiceRegistry) -> str:
        def fmt(x):
            if x is None:
                return "-"
            if isinstance(x, enum.Enum):
                return x.value
            return f"{x:.6f}"

        lines = ["edge\tratio_a\tratio_b\tabs_pct_diff"]
        for e in self.edges:
            name = f"{registry.name_of(e.edge[0])}->{registry.name_of(e.edge[1])}"
            lines.append(f"{name}\t{fmt(e.ratio_a)}\t{fmt(e.ratio_b)}\t{fmt(e.abs_pct_diff)}")
        return "\n".join(lines) + "\n"


def fanout_diff(snapshot_a: GraphSnapshot, snapshot_b: GraphSnapshot, service: int) -> FanoutDiff:
    ra, rb = fanout_ratios(snapshot_a, service), fanout_ratios(snapshot_b, service)
    rows = []
    for edge in sorted(set(ra) | set(rb)):
        a, b = ra.get(edge), rb.get(edge)
        if a is None:
            diff = EdgeChange.APPEARED
        elif b is None:
            diff = EdgeChange.DISAPPEARED
        elif isinstance(a, Undefined) or isinstance(b, Undefined):
            diff = UNDEFINED
        else:
            diff = abs(a - b) / a * 100.0
        rows.append(FanoutEdgeDiff(edge, a, b, diff))
    return FanoutDiff(service, rows)


# --- PCA -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PCAResult:
    coords: np.ndarray      # n x k
    components: np.ndarray  # d x k, columns are unit eigenvectors
    explained: np.ndarray   # fraction of total variance per component
    mean: np.ndarray


def pca_project(z: np.ndarray, k: int = 2, rank_tol: float = 1e-12) -> PCAResult:
    z = np.asarray(z, dtype=float)
    n, d = z.shape
    if not 1 <= k <= min(n, d):
        raise UsageError(f"need 1 <= k <= min(n, d), got k={k} for {z.shape}")
    mean = z.mean(axis=0)
    centered = z - mean
    cov = centered.T @ centered / max(n - 1, 1)
    vals, vecs = jacobi_eigh(cov)
    vals = np.maximum(vals, 0.0)
    total = vals.sum()
    rank = int(np.sum(vals > rank_tol * max(vals[0], 1e-300))) if total > 0 else 0
    if rank < k:
        raise DegenerateDataError(f"covariance rank {rank} < k={k}", achievable_k=rank)
    comps = vecs[:, :k].copy()
    for j in range(k):
        nz = np.flatnonzero(np.abs(comps[:, j]) > 1e-12)
        if nz.size and comps[nz[0], j] < 0:
            comps[:, j] = -comps[:, j]
    return PCAResult(centered @ comps, comps, vals[:k] / total, mean)


def layer_separation(coords: np.ndarray, labels: Sequence[int]) -> tuple[float, float]:
    """Mean pairwise distance within the same label and across labels."""
    labels = np.asarray(labels)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    same = labels[:, None] == labels[None, :]
    off = ~np.eye(len(labels), dtype=bool)
    return float(dist[same & off].mean()), float(dist[~same].mean())
