"""Synthetic load injection along a call path and detector scoring."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, MissingEdgeError, NoSuchPathError, UsageError
from .gae import ModelParams
from .graph import GraphSnapshot, Profile
from .scoring import DEFAULT_TAU, AnomalyReport, Mark, build_reference, score_snapshot
from .sim import ServiceTopology


@dataclass(frozen=True)
class InjectionSpec:
    path: tuple[int, ...]
    pct_range: tuple[float, float] = (0.2, 1.0)
    seed: int = 0
    target_minutes: tuple[int, ...] = ()

    def __post_init__(self):
        low, high = self.pct_range
        null = low == 0 and high == 0
        if not null and not 0 < low <= high:
            raise ConfigError(f"pct_range must satisfy 0 < low <= high (or be (0, 0)), got {self.pct_range}")
        if len(self.path) < 2:
            raise ConfigError("injection path needs at least two services")

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.path, self.path[1:]))


@dataclass
class GroundTruth:
    services: frozenset[int]
    labels: dict[int, frozenset[int]] = field(default_factory=dict)  # minute -> anomalous ids


def _edge_weights(graph) -> dict[tuple[int, int], float]:
    if isinstance(graph, GraphSnapshot):
        return dict(graph.edges)
    if isinstance(graph, ServiceTopology):
        return {e: 1.0 for e in graph.edges}
    return dict(graph)


def enumerate_paths(weights: Mapping[tuple[int, int], float], length: int, limit: int = 100_000):
    children: dict[int, list[int]] = {}
    for src, dst in sorted(weights):
        children.setdefault(src, []).append(dst)
    nodes = sorted({v for e in weights for v in e})
    paths = []

    def walk(path):
        if len(paths) >= limit:
            return
        if len(path) == length:
            paths.append(tuple(path))
            return
        for nxt in children.get(path[-1], ()):
            if nxt not in path:
                walk(path + [nxt])

    for start in nodes:
        walk([start])
    return paths


def select_call_path(graph, length: int = 5, seed: int = 0, max_candidates: int = 8) -> tuple[int, ...]:
    """Path of ``length`` services whose weakest edge carries the most traffic.

    When more than ``max_candidates`` paths exist, a seeded sample of them is searched.
    """
    if length < 2:
        raise UsageError("path length must be >= 2")
    weights = _edge_weights(graph)
    paths = enumerate_paths(weights, length)
    if not paths:
        raise NoSuchPathError(f"no directed path with {length} services")
    if len(paths) > max_candidates:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,)))
        picked = rng.choice(len(paths), size=max_candidates, replace=False)
        paths = [paths[i] for i in sorted(picked)]

    def key(path):
        return (-min(weights[e] for e in zip(path, path[1:])), path)

    return min(paths, key=key)


def inject_path_load(snapshot: GraphSnapshot, spec: InjectionSpec) -> tuple[GraphSnapshot, GroundTruth]:
    edges = dict(snapshot.edges)
    for e in spec.edges:
        if e not in edges:
            raise MissingEdgeError(f"edge {e[0]}->{e[1]} missing at minute {snapshot.timestamp}")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(4, snapshot.timestamp)))
    low, high = spec.pct_range
    boosts = rng.uniform(low, high, size=len(spec.edges))
    for e, u in zip(spec.edges, boosts):
        edges[e] = edges[e] * (1.0 + u)
    truth_ids = frozenset(spec.path)
    perturbed = GraphSnapshot(snapshot.timestamp, Profile.SYNTHETIC, edges)
    return perturbed, GroundTruth(truth_ids, {snapshot.timestamp: truth_ids})


@dataclass(frozen=True)
class EvalMetrics:
    tp: int
    fp: int
    fn: int
    tn: int

    @staticmethod
    def _ratio(num, den):
        return num / den if den else None

    @property
    def precision(self) -> float | None:
        return self._ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float | None:
        return self._ratio(self.tp, self.tp + self.fn)

    @property
    def false_positive_rate(self) -> float | None:
        return self._ratio(self.fp, self.fp + self.tn)

    def to_report(self) -> str:
        def fmt(x):
            return "NoPositives" if x is None else f"{x:.6f}"

        return (f"precision={fmt(self.precision)}\nrecall={fmt(self.recall)}\n"
                f"false_positive_rate={fmt(self.false_positive_rate)}\n"
                f"tp={self.tp}\nfp={self.fp}\nfn={self.fn}\ntn={self.tn}\n")


def evaluate(reports: Sequence[AnomalyReport], truth: GroundTruth,
             universe: Sequence[int] | None = None) -> EvalMetrics:
    """Confusion counts over (service, minute) pairs.

    Services without a cosine score in a given minute are left out of that
    minute's universe.
    """
    tp = fp = fn = tn = 0
    for report in reports:
        positives = truth.labels.get(report.timestamp, truth.services)
        ids = range(len(report.scores)) if universe is None else universe
        for i in ids:
            if isinstance(report.scores[i], Mark):
                continue
            flagged, anomalous = report.flags[i], i in positives
            if flagged and anomalous:
                tp += 1
            elif flagged:
                fp += 1
            elif anomalous:
                fn += 1
            else:
                tn += 1
    return EvalMetrics(tp, fp, fn, tn)


@dataclass
class InjectionResult:
    metrics: EvalMetrics
    path: tuple[int, ...]
    reports: list[AnomalyReport]
    perturbed: list[GraphSnapshot]
    truth: GroundTruth


def split_reference(reference: Sequence[GraphSnapshot], n_minutes: int):
    """Interleave reference minutes: even positions anchor the embedding, odd ones get perturbed."""
    ordered = sorted(reference, key=lambda s: s.timestamp)
    anchor, targets = ordered[0::2], ordered[1::2]
    if len(targets) < n_minutes:
        raise UsageError(f"need {2 * n_minutes} reference minutes for {n_minutes} injected minutes, "
                         f"have {len(ordered)}")
    return anchor + targets[n_minutes:], targets[:n_minutes]


def run_injection(params: ModelParams, reference: Sequence[GraphSnapshot], path_length: int = 5,
                  pct_range: tuple[float, float] = (0.2, 1.0), n_minutes: int = 30, seed: int = 0,
                  tau: float = DEFAULT_TAU, path: Sequence[int] | None = None,
                  path_candidates: int = 8) -> InjectionResult:
    anchor, targets = split_reference(reference, n_minutes)
    ref = build_reference(params, sorted(anchor, key=lambda s: s.timestamp))
    if path is None:
        path = select_call_path(targets[0], path_length, seed, path_candidates)
    spec = InjectionSpec(tuple(path), tuple(pct_range), seed, tuple(s.timestamp for s in targets))
    reports, perturbed, labels = [], [], {}
    for snap in targets:
        bumped, truth = inject_path_load(snap, spec)
        perturbed.append(bumped)
        labels.update(truth.labels)
        reports.append(score_snapshot(params, ref, bumped, tau))
    truth = GroundTruth(frozenset(spec.path), labels)
    return InjectionResult(evaluate(reports, truth), spec.path, reports, perturbed, truth)
