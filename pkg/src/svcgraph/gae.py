"""Two-layer GCN encoder, inner-product decoder, MSE reconstruction and Adam.

With identity node features the encoder is ``Z = P relu(P W0) W1``, so ``W0``
acts as a learned per-service feature table. The decoder is linear
(``A_hat = Z Z^T``) and the loss is the mean squared error over off-diagonal
cells against the symmetrized, max-normalized adjacency.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import (CorpusIOError, DivergedError, EmptyTrainSetError, NonFiniteError, RegistryMismatchError,
                     ShapeMismatchError, UsageError)
from .files import atomic_write_text
from .graph import GraphSnapshot, NormalizedSnapshot, Profile, normalize_weights

log = logging.getLogger(__name__)

MODEL_FORMAT = "svcgraph-model v1"


@dataclass(frozen=True)
class ModelConfig:
    n: int
    hidden_dim: int = 32
    embed_dim: int = 16
    epochs: int = 50
    learning_rate: float = 1e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 4
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.embed_dim <= self.hidden_dim <= self.n:
            raise UsageError(f"need 0 < embed_dim ({self.embed_dim}) <= hidden_dim ({self.hidden_dim}) "
                             f"<= n ({self.n})")
        if not self.learning_rate > 0:
            raise UsageError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise UsageError("epochs must be >= 0 and batch_size >= 1")

    @classmethod
    def for_registry(cls, n: int, **overrides) -> "ModelConfig":
        """Config for a registry of size ``n``; the default hidden width is capped at ``n``."""
        if "hidden_dim" not in overrides:
            overrides["hidden_dim"] = max(min(32, n), overrides.get("embed_dim", 16))
        return cls(n=n, **overrides)


@dataclass(frozen=True, eq=False)
class ModelParams:
    w0: np.ndarray  # n x hidden
    w1: np.ndarray  # hidden x d

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for w in (self.w0, self.w1):
            h.update(np.ascontiguousarray(w, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def copy(self) -> "ModelParams":
        return ModelParams(self.w0.copy(), self.w1.copy())


@dataclass(frozen=True, eq=False)
class AdamState:
    m0: np.ndarray
    m1: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        return cls(np.zeros_like(params.w0), np.zeros_like(params.w1),
                   np.zeros_like(params.w0), np.zeros_like(params.w1), 0)


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    z: np.ndarray
    timestamp: int | None = None
    model_fingerprint: str = ""


@dataclass
class LossReport:
    # (timestamp, profile, loss) for each evaluated snapshot
    per_snapshot: list[tuple[int, Profile, float]] = field(default_factory=list)
    history: list[float] = field(default_factory=list)

    def losses(self, profile: Profile | None = None) -> list[float]:
        return [loss for _, p, loss in self.per_snapshot if profile is None or p is profile]

    def summary(self, profile: Profile | None = None) -> dict[str, float]:
        vals = self.losses(profile)
        if not vals:
            return {}
        return {"min": float(np.min(vals)), "median": float(np.median(vals)), "max": float(np.max(vals))}

    def history_csv(self) -> str:
        return "epoch,mean_loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(self.history, 1))


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(config: ModelConfig) -> tuple[ModelParams, AdamState]:
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0,)))
    params = ModelParams(_glorot(rng, config.n, config.hidden_dim),
                         _glorot(rng, config.hidden_dim, config.embed_dim))
    return params, AdamState.zeros_like(params)


def _check_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return arr


def _forward(params: ModelParams, p: np.ndarray):
    if p.shape != (params.w0.shape[0],) * 2:
        raise ShapeMismatchError(f"propagation matrix {p.shape} vs model size {params.w0.shape[0]}")
    pre = p @ params.w0
    h = np.maximum(pre, 0.0)
    ph = p @ h
    z = ph @ params.w1
    return pre, ph, z


def encode(params: ModelParams, p: np.ndarray, timestamp: int | None = None) -> EmbeddingMatrix:
    _, _, z = _forward(params, p)
    return EmbeddingMatrix(_check_finite(z, "embedding"), timestamp, params.fingerprint())


def decode(z) -> np.ndarray:
    z = z.z if isinstance(z, EmbeddingMatrix) else z
    return z @ z.T


def _offdiag_mask(n: int) -> np.ndarray:
    return 1.0 - np.eye(n)


def reconstruction_loss(a_hat: np.ndarray, target: np.ndarray) -> float:
    if a_hat.shape != target.shape:
        raise ShapeMismatchError(f"{a_hat.shape} vs {target.shape}")
    n = a_hat.shape[0]
    if n < 2:
        return 0.0
    diff = (a_hat - target) * _offdiag_mask(n)
    return float(np.sum(diff * diff) / (n * n - n))


def _loss_and_grads(params: ModelParams, p: np.ndarray, target: np.ndarray):
    pre, ph, z = _forward(params, p)
    n = z.shape[0]
    m = max(n * n - n, 1)
    resid = (z @ z.T - target) * _offdiag_mask(n)
    loss = float(np.sum(resid * resid) / m)
    e = 2.0 * resid / m
    g_z = (e + e.T) @ z
    g_w1 = ph.T @ g_z
    g_h = (p.T @ g_z @ params.w1.T) * (pre > 0)
    g_w0 = p.T @ g_h
    return loss, g_w0, g_w1


def gradients(params: ModelParams, batch: Sequence[tuple[np.ndarray, np.ndarray]]) -> ModelParams:
    """Gradient of the mean per-snapshot loss over ``batch`` of (P, target) pairs."""
    _, grads = _batch_loss_and_grads(params, batch)
    return grads


def _batch_loss_and_grads(params, batch):
    if not batch:
        raise UsageError("empty batch")
    g0 = np.zeros_like(params.w0)
    g1 = np.zeros_like(params.w1)
    losses = []
    for p, target in batch:
        loss, d0, d1 = _loss_and_grads(params, p, target)
        losses.append(loss)
        g0 += d0
        g1 += d1
    k = len(batch)
    grads = ModelParams(_check_finite(g0 / k, "gradient"), _check_finite(g1 / k, "gradient"))
    return losses, grads


def adam_step(params: ModelParams, state: AdamState, grads: ModelParams,
              config: ModelConfig) -> tuple[ModelParams, AdamState]:
    b1, b2, lr, eps = config.adam_beta1, config.adam_beta2, config.learning_rate, config.adam_eps
    t = state.t + 1
    new_w, new_m, new_v = [], [], []
    for w, m, v, g in ((params.w0, state.m0, state.v0, grads.w0), (params.w1, state.m1, state.v1, grads.w1)):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new_w.append(w - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return ModelParams(*new_w), AdamState(new_m[0], new_m[1], new_v[0], new_v[1], t)


def prepare(snapshots: Sequence[GraphSnapshot], n: int) -> list[NormalizedSnapshot]:
    return [normalize_weights(s, n) for s in snapshots]


def train(snapshots: Sequence[GraphSnapshot], config: ModelConfig,
          init: tuple[ModelParams, AdamState] | None = None) -> tuple[ModelParams, LossReport]:
    if not snapshots:
        raise EmptyTrainSetError("training set is empty")
    bad = [s.timestamp for s in snapshots if s.profile not in (Profile.BASELINE, Profile.EVENT)]
    if bad:
        raise UsageError(f"training set may only hold baseline/event snapshots; minute {bad[0]} is not")
    data = prepare(snapshots, config.n)
    params, state = init if init is not None else init_params(config)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(1,)))
    report = LossReport()

    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            members = sorted(order[start:start + config.batch_size], key=lambda i: data[i].base.timestamp)
            batch = [(data[i].p, data[i].target) for i in members]
            losses, grads = _batch_loss_and_grads(params, batch)
            epoch_losses.extend(losses)
            params, state = adam_step(params, state, grads, config)
        mean_loss = float(np.mean(epoch_losses))
        if not math.isfinite(mean_loss):
            raise DivergedError(f"epoch {epoch + 1}: mean loss is {mean_loss}")
        report.history.append(mean_loss)
        log.debug("epoch %d mean loss %.6g", epoch + 1, mean_loss)

    report.per_snapshot = _evaluate(params, data)
    return params, report


def _evaluate(params: ModelParams, data: Sequence[NormalizedSnapshot]):
    out = []
    for ns in data:
        z = encode(params, ns.p).z
        out.append((ns.base.timestamp, ns.base.profile, reconstruction_loss(decode(z), ns.target)))
    return out


def evaluate_loss(params: ModelParams, snapshots: Sequence[GraphSnapshot]) -> LossReport:
    return LossReport(per_snapshot=_evaluate(params, prepare(snapshots, params.w0.shape[0])))


def embed(params: ModelParams, snapshot: GraphSnapshot) -> EmbeddingMatrix:
    ns = normalize_weights(snapshot, params.w0.shape[0])
    return encode(params, ns.p, snapshot.timestamp)


@dataclass(frozen=True, eq=False)
class TrainedModel:
    config: ModelConfig
    params: ModelParams
    registry_hash: str


def save_model(model: TrainedModel, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "config": asdict(model.config),
        "registry_hash": model.registry_hash,
        "seed": model.config.seed,
        "w0": model.params.w0.tolist(),
        "w1": model.params.w1.tolist(),
    }
    atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


def load_model(path, registry_hash: str | None = None) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CorpusIOError(f"cannot read model {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CorpusIOError(f"{path}: not a model file ({exc})") from exc
    if doc.get("format") != MODEL_FORMAT:
        raise CorpusIOError(f"{path}: unsupported model format {doc.get('format')!r}")
    if registry_hash is not None and doc["registry_hash"] != registry_hash:
        raise RegistryMismatchError(f"{path} was trained on a different service registry")
    config = ModelConfig(**doc["config"])
    params = ModelParams(np.array(doc["w0"], dtype=float), np.array(doc["w1"], dtype=float))
    return TrainedModel(config, params, doc["registry_hash"])
