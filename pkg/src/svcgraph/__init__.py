"""Per-service structural anomaly detection on microservice call graphs with a GCN graph autoencoder."""

from .errors import SvcGraphError, UsageError
from .gae import ModelConfig, ModelParams, embed, evaluate_loss, train
from .graph import GraphSnapshot, Profile, ServiceRegistry, build_snapshot, normalize_weights
from .inject import run_injection, select_call_path
from .scoring import DEFAULT_TAU, build_reference, cosine_scores, fanout_diff, pca_project, score_snapshot
from .sim import Scenario, generate_topology, simulate_corpus
from .telemetry import Partition, SnapshotCorpus, load_corpus, save_corpus

__version__ = "0.1.0"
