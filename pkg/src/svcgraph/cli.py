"""``svcgraph`` command line: simulate, ingest, train, score, diagnose, inject-eval, pca.

Exit codes: 0 success, 1 internal/numerical failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import gae, inject, scoring
from .config import check_keys, read_flat
from .errors import ConfigError, SvcGraphError, UnknownServiceError, UsageError
from .files import atomic_write_text
from .graph import Profile, ServiceRegistry
from .sim import load_scenario, simulate_corpus
from .telemetry import (Partition, SnapshotCorpus, aggregate_minutes, auto_partition,
                        format_snapshot, load_corpus, read_telemetry, save_corpus)

log = logging.getLogger("svcgraph")


@dataclass
class RunConfig:
    seed: int = 0
    hidden_dim: int | None = None  # None: min(32, registry size)
    embed_dim: int = 16
    epochs: int = 50
    learning_rate: float = 1e-2
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 4
    tau: float = scoring.DEFAULT_TAU
    select: str = "evaluate"
    path_length: int = 5
    path_candidates: int = 8
    pct_low: float = 0.2
    pct_high: float = 1.0
    n_minutes: int = 30

    @classmethod
    def from_values(cls, values: dict[str, str]) -> "RunConfig":
        check_keys(values, [f.name for f in fields(cls)], "config")
        types = {"seed": int, "hidden_dim": int, "embed_dim": int, "epochs": int, "batch_size": int,
                 "path_length": int, "path_candidates": int, "n_minutes": int, "select": str}
        out = {}
        for key, raw in values.items():
            try:
                out[key] = types.get(key, float)(raw)
            except ValueError:
                raise ConfigError(f"config: bad value for {key}: {raw!r}") from None
        return cls(**out)

    def model_config(self, n: int) -> gae.ModelConfig:
        kw = dict(embed_dim=self.embed_dim, epochs=self.epochs, learning_rate=self.learning_rate,
                  adam_beta1=self.adam_beta1, adam_beta2=self.adam_beta2, adam_eps=self.adam_eps,
                  batch_size=self.batch_size, seed=self.seed)
        if self.hidden_dim is not None:
            kw["hidden_dim"] = self.hidden_dim
        return gae.ModelConfig.for_registry(n, **kw)


def select_snapshots(corpus: SnapshotCorpus, selector: str):
    """``train|reference|evaluate``, ``profile:<name>`` or ``minutes:<a>-<b>`` (inclusive)."""
    if selector in {p.value for p in Partition}:
        return corpus.select(Partition(selector))
    kind, _, arg = selector.partition(":")
    if kind == "profile":
        profile = Profile.parse(arg)
        return [s for s in corpus.snapshots if s.profile is profile]
    if kind == "minutes":
        try:
            lo, hi = (int(x) for x in arg.split("-"))
        except ValueError:
            raise UsageError(f"bad minute range {arg!r}") from None
        return [s for s in corpus.snapshots if lo <= s.timestamp <= hi]
    raise UsageError(f"unknown selector {selector!r}")


def _load_model_for(path, corpus: SnapshotCorpus) -> gae.TrainedModel:
    if not Path(path).exists():
        raise UsageError(f"model file {path} not found")
    return gae.load_model(path, corpus.registry.fingerprint())


def _service_id(registry: ServiceRegistry, service: str) -> int:
    if service in registry:
        return registry.id_of(service)
    raise UnknownServiceError(f"unknown service {service!r}")


def cmd_simulate(args, cfg: RunConfig) -> int:
    scenario = load_scenario(args.scenario, seed=args.seed)
    corpus = simulate_corpus(scenario)
    save_corpus(corpus, args.out)
    if args.csv:
        names = corpus.registry.names
        lines = ["# timestamp,source,destination,tps"]
        for snap in corpus.snapshots:
            for (src, dst), tps in sorted(snap.edges.items()):
                lines.append(f"{snap.timestamp * 60},{names[src]},{names[dst]},{tps!r}")
        atomic_write_text(args.csv, "\n".join(lines) + "\n")
    counts = Counter(s.profile.value for s in corpus.snapshots)
    for profile in Profile:
        if counts[profile.value]:
            print(f"{profile.value}\t{counts[profile.value]}")
    return 0


def cmd_ingest(args, cfg: RunConfig) -> int:
    registry = ServiceRegistry()
    snapshots, skipped = [], 0
    for spec in args.inputs:
        path, _, profile = spec.partition(":")
        profile = Profile.parse(profile) if profile else Profile.BASELINE
        try:
            with open(path, encoding="utf-8") as fh:
                records, bad = read_telemetry(fh)
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
        skipped += bad
        snapshots.extend(aggregate_minutes(records, registry, profile))
    snapshots.sort(key=lambda s: s.timestamp)
    for a, b in zip(snapshots, snapshots[1:]):
        if a.timestamp == b.timestamp:
            raise UsageError(f"minute {a.timestamp} appears in more than one input file")
    save_corpus(SnapshotCorpus(registry, snapshots, auto_partition(snapshots)), args.out)
    print(f"snapshots\t{len(snapshots)}\nservices\t{len(registry)}\nskipped_lines\t{skipped}")
    if skipped:
        print(f"warning: skipped {skipped} malformed line(s)", file=sys.stderr)
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    corpus = load_corpus(args.corpus)
    train = corpus.select(Partition.TRAIN)
    config = cfg.model_config(len(corpus.registry))
    log.info("model config: %s", asdict(config))
    params, report = gae.train(train, config)
    out = Path(args.out)
    gae.save_model(gae.TrainedModel(config, params, corpus.registry.fingerprint()), out / "model.json")
    atomic_write_text(out / "loss.csv", report.history_csv())
    for profile in (Profile.BASELINE, Profile.EVENT):
        summary = report.summary(profile)
        if summary:
            print(f"{profile.value}\tmin={summary['min']:.6g}\tmedian={summary['median']:.6g}\t"
                  f"max={summary['max']:.6g}")
    return 0


def cmd_score(args, cfg: RunConfig) -> int:
    corpus = load_corpus(args.corpus)
    model = _load_model_for(args.model, corpus)
    tests = select_snapshots(corpus, args.select or cfg.select)
    if not tests:
        raise UsageError("selector matched no snapshots")
    tau = cfg.tau if args.tau is None else args.tau
    reference = scoring.build_reference(model.params, corpus.select(Partition.REFERENCE))
    out = Path(args.out)
    names = corpus.registry.names
    flag_counts, scored_counts = Counter(), Counter()
    for snap in tests:
        report = scoring.score_snapshot(model.params, reference, snap, tau)
        atomic_write_text(out / "reports" / f"{snap.timestamp}.tsv", report.to_tsv(corpus.registry))
        for i in report.scored():
            scored_counts[i] += 1
            flag_counts[i] += report.flags[i]
    lines = ["service_name\tflagged_minutes\tscored_minutes\tflag_frequency"]
    for i in sorted(scored_counts, key=lambda i: (-flag_counts[i] / scored_counts[i], i)):
        lines.append(f"{names[i]}\t{flag_counts[i]}\t{scored_counts[i]}\t{flag_counts[i] / scored_counts[i]:.4f}")
    atomic_write_text(out / "summary.tsv", "\n".join(lines) + "\n")

    losses = gae.evaluate_loss(model.params, corpus.snapshots)
    loss_lines = ["profile\tmin_loss\tmedian_loss\tmax_loss"]
    for profile in Profile:
        s = losses.summary(profile)
        if s:
            loss_lines.append(f"{profile.value}\t{s['min']!r}\t{s['median']!r}\t{s['max']!r}")
    atomic_write_text(out / "losses.tsv", "\n".join(loss_lines) + "\n")
    flagged = sum(1 for i in flag_counts if flag_counts[i])
    print(f"scored {len(tests)} snapshot(s); {flagged} service(s) flagged at least once (tau={tau})")
    return 0


def cmd_diagnose(args, cfg: RunConfig) -> int:
    corpus = load_corpus(args.corpus)
    sid = _service_id(corpus.registry, args.service)
    diff = scoring.fanout_diff(corpus.by_minute(args.minute_a), corpus.by_minute(args.minute_b), sid)
    text = diff.to_tsv(corpus.registry)
    if args.out:
        atomic_write_text(args.out, text)
    sys.stdout.write(text)
    return 0


def cmd_inject_eval(args, cfg: RunConfig) -> int:
    corpus = load_corpus(args.corpus)
    model = _load_model_for(args.model, corpus)
    result = inject.run_injection(model.params, corpus.select(Partition.REFERENCE), cfg.path_length,
                                  (cfg.pct_low, cfg.pct_high), cfg.n_minutes, cfg.seed, cfg.tau,
                                  path_candidates=cfg.path_candidates)
    out = Path(args.out)
    names = corpus.registry.names
    report = result.metrics.to_report() + f"path={'>'.join(names[i] for i in result.path)}\n"
    atomic_write_text(out / "metrics.txt", report)
    for snap, rep in zip(result.perturbed, result.reports):
        atomic_write_text(out / "perturbed" / f"{snap.timestamp}.snap", format_snapshot(snap))
        atomic_write_text(out / "reports" / f"{snap.timestamp}.tsv", rep.to_tsv(corpus.registry))
    sys.stdout.write(report)
    return 0


def cmd_pca(args, cfg: RunConfig) -> int:
    corpus = load_corpus(args.corpus)
    model = _load_model_for(args.model, corpus)
    selector = args.select or "reference"
    if selector == "reference":
        z = scoring.build_reference(model.params, corpus.select(Partition.REFERENCE)).z_ref
    else:
        snaps = select_snapshots(corpus, selector)
        if len(snaps) != 1:
            raise UsageError(f"pca needs exactly one snapshot, selector matched {len(snaps)}")
        z = gae.embed(model.params, snaps[0]).z
    result = scoring.pca_project(z, 2)
    layers = corpus.layers or {}
    lines = ["service_name,layer_label,x,y"]
    for name, (x, y) in zip(corpus.registry.names, result.coords):
        lines.append(f"{name},{layers.get(name, '')},{float(x)!r},{float(y)!r}")
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"explained_variance\t{result.explained[0]:.6f}\t{result.explained[1]:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value run config")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", help="output directory (or file for pca/diagnose)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="svcgraph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic snapshot corpus")
    p.add_argument("scenario")
    p.add_argument("--csv", help="also write the raw telemetry stream as CSV")
    p.set_defaults(func=cmd_simulate, needs_out=True)

    p = sub.add_parser("ingest", parents=[common], help="aggregate telemetry CSV into a corpus")
    p.add_argument("inputs", nargs="+", metavar="CSV[:profile]")
    p.set_defaults(func=cmd_ingest, needs_out=True)

    p = sub.add_parser("train", parents=[common], help="train the graph autoencoder")
    p.add_argument("corpus")
    p.set_defaults(func=cmd_train, needs_out=True)

    p = sub.add_parser("score", parents=[common], help="cosine-score test snapshots")
    p.add_argument("corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--select", help="train|reference|evaluate|profile:<p>|minutes:<a>-<b>")
    p.add_argument("--tau", type=float)
    p.set_defaults(func=cmd_score, needs_out=True)

    p = sub.add_parser("diagnose", parents=[common], help="fan-out ratio diff for one service")
    p.add_argument("corpus")
    p.add_argument("service")
    p.add_argument("minute_a", type=int)
    p.add_argument("minute_b", type=int)
    p.set_defaults(func=cmd_diagnose, needs_out=False)

    p = sub.add_parser("inject-eval", parents=[common], help="synthetic path injection experiment")
    p.add_argument("corpus")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inject_eval, needs_out=True)

    p = sub.add_parser("pca", parents=[common], help="2-D PCA of service embeddings")
    p.add_argument("corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--select", help="reference (default) or a selector matching one snapshot")
    p.set_defaults(func=cmd_pca, needs_out=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = RunConfig.from_values(read_flat(args.config) if args.config else {})
        if args.seed is not None:
            cfg.seed = args.seed
        if args.needs_out and not args.out:
            raise UsageError(f"{args.command} requires --out")
        log.info("resolved config: %s", asdict(cfg))
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SvcGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.exception("internal failure: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
