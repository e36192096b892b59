"""2-D PCA of reference embeddings per seed; writes CSVs and prints layer separation."""

import argparse
from pathlib import Path

from svcgraph.files import atomic_write_text
from svcgraph.gae import ModelConfig, train
from svcgraph.scoring import build_reference, layer_separation, pca_project
from svcgraph.sim import load_scenario, simulate_corpus
from svcgraph.telemetry import Partition

SAMPLE = Path(__file__).resolve().parents[1] / "scenarios" / "sample.scn"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", default="pca_out")
    args = ap.parse_args()

    print("seed\tintra\tinter\tseparated\texplained")
    for seed in range(args.seeds):
        corpus = simulate_corpus(load_scenario(SAMPLE, seed=seed))
        params, _ = train(corpus.select(Partition.TRAIN), ModelConfig.for_registry(len(corpus.registry), seed=seed))
        res = pca_project(build_reference(params, corpus.select(Partition.REFERENCE)).z_ref, 2)
        labels = [corpus.layers[n] for n in corpus.registry.names]
        intra, inter = layer_separation(res.coords, labels)
        rows = ["service_name,layer_label,x,y"] + [f"{n},{l},{x!r},{y!r}" for n, l, (x, y)
                                                   in zip(corpus.registry.names, labels, res.coords.tolist())]
        atomic_write_text(Path(args.out) / f"pca_seed{seed}.csv", "\n".join(rows) + "\n")
        print(f"{seed}\t{intra:.3f}\t{inter:.3f}\t{int(intra < inter)}\t{res.explained.sum():.3f}")


if __name__ == "__main__":
    main()
