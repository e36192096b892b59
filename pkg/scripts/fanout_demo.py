"""Fan-out ratio diff for the service hit by the scripted deployment shift (Table 3 style)."""

import argparse
from pathlib import Path

from svcgraph.scoring import fanout_diff, incoming_shares
from svcgraph.sim import load_scenario, simulate_corpus

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "deployment_shift.scn"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default=str(SCENARIO))
    ap.add_argument("--before", type=int, default=30)
    ap.add_argument("--after", type=int, default=90)
    args = ap.parse_args()

    scenario = load_scenario(args.scenario)
    corpus = simulate_corpus(scenario)
    a, b = corpus.by_minute(args.before), corpus.by_minute(args.after)
    for _, sid, _ in scenario.deployment_shifts:
        name = corpus.registry.name_of(sid)
        print(f"# {name}: minute {args.before} vs {args.after}")
        print(fanout_diff(a, b, sid).to_tsv(corpus.registry), end="")
        print("# upstream share of incoming traffic (minute %d)" % args.before)
        for (src, dst), share in incoming_shares(a, sid).items():
            print(f"{corpus.registry.name_of(src)}->{name}\t{share:.4f}")


if __name__ == "__main__":
    main()
