import functools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svcgraph.errors import ConfigError, InfeasibleDensityError, UsageError
from svcgraph.graph import Profile
from svcgraph.scoring import fanout_ratios
from svcgraph.sim import (Scenario, ServiceTopology, generate_snapshots, generate_stream,
                          generate_topology, minute_edges, parse_scenario, simulate_corpus)


def diamond(r=(0.6, 0.4)):
    return ServiceTopology((1, 2, 1), (0, 1, 1, 2), ((0, 1), (0, 2), (1, 3), (2, 3)),
                           {(0, 1): r[0], (0, 2): r[1], (1, 3): 1.0, (2, 3): 1.0})


def test_diamond_full_density():
    topo = generate_topology([1, 2, 1], [1.0, 1.0], seed=4)
    assert topo.n == 4
    assert set(topo.edges) == {(0, 1), (0, 2), (1, 3), (2, 3)}
    assert topo.base_ratio[(1, 3)] == 1.0
    assert topo.base_ratio[(0, 1)] + topo.base_ratio[(0, 2)] == pytest.approx(1.0)


def test_topology_deterministic():
    a = generate_topology([4, 12, 30, 12, 4], seed=7)
    b = generate_topology([4, 12, 30, 12, 4], seed=7)
    assert a == b and a.base_ratio == b.base_ratio
    assert a != generate_topology([4, 12, 30, 12, 4], seed=8)


@pytest.mark.parametrize("seed", range(5))
def test_topology_degree_shape(seed):
    deg = generate_topology([4, 12, 30, 12, 4], seed=seed).out_degree_by_layer()
    assert deg[2] > deg[0] and deg[2] > deg[4]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 8), min_size=3, max_size=6), st.integers(0, 2**32), st.floats(0, 0.5))
def test_topology_invariants(sizes, seed, intra):
    topo = generate_topology(sizes, seed=seed, intra_density=intra)
    for src, dst in topo.edges:
        lsrc, ldst = topo.layer_of[src], topo.layer_of[dst]
        assert ldst == lsrc + 1 or (ldst == lsrc and src < dst)
    for src in range(topo.n):
        outs = topo.out_edges(src)
        if outs:
            assert sum(topo.base_ratio[e] for e in outs) == pytest.approx(1.0)
        elif topo.layer_of[src] != len(sizes) - 1:
            pytest.fail(f"service {src} has no outgoing edge")
    # reachability from layer 0
    seen = set(topo.entry_services())
    for src, dst in topo.edges:
        if src in seen:
            seen.add(dst)
    assert seen == set(range(topo.n))


@pytest.mark.parametrize("densities", [[0.0, 0.5], [1.5, 0.5], [0.5]])
def test_topology_infeasible(densities):
    with pytest.raises(InfeasibleDensityError):
        generate_topology([3, 3, 3], densities)


def test_topology_too_few_layers():
    with pytest.raises(UsageError):
        generate_topology([3, 3])


def test_diamond_flow():
    sc = Scenario(diamond(), base_tps=100, daily_amplitude=0, jitter=0)
    _, edges = minute_edges(sc, 0)
    assert edges == pytest.approx({(0, 1): 60.0, (0, 2): 40.0, (1, 3): 60.0, (2, 3): 40.0}, rel=1e-15)


def test_identical_curve_values_identical_snapshots():
    sc = Scenario(diamond(), base_tps=100, daily_amplitude=0, jitter=0)
    assert minute_edges(sc, 3) == minute_edges(sc, 400)


def flow_oracle(topo, ratios, entry):
    @functools.lru_cache(None)
    def inflow(v):
        if topo.layer_of[v] == 0:
            return entry
        return sum(inflow(u) * ratios[(u, w)] for (u, w) in topo.edges if w == v)
    return {e: inflow(e[0]) * ratios[e] for e in topo.edges}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 3000))
def test_flow_conservation(seed, minute):
    topo = generate_topology([3, 6, 9, 6, 3], seed=seed, intra_density=0.2)
    sc = Scenario(topo, [(0, 1000, Profile.BASELINE), (1000, 2000, Profile.EVENT),
                         (2000, 3001, Profile.GAMEDAY)], rng_seed=seed, jitter=0)
    kind, edges = minute_edges(sc, minute)
    window = sc.window_at(minute)[1]
    expected = flow_oracle(topo, sc.ratios_at(minute), sc.profile(kind).entry_tps(minute, window))
    assert edges.keys() == expected.keys()
    for e in edges:
        assert edges[e] == pytest.approx(expected[e], rel=1e-12)
    for v in range(topo.n):
        outs = [edges[e] for e in topo.out_edges(v)]
        ins = [tps for (s, d), tps in edges.items() if d == v]
        if outs and ins:
            assert sum(outs) == pytest.approx(sum(ins), rel=1e-12)


def test_stream_deterministic():
    topo = generate_topology([3, 5, 3], seed=1)
    sc = Scenario(topo, [(0, 30, Profile.BASELINE), (30, 60, Profile.GAMEDAY)], rng_seed=11)
    a, b = generate_stream(sc, 60), generate_stream(sc, 60)
    assert [r.to_line() for r in a] == [r.to_line() for r in b]
    assert a[0].timestamp == 0 and a[-1].timestamp == 59 * 60


def test_generate_requires_duration():
    with pytest.raises(UsageError):
        generate_snapshots(Scenario(diamond()), 0)


def test_ratio_stability_under_jitter():
    topo = generate_topology([4, 12, 30, 12, 4], seed=0)
    sc = Scenario(topo, rng_seed=0)
    snaps = generate_snapshots(sc, 1000)
    services = [v for v in range(topo.n) if topo.layer_of[v] > 0 and topo.out_edges(v)]
    first = {v: fanout_ratios(snaps[0], v) for v in services}
    within, total = 0, 0
    for snap in snaps[1:]:
        for v in services:
            for e, r in fanout_ratios(snap, v).items():
                total += 1
                within += abs(r - first[v][e]) / first[v][e] < 3 * sc.jitter
    assert within / total >= 0.99


def test_gameday_diverges_from_baseline():
    topo = generate_topology([4, 12, 30, 12, 4], seed=0)
    sc = Scenario(topo, [(0, 10, Profile.BASELINE), (10, 20, Profile.GAMEDAY)], rng_seed=0)
    base, game = sc.ratios_at(0), sc.ratios_at(10)
    assert max(abs(game[e] - base[e]) / base[e] for e in base) >= 0.10


def test_deployment_shift_replaces_ratios():
    topo = diamond()
    sc = Scenario(topo, deployment_shifts=[(5, 0, (0.2, 0.8))], base_tps=100, daily_amplitude=0, jitter=0)
    assert minute_edges(sc, 4)[1][(0, 1)] == pytest.approx(60.0)
    assert minute_edges(sc, 5)[1][(0, 1)] == pytest.approx(20.0)


def test_shift_validation():
    with pytest.raises(ConfigError):
        Scenario(diamond(), deployment_shifts=[(5, 0, (0.5, 0.6))])
    with pytest.raises(ConfigError):
        Scenario(diamond(), deployment_shifts=[(5, 0, (1.0,))])


def test_schedule_overlap_rejected():
    with pytest.raises(ConfigError):
        Scenario(diamond(), [(0, 10, Profile.EVENT), (5, 20, Profile.GAMEDAY)])


def test_parse_scenario():
    sc = parse_scenario("layer_sizes = 2,3,2\nseed = 5\nschedule = baseline:0-10, event:10-20\n"
                        "shifts = 12@svc-l1-00=0.5/0.5\n")
    assert sc.total_minutes == 20
    assert sc.rng_seed == 5
    corpus = simulate_corpus(sc)
    assert len(corpus.snapshots) == 20
    assert corpus.layers["svc-l2-01"] == 2


def test_parse_scenario_unknown_key():
    with pytest.raises(ConfigError, match="colour"):
        parse_scenario("layer_sizes = 2,3,2\ncolour = blue\n")


def test_parse_scenario_seed_override():
    text = "layer_sizes = 3,4,3\nseed = 1\nduration = 5\n"
    assert parse_scenario(text, seed=9).rng_seed == 9
    assert parse_scenario(text, seed=9).topology == generate_topology([3, 4, 3], seed=9)
