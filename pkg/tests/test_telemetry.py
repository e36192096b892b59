import math
import random
from collections import defaultdict

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svcgraph.errors import (CorpusIOError, FormatVersionMismatch, MalformedLineError,
                             NonPositiveWeightError, SelfEdgeError, UsageError)
from svcgraph.graph import GraphSnapshot, Profile, ServiceRegistry
from svcgraph.telemetry import (Partition, SnapshotCorpus, TelemetryRecord, aggregate_minutes,
                                auto_partition, format_snapshot, load_corpus, parse_record,
                                parse_snapshot, read_telemetry, save_corpus)


def test_parse_record():
    assert parse_record("60,A,B,12.5") == TelemetryRecord(60, "A", "B", 12.5)


@pytest.mark.parametrize("line, err", [
    ("60,A,A,5", SelfEdgeError),
    ("60,A,B,-1", NonPositiveWeightError),
    ("60,A,B", MalformedLineError),
    ("sixty,A,B,1", MalformedLineError),
    ("60,A,B,nan", MalformedLineError),
])
def test_parse_record_errors(line, err):
    with pytest.raises(err):
        parse_record(line)


def test_read_telemetry_counts_skips():
    lines = ["# header", "0,A,B,1", "garbage", "", "5,A,A,2", "7,B,C,3"]
    records, skipped = read_telemetry(lines)
    assert len(records) == 2
    assert skipped == 2


def recs(*rows):
    return [TelemetryRecord(*r) for r in rows]


def test_aggregate_same_bucket():
    snaps = aggregate_minutes(recs((10, "A", "B", 3), (59, "A", "B", 4)), ServiceRegistry())
    assert len(snaps) == 1
    assert snaps[0].timestamp == 0
    assert snaps[0].edges == {(0, 1): 7.0}


def test_aggregate_boundary_split():
    snaps = aggregate_minutes(recs((59, "A", "B", 1), (60, "A", "B", 1)), ServiceRegistry())
    assert [s.timestamp for s in snaps] == [0, 1]
    assert all(s.edges == {(0, 1): 1.0} for s in snaps)


def random_records(seed, count=1000):
    rng = random.Random(seed)
    names = [f"s{i}" for i in range(8)]
    out = []
    for _ in range(count):
        a, b = rng.sample(names, 2)
        out.append(TelemetryRecord(rng.randrange(0, 600), a, b, rng.uniform(0.01, 50)))
    return out


def test_aggregate_matches_groupby():
    records = random_records(1)
    reg = ServiceRegistry()
    snaps = aggregate_minutes(records, reg)
    oracle = defaultdict(list)
    for r in records:
        oracle[(r.timestamp // 60, r.source, r.destination)].append(r.tps)
    got = {(s.timestamp, reg.name_of(i), reg.name_of(j)): tps for s in snaps for (i, j), tps in s.edges.items()}
    assert got.keys() == oracle.keys()
    for key, vals in oracle.items():
        assert got[key] == pytest.approx(math.fsum(vals), rel=1e-12)
    assert [s.timestamp for s in snaps] == sorted(s.timestamp for s in snaps)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_aggregate_order_independent(seed, rnd):
    records = random_records(seed, 200)
    shuffled = records[:]
    rnd.shuffle(shuffled)
    a_reg, b_reg = ServiceRegistry(), ServiceRegistry()
    a, b = aggregate_minutes(records, a_reg), aggregate_minutes(shuffled, b_reg)
    assert a_reg == b_reg
    assert a == b


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_aggregate_preserves_sum(seed):
    records = random_records(seed, 300)
    snaps = aggregate_minutes(records, ServiceRegistry())
    total = math.fsum(s.total_tps() for s in snaps)
    assert total == pytest.approx(math.fsum(r.tps for r in records), rel=1e-9)


def small_corpus(names=("edge", "api", "db")):
    reg = ServiceRegistry(names)
    snaps = [GraphSnapshot(0, Profile.BASELINE, {(0, 1): 10.0, (1, 2): 0.1 + 0.2}),
             GraphSnapshot(1, Profile.EVENT, {(0, 1): 20.0}),
             GraphSnapshot(5, Profile.GAMEDAY, {(0, 2): 1e-300, (1, 2): 3.0})]
    return SnapshotCorpus(reg, snaps, [Partition.TRAIN, Partition.REFERENCE, Partition.EVALUATE])


def test_corpus_round_trip(tmp_path):
    corpus = small_corpus()
    save_corpus(corpus, tmp_path)
    back = load_corpus(tmp_path)
    assert back.registry == corpus.registry
    assert back.snapshots == corpus.snapshots
    assert back.partitions == corpus.partitions


def test_corpus_unicode_names(tmp_path):
    names = ("résumé-svc", "支付", "naïve api")
    save_corpus(small_corpus(names), tmp_path)
    back = load_corpus(tmp_path)
    assert back.registry.names == list(names)
    assert (tmp_path / "registry.tsv").read_bytes() == "".join(
        f"{i}\t{n}\n" for i, n in enumerate(names)).encode("utf-8")


def test_manifest_missing_file(tmp_path):
    save_corpus(small_corpus(), tmp_path)
    (tmp_path / "snapshots" / "5.snap").unlink()
    with pytest.raises(CorpusIOError, match="5.snap"):
        load_corpus(tmp_path)


def test_snapshot_version_mismatch():
    text = format_snapshot(GraphSnapshot(3, Profile.EVENT, {(0, 1): 2.0})).replace(" v1 ", " v2 ")
    with pytest.raises(FormatVersionMismatch):
        parse_snapshot(text)


def test_snapshot_bad_header():
    with pytest.raises(CorpusIOError):
        parse_snapshot("hello\n0\t1\t2.0\n")


def test_corpus_rejects_non_event_reference():
    reg = ServiceRegistry(["a", "b"])
    with pytest.raises(UsageError):
        SnapshotCorpus(reg, [GraphSnapshot(0, Profile.BASELINE, {(0, 1): 1.0})], [Partition.REFERENCE])


def test_corpus_rejects_unordered():
    reg = ServiceRegistry(["a", "b"])
    snaps = [GraphSnapshot(t, Profile.BASELINE, {(0, 1): 1.0}) for t in (2, 1)]
    with pytest.raises(UsageError):
        SnapshotCorpus(reg, snaps, [Partition.TRAIN] * 2)


def test_auto_partition_split():
    snaps = [GraphSnapshot(t, Profile.BASELINE, {(0, 1): 1.0}) for t in range(10)]
    snaps += [GraphSnapshot(t, Profile.EVENT, {(0, 1): 1.0}) for t in range(10, 60)]
    snaps += [GraphSnapshot(t, Profile.GAMEDAY, {(0, 1): 1.0}) for t in range(60, 70)]
    parts = auto_partition(snaps)
    event_parts = parts[10:60]
    assert parts[:10] == [Partition.TRAIN] * 10
    assert event_parts.count(Partition.REFERENCE) == 10
    assert event_parts.count(Partition.TRAIN) == 40
    assert parts[60:] == [Partition.EVALUATE] * 10
