import math

import numpy as np
from hypothesis import given, settings, strategies as st

from helpers import brute_force_classes, random_model
from nxindex import synth
from nxindex.index import ComparisonCounter, MetadataIndex, build_index
from nxindex.store import ModelBuilder, StoreHandle


def _ix(model):
    return build_index(StoreHandle.from_model(model))


def _as_sets(ix):
    return {k: set(v) for k, v in ix.as_dict().items()}


def test_example_buckets(example_model):
    ix = _ix(example_model)
    assert "/entry/DASlogs/BL6:CS:DataType" in ix.entries_of_class("NXlog")
    assert ix.entries_of_class("NXevent_data") == ("/entry/bank1_events", "/entry/bank91_events")
    assert "/entry/bank1_events/event_id" in ix.entries_of_class("SDS")
    assert ix.entries_of_class("NXcollection") == ("/entry/DASlogs",)


def test_root_only_index_is_empty():
    ix = _ix(ModelBuilder().model)
    assert ix.class_count == 0 and len(ix) == 0
    assert not ix.contains("SDS", "/x")
    assert ix.first_entry_of_class("NXentry") is None


def test_random_tree_matches_brute_force(rng):
    for n in (2000, 2500, 3000):
        m = random_model(rng, n)
        assert _as_sets(_ix(m)) == brute_force_classes(m)


def test_build_cost_is_one_traversal(rng):
    m = random_model(rng, 2500)
    h = StoreHandle.from_model(m)
    build_index(h)
    c = h.counters()
    assert c.list_children_calls == m.n_groups
    assert c.read_attribute_calls == m.n_groups - 1
    assert c.read_dataset_calls == 0 and c.bytes_read == 0


def test_buckets_disjoint_and_complete(rng):
    m = random_model(rng, 1500)
    ix = _ix(m)
    all_paths = [p for b in ix.as_dict().values() for p in b]
    assert len(all_paths) == len(set(all_paths)) == m.n_entries
    for bucket in ix.as_dict().values():
        assert all(a.encode() < b.encode() for a, b in zip(bucket, bucket[1:]))


def test_gpsans_event_banks_in_byte_order():
    m = synth.generate(synth.instrument_profile("gpsans"), 3, 0.001)
    banks = _ix(m).entries_of_class("NXevent_data")
    assert len(banks) == 48
    assert set(banks) == {f"/entry/bank{i}_events" for i in range(1, 49)}
    assert list(banks) == sorted(banks, key=lambda p: p.encode())
    assert banks[:3] == ("/entry/bank10_events", "/entry/bank11_events", "/entry/bank12_events")


def test_bank_order_1_2_10(example_builder):
    ix = _ix(example_builder((1, 2, 10)).model)
    assert ix.entries_of_class("NXevent_data") == (
        "/entry/bank10_events", "/entry/bank1_events", "/entry/bank2_events")


def test_absent_class_is_empty(example_model):
    assert _ix(example_model).entries_of_class("NXmonitor") == ()


def test_contains(example_model):
    ix = _ix(example_model)
    assert ix.contains("NXlog", "/entry/DASlogs/BL6:CS:DataType")
    assert not ix.contains("NXlog", "/entry/bank1_events")
    assert not ix.contains("NXnothing", "/entry")


def test_first_entry_of_class(example_builder):
    ix = _ix(example_builder((3, 4, 5, 6, 7)).model)
    assert ix.first_entry_of_class("NXentry") == "/entry"
    assert ix.first_entry_of_class("NXmonitor") is None
    assert ix.first_entry_of_class("NXevent_data") == "/entry/bank3_events"


def test_datasets_under(example_model):
    ix = _ix(example_model)
    assert ix.datasets_under("/entry/bank1_events") == [
        "/entry/bank1_events/event_id", "/entry/bank1_events/event_index",
        "/entry/bank1_events/event_time_offset", "/entry/bank1_events/event_time_zero",
        "/entry/bank1_events/event_total_counts"]
    under_log = ix.datasets_under("/entry/DASlogs/BL6:CS:DataType")
    assert "/entry/DASlogs/BL6:CS:DataType/average_value" in under_log
    assert "/entry/DASlogs/BL6:CS:DataType/average_value_error" in under_log
    assert ix.datasets_under("/entry/DASlogs") == []
    assert ix.datasets_under("/entry") == []


def test_datasets_under_skips_nested_and_siblings():
    mb = ModelBuilder()
    mb.group("/a", "NXentry")
    mb.dataset("/a/x", np.zeros(1))
    mb.group("/a/b", "NXcollection")
    for i in range(50):
        mb.dataset(f"/a/b/d{i}", np.zeros(1))
    mb.dataset("/a/z", np.zeros(1))
    mb.group("/a0", "NXentry")           # '0' sorts right after '/'
    mb.dataset("/a0/y", np.zeros(1))
    mb.group("/a-", "NXentry")           # '-' sorts before '/'
    mb.dataset("/a-/y", np.zeros(1))
    mb.dataset("/top", np.zeros(1))
    ix = _ix(mb.model)
    assert ix.datasets_under("/a") == ["/a/x", "/a/z"]
    assert ix.datasets_under("/") == ["/top"]
    counter = ComparisonCounter()
    ix.datasets_under("/a", counter=counter)
    # nested /a/b subtree is jumped over with one bisection, not walked
    assert counter.count < 30


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 300))
def test_datasets_under_matches_filter(seed, n):
    m = random_model(np.random.default_rng(seed), n, group_fraction=0.5)
    ix = _ix(m)
    sds = ix.entries_of_class("SDS")
    for r in m.records:
        if r.kind != "group":
            continue
        prefix = "/" if r.path == "/" else r.path + "/"
        want = [p for p in sds if p.startswith(prefix) and "/" not in p[len(prefix):]]
        assert ix.datasets_under(r.path) == want


def _synthetic_index(n_classes: int, sds_size: int) -> MetadataIndex:
    buckets = {f"NXc{k:02d}": [f"/entry/g{k}"] for k in range(n_classes - 1)}
    buckets["SDS"] = [f"/entry/bank{i // 5}_events/f{i % 5}" for i in range(sds_size)]
    return MetadataIndex(buckets)


def _bound(C: int, E: int) -> int:
    return 2 * (math.ceil(math.log2(C + 1)) + math.ceil(math.log2(E + 1))) + 4


def _worst_contains(ix: MetadataIndex, queries) -> int:
    worst = 0
    counter = ComparisonCounter()
    for c, p in queries:
        counter.reset()
        ix.contains(c, p, counter=counter)
        worst = max(worst, counter.count)
    return worst


def _queries(ix: MetadataIndex, rng):
    sds = ix.entries_of_class("SDS")
    picks = [sds[0], sds[-1]] + [sds[int(i)] for i in rng.integers(0, len(sds), 200)]
    absent = ["/", "/zzz", "/entry/bank0_events/f0x", sds[len(sds) // 2] + "!"]
    return [("SDS", p) for p in picks + absent] + [("NXmissing", "/entry"), ("NXc00", "/entry/g0")]


def test_contains_comparisons_logarithmic(rng):
    worst_prev = None
    for k in range(6, 17):
        E = 2 ** k
        ix = _synthetic_index(8, E)
        worst = _worst_contains(ix, _queries(ix, rng))
        assert worst <= _bound(ix.class_count, ix.max_entries_per_class)
        if worst_prev is not None:
            assert worst - worst_prev <= 2
        worst_prev = worst


def test_range_scan_locality():
    counts = []
    for k in (8, 12, 16):
        ix = _synthetic_index(8, 2 ** k)
        counter = ComparisonCounter()
        got = ix.datasets_under("/entry/bank3_events", counter=counter)
        assert len(got) == 5
        logE = math.ceil(math.log2(2 ** k + 1))
        assert counter.count <= math.ceil(math.log2(9)) + 1 + 2 * logE
        counts.append(counter.count)
    # cost grows with log of the bucket, not its size
    assert counts[-1] - counts[0] <= 2 * 8 + 2
