"""Acceptance criteria, one test each.

Every test records a pass/fail line in ``ACCEPTANCE_RESULTS``; the terminal
summary hook in conftest prints them at the end of the run. Run alone with
``pytest -m acceptance -v``.
"""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS
from helpers import brute_force_classes, random_model
from nxindex import synth
from nxindex.bench import BenchConfig, relative_speedup, run_benchmark
from nxindex.index import ComparisonCounter, MetadataIndex, build_index
from nxindex.loader import load_event_nexus
from nxindex.store import StoreHandle, encode_store, open_store, read_model, write_store

pytestmark = pytest.mark.acceptance

TARGETS = {"gpsans": 3683, "biosans": 3203, "eqsans": 2529, "corelli": 2660, "nom": 1572}


def record(num: int, desc: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((num, desc, ok, detail))
    print(f"[{'PASS' if ok else 'FAIL'}] {num}. {desc} :: {detail}")
    assert ok, detail


def test_1_mode_equivalence(tmp_path):
    t0 = time.perf_counter()
    n_files, mismatches, events = 0, [], 0
    for seed in range(20):
        for name in synth.PROFILE_NAMES:
            model = synth.generate(synth.instrument_profile(name), 1000 + seed, 0.01)
            path = tmp_path / f"{name}.nxb"
            write_store(model, path)
            with open_store(path) as h:
                legacy = load_event_nexus(h, "legacy")
                indexed = load_event_nexus(h, "indexed")
            path.unlink()
            n_files += 1
            events += indexed.n_events
            if legacy != indexed:
                mismatches.append((name, seed))
    elapsed = time.perf_counter() - t0
    record(1, "mode equivalence on seeded files", not mismatches and n_files >= 100 and elapsed < 120,
           f"{n_files} files, {events} events, {len(mismatches)} mismatches, {elapsed:.1f}s")


def test_2_index_oracle():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    sizes = np.exp(rng.uniform(math.log(10), math.log(5000), 1000)).astype(int)
    sizes[0], sizes[1] = 10, 5000
    bad = 0
    for n in sizes:
        m = random_model(rng, int(n))
        got = {k: set(v) for k, v in build_index(StoreHandle.from_model(m)).as_dict().items()}
        bad += got != brute_force_classes(m)
    elapsed = time.perf_counter() - t0
    record(2, "index equals brute-force classifier", bad == 0,
           f"{len(sizes)} trees of {sizes.min()}..{sizes.max()} entries, {bad} mismatches, {elapsed:.1f}s")


def test_3_metadata_call_reduction():
    model = synth.generate(synth.instrument_profile("gpsans"), 3, 0.001)
    G = model.n_groups
    counts = {}
    for mode in ("legacy", "indexed"):
        h = StoreHandle.from_model(model)
        load_event_nexus(h, mode)
        counts[mode] = h.counters()
    ic, lc = counts["indexed"], counts["legacy"]
    exact = ic.list_children_calls == G and ic.read_attribute_calls == G - 1
    ratio = lc.metadata_calls / ic.metadata_calls
    record(3, "gpsans metadata-call reduction", exact and ratio >= 3,
           f"G={G}, indexed LC={ic.list_children_calls} RA={ic.read_attribute_calls}, "
           f"legacy {lc.metadata_calls} calls, ratio {ratio:.3f}")


def test_4_deterministic_speedup():
    latency = 10.0
    # host CPU speed drifts by up to 2x on the test VM; many interleaved
    # repeats keep the medians stable
    t0 = time.perf_counter()
    rep = run_benchmark(BenchConfig(profiles=list(synth.PROFILE_NAMES), repeats=61,
                                    event_scale=0.001, meta_latency_us=latency))
    elapsed = time.perf_counter() - t0
    parts, ok = [], elapsed < 300
    for s in rep.summaries:
        predicted = s.predicted_delta_ms(latency)
        measured = s.paired_delta_ms_median
        rel = measured / predicted
        ok &= s.relative_speedup > 0 and abs(rel - 1) <= 0.20
        parts.append(f"{s.profile} speedup {s.relative_speedup:.3f} delta {measured:.1f}/{predicted:.1f}ms")
    ordering = rep.summary("gpsans").relative_speedup > rep.summary("eqsans").relative_speedup
    record(4, "positive speedup, delta within 20% of prediction, gpsans > eqsans", ok and ordering,
           "; ".join(parts) + f"; ordering {'holds' if ordering else 'violated'}; {elapsed:.0f}s")


def test_5_speedup_arithmetic():
    cases = [((58.9, 41.8), 29.0), ((100.2, 80.9), 19.0), ((99.0, 88.0), 11.0)]
    got = [100 * relative_speedup(*args) for args, _ in cases]
    ok = all(abs(g - want) <= 0.5 for g, (_, want) in zip(got, cases))
    record(5, "relative speedup arithmetic", ok, ", ".join(f"{g:.2f}%" for g in got))


def test_6_logarithmic_search():
    rng = np.random.default_rng(6)
    worst_margin, ok = None, True
    for k in range(6, 17):
        E = 2 ** k
        buckets = {f"NXc{j}": [f"/entry/g{j}"] for j in range(7)}
        buckets["SDS"] = [f"/entry/bank{i // 5}_events/f{i % 5}" for i in range(E)]
        ix = MetadataIndex(buckets)
        bound = 2 * (math.ceil(math.log2(ix.class_count + 1)) + math.ceil(math.log2(ix.max_entries_per_class + 1))) + 4
        sds = ix.entries_of_class("SDS")
        queries = [("SDS", sds[int(i)]) for i in rng.integers(0, E, 300)]
        queries += [("SDS", sds[0]), ("SDS", sds[-1]), ("SDS", "/"), ("SDS", "/zz"), ("NXnone", "/entry")]
        counter = ComparisonCounter()
        for c, p in queries:
            counter.reset()
            ix.contains(c, p, counter=counter)
            ok &= counter.count <= bound
            margin = bound - counter.count
            worst_margin = margin if worst_margin is None else min(worst_margin, margin)
    record(6, "contains comparisons within logarithmic bound", ok,
           f"E=2^6..2^16, tightest margin {worst_margin} comparisons")


def test_7_format_fidelity(tmp_path):
    rng = np.random.default_rng(7)
    bad = nondet = 0
    for i in range(1000):
        m = random_model(rng, int(rng.integers(0, 80)), payloads=True)
        a, b = tmp_path / "a.nxb", tmp_path / "b.nxb"
        write_store(m, a)
        write_store(m, b)
        nondet += a.read_bytes() != b.read_bytes()
        with open_store(a) as h:
            back = read_model(h)
        bad += back != m or encode_store(back) != a.read_bytes()
    record(7, "store round-trip and byte determinism", bad == 0 and nondet == 0,
           f"1000 models, {bad} round-trip failures, {nondet} nondeterministic writes")


def test_8_calibration():
    worst = 0.0
    for name, target in TARGETS.items():
        p = synth.instrument_profile(name)
        for seed in (0, 1, 42, 2**63 + 5):
            for scale in (0.0001, 0.001):
                n = synth.generate(p, seed, scale).n_entries
                worst = max(worst, abs(n - target) / target)
    record(8, "profile entry counts within 1% of targets", worst <= 0.01,
           f"5 profiles x 4 seeds x 2 scales, worst deviation {100 * worst:.3f}%")
