"""Legacy vs indexed load benchmark.

For every profile a synthetic file is generated and loaded in both modes
``repeats`` times. Each run records wall time plus a counters snapshot;
summaries take medians over runs. ``cache_mode="fresh"`` writes a new file
for every (run, mode) pair so no load reuses a file another load touched;
``"repeated"`` loads one file over and over.
"""
from __future__ import annotations

import csv
import gc
import logging
import os
import statistics
import tempfile
import time
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

from .errors import InvalidScale, NonPositiveBaseline
from .loader import MODES, load_event_nexus
from .store import ModelBuilder, StoreHandle, open_store, write_store
from .synth import DEFAULT_SCALE, generate, instrument_profile

log = logging.getLogger(__name__)

ROW_HEADER = ("profile", "mode", "run", "wall_ms", "list_children_calls",
              "read_attribute_calls", "read_dataset_calls", "bytes_read")
SUMMARY_HEADER = ("profile", "legacy_wall_ms_median", "indexed_wall_ms_median",
                  "relative_speedup", "call_reduction_ratio")


def relative_speedup(old_ms: float, new_ms: float) -> float:
    """Fraction of the baseline wall time saved: ``(old - new) / old``."""
    if not old_ms > 0:
        raise NonPositiveBaseline(f"baseline wall time must be positive, got {old_ms}")
    return (old_ms - new_ms) / old_ms


@dataclass
class BenchConfig:
    profiles: Sequence[str] = ("gpsans",)
    repeats: int = 3
    event_scale: float = DEFAULT_SCALE
    meta_latency_us: float = 0.0
    cache_mode: Literal["fresh", "repeated"] = "repeated"
    seed: int = 0
    workers: int = 1
    workdir: Optional[str] = None

    def __post_init__(self) -> None:
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.cache_mode not in ("fresh", "repeated"):
            raise ValueError(f"unknown cache mode {self.cache_mode!r}")
        if not 0.0 < self.event_scale <= 1.0:
            raise InvalidScale(f"event_scale must be in (0, 1], got {self.event_scale}")
        for p in self.profiles:
            instrument_profile(p)


@dataclass(frozen=True)
class BenchRow:
    profile: str
    mode: str
    run: int
    wall_ms: float
    list_children_calls: int
    read_attribute_calls: int
    read_dataset_calls: int
    bytes_read: int

    @property
    def metadata_calls(self) -> int:
        return self.list_children_calls + self.read_attribute_calls


@dataclass(frozen=True)
class BenchSummary:
    profile: str
    legacy_wall_ms_median: float
    indexed_wall_ms_median: float
    relative_speedup: float
    call_reduction_ratio: float
    legacy_metadata_calls: int
    indexed_metadata_calls: int
    paired_delta_ms_median: float = 0.0

    def predicted_delta_ms(self, latency_us: float) -> float:
        """Wall-time gap explained by injected latency on the extra metadata calls."""
        return (self.legacy_metadata_calls - self.indexed_metadata_calls) * latency_us / 1000.0


@dataclass
class BenchReport:
    config: BenchConfig
    rows: list[BenchRow] = field(default_factory=list)
    summaries: list[BenchSummary] = field(default_factory=list)

    def summary(self, profile: str) -> BenchSummary:
        for s in self.summaries:
            if s.profile == profile:
                return s
        raise KeyError(profile)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(ROW_HEADER)
            for r in self.rows:
                w.writerow([r.profile, r.mode, r.run, f"{r.wall_ms:.4f}", r.list_children_calls,
                            r.read_attribute_calls, r.read_dataset_calls, r.bytes_read])

    def write_summary_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SUMMARY_HEADER)
            for s in self.summaries:
                w.writerow([s.profile, f"{s.legacy_wall_ms_median:.4f}", f"{s.indexed_wall_ms_median:.4f}",
                            f"{s.relative_speedup:.6f}", f"{s.call_reduction_ratio:.6f}"])


def _timed_load(path: str, mode: str, cfg: BenchConfig):
    gc.collect()
    gc.disable()
    try:
        t0 = time.perf_counter()
        with open_store(path, meta_latency_us=cfg.meta_latency_us) as h:
            load_event_nexus(h, mode, workers=cfg.workers)
            elapsed = time.perf_counter() - t0
            c = h.counters()
    finally:
        gc.enable()
    return elapsed * 1000.0, c


def warm_up() -> None:
    """Compile the event kernels on a tiny file so no timed run pays for it."""
    import numpy as np

    mb = ModelBuilder()
    mb.group("/entry", "NXentry")
    mb.group("/entry/instrument", "NXinstrument")
    mb.group("/entry/instrument/bank1", "NXdetector")
    mb.dataset("/entry/instrument/bank1/pixel_count", np.array([4], np.uint32))
    mb.dataset("/entry/instrument/bank1/pixel_id_offset", np.array([0], np.uint32))
    mb.group("/entry/bank1_events", "NXevent_data")
    mb.dataset("/entry/bank1_events/event_id", np.array([1, 0], np.uint32))
    mb.dataset("/entry/bank1_events/event_index", np.array([0], np.uint64))
    mb.dataset("/entry/bank1_events/event_time_offset", np.array([1.0, 2.0], np.float32))
    mb.dataset("/entry/bank1_events/event_time_zero", np.array([0.0]))
    mb.dataset("/entry/bank1_events/event_total_counts", np.array([2], np.uint64))
    for mode in MODES:
        load_event_nexus(StoreHandle.from_model(mb.model), mode)


def _summarize(profile: str, rows: list[BenchRow]) -> BenchSummary:
    by_mode = {m: [r for r in rows if r.mode == m] for m in MODES}
    legacy = statistics.median(r.wall_ms for r in by_mode["legacy"])
    indexed = statistics.median(r.wall_ms for r in by_mode["indexed"])
    lc = by_mode["legacy"][0].metadata_calls
    ic = by_mode["indexed"][0].metadata_calls
    # runs of the same index ran back to back, so their difference cancels slow drift
    paired = statistics.median(a.wall_ms - b.wall_ms for a, b in zip(by_mode["legacy"], by_mode["indexed"]))
    return BenchSummary(profile, legacy, indexed, relative_speedup(legacy, indexed),
                        lc / ic if ic else float("inf"), lc, ic, paired)


def run_benchmark(cfg: BenchConfig) -> BenchReport:
    warm_up()
    report = BenchReport(cfg)
    profiles = {name: instrument_profile(name) for name in cfg.profiles}
    rows: dict[str, list[BenchRow]] = {name: [] for name in profiles}
    with tempfile.TemporaryDirectory(prefix="nxbench-", dir=cfg.workdir) as tmp:
        shared = {}
        if cfg.cache_mode == "repeated":
            for name, profile in profiles.items():
                shared[name] = os.path.join(tmp, f"{name}.nxb")
                write_store(generate(profile, cfg.seed, cfg.event_scale), shared[name])
        # profiles are interleaved within each run so slow phases of the
        # machine hit every profile alike instead of skewing one of them
        for run in range(cfg.repeats):
            for name, profile in profiles.items():
                model = None
                if cfg.cache_mode == "fresh":
                    model = generate(profile, cfg.seed + run, cfg.event_scale)
                # alternate which mode goes first so neither always sees a warmer process
                order = MODES if run % 2 == 0 else MODES[::-1]
                for mode in order:
                    if model is not None:
                        path = os.path.join(tmp, f"{name}-{run}-{mode}.nxb")
                        write_store(model, path)
                    else:
                        path = shared[name]
                    wall_ms, c = _timed_load(path, mode, cfg)
                    if model is not None:
                        os.remove(path)
                    rows[name].append(BenchRow(name, mode, run, wall_ms, c.list_children_calls,
                                               c.read_attribute_calls, c.read_dataset_calls, c.bytes_read))
    for name, lst in rows.items():
        lst.sort(key=lambda r: (MODES.index(r.mode), r.run))
        report.rows.extend(lst)
        s = _summarize(name, lst)
        report.summaries.append(s)
        log.info("%s: legacy %.2f ms, indexed %.2f ms, speedup %.3f, call ratio %.2f",
                 name, s.legacy_wall_ms_median, s.indexed_wall_ms_median,
                 s.relative_speedup, s.call_reduction_ratio)
    return report
