"""Staged event-file loader producing an :class:`EventWorkspace`.

Four stages run in a fixed order: logs, monitors, geometry, bank data. In
``indexed`` mode a :class:`~nxindex.index.MetadataIndex` is built once when
loading starts and every stage resolves entries through it, so no stage issues
a metadata call. In ``legacy`` mode no metadata is shared: each stage walks
down from the root on its own, re-listing and re-classifying every group level
it touches, the way a per-algorithm hierarchical reader does.

Both modes read the same payloads and must return identical workspaces.
"""
from __future__ import annotations

import logging
from bisect import bisect_left
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from . import kernels
from .errors import (
    MalformedBank, MalformedLog, MalformedMonitor, MissingDataset,
    MissingEntryGroup, NoSuchAttribute, NoSuchPath, NotAGroup,
    OverlappingPixelRanges,
)
from .index import MetadataIndex, build_index
from .schema import (
    DATASET, GROUP, NX_CLASS, NXCOLLECTION, NXDETECTOR, NXENTRY, NXEVENT_DATA,
    NXINSTRUMENT, NXLOG, NXMONITOR, ROOT, SDS, NxPath, classify, components,
    join, parent,
)
from .store import StoreHandle

log = logging.getLogger(__name__)

Mode = Literal["legacy", "indexed"]
MODES: tuple[str, ...] = ("legacy", "indexed")

LOG_FIELDS = ("time", "value", "average_value", "average_value_error")
MONITOR_FIELD = "data"
DETECTOR_FIELDS = ("pixel_id_offset", "pixel_count")
EVENT_FIELDS = ("event_id", "event_index", "event_time_offset", "event_time_zero",
                "event_total_counts")


# -- result types ----------------------------------------------------------

def _same(a: np.ndarray, b: np.ndarray) -> bool:
    return a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()


@dataclass(frozen=True, eq=False)
class LogSeries:
    name: str
    times: np.ndarray
    values: np.ndarray
    average_value: float
    average_value_error: float

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LogSeries):
            return NotImplemented
        return (self.name == other.name and _same(self.times, other.times)
                and _same(self.values, other.values)
                and np.float64(self.average_value).tobytes() == np.float64(other.average_value).tobytes()
                and np.float64(self.average_value_error).tobytes()
                == np.float64(other.average_value_error).tobytes())


@dataclass(frozen=True, eq=False)
class BankEvents:
    bank_path: NxPath
    event_id: np.ndarray
    event_time_offset: np.ndarray
    event_time_zero: np.ndarray
    event_index: np.ndarray
    event_total_counts: int

    def validate(self) -> None:
        total = self.event_total_counts
        if self.event_id.shape[0] != total or self.event_time_offset.shape[0] != total:
            raise MalformedBank(f"{self.bank_path}: event arrays hold {self.event_id.shape[0]} ids and "
                                f"{self.event_time_offset.shape[0]} offsets, total is {total}")
        if self.event_index.shape[0] != self.event_time_zero.shape[0]:
            raise MalformedBank(f"{self.bank_path}: event_index and event_time_zero differ in length")
        if not kernels.event_index_ok(self.event_index, total):
            raise MalformedBank(f"{self.bank_path}: event_index must start at 0, be non-decreasing "
                                f"and stay <= {total}")


@dataclass(frozen=True)
class Geometry:
    # bank name -> (pixel_id_offset, pixel_count), in path order
    banks: dict[str, tuple[int, int]] = field(default_factory=dict)

    def validate(self) -> None:
        spans = sorted((off, cnt, name) for name, (off, cnt) in self.banks.items() if cnt)
        for (o1, c1, n1), (o2, _, n2) in zip(spans, spans[1:]):
            if o1 + c1 > o2:
                raise OverlappingPixelRanges(f"pixel ranges of {n1} and {n2} overlap")


@dataclass(eq=False)
class EventWorkspace:
    """Events grouped per pixel, stored CSR-style.

    Pixel ``pixel_ids[k]`` owns events ``offsets[k]:offsets[k+1]`` of the
    ``tof`` / ``pulse`` arrays and belongs to bank ``bank_names[pixel_bank[k]]``.
    Only pixels with at least one event are listed.
    """

    pixel_ids: np.ndarray
    offsets: np.ndarray
    tof: np.ndarray
    pulse: np.ndarray
    pixel_bank: np.ndarray
    bank_names: tuple[str, ...]
    bank_totals: dict[str, int]
    logs: dict[str, LogSeries]
    monitors: dict[str, np.ndarray]
    geometry: Geometry

    @property
    def n_events(self) -> int:
        return int(self.tof.shape[0])

    def events(self, pixel: int) -> list[tuple[float, int, str]]:
        k = int(np.searchsorted(self.pixel_ids, pixel))
        if k == self.pixel_ids.shape[0] or self.pixel_ids[k] != pixel:
            return []
        lo, hi = int(self.offsets[k]), int(self.offsets[k + 1])
        bank = self.bank_names[self.pixel_bank[k]]
        return [(float(t), int(p), bank) for t, p in zip(self.tof[lo:hi], self.pulse[lo:hi])]

    @property
    def pixels(self) -> dict[int, list[tuple[float, int, str]]]:
        """Full pixel -> events mapping (materialised; small files only)."""
        return {int(p): self.events(int(p)) for p in self.pixel_ids}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventWorkspace):
            return NotImplemented
        arrays = ("pixel_ids", "offsets", "tof", "pulse", "pixel_bank")
        if not all(_same(getattr(self, a), getattr(other, a)) for a in arrays):
            return False
        if self.bank_names != other.bank_names or self.bank_totals != other.bank_totals:
            return False
        if self.logs != other.logs or self.geometry != other.geometry:
            return False
        if self.monitors.keys() != other.monitors.keys():
            return False
        return all(_same(v, other.monitors[k]) for k, v in self.monitors.items())


@dataclass
class LoadContext:
    handle: StoreHandle
    mode: Mode
    index: Optional[MetadataIndex] = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if (self.mode == "indexed") != (self.index is not None):
            raise ValueError("an index is required in indexed mode and forbidden in legacy mode")


# -- legacy navigation -----------------------------------------------------

class _Walker:
    """Hierarchical navigation with no memory between calls.

    Opening a group re-walks every level from the root: at each level the
    parent is listed to find the next name and the child's NX_class is read
    to check its type. ``enter`` additionally rebuilds the name -> class table
    of the group it opened.
    """

    def __init__(self, h: StoreHandle):
        self.h = h

    def _nx_class(self, path: str) -> str:
        try:
            return classify(GROUP, self.h.read_attribute(path, NX_CLASS))
        except NoSuchAttribute:
            return classify(GROUP, None)

    def open_group(self, path: str) -> None:
        cur = ROOT
        for name in components(path):
            kids = self.h.list_children(cur)
            i = bisect_left(kids, (name,))
            if i == len(kids) or kids[i][0] != name:
                raise NoSuchPath(f"no entry {join(cur, name)!r}")
            cur = join(cur, name)
            if kids[i][1] != GROUP:
                raise NotAGroup(f"{cur} is a dataset")
            self._nx_class(cur)

    def classify_children(self, group: str) -> list[tuple[str, str]]:
        out = []
        for name, kind in self.h.list_children(group):
            p = join(group, name)
            out.append((p, SDS if kind == DATASET else self._nx_class(p)))
        return out

    def enter(self, group: str) -> list[tuple[str, str]]:
        self.open_group(group)
        return self.classify_children(group)

    def dataset_names(self, group: str) -> set[str]:
        self.open_group(group)
        return {name for name, kind in self.h.list_children(group) if kind == DATASET}

    def find_entry(self) -> str:
        for p, c in self.classify_children(ROOT):
            if c == NXENTRY:
                return p
        raise MissingEntryGroup("no NXentry group under '/'")


# -- shared lookups --------------------------------------------------------

def _entry(ctx: LoadContext, walker: Optional[_Walker] = None) -> str:
    if walker is not None:
        return walker.find_entry()
    for p in ctx.index.entries_of_class(NXENTRY):
        if p.depth == 1:
            return p
    raise MissingEntryGroup("no NXentry group under '/'")


def _indexed_children(ix: MetadataIndex, c: str, group: str) -> list[NxPath]:
    return [p for p in ix.entries_of_class(c) if parent(p) == group]


def _dataset_names(ctx: LoadContext, group: str) -> set[str]:
    if ctx.mode == "indexed":
        return {p.name for p in ctx.index.datasets_under(group)}
    return _Walker(ctx.handle).dataset_names(group)


def _read_fields(ctx: LoadContext, group: str, fields, error=MissingDataset) -> dict:
    present = _dataset_names(ctx, group)
    missing = [f for f in fields if f not in present]
    if missing:
        raise error(f"{group}: missing dataset(s) {', '.join(missing)}")
    return {f: ctx.handle.read_dataset(join(group, f)) for f in fields}


def _numeric(arr, kinds: str, dtype, where: str, error) -> np.ndarray:
    if not isinstance(arr, np.ndarray) or arr.dtype.kind not in kinds:
        raise error(f"{where}: unexpected payload type")
    return arr.astype(dtype, copy=False)


def _scalar(arr, kinds: str, dtype, where: str, error):
    arr = _numeric(arr, kinds, dtype, where, error)
    if arr.shape != (1,):
        raise error(f"{where}: expected exactly one element, got {arr.shape[0]}")
    return arr[0]


# -- stages ----------------------------------------------------------------

def load_logs(ctx: LoadContext) -> dict[str, LogSeries]:
    if ctx.mode == "indexed":
        ix = ctx.index
        entry = _entry(ctx)
        groups = [p for p in ix.entries_of_class(NXLOG)
                  if parent(p) != ROOT and parent(parent(p)) == entry
                  and ix.contains(NXCOLLECTION, parent(p))]
    else:
        w = _Walker(ctx.handle)
        entry = _entry(ctx, w)
        groups = []
        for p, c in w.enter(entry):
            if c == NXCOLLECTION:
                groups.extend(q for q, c2 in w.enter(p) if c2 == NXLOG)

    out: dict[str, LogSeries] = {}
    for g in groups:
        series = _read_log(ctx, g)
        if series.name in out:
            raise MalformedLog(f"log name {series.name!r} appears in more than one collection")
        out[series.name] = series
    return out


def _read_log(ctx: LoadContext, group: str) -> LogSeries:
    d = _read_fields(ctx, group, LOG_FIELDS)
    times = _numeric(d["time"], "uif", np.float64, f"{group}/time", MalformedLog)
    values = _numeric(d["value"], "uif", np.float64, f"{group}/value", MalformedLog)
    if times.shape != values.shape:
        raise MalformedLog(f"{group}: {times.shape[0]} times but {values.shape[0]} values")
    if times.shape[0] > 1 and not np.all(times[1:] > times[:-1]):
        raise MalformedLog(f"{group}: times are not strictly increasing")
    avg = _scalar(d["average_value"], "uif", np.float64, f"{group}/average_value", MalformedLog)
    err = _scalar(d["average_value_error"], "uif", np.float64, f"{group}/average_value_error",
                  MalformedLog)
    return LogSeries(NxPath(group).name, times, values, float(avg), float(err))


def load_monitors(ctx: LoadContext) -> dict[str, np.ndarray]:
    if ctx.mode == "indexed":
        groups = _indexed_children(ctx.index, NXMONITOR, _entry(ctx))
    else:
        w = _Walker(ctx.handle)
        groups = [p for p, c in w.enter(_entry(ctx, w)) if c == NXMONITOR]
    out = {}
    for g in groups:
        d = _read_fields(ctx, g, (MONITOR_FIELD,), MalformedMonitor)
        out[NxPath(g).name] = _numeric(d[MONITOR_FIELD], "ui", np.uint64, g, MalformedMonitor)
    return out


def load_geometry(ctx: LoadContext) -> Geometry:
    if ctx.mode == "indexed":
        ix = ctx.index
        entry = _entry(ctx)
        detectors = [p for p in ix.entries_of_class(NXDETECTOR)
                     if parent(p) != ROOT and parent(parent(p)) == entry
                     and ix.contains(NXINSTRUMENT, parent(p))]
    else:
        w = _Walker(ctx.handle)
        detectors = []
        for p, c in w.enter(_entry(ctx, w)):
            if c == NXINSTRUMENT:
                detectors.extend(q for q, c2 in w.enter(p) if c2 == NXDETECTOR)
        detectors.sort()

    banks: dict[str, tuple[int, int]] = {}
    for g in detectors:
        d = _read_fields(ctx, g, DETECTOR_FIELDS)
        off = int(_scalar(d["pixel_id_offset"], "ui", np.uint32, f"{g}/pixel_id_offset", MalformedBank))
        cnt = int(_scalar(d["pixel_count"], "ui", np.uint32, f"{g}/pixel_count", MalformedBank))
        name = NxPath(g).name
        if name in banks:
            raise OverlappingPixelRanges(f"detector name {name!r} declared twice")
        banks[name] = (off, cnt)
    geo = Geometry(banks)
    geo.validate()
    return geo


def load_bank_data(ctx: LoadContext, bank: str) -> BankEvents:
    d = _read_fields(ctx, bank, EVENT_FIELDS)
    be = BankEvents(
        NxPath(bank),
        _numeric(d["event_id"], "ui", np.uint32, f"{bank}/event_id", MalformedBank),
        _numeric(d["event_time_offset"], "f", np.float32, f"{bank}/event_time_offset", MalformedBank),
        _numeric(d["event_time_zero"], "f", np.float64, f"{bank}/event_time_zero", MalformedBank),
        _numeric(d["event_index"], "ui", np.uint64, f"{bank}/event_index", MalformedBank),
        int(_scalar(d["event_total_counts"], "ui", np.uint64, f"{bank}/event_total_counts",
                    MalformedBank)),
    )
    be.validate()
    return be


def assign_pulses(b: BankEvents) -> np.ndarray:
    return kernels.assign_pulses(b.event_index, b.event_total_counts)


def bank_paths(ctx: LoadContext) -> list[str]:
    if ctx.mode == "indexed":
        return list(_indexed_children(ctx.index, NXEVENT_DATA, _entry(ctx)))
    w = _Walker(ctx.handle)
    return [p for p, c in w.enter(_entry(ctx, w)) if c == NXEVENT_DATA]


def detector_name(bank_path: str) -> str:
    """Detector group name paired with an event group: ``bank7_events`` -> ``bank7``."""
    name = NxPath(bank_path).name
    return name[:-len("_events")] if name.endswith("_events") else name


def _bin_bank(ctx: LoadContext, bank: str, geometry: Geometry):
    be = load_bank_data(ctx, bank)
    det = detector_name(bank)
    if det not in geometry.banks:
        raise MalformedBank(f"{bank}: no detector {det!r} in geometry")
    off, cnt = geometry.banks[det]
    ids = be.event_id
    if ids.shape[0] and (int(ids.min()) < off or int(ids.max()) >= off + cnt):
        raise MalformedBank(f"{bank}: pixel ids outside [{off}, {off + cnt})")
    pulses = assign_pulses(be)
    counts, tof, pulse = kernels.bin_by_pixel(ids, be.event_time_offset, pulses, off, cnt)
    return off, counts, tof, pulse, be.event_total_counts


def _assemble(banks: list[str], binned: list, logs, monitors, geometry) -> EventWorkspace:
    pix, cnts, tofs, pulses, owner = [], [], [], [], []
    for k in sorted(range(len(banks)), key=lambda k: binned[k][0]):
        off, counts, tof, pulse, _ = binned[k]
        nz = np.flatnonzero(counts)
        pix.append((nz + off).astype(np.uint32))
        cnts.append(counts[nz])
        tofs.append(tof)
        pulses.append(pulse)
        owner.append(np.full(nz.shape[0], k, dtype=np.int32))
    counts = np.concatenate(cnts) if cnts else np.zeros(0, np.int64)
    offsets = np.zeros(counts.shape[0] + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return EventWorkspace(
        pixel_ids=np.concatenate(pix) if pix else np.zeros(0, np.uint32),
        offsets=offsets,
        tof=np.concatenate(tofs) if tofs else np.zeros(0, np.float32),
        pulse=np.concatenate(pulses) if pulses else np.zeros(0, np.uint64),
        pixel_bank=np.concatenate(owner) if owner else np.zeros(0, np.int32),
        bank_names=tuple(banks),
        bank_totals={b: int(binned[k][4]) for k, b in enumerate(banks)},
        logs=logs,
        monitors=monitors,
        geometry=geometry,
    )


def load_event_nexus(handle: StoreHandle, mode: Mode = "indexed", workers: int = 1) -> EventWorkspace:
    """Run the four loading stages against ``handle``.

    ``workers > 1`` loads banks concurrently; results are merged in sorted
    bank-path order so the workspace does not depend on the schedule.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    ctx = LoadContext(handle, mode, build_index(handle) if mode == "indexed" else None)
    logs = load_logs(ctx)
    monitors = load_monitors(ctx)
    geometry = load_geometry(ctx)
    banks = sorted(bank_paths(ctx))
    if workers > 1 and len(banks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            binned = list(pool.map(lambda b: _bin_bank(ctx, b, geometry), banks))
    else:
        binned = [_bin_bank(ctx, b, geometry) for b in banks]
    log.debug("loaded %d banks, %d logs in %s mode", len(banks), len(logs), mode)
    return _assemble(banks, binned, logs, monitors, geometry)
