"""NXB single-file container and its instrumented read interface.

Layout (version 1, every integer little-endian)::

    0..3    magic b"NXB1"
    4       format version (1)
    5..12   record_count u64
    records, each:
        kind u8 (0 group, 1 dataset)
        path_len u16, path bytes (UTF-8)
        attr_count u16, then per attribute key_len u16 + key, value_len u16 + value
        datasets only: dtype u8, element_count u64, data_offset u64, byte_length u64
    data region: payloads at their absolute offsets, in record order

Record headers are parsed eagerly by :func:`open_store`; payloads are read on
demand. Every call on the :class:`StoreHandle` read interface bumps exactly
one counter, so metadata traffic can be measured and compared.
"""
from __future__ import annotations

import mmap
import os
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np

from . import schema
from .errors import (
    BadMagic, CorruptPayload, DuplicatePath, InvalidModel, IoFailure,
    MalformedPath, NoSuchAttribute, NoSuchPath, NotADataset, NotAGroup,
    OrphanRecord, TruncatedRecord,
)
from .schema import DATASET, GROUP, DTYPES, NX_CLASS, ROOT, EntryRecord, NxPath

MAGIC = b"NXB1"
VERSION = 1
HEADER = struct.Struct("<4sBQ")
U8 = struct.Struct("<B")
U16 = struct.Struct("<H")
DATASET_TAIL = struct.Struct("<BQQQ")

DTYPE_CODES = {"u32": 0, "u64": 1, "f32": 2, "f64": 3, "utf8": 4}
CODE_DTYPES = {v: k for k, v in DTYPE_CODES.items()}

Payload = Union[np.ndarray, str]


# -- in-memory model -------------------------------------------------------

@dataclass
class FileModel:
    """Records in pre-order plus one payload per dataset record."""

    records: list[EntryRecord] = field(default_factory=list)
    payloads: dict[str, Payload] = field(default_factory=dict)

    @property
    def n_entries(self) -> int:
        """Entries below the root (groups and datasets)."""
        return sum(1 for r in self.records if r.path != ROOT)

    @property
    def n_groups(self) -> int:
        return sum(1 for r in self.records if r.kind == GROUP)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FileModel):
            return NotImplemented
        if self.records != other.records:
            return False
        if self.payloads.keys() != other.payloads.keys():
            return False
        return all(_payload_equal(v, other.payloads[k]) for k, v in self.payloads.items())


def _payload_equal(a: Payload, b: Payload) -> bool:
    if isinstance(a, str) or isinstance(b, str):
        return isinstance(a, str) and isinstance(b, str) and a == b
    return a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()


class ModelBuilder:
    """Appends records in pre-order and keeps payload metadata consistent."""

    def __init__(self, root_attributes: tuple[tuple[str, str], ...] = ()):
        self.model = FileModel([EntryRecord(NxPath(ROOT), GROUP, tuple(root_attributes))])

    def group(self, path: str, nx_class: Optional[str] = None,
              attributes: tuple[tuple[str, str], ...] = ()) -> NxPath:
        rec = schema.group_record(path, nx_class, attributes)
        self.model.records.append(rec)
        return rec.path

    def dataset(self, path: str, data, dtype: Optional[str] = None,
                attributes: tuple[tuple[str, str], ...] = ()) -> NxPath:
        p = schema.parse_path(path)
        if isinstance(data, str):
            dtype = "utf8"
            raw = data.encode("utf-8")
            count = nbytes = len(raw)
            payload: Payload = data
        else:
            if dtype is None:
                dtype = _infer_dtype(np.asarray(data))
            payload = np.ascontiguousarray(np.asarray(data, dtype=DTYPES[dtype]).reshape(-1))
            count, nbytes = int(payload.size), int(payload.nbytes)
        self.model.records.append(EntryRecord(p, DATASET, tuple(attributes), dtype, count, nbytes))
        self.model.payloads[p] = payload
        return p


def _infer_dtype(arr: np.ndarray) -> str:
    for name, dt in DTYPES.items():
        if dt is not None and arr.dtype.kind == dt.kind and arr.dtype.itemsize == dt.itemsize:
            return name
    raise InvalidModel(f"unsupported payload dtype {arr.dtype}")


def validate_model(model: FileModel) -> None:
    """Raise InvalidModel (or a more specific DataError) if invariants fail."""
    _check_records(model.records, InvalidModel)
    for rec in model.records:
        if rec.kind != DATASET:
            continue
        if rec.path not in model.payloads:
            raise InvalidModel(f"no payload for dataset {rec.path}")
        payload = model.payloads[rec.path]
        if rec.dtype == "utf8":
            if not isinstance(payload, str):
                raise InvalidModel(f"{rec.path}: utf8 record needs str payload")
            n = len(payload.encode("utf-8"))
            if rec.element_count != n or rec.byte_length != n:
                raise InvalidModel(f"{rec.path}: utf8 length mismatch")
            continue
        dt = DTYPES.get(rec.dtype or "")
        if dt is None or not isinstance(payload, np.ndarray) or payload.dtype != dt:
            raise InvalidModel(f"{rec.path}: payload dtype does not match {rec.dtype}")
        if payload.ndim != 1 or payload.size != rec.element_count:
            raise InvalidModel(f"{rec.path}: payload length does not match element_count")
        if rec.byte_length != rec.element_count * dt.itemsize:
            raise InvalidModel(f"{rec.path}: byte_length inconsistent")
    extra = model.payloads.keys() - {r.path for r in model.records if r.kind == DATASET}
    if extra:
        raise InvalidModel(f"payloads without dataset records: {sorted(extra)[:3]}")


def _check_records(records: list[EntryRecord], orphan_error=OrphanRecord) -> None:
    if not records or records[0].path != ROOT or records[0].kind != GROUP:
        raise orphan_error("first record must be the root group '/'")
    seen: set[str] = set()
    groups: set[str] = set()
    for rec in records:
        p = rec.path
        if p != ROOT:
            if not isinstance(p, str) or not p or p[0] != "/" or p[-1] == "/" or "//" in p:
                schema.parse_path(p)
            cut = p.rfind("/")
            if (p[:cut] or ROOT) not in groups:
                raise orphan_error(f"parent of {p} missing or not an earlier group")
        if p in seen:
            raise DuplicatePath(f"duplicate path {p}")
        seen.add(p)
        if rec.kind == GROUP:
            if rec.dtype is not None or rec.element_count is not None or rec.byte_length is not None:
                raise InvalidModel(f"group {p} carries dataset fields")
            for k, v in rec.attributes:
                if k == NX_CLASS and (v == "" or v == schema.SDS):
                    raise InvalidModel(f"group {p} has invalid NX_class {v!r}")
            groups.add(p)
        elif rec.kind == DATASET:
            if rec.dtype not in DTYPE_CODES:
                raise InvalidModel(f"dataset {p} has unknown dtype {rec.dtype!r}")
        else:
            raise InvalidModel(f"unknown kind {rec.kind!r}")


# -- writing ---------------------------------------------------------------

def _text(s: str, what: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise InvalidModel(f"{what} longer than 65535 bytes")
    return U16.pack(len(raw)) + raw


def encode_store(model: FileModel) -> bytes:
    """Serialize ``model`` to NXB bytes. Output is a pure function of the model."""
    validate_model(model)
    heads: list[bytes] = []
    for rec in model.records:
        if len(rec.attributes) > 0xFFFF:
            raise InvalidModel(f"{rec.path}: too many attributes")
        parts = [U8.pack(0 if rec.kind == GROUP else 1), _text(rec.path, "path"),
                 U16.pack(len(rec.attributes))]
        for k, v in rec.attributes:
            parts.append(_text(k, "attribute key"))
            parts.append(_text(v, "attribute value"))
        heads.append(b"".join(parts))

    offset = HEADER.size + sum(len(h) for h in heads) + DATASET_TAIL.size * sum(
        1 for r in model.records if r.kind == DATASET)
    out = [HEADER.pack(MAGIC, VERSION, len(model.records))]
    blobs: list[bytes] = []
    for rec, head in zip(model.records, heads):
        out.append(head)
        if rec.kind == DATASET:
            payload = model.payloads[rec.path]
            blob = payload.encode("utf-8") if isinstance(payload, str) else payload.tobytes()
            out.append(DATASET_TAIL.pack(DTYPE_CODES[rec.dtype], rec.element_count, offset, len(blob)))
            blobs.append(blob)
            offset += len(blob)
    return b"".join(out + blobs)


def write_store(model: FileModel, destination: Union[str, os.PathLike]) -> None:
    """Write atomically: handles already open on ``destination`` keep the old file."""
    data = encode_store(model)
    dest = os.fspath(destination)
    tmp = f"{dest}.{os.getpid()}.{threading.get_ident()}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, dest)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoFailure(f"cannot write {destination}: {exc}") from exc


# -- reading ---------------------------------------------------------------

class CallCounters(NamedTuple):
    list_children_calls: int = 0
    read_attribute_calls: int = 0
    dataset_info_calls: int = 0
    read_dataset_calls: int = 0
    bytes_read: int = 0

    @property
    def metadata_calls(self) -> int:
        return self.list_children_calls + self.read_attribute_calls

    def __sub__(self, other: CallCounters) -> CallCounters:  # type: ignore[override]
        return CallCounters(*(a - b for a, b in zip(self, other)))


class DatasetInfo(NamedTuple):
    dtype: str
    element_count: int
    byte_length: int


class _Entry:
    __slots__ = ("record", "attrs", "children", "offset")

    def __init__(self, record: EntryRecord, offset: int = -1):
        self.record = record
        self.attrs = dict(record.attributes)
        self.children: Optional[tuple[tuple[str, str], ...]] = None
        self.offset = offset


def _spin(ns: int) -> None:
    # time.sleep overshoots microsecond waits by tens of microseconds
    end = time.perf_counter_ns() + ns
    while time.perf_counter_ns() < end:
        pass


class StoreHandle:
    """Open NXB source with all record headers resident.

    ``meta_latency_us`` adds a fixed busy-wait to every metadata call
    (``list_children`` and ``read_attribute``), standing in for slow storage.
    Reads are safe from several threads; counters are updated under a lock.
    """

    def __init__(self, entries: dict[str, _Entry], order: list[str], source: str,
                 reader, size: int, meta_latency_us: float = 0.0):
        self._entries = entries
        self._order = order
        self.source = source
        self._reader = reader
        self._size = size
        self.meta_latency_us = float(meta_latency_us)
        self._latency_ns = int(round(self.meta_latency_us * 1000))
        self._lock = threading.Lock()
        self._lc = self._ra = self._di = self._rd = self._bytes = 0

    # construction helpers
    @classmethod
    def from_model(cls, model: FileModel, meta_latency_us: float = 0.0) -> StoreHandle:
        """Handle over an in-memory model, bypassing serialization."""
        validate_model(model)
        entries, order = _build_table(((r, -1) for r in model.records), checked=True)
        payloads = model.payloads

        def reader(entry: _Entry) -> bytes:
            p = payloads[entry.record.path]
            return p.encode("utf-8") if isinstance(p, str) else p.tobytes()

        return cls(entries, order, "<memory>", reader, 0, meta_latency_us)

    def close(self) -> None:
        closer = getattr(self._reader, "close", None)
        if closer is not None:
            closer()

    def __enter__(self) -> StoreHandle:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # uncounted introspection, for tooling and tests
    @property
    def records(self) -> list[EntryRecord]:
        return [self._entries[p].record for p in self._order]

    @property
    def file_size(self) -> int:
        return self._size

    # counted interface
    def _entry(self, path: str) -> _Entry:
        try:
            return self._entries[path]
        except KeyError:
            raise NoSuchPath(f"no entry {path!r}") from None

    def list_children(self, group: str) -> tuple[tuple[str, str], ...]:
        with self._lock:
            self._lc += 1
        if self._latency_ns:
            _spin(self._latency_ns)
        e = self._entry(group)
        if e.children is None:
            raise NotAGroup(f"{group} is a dataset")
        return e.children

    def read_attribute(self, entry: str, key: str) -> str:
        with self._lock:
            self._ra += 1
        if self._latency_ns:
            _spin(self._latency_ns)
        try:
            return self._entry(entry).attrs[key]
        except KeyError:
            raise NoSuchAttribute(f"{entry} has no attribute {key!r}") from None

    def dataset_info(self, entry: str) -> DatasetInfo:
        with self._lock:
            self._di += 1
        rec = self._entry(entry).record
        if rec.kind != DATASET:
            raise NotADataset(f"{entry} is a group")
        return DatasetInfo(rec.dtype, rec.element_count, rec.byte_length)

    def read_dataset(self, entry: str) -> Payload:
        with self._lock:
            self._rd += 1
        rec = self._entry(entry).record
        if rec.kind != DATASET:
            raise NotADataset(f"{entry} is a group")
        raw = self._reader(self._entries[entry])
        try:
            with self._lock:
                self._bytes += len(raw)
            if len(raw) != rec.byte_length:
                raise CorruptPayload(f"{entry}: short payload read")
            if rec.dtype == "utf8":
                try:
                    return str(raw, "utf-8")
                except UnicodeDecodeError as exc:
                    raise CorruptPayload(f"{entry}: invalid UTF-8") from exc
            dt = DTYPES[rec.dtype]
            if rec.byte_length != rec.element_count * dt.itemsize:
                raise CorruptPayload(f"{entry}: byte_length {rec.byte_length} does not hold "
                                     f"{rec.element_count} x {rec.dtype}")
            return np.frombuffer(raw, dtype=dt).copy()
        finally:
            if isinstance(raw, memoryview):
                raw.release()

    def counters(self) -> CallCounters:
        with self._lock:
            return CallCounters(self._lc, self._ra, self._di, self._rd, self._bytes)


def _build_table(items, checked: bool = False) -> tuple[dict[str, _Entry], list[str]]:
    pairs = list(items)
    if not checked:
        _check_records([rec for rec, _ in pairs])
    entries: dict[str, _Entry] = {}
    order: list[str] = []
    kids: dict[str, list[tuple[str, str]]] = {}
    for rec, offset in pairs:
        p = rec.path
        entries[p] = _Entry(rec, offset)
        order.append(p)
        if rec.kind == GROUP:
            kids[p] = []
        if p != ROOT:
            cut = p.rfind("/")
            kids[p[:cut] or ROOT].append((p[cut + 1:], rec.kind))
    for p, lst in kids.items():
        lst.sort()
        entries[p].children = tuple(lst)
    return entries, order


def _parse(buf, size: int) -> list[tuple[EntryRecord, int]]:
    """Decode the record table from ``buf`` (bytes-like, ``size`` long).

    Paths are wrapped but not validated here; :func:`_check_records` does that.
    """
    if size < HEADER.size:
        raise BadMagic("file too short for NXB header")
    magic, version, count = HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadMagic(f"unsupported NXB version {version}")
    u16 = U16.unpack_from
    tail = DATASET_TAIL.unpack_from
    tail_size = DATASET_TAIL.size
    out = []
    pos = HEADER.size
    path = "?"
    try:
        for _ in range(count):
            kind = buf[pos]
            (n,) = u16(buf, pos + 1)
            pos += 3
            if pos + n > size:
                raise IndexError
            path = str(buf[pos:pos + n], "utf-8")
            pos += n
            (n_attr,) = u16(buf, pos)
            pos += 2
            attrs = []
            for _ in range(2 * n_attr):
                (n,) = u16(buf, pos)
                pos += 2
                if pos + n > size:
                    raise IndexError
                attrs.append(str(buf[pos:pos + n], "utf-8"))
                pos += n
            attrs = tuple(zip(attrs[::2], attrs[1::2]))
            if kind == 0:
                out.append((EntryRecord(NxPath(path), GROUP, attrs), -1))
            elif kind == 1:
                code, n_elem, offset, length = tail(buf, pos)
                pos += tail_size
                if code not in CODE_DTYPES:
                    raise TruncatedRecord(f"{path}: unknown dtype code {code}")
                if offset + length > size:
                    raise TruncatedRecord(f"{path}: payload [{offset}, {offset + length}) past end of file ({size})")
                out.append((EntryRecord(NxPath(path), DATASET, attrs, CODE_DTYPES[code], n_elem, length), offset))
            else:
                raise TruncatedRecord(f"{path}: unknown record kind {kind}")
    except (IndexError, struct.error):
        raise TruncatedRecord(f"record table ends early near offset {pos}") from None
    except UnicodeDecodeError:
        raise TruncatedRecord("invalid UTF-8 in record table") from None
    return out


class _FileReader:
    """Payload access through a read-only map of the whole file."""

    def __init__(self, fd: int, size: int):
        self.fd = fd
        self.mm = mmap.mmap(fd, size, access=mmap.ACCESS_READ)

    def __call__(self, entry: _Entry) -> memoryview:
        return memoryview(self.mm)[entry.offset:entry.offset + entry.record.byte_length]

    def close(self) -> None:
        if self.fd >= 0:
            self.mm.close()
            os.close(self.fd)
            self.fd = -1


def open_store(source: Union[str, os.PathLike], meta_latency_us: float = 0.0) -> StoreHandle:
    """Parse and validate every record header of an NXB file; payloads stay on disk."""
    try:
        fd = os.open(source, os.O_RDONLY | getattr(os, "O_BINARY", 0))
    except OSError as exc:
        raise IoFailure(f"cannot open {source}: {exc}") from exc
    reader = None
    try:
        size = os.fstat(fd).st_size
        if size < HEADER.size:
            raise BadMagic("file too short for NXB header")
        reader = _FileReader(fd, size)
        parsed = _parse(reader.mm, size)
        try:
            entries, order = _build_table(parsed)
        except MalformedPath as exc:
            raise TruncatedRecord(f"corrupt record path: {exc}") from exc
    except BaseException as exc:
        if reader is not None:
            reader.close()
        else:
            os.close(fd)
        if isinstance(exc, OSError) and not isinstance(exc, IoFailure):
            raise IoFailure(f"cannot read {source}: {exc}") from exc
        raise
    return StoreHandle(entries, order, os.fspath(source), reader, size, meta_latency_us)


def read_model(handle: StoreHandle) -> FileModel:
    """Rebuild a full FileModel by reading every payload through ``handle``."""
    recs = handle.records
    return FileModel(list(recs), {r.path: handle.read_dataset(r.path) for r in recs if r.kind == DATASET})


def counters(handle: StoreHandle) -> CallCounters:
    return handle.counters()
