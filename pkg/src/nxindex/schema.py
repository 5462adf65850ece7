"""Domain types for NeXus-style hierarchical entries.

Paths are plain ``str`` subclasses so that they hash, compare and slice like
text. Python compares strings by code point, which for valid Unicode is the
same order as comparing their UTF-8 encodings byte by byte; no custom
comparator is needed to get byte-lexicographic ordering.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Optional

import numpy as np

from .errors import MalformedPath, RootHasNoParent

ROOT = "/"
NX_CLASS = "NX_class"

NXENTRY = "NXentry"
NXCOLLECTION = "NXcollection"
NXLOG = "NXlog"
NXEVENT_DATA = "NXevent_data"
NXMONITOR = "NXmonitor"
NXINSTRUMENT = "NXinstrument"
NXDETECTOR = "NXdetector"
NXGEOMETRY = "NXgeometry"
SDS = "SDS"
NXUNKNOWN = "NXunknown"

WELL_KNOWN_CLASSES = frozenset({
    NXENTRY, NXCOLLECTION, NXLOG, NXEVENT_DATA, NXMONITOR,
    NXINSTRUMENT, NXDETECTOR, NXGEOMETRY, SDS,
})

Kind = Literal["group", "dataset"]
GROUP: Kind = "group"
DATASET: Kind = "dataset"

# name -> little-endian numpy dtype; utf8 payloads are raw bytes decoded to str
DTYPES: dict[str, Optional[np.dtype]] = {
    "u32": np.dtype("<u4"),
    "u64": np.dtype("<u8"),
    "f32": np.dtype("<f4"),
    "f64": np.dtype("<f8"),
    "utf8": None,
}


class NxPath(str):
    """Absolute, canonical, slash-separated entry path."""

    __slots__ = ()

    @property
    def name(self) -> str:
        return self[self.rfind("/") + 1:]

    @property
    def depth(self) -> int:
        return 0 if self == ROOT else self.count("/")

    def child(self, name: str) -> NxPath:
        return NxPath(join(self, name))

    def __repr__(self) -> str:
        return f"NxPath({str.__repr__(self)})"


def join(parent: str, name: str) -> str:
    """Concatenate without validation; callers pass already-valid parts."""
    return "/" + name if parent == ROOT else parent + "/" + name


def parse_path(raw: str) -> NxPath:
    if not isinstance(raw, str) or not raw:
        raise MalformedPath(f"empty path: {raw!r}")
    if raw[0] != "/":
        raise MalformedPath(f"path must start with '/': {raw!r}")
    if raw == ROOT:
        return NxPath(raw)
    if raw[-1] == "/":
        raise MalformedPath(f"trailing '/' in {raw!r}")
    if "//" in raw:
        raise MalformedPath(f"empty component in {raw!r}")
    return NxPath(raw)


def parent(p: str) -> NxPath:
    if p == ROOT:
        raise RootHasNoParent("the root path has no parent")
    cut = p.rfind("/")
    return NxPath(p[:cut] if cut > 0 else ROOT)


def components(p: str) -> list[str]:
    return [] if p == ROOT else p[1:].split("/")


@dataclass(frozen=True, slots=True)
class EntryRecord:
    path: NxPath
    kind: Kind
    attributes: tuple[tuple[str, str], ...] = ()
    dtype: Optional[str] = None
    element_count: Optional[int] = None
    byte_length: Optional[int] = None

    def attribute(self, key: str) -> Optional[str]:
        for k, v in self.attributes:
            if k == key:
                return v
        return None

    @property
    def is_group(self) -> bool:
        return self.kind == GROUP


def group_record(path: str, nx_class: Optional[str] = None,
                 attributes: Iterable[tuple[str, str]] = ()) -> EntryRecord:
    attrs = tuple(attributes)
    if nx_class is not None:
        attrs = ((NX_CLASS, nx_class),) + attrs
    return EntryRecord(parse_path(path), GROUP, attrs)


def classify(kind: str, nx_class: Optional[str]) -> str:
    """Class tag from an entry kind and its (possibly missing) NX_class value."""
    if kind == DATASET:
        return SDS
    return nx_class if nx_class else NXUNKNOWN


def classify_entry(rec: EntryRecord) -> str:
    return classify(rec.kind, rec.attribute(NX_CLASS) if rec.kind == GROUP else None)
