"""Two-level in-memory metadata index.

The first level maps an NX_class tag to its bucket, the second level holds the
absolute paths of that class in byte-lexicographic order. Both levels are
sorted tuples searched with :mod:`bisect`, i.e. implicit perfectly balanced
binary search trees: every lookup is worst-case logarithmic and every bucket
supports prefix range scans. The index is frozen once built.
"""
from __future__ import annotations

from bisect import bisect_left
from collections import defaultdict
from typing import Iterable, Mapping, Optional

from .errors import NoSuchAttribute
from .schema import DATASET, NX_CLASS, ROOT, SDS, NxPath, classify, join
from .store import StoreHandle

# first character after "/" in code-point order; bounds a prefix range scan
_AFTER_SLASH = chr(ord("/") + 1)


class ComparisonCounter:
    """Tally of key comparisons made while searching, for complexity checks."""

    def __init__(self) -> None:
        self.count = 0

    def reset(self) -> None:
        self.count = 0


class _Probe:
    """Search key that counts every comparison made against it.

    ``bisect`` evaluates ``bucket[i] < probe``; ``str.__lt__`` returns
    NotImplemented for a foreign type, so Python falls back to the reflected
    ``probe.__gt__``, which is where the count happens.
    """

    __slots__ = ("key", "counter")

    def __init__(self, key: str, counter: ComparisonCounter):
        self.key = key
        self.counter = counter

    def __gt__(self, other: str) -> bool:
        self.counter.count += 1
        return self.key > other

    def __lt__(self, other: str) -> bool:
        self.counter.count += 1
        return self.key < other

    def __eq__(self, other: object) -> bool:
        self.counter.count += 1
        return self.key == other

    __hash__ = None  # type: ignore[assignment]


def _key(value: str, counter: Optional[ComparisonCounter]):
    return value if counter is None else _Probe(value, counter)


class MetadataIndex:
    __slots__ = ("_classes", "_buckets")

    def __init__(self, buckets: Mapping[str, Iterable[str]]):
        classes = sorted(c for c, paths in buckets.items())
        self._classes: tuple[str, ...] = tuple(classes)
        built = []
        for c in classes:
            paths = sorted(set(NxPath(p) for p in buckets[c]))
            built.append(tuple(paths))
        self._buckets: tuple[tuple[NxPath, ...], ...] = tuple(built)

    @property
    def classes(self) -> tuple[str, ...]:
        return self._classes

    @property
    def class_count(self) -> int:
        return len(self._classes)

    @property
    def max_entries_per_class(self) -> int:
        return max((len(b) for b in self._buckets), default=0)

    def __len__(self) -> int:
        return sum(len(b) for b in self._buckets)

    def bucket_sizes(self) -> dict[str, int]:
        return {c: len(b) for c, b in zip(self._classes, self._buckets)}

    def as_dict(self) -> dict[str, tuple[NxPath, ...]]:
        return dict(zip(self._classes, self._buckets))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MetadataIndex):
            return NotImplemented
        return self._classes == other._classes and self._buckets == other._buckets

    def __repr__(self) -> str:
        return f"MetadataIndex({self.bucket_sizes()})"

    def _bucket(self, c: str, counter: Optional[ComparisonCounter] = None) -> tuple[NxPath, ...]:
        probe = _key(c, counter)
        i = bisect_left(self._classes, probe)
        if i < len(self._classes) and probe == self._classes[i]:
            return self._buckets[i]
        return ()

    # queries
    def entries_of_class(self, c: str) -> tuple[NxPath, ...]:
        return self._bucket(c)

    def contains(self, c: str, p: str, counter: Optional[ComparisonCounter] = None) -> bool:
        bucket = self._bucket(c, counter)
        probe = _key(p, counter)
        i = bisect_left(bucket, probe)
        return i < len(bucket) and probe == bucket[i]

    def first_entry_of_class(self, c: str) -> Optional[NxPath]:
        bucket = self._bucket(c)
        return bucket[0] if bucket else None

    def datasets_under(self, group: str, counter: Optional[ComparisonCounter] = None) -> list[NxPath]:
        """Datasets exactly one level below ``group``, in sorted order.

        Bounded range scan over the SDS bucket; nested subtrees are skipped
        with a fresh bisection instead of being walked.
        """
        bucket = self._bucket(SDS, counter)
        prefix = "/" if group == ROOT else group + "/"
        n = len(prefix)
        lo = bisect_left(bucket, _key(prefix, counter))
        hi = bisect_left(bucket, _key(prefix[:-1] + _AFTER_SLASH, counter), lo)
        out = []
        i = lo
        while i < hi:
            p = bucket[i]
            cut = p.find("/", n)
            if cut < 0:
                out.append(p)
                i += 1
            else:
                i = bisect_left(bucket, _key(p[:cut] + _AFTER_SLASH, counter), i + 1, hi)
        return out


def build_index(h: StoreHandle) -> MetadataIndex:
    """One depth-first pass over the hierarchy through the counted interface.

    Costs exactly one ``list_children`` per group and one ``read_attribute``
    per non-root group; no payload is touched.
    """
    buckets: dict[str, list[str]] = defaultdict(list)
    stack = [ROOT]
    while stack:
        g = stack.pop()
        subgroups = []
        for name, kind in h.list_children(g):
            p = join(g, name)
            if kind == DATASET:
                buckets[SDS].append(p)
                continue
            try:
                nx = h.read_attribute(p, NX_CLASS)
            except NoSuchAttribute:
                nx = None
            buckets[classify(kind, nx)].append(p)
            subgroups.append(p)
        stack.extend(reversed(subgroups))
    return MetadataIndex(buckets)


def entries_of_class(ix: MetadataIndex, c: str) -> tuple[NxPath, ...]:
    return ix.entries_of_class(c)


def contains(ix: MetadataIndex, c: str, p: str) -> bool:
    return ix.contains(c, p)


def first_entry_of_class(ix: MetadataIndex, c: str) -> Optional[NxPath]:
    return ix.first_entry_of_class(c)


def datasets_under(ix: MetadataIndex, group: str) -> list[NxPath]:
    return ix.datasets_under(group)
