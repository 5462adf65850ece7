"""Randomized models and independent oracles shared by the test modules."""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from nxindex.schema import EntryRecord, NxPath
from nxindex.store import FileModel

NAME_CHARS = list("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_:.-") + ["é", "λ", "中"]
GROUP_CLASSES = ["NXentry", "NXcollection", "NXlog", "NXevent_data", "NXmonitor", "NXinstrument",
                 "NXdetector", "NXgeometry", "NXsample", "NXuser", None]
DTYPES = ["u32", "u64", "f32", "f64", "utf8"]


def random_model(rng: np.random.Generator, n_entries: int, payloads: bool = False,
                 group_fraction: float = 0.3) -> FileModel:
    """Random tree with exactly ``n_entries`` records below the root.

    Parents are drawn uniformly from the groups created so far, so records are
    emitted in a valid parent-first order. Group classes include a missing
    NX_class (None). Without ``payloads`` every dataset is empty, which keeps
    very large trees cheap.
    """
    groups = ["/"]
    names: dict[str, set] = defaultdict(set)
    records = [EntryRecord(NxPath("/"), "group")]
    data = {}
    is_group = rng.random(n_entries) < group_fraction
    parents = rng.random(n_entries)
    cls_pick = rng.integers(0, len(GROUP_CLASSES), n_entries)
    dt_pick = rng.integers(0, len(DTYPES), n_entries)
    name_len = rng.integers(1, 9, n_entries)
    chars = rng.integers(0, len(NAME_CHARS), (n_entries, 8))
    for k in range(n_entries):
        par = groups[int(parents[k] * len(groups))]
        name = "".join(NAME_CHARS[c] for c in chars[k, :name_len[k]])
        while name in names[par]:
            name += NAME_CHARS[int(rng.integers(0, len(NAME_CHARS)))]
        names[par].add(name)
        path = NxPath("/" + name if par == "/" else par + "/" + name)
        if is_group[k]:
            nx = GROUP_CLASSES[cls_pick[k]]
            attrs = () if nx is None else (("NX_class", nx),)
            if rng.random() < 0.2:
                attrs += (("units", "us"),)
            records.append(EntryRecord(path, "group", attrs))
            groups.append(path)
        else:
            dt = DTYPES[dt_pick[k]]
            arr = _payload(rng, dt) if payloads else ("" if dt == "utf8" else np.zeros(0, _np(dt)))
            nbytes = len(arr.encode()) if isinstance(arr, str) else arr.nbytes
            count = nbytes if isinstance(arr, str) else arr.size
            records.append(EntryRecord(path, "dataset", (), dt, count, nbytes))
            data[path] = arr
    return FileModel(records, data)


def _np(dt: str) -> np.dtype:
    return np.dtype({"u32": "<u4", "u64": "<u8", "f32": "<f4", "f64": "<f8"}[dt])


def _payload(rng: np.random.Generator, dt: str):
    n = int(rng.integers(0, 12))
    if dt == "utf8":
        return "".join(NAME_CHARS[int(c)] for c in rng.integers(0, len(NAME_CHARS), n))
    if dt in ("u32", "u64"):
        return rng.integers(0, 2**31, n).astype(_np(dt))
    return rng.normal(size=n).astype(_np(dt))


def brute_force_classes(model: FileModel) -> dict[str, set[str]]:
    """Recursive walk over a parent -> children table built from path text."""
    by_path = {r.path: r for r in model.records}
    children = defaultdict(list)
    for r in model.records:
        if r.path != "/":
            children[r.path.rsplit("/", 1)[0] or "/"].append(r.path)
    out: dict[str, set[str]] = defaultdict(set)

    def walk(path: str) -> None:
        for child in children[path]:
            rec = by_path[child]
            if rec.kind == "dataset":
                out["SDS"].add(child)
            else:
                attrs = dict(rec.attributes)
                out[attrs.get("NX_class") or "NXunknown"].add(child)
                walk(child)

    walk("/")
    return dict(out)
