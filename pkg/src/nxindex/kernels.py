"""Per-event array kernels used when building an EventWorkspace.

Each kernel has a numba implementation (``*_jit``) and a vectorised numpy
implementation (``*_np``). The public names dispatch to the numba versions
unless numba is missing or ``NXINDEX_DISABLE_NUMBA`` is set to a non-empty
value other than ``0``. Both paths must return bit-identical results; the
test suite runs them side by side.
"""
from __future__ import annotations

import functools
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_flag = os.environ.get("NXINDEX_DISABLE_NUMBA", "").strip()
USE_NUMBA = numba is not None and _flag in ("", "0")
BACKEND = "numba" if USE_NUMBA else "numpy"

if numba is not None:
    jit = functools.partial(numba.njit, cache=True, nogil=True)
else:  # pragma: no cover
    def jit(fn):
        return fn


# -- pulse assignment ------------------------------------------------------

def assign_pulses_np(event_index: np.ndarray, total: int) -> np.ndarray:
    n_pulses = event_index.shape[0]
    if n_pulses == 0:
        return np.zeros(0, dtype=np.uint64)
    bounds = np.empty(n_pulses + 1, dtype=np.int64)
    bounds[:-1] = event_index
    bounds[-1] = total
    return np.repeat(np.arange(n_pulses, dtype=np.uint64), np.diff(bounds))


@jit
def _assign_pulses_kernel(event_index, total, out):
    n_pulses = event_index.shape[0]
    for p in range(n_pulses):
        start = event_index[p]
        stop = event_index[p + 1] if p + 1 < n_pulses else total
        for e in range(start, stop):
            out[e] = p


def assign_pulses_jit(event_index: np.ndarray, total: int) -> np.ndarray:
    out = np.zeros(total, dtype=np.uint64)
    if event_index.shape[0]:
        _assign_pulses_kernel(event_index.astype(np.int64), np.int64(total), out)
    return out


# -- event_index validation ------------------------------------------------

def event_index_ok_np(event_index: np.ndarray, total: int) -> bool:
    if event_index.shape[0] == 0:
        return total == 0
    return bool(event_index[0] == 0
                and np.all(event_index[1:] >= event_index[:-1])
                and event_index[-1] <= total)


@jit
def _event_index_ok_kernel(event_index, total):
    n = event_index.shape[0]
    if n == 0:
        return total == 0
    if event_index[0] != 0:
        return False
    for i in range(1, n):
        if event_index[i] < event_index[i - 1]:
            return False
    return event_index[n - 1] <= total


def event_index_ok_jit(event_index: np.ndarray, total: int) -> bool:
    return bool(_event_index_ok_kernel(event_index, np.uint64(total)))


# -- per-pixel binning -----------------------------------------------------

def bin_by_pixel_np(pixel_ids, tof, pulse, lo: int, n_pixels: int):
    """Stable grouping of events by pixel id in ``[lo, lo + n_pixels)``.

    Returns ``(counts, tof_sorted, pulse_sorted)``; events of one pixel keep
    their original relative order.
    """
    local = pixel_ids.astype(np.int64) - lo
    order = np.argsort(local, kind="stable")
    counts = np.bincount(local, minlength=n_pixels).astype(np.int64)
    return counts, tof[order], pulse[order]


@jit
def _bin_by_pixel_kernel(pixel_ids, tof, pulse, lo, counts, tof_out, pulse_out):
    n = pixel_ids.shape[0]
    for i in range(n):
        counts[np.int64(pixel_ids[i]) - lo] += 1
    m = counts.shape[0]
    cursor = np.empty(m, dtype=np.int64)
    acc = 0
    for k in range(m):
        cursor[k] = acc
        acc += counts[k]
    for i in range(n):
        k = np.int64(pixel_ids[i]) - lo
        j = cursor[k]
        tof_out[j] = tof[i]
        pulse_out[j] = pulse[i]
        cursor[k] = j + 1


def bin_by_pixel_jit(pixel_ids, tof, pulse, lo: int, n_pixels: int):
    counts = np.zeros(n_pixels, dtype=np.int64)
    tof_out = np.empty_like(tof)
    pulse_out = np.empty_like(pulse)
    _bin_by_pixel_kernel(pixel_ids, tof, pulse, np.int64(lo), counts, tof_out, pulse_out)
    return counts, tof_out, pulse_out


if USE_NUMBA:
    assign_pulses = assign_pulses_jit
    event_index_ok = event_index_ok_jit
    bin_by_pixel = bin_by_pixel_jit
else:
    assign_pulses = assign_pulses_np
    event_index_ok = event_index_ok_np
    bin_by_pixel = bin_by_pixel_np
