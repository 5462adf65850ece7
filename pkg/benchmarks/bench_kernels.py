"""Event kernels: numba vs pure numpy.

Times both implementations of each kernel on the same synthetic bank and
checks the outputs agree bit for bit. Both backends are imported directly,
so NXINDEX_DISABLE_NUMBA does not matter here.

    python3 benchmarks/bench_kernels.py [--events N] [--repeat R]
"""
import argparse
import statistics
import time

import numpy as np

from nxindex import kernels

PAIRS = {
    "assign_pulses": (kernels.assign_pulses_np, kernels.assign_pulses_jit),
    "event_index_ok": (kernels.event_index_ok_np, kernels.event_index_ok_jit),
    "bin_by_pixel": (kernels.bin_by_pixel_np, kernels.bin_by_pixel_jit),
}


def make_bank(n_events: int, n_pixels: int = 1024, pulses: int = 1200, seed: int = 0):
    rng = np.random.default_rng(seed)
    lo = 4096
    ids = rng.integers(lo, lo + n_pixels, n_events).astype(np.uint32)
    tof = np.mod(rng.exponential(4000.0, n_events), 16667.0).astype(np.float32)
    index = np.searchsorted(np.sort(rng.integers(0, pulses, n_events)), np.arange(pulses)).astype(np.uint64)
    return ids, tof, index, lo, n_pixels


def timed(fn, args, repeat: int) -> float:
    fn(*args)  # compile / warm caches
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts) * 1000.0


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.dtype == b.dtype and a.tobytes() == b.tobytes()
    return bool(a) == bool(b)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, nargs="+", default=[10_000, 100_000, 1_000_000, 5_000_000])
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()

    print(f"{'kernel':<16}{'events':>10}{'numpy ms':>12}{'numba ms':>12}{'ratio':>8}  match")
    for n in args.events:
        ids, tof, index, lo, n_pix = make_bank(n)
        pulse = kernels.assign_pulses_np(index, n)
        inputs = {
            "assign_pulses": (index, n),
            "event_index_ok": (index, n),
            "bin_by_pixel": (ids, tof, pulse, lo, n_pix),
        }
        for name, (np_fn, jit_fn) in PAIRS.items():
            a = inputs[name]
            t_np = timed(np_fn, a, args.repeat)
            t_jit = timed(jit_fn, a, args.repeat)
            ok = same(np_fn(*a), jit_fn(*a))
            print(f"{name:<16}{n:>10}{t_np:>12.3f}{t_jit:>12.3f}{t_np / t_jit:>8.2f}  {'yes' if ok else 'NO'}")


if __name__ == "__main__":
    main()
