"""Seeded synthetic instrument files.

Each built-in profile pins the number of detector banks and monitors; the
number of log groups is solved so the file has exactly the target number of
entries (groups plus datasets below the root):

    entries = 3 fixed groups + k entry-level datasets
              + 5 per log + 2 per monitor + 9 per bank

with ``k`` in 1..5 taking up the remainder. Payload sizes scale with
``event_scale``; the entry count does not.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InvalidScale, UnknownProfile
from .schema import (
    NXCOLLECTION, NXDETECTOR, NXENTRY, NXEVENT_DATA, NXINSTRUMENT, NXLOG,
    NXMONITOR, SDS,
)
from .store import FileModel, ModelBuilder

SizeClass = Literal["small", "medium", "large"]

TOF_MAX_US = 16667.0
PULSE_PERIOD_S = 1.0 / 60.0
ENTRY_DATASETS = ("duration", "proton_charge", "run_number", "start_time", "total_counts")
NAMED_LOGS = ("CS:DataType", "CS:beamslit4", "Chop:Skf1:MotorSpeed",
              "Chop:Skf1:PhaseLocked", "Chop:Skf2:PhaseLocked")
DEFAULT_SCALE = 0.01


@dataclass(frozen=True)
class InstrumentProfile:
    name: str
    beamline: str
    n_banks: int
    n_logs: int
    n_monitors: int
    pulses: int
    mean_events_per_bank: int
    target_entries: int
    size_class: SizeClass
    pixels_per_bank: int = 1024

    @property
    def n_entry_datasets(self) -> int:
        return self.target_entries - self.fixed_entries - 5 * self.n_logs

    @property
    def fixed_entries(self) -> int:
        return 3 + 2 * self.n_monitors + 9 * self.n_banks

    def census(self) -> dict[str, int]:
        """Expected index bucket sizes for a generated file."""
        out = {
            NXENTRY: 1, NXCOLLECTION: 1, NXINSTRUMENT: 1,
            NXLOG: self.n_logs, NXDETECTOR: self.n_banks, NXEVENT_DATA: self.n_banks,
            SDS: self.n_entry_datasets + 4 * self.n_logs + self.n_monitors + 7 * self.n_banks,
        }
        if self.n_monitors:
            out[NXMONITOR] = self.n_monitors
        return out


def _solve_logs(target: int, n_banks: int, n_monitors: int) -> int:
    rest = target - 3 - 2 * n_monitors - 9 * n_banks
    if rest < 6:
        raise ValueError(f"target {target} too small for {n_banks} banks")
    return (rest - 1) // 5


# name: (beamline, banks, monitors, pulses, mean events/bank, entries, size class)
_PROFILE_TABLE = {
    "gpsans": ("CG2", 48, 1, 600, 200_000, 3683, "small"),
    "biosans": ("CG3", 88, 2, 600, 500_000, 3203, "small"),
    "eqsans": ("BL6", 48, 1, 1200, 10_000_000, 2529, "large"),
    "corelli": ("BL9", 91, 2, 1200, 2_000_000, 2660, "medium"),
    "nom": ("BL1B", 99, 0, 1200, 5_000_000, 1572, "large"),
}
PROFILE_NAMES: tuple[str, ...] = tuple(_PROFILE_TABLE)


def instrument_profile(name: str) -> InstrumentProfile:
    try:
        beamline, banks, monitors, pulses, events, target, size = _PROFILE_TABLE[name]
    except KeyError:
        raise UnknownProfile(f"unknown profile {name!r}; choose from {', '.join(PROFILE_NAMES)}") from None
    return InstrumentProfile(name, beamline, banks, _solve_logs(target, banks, monitors), monitors,
                             pulses, events, target, size)


def log_names(profile: InstrumentProfile) -> list[str]:
    names = [f"{profile.beamline}:{n}" for n in NAMED_LOGS[:profile.n_logs]]
    names += [f"{profile.beamline}:SE:Var{i:04d}" for i in range(profile.n_logs - len(names))]
    return names


def generate(profile: InstrumentProfile, seed: int, event_scale: float = DEFAULT_SCALE) -> FileModel:
    if not (0.0 < event_scale <= 1.0):
        raise InvalidScale(f"event_scale must be in (0, 1], got {event_scale}")
    rng = np.random.default_rng(seed)
    pix = profile.pixels_per_bank

    banks = []
    mean = profile.mean_events_per_bank * event_scale
    for b in range(profile.n_banks):
        n = int(rng.poisson(mean))
        lo = b * pix
        ids = rng.integers(lo, lo + pix, size=n, dtype=np.uint32)
        tof = np.mod(rng.exponential(4000.0, size=n), TOF_MAX_US).astype(np.float32)
        pulse_of_event = np.sort(rng.integers(0, profile.pulses, size=n))
        index = np.searchsorted(pulse_of_event, np.arange(profile.pulses)).astype(np.uint64)
        banks.append((b + 1, lo, ids, tof, index, n))

    logs = []
    for name in log_names(profile):
        n = int(rng.integers(1, 21))
        times = np.concatenate(([0.0], np.cumsum(rng.uniform(0.1, 10.0, size=n - 1))))
        values = rng.normal(0.0, 1.0, size=n)
        logs.append((name, times, values, float(values.mean()), float(values.std())))

    monitors = [rng.poisson(50.0, size=100).astype(np.uint64) for _ in range(profile.n_monitors)]

    mb = ModelBuilder()
    mb.group("/entry", NXENTRY)
    total = sum(b[5] for b in banks)
    entry_values = {
        "duration": np.array([profile.pulses * PULSE_PERIOD_S]),
        "proton_charge": np.array([rng.uniform(1e3, 1e4)]),
        "run_number": str(seed),
        "start_time": "2020-06-01T00:00:00",
        "total_counts": np.array([total], dtype=np.uint64),
    }
    for name in ENTRY_DATASETS[:profile.n_entry_datasets]:
        mb.dataset(f"/entry/{name}", entry_values[name])

    mb.group("/entry/DASlogs", NXCOLLECTION)
    for name, times, values, avg, err in logs:
        g = f"/entry/DASlogs/{name}"
        mb.group(g, NXLOG)
        mb.dataset(g + "/average_value", np.array([avg]))
        mb.dataset(g + "/average_value_error", np.array([err]))
        mb.dataset(g + "/time", times)
        mb.dataset(g + "/value", values)

    for i, counts in enumerate(monitors, start=1):
        mb.group(f"/entry/monitor{i}", NXMONITOR)
        mb.dataset(f"/entry/monitor{i}/data", counts)

    mb.group("/entry/instrument", NXINSTRUMENT)
    for num, lo, *_ in banks:
        g = f"/entry/instrument/bank{num}"
        mb.group(g, NXDETECTOR)
        mb.dataset(g + "/pixel_count", np.array([pix], dtype=np.uint32))
        mb.dataset(g + "/pixel_id_offset", np.array([lo], dtype=np.uint32))

    for num, lo, ids, tof, index, n in banks:
        g = f"/entry/bank{num}_events"
        mb.group(g, NXEVENT_DATA)
        mb.dataset(g + "/event_id", ids, "u32")
        mb.dataset(g + "/event_index", index, "u64")
        mb.dataset(g + "/event_time_offset", tof, "f32")
        mb.dataset(g + "/event_time_zero", np.arange(profile.pulses) * PULSE_PERIOD_S, "f64")
        mb.dataset(g + "/event_total_counts", np.array([n], dtype=np.uint64))
    return mb.model


def provenance(profile: InstrumentProfile, seed: int, event_scale: float, model: FileModel) -> str:
    lines = [
        f"profile: {profile.name}",
        f"seed: {seed}",
        f"event_scale: {event_scale}",
        f"size_class: {profile.size_class}",
        f"n_banks: {profile.n_banks}",
        f"n_logs: {profile.n_logs}",
        f"n_monitors: {profile.n_monitors}",
        f"n_entry_datasets: {profile.n_entry_datasets}",
        f"pixels_per_bank: {profile.pixels_per_bank}",
        f"pulses: {profile.pulses}",
        f"target_entries: {profile.target_entries}",
        f"total_entries: {model.n_entries}",
        f"total_groups: {model.n_groups}",
        f"total_events: {sum(int(v.size) for k, v in model.payloads.items() if k.endswith('/event_id'))}",
    ]
    return "\n".join(lines) + "\n"
