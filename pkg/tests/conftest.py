import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nxindex.store import ModelBuilder  # noqa: E402

# (criterion number, description, passed, detail) filled by test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {desc} :: {detail}")


def _example_builder(bank_numbers=(1, 91), with_monitor=False) -> ModelBuilder:
    mb = ModelBuilder()
    mb.group("/entry", "NXentry")
    mb.group("/entry/DASlogs", "NXcollection")
    log = "/entry/DASlogs/BL6:CS:DataType"
    mb.group(log, "NXlog")
    mb.dataset(log + "/average_value", np.array([5.5]))
    mb.dataset(log + "/average_value_error", np.array([0.5]))
    mb.dataset(log + "/time", np.array([0.0, 1.0]))
    mb.dataset(log + "/value", np.array([5.0, 6.0]))
    if with_monitor:
        mb.group("/entry/monitor1", "NXmonitor")
        mb.dataset("/entry/monitor1/data", np.array([1, 2, 3], dtype=np.uint64))
    mb.group("/entry/instrument", "NXinstrument")
    for k, b in enumerate(bank_numbers):
        g = f"/entry/instrument/bank{b}"
        mb.group(g, "NXdetector")
        mb.dataset(g + "/pixel_count", np.array([8], np.uint32))
        mb.dataset(g + "/pixel_id_offset", np.array([8 * k], np.uint32))
    for k, b in enumerate(bank_numbers):
        g = f"/entry/bank{b}_events"
        mb.group(g, "NXevent_data")
        mb.dataset(g + "/event_id", np.array([8 * k + 7, 8 * k + 3, 8 * k + 7], np.uint32))
        mb.dataset(g + "/event_index", np.array([0, 2], np.uint64))
        mb.dataset(g + "/event_time_offset", np.array([100.0, 250.5, 60.0], np.float32))
        mb.dataset(g + "/event_time_zero", np.array([0.0, 0.0167]))
        mb.dataset(g + "/event_total_counts", np.array([3], np.uint64))
    return mb


@pytest.fixture
def example_model():
    """The example hierarchy: one DAS log, banks 1 and 91 with detectors."""
    return _example_builder().model


@pytest.fixture
def example_builder():
    return _example_builder


@pytest.fixture
def rng():
    return np.random.default_rng(20201)
