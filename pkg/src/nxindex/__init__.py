"""Two-level metadata index for NeXus-style event files, with a legacy/indexed
loader, a synthetic file generator and a benchmark harness."""
from .errors import NxError, DataError, IoFailure
from .schema import NxPath, EntryRecord, parse_path, parent, classify_entry
from .store import (
    CallCounters, FileModel, ModelBuilder, StoreHandle, open_store, read_model, write_store,
)
from .index import MetadataIndex, build_index
from .loader import EventWorkspace, load_event_nexus
from .synth import InstrumentProfile, generate, instrument_profile
from .bench import BenchConfig, BenchReport, relative_speedup, run_benchmark

__version__ = "0.1.0"

__all__ = [
    "NxError", "DataError", "IoFailure",
    "NxPath", "EntryRecord", "parse_path", "parent", "classify_entry",
    "CallCounters", "FileModel", "ModelBuilder", "StoreHandle", "open_store", "read_model", "write_store",
    "MetadataIndex", "build_index",
    "EventWorkspace", "load_event_nexus",
    "InstrumentProfile", "generate", "instrument_profile",
    "BenchConfig", "BenchReport", "relative_speedup", "run_benchmark",
]
