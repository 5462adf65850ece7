"""Exception hierarchy.

Every error raised by the library derives from :class:`NxError`. The two
intermediate classes decide the CLI exit status: :class:`DataError` maps to
2 and :class:`IoFailure` maps to 3.
"""


class NxError(Exception):
    pass


class DataError(NxError):
    """Input content is invalid (bad path text, corrupt file, bad payload...)."""


class IoFailure(NxError, OSError):
    """The operating system refused a read or write."""


# schema
class MalformedPath(DataError, ValueError):
    pass


class RootHasNoParent(DataError, ValueError):
    pass


# store
class InvalidModel(DataError):
    pass


class BadMagic(DataError):
    pass


class TruncatedRecord(DataError):
    pass


class DuplicatePath(DataError):
    pass


class OrphanRecord(DataError):
    pass


class NoSuchPath(DataError, LookupError):
    pass


class NotAGroup(DataError):
    pass


class NotADataset(DataError):
    pass


class NoSuchAttribute(DataError, LookupError):
    pass


class CorruptPayload(DataError):
    pass


# loader
class MissingEntryGroup(DataError):
    pass


class MalformedLog(DataError):
    pass


class MalformedMonitor(DataError):
    pass


class OverlappingPixelRanges(DataError):
    pass


class MalformedBank(DataError):
    pass


class MissingDataset(DataError):
    pass


# synth
class UnknownProfile(DataError):
    pass


class InvalidScale(DataError, ValueError):
    pass


# bench
class NonPositiveBaseline(DataError, ValueError):
    pass
