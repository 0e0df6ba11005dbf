"""Exception taxonomy shared across the package.

Errors raised on bad caller input derive from :class:`InputError`; the CLI
maps those to exit code 1 and everything else to exit code 2.
"""


class TriageError(Exception):
    """Base class for all errors raised by this package."""


class InputError(TriageError):
    """Invalid data supplied by a caller, file, or request body."""


# --- numerical core ---------------------------------------------------------

class NonFiniteInput(InputError):
    """A matrix or vector contains NaN or infinity."""


class EmptyBlock(InputError):
    """A data block has no rows or no columns."""


class DimensionMismatch(InputError):
    """Operand shapes are incompatible."""


class NoConvergence(TriageError):
    """The iterative fit failed to converge; the data is degenerate."""


class SingularReconstruction(TriageError):
    """Coefficient reconstruction hit a numerically singular system."""


# --- event store ------------------------------------------------------------

class NonConsecutiveTick(InputError):
    """A tick record does not directly follow the stored history."""


class DuplicateInstanceInTick(InputError):
    """The same instance id appears twice in one tick."""


class InstanceContinuityError(InputError):
    """An unresolved instance skipped a tick, or an id was reused."""


class MissingRecord(InputError):
    """A priority or prediction was requested that was never stored."""


class PreconditionViolated(InputError):
    """A query was made outside its documented domain."""


# --- engine and services ----------------------------------------------------

class SchemaMismatch(InputError):
    """Event factors do not line up with the violation type's schema."""


class UnknownType(InputError):
    """No violation type registered under the given id."""


class InvalidSpec(InputError):
    """A stream specification fails validation."""


class ParseError(InputError):
    """A config, stream, or history file could not be parsed."""


class CorruptCheckpoint(InputError):
    """Checkpoint digest verification failed."""


class BusyError(TriageError):
    """A tick ingestion is already in progress."""


class InternalInvariantError(TriageError):
    """An internal consistency check failed; indicates a bug."""
