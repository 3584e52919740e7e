"""Exception types shared across the toolkit.

The CLI maps every :class:`NbestfixError` to a nonzero exit status; anything
else escaping a command is a bug.
"""

from __future__ import annotations


class NbestfixError(Exception):
    """Base class for all toolkit errors."""


class DumpFormatError(NbestfixError):
    """A dump file line failed to parse or violated the record schema."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"field {field!r}: "
        super().__init__(prefix + message)


class MissingReferenceError(NbestfixError):
    """An evaluation operation hit a record without a reference."""

    def __init__(self, utt_id: str):
        self.utt_id = utt_id
        super().__init__(f"record {utt_id!r} has no reference transcript")


class ScorerProtocolError(NbestfixError):
    """A plugin response violated the wire protocol."""


class ScorerTransportError(NbestfixError):
    """The plugin process died or its pipes broke."""


class ScorerTimeoutError(NbestfixError):
    """The plugin failed to answer a request in time."""

    def __init__(self, utt_id: str, timeout: float):
        self.utt_id = utt_id
        self.timeout = timeout
        super().__init__(f"no response for utt_id {utt_id!r} within {timeout:g}s")


class StageError(NbestfixError):
    """A pipeline sub-step failed; carries the stage name."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")
