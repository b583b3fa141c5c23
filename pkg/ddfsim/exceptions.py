##
# Exceptions raised by the DDF simulation package
##


class DDFError(Exception):
    """Root of every error raised by ddfsim."""


class ValidationError(DDFError, ValueError):
    """
    Raised when a configuration does not validate.
    Keeps every message found during validation, not only the first one.
    """

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__('; '.join(self.messages))


class ContractViolation(DDFError, ValueError):
    """A signal block breaks a precondition (length, half-duplex, parity)."""


class CodebookError(DDFError, ValueError):
    """Bad codebook construction or a point outside the information set."""


class RankDeficientError(DDFError, ValueError):
    """A lattice basis or filter matrix is not full rank."""


class SearchFailure(DDFError):
    """The lattice search exceeded its node budget before finishing."""

    def __init__(self, visited, limit, message=None):
        self.visited = visited
        self.limit = limit
        super().__init__(message or 'lattice search visited %d nodes (limit %d)' % (visited, limit))


class StorageError(DDFError):
    """Output directory cannot be created or written."""
