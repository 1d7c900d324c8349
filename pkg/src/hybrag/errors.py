"""Exception hierarchy shared by every hybrag module."""


class HybragError(Exception):
    """Base class for all errors raised by hybrag."""


class ParseError(HybragError):
    """Malformed input file or record."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class IntegrityError(HybragError):
    """Input parsed fine but violates a data invariant (duplicate id, bad grade, wrong dim)."""


class InputError(HybragError):
    """Caller supplied an argument outside an operation's precondition."""


class TransportError(HybragError):
    """Remote backend unreachable or failing after all retries."""


class EmptyAnswerError(HybragError):
    """Backend responded but produced no usable text."""


class UnparsableAnswerError(HybragError):
    """Generated text contains no recognizable answer label."""


class ConfigError(HybragError):
    """Invalid run configuration or missing referenced path."""
