"""Shared exception types."""


class DataError(Exception):
    """Raised when an input file is missing a field, malformed, or violates
    its declared format (bad magic bytes, truncated payload, schema errors).

    Distinct from ValueError so callers can separate bad *data* from bad
    *arguments*: the command-line tool exits 2 on DataError and 1 on usage
    problems.
    """
