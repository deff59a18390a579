"""Exception hierarchy shared by every bsurf module.

The command line maps the three categories below to exit codes:
`SchemaError` to 2, `PreconditionError` to 3 and `TheoremViolation` to 4.
"""

from typing import Any


class BsurfError(Exception):
    pass


class SchemaError(BsurfError):
    pass


class PreconditionError(BsurfError, ValueError):
    pass


class CapExceededError(PreconditionError):
    """Raised when an enumeration grows past its configured cap"""

    def __init__(self, message: str, partial_count: int | None = None):
        """
        Args:
            message (str): Human readable description
            partial_count (int | None, optional): Elements seen before stopping. Defaults to None.
        """
        super().__init__(message)
        self.partial_count = partial_count


class TheoremViolation(BsurfError):
    """A computed certificate contradicts a structural result it was meant to confirm"""

    def __init__(self, message: str, data: dict[str, Any] | None = None):
        """
        Args:
            message (str): Human readable description
            data (dict[str, Any] | None, optional): Full data dump of the failing instance. Defaults to None.
        """
        super().__init__(message)
        self.data = data or {}
