"""Exception hierarchy shared by all modewarp modules."""


class ModewarpError(Exception):
    """Base class for every error raised by this package."""


class InvariantError(ModewarpError, ValueError):
    """A domain object would violate one of its invariants."""


class CSVParseError(ModewarpError, ValueError):
    """A CSV row could not be parsed."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class DuplicateDepth(InvariantError):
    """Two profile samples share the same depth."""

    def __init__(self, row: int, depth: float):
        self.row = row
        self.depth = depth
        super().__init__(f"row {row}: duplicate depth {depth:g} m")


class RangeOutsideTransect(ModewarpError, ValueError):
    pass


class GridTooCoarse(ModewarpError, ValueError):
    pass


class SynthesisError(ModewarpError, ValueError):
    pass


class WarpError(ModewarpError, ValueError):
    pass


class SeparationError(ModewarpError, ValueError):
    pass


class RangingError(ModewarpError, ValueError):
    pass
