"""Exception hierarchy. Every error raised by the package derives from TwoTierError."""


class TwoTierError(Exception):
    pass


class OutOfRange(TwoTierError, ValueError):
    pass


class EmptyInput(TwoTierError, ValueError):
    pass


class LengthMismatch(TwoTierError, ValueError):
    pass


class BadShape(TwoTierError, ValueError):
    pass


class DimMismatch(TwoTierError, ValueError):
    pass


class BadConfig(TwoTierError, ValueError):
    pass


class MissingPrediction(TwoTierError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing prediction"


class DegenerateClasses(TwoTierError, ValueError):
    pass


class IncompleteGrid(TwoTierError, ValueError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("incomplete grid, missing cells: " + ", ".join(map(str, self.missing)))


class RecordError(TwoTierError, ValueError):
    """Base for prediction-record load failures; ``row`` is 1-based (header is row 1)."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ParseError(RecordError):
    pass


class DuplicateKey(RecordError):
    pass


class ScoreOutOfRange(RecordError):
    pass


class NonRectangular(RecordError):
    pass


class BadSpec(TwoTierError, ValueError):
    pass


class BadRatios(TwoTierError, ValueError):
    pass


class EmptyData(TwoTierError, ValueError):
    pass


class MissingArtifacts(TwoTierError, FileNotFoundError):
    pass
