"""Exception hierarchy shared by all sketchreg modules."""


class SketchRegError(Exception):
    """Base class for every error raised by sketchreg."""


class ParseError(SketchRegError, ValueError):
    """Malformed input file. ``row`` and ``col`` are 1-based when known."""

    def __init__(self, message, row=None, col=None):
        self.row = row
        self.col = col
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {col})" if col is not None else ")")
        super().__init__(message + loc)


class EmptyInput(SketchRegError, ValueError):
    pass


class InvalidParameter(SketchRegError, ValueError):
    pass


class DimError(SketchRegError, ValueError):
    pass


class NumericalError(SketchRegError, ArithmeticError):
    pass


class SingularError(NumericalError):
    pass


class RankError(SketchRegError, ValueError):
    pass


class NumericalWarning(UserWarning):
    pass
