"""Exception types raised across the package."""


class TwLearnError(Exception):
    """Base class for all errors raised by twlearn."""


class InstanceTooLarge(TwLearnError, ValueError):
    pass


class ParseError(TwLearnError, ValueError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ConstantColumnError(TwLearnError, ValueError):
    pass


class FormatError(TwLearnError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BoundsError(TwLearnError, ValueError):
    pass


class MalformedCode(TwLearnError, ValueError):
    pass


class NotAKTree(TwLearnError, ValueError):
    pass


class TreewidthTooLarge(TwLearnError, ValueError):
    pass


class TreewidthExceeded(TwLearnError, ValueError):
    pass


class MissingVariable(TwLearnError, KeyError):
    pass


class InfeasibleInput(TwLearnError, ValueError):
    pass
