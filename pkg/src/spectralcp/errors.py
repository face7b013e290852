"""Exception types shared across the package.

Three broad families map onto the CLI exit codes: configuration problems
(exit 2), data problems (exit 3), and numeric failures (exit 4). Everything
else raises plain ValueError.
"""


class ConfigError(ValueError):
    """Invalid configuration (bad parameter ranges, malformed config files)."""


class DataError(ValueError):
    """Invalid data content (files that parse but violate the data contract)."""


class ParseError(DataError):
    """A cell of an input file could not be parsed.

    Carries the 1-based line number and 0-based column of the offending cell.
    """

    def __init__(self, line, column, message):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class NumericError(RuntimeError):
    """A numeric procedure failed (non-convergence, non-finite loss)."""
