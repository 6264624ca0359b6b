"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent input data (files, boxes, tables, configs)."""


class NumericError(RuntimeError):
    """A numeric routine left its domain of validity (singular solve, failed EVD)."""
