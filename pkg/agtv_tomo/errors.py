"""Exceptions for agtv-tomo"""


class ConfigError(ValueError):
    """Invalid run, sweep or solver configuration."""


class NumericalError(RuntimeError):
    """An iterate or estimate became non-finite."""
