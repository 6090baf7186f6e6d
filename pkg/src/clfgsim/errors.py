"""Common root for simulator-domain exceptions."""


class SimulationError(Exception):
    """Base class for all errors raised by the simulator modules."""
