"""Exception hierarchy shared across the engine.

The CLI maps these onto exit codes: configuration errors exit 2,
simulation/runtime errors exit 3, worker-protocol errors exit 4.
"""


class SbiceError(Exception):
    """Base class for all engine errors."""


class ConfigurationError(SbiceError):
    """Invalid parameter, schema or config-file content."""


class SimulationError(SbiceError):
    """A simulator or the SMC loop failed at runtime."""


class WorkerProtocolError(SbiceError):
    """The external-simulator subprocess violated the line protocol."""
