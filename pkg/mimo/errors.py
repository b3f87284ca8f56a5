class MimoError(ValueError):
    """Base class for every error raised by the simulator."""


class GeometryError(MimoError):
    pass


class ChannelError(MimoError):
    pass


class PathLossError(MimoError):
    pass


class TransceiverError(MimoError):
    pass


class LinkError(MimoError):
    pass


class NetworkError(MimoError):
    pass


class NumericError(MimoError):
    """A covariance needed by a metric or strategy is singular."""


class ConfigError(MimoError):
    """A scenario file or request body could not be turned into a network."""


class SimulationError(MimoError):
    """A Monte-Carlo run failed; the message carries the sweep/trial context."""
