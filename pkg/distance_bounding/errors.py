class DistanceBoundingError(ValueError):
    """Base class of every domain error raised by the simulator."""


class ParamsError(DistanceBoundingError):
    pass


class TreeError(DistanceBoundingError):
    pass


class ProtocolStateError(DistanceBoundingError):
    pass


class ChannelError(DistanceBoundingError):
    """The claimant produced no reply within the round (lost or refused)."""


class AdversaryError(DistanceBoundingError):
    pass


class ExperimentError(DistanceBoundingError):
    pass


class EnumerationError(DistanceBoundingError):
    pass
