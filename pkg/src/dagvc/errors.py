"""Exception hierarchy shared across the package."""


class DagVcError(Exception):
    """Base class for all package errors."""


class ConfigError(DagVcError):
    pass


class ParseError(DagVcError):
    """Malformed input file. ``where`` names the line or field at fault."""

    def __init__(self, message, where=None):
        self.where = where
        if where is not None:
            message = f"{where}: {message}"
        super().__init__(message)


class InvariantViolation(DagVcError):
    pass


class _IdsError(InvariantViolation):
    def __init__(self, ids, message=None):
        self.ids = tuple(ids)
        super().__init__(message or f"{type(self).__name__}: {', '.join(map(str, self.ids))}")


class CycleDetected(_IdsError):
    pass


class MultipleEntries(_IdsError):
    pass


class MultipleExits(_IdsError):
    pass


class DisconnectedSubtask(_IdsError):
    pass


class InfeasibleLayering(DagVcError):
    pass


class TimeOutOfHorizon(DagVcError):
    pass


class VehicleAbsent(DagVcError):
    pass


class NotLinked(DagVcError):
    pass


class LinkOutOfRange(DagVcError):
    pass


class NonPositiveResult(DagVcError):
    pass


class DistanceBelowModelRange(DagVcError):
    pass


class EmptyCandidateSet(DagVcError):
    pass


class PredecessorUnassigned(DagVcError):
    pass


class AlreadyAssigned(DagVcError):
    pass


class InfeasibleVehicle(DagVcError):
    pass


class InstanceTooLarge(DagVcError):
    pass


class EmptyInput(DagVcError):
    pass
