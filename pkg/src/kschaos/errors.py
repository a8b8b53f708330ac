"""Exception hierarchy shared by all kschaos modules."""


class KSError(Exception):
    """Base class for every error raised by kschaos."""


class SingularInputError(KSError, ValueError):
    pass


class InvalidParamsError(KSError, ValueError):
    pass


class NumericalAbort(KSError):
    """Raised when a run has to stop because of a numerical condition."""


class CollisionError(NumericalAbort):
    """Two particles coincide while the exact (unregularized) kernel is in use."""

    def __init__(self, i, j, time):
        self.pair = (int(i), int(j))
        self.time = float(time)
        super().__init__(f"particles {i} and {j} collide at t={time!r}")

    def __reduce__(self):
        return (CollisionError, (*self.pair, self.time))


class CflViolationError(NumericalAbort):
    pass


class DuplicatePointsError(KSError, ValueError):
    pass


class SizeCapError(KSError, ValueError):
    pass


class MassMismatchError(KSError, ValueError):
    pass


class FileFormatError(KSError, ValueError):
    pass


class OutOfDomainError(KSError):
    pass


class ConfigError(KSError, ValueError):
    """Configuration problem; ``pointer`` is a JSON pointer to the offending field."""

    def __init__(self, message, pointer=""):
        self.pointer = pointer
        self.detail = message
        super().__init__(f"{pointer or '/'}: {message}")

    def __reduce__(self):
        return (ConfigError, (self.detail, self.pointer))

