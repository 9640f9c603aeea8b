"""Exception hierarchy shared by all emxkit modules.

Every error that carries a counterexample keeps it on ``.witness`` so the CLI
can serialize it.
"""


class EmxkitError(Exception):
    """Base class for all library errors."""

    code = "error"

    def __init__(self, message: str = "", witness=None):
        super().__init__(message or self.__class__.__name__)
        self.witness = witness

    def to_dict(self) -> dict:
        out = {"error": self.__class__.__name__, "message": str(self)}
        if self.witness is not None:
            out["witness"] = _jsonable(self.witness)
        return out


def _jsonable(obj):
    if isinstance(obj, (tuple, list)):
        return [_jsonable(o) for o in obj]
    if isinstance(obj, (int, float, str, bool)) or obj is None:
        return obj
    return str(obj)


# ground
class DuplicateElement(EmxkitError):
    pass


class NotReduced(EmxkitError):
    pass


class KTooLarge(EmxkitError):
    pass


class OutOfGround(EmxkitError):
    pass


# schemes
class NotMonotone(EmxkitError):
    pass


class CoverFailure(EmxkitError):
    pass


class GroundExhausted(EmxkitError):
    pass


class DeltaNotSelected(EmxkitError):
    pass


class NotInDomain(EmxkitError):
    pass


# kuratowski
class NotPartition(EmxkitError):
    pass


class ChooserMissing(EmxkitError):
    pass


# emx
class EmptySample(EmxkitError):
    pass


class BudgetExceeded(EmxkitError):
    pass


class NoCompressingSubset(EmxkitError):
    pass


class InvalidDistribution(EmxkitError):
    pass


# fiberprobe
class DegenerateGap(EmxkitError):
    pass


class NotSubtuple(EmxkitError):
    pass


class AmbiguousDrop(EmxkitError):
    pass


class ImageDrift(EmxkitError):
    pass
