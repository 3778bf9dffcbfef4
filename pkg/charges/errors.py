# charges/errors.py
# Exception hierarchy shared by every module of the package. The batch runner
# turns any ChargeError into an "error" verdict instead of aborting.

from fractions import Fraction
from typing import Optional, Union


class ChargeError(Exception):
    "Base class for every domain error raised by the package."
    pass


class GroundSetMismatchError(ChargeError):
    "Raised when two objects that must share a ground set do not."
    pass


class RingError(ChargeError):
    "Raised when a family of subsets is not closed under union and difference."
    pass


class AdditivityError(ChargeError):
    "Raised when a set function is negative, nonzero on the empty set or not modular."
    pass


class NotMeasurableError(ChargeError):
    "Raised when a level set of a random quantity is not carried by the structure."
    pass


class NotIntegrableError(ChargeError):
    """Raised when the lower and upper layer integrals of a random quantity differ.

    The two integrals are kept on the exception so callers can report them.
    """

    def __init__(self, message: str, lower: Optional[Fraction] = None,
                 upper: Optional[Union[Fraction, float]] = None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class NonConvexError(ChargeError):
    "Raised when slopes or second differences decrease somewhere."
    pass


class NoMinimizerError(ChargeError):
    "Raised when a convex function has no minimizer on its represented range."
    pass


class BracketError(ChargeError):
    "Raised when a threshold grid does not bracket every breakpoint."
    pass


class KernelError(ChargeError):
    "Raised when a kernel section is not additive or a parameter map is not injective."
    pass


class SchemaError(ChargeError):
    """Raised for malformed instance files.

    Args:
        location: JSON path of the offending value, e.g. ``$.payload.T[1][0]``.
        message: What is wrong at that location.
    """

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.message = message
