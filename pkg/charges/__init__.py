# charges: exact finite computations with finitely additive measure structures.

from .errors import ChargeError

__all__ = ["ChargeError"]
__version__ = "0.1.0"
