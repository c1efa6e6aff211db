import logging
import os
import math
from typing import Optional
import numpy as np

APP_EXACT_CUT_THRESHOLD = int(
    os.environ.get('APP_EXACT_CUT_THRESHOLD', '20'))
APP_EXHAUSTIVE_LIMIT = int(
    os.environ.get('APP_EXHAUSTIVE_LIMIT', str(1 << 20)))
APP_DEFAULT_SAMPLES = int(
    os.environ.get('APP_DEFAULT_SAMPLES', '2000'))
APP_MAX_SYMMETRIZED_ORDER = int(
    os.environ.get('APP_MAX_SYMMETRIZED_ORDER', '8'))
APP_MAX_PSI_TENSOR = int(
    os.environ.get('APP_MAX_PSI_TENSOR', str(1 << 22)))

FLOAT_EXACT_LIMIT = 1 << 53
INT64_EXACT_LIMIT = 1 << 63
SEED_MASK = (1 << 64) - 1

_logger = logging.getLogger(__name__)


class QRError(ValueError):
    """Base class for all errors signaled by this package.
    """

    def __init__(self, message: str):
        super().__init__(message)

    @property
    def message(self) -> str:
        return self.args[0]


class InvalidGraphError(QRError):
    """A graph or a pattern violates its invariants."""


class GraphFormatError(InvalidGraphError):
    """An edge-list document can not be parsed.

    The `line` attribute contains the (1-based) number of the offending
    line, or `None` if the error is not related to a particular line.
    """

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)
        self.line = line


class KernelError(QRError):
    """A step kernel, or a box specification, violates its invariants."""


class HostTooSmallError(QRError):
    """The host graph has too few vertices for the requested pattern."""


class ParameterError(QRError):
    """A numeric parameter is out of its allowed range."""


def make_rng(seed: int) -> np.random.Generator:
    """Return a deterministic PCG64 generator for the given 64-bit seed.

    Negative seeds are reduced modulo 2**64, so that every 64-bit integer
    (signed or unsigned) is a valid seed.
    """
    return np.random.Generator(np.random.PCG64(seed & SEED_MASK))


def check_probability(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f'{name} must be in [0, 1], got {value}')
    return value


def check_fraction(name: str, value: float) -> float:
    """Check that `value` is in the open interval (0, 1)."""
    if not 0.0 < value < 1.0:
        raise ParameterError(f'{name} must be in (0, 1), got {value}')
    return value


def falling_factorial(n: int, k: int) -> int:
    """Return (n)_k = n (n-1) ... (n-k+1)."""
    return math.perm(n, k) if k <= n else 0


def is_float_exact(n: int, f: int) -> bool:
    """Return whether integers up to n**f are represented exactly by
    float64 numbers.
    """
    return n ** f < FLOAT_EXACT_LIMIT


def exact_dtype(n: int, f: int) -> Optional[type]:
    """Return the narrowest numpy dtype holding every integer up to n**f
    exactly, or `None` if int64 is not enough.
    """
    if is_float_exact(n, f):
        return np.float64
    if n ** f < INT64_EXACT_LIMIT:
        return np.int64
    return None
