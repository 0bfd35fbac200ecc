"""Scalar backends: exact rationals in object arrays, or binary64.

Exact arrays hold ``fractions.Fraction`` (or ``int``) entries in numpy object
arrays; every routine here works on both kinds.
"""

from fractions import Fraction
from typing import Any, Iterable, Union

import numpy as np

from qcnormal.core.errors import FormatError
from qcnormal.core.models import ScalarKind

Scalar = Union[int, float, Fraction]


def dtype_for(kind: ScalarKind) -> Any:
    """numpy dtype backing a scalar kind."""
    return object if kind == ScalarKind.RATIONAL else np.float64


def zeros(shape: Union[int, tuple[int, ...]], kind: ScalarKind) -> np.ndarray:
    """Zero array of the requested backend."""
    if kind == ScalarKind.RATIONAL:
        arr = np.empty(shape, dtype=object)
        arr.fill(Fraction(0))
        return arr
    return np.zeros(shape, dtype=np.float64)


def identity(size: int, kind: ScalarKind) -> np.ndarray:
    """Identity matrix of the requested backend."""
    arr = zeros((size, size), kind)
    for k in range(size):
        arr[k, k] = Fraction(1) if kind == ScalarKind.RATIONAL else 1.0
    return arr


def one(kind: ScalarKind) -> Scalar:
    return Fraction(1) if kind == ScalarKind.RATIONAL else 1.0


def convert(arr: Any, kind: ScalarKind) -> np.ndarray:
    """Convert an array-like to the requested backend."""
    arr = np.asarray(arr, dtype=object if kind == ScalarKind.RATIONAL else None)
    if kind == ScalarKind.RATIONAL:
        out = np.empty(arr.shape, dtype=object)
        for idx, value in np.ndenumerate(arr):
            out[idx] = to_fraction(value)
        return out
    return np.asarray(arr, dtype=np.float64)


def to_fraction(value: Any) -> Fraction:
    """Exact conversion of ints, Fractions, sympy and gmpy rationals."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, float):
        return Fraction(value)
    if hasattr(value, "p") and hasattr(value, "q"):
        return Fraction(int(value.p), int(value.q))
    if hasattr(value, "numerator") and hasattr(value, "denominator"):
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, str):
        return parse_rational(value)
    raise FormatError(f"cannot convert {value!r} to an exact rational")


def parse_rational(text: str) -> Fraction:
    """Parse a ``"p/q"`` or integer string."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise FormatError(f"invalid rational literal {text!r}") from exc


def format_scalar(value: Any) -> Union[str, float]:
    """Serialize a scalar: rationals as ``"p/q"`` strings, floats unchanged."""
    if isinstance(value, (float, np.floating)):
        return float(value)
    frac = to_fraction(value)
    if frac.denominator == 1:
        return str(frac.numerator)
    return f"{frac.numerator}/{frac.denominator}"


def parse_scalar(value: Any, kind: ScalarKind) -> Scalar:
    """Parse a JSON scalar into the requested backend."""
    if kind == ScalarKind.RATIONAL:
        if isinstance(value, float):
            raise FormatError(f"float {value!r} in a rational tensor")
        return to_fraction(value)
    if isinstance(value, str):
        return float(parse_rational(value))
    return float(value)


def is_zero(arr: Any, tol: float = 0.0) -> bool:
    """Exact zero test for object arrays, ``max|a| <= tol`` otherwise."""
    arr = np.asarray(arr)
    if arr.size == 0:
        return True
    if arr.dtype == object:
        return all(x == 0 for x in arr.flat)
    return bool(np.max(np.abs(arr)) <= tol)


def max_abs(arr: Any) -> float:
    """Largest absolute entry as a float."""
    arr = np.asarray(arr)
    if arr.size == 0:
        return 0.0
    return max(abs(float(x)) for x in arr.flat)


def random_array(
    rng: np.random.Generator, shape: tuple[int, ...], kind: ScalarKind, denom: int = 6
) -> np.ndarray:
    """Random entries; small-denominator rationals for the exact backend."""
    if kind == ScalarKind.RATIONAL:
        nums = rng.integers(-denom * 2, denom * 2 + 1, size=shape)
        dens = rng.integers(1, denom + 1, size=shape)
        out = np.empty(shape, dtype=object)
        for idx in np.ndindex(*shape):
            out[idx] = Fraction(int(nums[idx]), int(dens[idx]))
        return out
    return rng.uniform(-2.0, 2.0, size=shape)


def as_floats(values: Iterable[Any]) -> np.ndarray:
    return np.array([float(v) for v in values], dtype=np.float64)
