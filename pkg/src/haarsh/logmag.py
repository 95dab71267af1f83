"""Signed base-2 log-domain scalars.

Amplitudes such as ``2**-12320`` are routine in the scale schedule and
underflow float64, so they are carried as ``sign * 2**log2_abs``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering

_LN2 = math.log(2.0)


@total_ordering
@dataclass(frozen=True)
class LogMagnitude:
    log2_abs: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if math.isnan(self.log2_abs):
            raise ValueError("log2_abs is NaN")
        # canonical zero
        if self.sign == 0 or self.log2_abs == -math.inf:
            object.__setattr__(self, "sign", 0)
            object.__setattr__(self, "log2_abs", -math.inf)

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls) -> LogMagnitude:
        return cls(-math.inf, 0)

    @classmethod
    def from_float(cls, x: float) -> LogMagnitude:
        if x == 0:
            return cls.zero()
        return cls(math.log2(abs(x)), 1 if x > 0 else -1)

    @classmethod
    def pow2(cls, exponent: float) -> LogMagnitude:
        return cls(float(exponent), 1)

    @classmethod
    def from_ln(cls, ln_abs: float, sign: int = 1) -> LogMagnitude:
        return cls(ln_abs / _LN2, sign)

    # views --------------------------------------------------------------
    @property
    def ln_abs(self) -> float:
        return self.log2_abs * _LN2

    @property
    def log10_abs(self) -> float:
        return self.log2_abs * math.log10(2.0)

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.log2_abs > 1023.999:
            return self.sign * math.inf
        # ldexp underflows gracefully to 0.0
        ipart = math.floor(self.log2_abs)
        return self.sign * math.ldexp(2.0 ** (self.log2_abs - ipart), int(ipart))

    def underflows(self) -> bool:
        return self.sign != 0 and float(self) == 0.0

    def is_zero(self) -> bool:
        return self.sign == 0

    # arithmetic ---------------------------------------------------------
    def __neg__(self) -> LogMagnitude:
        return LogMagnitude(self.log2_abs, -self.sign)

    def __abs__(self) -> LogMagnitude:
        return LogMagnitude(self.log2_abs, 1 if self.sign else 0)

    def __mul__(self, other) -> LogMagnitude:
        other = _coerce(other)
        if self.sign == 0 or other.sign == 0:
            return LogMagnitude.zero()
        return LogMagnitude(self.log2_abs + other.log2_abs, self.sign * other.sign)

    __rmul__ = __mul__

    def __truediv__(self, other) -> LogMagnitude:
        other = _coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("LogMagnitude division by zero")
        if self.sign == 0:
            return LogMagnitude.zero()
        return LogMagnitude(self.log2_abs - other.log2_abs, self.sign * other.sign)

    def __rtruediv__(self, other) -> LogMagnitude:
        return _coerce(other) / self

    def __pow__(self, p: float) -> LogMagnitude:
        if self.sign < 0:
            raise ValueError("power of a negative LogMagnitude")
        if self.sign == 0:
            return LogMagnitude.zero() if p > 0 else LogMagnitude(0.0)
        return LogMagnitude(self.log2_abs * p, 1)

    def __add__(self, other) -> LogMagnitude:
        other = _coerce(other)
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        big, small = (self, other) if self.log2_abs >= other.log2_abs else (other, self)
        ratio = 2.0 ** (small.log2_abs - big.log2_abs)  # in [0, 1]
        if big.sign == small.sign:
            return LogMagnitude(big.log2_abs + math.log2(1.0 + ratio), big.sign)
        if ratio == 1.0:
            return LogMagnitude.zero()
        return LogMagnitude(big.log2_abs + math.log2(1.0 - ratio), big.sign)

    __radd__ = __add__

    def __sub__(self, other) -> LogMagnitude:
        return self + (-_coerce(other))

    def __rsub__(self, other) -> LogMagnitude:
        return _coerce(other) - self

    # comparison ---------------------------------------------------------
    def _key(self):
        if self.sign == 0:
            return (0, 0.0)
        return (self.sign, self.sign * self.log2_abs)

    def __eq__(self, other) -> bool:
        try:
            other = _coerce(other)
        except TypeError:
            return NotImplemented
        return self._key() == other._key()

    def __lt__(self, other) -> bool:
        return self._key() < _coerce(other)._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        if self.sign == 0:
            return "LogMagnitude(0)"
        s = "-" if self.sign < 0 else ""
        return f"LogMagnitude({s}2^{self.log2_abs:.6g})"

    def to_dict(self) -> dict:
        return {"sign": self.sign, "log2_abs": None if self.sign == 0 else self.log2_abs}


def _coerce(x) -> LogMagnitude:
    if isinstance(x, LogMagnitude):
        return x
    if isinstance(x, (int, float)):
        return LogMagnitude.from_float(float(x))
    try:
        return LogMagnitude.from_float(float(x))
    except (TypeError, ValueError):
        raise TypeError(f"cannot interpret {type(x).__name__} as LogMagnitude") from None


def log_sum(values) -> LogMagnitude:
    total = LogMagnitude.zero()
    for v in values:
        total = total + v
    return total
