"""Extended non-negative reals in log domain.

Partition functions grow doubly exponentially (26, 677, 458330, ...), so every
extensive quantity is carried as a log value.  A LogReal is one of three
things: exact zero (log = -inf), a finite positive number (finite log), or
infinity (log = +inf).  Division follows the convention that fractions with
infinite denominators are zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

# exp(x) overflows a double above this
_OVERFLOW_LOG = 709.782712893384


@dataclass(frozen=True, slots=True)
class LogReal:
    log: float

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero() -> "LogReal":
        return LogReal(-math.inf)

    @staticmethod
    def one() -> "LogReal":
        return LogReal(0.0)

    @staticmethod
    def infinite() -> "LogReal":
        return LogReal(math.inf)

    @staticmethod
    def from_float(x: float) -> "LogReal":
        if x < 0:
            raise ValueError(f"LogReal represents non-negative values, got {x}")
        if x == 0:
            return LogReal.zero()
        if math.isinf(x):
            return LogReal.infinite()
        return LogReal(math.log(x))

    @staticmethod
    def from_log(log_value: float) -> "LogReal":
        return LogReal(log_value)

    # -- predicates --------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.log == -math.inf

    @property
    def is_infinite(self) -> bool:
        return self.log == math.inf

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.log)

    @property
    def overflows_float(self) -> bool:
        """True when float_value() cannot represent the value exactly."""
        return self.log > _OVERFLOW_LOG

    def float_value(self) -> float:
        """Plain-float accessor; clamps to inf on overflow (see overflows_float)."""
        if self.is_zero:
            return 0.0
        if self.is_infinite or self.overflows_float:
            return math.inf
        return math.exp(self.log)

    # -- arithmetic --------------------------------------------------------

    def __mul__(self, other: "LogReal") -> "LogReal":
        # 0 * inf is taken as 0, consistent with the quotient convention
        # (these products only arise from fractions with infinite denominators).
        if self.is_zero or other.is_zero:
            return LogReal.zero()
        return LogReal(self.log + other.log)

    def __truediv__(self, other: "LogReal") -> "LogReal":
        if other.is_infinite:
            return LogReal.zero()
        if other.is_zero:
            if self.is_zero:
                raise ZeroDivisionError("0/0 is undefined for LogReal")
            return LogReal.infinite()
        if self.is_zero:
            return LogReal.zero()
        return LogReal(self.log - other.log)

    def __add__(self, other: "LogReal") -> "LogReal":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        if self.is_infinite or other.is_infinite:
            return LogReal.infinite()
        hi, lo = (self.log, other.log) if self.log >= other.log else (other.log, self.log)
        return LogReal(hi + math.log1p(math.exp(lo - hi)))

    def pow(self, exponent: float) -> "LogReal":
        if exponent == 0:
            return LogReal.one()
        if self.is_zero:
            return LogReal.zero() if exponent > 0 else LogReal.infinite()
        if self.is_infinite:
            return LogReal.infinite() if exponent > 0 else LogReal.zero()
        return LogReal(self.log * exponent)

    def __lt__(self, other: "LogReal") -> bool:
        return self.log < other.log

    def __le__(self, other: "LogReal") -> bool:
        return self.log <= other.log

    # -- serialization -----------------------------------------------------

    def to_json_obj(self) -> dict:
        """JSON representation: {"log_value": x} or {"state": ...}."""
        if self.is_zero:
            return {"state": "zero"}
        if self.is_infinite:
            return {"state": "infinite"}
        return {"log_value": self.log}

    @staticmethod
    def from_json_obj(obj: dict) -> "LogReal":
        if "state" in obj:
            if obj["state"] == "zero":
                return LogReal.zero()
            if obj["state"] == "infinite":
                return LogReal.infinite()
            raise ValueError(f"unknown LogReal state {obj['state']!r}")
        return LogReal(float(obj["log_value"]))

    def __repr__(self) -> str:
        return f"LogReal({json.dumps(self.to_json_obj())})"


def log1p_exp(x: float) -> float:
    """log(1 + exp(x)), stable for any x."""
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


def log_expm1(x: float) -> float:
    """log(exp(x) - 1) for x > 0, stable near 0 and for large x."""
    if x <= 0:
        raise ValueError(f"log_expm1 needs x > 0, got {x}")
    if x > 37:
        # exp(-x) below double epsilon
        return x
    if x > 1e-8:
        return math.log(math.expm1(x))
    # expm1(x) = x (1 + x/2 + O(x^2))
    return math.log(x) + math.log1p(x / 2)


def logsumexp_iter(values) -> float:
    """log(sum(exp(v))) over an iterable of floats (possibly -inf)."""
    vals = [v for v in values if v != -math.inf]
    if not vals:
        return -math.inf
    hi = max(vals)
    if hi == math.inf:
        return math.inf
    return hi + math.log(sum(math.exp(v - hi) for v in vals))
