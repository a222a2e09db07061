"""Signed log-domain scalar and complex arithmetic.

Everything downstream works with quantities whose magnitudes overflow or
underflow double precision by hundreds of orders (block values scale like
exp(exp(x))).  The convention throughout the package:

* a nonnegative real is carried as its natural log, with -inf meaning 0;
* a signed real is a (log magnitude, sign) pair with sign in {-1, 0, +1}
  and sign 0 if and only if the log magnitude is -inf;
* a complex number is a (log magnitude, phase) pair with phase in (-pi, pi].

Sums are performed by max-shifted log-sum-exp so the only floats ever
exponentiated are <= 0.  A +inf log magnitude is allowed as an explicit
"overflowed but sign known" token; combining +inf of both signs raises.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

__all__ = [
    "LogReal",
    "LogComplex",
    "log1mexp",
    "logsumexp",
    "logsumexp_signed",
    "logsumexp_complex",
    "wrap_phase",
]

_LOG2 = math.log(2.0)


def _phase(z: complex) -> float:
    # cmath.phase chokes on subnormal components; atan2 does not
    return math.atan2(z.imag, z.real)


def log1mexp(d: float) -> float:
    """log(1 - exp(d)) for d < 0, accurate in both regimes of d.

    Uses expm1 near 0 and log1p far from 0 (the standard split at -log 2).
    d == 0 returns -inf; d > 0 is a domain error.
    """
    if d > 0.0:
        raise DomainError(f"log1mexp requires d <= 0, got {d}")
    if d == 0.0:
        return -math.inf
    if d > -_LOG2:
        return math.log(-math.expm1(d))
    return math.log1p(-math.exp(d))


def wrap_phase(phi: float) -> float:
    """Reduce a phase to the principal interval (-pi, pi]."""
    phi = math.remainder(phi, 2.0 * math.pi)
    # remainder returns [-pi, pi]; fold the single excluded endpoint
    if phi <= -math.pi:
        phi = math.pi
    return phi


def _exp_or_inf(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True, slots=True)
class LogReal:
    """A signed real carried as (log magnitude, sign).

    Invariant: sign == 0 iff log_magnitude == -inf.
    """

    log_magnitude: float
    sign: int

    def __post_init__(self) -> None:
        if math.isnan(self.log_magnitude):
            raise DomainError("LogReal magnitude is NaN")
        if self.sign not in (-1, 0, 1):
            raise DomainError(f"invalid sign {self.sign}")
        if (self.sign == 0) != (self.log_magnitude == -math.inf):
            raise DomainError(
                f"sign/magnitude mismatch: sign={self.sign}, "
                f"log_magnitude={self.log_magnitude}"
            )

    @staticmethod
    def zero() -> "LogReal":
        return LogReal(-math.inf, 0)

    @staticmethod
    def one() -> "LogReal":
        return LogReal(0.0, 1)

    @staticmethod
    def from_float(x: float) -> "LogReal":
        if math.isnan(x):
            raise DomainError("cannot lift NaN into log domain")
        if x == 0.0:
            return LogReal.zero()
        return LogReal(math.log(abs(x)), 1 if x > 0 else -1)

    @staticmethod
    def from_log(log_magnitude: float, sign: int = 1) -> "LogReal":
        if log_magnitude == -math.inf:
            return LogReal.zero()
        return LogReal(log_magnitude, sign)

    def to_float(self) -> float:
        """Collapse to a double.  Overflow saturates to +-inf silently;
        callers that must not overflow compare log magnitudes instead."""
        if self.sign == 0:
            return 0.0
        return self.sign * _exp_or_inf(self.log_magnitude)

    def is_zero(self) -> bool:
        return self.sign == 0

    def __neg__(self) -> "LogReal":
        return LogReal(self.log_magnitude, -self.sign)

    def abs(self) -> "LogReal":
        return LogReal(self.log_magnitude, abs(self.sign))

    def __mul__(self, other: "LogReal") -> "LogReal":
        if self.sign == 0 or other.sign == 0:
            if self.log_magnitude == math.inf or other.log_magnitude == math.inf:
                raise DomainError("0 * inf in log domain")
            return LogReal.zero()
        return LogReal(self.log_magnitude + other.log_magnitude, self.sign * other.sign)

    def __truediv__(self, other: "LogReal") -> "LogReal":
        if other.sign == 0:
            raise DomainError("division by exact zero in log domain")
        if self.sign == 0:
            return LogReal.zero()
        return LogReal(self.log_magnitude - other.log_magnitude, self.sign * other.sign)

    def __add__(self, other: "LogReal") -> "LogReal":
        mag, sign = logsumexp_signed(
            (self.log_magnitude, other.log_magnitude), (self.sign, other.sign)
        )
        return LogReal.from_log(mag, sign)

    def __sub__(self, other: "LogReal") -> "LogReal":
        return self + (-other)

    def scaled(self, factor: float) -> "LogReal":
        """Multiply by an ordinary float without leaving the log domain."""
        return self * LogReal.from_float(factor)

    def powi(self, k: int) -> "LogReal":
        if self.sign == 0:
            if k <= 0:
                raise DomainError("0 ** nonpositive power")
            return LogReal.zero()
        sign = self.sign if k % 2 else abs(self.sign)
        return LogReal(self.log_magnitude * k, sign)

    def compare(self, other: "LogReal") -> int:
        """Three-way compare by value, never materializing the floats."""
        if self.sign != other.sign:
            return 1 if self.sign > other.sign else -1
        if self.sign == 0:
            return 0
        if self.log_magnitude == other.log_magnitude:
            return 0
        bigger_mag = 1 if self.log_magnitude > other.log_magnitude else -1
        return bigger_mag * self.sign

    def __lt__(self, other: "LogReal") -> bool:
        return self.compare(other) < 0

    def __le__(self, other: "LogReal") -> bool:
        return self.compare(other) <= 0


@dataclass(frozen=True, slots=True)
class LogComplex:
    """A complex number carried as (log magnitude, phase), phase in (-pi, pi]."""

    log_magnitude: float
    phase: float

    def __post_init__(self) -> None:
        if math.isnan(self.log_magnitude) or math.isnan(self.phase):
            raise DomainError("LogComplex component is NaN")

    @staticmethod
    def zero() -> "LogComplex":
        return LogComplex(-math.inf, 0.0)

    @staticmethod
    def from_complex(z: complex) -> "LogComplex":
        if z == 0:
            return LogComplex.zero()
        return LogComplex(math.log(abs(z)), _phase(z))

    @staticmethod
    def from_log_real(x: LogReal) -> "LogComplex":
        if x.sign == 0:
            return LogComplex.zero()
        return LogComplex(x.log_magnitude, 0.0 if x.sign > 0 else math.pi)

    def to_complex(self) -> complex:
        if self.log_magnitude == -math.inf:
            return 0j
        return _exp_or_inf(self.log_magnitude) * cmath.exp(1j * self.phase)

    def is_zero(self) -> bool:
        return self.log_magnitude == -math.inf

    def __mul__(self, other: "LogComplex") -> "LogComplex":
        if self.is_zero() or other.is_zero():
            if self.log_magnitude == math.inf or other.log_magnitude == math.inf:
                raise DomainError("0 * inf in log domain")
            return LogComplex.zero()
        return LogComplex(
            self.log_magnitude + other.log_magnitude,
            wrap_phase(self.phase + other.phase),
        )

    def __truediv__(self, other: "LogComplex") -> "LogComplex":
        if other.is_zero():
            raise DomainError("division by exact zero in log domain")
        if self.is_zero():
            return LogComplex.zero()
        return LogComplex(
            self.log_magnitude - other.log_magnitude,
            wrap_phase(self.phase - other.phase),
        )

    def conj(self) -> "LogComplex":
        return LogComplex(self.log_magnitude, wrap_phase(-self.phase))

    def pow_real(self, a: float) -> "LogComplex":
        """Principal power z**a.  The stored phase is a*arg(z) wrapped, which
        is exactly what trig projections need."""
        if self.is_zero():
            if a <= 0:
                raise DomainError("0 ** nonpositive power")
            return LogComplex.zero()
        return LogComplex(self.log_magnitude * a, wrap_phase(self.phase * a))

    def real_part(self) -> LogReal:
        if self.is_zero():
            return LogReal.zero()
        c = math.cos(self.phase)
        if c == 0.0:
            return LogReal.zero()
        return LogReal.from_log(
            self.log_magnitude + math.log(abs(c)), 1 if c > 0 else -1
        )

    def imag_part(self) -> LogReal:
        if self.is_zero():
            return LogReal.zero()
        s = math.sin(self.phase)
        if s == 0.0:
            return LogReal.zero()
        return LogReal.from_log(
            self.log_magnitude + math.log(abs(s)), 1 if s > 0 else -1
        )


def logsumexp(log_terms: Iterable[float] | np.ndarray) -> float:
    """log(sum exp(t)) over nonnegative-term logs.  Empty sum is -inf."""
    arr = np.asarray(list(log_terms) if not isinstance(log_terms, np.ndarray) else log_terms, dtype=float)
    if arr.size == 0:
        return -math.inf
    if np.isnan(arr).any():
        raise DomainError("NaN term in logsumexp")
    m = float(arr.max())
    if m == -math.inf:
        return -math.inf
    if m == math.inf:
        return math.inf
    return m + math.log(float(np.exp(arr - m).sum()))


def logsumexp_signed(
    log_mags: Sequence[float] | np.ndarray,
    signs: Sequence[int] | np.ndarray,
) -> tuple[float, int]:
    """Signed log-sum-exp: returns (log |S|, sign S) for S = sum s_i exp(m_i).

    Cancellation between the positive and negative buckets is resolved with
    log1mexp, so the relative error stays at machine scale even when the
    buckets agree to hundreds of digits in the exponent.
    """
    mags = np.asarray(log_mags, dtype=float)
    sgns = np.asarray(signs, dtype=int)
    if mags.shape != sgns.shape:
        raise DomainError("log_mags and signs shape mismatch")
    if np.isnan(mags).any():
        raise DomainError("NaN term in logsumexp_signed")

    pos = mags[sgns > 0]
    neg = mags[sgns < 0]

    pos_inf = pos.size > 0 and np.isposinf(pos).any()
    neg_inf = neg.size > 0 and np.isposinf(neg).any()
    if pos_inf and neg_inf:
        raise DomainError("inf - inf in signed log-sum-exp")
    if pos_inf:
        return math.inf, 1
    if neg_inf:
        return math.inf, -1

    lp = logsumexp(pos)
    ln = logsumexp(neg)
    if lp == -math.inf and ln == -math.inf:
        return -math.inf, 0
    if ln == -math.inf:
        return lp, 1
    if lp == -math.inf:
        return ln, -1
    if lp == ln:
        return -math.inf, 0
    if lp > ln:
        return lp + log1mexp(ln - lp), 1
    return ln + log1mexp(lp - ln), -1


def logsumexp_complex(
    log_mags: Sequence[float] | np.ndarray,
    phases: Sequence[float] | np.ndarray,
) -> LogComplex:
    """Max-shifted complex log-sum-exp; accumulates in complex128 after the
    shift, so each summand has modulus <= 1."""
    mags = np.asarray(log_mags, dtype=float)
    phis = np.asarray(phases, dtype=float)
    if mags.shape != phis.shape:
        raise DomainError("log_mags and phases shape mismatch")
    if mags.size == 0:
        return LogComplex.zero()
    if np.isnan(mags).any() or np.isnan(phis).any():
        raise DomainError("NaN term in logsumexp_complex")

    if np.isposinf(mags).any():
        idx = np.flatnonzero(np.isposinf(mags))
        if idx.size > 1:
            raise DomainError("multiple infinite terms in complex log-sum-exp")
        i = int(idx[0])
        return LogComplex(math.inf, wrap_phase(float(phis[i])))

    m = float(mags.max())
    if m == -math.inf:
        return LogComplex.zero()
    acc = complex(np.sum(np.exp(mags - m) * np.exp(1j * phis)))
    if acc == 0:
        return LogComplex.zero()
    return LogComplex(m + math.log(abs(acc)), _phase(acc))
