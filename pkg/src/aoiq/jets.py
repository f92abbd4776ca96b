"""Truncated Taylor-series (jet) arithmetic.

A jet stores the first K+1 normalized Taylor coefficients of a scalar
function at a fixed expansion point: ``coeffs[k] = f(k)(center) / k!``.
Sums, products and quotients of jets propagate derivatives exactly, which
is what lets the analytic engine evaluate derivatives of composite MGF
expressions at a point without symbolic algebra or finite differences.

Coefficients are kept normalized (divided by k!) so that products and
quotients are plain Cauchy convolutions, free of factorial growth; the
conversion back to raw derivatives happens only in ``derivative_value``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Jet",
    "JetMismatchError",
    "DivisionBySingularJet",
    "NonVanishingConstantTerm",
    "DEFAULT_ORDER",
]

# Supports moments up to m = 6 for the AoI (deflation costs one order,
# plus two guard coefficients).
DEFAULT_ORDER = 8

# |denominator constant term| below this raises instead of producing huge
# coefficients; every legitimate denominator in the AoI formulas has a
# constant term bounded away from zero.
DIVISION_FLOOR = 1e-13


class JetMismatchError(ValueError):
    """Binary operation on jets with different centers or orders."""


class DivisionBySingularJet(ZeroDivisionError):
    """Division by a jet whose constant term is (numerically) zero."""


class NonVanishingConstantTerm(ValueError):
    """deflate() applied to a jet that does not vanish at its center."""


@dataclass(frozen=True)
class Jet:
    """Truncated Taylor expansion of a scalar function at ``center``.

    ``coeffs[k]`` holds the normalized coefficient f(k)(center)/k!; the
    order is ``len(coeffs) - 1``.
    """

    center: float
    coeffs: tuple[float, ...]

    def __post_init__(self):
        if len(self.coeffs) < 2:
            raise ValueError("a jet needs order >= 1 (at least two coefficients)")
        if not math.isfinite(self.center):
            raise ValueError("jet center must be finite")
        if not all(math.isfinite(c) for c in self.coeffs):
            raise ValueError(f"non-finite jet coefficients: {self.coeffs}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, value: float, order: int = DEFAULT_ORDER, center: float = 0.0) -> "Jet":
        """The constant function ``value`` as a jet."""
        return cls(center, (float(value),) + (0.0,) * order)

    @classmethod
    def variable(cls, order: int = DEFAULT_ORDER, center: float = 0.0) -> "Jet":
        """The identity function s -> s expanded at ``center``."""
        return cls(center, (float(center), 1.0) + (0.0,) * (order - 1))

    @classmethod
    def from_coeffs(cls, coeffs, center: float = 0.0) -> "Jet":
        return cls(float(center), tuple(float(c) for c in coeffs))

    # -- basic queries -----------------------------------------------------

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def derivative_value(self, k: int) -> float:
        """The raw derivative f(k)(center), i.e. k! * coeffs[k]."""
        if not 0 <= k <= self.order:
            raise ValueError(f"derivative order {k} outside 0..{self.order}")
        return math.factorial(k) * self.coeffs[k]

    def _check_compatible(self, other: "Jet") -> None:
        if self.center != other.center or self.order != other.order:
            raise JetMismatchError(
                f"jets differ in center/order: ({self.center}, {self.order}) "
                f"vs ({other.center}, {other.order})"
            )

    def _lift(self, value) -> "Jet":
        if isinstance(value, Jet):
            return value
        return Jet.constant(float(value), order=self.order, center=self.center)

    # -- ring operations ---------------------------------------------------

    def __add__(self, other) -> "Jet":
        other = self._lift(other)
        self._check_compatible(other)
        return Jet(self.center, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        other = self._lift(other)
        self._check_compatible(other)
        return Jet(self.center, tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __rsub__(self, other) -> "Jet":
        return self._lift(other).__sub__(self)

    def __neg__(self) -> "Jet":
        return Jet(self.center, tuple(-a for a in self.coeffs))

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            k = float(other)
            return Jet(self.center, tuple(a * k for a in self.coeffs))
        self._check_compatible(other)
        a, b = self.coeffs, other.coeffs
        n = len(a)
        out = [0.0] * n
        for i, ai in enumerate(a):
            if ai == 0.0:
                continue
            for j in range(n - i):
                out[i + j] += ai * b[j]
        return Jet(self.center, tuple(out))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        other = self._lift(other)
        self._check_compatible(other)
        b = other.coeffs
        if abs(b[0]) < DIVISION_FLOOR:
            raise DivisionBySingularJet(
                f"jet denominator constant term {b[0]!r} below floor {DIVISION_FLOOR}"
            )
        a = self.coeffs
        n = len(a)
        q = [0.0] * n
        inv_b0 = 1.0 / b[0]
        for k in range(n):
            acc = a[k]
            for i in range(k):
                acc -= q[i] * b[k - i]
            q[k] = acc * inv_b0
        return Jet(self.center, tuple(q))

    def __rtruediv__(self, other) -> "Jet":
        return self._lift(other).__truediv__(self)

    # -- structure-specific operations --------------------------------------

    def deflate(self, tolerance: float = 1e-9) -> "Jet":
        """Divide by the variable itself: the Taylor series of f(s)/s.

        Only meaningful for jets at center 0 whose constant term vanishes
        analytically (it may carry quadrature rounding, hence the relative
        tolerance against the largest coefficient). The result has order
        K - 1.
        """
        if self.center != 0.0:
            raise ValueError("deflate requires a jet centered at 0")
        floor = tolerance * max(1.0, max(abs(c) for c in self.coeffs))
        if abs(self.coeffs[0]) > floor:
            raise NonVanishingConstantTerm(
                f"constant term {self.coeffs[0]!r} exceeds deflation tolerance {floor!r}"
            )
        return Jet(0.0, self.coeffs[1:])

    def recenter(self, center: float) -> "Jet":
        """Relabel the expansion point, keeping the coefficients.

        The expansion of f at t0, relabeled to center 0, is exactly the
        expansion of s -> f(s + t0) at 0: same numbers, shifted argument.
        """
        return Jet(float(center), self.coeffs)
