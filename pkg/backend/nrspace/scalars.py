"""Exact arithmetic in Q(sqrt2, sqrt3, sqrt5) and the binomial helpers used by the derivative formulas.

A Radical is a rational combination of the eight square-free surds
1, sqrt2, sqrt3, sqrt5, sqrt6, sqrt10, sqrt15, sqrt30. Every structure constant of the
Berger space Sp(2)/SU(2) lives in this field, so bracket identities can be checked with
zero tolerance.
"""
from __future__ import annotations

import logging
import math
import re
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import comb

logger = logging.getLogger(__name__)

SURDS: Tuple[int, ...] = (1, 2, 3, 5, 6, 10, 15, 30)

# bit 0 -> sqrt2, bit 1 -> sqrt3, bit 2 -> sqrt5
_MASKS: Tuple[int, ...] = (0b000, 0b001, 0b010, 0b100, 0b011, 0b101, 0b110, 0b111)
_PRIMES: Tuple[int, ...] = (2, 3, 5)
_SLOT_OF_MASK: Dict[int, int] = {mask: slot for slot, mask in enumerate(_MASKS)}
_SLOT_OF_SURD: Dict[int, int] = {surd: slot for slot, surd in enumerate(SURDS)}

_SQRT_BITS = 96
_SQRT_APPROX: Tuple[Fraction, ...] = tuple(
    Fraction(math.isqrt(s << (2 * _SQRT_BITS)), 1 << _SQRT_BITS) for s in SURDS
)

Number = Union[int, Fraction]


def _build_product_table() -> Tuple[Tuple[Tuple[int, int], ...], ...]:
    table = []
    for a in _MASKS:
        row = []
        for b in _MASKS:
            factor = 1
            for bit, prime in enumerate(_PRIMES):
                if (a & b) >> bit & 1:
                    factor *= prime
            row.append((_SLOT_OF_MASK[a ^ b], factor))
        table.append(tuple(row))
    return tuple(table)


_PRODUCT = _build_product_table()


class Radical:
    """Immutable element of Q(sqrt2, sqrt3, sqrt5)."""

    __slots__ = ("coeffs", "_hash")

    def __init__(self, coeffs: Iterable[Number] = ()):
        values = tuple(Fraction(c) for c in coeffs)
        if len(values) > len(SURDS):
            raise ValueError(f"Radical takes at most {len(SURDS)} coefficients, got {len(values)}")
        values = values + (Fraction(0),) * (len(SURDS) - len(values))
        object.__setattr__(self, "coeffs", values)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("Radical is immutable")

    # -- constructors -----------------------------------------------------------------

    @classmethod
    def zero(cls) -> "Radical":
        return _ZERO

    @classmethod
    def one(cls) -> "Radical":
        return _ONE

    @classmethod
    def rational(cls, q: Number) -> "Radical":
        return cls((q,))

    @classmethod
    def surd(cls, n: int, coeff: Number = 1) -> "Radical":
        """coeff * sqrt(n) for n one of the eight basis surds."""
        if n not in _SLOT_OF_SURD:
            raise ValueError(f"sqrt({n}) is not a basis surd; use Radical.sqrt_of")
        values = [Fraction(0)] * len(SURDS)
        values[_SLOT_OF_SURD[n]] = Fraction(coeff)
        return cls(values)

    @classmethod
    def sqrt_of(cls, q: Number) -> "Radical":
        """Exact square root of a non-negative rational, e.g. sqrt(3/2) = sqrt6/2."""
        q = Fraction(q)
        if q < 0:
            raise ValueError("square root of a negative rational is not real")
        if q == 0:
            return _ZERO
        # sqrt(a/b) = sqrt(a*b)/b
        radicand = q.numerator * q.denominator
        outside = Fraction(1, q.denominator)
        for prime in _PRIMES:
            while radicand % (prime * prime) == 0:
                radicand //= prime * prime
                outside *= prime
        root = math.isqrt(radicand)
        if root * root == radicand:
            return cls.rational(outside * root)
        square_free = 1
        for prime in _PRIMES:
            if radicand % prime == 0:
                radicand //= prime
                square_free *= prime
        root = math.isqrt(radicand)
        if root * root != radicand:
            raise ValueError(f"sqrt({q}) does not lie in Q(sqrt2, sqrt3, sqrt5)")
        return cls.surd(square_free, outside * root)

    @classmethod
    def from_strings(cls, values: Sequence[str]) -> "Radical":
        """Parse the file format: eight "num/den" strings on the surd basis."""
        if len(values) != len(SURDS):
            raise ValueError(f"expected {len(SURDS)} coefficients, got {len(values)}")
        return cls(Fraction(v.strip()) for v in values)

    @classmethod
    def coerce(cls, value: Union["Radical", Number]) -> "Radical":
        if isinstance(value, Radical):
            return value
        if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
            return cls.rational(value)
        raise TypeError(f"cannot use {type(value).__name__} as an exact scalar")

    # -- inspection -------------------------------------------------------------------

    def to_strings(self) -> List[str]:
        return [f"{c.numerator}/{c.denominator}" for c in self.coeffs]

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def is_rational(self) -> bool:
        return not any(self.coeffs[1:])

    def to_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is irrational")
        return self.coeffs[0]

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __float__(self) -> float:
        total = sum((c * s for c, s in zip(self.coeffs, _SQRT_APPROX) if c), Fraction(0))
        return float(total)

    def __eq__(self, other) -> bool:
        if isinstance(other, Radical):
            return self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)):
            return self.is_rational() and self.coeffs[0] == other
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(self.coeffs))
        return self._hash

    def __repr__(self) -> str:
        return f"Radical({str(self)!r})"

    def __str__(self) -> str:
        parts = []
        for coeff, surd in zip(self.coeffs, SURDS):
            if not coeff:
                continue
            magnitude = abs(coeff)
            if surd == 1:
                body = str(magnitude)
            elif magnitude == 1:
                body = f"sqrt{surd}"
            else:
                body = f"{magnitude}*sqrt{surd}"
            sign = "-" if coeff < 0 else "+"
            parts.append((sign, body))
        if not parts:
            return "0"
        first_sign, first_body = parts[0]
        text = ("-" if first_sign == "-" else "") + first_body
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    # -- arithmetic -------------------------------------------------------------------

    def __neg__(self) -> "Radical":
        return Radical(-c for c in self.coeffs)

    def __pos__(self) -> "Radical":
        return self

    def __add__(self, other) -> "Radical":
        if isinstance(other, Radical):
            if other.is_zero():
                return self
            if self.is_zero():
                return other
            return Radical(a + b for a, b in zip(self.coeffs, other.coeffs))
        if isinstance(other, (int, Fraction)):
            if not other:
                return self
            return Radical((self.coeffs[0] + other,) + self.coeffs[1:])
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other) -> "Radical":
        if isinstance(other, (Radical, int, Fraction)):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other) -> "Radical":
        if isinstance(other, (int, Fraction)):
            return (-self) + other
        return NotImplemented

    def __mul__(self, other) -> "Radical":
        if isinstance(other, Radical):
            if self.is_zero() or other.is_zero():
                return _ZERO
            out = [Fraction(0)] * len(SURDS)
            for i, a in enumerate(self.coeffs):
                if not a:
                    continue
                row = _PRODUCT[i]
                for j, b in enumerate(other.coeffs):
                    if b:
                        slot, factor = row[j]
                        out[slot] += a * b * factor
            return Radical(out)
        if isinstance(other, (int, Fraction)):
            if not other:
                return _ZERO
            return Radical(c * other for c in self.coeffs)
        return NotImplemented

    __rmul__ = __mul__

    def conjugate(self, flips: int) -> "Radical":
        """Apply the field automorphism flipping the signs of the primes set in `flips`."""
        out = []
        for coeff, mask in zip(self.coeffs, _MASKS):
            negate = bin(mask & flips).count("1") % 2
            out.append(-coeff if negate else coeff)
        return Radical(out)

    def inverse(self) -> "Radical":
        if self.is_zero():
            raise ZeroDivisionError("Radical division by zero")
        if self.is_rational():
            return Radical.rational(1 / self.coeffs[0])
        partner = _ONE
        for flips in range(1, 8):
            partner = partner * self.conjugate(flips)
        norm = self * partner
        # the norm is fixed by every automorphism, so it is rational
        return partner * (1 / norm.to_fraction())

    def __truediv__(self, other) -> "Radical":
        if isinstance(other, Radical):
            return self * other.inverse()
        if isinstance(other, (int, Fraction)):
            return self * (1 / Fraction(other))
        return NotImplemented

    def __rtruediv__(self, other) -> "Radical":
        if isinstance(other, (int, Fraction)):
            return self.inverse() * other
        return NotImplemented


_ZERO = Radical()
_ONE = Radical((1,))

_RADICAL_TERM = re.compile(r"^(?P<sign>[+-])?(?P<num>\d+(?:/\d+)?)?\*?(?:sqrt\(?(?P<surd>\d+(?:/\d+)?)\)?)?$")


def parse_radical(text: str) -> Radical:
    """Parse strings such as "3/2", "-sqrt6", "2*sqrt(3/2)" or "1 - sqrt2"."""
    compact = text.replace(" ", "")
    if not compact:
        raise ValueError("empty radical")
    terms = re.findall(r"[+-]?[^+-]+", compact)
    total = _ZERO
    for term in terms:
        match = _RADICAL_TERM.match(term)
        if not match or not (match.group("num") or match.group("surd")):
            raise ValueError(f"cannot parse radical term {term!r}")
        coeff = Fraction(match.group("num") or 1)
        if match.group("sign") == "-":
            coeff = -coeff
        surd = match.group("surd")
        total = total + (Radical.sqrt_of(Fraction(surd)) * coeff if surd else Radical.rational(coeff))
    return total


def radical_mul(a: Radical, b: Radical) -> Radical:
    return a * b


def radical_to_float(a: Radical) -> float:
    return float(a)


def snap_radical(
    x: float,
    tol: float = 1e-10,
    max_numerator: int = 12,
    denominators: Sequence[int] = (1, 2, 4),
) -> Optional[Radical]:
    """Identify x with some p/q * sqrt(s), |p| <= max_numerator, or return None."""
    if abs(x) <= tol:
        return _ZERO
    for surd in SURDS:
        root = math.sqrt(surd)
        for q in denominators:
            p = round(x * q / root)
            if p == 0 or abs(p) > max_numerator:
                continue
            if abs(x - p * root / q) <= tol:
                return Radical.surd(surd, Fraction(p, q))
    return None


# -- integer combinatorics -------------------------------------------------------------


def binomial(n: int, k: int) -> int:
    if k < 0 or n < 0 or k > n:
        return 0
    return int(comb(n, k, exact=True))


def doubled_binomial_identities(k: int) -> bool:
    """Check the three identities relating C(2k+2, .) to C(2k, .)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    pascal_twice = all(
        binomial(2 * k + 2, i) == binomial(2 * k, i) + 2 * binomial(2 * k, i - 1) + binomial(2 * k, i - 2)
        for i in range(0, 2 * k + 1)
    )
    next_to_last = binomial(2 * k + 2, 2 * k + 1) == binomial(2 * k, 2 * k - 1) + 2
    last = binomial(2 * k + 2, 2 * k + 2) == binomial(2 * k, 2 * k) == 1
    return pascal_twice and next_to_last and last


def alternating_binomial_sum(k: int, i: int, shifted: bool = True) -> int:
    """sum_{j=1..i} s_j C(k+1, j) C(k+1-j, i-j), s_j = (-1)^(j-1) if shifted else (-1)^j."""
    total = 0
    for j in range(1, i + 1):
        sign = (-1) ** (j - 1) if shifted else (-1) ** j
        total += sign * binomial(k + 1, j) * binomial(k + 1 - j, i - j)
    return total


def binomial_identity_report(max_k: int = 20) -> Dict[str, object]:
    """Brute-force both sign conventions of the alternating sum against C(k+1, i)."""
    printed_failures = []
    shifted_failures = []
    checked = 0
    for k in range(0, max_k + 1):
        for i in range(1, k + 2):
            target = binomial(k + 1, i)
            checked += 1
            if alternating_binomial_sum(k, i, shifted=False) != target:
                printed_failures.append((k, i))
            if alternating_binomial_sum(k, i, shifted=True) != target:
                shifted_failures.append((k, i))
    doubled_ok = all(doubled_binomial_identities(k) for k in range(1, max_k + 1))
    if printed_failures:
        k, i = printed_failures[0]
        logger.warning(
            f"[binomial_identity_report] (-1)^j variant fails on {len(printed_failures)}/{checked} cases, "
            f"first at k={k}, i={i}: {alternating_binomial_sum(k, i, shifted=False)} != {binomial(k + 1, i)}"
        )
    return {
        "max_k": max_k,
        "checked": checked,
        "doubled_identities_hold": doubled_ok,
        "printed_sign_failures": printed_failures,
        "shifted_sign_failures": shifted_failures,
        "shifted_sign_holds": not shifted_failures,
    }


def rational_unit_vector(rng: np.random.Generator, dim: int, height: int = 5) -> List[Fraction]:
    """Exact rational point on the unit sphere S^(dim-1) by inverse stereographic projection."""
    if dim < 1:
        raise ValueError("dim must be positive")
    if dim == 1:
        return [Fraction(1) if rng.integers(0, 2) else Fraction(-1)]
    y = [Fraction(int(rng.integers(-height, height + 1)), int(rng.integers(1, height + 1))) for _ in range(dim - 1)]
    norm2 = sum(c * c for c in y)
    scale = 1 / (norm2 + 1)
    return [2 * c * scale for c in y] + [(norm2 - 1) * scale]
