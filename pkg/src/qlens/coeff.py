"""Exact scalar arithmetic: Laurent polynomials in q over the Gaussian rationals.

The rewriter in :mod:`qlens.expr` only ever sees these values, so zero tests on
normal forms are exact. Numbers enter only through :func:`ql_eval`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal, Mapping, Union

from .errors import DomainError

logger = logging.getLogger(__name__)

EXPONENT_LIMIT = 2**63 - 1

Rational = Union[int, Fraction]


@dataclass(frozen=True, slots=True)
class GaussianRational:
    """A complex number with rational real and imaginary parts."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @classmethod
    def coerce(cls, value: "GaussianRational | Rational") -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, (int, Fraction)):
            return cls(Fraction(value), Fraction(0))
        raise TypeError(f"Expected int, Fraction or GaussianRational; got {type(value).__name__}")

    def __bool__(self) -> bool:
        return bool(self.re) or bool(self.im)

    def __add__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "GaussianRational":
        return GaussianRational(-self.re, -self.im)

    def __mul__(self, other: "GaussianRational") -> "GaussianRational":
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def format(self) -> str:
        """Text accepted by the expression grammar, e.g. ``3/4``, ``i``, ``(1 + 2 . i)``."""
        if not self.im:
            return _format_fraction(self.re)
        imag = "i" if self.im == 1 else f"{_format_fraction(self.im)} . i"
        if self.im == -1:
            imag = "-i"
        if not self.re:
            return imag
        sign = "-" if self.im < 0 else "+"
        mag = "i" if abs(self.im) == 1 else f"{_format_fraction(abs(self.im))} . i"
        return f"({_format_fraction(self.re)} {sign} {mag})"


ZERO = GaussianRational()
ONE = GaussianRational(Fraction(1))
I_UNIT = GaussianRational(Fraction(0), Fraction(1))


def _format_fraction(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def _check_exponent(exp: int) -> int:
    if abs(exp) > EXPONENT_LIMIT:
        raise OverflowError(f"q-exponent {exp} exceeds the signed 64-bit range")
    return exp


class QLaurent:
    """Laurent polynomial sum_k a_k q^k with Gaussian-rational coefficients.

    Stored sparsely: no zero coefficient is ever kept, so the zero polynomial
    has an empty term map. Instances are immutable and hashable.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[int, GaussianRational | Rational] | None = None):
        clean: dict[int, GaussianRational] = {}
        for exp, coeff in (terms or {}).items():
            c = GaussianRational.coerce(coeff)
            if c:
                clean[_check_exponent(int(exp))] = c
        self._terms = tuple(sorted(clean.items()))

    @classmethod
    def _trusted(cls, terms: dict[int, GaussianRational]) -> "QLaurent":
        obj = cls.__new__(cls)
        obj._terms = tuple(sorted((e, c) for e, c in terms.items() if c))
        return obj

    @classmethod
    def q(cls, k: int = 1) -> "QLaurent":
        return cls._trusted({_check_exponent(k): ONE})

    @classmethod
    def const(cls, value: GaussianRational | Rational) -> "QLaurent":
        return cls({0: value})

    @classmethod
    def zero(cls) -> "QLaurent":
        return cls._trusted({})

    @classmethod
    def one(cls) -> "QLaurent":
        return cls._trusted({0: ONE})

    @property
    def terms(self) -> dict[int, GaussianRational]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def degree_range(self) -> tuple[int, int] | None:
        if not self._terms:
            return None
        return self._terms[0][0], self._terms[-1][0]

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction, GaussianRational)):
            other = QLaurent.const(other)
        if not isinstance(other, QLaurent):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __add__(self, other: "QLaurent") -> "QLaurent":
        acc = dict(self._terms)
        for exp, c in other._terms:
            acc[exp] = acc.get(exp, ZERO) + c
        return QLaurent._trusted(acc)

    def __neg__(self) -> "QLaurent":
        return QLaurent._trusted({e: -c for e, c in self._terms})

    def __sub__(self, other: "QLaurent") -> "QLaurent":
        return self + (-other)

    def __mul__(self, other: "QLaurent") -> "QLaurent":
        acc: dict[int, GaussianRational] = {}
        for e1, c1 in self._terms:
            for e2, c2 in other._terms:
                exp = _check_exponent(e1 + e2)
                acc[exp] = acc.get(exp, ZERO) + c1 * c2
        return QLaurent._trusted(acc)

    def __pow__(self, n: int) -> "QLaurent":
        if n < 0:
            raise ValueError("QLaurent powers must be nonnegative")
        result = QLaurent.one()
        for _ in range(n):
            result = result * self
        return result

    def scale(self, c: GaussianRational | Rational) -> "QLaurent":
        c = GaussianRational.coerce(c)
        return QLaurent._trusted({e: v * c for e, v in self._terms})

    def shift(self, k: int) -> "QLaurent":
        """Multiply by q^k."""
        return QLaurent._trusted({_check_exponent(e + k): c for e, c in self._terms})

    def conjugate(self) -> "QLaurent":
        """Complex conjugation of coefficients; q is real, so exponents stay."""
        return QLaurent._trusted({e: c.conjugate() for e, c in self._terms})

    def substitute_inverse(self) -> "QLaurent":
        """The polynomial with q replaced by q^-1."""
        return QLaurent._trusted({-e: c for e, c in self._terms})

    def evaluate(self, q_val: float) -> complex:
        return ql_eval(self, q_val)

    def format(self) -> str:
        """Grammar-conformant text, lowest exponent first: ``1 - q^2``."""
        if not self._terms:
            return "0"
        pieces: list[str] = []
        for exp, c in self._terms:
            negative = not c.im and c.re < 0
            mag = -c if negative else c
            if exp == 0:
                body = mag.format()
            elif mag == ONE:
                body = f"q^{exp}"
            else:
                body = f"{mag.format()} . q^{exp}"
            if not pieces:
                pieces.append(f"-{body}" if negative else body)
            else:
                pieces.append(f"- {body}" if negative else f"+ {body}")
        return " ".join(pieces)

    def __repr__(self) -> str:
        return f"QLaurent({self.format()})"

    __str__ = format


def ql_sum(values: Iterable[QLaurent]) -> QLaurent:
    total = QLaurent.zero()
    for v in values:
        total = total + v
    return total


def ql_arith(a: QLaurent, b: QLaurent, kind: Literal["add", "mul", "conj"]) -> QLaurent:
    """Exact ring operation on Laurent polynomials; ``conj`` ignores ``b``."""
    if kind == "add":
        return a + b
    if kind == "mul":
        return a * b
    if kind == "conj":
        return a.conjugate()
    raise ValueError(f"Unknown arithmetic kind: {kind}")


def ql_eval(a: QLaurent, q_val: float) -> complex:
    """Evaluate at a concrete deformation parameter 0 < q_val < 1."""
    if not 0.0 < q_val < 1.0:
        raise DomainError(f"q must lie in (0,1), got {q_val}")
    total = 0j
    for exp, c in a._terms:
        total += complex(c) * q_val**exp
    return total
