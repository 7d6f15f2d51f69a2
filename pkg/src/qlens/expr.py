"""Expressions in the generators c, d of O(L_q(l;1,l)) and their PBW normal forms.

Grammar (whitespace insignificant)::

    sum     := term (('+' | '-') term)*
    term    := '-' term | product
    product := postfix ('.' postfix)*
    postfix := atom ('*' | '^' INT)*
    atom    := 'c' | 'd' | 'i' | 'q' ['^' SIGNED_INT] | INT ['/' INT] | '(' sum ')'

Normal forms live in the basis {c^i d^j d*^k} u {c*^i d^j d*^k : i >= 1}. Words
over the alphabet ``c C d D`` (capitals are adjoints) are reduced with the
rewrite system below; irreducible words are exactly the basis monomials.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, NamedTuple, Union

import numpy as np

from .coeff import I_UNIT, ONE, QLaurent
from .errors import ExprSyntaxError

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Syntax tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scalar:
    value: QLaurent


@dataclass(frozen=True)
class Generator:
    name: str  # "c" or "d"


@dataclass(frozen=True)
class Adjoint:
    arg: "ExprTree"


@dataclass(frozen=True)
class Neg:
    arg: "ExprTree"


@dataclass(frozen=True)
class Product:
    factors: tuple["ExprTree", ...]


@dataclass(frozen=True)
class Sum:
    terms: tuple["ExprTree", ...]


@dataclass(frozen=True)
class Power:
    base: "ExprTree"
    exponent: int


ExprTree = Union[Scalar, Generator, Adjoint, Neg, Product, Sum, Power]

_TOKEN = re.compile(r"\s*(?:(\d+)|(\S))")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, int]] = []
        for match in _TOKEN.finditer(text):
            if match.group(1) is not None:
                self.tokens.append((match.group(1), match.start(1)))
            elif match.group(2) is not None:
                self.tokens.append((match.group(2), match.start(2)))
        self.pos = 0

    def error(self, message: str) -> ExprSyntaxError:
        where = self.tokens[self.pos][1] if self.pos < len(self.tokens) else len(self.text)
        return ExprSyntaxError(message, self.text, where)

    def peek(self) -> str | None:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if tok is None:
            raise self.error("Unexpected end of input")
        if expected is not None and tok != expected:
            raise self.error(f"Expected '{expected}', found '{tok}'")
        self.pos += 1
        return tok

    def integer(self, signed: bool = False) -> int:
        sign = 1
        if signed and self.peek() == "-":
            self.take()
            sign = -1
        tok = self.peek()
        if tok is None or not tok.isdigit():
            raise self.error("Expected an integer")
        self.take()
        return sign * int(tok)

    def parse(self) -> ExprTree:
        if not self.tokens:
            raise self.error("Empty expression")
        tree = self.sum()
        if self.peek() is not None:
            raise self.error(f"Unexpected token '{self.peek()}'")
        return tree

    def sum(self) -> ExprTree:
        terms = [self.term()]
        while self.peek() in ("+", "-"):
            op = self.take()
            term = self.term()
            terms.append(Neg(term) if op == "-" else term)
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> ExprTree:
        if self.peek() == "-":
            self.take()
            return Neg(self.term())
        return self.product()

    def product(self) -> ExprTree:
        factors = [self.postfix()]
        while self.peek() == ".":
            self.take()
            factors.append(self.postfix())
        return factors[0] if len(factors) == 1 else Product(tuple(factors))

    def postfix(self) -> ExprTree:
        node = self.atom()
        while self.peek() in ("*", "^"):
            if self.take() == "*":
                node = Adjoint(node)
            else:
                node = Power(node, self.integer())
        return node

    def atom(self) -> ExprTree:
        tok = self.peek()
        if tok is None:
            raise self.error("Unexpected end of input")
        if tok in ("c", "d"):
            self.take()
            return Generator(tok)
        if tok == "i":
            self.take()
            return Scalar(QLaurent.const(I_UNIT))
        if tok == "q":
            self.take()
            exp = 1
            if self.peek() == "^":
                self.take()
                exp = self.integer(signed=True)
            return Scalar(QLaurent.q(exp))
        if tok.isdigit():
            num = self.integer()
            den = 1
            if self.peek() == "/":
                self.take()
                den = self.integer()
                if den == 0:
                    raise self.error("Zero denominator")
            return Scalar(QLaurent.const(Fraction(num, den)))
        if tok == "(":
            self.take()
            inner = self.sum()
            self.take(")")
            return inner
        raise self.error(f"Unexpected token '{tok}'")


def parse(text: str) -> ExprTree:
    """Parse expression text into a syntax tree; raises :class:`ExprSyntaxError`."""
    return _Parser(text).parse()


def shift_degree(e: ExprTree) -> int:
    """Longest generator word the tree can produce (edge-safety margin for truncations)."""
    if isinstance(e, Scalar):
        return 0
    if isinstance(e, Generator):
        return 1
    if isinstance(e, (Adjoint, Neg)):
        return shift_degree(e.arg)
    if isinstance(e, Product):
        return sum(shift_degree(f) for f in e.factors)
    if isinstance(e, Sum):
        return max(shift_degree(t) for t in e.terms)
    if isinstance(e, Power):
        return e.exponent * shift_degree(e.base)
    raise TypeError(f"Not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Rewriting
# ---------------------------------------------------------------------------

_ADJOINT_LETTER = {"c": "C", "C": "c", "d": "D", "D": "d"}


def _poly_in_a(factors: list[QLaurent]) -> list[QLaurent]:
    """Coefficients of prod_m (1 - f_m a) as a polynomial in a."""
    coeffs = [QLaurent.one()]
    for f in factors:
        nxt = [QLaurent.zero() for _ in range(len(coeffs) + 1)]
        for k, c in enumerate(coeffs):
            nxt[k] = nxt[k] + c
            nxt[k + 1] = nxt[k + 1] - c * f
        coeffs = nxt
    return coeffs


@lru_cache(maxsize=None)
def rewrite_rules(l: int) -> dict[str, tuple[tuple[QLaurent, str], ...]]:
    """The rewrite system R for weight l, keyed by the offending letter pair."""
    cc_star = _poly_in_a([QLaurent.q(2 * m) for m in range(l)])
    c_star_c = _poly_in_a([QLaurent.q(-2 * m) for m in range(1, l + 1)])
    return {
        "dc": ((QLaurent.q(-l), "cd"),),
        "Dc": ((QLaurent.q(-l), "cD"),),
        "dC": ((QLaurent.q(l), "Cd"),),
        "DC": ((QLaurent.q(l), "CD"),),
        "Dd": ((QLaurent.one(), "dD"),),
        "cC": tuple((c, "d" * k + "D" * k) for k, c in enumerate(cc_star) if c),
        "Cc": tuple((c, "d" * k + "D" * k) for k, c in enumerate(c_star_c) if c),
    }


def _redexes(word: str) -> Iterator[int]:
    for pos in range(len(word) - 1):
        if word[pos : pos + 2] in ("dc", "Dc", "dC", "DC", "Dd", "cC", "Cc"):
            yield pos


@lru_cache(maxsize=200_000)
def _reduce_leftmost(word: str, l: int) -> tuple[tuple[str, QLaurent], ...]:
    pos = next(_redexes(word), None)
    if pos is None:
        return ((word, QLaurent.one()),)
    acc: dict[str, QLaurent] = {}
    for coeff, replacement in rewrite_rules(l)[word[pos : pos + 2]]:
        rewritten = word[:pos] + replacement + word[pos + 2 :]
        for w, c in _reduce_leftmost(rewritten, l):
            acc[w] = acc.get(w, QLaurent.zero()) + coeff * c
    return tuple((w, c) for w, c in acc.items() if c)


def _reduce_random(word: str, l: int, rng: np.random.Generator) -> dict[str, QLaurent]:
    rules = rewrite_rules(l)
    acc: dict[str, QLaurent] = {}
    stack: list[tuple[str, QLaurent]] = [(word, QLaurent.one())]
    while stack:
        w, coeff = stack.pop()
        positions = list(_redexes(w))
        if not positions:
            acc[w] = acc.get(w, QLaurent.zero()) + coeff
            continue
        pos = positions[int(rng.integers(len(positions)))]
        for c, replacement in rules[w[pos : pos + 2]]:
            stack.append((w[:pos] + replacement + w[pos + 2 :], coeff * c))
    return {w: c for w, c in acc.items() if c}


def normalize_word(
    word: str, l: int, rng: np.random.Generator | None = None
) -> dict[str, QLaurent]:
    """Reduce a word over ``c C d D`` to a combination of irreducible words.

    Without ``rng`` the leftmost redex is always rewritten (memoised). With an
    ``rng`` a random redex is chosen at each step.
    """
    if l < 1:
        raise ValueError(f"l must be a positive integer, got {l}")
    if rng is not None:
        return _reduce_random(word, l, rng)
    return dict(_reduce_leftmost(word, l))


def adjoint_word(word: str) -> str:
    return "".join(_ADJOINT_LETTER[x] for x in reversed(word))


# ---------------------------------------------------------------------------
# Normal forms
# ---------------------------------------------------------------------------


class Monomial(NamedTuple):
    """c^i d^j d*^k, or c*^i d^j d*^k when ``star`` (then i >= 1)."""

    star: bool
    i: int
    j: int
    k: int

    @classmethod
    def from_word(cls, word: str) -> "Monomial":
        i_c, i_s = word.count("c"), word.count("C")
        mono = cls(i_s > 0, i_c + i_s, word.count("d"), word.count("D"))
        if mono.word() != word:
            raise ValueError(f"Word {word!r} is not in PBW order")
        return mono

    def word(self) -> str:
        return ("C" if self.star else "c") * self.i + "d" * self.j + "D" * self.k

    @property
    def degree(self) -> int:
        return (-self.i if self.star else self.i) - self.j + self.k

    def format(self) -> str:
        parts = []
        for name, power in (("c*" if self.star else "c", self.i), ("d", self.j), ("d*", self.k)):
            if power == 1:
                parts.append(name)
            elif power > 1:
                parts.append(f"{name}^{power}")
        return " . ".join(parts)


UNIT_MONOMIAL = Monomial(False, 0, 0, 0)


class NormalForm:
    """Canonical element of O(L_q(l;1,l)): a finite map from PBW monomials to QLaurent."""

    __slots__ = ("l", "_terms")

    def __init__(self, l: int, terms: dict[Monomial, QLaurent] | None = None):
        if l < 1:
            raise ValueError(f"l must be a positive integer, got {l}")
        self.l = l
        self._terms = {m: c for m, c in (terms or {}).items() if c}

    @classmethod
    def scalar(cls, l: int, value: QLaurent) -> "NormalForm":
        return cls(l, {UNIT_MONOMIAL: value})

    @classmethod
    def one(cls, l: int) -> "NormalForm":
        return cls.scalar(l, QLaurent.one())

    @classmethod
    def generator(cls, l: int, name: str) -> "NormalForm":
        word = {"c": "c", "d": "d", "c*": "C", "d*": "D"}[name]
        return cls(l, {Monomial.from_word(word): QLaurent.one()})

    @classmethod
    def from_words(cls, l: int, words: dict[str, QLaurent]) -> "NormalForm":
        acc: dict[Monomial, QLaurent] = {}
        for word, coeff in words.items():
            for w, c in normalize_word(word, l).items():
                mono = Monomial.from_word(w)
                acc[mono] = acc.get(mono, QLaurent.zero()) + coeff * c
        return cls(l, acc)

    @property
    def terms(self) -> dict[Monomial, QLaurent]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def _check(self, other: "NormalForm") -> None:
        if self.l != other.l:
            raise ValueError(f"Normal forms for different weights: l={self.l} vs l={other.l}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NormalForm):
            return NotImplemented
        return self.l == other.l and self._terms == other._terms

    def __add__(self, other: "NormalForm") -> "NormalForm":
        self._check(other)
        acc = dict(self._terms)
        for m, c in other._terms.items():
            acc[m] = acc.get(m, QLaurent.zero()) + c
        return NormalForm(self.l, acc)

    def __neg__(self) -> "NormalForm":
        return NormalForm(self.l, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other: "NormalForm") -> "NormalForm":
        return self + (-other)

    def scale(self, value: QLaurent) -> "NormalForm":
        return NormalForm(self.l, {m: c * value for m, c in self._terms.items()})

    def __mul__(self, other: "NormalForm") -> "NormalForm":
        self._check(other)
        words: dict[str, QLaurent] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                w = m1.word() + m2.word()
                words[w] = words.get(w, QLaurent.zero()) + c1 * c2
        return NormalForm.from_words(self.l, words)

    def __pow__(self, n: int) -> "NormalForm":
        if n < 0:
            raise ValueError("Normal form powers must be nonnegative")
        result = NormalForm.one(self.l)
        for _ in range(n):
            result = result * self
        return result

    def adjoint(self) -> "NormalForm":
        words = {adjoint_word(m.word()): c.conjugate() for m, c in self._terms.items()}
        return NormalForm.from_words(self.l, words)

    def degree_decompose(self) -> dict[int, "NormalForm"]:
        parts: dict[int, dict[Monomial, QLaurent]] = {}
        for m, c in self._terms.items():
            parts.setdefault(m.degree, {})[m] = c
        return {deg: NormalForm(self.l, terms) for deg, terms in sorted(parts.items())}

    def homogeneous_degree(self) -> int | None:
        degrees = {m.degree for m in self._terms}
        return degrees.pop() if len(degrees) == 1 else None

    def format(self) -> str:
        if not self._terms:
            return "0"
        pieces: list[str] = []
        for mono in sorted(self._terms, key=lambda m: (m.star, m.i, m.j, m.k)):
            coeff = self._terms[mono]
            negative = False
            if len(coeff.terms) == 1:
                (exp, c), = coeff.terms.items()
                if not c.im and c.re < 0:
                    negative, coeff = True, -coeff
                cpart = coeff.format()
                is_one = exp == 0 and c in (ONE, -ONE)
            else:
                cpart = f"({coeff.format()})"
                is_one = False
            mpart = mono.format()
            if not mpart:
                body = cpart
            elif is_one:
                body = mpart
            else:
                body = f"{cpart} . {mpart}"
            if not pieces:
                pieces.append(f"-{body}" if negative else body)
            else:
                pieces.append(f"- {body}" if negative else f"+ {body}")
        return " ".join(pieces)

    def __repr__(self) -> str:
        return f"NormalForm(l={self.l}, {self.format()})"

    __str__ = format


def _evaluate(e: ExprTree, l: int) -> NormalForm:
    if isinstance(e, Scalar):
        return NormalForm.scalar(l, e.value)
    if isinstance(e, Generator):
        return NormalForm.generator(l, e.name)
    if isinstance(e, Adjoint):
        return _evaluate(e.arg, l).adjoint()
    if isinstance(e, Neg):
        return -_evaluate(e.arg, l)
    if isinstance(e, Product):
        result = _evaluate(e.factors[0], l)
        for f in e.factors[1:]:
            result = result * _evaluate(f, l)
        return result
    if isinstance(e, Sum):
        result = _evaluate(e.terms[0], l)
        for t in e.terms[1:]:
            result = result + _evaluate(t, l)
        return result
    if isinstance(e, Power):
        return _evaluate(e.base, l) ** e.exponent
    raise TypeError(f"Not an expression node: {e!r}")


def normalize(e: ExprTree | str, l: int) -> NormalForm:
    """Reduce an expression (tree or text) to its PBW normal form for weight l."""
    if l < 1:
        raise ValueError(f"l must be a positive integer, got {l}")
    if isinstance(e, str):
        e = parse(e)
    nf = _evaluate(e, l)
    logger.debug("normalize: %d terms, cache %s", len(nf.terms), _reduce_leftmost.cache_info())
    return nf


def adjoint_nf(n: NormalForm) -> NormalForm:
    return n.adjoint()


def degree_decompose(n: NormalForm) -> dict[int, NormalForm]:
    """Split into homogeneous parts (deg c = 1, deg d = -1); empty for zero."""
    return n.degree_decompose()


def wp_generators(l: int) -> tuple[NormalForm, NormalForm]:
    """The generators b = cd and a = dd* of the degree-zero part O(WP_q(1,l))."""
    return normalize("c . d", l), normalize("d . d*", l)

