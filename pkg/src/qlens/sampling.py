"""Seeded random samplers for the property checks.

All samplers draw from a numpy ``Generator`` passed in by the caller, so a fixed
seed reproduces every sample.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Optional

import numpy as np

from .coeff import GaussianRational, QLaurent
from .expr import (
    Adjoint,
    ExprTree,
    Generator,
    Monomial,
    Neg,
    NormalForm,
    Product,
    Scalar,
    Sum,
    normalize,
    parse,
)
from .groupoid import FinSupp, GElement, embed_normalform, fin_supp
from .models import KInvariant, RepParams
from .modules import ProjectionRep


def random_coefficient(rng: np.random.Generator, max_exponent: int = 2) -> QLaurent:
    """A small Gaussian-rational multiple of q^e."""
    re = Fraction(int(rng.integers(-3, 4)), int(rng.integers(1, 3)))
    im = Fraction(int(rng.integers(-1, 2)))
    if not re and not im:
        re = Fraction(1)
    exponent = int(rng.integers(-max_exponent, max_exponent + 1))
    return QLaurent({exponent: GaussianRational(re, im)})


def random_expression(
    rng: np.random.Generator, max_degree: int = 6, max_terms: int = 3
) -> ExprTree:
    """A random *-polynomial in c, d whose terms have at most ``max_degree`` letters."""
    terms: list[ExprTree] = []
    for _ in range(int(rng.integers(1, max_terms + 1))):
        factors: list[ExprTree] = [Scalar(random_coefficient(rng))]
        for _ in range(int(rng.integers(0, max_degree + 1))):
            letter: ExprTree = Generator("c" if rng.random() < 0.5 else "d")
            if rng.random() < 0.5:
                letter = Adjoint(letter)
            factors.append(letter)
        term: ExprTree = Product(tuple(factors)) if len(factors) > 1 else factors[0]
        terms.append(Neg(term) if rng.random() < 0.3 else term)
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


def random_zero_expression(rng: np.random.Generator, l: int, max_degree: int = 6) -> ExprTree:
    """x - NF(x), reparsed from its text: a tree whose normal form is exactly zero."""
    x = random_expression(rng, max_degree)
    return Sum((x, Neg(parse(normalize(x, l).format()))))


def random_monomial(
    rng: np.random.Generator, degree: Optional[int] = None, max_power: int = 2
) -> Monomial:
    j = int(rng.integers(0, max_power + 1))
    k = int(rng.integers(0, max_power + 1))
    if degree is None:
        i = int(rng.integers(0, max_power + 1))
        star = bool(i > 0 and rng.random() < 0.5)
        return Monomial(star, i, j, k)
    signed = degree + j - k
    return Monomial(signed < 0, abs(signed), j, k)


def random_normal_form(
    rng: np.random.Generator,
    l: int,
    degree: Optional[int] = None,
    terms: int = 3,
    max_power: int = 2,
) -> NormalForm:
    """A random normal form, homogeneous of ``degree`` when given."""
    acc: dict[Monomial, QLaurent] = {}
    for _ in range(terms):
        mono = random_monomial(rng, degree, max_power)
        acc[mono] = acc.get(mono, QLaurent.zero()) + random_coefficient(rng)
    return NormalForm(l, acc)


def random_fin_supp(
    rng: np.random.Generator, l: int, window: int = 4, points: int = 4, spread: int = 2
) -> FinSupp:
    """A finitely supported element with values at random valid morphisms."""
    values: dict[tuple[int, int, int, int], complex] = {}
    while len(values) < points:
        k = int(rng.integers(-spread, spread + 1))
        m = int(rng.integers(-spread, spread + 1))
        s = int(rng.integers(1, l + 1))
        p = int(rng.integers(max(0, -m), max(0, -m) + window))
        values[(k, m, s, p)] = complex(rng.normal(), rng.normal())
    return fin_supp(values, l)


def random_generator_element(
    rng: np.random.Generator, params: RepParams, degree: Optional[int] = None, terms: int = 2
) -> tuple[NormalForm, GElement]:
    """A random normal form and its image in the groupoid algebra."""
    nf = random_normal_form(rng, params.l, degree, terms)
    return nf, embed_normalform(nf, params)


def random_invariant(
    rng: np.random.Generator, l: int, rho_max: int = 3, t_max: int = 4
) -> KInvariant:
    rho = int(rng.integers(0, rho_max + 1))
    low = 0 if rho == 0 else -t_max
    t = tuple(int(x) for x in rng.integers(low, t_max + 1, size=l))
    return KInvariant(rho=rho, t=t)


def _random_unitary_matrix(rng: np.random.Generator, size: int) -> np.ndarray:
    z = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    qmat, rmat = np.linalg.qr(z)
    phases = np.diagonal(rmat) / np.abs(np.diagonal(rmat))
    return qmat * phases[None, :]


def random_unitary(
    r: int, l: int, N: int, rng: np.random.Generator, support: int = 4
) -> ProjectionRep:
    """u (x) V: a scalar unitary u times legwise unitaries V_s = I + K_s.

    K_s is supported on levels below ``support``.
    """
    u = _random_unitary_matrix(rng, r)
    K = np.zeros((l, N, N), dtype=complex)
    for s in range(l):
        K[s, :support, :support] = _random_unitary_matrix(rng, support) - np.eye(support)
    compact = u[:, :, None, None, None] * K[None, None, :, :, :]
    return ProjectionRep(u, compact)
