"""Symbol map, characters and the Toeplitz-loop description of C(L_q(l;1,l)).

Restricting an element to the fiber at infinity gives a function on Z, that is a
Laurent polynomial on the circle. The orientation is z^{-m} for the layer
(0, m), which makes the symbol of c the identity function of the circle.
"""
from __future__ import annotations

import logging
from typing import Mapping, Optional

import numpy as np

from .errors import DegenerateWindowError, DomainError, LegError, ToeplitzError
from .groupoid import GElement, chi_element, combine
from .models import RepParams
from .rep import Irrep, TruncOp

logger = logging.getLogger(__name__)

UNIT_TOL = 1e-12


def _check_unit(z: complex, name: str) -> None:
    if abs(abs(z) - 1.0) > UNIT_TOL:
        raise DomainError(f"{name} must have modulus 1, got |{z}| = {abs(z)}")


class CircleLaurent:
    """Finite Fourier series sum_n a_n z^n; zero coefficients are never stored."""

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Optional[Mapping[int, complex]] = None):
        self._coeffs = {int(n): complex(a) for n, a in (coeffs or {}).items() if a != 0}

    @classmethod
    def monomial(cls, n: int, a: complex = 1.0) -> "CircleLaurent":
        return cls({n: a})

    @property
    def coeffs(self) -> dict[int, complex]:
        return dict(sorted(self._coeffs.items()))

    def is_zero(self) -> bool:
        return not self._coeffs

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CircleLaurent):
            return NotImplemented
        return self._coeffs == other._coeffs

    def __add__(self, other: "CircleLaurent") -> "CircleLaurent":
        acc = dict(self._coeffs)
        for n, a in other._coeffs.items():
            acc[n] = acc.get(n, 0j) + a
        return CircleLaurent(acc)

    def __neg__(self) -> "CircleLaurent":
        return CircleLaurent({n: -a for n, a in self._coeffs.items()})

    def __sub__(self, other: "CircleLaurent") -> "CircleLaurent":
        return self + (-other)

    def __mul__(self, other: "CircleLaurent") -> "CircleLaurent":
        acc: dict[int, complex] = {}
        for n1, a1 in self._coeffs.items():
            for n2, a2 in other._coeffs.items():
                acc[n1 + n2] = acc.get(n1 + n2, 0j) + a1 * a2
        return CircleLaurent(acc)

    def scale(self, z: complex) -> "CircleLaurent":
        return CircleLaurent({n: z * a for n, a in self._coeffs.items()})

    def evaluate(self, z: complex) -> complex:
        return sum((a * z**n for n, a in self._coeffs.items()), 0j)

    def distance(self, other: "CircleLaurent") -> float:
        """Largest coefficient difference."""
        diff = (self - other)._coeffs
        return max((abs(a) for a in diff.values()), default=0.0)

    def close_to(self, other: "CircleLaurent", tol: float) -> bool:
        return self.distance(other) <= tol

    def to_json(self) -> dict[str, list[float]]:
        return {str(n): [a.real, a.imag] for n, a in sorted(self._coeffs.items())}

    def __repr__(self) -> str:
        terms = " + ".join(f"({a:.6g}) z^{n}" for n, a in sorted(self._coeffs.items()))
        return f"CircleLaurent({terms or '0'})"


def symbol(f: GElement) -> CircleLaurent:
    """sigma(f)(z) = sum_m f((0, m, oo)) z^{-m}."""
    return CircleLaurent({-m: layer.tail for (k, m), layer in f.layers.items() if k == 0})


def character_pi0(f: GElement, mu: complex) -> complex:
    """The one-dimensional representation pi_0^mu, which factors through the symbol."""
    _check_unit(mu, "mu")
    return symbol(f).evaluate(mu)


def in_ideal(f: GElement, tol: float = 0.0) -> bool:
    """Whether f vanishes at infinity, i.e. lies in C*(F restricted to the finite fibers)."""
    return all(abs(layer.tail) <= tol for layer in f.layers.values())


def lift(g: CircleLaurent, l: int) -> GElement:
    """sum_n g_n chi_{C_n}, a preimage of g under the symbol map."""
    items = [(a, chi_element(n, l)) for n, a in g.coeffs.items()]
    if not items:
        return combine([(0, chi_element(0, l))])
    return combine(items)


def eval_loop(f: GElement, lam: complex, s: int, N: int) -> TruncOp:
    """Value at lambda of the Toeplitz loop a_s on leg s.

    Entry (p+m, p) is sum_k lambda^{-k} f((k,m,p)_s).
    """
    _check_unit(lam, "lambda")
    if not 1 <= s <= f.l:
        raise LegError(f"Leg s={s} out of range 1..{f.l}")
    rows: list[int] = []
    cols: list[int] = []
    vals: list[complex] = []
    for (k, m), layer in f.layers.items():
        phase = lam ** (-k)
        for p in range(max(0, -m), min(N, N - m)):
            v = layer.value(s, p)
            if v != 0:
                rows.append(p + m)
                cols.append(p)
                vals.append(phase * v)
    return TruncOp.from_entries(Irrep(s, N), rows, cols, vals)


def toeplitz_symbol(M: TruncOp, band: int, margin: int, tol: float = 1e-6) -> CircleLaurent:
    """Read the symbol of an asymptotically Toeplitz matrix from its mid-range diagonals.

    The coefficient of z^{-j} is the mean of M[p+j, p] over the window
    max(N/2, band) <= p < N - margin - band.
    Raises :class:`ToeplitzError` when a diagonal varies by more than ``tol`` there.
    """
    N = M.basis.dim
    if band < 0 or margin < 0:
        raise ValueError("band and margin must be nonnegative")
    if band + margin >= N:
        raise DegenerateWindowError(f"band {band} + margin {margin} >= N = {N}")
    start, stop = max(N // 2, band), N - margin - band
    if stop <= start:
        raise DegenerateWindowError(f"No mid-range window for N={N}, band={band}, margin={margin}")
    dense = M.to_dense()
    ps = np.arange(start, stop)
    coeffs: dict[int, complex] = {}
    worst = 0.0
    for j in range(-band, band + 1):
        diagonal = dense[ps + j, ps]
        mean = complex(diagonal.mean())
        worst = max(worst, float(np.abs(diagonal - mean).max()))
        coeffs[-j] = mean
    if worst > tol:
        raise ToeplitzError(
            f"Matrix is not Toeplitz on p in [{start}, {stop}): diagonal deviation {worst:.3e}",
            max_deviation=worst,
        )
    return CircleLaurent(coeffs)


def truncation_bound(q: float, l: int, N: int) -> float:
    """Declared accuracy 2 q^{(N/2)l - l} of symbols read at truncation N."""
    return 2 * q ** ((N // 2) * l - l)


def matched_symbols(
    f: GElement, lam: complex, params: RepParams, band: int, margin: Optional[int] = None
) -> list[CircleLaurent]:
    """Toeplitz symbols of eval_loop(f, lam, s) for s = 1..l."""
    margin = band + 1 if margin is None else margin
    tol = max(truncation_bound(params.q, params.l, params.N), 1e-9)
    return [
        toeplitz_symbol(eval_loop(f, lam, s, params.N), band, margin, tol)
        for s in range(1, params.l + 1)
    ]


def symbol_band(f: GElement) -> int:
    """Widest diagonal of f, the band needed to read its symbol back."""
    return max((abs(m) for _, m in f.layers), default=0)

