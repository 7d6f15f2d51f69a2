"""Truncated operator models of the representations pi_s^lambda and the merged representation.

Every operator is a ``scipy.sparse`` CSR matrix on one of three bases:

* ``Irrep(s, N)``: e_p, 0 <= p < N, one irreducible representation;
* ``Legs(l, N)``: e_(s,p), the direct sum over the legs s = 1..l, index (s-1)*N + p;
* ``Merged(l, W, N)``: e_(t,s,p) with -W <= t <= W, index ((t+W)*l + s-1)*N + p.

Truncation is a hard cutoff, so statements about these matrices are only made on
the edge-safe window (see :func:`edge_safe_equal`).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from .coeff import ql_eval
from .errors import DegenerateWindowError, LegError
from .expr import (
    Adjoint,
    ExprTree,
    Generator,
    Neg,
    NormalForm,
    Power,
    Product,
    Scalar,
    Sum,
    rewrite_rules,
)
from .models import RepParams

logger = logging.getLogger(__name__)

DENSE_SVD_LIMIT = 1500


# ---------------------------------------------------------------------------
# Bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Irrep:
    s: int
    N: int

    @property
    def dim(self) -> int:
        return self.N

    def levels(self) -> np.ndarray:
        return np.arange(self.N)

    def windows(self) -> np.ndarray:
        return np.zeros(self.N, dtype=int)


@dataclass(frozen=True)
class Legs:
    l: int
    N: int

    @property
    def dim(self) -> int:
        return self.l * self.N

    def index(self, s: int, p: int) -> int:
        return (s - 1) * self.N + p

    def levels(self) -> np.ndarray:
        return np.tile(np.arange(self.N), self.l)

    def windows(self) -> np.ndarray:
        return np.zeros(self.dim, dtype=int)


@dataclass(frozen=True)
class Merged:
    l: int
    W: int
    N: int

    @property
    def dim(self) -> int:
        return (2 * self.W + 1) * self.l * self.N

    def index(self, t: int, s: int, p: int) -> int:
        return ((t + self.W) * self.l + (s - 1)) * self.N + p

    def levels(self) -> np.ndarray:
        return np.tile(np.arange(self.N), (2 * self.W + 1) * self.l)

    def windows(self) -> np.ndarray:
        return np.repeat(np.arange(-self.W, self.W + 1), self.l * self.N)


Basis = Union[Irrep, Legs, Merged]


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TruncOp:
    """A truncated operator: basis descriptor plus sparse complex matrix."""

    basis: Basis
    matrix: sp.csr_matrix = field(repr=False)

    def __post_init__(self):
        dim = self.basis.dim
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"Matrix shape {self.matrix.shape} does not match dimension {dim}")

    @classmethod
    def from_entries(
        cls, basis: Basis, rows: list[int], cols: list[int], values: list[complex]
    ) -> "TruncOp":
        """Build from coordinate lists; duplicate coordinates are summed."""
        coords = (np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))
        matrix = sp.coo_matrix(
            (np.asarray(values, dtype=complex), coords),
            shape=(basis.dim, basis.dim),
        ).tocsr()
        return cls(basis, matrix)

    @classmethod
    def identity(cls, basis: Basis) -> "TruncOp":
        return cls(basis, sp.identity(basis.dim, dtype=complex, format="csr"))

    @classmethod
    def zero(cls, basis: Basis) -> "TruncOp":
        return cls(basis, sp.csr_matrix((basis.dim, basis.dim), dtype=complex))

    @classmethod
    def from_dense(cls, basis: Basis, array: np.ndarray) -> "TruncOp":
        return cls(basis, sp.csr_matrix(np.asarray(array, dtype=complex)))

    def _check(self, other: "TruncOp") -> None:
        if self.basis != other.basis:
            raise ValueError(f"Basis mismatch: {self.basis} vs {other.basis}")

    def adjoint(self) -> "TruncOp":
        return TruncOp(self.basis, self.matrix.conj().T.tocsr())

    def __matmul__(self, other: "TruncOp") -> "TruncOp":
        self._check(other)
        return TruncOp(self.basis, (self.matrix @ other.matrix).tocsr())

    def __add__(self, other: "TruncOp") -> "TruncOp":
        self._check(other)
        return TruncOp(self.basis, (self.matrix + other.matrix).tocsr())

    def __sub__(self, other: "TruncOp") -> "TruncOp":
        self._check(other)
        return TruncOp(self.basis, (self.matrix - other.matrix).tocsr())

    def __neg__(self) -> "TruncOp":
        return TruncOp(self.basis, -self.matrix)

    def scale(self, value: complex) -> "TruncOp":
        return TruncOp(self.basis, (self.matrix * complex(value)).tocsr())

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def entry(self, row: int, col: int) -> complex:
        return complex(self.matrix[row, col])


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def weight(p: int, s: int, q: float, l: int) -> float:
    """Weight w_{p,s} = prod_{m=1}^{l} sqrt(1 - q^{2(pl+s-m)}); zero at p = 0."""
    if p <= 0:
        return 0.0
    return math.prod(math.sqrt(1.0 - q ** (2 * (p * l + s - m))) for m in range(1, l + 1))


def eigenvalue(p: int, s: int, q: float, l: int) -> float:
    """Eigenvalue q^{pl+s} of pi_s^1(d) on e_p."""
    return q ** (p * l + s)


def _check_leg(s: int, l: int) -> None:
    if not 1 <= s <= l:
        raise LegError(f"Leg s={s} out of range 1..{l}")


def _leg_entries(g: str, s: int, params: RepParams, lam: complex) -> tuple[list, list, list]:
    """Coordinates of pi_s^lam(g) on a single leg, g in 'c' or 'd'."""
    N, q, l = params.N, params.q, params.l
    if g == "c":
        ps = range(1, N)
        return [p - 1 for p in ps], list(ps), [weight(p, s, q, l) for p in ps]
    if g == "d":
        ps = range(N)
        return list(ps), list(ps), [lam * eigenvalue(p, s, q, l) for p in ps]
    raise ValueError(f"Unknown generator {g!r}; expected 'c' or 'd'")


def irrep_generator(g: str, params: RepParams, s: int, lam: Optional[complex] = None) -> TruncOp:
    """pi_s^lambda(g) truncated to e_0..e_{N-1}; ``lam`` defaults to ``params.lam``."""
    _check_leg(s, params.l)
    rows, cols, vals = _leg_entries(g, s, params, params.lam if lam is None else lam)
    return TruncOp.from_entries(Irrep(s, params.N), rows, cols, vals)


def legs_generator(g: str, params: RepParams, lam: Optional[complex] = None) -> TruncOp:
    """The direct sum over legs of pi_s^lambda(g)."""
    basis = Legs(params.l, params.N)
    lam = params.lam if lam is None else lam
    rows: list[int] = []
    cols: list[int] = []
    vals: list[complex] = []
    for s in range(1, params.l + 1):
        r, c, v = _leg_entries(g, s, params, lam)
        offset = (s - 1) * params.N
        rows += [x + offset for x in r]
        cols += [x + offset for x in c]
        vals += v
    return TruncOp.from_entries(basis, rows, cols, vals)


def backward_shift(size: int) -> sp.csr_matrix:
    """Truncated backward shift e_i -> e_{i-1} (e_0 -> 0)."""
    return sp.eye(size, size, k=1, dtype=complex, format="csr")


def merged_generator(g: str, params: RepParams) -> TruncOp:
    """pi~(c) = id (x) (+)_s pi_s^1(c); pi~(d) = U (x) (+)_s pi_s^1(d), U shifting t down."""
    basis = Merged(params.l, params.W, params.N)
    legs = legs_generator(g, params, lam=1.0).matrix
    size = 2 * params.W + 1
    outer = sp.identity(size, dtype=complex, format="csr") if g == "c" else backward_shift(size)
    return TruncOp(basis, sp.kron(outer, legs, format="csr"))


# ---------------------------------------------------------------------------
# Evaluation targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IrrepTarget:
    s: int
    lam: Optional[complex] = None


@dataclass(frozen=True)
class LegsTarget:
    lam: Optional[complex] = None


@dataclass(frozen=True)
class MergedTarget:
    pass


Target = Union[IrrepTarget, LegsTarget, MergedTarget]
MERGED = MergedTarget()


def target_basis(target: Target, params: RepParams) -> Basis:
    if isinstance(target, IrrepTarget):
        return Irrep(target.s, params.N)
    if isinstance(target, LegsTarget):
        return Legs(params.l, params.N)
    return Merged(params.l, params.W, params.N)


def letter_operator(letter: str, target: Target, params: RepParams) -> TruncOp:
    """Operator of a single letter of ``c C d D`` (capitals are adjoints)."""
    g = letter.lower()
    if isinstance(target, IrrepTarget):
        op = irrep_generator(g, params, target.s, target.lam)
    elif isinstance(target, LegsTarget):
        op = legs_generator(g, params, target.lam)
    else:
        op = merged_generator(g, params)
    return op.adjoint() if letter.isupper() else op


class _WordEvaluator:
    """Products of letter operators with memoised prefixes."""

    def __init__(self, target: Target, params: RepParams):
        self.target = target
        self.params = params
        self.basis = target_basis(target, params)
        self._letters: dict[str, TruncOp] = {}
        self._words: dict[str, TruncOp] = {"": TruncOp.identity(self.basis)}

    def letter(self, x: str) -> TruncOp:
        if x not in self._letters:
            self._letters[x] = letter_operator(x, self.target, self.params)
        return self._letters[x]

    def __call__(self, word: str) -> TruncOp:
        if word not in self._words:
            self._words[word] = self(word[:-1]) @ self.letter(word[-1])
        return self._words[word]


def rep_normalform(n: NormalForm, target: Target, params: RepParams) -> TruncOp:
    """Evaluate a normal form in a truncated representation."""
    if n.l != params.l:
        raise ValueError(f"Normal form has l={n.l}, parameters have l={params.l}")
    words = _WordEvaluator(target, params)
    result = TruncOp.zero(words.basis)
    for mono, coeff in n.terms.items():
        result = result + words(mono.word()).scale(ql_eval(coeff, params.q))
    return result


def rep_expr(e: ExprTree, target: Target, params: RepParams) -> TruncOp:
    """Evaluate an expression tree directly, as matrix products in tree order."""
    words = _WordEvaluator(target, params)

    def walk(node: ExprTree) -> TruncOp:
        if isinstance(node, Scalar):
            return TruncOp.identity(words.basis).scale(ql_eval(node.value, params.q))
        if isinstance(node, Generator):
            return words.letter(node.name)
        if isinstance(node, Adjoint):
            return walk(node.arg).adjoint()
        if isinstance(node, Neg):
            return -walk(node.arg)
        if isinstance(node, Product):
            result = walk(node.factors[0])
            for f in node.factors[1:]:
                result = result @ walk(f)
            return result
        if isinstance(node, Sum):
            result = walk(node.terms[0])
            for t in node.terms[1:]:
                result = result + walk(t)
            return result
        if isinstance(node, Power):
            base = walk(node.base)
            result = TruncOp.identity(words.basis)
            for _ in range(node.exponent):
                result = result @ base
            return result
        raise TypeError(f"Not an expression node: {node!r}")

    return walk(e)


# ---------------------------------------------------------------------------
# Edge-safe comparison and norms
# ---------------------------------------------------------------------------


def safe_indices(basis: Basis, margin: int) -> np.ndarray:
    """Indices with p < N - margin (and |t| < W - margin on the merged basis)."""
    if margin < 0:
        raise ValueError(f"margin must be nonnegative, got {margin}")
    if margin >= basis.N:
        raise DegenerateWindowError(f"margin {margin} >= N = {basis.N} leaves no safe window")
    mask = basis.levels() < basis.N - margin
    if isinstance(basis, Merged):
        if margin >= basis.W:
            raise DegenerateWindowError(f"margin {margin} >= W = {basis.W} leaves no safe window")
        mask &= np.abs(basis.windows()) < basis.W - margin
    return np.flatnonzero(mask)


def safe_block(A: TruncOp, margin: int) -> sp.csr_matrix:
    idx = safe_indices(A.basis, margin)
    return A.matrix[idx][:, idx]


def max_entry(matrix: sp.spmatrix) -> float:
    if matrix.nnz == 0:
        return 0.0
    return float(np.abs(matrix.data).max())


def edge_safe_deviation(A: TruncOp, B: TruncOp, margin: int) -> float:
    """Largest entrywise difference of A and B on the edge-safe window."""
    A._check(B)
    return max_entry(safe_block(A - B, margin))


def edge_safe_equal(A: TruncOp, B: TruncOp, margin: int, tol: float) -> bool:
    return edge_safe_deviation(A, B, margin) < tol


def _spectral_norm(matrix: sp.spmatrix) -> float:
    if matrix.nnz == 0:
        return 0.0
    if max(matrix.shape) <= DENSE_SVD_LIMIT or min(matrix.shape) < 3:
        return float(np.linalg.norm(matrix.toarray(), 2))
    return float(svds(matrix.astype(complex), k=1, return_singular_vectors=False)[0])


def op_norm(A: TruncOp) -> float:
    """Largest singular value."""
    return _spectral_norm(A.matrix)


def norm_below(A: TruncOp, margin: int, tol: float) -> bool:
    """Whether the edge-safe block of A has operator norm below tol."""
    block = safe_block(A, margin)
    if max_entry(block) >= tol:
        return False
    if block.nnz == 0 or math.sqrt(float(np.sum(np.abs(block.data) ** 2))) < tol:
        return True
    return _spectral_norm(block) < tol


def safe_norm(A: TruncOp, margin: int) -> float:
    return _spectral_norm(safe_block(A, margin))


# ---------------------------------------------------------------------------
# Relation checks
# ---------------------------------------------------------------------------


def relation_checks(
    params: RepParams, target: Target, margin: Optional[int] = None, tol: float = 1e-10
) -> dict[str, float]:
    """Edge-safe deviation of each rewrite rule of weight ``params.l`` in ``target``.

    With ``margin=None`` each rule is checked with margin equal to its longest
    word plus one.
    """
    words = _WordEvaluator(target, params)
    deviations: dict[str, float] = {}
    for lhs, replacements in rewrite_rules(params.l).items():
        rhs = TruncOp.zero(words.basis)
        for coeff, word in replacements:
            rhs = rhs + words(word).scale(ql_eval(coeff, params.q))
        rule_margin = margin
        if rule_margin is None:
            rule_margin = max(len(lhs), *(len(w) for _, w in replacements)) + 1
        deviations[lhs] = edge_safe_deviation(words(lhs), rhs, rule_margin)
    failing = [k for k, v in deviations.items() if v >= tol]
    if failing:
        logger.warning("Relations %s fail in %s at q=%s, l=%s", failing, target, params.q, params.l)
    return deviations


def normality_deviation(params: RepParams, target: Target, margin: int = 2) -> float:
    """Edge-safe size of the commutator [d, d*]."""
    d = letter_operator("d", target, params)
    return edge_safe_deviation(d @ d.adjoint(), d.adjoint() @ d, margin)


def compact_tail(params: RepParams, level: Optional[int] = None) -> tuple[float, float]:
    """Norm of pi~(c) - id (x) (+)S restricted to levels p >= P, and the bound 2 q^{2(Pl+1-l)}.

    ``level`` defaults to N/2.
    """
    P = params.N // 2 if level is None else level
    basis = Legs(params.l, params.N)
    legs_identity = sp.identity(params.l, dtype=complex, format="csr")
    shift = sp.kron(legs_identity, backward_shift(params.N), format="csr")
    # pi~(c) is id (x) legs(c), so the window factor does not change the norm
    diff = legs_generator("c", params, lam=1.0).matrix - shift
    idx = np.flatnonzero(basis.levels() >= P)
    norm = _spectral_norm(diff[idx][:, idx])
    bound = 2 * params.q ** (2 * (P * params.l + 1 - params.l))
    logger.debug("compact tail at P=%d: %.3e (bound %.3e)", P, norm, bound)
    return norm, bound


def scaling_deviation(params: RepParams, lam: complex) -> tuple[float, float]:
    """Entrywise |pi^lam(c) - pi^1(c)| and |pi^lam(d) - lam pi^1(d)| over all legs (exact zero)."""
    base_c = legs_generator("c", params, 1.0).matrix
    dev_c = max_entry(legs_generator("c", params, lam).matrix - base_c)
    dev_d = max_entry(
        legs_generator("d", params, lam).matrix - legs_generator("d", params, 1.0).matrix * lam
    )
    return dev_c, dev_d

