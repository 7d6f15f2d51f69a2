"""The groupoid F of the quantum lens space and its convolution *-algebra.

Morphisms are triples (k, m, p)_s over the leg s, plus the group Z of morphisms
(0, m, oo) at the fixed point. (k, m, p)_s has source p and range p + m; two
morphisms compose exactly when the source of the first is the range of the second.

Elements are grouped into *layers*, one per pair (k, m). A layer is a function of
(s, p) together with its limit at infinity and a decay certificate, so that
convolution is a finite sum over layer pairs and stays lazy.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Optional, Union

import numpy as np

from .coeff import ql_eval
from .errors import CompositionError, GradingError, InvalidMorphismError
from .expr import NormalForm
from .models import RepParams
from .rep import Legs, Merged, TruncOp, eigenvalue, weight

logger = logging.getLogger(__name__)

LAZY_CACHE_SIZE = 8192


# ---------------------------------------------------------------------------
# Morphisms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Finite:
    s: int
    p: int


@dataclass(frozen=True)
class Infinity:
    def __repr__(self) -> str:
        return "oo"


INFINITY = Infinity()
Fiber = Union[Finite, Infinity]


@dataclass(frozen=True)
class Morphism:
    k: int
    m: int
    fiber: Fiber

    @classmethod
    def at(cls, k: int, m: int, s: int, p: int) -> "Morphism":
        return cls(k, m, Finite(s, p))

    @classmethod
    def at_infinity(cls, m: int, k: int = 0) -> "Morphism":
        return cls(k, m, INFINITY)

    @property
    def is_finite(self) -> bool:
        return isinstance(self.fiber, Finite)

    def problem(self, l: Optional[int] = None) -> Optional[str]:
        if isinstance(self.fiber, Infinity):
            return None if self.k == 0 else f"k must be 0 at infinity, got k={self.k}"
        s, p = self.fiber.s, self.fiber.p
        if p < 0:
            return f"p must be nonnegative, got p={p}"
        if p + self.m < 0:
            return f"range p+m={p + self.m} leaves the nonnegative integers"
        if s < 1 or (l is not None and s > l):
            return f"leg s={s} out of range" + (f" 1..{l}" if l is not None else "")
        return None

    def is_valid(self, l: Optional[int] = None) -> bool:
        return self.problem(l) is None

    def validate(self, l: Optional[int] = None) -> "Morphism":
        problem = self.problem(l)
        if problem is not None:
            raise InvalidMorphismError(f"Invalid morphism {self}: {problem}")
        return self

    @property
    def source(self) -> Fiber:
        return self.fiber

    @property
    def range(self) -> Fiber:
        if isinstance(self.fiber, Infinity):
            return INFINITY
        return Finite(self.fiber.s, self.fiber.p + self.m)

    @property
    def is_unit(self) -> bool:
        return self.k == 0 and self.m == 0

    @property
    def degree(self) -> int:
        return self.k - self.m

    def __str__(self) -> str:
        if isinstance(self.fiber, Infinity):
            return f"({self.k},{self.m},oo)"
        return f"({self.k},{self.m},{self.fiber.p})_{self.fiber.s}"


def compose(g1: Morphism, g2: Morphism) -> Morphism:
    """g1 after g2; defined when the source of g1 is the range of g2."""
    g1.validate()
    g2.validate()
    if g1.source != g2.range:
        raise CompositionError(f"{g1} and {g2} are not composable: {g1.source} != {g2.range}")
    return Morphism(g1.k + g2.k, g1.m + g2.m, g2.fiber)


def inverse(g: Morphism) -> Morphism:
    g.validate()
    return Morphism(-g.k, -g.m, g.range)


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Decay:
    """Certificate |value(s,p) - tail| <= C r^p for all valid p."""

    C: float
    r: float

    def __post_init__(self):
        if self.C < 0 or not 0 < self.r <= 1:
            raise ValueError(f"Invalid decay certificate C={self.C}, r={self.r}")

    def bound(self, p: int) -> float:
        return self.C * self.r**p


EXACT = Decay(0.0, 0.5)

ValueFn = Callable[[int, int], complex]


class Layer:
    """The values f(k, m, (s, p)) of an element on one layer (k, m).

    Below ``horizon`` the ``exceptional`` map overrides ``tail_fn``. A layer with no
    ``tail_fn`` is finitely supported.
    """

    __slots__ = ("k", "m", "exceptional", "horizon", "tail_fn", "tail", "decay")

    def __init__(
        self,
        k: int,
        m: int,
        *,
        exceptional: Optional[Mapping[tuple[int, int], complex]] = None,
        horizon: int = 0,
        tail_fn: Optional[ValueFn] = None,
        tail: complex = 0j,
        decay: Decay = EXACT,
    ):
        if k != 0 and tail != 0:
            raise InvalidMorphismError(f"Layer ({k},{m}) must vanish at infinity, tail={tail}")
        if tail_fn is None and tail != 0:
            raise ValueError("A finitely supported layer has zero tail")
        exceptional = dict(exceptional or {})
        for s, p in exceptional:
            Morphism.at(k, m, s, p).validate()
        self.k = k
        self.m = m
        self.exceptional = MappingProxyType(exceptional)
        if tail_fn is None:
            horizon = max([horizon] + [p + 1 for _, p in exceptional])
        self.horizon = horizon
        self.tail_fn = tail_fn
        self.tail = complex(tail)
        self.decay = decay

    @classmethod
    def finite(cls, k: int, m: int, points: Mapping[tuple[int, int], complex]) -> "Layer":
        points = {sp: complex(v) for sp, v in points.items() if v != 0}
        c = max((abs(v) * 2.0**p for (_, p), v in points.items()), default=0.0)
        return cls(k, m, exceptional=points, decay=Decay(c, 0.5))

    @classmethod
    def lazy(cls, k: int, m: int, fn: ValueFn, tail: complex, decay: Decay) -> "Layer":
        return cls(k, m, tail_fn=lru_cache(maxsize=LAZY_CACHE_SIZE)(fn), tail=tail, decay=decay)

    @property
    def key(self) -> tuple[int, int]:
        return self.k, self.m

    @property
    def is_finite(self) -> bool:
        return self.tail_fn is None

    def value(self, s: int, p: int) -> complex:
        if p < 0 or p + self.m < 0:
            return 0j
        if p < self.horizon:
            v = self.exceptional.get((s, p))
            if v is not None:
                return v
        if self.tail_fn is None:
            return 0j
        return complex(self.tail_fn(s, p))


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------


class GElement:
    """A function on F given layer by layer; missing layers are zero."""

    def __init__(self, l: int, layers: Iterable[Layer]):
        if l < 1:
            raise ValueError(f"l must be a positive integer, got {l}")
        self.l = l
        self._layers: dict[tuple[int, int], Layer] = {}
        for layer in layers:
            if layer.key in self._layers:
                raise ValueError(f"Duplicate layer {layer.key}")
            self._layers[layer.key] = layer

    @property
    def layers(self) -> dict[tuple[int, int], Layer]:
        return dict(self._layers)

    def layer(self, k: int, m: int) -> Optional[Layer]:
        return self._layers.get((k, m))

    def support_layers(self) -> list[tuple[int, int]]:
        return sorted(self._layers)

    def degrees(self) -> set[int]:
        return {k - m for k, m in self._layers}

    def evaluate(self, g: Morphism) -> complex:
        g.validate(self.l)
        layer = self._layers.get((g.k, g.m))
        if layer is None:
            return 0j
        if isinstance(g.fiber, Infinity):
            return layer.tail
        return layer.value(g.fiber.s, g.fiber.p)

    def value(self, k: int, m: int, s: int, p: int) -> complex:
        """f((k, m, (s, p))), zero off the groupoid."""
        layer = self._layers.get((k, m))
        if layer is None or not 1 <= s <= self.l:
            return 0j
        return layer.value(s, p)

    def tail(self, m: int) -> complex:
        """The value at (0, m, oo)."""
        layer = self._layers.get((0, m))
        return 0j if layer is None else layer.tail

    def sample_decay(self, horizon: int, slack: float = 1e-12) -> bool:
        """Check the decay certificates on every layer for p < horizon."""
        for layer in self._layers.values():
            for s in range(1, self.l + 1):
                for p in range(max(0, -layer.m), horizon):
                    excess = abs(layer.value(s, p) - layer.tail) - layer.decay.bound(p)
                    if excess > slack * (1 + layer.decay.bound(p)):
                        logger.debug("decay fails on layer %s at s=%d p=%d", layer.key, s, p)
                        return False
        return True

    def __add__(self, other: "GElement") -> "GElement":
        return combine([(1, self), (1, other)])

    def __sub__(self, other: "GElement") -> "GElement":
        return combine([(1, self), (-1, other)])

    def __neg__(self) -> "GElement":
        return combine([(-1, self)])

    def __mul__(self, z: complex) -> "GElement":
        return combine([(z, self)])

    __rmul__ = __mul__

    def __matmul__(self, other: "GElement") -> "GElement":
        return convolve(self, other)

    def adjoint(self) -> "GElement":
        return involve(self)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(l={self.l}, layers={self.support_layers()})"


class FinSupp(GElement):
    """Finitely supported element; arithmetic on these is exact."""

    @property
    def points(self) -> dict[tuple[int, int, int, int], complex]:
        return {
            (layer.k, layer.m, s, p): v
            for layer in self._layers.values()
            for (s, p), v in layer.exceptional.items()
        }


class Tailed(GElement):
    """Element with at least one lazily evaluated layer."""


def _element(l: int, layers: Iterable[Layer]) -> GElement:
    layers = list(layers)
    if all(layer.is_finite for layer in layers):
        return FinSupp(l, [layer for layer in layers if layer.exceptional])
    return Tailed(l, layers)


def fin_supp(points: Mapping[tuple[int, int, int, int], complex], l: int) -> FinSupp:
    """Finitely supported element from a map (k, m, s, p) -> value."""
    by_layer: dict[tuple[int, int], dict[tuple[int, int], complex]] = defaultdict(dict)
    for (k, m, s, p), v in points.items():
        Morphism.at(k, m, s, p).validate(l)
        by_layer[(k, m)][(s, p)] = by_layer[(k, m)].get((s, p), 0j) + complex(v)
    layers = [Layer.finite(k, m, pts) for (k, m), pts in by_layer.items()]
    return FinSupp(l, [layer for layer in layers if layer.exceptional])


def delta(g: Morphism, l: int) -> FinSupp:
    """Indicator of a single morphism over a finite point."""
    if not g.is_finite:
        raise InvalidMorphismError(f"{g} is not isolated; delta functions live on finite fibers")
    return fin_supp({(g.k, g.m, g.fiber.s, g.fiber.p): 1}, l)


def unit_element(l: int) -> Tailed:
    """The function equal to 1 on every unit, including (0, 0, oo)."""
    return Tailed(l, [Layer.lazy(0, 0, lambda s, p: 1.0, 1.0, EXACT)])


def chi_element(n: int, l: int) -> Tailed:
    """Indicator of C_n = {(0,-n,p)_s : p >= max(n, 0)} u {(0,-n,oo)}."""
    # validity of (0,-n,p) already forces p >= n
    return Tailed(l, [Layer.lazy(0, -n, lambda s, p: 1.0, 1.0, EXACT)])


def combine(items: Iterable[tuple[complex, GElement]]) -> GElement:
    """Linear combination sum z_i f_i."""
    items = [(complex(z), f) for z, f in items]
    if not items:
        raise ValueError("Empty linear combination")
    l = items[0][1].l
    if any(f.l != l for _, f in items):
        raise ValueError("Elements over different numbers of legs")
    grouped: dict[tuple[int, int], list[tuple[complex, Layer]]] = defaultdict(list)
    for z, f in items:
        if z == 0:
            continue
        for key, layer in f.layers.items():
            grouped[key].append((z, layer))
    return _element(l, [_linear_layer(key, parts) for key, parts in sorted(grouped.items())])


def _linear_layer(key: tuple[int, int], parts: list[tuple[complex, Layer]]) -> Layer:
    k, m = key
    if all(layer.is_finite for _, layer in parts):
        acc: dict[tuple[int, int], complex] = defaultdict(complex)
        for z, layer in parts:
            for sp, v in layer.exceptional.items():
                acc[sp] += z * v
        return Layer.finite(k, m, acc)

    def value(s: int, p: int) -> complex:
        return sum((z * layer.value(s, p) for z, layer in parts), 0j)

    tail = sum((z * layer.tail for z, layer in parts), 0j)
    decay = Decay(
        sum(abs(z) * layer.decay.C for z, layer in parts),
        max(layer.decay.r for _, layer in parts),
    )
    return Layer.lazy(k, m, value, tail, decay)


# ---------------------------------------------------------------------------
# Convolution and involution
# ---------------------------------------------------------------------------


def convolve(f: GElement, g: GElement) -> GElement:
    """(f * g)(k,m,(s,p)) = sum f(k1,m1,(s,p+m2)) g(k2,m2,(s,p)) over k1+k2=k, m1+m2=m."""
    if f.l != g.l:
        raise ValueError(f"Cannot convolve elements with l={f.l} and l={g.l}")
    if isinstance(f, FinSupp) and isinstance(g, FinSupp):
        return _convolve_exact(f, g)
    pairs: dict[tuple[int, int], list[tuple[Layer, Layer]]] = defaultdict(list)
    for (k1, m1), l1 in f.layers.items():
        for (k2, m2), l2 in g.layers.items():
            pairs[(k1 + k2, m1 + m2)].append((l1, l2))
    return _element(f.l, [_convolved_layer(key, group) for key, group in sorted(pairs.items())])


def _convolve_exact(f: FinSupp, g: FinSupp) -> FinSupp:
    by_target: dict[tuple[int, int], list[tuple[int, int, complex]]] = defaultdict(list)
    for (k1, m1, s, p1), v1 in f.points.items():
        by_target[(s, p1)].append((k1, m1, v1))
    acc: dict[tuple[int, int, int, int], complex] = defaultdict(complex)
    for (k2, m2, s, p2), v2 in g.points.items():
        for k1, m1, v1 in by_target.get((s, p2 + m2), ()):
            acc[(k1 + k2, m1 + m2, s, p2)] += v1 * v2
    return fin_supp({key: v for key, v in acc.items() if v != 0}, f.l)


def _convolved_layer(key: tuple[int, int], group: list[tuple[Layer, Layer]]) -> Layer:
    k, m = key

    def value(s: int, p: int) -> complex:
        return sum((l1.value(s, p + l2.m) * l2.value(s, p) for l1, l2 in group), 0j)

    tail = sum((l1.tail * l2.tail for l1, l2 in group), 0j) if k == 0 else 0j
    r = max(max(l1.decay.r, l2.decay.r) for l1, l2 in group)
    c = 0.0
    for l1, l2 in group:
        b2 = abs(l2.tail) + l2.decay.C
        c += l1.decay.C * l1.decay.r ** l2.m * b2 + abs(l1.tail) * l2.decay.C
        if l2.m < 0:
            # intermediate morphism invalid for p < -m2
            c += abs(l1.tail * l2.tail) * r ** l2.m
    return Layer.lazy(k, m, value, tail, Decay(c, r))


def involve(f: GElement) -> GElement:
    """f*(k,m,(s,p)) = conj f(-k,-m,(s,p+m))."""
    layers = []
    for (k, m), layer in f.layers.items():
        if layer.is_finite:
            pts = {(s, p + m): v.conjugate() for (s, p), v in layer.exceptional.items()}
            layers.append(Layer.finite(-k, -m, pts))
            continue

        def value(s: int, p: int, layer: Layer = layer, m: int = m) -> complex:
            return layer.value(s, p - m).conjugate()

        decay = Decay(layer.decay.C * layer.decay.r ** (-m), layer.decay.r)
        layers.append(Layer.lazy(-k, -m, value, layer.tail.conjugate(), decay))
    return _element(f.l, layers)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def embed_generator(name: str, params: RepParams) -> Tailed:
    """Image of c or d in the groupoid algebra."""
    q, l = params.q, params.l
    if name == "c":
        decay = Decay(sum(q ** (-2 * j) for j in range(l)), q ** (2 * l))
        return Tailed(l, [Layer.lazy(0, -1, lambda s, p: weight(p, s, q, l), 1.0, decay)])
    if name == "d":
        decay = Decay(q, q**l)
        return Tailed(l, [Layer.lazy(-1, 0, lambda s, p: eigenvalue(p, s, q, l), 0.0, decay)])
    raise ValueError(f"Unknown generator {name!r}; expected 'c' or 'd'")


@lru_cache(maxsize=32)
def _letters(q: float, l: int) -> dict[str, GElement]:
    params = RepParams(q=q, l=l)
    c = embed_generator("c", params)
    d = embed_generator("d", params)
    return {"c": c, "C": involve(c), "d": d, "D": involve(d)}


def embed_normalform(n: NormalForm, params: RepParams) -> GElement:
    """The *-homomorphism O(L_q(l;1,l)) -> C*(F) on a normal form."""
    if n.l != params.l:
        raise ValueError(f"Normal form has l={n.l}, parameters have l={params.l}")
    letters = _letters(params.q, params.l)
    words: dict[str, GElement] = {"": unit_element(params.l)}

    def word_element(word: str) -> GElement:
        if word not in words:
            prefix, last = word[:-1], letters[word[-1]]
            words[word] = convolve(word_element(prefix), last) if prefix else last
        return words[word]

    items = [(ql_eval(c, params.q), word_element(mono.word())) for mono, c in n.terms.items()]
    if not items:
        return FinSupp(params.l, [])
    return combine(items)


# ---------------------------------------------------------------------------
# Induced representation and grading
# ---------------------------------------------------------------------------


def induced_column(f: GElement, t: int, s: int, p: int) -> dict[tuple[int, int, int], complex]:
    """rho~(f) e_(t,s,p) as a map (t', s, p') -> value, without window clipping."""
    column: dict[tuple[int, int, int], complex] = defaultdict(complex)
    for (k, m), layer in f.layers.items():
        if p + m < 0:
            continue
        v = layer.value(s, p)
        if v != 0:
            column[(t + k, s, p + m)] += v
    return dict(column)


def induced_rep(f: GElement, params: RepParams) -> TruncOp:
    """rho~(f) on the merged basis; values are independent of the window coordinate t."""
    if f.l != params.l:
        raise ValueError(f"Element has l={f.l}, parameters have l={params.l}")
    basis = Merged(params.l, params.W, params.N)
    ts = np.arange(-params.W, params.W + 1)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for (k, m), layer in f.layers.items():
        src = ts[(ts + k >= -params.W) & (ts + k <= params.W)]
        if src.size == 0:
            continue
        for s in range(1, params.l + 1):
            for p in range(max(0, -m), min(params.N, params.N - m)):
                v = layer.value(s, p)
                if v == 0:
                    continue
                cols.append(((src + params.W) * params.l + (s - 1)) * params.N + p)
                rows.append(((src + k + params.W) * params.l + (s - 1)) * params.N + p + m)
                vals.append(np.full(src.size, v, dtype=complex))
    if not vals:
        return TruncOp.zero(basis)
    logger.debug("induced_rep: %d layers, dim %d", len(f.layers), basis.dim)
    return TruncOp.from_entries(
        basis, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    )


def degree_component(f: GElement, n: int) -> GElement:
    """The part of f supported on F_n = {(k, k-n, p)_s} u {(0, -n, oo)}."""
    return _element(f.l, [layer for (k, m), layer in f.layers.items() if k - m == n])


def _check_homogeneous(f: GElement, n: int) -> None:
    stray = sorted(key for key in f.layers if key[0] - key[1] != n)
    if stray:
        raise GradingError(f"Element is not homogeneous of degree {n}: layers {stray}")


def rho_n(f: GElement, n: int, params: RepParams) -> TruncOp:
    """<e_(s,p+mu), rho_n(f) e_(s,p)> = f((mu+n, mu, (s,p))) on the legs basis."""
    _check_homogeneous(f, n)
    basis = Legs(params.l, params.N)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[complex] = []
    for (_, m), layer in f.layers.items():
        for s in range(1, params.l + 1):
            for p in range(max(0, -m), min(params.N, params.N - m)):
                v = layer.value(s, p)
                if v != 0:
                    rows.append(basis.index(s, p + m))
                    cols.append(basis.index(s, p))
                    vals.append(v)
    return TruncOp.from_entries(basis, rows, cols, vals)


def rho_n_via(f: GElement, n: int, m: int, params: RepParams) -> TruncOp:
    """u_m o rho~(f) o u_{m-n}^{-1}, where u_m identifies X_m = {(p+m, p)} with the levels p."""
    _check_homogeneous(f, n)
    basis = Legs(params.l, params.N)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[complex] = []
    for s in range(1, params.l + 1):
        for p in range(params.N):
            for (t2, _, p2), v in induced_column(f, p + m - n, s, p).items():
                if t2 != p2 + m:
                    raise GradingError(f"rho~(f) leaves X_{m} at (t={t2}, p={p2})")
                if p2 < params.N:
                    rows.append(basis.index(s, p2))
                    cols.append(basis.index(s, p))
                    vals.append(v)
    return TruncOp.from_entries(basis, rows, cols, vals)


def max_difference(f: GElement, g: GElement, horizon: int) -> float:
    """Largest |f - g| over valid points with p < horizon and over the tails."""
    worst = 0.0
    for key in set(f.layers) | set(g.layers):
        k, m = key
        worst = max(worst, abs(f.tail(m) - g.tail(m)) if k == 0 else 0.0)
        for s in range(1, f.l + 1):
            for p in range(max(0, -m), horizon):
                worst = max(worst, abs(f.value(k, m, s, p) - g.value(k, m, s, p)))
    return worst
