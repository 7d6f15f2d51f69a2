"""Projections over the truncated unitization (K^l)^+ and the quantum line bundles.

An element of (K^l)^+ is a scalar lambda together with one compact N x N block per
leg; as an operator on leg s it is lambda I + K_s. A projection over (K^l)^+ is an
r x r matrix of such elements, stored as an (r, r) scalar array and an
(r, r, l, N, N) compact array.

Projections are classified by the invariant (rho; t_1..t_l): rho is the rank of
the scalar part and t_s the trace of the compact corrections on leg s.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InvalidInvariantError, InvariantError, TruncationError
from .expr import wp_generators
from .groupoid import chi_element, embed_normalform, rho_n
from .json_validator import load_json_source
from .models import (
    CompactLeg,
    IsoReport,
    KInvariant,
    ProjectionEntry,
    ProjectionFile,
    ProjectionReport,
    RepParams,
)
from .rep import TruncOp

logger = logging.getLogger(__name__)


def _spectral(block: np.ndarray) -> float:
    if not block.any():
        return 0.0
    return float(np.linalg.norm(block, 2))


def corner_projection(n: int, N: int) -> np.ndarray:
    """P_n = sum_{i<n} e_ii as an N x N matrix."""
    if not 0 <= n <= N:
        raise TruncationError(f"P_{n} does not fit into truncation N={N}")
    P = np.zeros((N, N), dtype=complex)
    P[np.arange(n), np.arange(n)] = 1.0
    return P


# ---------------------------------------------------------------------------
# Unitization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UnitizedElement:
    """(lambda, K) in (K^l)^+, acting as lambda I + K_s on leg s."""

    scalar: complex
    compact: np.ndarray

    def __post_init__(self):
        if self.compact.ndim != 3 or self.compact.shape[1] != self.compact.shape[2]:
            raise ValueError(f"Compact part must have shape (l, N, N), got {self.compact.shape}")

    @classmethod
    def zero(cls, l: int, N: int) -> "UnitizedElement":
        return cls(0j, np.zeros((l, N, N), dtype=complex))

    @classmethod
    def identity(cls, l: int, N: int) -> "UnitizedElement":
        return cls(1 + 0j, np.zeros((l, N, N), dtype=complex))

    @classmethod
    def from_compact(cls, compact: np.ndarray, scalar: complex = 0j) -> "UnitizedElement":
        return cls(complex(scalar), np.asarray(compact, dtype=complex))

    @property
    def l(self) -> int:
        return self.compact.shape[0]

    @property
    def N(self) -> int:
        return self.compact.shape[1]

    def __add__(self, other: "UnitizedElement") -> "UnitizedElement":
        return UnitizedElement(self.scalar + other.scalar, self.compact + other.compact)

    def __sub__(self, other: "UnitizedElement") -> "UnitizedElement":
        return UnitizedElement(self.scalar - other.scalar, self.compact - other.compact)

    def __mul__(self, other: "UnitizedElement") -> "UnitizedElement":
        """(lambda, M)(mu, K) = (lambda mu, MK + lambda K + mu M), legwise."""
        compact = (
            self.compact @ other.compact
            + self.scalar * other.compact
            + other.scalar * self.compact
        )
        return UnitizedElement(self.scalar * other.scalar, compact)

    def scale(self, z: complex) -> "UnitizedElement":
        return UnitizedElement(z * self.scalar, z * self.compact)

    def adjoint(self) -> "UnitizedElement":
        return UnitizedElement(self.scalar.conjugate(), np.conj(self.compact).transpose(0, 2, 1))

    def operators(self) -> np.ndarray:
        """lambda I + K_s for every leg, shape (l, N, N)."""
        return self.compact + self.scalar * np.eye(self.N)[None, :, :]

    def norm(self) -> float:
        """max(|lambda|, max_s ||lambda I + K_s||), the norm of the truncated unitization."""
        ops = self.operators()
        return max([abs(self.scalar)] + [_spectral(ops[s]) for s in range(self.l)])


# ---------------------------------------------------------------------------
# Matrices over the unitization
# ---------------------------------------------------------------------------


class ProjectionRep:
    """An r x r matrix over (K^l)^+ (not necessarily a projection until verified)."""

    __slots__ = ("scalar", "compact")

    def __init__(self, scalar: np.ndarray, compact: np.ndarray):
        scalar = np.asarray(scalar, dtype=complex)
        compact = np.asarray(compact, dtype=complex)
        r = scalar.shape[0]
        if scalar.shape != (r, r) or compact.ndim != 5 or compact.shape[:2] != (r, r):
            raise ValueError(
                f"Inconsistent shapes: scalar {scalar.shape}, compact {compact.shape}"
            )
        self.scalar = scalar
        self.compact = compact

    @classmethod
    def from_entries(cls, entries: Sequence[Sequence[UnitizedElement]]) -> "ProjectionRep":
        scalar = np.array([[e.scalar for e in row] for row in entries], dtype=complex)
        compact = np.array([[e.compact for e in row] for row in entries], dtype=complex)
        return cls(scalar, compact)

    @classmethod
    def identity(cls, r: int, l: int, N: int) -> "ProjectionRep":
        return cls(np.eye(r, dtype=complex), np.zeros((r, r, l, N, N), dtype=complex))

    @classmethod
    def diagonal(cls, blocks: Sequence[UnitizedElement]) -> "ProjectionRep":
        l, N = blocks[0].l, blocks[0].N
        entries = [
            [blocks[i] if i == j else UnitizedElement.zero(l, N) for j in range(len(blocks))]
            for i in range(len(blocks))
        ]
        return cls.from_entries(entries)

    @property
    def r(self) -> int:
        return self.scalar.shape[0]

    @property
    def l(self) -> int:
        return self.compact.shape[2]

    @property
    def N(self) -> int:
        return self.compact.shape[3]

    @property
    def scalar_part(self) -> np.ndarray:
        return self.scalar.copy()

    def entry(self, i: int, j: int) -> UnitizedElement:
        return UnitizedElement(complex(self.scalar[i, j]), self.compact[i, j].copy())

    def _check(self, other: "ProjectionRep") -> None:
        if self.compact.shape != other.compact.shape:
            raise ValueError(f"Shape mismatch: {self.compact.shape} vs {other.compact.shape}")

    def __add__(self, other: "ProjectionRep") -> "ProjectionRep":
        self._check(other)
        return ProjectionRep(self.scalar + other.scalar, self.compact + other.compact)

    def __sub__(self, other: "ProjectionRep") -> "ProjectionRep":
        self._check(other)
        return ProjectionRep(self.scalar - other.scalar, self.compact - other.compact)

    def scale(self, z: complex) -> "ProjectionRep":
        return ProjectionRep(z * self.scalar, z * self.compact)

    def __matmul__(self, other: "ProjectionRep") -> "ProjectionRep":
        self._check(other)
        scalar = self.scalar @ other.scalar
        compact = (
            np.einsum("ijsab,jksbc->iksac", self.compact, other.compact)
            + np.einsum("ij,jksab->iksab", self.scalar, other.compact)
            + np.einsum("ijsab,jk->iksab", self.compact, other.scalar)
        )
        return ProjectionRep(scalar, compact)

    def adjoint(self) -> "ProjectionRep":
        return ProjectionRep(
            self.scalar.conj().T, np.conj(self.compact).transpose(1, 0, 2, 4, 3)
        )

    def direct_sum(self, other: "ProjectionRep") -> "ProjectionRep":
        if (self.l, self.N) != (other.l, other.N):
            raise ValueError("Direct sum of matrices over different truncations")
        r1, r2 = self.r, other.r
        scalar = np.zeros((r1 + r2, r1 + r2), dtype=complex)
        compact = np.zeros((r1 + r2, r1 + r2, self.l, self.N, self.N), dtype=complex)
        scalar[:r1, :r1], scalar[r1:, r1:] = self.scalar, other.scalar
        compact[:r1, :r1], compact[r1:, r1:] = self.compact, other.compact
        return ProjectionRep(scalar, compact)

    def conjugate(self, U: "ProjectionRep") -> "ProjectionRep":
        """U* P U."""
        return U.adjoint() @ self @ U

    def max_entry_norm(self) -> float:
        return max(
            self.entry(i, j).norm() for i in range(self.r) for j in range(self.r)
        )

    def __repr__(self) -> str:
        return f"ProjectionRep(r={self.r}, l={self.l}, N={self.N})"


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


def verify_projection(P: ProjectionRep, tol: float = 1e-9) -> ProjectionReport:
    """Idempotency, self-adjointness and scalar-part idempotency defects of P."""
    idempotency = (P @ P - P).max_entry_norm()
    selfadjoint = (P.adjoint() - P).max_entry_norm()
    S = P.scalar
    scalar_defect = float(max(np.abs(S @ S - S).max(), np.abs(S.conj().T - S).max()))
    passed = idempotency < tol and selfadjoint < tol and scalar_defect < tol
    if not passed:
        logger.debug(
            "not a projection: idempotency %.3e, selfadjoint %.3e, scalar %.3e",
            idempotency, selfadjoint, scalar_defect,
        )
    return ProjectionReport(
        idempotency_defect=idempotency,
        selfadjoint_defect=selfadjoint,
        scalar_defect=scalar_defect,
        tol=tol,
        passed=passed,
    )


def _integral(x: float, what: str, tol: float) -> int:
    rounded = int(round(x))
    if abs(x - rounded) > tol:
        raise InvariantError(
            f"{what} = {x:.12g} is not an integer within {tol:g}; "
            "the truncation is too small or the input is not a projection"
        )
    return rounded


def k_invariant(P: ProjectionRep, tol: float = 1e-9) -> KInvariant:
    """(rho; t): rank of the scalar part and per-leg trace of the diagonal compact parts."""
    rho = _integral(float(np.trace(P.scalar).real), "scalar trace", tol)
    diagonal = P.compact[np.arange(P.r), np.arange(P.r)]  # (r, l, N, N)
    traces = np.einsum("isaa->s", diagonal).real
    t = tuple(
        _integral(float(x), f"compact trace on leg {s + 1}", tol) for s, x in enumerate(traces)
    )
    try:
        return KInvariant(rho=rho, t=t)
    except ValueError as e:
        raise InvariantError(f"Traces ({rho}; {list(t)}) do not form a valid invariant") from e


def canonical_projection(inv: KInvariant, l: int, N: int) -> ProjectionRep:
    """The representative I_{rho-1} + (I - (+)P_{n_j}) + (+)P_{m_j}, or (+)P_{t_j} when rho = 0.

    The last block is dropped when every m_j vanishes.
    """
    if inv.l != l:
        raise InvalidInvariantError(f"Invariant has {inv.l} legs, expected l={l}")
    if any(abs(ts) >= N for ts in inv.t):
        raise TruncationError(f"Invariant {inv.as_list()} does not fit into truncation N={N}")
    n, m = inv.n_m()
    positive = UnitizedElement.from_compact(np.stack([corner_projection(mj, N) for mj in m]))
    if inv.rho == 0:
        return ProjectionRep.diagonal([positive])
    blocks = [UnitizedElement.identity(l, N) for _ in range(inv.rho - 1)]
    blocks.append(
        UnitizedElement.from_compact(-np.stack([corner_projection(nj, N) for nj in n]), scalar=1.0)
    )
    if any(m):
        blocks.append(positive)
    return ProjectionRep.diagonal(blocks)


def is_isomorphic(P: ProjectionRep, Q: ProjectionRep, tol: float = 1e-9) -> bool:
    return k_invariant(P, tol) == k_invariant(Q, tol)


def line_bundle_projection(n: int, l: int, N: int) -> ProjectionRep:
    """I_1 + (+)_j P_n for n >= 0 and I - (+)_j P_{-n} for n < 0."""
    if abs(n) >= N:
        raise TruncationError(f"|n| = {abs(n)} must be below the truncation N={N}")
    return canonical_projection(KInvariant(rho=1, t=(n,) * l), l, N)


# ---------------------------------------------------------------------------
# Line bundle models
# ---------------------------------------------------------------------------


def _legs_blocks(op: TruncOp, l: int, N: int) -> np.ndarray:
    dense = op.to_dense()
    return np.stack([dense[s * N:(s + 1) * N, s * N:(s + 1) * N] for s in range(l)])


@dataclass(frozen=True, eq=False)
class ModuleModel:
    """The model K^l + C T_n of the line bundle of degree n, T_n = rho_n(chi_{C_n}).

    Elements are pairs (k, lam) standing for k + lam T_n, with k of shape (l, N, N).
    """

    n: int
    T: np.ndarray
    P: np.ndarray

    @property
    def l(self) -> int:
        return self.T.shape[0]

    @property
    def N(self) -> int:
        return self.T.shape[1]

    def operator(self, k: np.ndarray, lam: complex) -> np.ndarray:
        return k + lam * self.T

    def decompose(
        self, X: np.ndarray, start: Optional[int] = None
    ) -> tuple[np.ndarray, complex, float]:
        """Split legwise X into (k, lam) with lam read from the diagonal of T_n.

        Returns the compact part, the coefficient and the largest entry of the
        compact part on levels >= start (default N/2).
        """
        start = self.N // 2 if start is None else start
        n, N = self.n, self.N
        ps = np.arange(max(start, n, 0), min(N, N + n))
        # T_n has ones at (p - n, p)
        lam = complex(np.mean([X[s, ps - n, ps].mean() for s in range(self.l)]))
        k = X - lam * self.T
        residual = float(np.abs(k[:, start:, start:]).max()) if start < N else 0.0
        return k, lam, residual

    def left_act(
        self, a: UnitizedElement, k: np.ndarray, lam: complex
    ) -> tuple[np.ndarray, complex]:
        """(mu I + A)(k + lam T) = (mu k + A k + lam A T) + mu lam T."""
        mu, A = a.scalar, a.compact
        return mu * k + A @ k + lam * (A @ self.T), mu * lam


def line_bundle_model(n: int, params: RepParams) -> ModuleModel:
    """The truncated model of the degree-n line bundle under rho_n."""
    if abs(n) >= params.N:
        raise TruncationError(f"|n| = {abs(n)} must be below the truncation N={params.N}")
    T = _legs_blocks(rho_n(chi_element(n, params.l), n, params), params.l, params.N)
    P = np.stack([corner_projection(abs(n), params.N)] * params.l)
    return ModuleModel(n=n, T=T, P=P)


def _random_compact(rng: np.random.Generator, l: int, N: int, support: int) -> np.ndarray:
    k = np.zeros((l, N, N), dtype=complex)
    k[:, :support, :support] = rng.normal(size=(l, support, support)) + 1j * rng.normal(
        size=(l, support, support)
    )
    return k


def _random_unitized(rng: np.random.Generator, l: int, N: int, support: int) -> UnitizedElement:
    mu = complex(rng.normal(), rng.normal())
    return UnitizedElement(mu, _random_compact(rng, l, N, support))


def _safe_max(x: np.ndarray, margin: int) -> float:
    """Largest entry of legwise x on levels below N - margin."""
    N = x.shape[-1]
    return float(np.abs(x[..., : N - margin, : N - margin]).max())


def verify_line_bundle_iso(
    n: int,
    params: RepParams,
    samples: int = 100,
    tol: float = 1e-9,
    rng: Optional[np.random.Generator] = None,
) -> IsoReport:
    """Check the explicit isomorphisms between the model M_n and the projective module.

    For n >= 0: phi(x, y) = x T + y on (K^l)^+ (+) (K^l)^+ P and
    phi^-1(k + lam T) = (lam I + k T*, k P). For n < 0: psi(z) = z T' on
    (K^l)^+ (I - P) and psi^-1(k + lam T') = (lam I + k T'*)(I - P).
    """
    if abs(n) + 2 >= params.N:
        raise TruncationError(f"|n| + 2 must be below the truncation N={params.N}")
    rng = np.random.default_rng(0) if rng is None else rng
    model = line_bundle_model(n, params)
    l, N, T, P = model.l, model.N, model.T, model.P
    Tstar = np.conj(T).transpose(0, 2, 1)
    eye = np.eye(N)[None, :, :]
    margin = abs(n) + 1
    support = max(1, (N - margin) // 2)
    devs = {"round_trip_model": 0.0, "round_trip_module": 0.0, "left_linearity": 0.0}
    if n < 0:
        devs["range_absorbs"] = 0.0

    for _ in range(samples):
        a = _random_unitized(rng, l, N, support)
        k = _random_compact(rng, l, N, support)
        lam = complex(rng.normal(), rng.normal())
        m_op = model.operator(k, lam)
        if n >= 0:
            # phi(phi^-1(k + lam T))
            x = lam * eye + k @ Tstar
            y = k @ P
            back = x @ T + y
            devs["round_trip_model"] = max(devs["round_trip_model"], _safe_max(back - m_op, margin))
            # phi^-1(phi(x, y)) for x in the unitization and y = Y P
            x0 = _random_unitized(rng, l, N, support)
            y0 = _random_compact(rng, l, N, support) @ P
            kk = x0.compact @ T + y0
            x1 = x0.scalar * eye + kk @ Tstar
            y1 = kk @ P
            dev = max(_safe_max(x1 - x0.operators(), margin), _safe_max(y1 - y0, margin))
            devs["round_trip_module"] = max(devs["round_trip_module"], dev)
            # phi(a x, a y) against the module action on M_n
            ax, ay = (a * x0).operators(), a.operators() @ y0
            lhs = ax @ T + ay
            rhs = model.operator(*model.left_act(a, kk, x0.scalar))
            devs["left_linearity"] = max(devs["left_linearity"], _safe_max(lhs - rhs, margin))
        else:
            comp = eye - P
            # psi(psi^-1(k + lam T'))
            z = (lam * eye + k @ Tstar) @ comp
            back = z @ T
            devs["round_trip_model"] = max(devs["round_trip_model"], _safe_max(back - m_op, margin))
            # psi^-1(psi(z)) for z = x (I - P)
            x0 = _random_unitized(rng, l, N, support)
            z0 = x0.operators() @ comp
            # psi(z0) = kk + mu T' with mu the scalar part of x0
            kk = z0 @ T - x0.scalar * T
            z1 = (x0.scalar * eye + kk @ Tstar) @ comp
            devs["round_trip_module"] = max(devs["round_trip_module"], _safe_max(z1 - z0, margin))
            # psi(a z) against the module action on M_n
            lhs = (a.operators() @ z0) @ T
            rhs = model.operator(*model.left_act(a, kk, x0.scalar))
            devs["left_linearity"] = max(devs["left_linearity"], _safe_max(lhs - rhs, margin))
            absorbed = float(np.abs(k @ comp @ T - k @ T).max())
            devs["range_absorbs"] = max(devs["range_absorbs"], absorbed)

    worst = max(devs.values())
    report = IsoReport(
        n=n, l=l, samples=samples, deviations=devs, max_deviation=worst, tol=tol, passed=worst < tol
    )
    if not report.passed:
        logger.warning("Line bundle isomorphism for n=%d deviates by %.3e", n, worst)
    return report


# ---------------------------------------------------------------------------
# Weighted projective line
# ---------------------------------------------------------------------------


def wp_matrix_units(params: RepParams) -> tuple[int, float]:
    """Matrix units from the spectral projections of rho_0(a), a = d d*, and how b = c d moves them.

    The spectral projections of rho_0(a) should be the diagonal matrix units, and rho_0(b)
    should send each spectral line into a single other line. Returns the number of units
    produced and the largest deviation from either property.
    """
    b, a = wp_generators(params.l)
    A = rho_n(embed_normalform(a, params), 0, params).to_dense()
    B = rho_n(embed_normalform(b, params), 0, params).to_dense()
    eigenvalues, vectors = np.linalg.eigh(A)
    dim = A.shape[0]
    worst = 0.0
    found = set()
    for i in range(dim):
        v = vectors[:, i]
        projector = np.outer(v, v.conj())
        j = int(np.argmax(np.abs(np.diagonal(projector))))
        unit = np.zeros((dim, dim))
        unit[j, j] = 1.0
        worst = max(worst, float(np.abs(projector - unit).max()))
        found.add(j)
    if len(found) != dim:
        worst = max(worst, 1.0)
    # b in the eigenbasis of a: at most one nonzero entry per column
    moved = np.abs(vectors.conj().T @ B @ vectors)
    spill = np.sqrt(np.maximum((moved**2).sum(axis=0) - moved.max(axis=0) ** 2, 0.0))
    worst = max(worst, float(spill.max()))
    logger.debug("wp matrix units: %d of %d, deviation %.3e", len(found), dim, worst)
    return len(found), worst


# ---------------------------------------------------------------------------
# Projection files
# ---------------------------------------------------------------------------


def _complex_entry(x: Union[float, tuple[float, float]]) -> complex:
    if isinstance(x, tuple):
        return complex(x[0], x[1])
    return complex(x)


def load_projection(source: Union[dict, str, Path]) -> ProjectionRep:
    """Read a projection from a dict, a JSON string or a JSON file path."""
    doc = ProjectionFile.model_validate(load_json_source(source))
    scalar = np.zeros((doc.r, doc.r), dtype=complex)
    compact = np.zeros((doc.r, doc.r, doc.l, doc.N, doc.N), dtype=complex)
    for i, row in enumerate(doc.entries):
        for j, entry in enumerate(row):
            scalar[i, j] = complex(*entry.scalar)
            for leg in entry.compact:
                for a, values in enumerate(leg.rows):
                    for b, x in enumerate(values):
                        compact[i, j, leg.leg - 1, a, b] = _complex_entry(x)
    return ProjectionRep(scalar, compact)


def _json_entry(z: complex) -> Union[float, list[float]]:
    return float(z.real) if z.imag == 0 else [float(z.real), float(z.imag)]


def dump_projection(P: ProjectionRep, note: Optional[str] = None) -> dict:
    """JSON-ready dict of P; trailing zero rows and columns of compact blocks are omitted."""
    entries = []
    for i in range(P.r):
        row = []
        for j in range(P.r):
            legs = []
            for s in range(P.l):
                block = P.compact[i, j, s]
                nz_rows, nz_cols = np.nonzero(block)
                if nz_rows.size == 0:
                    continue
                height, width = nz_rows.max() + 1, nz_cols.max() + 1
                rows = [[_json_entry(block[a, b]) for b in range(width)] for a in range(height)]
                legs.append(CompactLeg(leg=s + 1, rows=rows))
            z = P.scalar[i, j]
            row.append(ProjectionEntry(scalar=(float(z.real), float(z.imag)), compact=legs))
        entries.append(row)
    return ProjectionFile(l=P.l, N=P.N, r=P.r, entries=entries, note=note).model_dump(mode="json")
