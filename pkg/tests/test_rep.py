import math

import numpy as np
import pytest

from qlens.errors import DegenerateWindowError, LegError
from qlens.expr import normalize, parse, rewrite_rules, shift_degree
from qlens.models import RepParams
from qlens.rep import (
    MERGED,
    Irrep,
    IrrepTarget,
    Legs,
    LegsTarget,
    Merged,
    TruncOp,
    compact_tail,
    edge_safe_deviation,
    edge_safe_equal,
    eigenvalue,
    irrep_generator,
    legs_generator,
    merged_generator,
    norm_below,
    normality_deviation,
    op_norm,
    relation_checks,
    rep_expr,
    rep_normalform,
    safe_indices,
    safe_norm,
    scaling_deviation,
    weight,
)


@pytest.fixture(params=[1, 2])
def params(request):
    return RepParams(q=0.5, l=request.param, N=24, W=6)


def test_weight_and_eigenvalue():
    """w_{0,s} = 0 and, for l = 1, w_{p,1} = sqrt(1 - q^2p)."""
    assert weight(0, 1, 0.5, 2) == 0.0
    assert weight(3, 1, 0.5, 1) == pytest.approx(math.sqrt(1 - 0.5**6))
    assert weight(2, 2, 0.5, 2) == pytest.approx(math.sqrt((1 - 0.5**10) * (1 - 0.5**8)))
    assert eigenvalue(2, 1, 0.5, 3) == 0.5**7


def test_irrep_generators(params):
    c = irrep_generator("c", params, 1)
    d = irrep_generator("d", params, 1)
    assert c.basis == Irrep(1, params.N)
    for p in range(1, params.N):
        assert c.entry(p - 1, p) == weight(p, 1, params.q, params.l)
        assert d.entry(p, p) == eigenvalue(p, 1, params.q, params.l)
    assert c.entry(0, 0) == 0


def test_irrep_character_scales_d():
    params = RepParams(q=0.5, l=2, N=8, lam=1j)
    d = irrep_generator("d", params, 2)
    assert d.entry(3, 3) == 1j * 0.5**8
    assert irrep_generator("d", params, 2, lam=1.0).entry(3, 3) == 0.5**8


@pytest.mark.parametrize("s", [0, 3])
def test_leg_out_of_range(s):
    with pytest.raises(LegError, match="out of range"):
        irrep_generator("c", RepParams(l=2, N=8), s)


def test_unknown_generator():
    with pytest.raises(ValueError, match="Unknown generator"):
        legs_generator("x", RepParams(N=8))


def test_relations_hold_edge_safely(params):
    """Every rewrite rule holds in each irreducible model and in the merged model."""
    targets = [IrrepTarget(s) for s in range(1, params.l + 1)] + [LegsTarget(), MERGED]
    for target in targets:
        deviations = relation_checks(params, target)
        assert len(deviations) == 7
        assert max(deviations.values()) < 1e-10, (target, deviations)
        assert normality_deviation(params, target) < 1e-12


def test_relations_fail_with_wrong_weight():
    """The rules of weight l do not hold in the models of weight l + 1."""
    rules_l1 = relation_checks(RepParams(q=0.5, l=1, N=24), IrrepTarget(1))
    assert max(rules_l1.values()) < 1e-10
    wrong = RepParams(q=0.5, l=2, N=24)
    rule = rewrite_rules(1)["dc"][0][0]
    d = irrep_generator("d", wrong, 1)
    c = irrep_generator("c", wrong, 1)
    coeff = rule.evaluate(wrong.q)
    assert edge_safe_deviation(d @ c, (c @ d).scale(coeff), 2) > 1e-3


def test_character_does_not_change_c():
    params = RepParams(q=0.5, l=2, N=16)
    assert scaling_deviation(params, 1j) == (0.0, 0.0)


def test_compact_tail_within_bound(params):
    norm, bound = compact_tail(params)
    assert norm <= bound
    assert bound == 2 * params.q ** (2 * ((params.N // 2) * params.l + 1 - params.l))


def test_merged_generators_move_windows():
    params = RepParams(q=0.5, l=2, N=8, W=4)
    basis = Merged(params.l, params.W, params.N)
    c = merged_generator("c", params)
    d = merged_generator("d", params)
    src = basis.index(1, 2, 5)
    assert d.entry(basis.index(0, 2, 5), src) == eigenvalue(5, 2, 0.5, 2)
    assert c.entry(basis.index(1, 2, 4), src) == weight(5, 2, 0.5, 2)
    assert d.entry(basis.index(-params.W, 1, 0), basis.index(-params.W, 1, 0)) == 0


def test_rep_expr_matches_normal_form(params):
    """Direct evaluation of a tree and evaluation of its normal form agree edge-safely."""
    text = "(c + d*)^2 . c* - q^-1 . d . c"
    e = parse(text)
    nf = normalize(e, params.l)
    margin = shift_degree(e) + 1
    for target in (IrrepTarget(1), LegsTarget(), MERGED):
        direct = rep_expr(e, target, params)
        via_nf = rep_normalform(nf, target, params)
        assert edge_safe_equal(direct, via_nf, margin, 1e-10)


def test_zero_normal_form_has_zero_operator(params):
    e = parse(f"d . c - q^-{params.l} . c . d")
    assert normalize(e, params.l).is_zero()
    assert norm_below(rep_expr(e, MERGED, params), shift_degree(e) + 1, 1e-8)
    nonzero = parse("c . d")
    assert not norm_below(rep_expr(nonzero, MERGED, params), 3, 1e-8)


def test_safe_indices():
    legs = Legs(2, 8)
    idx = safe_indices(legs, 3)
    assert list(idx) == [0, 1, 2, 3, 4, 8, 9, 10, 11, 12]
    merged = Merged(1, 4, 8)
    assert len(safe_indices(merged, 2)) == 3 * 6


def test_degenerate_windows():
    with pytest.raises(DegenerateWindowError, match="no safe window"):
        safe_indices(Legs(1, 8), 8)
    with pytest.raises(DegenerateWindowError, match="W = 4"):
        safe_indices(Merged(1, 4, 16), 4)
    with pytest.raises(ValueError, match="nonnegative"):
        safe_indices(Irrep(1, 8), -1)


def test_norms():
    basis = Legs(2, 8)
    identity = TruncOp.identity(basis)
    assert op_norm(identity) == pytest.approx(1.0)
    assert op_norm(TruncOp.zero(basis)) == 0.0
    assert safe_norm(identity.scale(2.0), 1) == pytest.approx(2.0)
    assert norm_below(TruncOp.zero(basis), 1, 1e-12)
    assert not norm_below(identity.scale(1e-6), 1, 1e-8)


def test_trunc_op_algebra():
    basis = Irrep(1, 4)
    a = TruncOp.from_dense(basis, np.arange(16).reshape(4, 4) * (1 + 1j))
    assert np.allclose(a.adjoint().to_dense(), a.to_dense().conj().T)
    assert np.allclose((a @ a).to_dense(), a.to_dense() @ a.to_dense())
    assert np.allclose((a - a).to_dense(), 0)
    assert np.allclose((-a + a).to_dense(), 0)
    summed = TruncOp.from_entries(basis, [0, 0], [1, 1], [1.0, 2.0])
    assert summed.entry(0, 1) == 3.0


def test_trunc_op_basis_mismatch():
    with pytest.raises(ValueError, match="Basis mismatch"):
        TruncOp.identity(Irrep(1, 4)) + TruncOp.identity(Irrep(2, 4))
    with pytest.raises(ValueError, match="does not match dimension"):
        TruncOp.from_dense(Irrep(1, 4), np.eye(3))


def test_normal_form_weight_mismatch():
    with pytest.raises(ValueError, match="parameters have l=2"):
        rep_normalform(normalize("c", 1), LegsTarget(), RepParams(l=2, N=8))
