import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlens.coeff import QLaurent
from qlens.errors import ExprSyntaxError
from qlens.expr import (
    Adjoint,
    Generator,
    Monomial,
    NormalForm,
    Power,
    Product,
    Scalar,
    Sum,
    adjoint_word,
    degree_decompose,
    normalize,
    normalize_word,
    parse,
    rewrite_rules,
    shift_degree,
    wp_generators,
)

words = st.text(alphabet="cCdD", min_size=0, max_size=6)


@pytest.fixture(params=[1, 2, 3])
def l(request):
    return request.param


def test_parse_tree_shapes():
    """Products bind tighter than sums; * and ^ are postfix."""
    assert parse("c") == Generator("c")
    assert parse("d*") == Adjoint(Generator("d"))
    assert parse("c . d") == Product((Generator("c"), Generator("d")))
    assert parse("c^2") == Power(Generator("c"), 2)
    tree = parse("c + q^-1 . d")
    assert isinstance(tree, Sum)
    assert tree.terms[1] == Product((Scalar(QLaurent.q(-1)), Generator("d")))


@pytest.mark.parametrize(
    "text, position",
    [("c . ", 4), ("c +* d", 3), ("(c . d", 6), ("x", 0), ("3/0", 3), ("", 0)],
)
def test_parse_errors(text, position):
    """Syntax errors carry the offending text and the position of the failure."""
    with pytest.raises(ExprSyntaxError) as info:
        parse(text)
    assert info.value.position == position
    assert info.value.text == text


def test_parse_error_is_value_error():
    with pytest.raises(ValueError):
        parse("c ..")


def test_shift_degree():
    assert shift_degree(parse("3")) == 0
    assert shift_degree(parse("c . d* + d")) == 2
    assert shift_degree(parse("(c . d)^3")) == 6
    assert shift_degree(parse("-(c*)")) == 1


def test_basic_commutation(l):
    """d c = q^-l c d and the other q-commutations."""
    assert normalize("d . c", l) == normalize(f"q^-{l} . c . d", l)
    assert normalize("d* . c", l) == normalize(f"q^-{l} . c . d*", l)
    assert normalize("d . c*", l) == normalize(f"q^{l} . c* . d", l)
    assert normalize("d* . d", l) == normalize("d . d*", l)


def test_format_of_commutation():
    assert normalize("d . c", 2).format() == "q^-2 . c . d"
    assert normalize("c . c*", 1).format() == "1 - d . d*"
    assert normalize("0", 2).format() == "0"
    assert normalize("-c", 2).format() == "-c"


def test_sphere_relations():
    """For l = 1: c c* + d d* = 1 and c* c + q^-2 d d* = 1."""
    assert normalize("c . c* + d . d*", 1) == NormalForm.one(1)
    assert normalize("c* . c + q^-2 . d . d*", 1) == NormalForm.one(1)


def test_cc_star_product_formula(l):
    """c c* = prod_{m<l} (1 - q^2m d d*)."""
    expected = NormalForm.one(l)
    for m in range(l):
        expected = expected * normalize(f"1 - q^{2 * m} . d . d*", l)
    assert normalize("c . c*", l) == expected


def test_rewrite_rules_cover_all_pairs(l):
    """The seven offending pairs, each rewriting to PBW-ordered words."""
    rules = rewrite_rules(l)
    assert set(rules) == {"dc", "Dc", "dC", "DC", "Dd", "cC", "Cc"}
    for replacements in rules.values():
        for coeff, word in replacements:
            assert not coeff.is_zero()
            Monomial.from_word(word)
    assert len(rules["cC"]) == l + 1


@given(words)
@settings(max_examples=50, deadline=None)
def test_random_redex_order_is_confluent(word):
    """Reducing at random redexes reaches the same normal form as leftmost reduction."""
    rng = np.random.default_rng(len(word))
    for l in (1, 2, 3):
        assert normalize_word(word, l, rng) == normalize_word(word, l)


@given(words, words)
@settings(max_examples=50, deadline=None)
def test_product_is_associative(u, v):
    l = 2
    a = NormalForm.from_words(l, {u: QLaurent.one()})
    b = NormalForm.from_words(l, {v: QLaurent.q()})
    c = normalize("c* + d", l)
    assert (a * b) * c == a * (b * c)


@given(words)
@settings(max_examples=50, deadline=None)
def test_adjoint_is_an_involution(word):
    nf = NormalForm.from_words(2, {word: QLaurent.q(1)})
    assert nf.adjoint().adjoint() == nf
    assert adjoint_word(adjoint_word(word)) == word


def test_adjoint_reverses_products():
    x, y = normalize("c + 2 . d", 2), normalize("c* . d - i", 2)
    assert (x * y).adjoint() == y.adjoint() * x.adjoint()


def test_normalize_word_is_irreducible():
    result = normalize_word("DcCd", 2)
    for word in result:
        assert Monomial.from_word(word).word() == word


def test_normalize_word_rejects_bad_weight():
    with pytest.raises(ValueError, match="positive integer"):
        normalize_word("cd", 0)
    with pytest.raises(ValueError, match="positive integer"):
        normalize("c", 0)


def test_monomial_degree():
    assert Monomial.from_word("ccdD").degree == 2
    assert Monomial.from_word("CdD").degree == -1
    assert Monomial(False, 0, 3, 0).degree == -3
    with pytest.raises(ValueError, match="PBW order"):
        Monomial.from_word("dc")


def test_degree_decompose(l):
    nf = normalize("c + d + c . d + 1", l)
    parts = degree_decompose(nf)
    assert sorted(parts) == [-1, 0, 1]
    assert parts[1] == normalize("c", l)
    assert parts[-1] == normalize("d", l)
    assert parts[0] == normalize("c . d + 1", l)
    total = parts[-1] + parts[0] + parts[1]
    assert total == nf
    assert degree_decompose(normalize("0", l)) == {}


def test_homogeneous_degree():
    assert normalize("c . d*", 2).homogeneous_degree() == 2
    assert normalize("c + d", 2).homogeneous_degree() is None


def test_normal_form_powers():
    c = NormalForm.generator(2, "c")
    assert c ** 0 == NormalForm.one(2)
    assert c ** 3 == normalize("c . c . c", 2)
    with pytest.raises(ValueError, match="nonnegative"):
        c ** -1


def test_mixed_weights_rejected():
    with pytest.raises(ValueError, match="different weights"):
        NormalForm.one(1) + NormalForm.one(2)


def test_format_round_trip(l):
    nf = normalize("(c + i . d* - 1/2 . q^3 . c*)^2 + q^-1 . d", l)
    assert normalize(nf.format(), l) == nf


def test_wp_generators():
    b, a = wp_generators(2)
    assert b == normalize("c . d", 2)
    assert a == normalize("d . d*", 2)
    assert b.homogeneous_degree() == 0
    assert a.homogeneous_degree() == 0
