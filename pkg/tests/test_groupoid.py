import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qlens.errors import CompositionError, GradingError, InvalidMorphismError
from qlens.expr import normalize
from qlens.groupoid import (
    INFINITY,
    Decay,
    FinSupp,
    Finite,
    Layer,
    Morphism,
    Tailed,
    chi_element,
    combine,
    compose,
    convolve,
    degree_component,
    delta,
    embed_generator,
    embed_normalform,
    fin_supp,
    induced_column,
    induced_rep,
    inverse,
    involve,
    max_difference,
    rho_n,
    rho_n_via,
    unit_element,
)
from qlens.models import RepParams
from qlens.rep import edge_safe_deviation, merged_generator, rep_normalform, MERGED
from qlens.sampling import random_fin_supp, random_generator_element

small = st.integers(-3, 3)


@st.composite
def chains(draw):
    """Three composable morphisms g1, g2, g3 (g1 after g2 after g3)."""
    s = draw(st.integers(1, 2))
    p3 = draw(st.integers(0, 5))
    m3, m2, m1 = draw(small), draw(small), draw(small)
    assume(p3 + m3 >= 0 and p3 + m3 + m2 >= 0 and p3 + m3 + m2 + m1 >= 0)
    k1, k2, k3 = draw(small), draw(small), draw(small)
    g3 = Morphism.at(k3, m3, s, p3)
    g2 = Morphism.at(k2, m2, s, p3 + m3)
    g1 = Morphism.at(k1, m1, s, p3 + m3 + m2)
    return g1, g2, g3


@pytest.fixture
def params():
    return RepParams(q=0.5, l=2, N=24, W=6)


@given(chains())
def test_composition_is_associative(chain):
    g1, g2, g3 = chain
    assert compose(compose(g1, g2), g3) == compose(g1, compose(g2, g3))


@given(chains())
def test_inverses(chain):
    g, _, _ = chain
    assert compose(inverse(g), g).is_unit
    assert compose(g, inverse(g)).is_unit
    assert inverse(inverse(g)) == g
    assert compose(inverse(g), g).fiber == g.source
    assert compose(g, inverse(g)).fiber == g.range


def test_source_range_and_degree():
    g = Morphism.at(2, -1, 1, 3)
    assert g.source == Finite(1, 3)
    assert g.range == Finite(1, 2)
    assert g.degree == 3
    assert str(g) == "(2,-1,3)_1"
    oo = Morphism.at_infinity(4)
    assert oo.source == oo.range == INFINITY
    assert str(oo) == "(0,4,oo)"


def test_invalid_morphisms():
    with pytest.raises(InvalidMorphismError, match="leaves the nonnegative"):
        Morphism.at(0, -3, 1, 2).validate()
    with pytest.raises(InvalidMorphismError, match="k must be 0"):
        Morphism.at_infinity(0, k=1).validate()
    with pytest.raises(InvalidMorphismError, match="out of range 1..2"):
        Morphism.at(0, 0, 3, 0).validate(2)
    assert not Morphism.at(0, 0, 1, -1).is_valid()


def test_non_composable():
    with pytest.raises(CompositionError, match="not composable"):
        compose(Morphism.at(0, 1, 1, 0), Morphism.at(0, 1, 1, 0))
    with pytest.raises(CompositionError):
        compose(Morphism.at(0, 0, 1, 0), Morphism.at(0, 0, 2, 0))


def test_delta_convolution_follows_composition():
    """delta_g1 * delta_g2 = delta_(g1 g2) when composable, zero otherwise."""
    g2 = Morphism.at(1, 2, 1, 0)
    g1 = Morphism.at(-1, 1, 1, 2)
    product = convolve(delta(g1, 2), delta(g2, 2))
    assert isinstance(product, FinSupp)
    assert product.points == {(0, 3, 1, 0): 1}
    assert convolve(delta(g2, 2), delta(g1, 2)).points == {}


def test_delta_needs_finite_fiber():
    with pytest.raises(InvalidMorphismError, match="finite fibers"):
        delta(Morphism.at_infinity(1), 1)


def test_fin_supp_validates_points():
    with pytest.raises(InvalidMorphismError):
        fin_supp({(0, -2, 1, 1): 1.0}, 1)
    with pytest.raises(InvalidMorphismError):
        fin_supp({(0, 0, 2, 0): 1.0}, 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_convolution_algebra_laws(seed):
    """Associativity, bilinearity and (f * g)* = g* * f* on finitely supported elements."""
    rng = np.random.default_rng(seed)
    f, g, h = (random_fin_supp(rng, 2) for _ in range(3))
    assert max_difference(convolve(convolve(f, g), h), convolve(f, convolve(g, h)), 12) < 1e-12
    assert max_difference(convolve(f, g + h), convolve(f, g) + convolve(f, h), 12) < 1e-12
    assert max_difference(involve(convolve(f, g)), convolve(involve(g), involve(f)), 12) < 1e-12
    assert max_difference(involve(involve(f)), f, 12) == 0


def test_unit_element_is_neutral(params):
    rng = np.random.default_rng(3)
    f = random_fin_supp(rng, params.l)
    one = unit_element(params.l)
    assert max_difference(convolve(one, f), f, 12) == 0
    assert max_difference(convolve(f, one), f, 12) == 0


def test_induced_representation_is_a_homomorphism(params):
    rng = np.random.default_rng(11)
    for _ in range(5):
        f, g = random_fin_supp(rng, params.l), random_fin_supp(rng, params.l)
        rf, rg = induced_rep(f, params), induced_rep(g, params)
        assert edge_safe_deviation(induced_rep(convolve(f, g), params), rf @ rg, 5) < 1e-12
        assert edge_safe_deviation(induced_rep(involve(f), params), rf.adjoint(), 5) < 1e-12


def test_generator_embedding_is_exact(params):
    """rho~ of the embedded generators equals the merged model bit for bit."""
    for g in ("c", "d"):
        embedded = induced_rep(embed_generator(g, params), params)
        diff = embedded.matrix - merged_generator(g, params).matrix
        assert diff.nnz == 0 or np.abs(diff.data).max() == 0


def test_embedding_is_a_star_homomorphism(params):
    x = normalize("c . d* + 2 . d", params.l)
    y = normalize("c* - q . d . d*", params.l)
    fx, fy = embed_normalform(x, params), embed_normalform(y, params)
    assert max_difference(embed_normalform(x * y, params), convolve(fx, fy), 12) < 1e-12
    assert max_difference(embed_normalform(x.adjoint(), params), involve(fx), 12) < 1e-12
    rep = induced_rep(embed_normalform(x, params), params)
    assert edge_safe_deviation(rep, rep_normalform(x, MERGED, params), 4) < 1e-12


def test_embedding_of_relation_vanishes(params):
    """The image of c c* - prod (1 - q^2m d d*) is zero."""
    nf = normalize("c . c*", params.l)
    c = embed_generator("c", params)
    lhs = convolve(c, involve(c))
    assert max_difference(lhs, embed_normalform(nf, params), 16) < 1e-12


def test_tails_of_generators(params):
    c, d = embed_generator("c", params), embed_generator("d", params)
    assert c.tail(-1) == 1
    assert d.tail(0) == 0
    assert isinstance(c, Tailed)
    assert convolve(c, involve(c)).tail(0) == 1


def test_decay_certificates_are_sound(params):
    rng = np.random.default_rng(5)
    for _ in range(5):
        _, f = random_generator_element(rng, params)
        assert f.sample_decay(40)
        assert involve(f).sample_decay(40)
        assert convolve(f, f).sample_decay(40)


def test_decay_certificate_validation():
    assert Decay(2.0, 0.5).bound(3) == 0.25
    with pytest.raises(ValueError, match="Invalid decay"):
        Decay(-1.0, 0.5)
    with pytest.raises(ValueError, match="Invalid decay"):
        Decay(1.0, 1.5)


def test_layers_vanish_at_infinity_off_the_diagonal():
    with pytest.raises(InvalidMorphismError, match="vanish at infinity"):
        Layer(1, 0, tail_fn=lambda s, p: 1.0, tail=1.0)


def test_combine_and_evaluate():
    f = fin_supp({(0, 1, 1, 0): 2.0, (1, 0, 1, 4): 1j}, 1)
    g = combine([(2, f), (-1, f)])
    assert g.evaluate(Morphism.at(0, 1, 1, 0)) == 2.0
    assert g.value(1, 0, 1, 4) == 1j
    assert g.value(1, 0, 2, 4) == 0
    assert (f - f).support_layers() == []
    assert (3 * f).evaluate(Morphism.at(1, 0, 1, 4)) == 3j
    with pytest.raises(ValueError, match="different numbers of legs"):
        combine([(1, f), (1, fin_supp({}, 2))])


def test_chi_elements(params):
    """chi_{C_n} is the indicator of the layer (0, -n) and is multiplicative in n."""
    chi2 = chi_element(2, params.l)
    assert chi2.evaluate(Morphism.at(0, -2, 1, 5)) == 1
    assert chi2.evaluate(Morphism.at_infinity(-2)) == 1
    product = convolve(chi_element(1, params.l), chi_element(1, params.l))
    assert max_difference(product, chi2, 16) == 0


def test_degree_components(params):
    x = normalize("c + d + c . d*", params.l)
    f = embed_normalform(x, params)
    assert f.degrees() == {-1, 1, 2}
    for n, part in x.degree_decompose().items():
        assert max_difference(degree_component(f, n), embed_normalform(part, params), 12) < 1e-14


def test_induced_column():
    f = fin_supp({(1, -1, 1, 3): 2.0, (0, 2, 1, 3): 1.0}, 1)
    assert induced_column(f, 0, 1, 3) == {(1, 1, 2): 2.0, (0, 1, 5): 1.0}
    assert induced_column(f, 0, 1, 0) == {}


@pytest.mark.parametrize("n", [-2, 0, 1, 3])
def test_rho_n_is_independent_of_the_window(params, n):
    rng = np.random.default_rng(n + 10)
    _, f = random_generator_element(rng, params, degree=n)
    direct = rho_n(f, n, params).to_dense()
    for m in (0, 3):
        assert np.array_equal(rho_n_via(f, n, m, params).to_dense(), direct)


@pytest.mark.parametrize("n", [-3, 0, 2])
def test_rho_n_of_chi_is_a_shift(params, n):
    T = rho_n(chi_element(n, params.l), n, params).to_dense()
    assert np.array_equal(T, np.kron(np.eye(params.l), np.eye(params.N, k=n)))


def test_rho_n_needs_homogeneous_input(params):
    f = embed_normalform(normalize("c + d", params.l), params)
    with pytest.raises(GradingError, match="not homogeneous of degree 1"):
        rho_n(f, 1, params)


def test_leg_mismatch(params):
    with pytest.raises(ValueError, match="parameters have l=2"):
        induced_rep(fin_supp({}, 1), params)
    with pytest.raises(ValueError, match="Cannot convolve"):
        convolve(fin_supp({}, 1), fin_supp({}, 2))
