"""Acceptance suites behind the CLI subcommands.

Each suite takes a :class:`RunConfig` and returns a :class:`CheckReport`. Samples
draw from ``numpy.random.default_rng([seed, index])`` so that reports do not depend
on how many worker threads ran them.
"""
from __future__ import annotations

import cmath
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import QLensError
from .expr import ExprTree, normalize, normalize_word, shift_degree
from .groupoid import (
    Morphism,
    chi_element,
    compose,
    convolve,
    degree_component,
    embed_generator,
    embed_normalform,
    induced_rep,
    inverse,
    involve,
    max_difference,
    rho_n,
    rho_n_via,
)
from .models import CheckReport, CheckResult, KInvariant, RepParams, RunConfig
from .modules import (
    canonical_projection,
    is_isomorphic,
    k_invariant,
    line_bundle_model,
    line_bundle_projection,
    load_projection,
    verify_line_bundle_iso,
    verify_projection,
    wp_matrix_units,
)
from .rep import (
    MERGED,
    IrrepTarget,
    compact_tail,
    edge_safe_deviation,
    merged_generator,
    norm_below,
    normality_deviation,
    relation_checks,
    rep_expr,
    scaling_deviation,
)
from .sampling import (
    random_expression,
    random_fin_supp,
    random_generator_element,
    random_invariant,
    random_normal_form,
    random_unitary,
    random_zero_expression,
)
from .structure import (
    CircleLaurent,
    character_pi0,
    eval_loop,
    in_ideal,
    lift,
    matched_symbols,
    symbol,
    symbol_band,
    toeplitz_symbol,
    truncation_bound,
)

logger = logging.getLogger(__name__)

GRID_L = (1, 2, 3)
GRID_Q = (0.3, 0.5, 0.8)
RELATION_TOL = 1e-10
ZERO_TOL = 1e-8
HOMOMORPHISM_TOL = 1e-10
ASSOCIATIVITY_TOL = 1e-12
LAMBDAS = (1 + 0j, 1j, cmath.exp(0.3j))

Task = Callable[[], CheckResult]


def worker_threads() -> int:
    """Worker threads for independent samples, from QLENS_THREADS (default 1)."""
    raw = os.environ.get("QLENS_THREADS")
    if raw is None:
        return 1
    try:
        threads = int(raw)
    except ValueError:
        threads = 0
    if threads < 1:
        logger.warning("Ignoring invalid QLENS_THREADS=%r; using 1 thread", raw)
        return 1
    return threads


def run_tasks(tasks: Sequence[Task]) -> list[CheckResult]:
    """Run tasks on the worker pool; results keep submission order."""
    threads = worker_threads()
    if threads == 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda task: task(), tasks))


def sample_rng(config: RunConfig, *index: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, *index])


def _grid(config: RunConfig, grid: bool) -> list[tuple[int, float]]:
    if grid:
        return [(l, q) for l in GRID_L for q in GRID_Q]
    return [(config.l, config.q)]


def _report(command: str, config: RunConfig, checks: list[CheckResult], **result) -> CheckReport:
    passed = all(c.passed for c in checks)
    for c in checks:
        if not c.passed:
            logger.warning(
                "%s: check %s failed (max deviation %.3e)", command, c.name, c.max_deviation
            )
    return CheckReport(command=command, passed=passed, config=config, checks=checks, result=result)


def _timed(name: str, fn: Task) -> Task:
    def run() -> CheckResult:
        start = time.perf_counter()
        result = fn()
        logger.debug("%s took %.3fs", name, time.perf_counter() - start)
        return result

    return run


# ---------------------------------------------------------------------------
# Operators and rewriting
# ---------------------------------------------------------------------------


def _relations_task(config: RunConfig, l: int, q: float) -> CheckResult:
    params = config.rep_params(l=l, q=q)
    devs: dict[str, float] = {}
    targets = [(f"irrep{s}", IrrepTarget(s)) for s in range(1, l + 1)] + [("merged", MERGED)]
    for label, target in targets:
        for rule, dev in relation_checks(params, target, tol=RELATION_TOL).items():
            devs[f"{label}:{rule}"] = dev
        devs[f"{label}:normal"] = normality_deviation(params, target)
    dev_c, dev_d = scaling_deviation(params, 1j)
    devs["lambda:c"], devs["lambda:d"] = dev_c, dev_d
    tail, bound = compact_tail(params)
    worst = max(devs.values())
    passed = worst < RELATION_TOL and dev_c == 0 and dev_d == 0 and tail <= bound
    return CheckResult(
        name=f"relations l={l} q={q}",
        passed=passed,
        max_deviation=worst,
        samples=len(devs),
        details={"compact_tail": tail, "compact_tail_bound": bound},
    )


def verify_relations(config: RunConfig, grid: bool = False) -> CheckReport:
    """The rewrite rules as edge-safe operator identities in every model."""
    tasks = [
        _timed(f"relations l={l} q={q}", lambda l=l, q=q: _relations_task(config, l, q))
        for l, q in _grid(config, grid)
    ]
    return _report("verify-relations", config, run_tasks(tasks))


def _with_room(params: RepParams, margin: int) -> RepParams:
    """params, widened so that an edge-safe window of the given margin is not empty."""
    N, W = max(params.N, margin + 2), max(params.W, margin + 2)
    if (N, W) != (params.N, params.W):
        logger.debug("widening truncation to N=%d W=%d for margin %d", N, W, margin)
        return params.replace(N=N, W=W)
    return params


def zero_agreement(e: ExprTree, l: int, params: RepParams) -> tuple[bool, bool]:
    """(normal form is zero, merged representation vanishes edge-safely) for one expression."""
    margin = shift_degree(e) + 1
    op = rep_expr(e, MERGED, _with_room(params, margin))
    return normalize(e, l).is_zero(), norm_below(op, margin, ZERO_TOL)


def _faithful_task(config: RunConfig, l: int, q: float, index: int) -> CheckResult:
    params = config.rep_params(l=l, q=q)
    rng = sample_rng(config, l, index)
    disagreements = 0
    zeros = 0
    for i in range(config.samples):
        if i % 2:
            e = random_zero_expression(rng, l)
        else:
            e = random_expression(rng)
        nf_zero, op_zero = zero_agreement(e, l, params)
        zeros += nf_zero
        if nf_zero != op_zero:
            disagreements += 1
            logger.debug("faithfulness disagreement at l=%d q=%s sample %d", l, q, i)
    return CheckResult(
        name=f"faithful l={l} q={q}",
        passed=disagreements == 0,
        max_deviation=float(disagreements),
        samples=config.samples,
        details={"disagreements": disagreements, "zero_normal_forms": zeros},
    )


def _confluence_task(config: RunConfig, l: int) -> CheckResult:
    rng = sample_rng(config, l, 999)
    mismatches = 0
    for _ in range(config.samples):
        word = "".join(rng.choice(list("cCdD"), size=int(rng.integers(2, 7))))
        if normalize_word(word, l, rng) != normalize_word(word, l):
            mismatches += 1
    return CheckResult(
        name=f"confluence l={l}",
        passed=mismatches == 0,
        max_deviation=float(mismatches),
        samples=config.samples,
    )


def check_faithful(config: RunConfig, grid: bool = False) -> CheckReport:
    """Normal form zero iff the merged representation vanishes edge-safely."""
    pairs = _grid(config, grid)
    tasks: list[Task] = [
        _timed(f"faithful l={l} q={q}", lambda l=l, q=q, i=i: _faithful_task(config, l, q, i))
        for i, (l, q) in enumerate(pairs)
    ]
    tasks += [lambda l=l: _confluence_task(config, l) for l in sorted({l for l, _ in pairs})]
    return _report("check-faithful", config, run_tasks(tasks))


# ---------------------------------------------------------------------------
# Groupoid
# ---------------------------------------------------------------------------


def _axioms_task(config: RunConfig) -> CheckResult:
    rng = sample_rng(config, 1)
    failures = 0
    for _ in range(config.samples):
        s = int(rng.integers(1, config.l + 1))
        p3 = int(rng.integers(0, 6))
        m3, m2, m1 = (int(x) for x in rng.integers(-2, 3, size=3))
        if p3 + m3 < 0 or p3 + m3 + m2 < 0 or p3 + m3 + m2 + m1 < 0:
            continue
        k1, k2, k3 = (int(x) for x in rng.integers(-2, 3, size=3))
        g3 = Morphism.at(k3, m3, s, p3)
        g2 = Morphism.at(k2, m2, s, p3 + m3)
        g1 = Morphism.at(k1, m1, s, p3 + m3 + m2)
        ok = compose(compose(g1, g2), g3) == compose(g1, compose(g2, g3))
        ok &= compose(inverse(g1), g1).is_unit and compose(g1, inverse(g1)).is_unit
        ok &= inverse(inverse(g1)) == g1
        unit = compose(inverse(g3), g3)
        ok &= compose(unit, unit) == unit
        failures += not ok
    return CheckResult(
        name="groupoid axioms",
        passed=failures == 0,
        max_deviation=float(failures),
        samples=config.samples,
    )


def _homomorphism_task(config: RunConfig) -> CheckResult:
    params = config.rep_params()
    rng = sample_rng(config, 2)
    margin = config.margin
    worst_mult = worst_star = worst_assoc = 0.0
    for _ in range(config.samples):
        f, g, h = (random_fin_supp(rng, config.l) for _ in range(3))
        rf, rg = induced_rep(f, params), induced_rep(g, params)
        product = induced_rep(convolve(f, g), params)
        worst_mult = max(worst_mult, edge_safe_deviation(product, rf @ rg, margin))
        star = induced_rep(involve(f), params)
        worst_star = max(worst_star, edge_safe_deviation(star, rf.adjoint(), margin))
        left, right = convolve(convolve(f, g), h), convolve(f, convolve(g, h))
        worst_assoc = max(worst_assoc, max_difference(left, right, horizon=12))
    passed = (
        worst_mult < HOMOMORPHISM_TOL
        and worst_star < HOMOMORPHISM_TOL
        and worst_assoc < ASSOCIATIVITY_TOL
    )
    return CheckResult(
        name="induced representation",
        passed=passed,
        max_deviation=max(worst_mult, worst_star, worst_assoc),
        samples=config.samples,
        details={"multiplicative": worst_mult, "adjoint": worst_star, "associativity": worst_assoc},
    )


def _embedding_task(config: RunConfig) -> CheckResult:
    params = config.rep_params()
    devs = {}
    for g in ("c", "d"):
        embedded = induced_rep(embed_generator(g, params), params)
        diff = embedded.matrix - merged_generator(g, params).matrix
        devs[g] = float(np.abs(diff.data).max()) if diff.nnz else 0.0
    return CheckResult(
        name="generator embedding",
        passed=all(v == 0 for v in devs.values()),
        max_deviation=max(devs.values()),
        samples=2,
        details=devs,
    )


def _embed_homomorphism_task(config: RunConfig) -> CheckResult:
    params = config.rep_params()
    rng = sample_rng(config, 3)
    horizon = 2 * config.N
    worst = 0.0
    sound = True
    count = max(1, config.samples // 10)
    for _ in range(count):
        x = random_normal_form(rng, config.l, terms=2)
        y = random_normal_form(rng, config.l, terms=2)
        fx, fy = embed_normalform(x, params), embed_normalform(y, params)
        product = embed_normalform(x * y, params)
        worst = max(worst, max_difference(product, convolve(fx, fy), horizon=12))
        adjoint = embed_normalform(x.adjoint(), params)
        worst = max(worst, max_difference(adjoint, involve(fx), horizon=12))
        sound &= product.sample_decay(horizon)
    return CheckResult(
        name="embedding homomorphism",
        passed=worst < 1e-9 and sound,
        max_deviation=worst,
        samples=count,
        details={"decay_certificates_sound": sound},
    )


def groupoid_check(config: RunConfig) -> CheckReport:
    tasks = [
        _timed("axioms", lambda: _axioms_task(config)),
        _timed("homomorphism", lambda: _homomorphism_task(config)),
        _timed("embedding", lambda: _embedding_task(config)),
        _timed("embed homomorphism", lambda: _embed_homomorphism_task(config)),
    ]
    return _report("groupoid-check", config, run_tasks(tasks))


# ---------------------------------------------------------------------------
# Grading
# ---------------------------------------------------------------------------


def _grading_law_task(config: RunConfig) -> CheckResult:
    params = config.rep_params()
    rng = sample_rng(config, 4)
    worst = 0.0
    count = max(1, config.samples // 10)
    for _ in range(count):
        x = random_normal_form(rng, config.l, terms=2)
        y = random_normal_form(rng, config.l, terms=2)
        # exact grading of normal forms
        parts = (x * y).degree_decompose()
        for n, part in parts.items():
            expected = None
            for a, xa in x.degree_decompose().items():
                yb = y.degree_decompose().get(n - a)
                if yb is not None:
                    expected = xa * yb if expected is None else expected + xa * yb
            if expected is None or expected != part:
                worst = max(worst, 1.0)
        f, g = embed_normalform(x, params), embed_normalform(y, params)
        fg = convolve(f, g)
        for n in fg.degrees():
            expected_el = None
            for a in f.degrees():
                if n - a in g.degrees():
                    term = convolve(degree_component(f, a), degree_component(g, n - a))
                    expected_el = term if expected_el is None else expected_el + term
            if expected_el is None:
                worst = max(worst, 1.0)
                continue
            worst = max(worst, max_difference(degree_component(fg, n), expected_el, horizon=10))
        fstar = involve(f)
        if {-n for n in f.degrees()} != fstar.degrees():
            worst = max(worst, 1.0)
    return CheckResult(
        name="grading law", passed=worst < 1e-9, max_deviation=worst, samples=count
    )


def _rho_task(config: RunConfig) -> CheckResult:
    params = config.rep_params()
    rng = sample_rng(config, 5)
    worst_m = worst_chi = 0.0
    for n in range(-3, 4):
        _, f = random_generator_element(rng, params, degree=n)
        a, b = rho_n_via(f, n, 0, params), rho_n_via(f, n, 3, params)
        direct = rho_n(f, n, params)
        worst_m = max(worst_m, _max_abs(a.matrix - b.matrix), _max_abs(a.matrix - direct.matrix))
        # chi_{C_n} goes to the shift with ones at (p - n, p) on every leg
        T = rho_n(chi_element(n, config.l), n, params).to_dense()
        expected = np.kron(np.eye(config.l), np.eye(config.N, k=n))
        model_T = np.stack(_legs(T, config.l, config.N))
        worst_chi = max(
            worst_chi,
            float(np.abs(T - expected).max()),
            float(np.abs(line_bundle_model(n, params).T - model_T).max()),
        )
    return CheckResult(
        name="rho_n independence",
        passed=worst_m == 0 and worst_chi == 0,
        max_deviation=max(worst_m, worst_chi),
        samples=7,
        details={"m_independence": worst_m, "chi_shift": worst_chi},
    )


def _max_abs(matrix) -> float:
    return float(np.abs(matrix.data).max()) if matrix.nnz else 0.0


def _module_consistency_task(config: RunConfig) -> CheckResult:
    params = config.rep_params()
    rng = sample_rng(config, 6)
    worst = 0.0
    bound = truncation_bound(config.q, config.l, config.N)
    for n in range(-3, 4):
        model = line_bundle_model(n, params)
        nf, f = random_generator_element(rng, params, degree=n)
        X = np.stack(_legs(rho_n(f, n, params).to_dense(), config.l, config.N))
        _, lam, residual = model.decompose(X)
        coefficient_error = abs(lam - symbol(f).coeffs.get(n, 0j))
        scale = 1 + sum(abs(complex(c.evaluate(config.q))) for c in nf.terms.values())
        worst = max(worst, (residual + coefficient_error) / scale)
    units, unit_dev = wp_matrix_units(params.replace(N=min(config.N, 32)))
    return CheckResult(
        name="line bundle models",
        passed=worst <= max(bound, 1e-9) and unit_dev < 1e-9,
        max_deviation=max(worst, unit_dev),
        samples=7,
        details={"tail_bound": bound, "wp_matrix_units": units, "wp_unit_deviation": unit_dev},
    )


def _legs(dense: np.ndarray, l: int, N: int) -> list[np.ndarray]:
    return [dense[s * N:(s + 1) * N, s * N:(s + 1) * N] for s in range(l)]


def grading_check(config: RunConfig) -> CheckReport:
    tasks = [
        _timed("grading law", lambda: _grading_law_task(config)),
        _timed("rho_n", lambda: _rho_task(config)),
        _timed("module consistency", lambda: _module_consistency_task(config)),
    ]
    return _report("grading-check", config, run_tasks(tasks))


# ---------------------------------------------------------------------------
# Structure
# ---------------------------------------------------------------------------


def _exact_sequence_task(config: RunConfig) -> CheckResult:
    params = config.rep_params()
    rng = sample_rng(config, 7)
    c, d = embed_generator("c", params), embed_generator("d", params)
    exact = (
        symbol(c) == CircleLaurent.monomial(1)
        and symbol(d).is_zero()
        and in_ideal(d)
        and not in_ideal(c)
    )
    failures = 0
    worst_mult = 0.0
    for _ in range(config.samples):
        _, f = random_generator_element(rng, params)
        _, g = random_generator_element(rng, params)
        failures += not in_ideal(f - lift(symbol(f), config.l))
        failures += symbol(lift(symbol(f), config.l)) != symbol(f)
        worst_mult = max(worst_mult, symbol(convolve(f, g)).distance(symbol(f) * symbol(g)))
        mu = cmath.exp(1j * float(rng.uniform(0, 2 * np.pi)))
        worst_mult = max(
            worst_mult,
            abs(character_pi0(convolve(f, g), mu) - character_pi0(f, mu) * character_pi0(g, mu)),
        )
    return CheckResult(
        name="exact sequence",
        passed=exact and failures == 0 and worst_mult < ASSOCIATIVITY_TOL,
        max_deviation=worst_mult,
        samples=config.samples,
        details={"generator_symbols_exact": exact, "ideal_failures": failures},
    )


def _matched_symbols_task(config: RunConfig) -> CheckResult:
    params = config.rep_params()
    rng = sample_rng(config, 8)
    tol = max(truncation_bound(config.q, config.l, config.N), 1e-9)
    worst = 0.0
    count = max(1, config.samples // 10)
    for _ in range(count):
        _, f = random_generator_element(rng, params)
        band = symbol_band(f)
        expected = symbol(f)
        for lam in LAMBDAS:
            for s, got in enumerate(matched_symbols(f, lam, params, band), start=1):
                worst = max(worst, got.distance(expected))
                mu = LAMBDAS[2]
                loop = toeplitz_symbol(eval_loop(f, lam, s, config.N), band, band + 1, tol)
                worst = max(worst, abs(loop.evaluate(mu) - character_pi0(f, mu)))
    return CheckResult(
        name="matched symbols",
        passed=worst <= tol,
        max_deviation=worst,
        samples=count,
        details={"truncation_bound": tol},
    )


def structure_check(config: RunConfig) -> CheckReport:
    tasks = [
        _timed("exact sequence", lambda: _exact_sequence_task(config)),
        _timed("matched symbols", lambda: _matched_symbols_task(config)),
    ]
    return _report("structure-check", config, run_tasks(tasks))


# ---------------------------------------------------------------------------
# Modules
# ---------------------------------------------------------------------------


def _round_trip_task(config: RunConfig) -> CheckResult:
    failures = 0
    total = 0
    N = min(config.N, 16)
    for l in GRID_L:
        for rho in range(4):
            for t in np.ndindex(*([9] * l)):
                ts = tuple(int(x) - 4 for x in t)
                if rho == 0 and min(ts) < 0:
                    continue
                inv = KInvariant(rho=rho, t=ts)
                total += 1
                failures += k_invariant(canonical_projection(inv, l, N)) != inv
    return CheckResult(
        name="classification round trip",
        passed=failures == 0,
        max_deviation=float(failures),
        samples=total,
    )


def _additivity_task(config: RunConfig) -> CheckResult:
    rng = sample_rng(config, 9)
    N = min(config.N, 16)
    failures = 0
    count = 50
    for _ in range(count):
        a, b = random_invariant(rng, config.l), random_invariant(rng, config.l)
        P, Q = canonical_projection(a, config.l, N), canonical_projection(b, config.l, N)
        failures += k_invariant(P.direct_sum(Q)) != a + b
        U = random_unitary(P.r, config.l, N, rng)
        failures += not is_isomorphic(P, P.conjugate(U))
    return CheckResult(
        name="additivity and unitary invariance",
        passed=failures == 0,
        max_deviation=float(failures),
        samples=count,
    )


def classify(config: RunConfig, path: Optional[Union[str, Path]] = None) -> CheckReport:
    """Classify a projection file, or run the classification suite without one."""
    if path is None:
        checks = run_tasks(
            [_timed("round trip", lambda: _round_trip_task(config)),
             _timed("additivity", lambda: _additivity_task(config))]
        )
        return _report("classify", config, checks)
    P = load_projection(Path(path))
    verification = verify_projection(P, config.tol)
    result: dict = {"verification": verification.model_dump()}
    checks = [
        CheckResult(
            name="projection",
            passed=verification.passed,
            max_deviation=max(verification.idempotency_defect, verification.selfadjoint_defect),
        )
    ]
    if verification.passed:
        inv = k_invariant(P, config.tol)
        canonical = canonical_projection(inv, P.l, P.N)
        result.update(invariant=inv.as_list(), canonical_size=canonical.r)
    return _report("classify", config, checks, **result)


def _line_bundle_result(config: RunConfig, n: int, l: int, samples: int) -> CheckResult:
    N = min(config.N, 32)
    params = config.rep_params(l=l, N=N)
    P = line_bundle_projection(n, l, N)
    inv = k_invariant(P, config.tol)
    expected = KInvariant(rho=1, t=(n,) * l)
    iso = verify_line_bundle_iso(n, params, samples, config.tol, sample_rng(config, 10, n + 100, l))
    free = KInvariant(rho=1, t=(0,) * l)
    return CheckResult(
        name=f"line bundle n={n} l={l}",
        passed=inv == expected and iso.passed and (inv != free) == (n != 0),
        max_deviation=iso.max_deviation,
        samples=samples,
        details={
            "invariant": inv.as_list(),
            "free": inv == free,
            "projection_size": P.r,
            "iso": iso.model_dump(),
        },
    )


def line_bundle(config: RunConfig, n: Optional[int] = None) -> CheckReport:
    """One line bundle, or the index relation over n in [-4, 4] and l in {1, 2, 3}."""
    if n is not None:
        result = _line_bundle_result(config, n, config.l, config.samples)
        return _report("line-bundle", config, [result], invariant=result.details["invariant"])
    tasks = [
        (lambda n=n, l=l: _line_bundle_result(config, n, l, config.samples))
        for l in GRID_L
        for n in range(-4, 5)
    ]
    checks = run_tasks(tasks)
    L1 = line_bundle_projection(1, config.l, min(config.N, 32))
    free = canonical_projection(KInvariant(rho=1, t=(0,) * config.l), config.l, L1.N)
    return _report("line-bundle", config, checks, l1_free=is_isomorphic(L1, free))


# ---------------------------------------------------------------------------
# Everything
# ---------------------------------------------------------------------------


def report_all(config: RunConfig) -> CheckReport:
    suites = [
        verify_relations(config, grid=True),
        check_faithful(config, grid=True),
        groupoid_check(config),
        grading_check(config),
        structure_check(config),
        classify(config),
        line_bundle(config),
    ]
    checks = [
        check.model_copy(update={"name": f"{suite.command}: {check.name}"})
        for suite in suites
        for check in suite.checks
    ]
    return _report("report-all", config, checks, suites={s.command: s.passed for s in suites})


SUITES: dict[str, Callable[[RunConfig], CheckReport]] = {
    "verify-relations": verify_relations,
    "check-faithful": check_faithful,
    "groupoid-check": groupoid_check,
    "grading-check": grading_check,
    "structure-check": structure_check,
    "classify": classify,
    "line-bundle": line_bundle,
    "report-all": report_all,
}


def run_suite(name: str, config: RunConfig) -> CheckReport:
    try:
        suite = SUITES[name]
    except KeyError:
        raise QLensError(f"Unknown check {name!r}; available: {', '.join(SUITES)}") from None
    return suite(config)

