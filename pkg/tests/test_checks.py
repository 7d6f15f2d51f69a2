import json
import os
from contextlib import ExitStack
from unittest.mock import patch

import numpy as np
import pytest

from qlens import checks
from qlens.errors import QLensError
from qlens.expr import Neg, Sum, normalize, parse
from qlens.models import CheckResult, KInvariant, RunConfig
from qlens.modules import ProjectionRep, canonical_projection, dump_projection


@pytest.fixture
def small():
    return RunConfig(l=2, N=24, W=6, margin=5, samples=10)


def test_worker_threads_default():
    with patch.dict(os.environ, {}, clear=True):
        assert checks.worker_threads() == 1
    with patch.dict(os.environ, {"QLENS_THREADS": "4"}):
        assert checks.worker_threads() == 4


@pytest.mark.parametrize("raw", ["zero", "0", "-2"])
def test_worker_threads_invalid(raw):
    with patch.dict(os.environ, {"QLENS_THREADS": raw}), patch.object(
        checks.logger, "warning"
    ) as warning:
        assert checks.worker_threads() == 1
    warning.assert_called_once()


def test_run_tasks_keeps_order():
    tasks = [lambda i=i: CheckResult(name=str(i), passed=True) for i in range(8)]
    with patch.dict(os.environ, {"QLENS_THREADS": "3"}):
        results = checks.run_tasks(tasks)
    assert [r.name for r in results] == [str(i) for i in range(8)]


def test_sample_rng_depends_on_seed_and_index():
    config = RunConfig(seed=3)
    a = checks.sample_rng(config, 1, 2).integers(0, 10**9, size=4)
    b = checks.sample_rng(config, 1, 2).integers(0, 10**9, size=4)
    c = checks.sample_rng(config, 2, 1).integers(0, 10**9, size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_unknown_suite():
    with pytest.raises(QLensError, match="Unknown check 'nope'"):
        checks.run_suite("nope", RunConfig())


def test_failed_checks_are_logged():
    failed = CheckResult(name="broken", passed=False, max_deviation=0.5)
    with patch.object(checks.logger, "warning") as warning:
        report = checks._report("demo", RunConfig(), [failed], answer=42)
    assert not report.passed
    assert report.result == {"answer": 42}
    warning.assert_called_once()


def test_verify_relations_passes():
    report = checks.verify_relations(RunConfig(l=1, N=24, W=6))
    assert report.passed, report.checks
    details = report.checks[0].details
    assert details["compact_tail"] <= details["compact_tail_bound"]


def test_check_faithful_passes():
    report = checks.check_faithful(RunConfig(l=1, N=24, W=10, samples=6))
    assert report.passed, report.checks
    assert [c.name for c in report.checks] == ["faithful l=1 q=0.5", "confluence l=1"]


def test_check_faithful_three_legs():
    report = checks.check_faithful(RunConfig(l=3, N=24, W=6, samples=6))
    assert report.passed, report.checks


def test_long_zero_expression_widens_the_window():
    """Normal forms longer than the window are evaluated on a wider truncation."""
    x = parse("c . c . c . c* . c* . c*")
    e = Sum((x, Neg(parse(normalize(x, 3).format()))))
    params = RunConfig(l=3, N=64, W=16).rep_params()
    assert checks.zero_agreement(e, 3, params) == (True, True)


def test_groupoid_check_passes(small):
    report = checks.groupoid_check(small)
    assert report.passed, report.checks
    assert len(report.checks) == 4


def test_grading_check_passes(small):
    report = checks.grading_check(small)
    assert report.passed, report.checks


def test_structure_check_passes():
    report = checks.structure_check(RunConfig(l=2, N=24, W=6, samples=5))
    assert report.passed, report.checks
    matched = report.checks[1]
    assert matched.max_deviation <= matched.details["truncation_bound"]


def test_single_line_bundle():
    report = checks.line_bundle(RunConfig(l=3, N=24, samples=3), n=-2)
    assert report.passed
    assert report.result["invariant"] == [1, -2, -2, -2]
    assert report.checks[0].details["free"] is False


def test_classify_projection_file(tmp_path):
    path = tmp_path / "p.json"
    P = canonical_projection(KInvariant(rho=1, t=(2, -1)), 2, 8)
    path.write_text(json.dumps(dump_projection(P)), encoding="utf-8")
    report = checks.classify(RunConfig(), path)
    assert report.passed
    assert report.result["invariant"] == [1, 2, -1]
    assert report.result["canonical_size"] == 2


def test_classify_rejects_non_projection(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(dump_projection(ProjectionRep.identity(1, 1, 4).scale(2))))
    report = checks.classify(RunConfig(), path)
    assert not report.passed
    assert "invariant" not in report.result
    assert report.result["verification"]["passed"] is False


def test_reports_do_not_depend_on_thread_count(small):
    dumps = {}
    for threads in ("1", "4"):
        with patch.dict(os.environ, {"QLENS_THREADS": threads}):
            dumps[threads] = [
                checks.groupoid_check(small).model_dump_json(),
                checks.grading_check(small).model_dump_json(),
                checks.check_faithful(RunConfig(l=1, N=24, W=10, samples=4)).model_dump_json(),
            ]
    assert dumps["1"] == dumps["4"]


def test_report_all_runs_faithfulness_on_the_grid():
    config = RunConfig()
    empty = checks._report("stub", config, [])
    names = ["verify_relations", "check_faithful", "groupoid_check", "grading_check"]
    names += ["structure_check", "classify", "line_bundle"]
    with ExitStack() as stack:
        suites = {
            name: stack.enter_context(patch.object(checks, name, return_value=empty))
            for name in names
        }
        assert checks.report_all(config).passed
    suites["check_faithful"].assert_called_once_with(config, grid=True)
    suites["verify_relations"].assert_called_once_with(config, grid=True)
