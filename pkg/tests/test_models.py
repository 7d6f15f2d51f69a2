import pytest
from pydantic import ValidationError

from qlens.models import (
    CheckReport,
    CheckResult,
    KInvariant,
    ProjectionFile,
    RepParams,
    RunConfig,
)


def test_run_config_defaults():
    """Defaults of the batch driver."""
    config = RunConfig()
    assert (config.q, config.l, config.N, config.W) == (0.5, 2, 64, 16)
    assert config.tol == 1e-9
    assert config.margin == 8
    assert config.seed == 0


@pytest.mark.parametrize(
    "field, value",
    [("q", 0.0), ("q", 1.0), ("l", 0), ("N", 7), ("W", 3), ("tol", 0.0), ("samples", 0)],
)
def test_run_config_bounds(field, value):
    with pytest.raises(ValidationError):
        RunConfig(**{field: value})


def test_run_config_rejects_unknown_keys():
    with pytest.raises(ValidationError, match="Extra inputs"):
        RunConfig(depth=3)


def test_run_config_rep_params():
    config = RunConfig(q=0.3, l=3, N=32, W=6)
    params = config.rep_params()
    assert params == RepParams(q=0.3, l=3, N=32, W=6)
    assert config.rep_params(l=1).l == 1


def test_rep_params_lambda_on_circle():
    """The character lambda must have modulus one."""
    assert RepParams(lam=1j).lam == 1j
    with pytest.raises(ValidationError, match="modulus 1"):
        RepParams(lam=0.5)


def test_rep_params_replace_validates():
    params = RepParams(q=0.5, l=2, N=16)
    assert params.replace(N=32).N == 32
    assert params.replace(N=32).q == 0.5
    with pytest.raises(ValidationError):
        params.replace(q=2.0)


def test_k_invariant():
    inv = KInvariant(rho=1, t=(2, -1))
    assert inv.l == 2
    assert inv.n_m() == ([0, 1], [2, 0])
    assert inv.as_list() == [1, 2, -1]
    assert inv + KInvariant(rho=0, t=(1, 1)) == KInvariant(rho=1, t=(3, 0))


def test_k_invariant_rank_zero_needs_nonnegative_traces():
    assert KInvariant(rho=0, t=(0, 3)).as_list() == [0, 0, 3]
    with pytest.raises(ValidationError, match="rho = 0 requires t >= 0"):
        KInvariant(rho=0, t=(1, -1))
    with pytest.raises(ValidationError):
        KInvariant(rho=-1, t=(0,))


def test_k_invariant_sum_needs_same_legs():
    with pytest.raises(ValueError, match="different numbers of legs"):
        KInvariant(rho=1, t=(0,)) + KInvariant(rho=1, t=(0, 0))


def test_check_report_serializes():
    report = CheckReport(
        command="classify",
        passed=False,
        config=RunConfig(),
        checks=[CheckResult(name="x", passed=False, max_deviation=0.25, samples=3)],
        result={"invariant": [1, 0]},
    )
    data = report.model_dump(mode="json")
    assert data["config"]["N"] == 64
    assert data["checks"][0]["max_deviation"] == 0.25
    assert data["result"] == {"invariant": [1, 0]}


def test_projection_file_shape_check():
    entry = {"scalar": [1, 0], "compact": [{"leg": 1, "rows": [[-1]]}]}
    doc = ProjectionFile.model_validate({"l": 1, "N": 4, "r": 1, "entries": [[entry]]})
    assert doc.entries[0][0].compact[0].rows == [[-1.0]]
    with pytest.raises(ValidationError, match="2x2"):
        ProjectionFile.model_validate({"l": 1, "N": 4, "r": 2, "entries": [[entry]]})
    bad_leg = {"scalar": [0, 0], "compact": [{"leg": 2, "rows": [[1]]}]}
    with pytest.raises(ValidationError, match="exceeds l"):
        ProjectionFile.model_validate({"l": 1, "N": 4, "r": 1, "entries": [[bad_leg]]})
    too_big = {"scalar": [0, 0], "compact": [{"leg": 1, "rows": [[1, 0, 0]]}]}
    with pytest.raises(ValidationError, match="exceeds N"):
        ProjectionFile.model_validate({"l": 1, "N": 2, "r": 1, "entries": [[too_big]]})


def test_projection_file_complex_entries():
    entry = {"scalar": [0, 0], "compact": [{"leg": 1, "rows": [[[0.5, -0.5], 1]]}]}
    doc = ProjectionFile.model_validate({"l": 1, "N": 2, "r": 1, "entries": [[entry]]})
    assert doc.entries[0][0].compact[0].rows[0] == [(0.5, -0.5), 1.0]
