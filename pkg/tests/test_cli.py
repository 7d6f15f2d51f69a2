import json
import logging

import pytest

from qlens.cli import build_parser, load_config, run


@pytest.fixture(autouse=True)
def restore_logging():
    yield
    logger = logging.getLogger("qlens")
    logger.handlers[:] = []
    logger.propagate = True
    logger.setLevel(logging.NOTSET)


def output(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


def test_normalize(capsys):
    assert run(["normalize", "--l", "2", "d . c"]) == 0
    assert output(capsys) == {"normalform": "q^-2 . c . d"}


def test_symbol(capsys):
    assert run(["symbol", "--l", "1", "c . c*"]) == 0
    assert output(capsys) == {"symbol": {"0": [1.0, 0.0]}}


def test_line_bundle_report(capsys):
    code = run(["line-bundle", "--n", "-2", "--l", "3", "--N", "24", "--samples", "5"])
    assert code == 0
    report = output(capsys)
    assert report["command"] == "line-bundle"
    assert report["passed"] is True
    assert report["result"]["invariant"] == [1, -2, -2, -2]
    assert report["config"]["l"] == 3


def test_summary_goes_to_stderr(capsys):
    run(["line-bundle", "--n", "0", "--l", "1", "--N", "16", "--samples", "2"])
    captured = capsys.readouterr()
    assert "line-bundle: passed" in captured.err
    assert json.loads(captured.out)["passed"] is True


def test_quiet_hides_summary(capsys):
    run(["line-bundle", "--n", "0", "--l", "1", "--N", "16", "--samples", "2", "--quiet"])
    assert "passed" not in capsys.readouterr().err


def test_failing_check_exits_one(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(
        json.dumps({"l": 1, "N": 4, "r": 1, "entries": [[{"scalar": [2, 0]}]]}),
        encoding="utf-8",
    )
    assert run(["classify", str(path)]) == 1
    assert output(capsys)["passed"] is False


@pytest.mark.parametrize("argv", [[], ["normalize"], ["normalize", "--bogus", "c"], ["frobnicate"]])
def test_usage_errors(argv):
    assert run(argv) == 2


def test_invalid_parameter_is_reported_as_json(capsys):
    assert run(["normalize", "--q", "2", "c"]) == 2
    error = output(capsys)
    assert error["type"] == "ValidationError"
    assert "q" in error["error"]


def test_syntax_error_is_reported_as_json(capsys):
    assert run(["normalize", "c +* d"]) == 2
    error = output(capsys)
    assert error["type"] == "ExprSyntaxError"
    assert "position 3" in error["error"]


def test_missing_projection_file(tmp_path, capsys):
    assert run(["classify", str(tmp_path / "missing.json")]) == 2
    assert "No such JSON file" in output(capsys)["error"]


def test_config_file_precedence(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"l": 1, "N": 16, "seed": 7}), encoding="utf-8")
    args = build_parser().parse_args(["groupoid-check", "--config", str(path), "--l", "3"])
    config = load_config(args)
    assert (config.l, config.N, config.seed) == (3, 16, 7)
    assert config.q == 0.5


def test_config_file_rejects_unknown_keys(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"depth": 2}), encoding="utf-8")
    assert run(["normalize", "--config", str(path), "c"]) == 2
    assert output(capsys)["type"] == "ValidationError"


def test_grid_flag_only_where_supported():
    parser = build_parser()
    assert parser.parse_args(["verify-relations", "--grid"]).grid
    with pytest.raises(SystemExit):
        parser.parse_args(["groupoid-check", "--grid"])
