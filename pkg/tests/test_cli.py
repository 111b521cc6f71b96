import json

import pytest

from arakcf.charfn import EsseenEstimate, HConcentration
from arakcf.cli import main
from arakcf.concentration import ConcentrationResult
from arakcf.measures import CoefficientVector
from arakcf.progressions import progression_from_json
from arakcf.structure import BetaResult, StructureReport


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_concentration(capsys):
    code, out = run(capsys, "concentration", "--a", "[1,1,1,1]", "--x", "rademacher", "--tau", "0")
    assert code == 0
    res = ConcentrationResult.from_json(json.loads(out))
    assert res.value == 0.375


def test_concentration_errors(capsys):
    assert run(capsys, "concentration", "--a", "[1,1,1,1]", "--tau", "-1")[0] == 2
    assert run(capsys, "concentration", "--a", "[1,", "--tau", "1")[0] == 2
    assert run(capsys, "concentration", "--a", "[1,2,4]", "--tau", "1", "--atom-cap", "2")[0] == 3
    assert run(capsys, "concentration", "--tau", "1")[0] == 2
    assert run(capsys, "nonsense")[0] == 2


def test_concentration_two_dimensional(capsys):
    code, out = run(capsys, "concentration", "--a", "[[1,0],[0,1],[1,1]]", "--tau", "1")
    assert code == 0 and json.loads(out)["method"] == "bracket-candidates"


def test_plant_then_detect(capsys, tmp_path):
    path = tmp_path / "a.json"
    code, _ = run(capsys, "plant", "--rank", "1", "--steps", "[3]", "--volume", "5", "--n", "16", "--seed", "2", "-o", str(path))
    assert code == 0
    a = CoefficientVector.from_json(json.loads(path.read_text()))
    code, out = run(capsys, "detect", "--a", f"@{path}", "--tau", "0")
    rep = StructureReport.from_json(json.loads(out))
    assert code == 0 and rep.covered == a.n
    code, out = run(capsys, "detect", "--a", str(path), "--tau", "0", "--method", "k1")
    assert code == 0 and json.loads(out)["path"] == "thm55"


def test_fit_beta_hdist_essen(capsys):
    code, out = run(capsys, "fit", "--values", "[3,6,9,100]", "--tau", "0", "--budget", "1")
    obj = json.loads(out)
    assert code == 0 and obj["outliers"] == [3]
    assert progression_from_json(obj["progression"]).h == ((3,),)

    code, out = run(capsys, "beta", "--r", "1", "--m", "3", "--exact", "--w", '[[0,1],[5,1],[10,1],[11,1]]')
    res = BetaResult.from_json(json.loads(out))
    assert code == 0 and res.exact and res.upper == 1
    assert run(capsys, "beta", "--r", "2", "--m", "3", "--exact", "--w", "[[1,1]]")[0] == 2

    code, out = run(capsys, "hdist", "--a", "[1,1,1,1]", "--kappa", "1", "--lam", "1/2", "--masses")
    obj = json.loads(out)
    assert code == 0 and HConcentration.from_json(obj["concentration"]).path == "inversion"
    assert abs(sum(row[-1] for row in obj["masses"]["atoms"]) - 1) < 1e-8

    code, out = run(capsys, "essen", "--a", "[1,1,1,1]", "--lam", "1", "--tau", "1")
    assert code == 0 and EsseenEstimate.from_json(json.loads(out)).value > 0
    code, out = run(capsys, "essen", "--a", "[1,1]", "--tau", "1")
    assert code == 0


def test_verify_is_deterministic(capsys, tmp_path):
    cfg = tmp_path / "suite.json"
    from arakcf.harness import SUITES

    cfg.write_text(json.dumps(SUITES["quick"].to_json()))
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    summary = tmp_path / "s.json"
    assert run(capsys, "verify", "--config", str(cfg), "--seed", "7", "--threads", "1", "-o", str(first), "--summary", str(summary))[0] == 0
    assert run(capsys, "verify", "--config", str(cfg), "--seed", "7", "--threads", "8", "-o", str(second))[0] == 0
    assert first.read_bytes() == second.read_bytes()
    assert json.loads(summary.read_text())["constant_free_failures"] == []


def test_verify_exit_four_on_identity_failure(capsys, monkeypatch, tmp_path):
    import arakcf.harness as h
    from arakcf.harness import SuiteRecord

    def broken(case, config):
        return [SuiteRecord.constant_free(case.case_id, "d", "77j", 1, 0, False)]

    monkeypatch.setitem(h.CASE_CHECKS, "77j", broken)
    cfg = tmp_path / "suite.json"
    cfg.write_text(json.dumps(h.SUITES["quick"].replace(identities=("77j",)).to_json()))
    assert run(capsys, "verify", "--config", str(cfg), "-o", str(tmp_path / "x.csv"))[0] == 4


def test_verify_rejects_unknown_config_fields(capsys, tmp_path):
    cfg = tmp_path / "suite.json"
    cfg.write_text(json.dumps({"schema": "harness/v1", "colour": "blue"}))
    assert run(capsys, "verify", "--config", str(cfg))[0] == 2


def test_threads_from_environment(monkeypatch):
    from arakcf import cli

    monkeypatch.setenv(cli.THREADS_ENV, "6")
    assert cli.default_threads() == 6
    monkeypatch.setenv(cli.THREADS_ENV, "x")
    assert cli.default_threads() == 1


@pytest.mark.parametrize("text,expected", [("3", 3), ("1/3", None), ("0.25", 0.25)])
def test_number_parsing(text, expected):
    from fractions import Fraction

    from arakcf.cli import number

    val = number(text)
    assert val == (Fraction(1, 3) if expected is None else expected)
