from fractions import Fraction as Fr
import math

import pytest

from arakcf import CompoundPoissonSpec, DiscreteDistribution, InvalidInput
from arakcf.calibration import load_calibration, save_calibration, constant
from arakcf.harness import (
    CONSTANT_FREE,
    SUITES,
    SuiteConfig,
    SuiteRecord,
    calibrate,
    drift_report,
    generate_cases,
    h_suite,
    planted_instance,
    planted_progression,
    records_to_csv,
    run_suite,
    verify_sandwich_band,
)
from arakcf.measures import SpectralMeasure
from arakcf.progressions import cover_count, points_of


def rec(ratio, identity="lemma42"):
    return SuiteRecord("c", "d", ratio, 1, ratio, identity, None)


def test_record_ratio_rules():
    assert SuiteRecord.ratio_only("c", "d", "thm7", 2, 4).ratio == 0.5
    both_zero = SuiteRecord.ratio_only("c", "d", "thm7", 0, 0)
    assert both_zero.ratio is None and both_zero.passed is None
    assert SuiteRecord.ratio_only("c", "d", "thm7", 1, 0).passed is False
    assert SuiteRecord.ratio_only("c", "d", "thm7", 1, math.inf).ratio == 0


def test_calibrate_examples():
    assert calibrate([rec(0.8)])["identities"]["lemma42"]["max"] == 0.8
    table = calibrate([rec(0.5), rec(2.0)])["identities"]["lemma42"]
    assert table["max"] == 2.0 and table["median"] == 1.25
    with pytest.raises(InvalidInput):
        calibrate([rec(0.5, "thm7")], ["lemma42"])


def test_calibration_is_monotone():
    base = calibrate([rec(0.5), rec(0.7)])["identities"]["lemma42"]["max"]
    more = calibrate([rec(0.5), rec(0.7), rec(0.6)])["identities"]["lemma42"]["max"]
    assert more >= base


def test_sandwich_point_mass():
    spec = CompoundPoissonSpec(SpectralMeasure.empty(1))
    low, high = verify_sandwich_band([(spec, 1)])
    assert low == pytest.approx(0.5) and high == pytest.approx(0.5)


def test_sandwich_band_of_stored_table():
    from arakcf import CoefficientVector

    spec = CompoundPoissonSpec.from_coefficients(CoefficientVector.of([1, 1, 1, 1]), 1)
    low, high = verify_sandwich_band([(spec, 1)])
    stored = load_calibration()["identities"]["sandwich-1b"]
    assert stored["min"] * 0.95 <= low <= high <= stored["max"] * 1.05


def test_planted_instance_examples():
    a = planted_instance(1, [2], 5, 16, 0, 0, seed=0)
    assert set(a.scalars()) <= {-4, -2, 0, 2, 4}
    assert a.exact
    noise = planted_instance(1, [1], 5, 6, 6, 0, seed=0)
    assert min(abs(x) for x in noise.scalars()) >= 40
    a = planted_instance(1, [1], 5, 20, 2, 0.01, seed=3)
    K = planted_progression(1, [1], 5)
    covered, _ = cover_count(a, K, 0.01)
    assert covered == 18


def test_planted_is_deterministic():
    assert planted_instance(2, [(1, 0), (0, 2)], 12, 10, 1, 0.1, 5) == planted_instance(2, [(1, 0), (0, 2)], 12, 10, 1, 0.1, 5)


def test_planted_progression_factors_volume():
    K = planted_progression(2, [(1,), (7,)], 12)
    assert K.volume == 12
    assert len(points_of(K)[0]) == 12


def test_planted_invalid():
    with pytest.raises(InvalidInput):
        planted_instance(1, [1], 5, 3, 4, 0, 0)
    with pytest.raises(InvalidInput):
        planted_progression(1, [1], 0)


def test_quick_suite_constant_free_identities_pass():
    records = run_suite(SUITES["quick"])
    assert not [r for r in records if r.error]
    for ident in CONSTANT_FREE:
        rows = [r for r in records if r.identity == ident]
        assert rows and all(r.passed for r in rows)


def test_suite_is_deterministic_across_threads():
    cfg = SUITES["quick"].replace(identities=("77j", "scaling", "lemma42", "sandwich-1b"))
    assert records_to_csv(run_suite(cfg, threads=1)) == records_to_csv(run_suite(cfg, threads=4))


def test_suite_records_failures_without_aborting(monkeypatch):
    import arakcf.harness as h

    def boom(case, config):
        raise InvalidInput("synthetic")

    monkeypatch.setitem(h.CASE_CHECKS, "lemma42", boom)
    records = run_suite(SUITES["quick"].replace(identities=("lemma42", "77j")))
    assert any(r.error and "synthetic" in r.error for r in records)
    assert any(r.identity == "77j" and r.passed for r in records)


def test_config_round_trip_and_strictness():
    cfg = SUITES["quick"]
    assert SuiteConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(InvalidInput):
        SuiteConfig.from_json({"schema": "harness/v1", "bogus": 1})
    with pytest.raises(InvalidInput):
        SuiteConfig(identities=("nope",))


def test_generate_cases_counts():
    cases = generate_cases(SUITES["default"])
    assert len(cases) == sum(SUITES["default"].families.values())
    assert len(h_suite(cases, SUITES["default"])) >= 100


def test_drift_flags_regressions(tmp_path):
    table = {"schema": "calibration/v1", "identities": {"lemma42": {"max": 1.0, "min": 0.1}}}
    assert drift_report([rec(1.04)], table)["lemma42"]["ok"]
    assert not drift_report([rec(1.06)], table)["lemma42"]["ok"]
    path = save_calibration(table, tmp_path / "cal.json")
    assert constant("lemma42", table=load_calibration(path)) == 1.0
    assert constant("unknown", default=3.0, table=table) == 3.0


def test_csv_format():
    text = records_to_csv([SuiteRecord.constant_free("c1", "d", "77j", Fr(1, 3), Fr(1, 2), True)])
    header, row = text.strip().split("\n")
    assert header == "case_id,identity,lhs,rhs,ratio,pass"
    assert row == "c1,77j,0.33333333333333331,0.5,0.66666666666666663,true"
