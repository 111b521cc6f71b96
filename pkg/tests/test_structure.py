from fractions import Fraction as Fr
import math

import pytest
from hypothesis import given, settings, strategies as st

from arakcf import CoefficientVector, CompoundPoissonSpec, DiscreteDistribution, InvalidInput, SpectralMeasure
from arakcf.harness import planted_instance
from arakcf.measures import spectral_measures
from arakcf.progressions import ProductCGAP, SignedCube, cover_count, points_of
from arakcf.structure import (
    BetaResult,
    StructureConfig,
    StructureReport,
    arak_rhs,
    beta_exact_r1,
    beta_upper,
    fit_progression_1d,
    grow_signed_cube,
    inverse_detect,
    k1_report_compound_poisson,
    k1_report_iid,
    k1_structure_report,
    selection_volume,
)

from oracles import brute_beta_r1

RAD = DiscreteDistribution.rademacher()


def measure(points, weights=None):
    weights = weights or [1] * len(points)
    return SpectralMeasure({(x,): w for x, w in zip(points, weights)})


def flat(pts):
    return [p[0] for p in pts]


# -- beta ---------------------------------------------------------------------


def test_beta_exact_example():
    res = beta_exact_r1(measure([0, 5, 10, 11]), 3, 0)
    assert res.upper == 1 and res.exact
    assert flat(points_of(res.witness)[0]) == [0, 5, 10]


def test_beta_exact_spread_support():
    assert beta_exact_r1(measure([-3, 0, 3]), 3, 0).upper == 0
    assert beta_exact_r1(measure([1, 4, 7, 10, 13]), 5, 0).upper == 0


def test_beta_exact_single_point():
    W = measure([0, 1, 5], [1, 2, 3])
    assert beta_exact_r1(W, 1, 0).upper == 3
    assert beta_exact_r1(W, 1, Fr(1, 2)).upper == 3
    assert beta_exact_r1(W, 1, Fr(5, 2)).upper == 0


def test_beta_exact_rejects_irrational_floats():
    from arakcf import CapExceeded

    with pytest.raises(CapExceeded):
        beta_exact_r1(measure([0.0, math.pi]), 3, 0)


def test_beta_upper_examples():
    mstar, _, _ = spectral_measures(CoefficientVector.of([1, 1, 1]))
    res = beta_upper(mstar, 1, 3, 0)
    assert res.upper == 0
    assert flat(points_of(res.witness)[0]) == [-1, 0, 1]
    W = measure([-8, -4, -2, -1, 1, 2, 4, 8])
    assert beta_upper(W, 1, 3, 0, shifted=True).upper == brute_beta_r1([-8, -4, -2, -1, 1, 2, 4, 8], [1] * 8, 0, 3)
    # centered 3-term progressions {-h, 0, h} catch one symmetric pair
    assert beta_upper(W, 1, 3, 0).upper == 6
    assert beta_upper(W, 1, 3, 8).upper == 0


def test_beta_upper_rank_two_is_no_worse():
    W = measure([-11, -10, -1, 1, 10, 11])
    one = beta_upper(W, 1, 9, 0).upper
    two = beta_upper(W, 2, 9, 0).upper
    assert two <= one
    assert two == 0


def test_centered_dominates_shifted():
    W = measure([1, 3, 5, 6], [1, 2, 1, 1])
    assert beta_exact_r1(W, 3, 0, shifted=False).upper >= beta_exact_r1(W, 3, 0).upper


def test_beta_round_trip():
    res = beta_exact_r1(measure([0, 5, 10, 11]), 3, 0)
    assert BetaResult.from_json(res.to_json()) == res


def test_arak_rhs():
    assert arak_rhs(1, 1, 1, 1) == pytest.approx(1 + 2**2.5)
    first = arak_rhs(1, 1, 1, 1) - 2**2.5
    assert arak_rhs(1, 1, 2, 1) - 2**2.5 == pytest.approx(first / 2)
    assert arak_rhs(4, 2, 10**12, 2) == pytest.approx(2**3 * 3**5 / 4**1.5, rel=1e-9)
    assert arak_rhs(1, 1, 1, 1, kappa=2, delta=1) == pytest.approx(2 * (1 + 2**2.5))
    with pytest.raises(InvalidInput):
        arak_rhs(0, 1, 1, 1)


@given(
    st.lists(st.integers(-12, 12), min_size=1, max_size=6, unique=True),
    st.sampled_from([0, Fr(1, 2), 1]),
    st.sampled_from([1, 2, 3, 5]),
)
@settings(max_examples=40, deadline=None)
def test_beta_exact_matches_brute_force(xs, tau, m):
    ws = [Fr(1 + (i % 3)) for i in range(len(xs))]
    assert beta_exact_r1(measure(xs, ws), m, tau).upper == brute_beta_r1(sorted(xs), [w for _, w in sorted(zip(xs, ws))], tau, m)


# -- fitting ------------------------------------------------------------------


def test_fit_examples():
    K, out = fit_progression_1d([3, 6, 9, 12], 0, 9)
    assert K.h == ((3,),) and out == []
    K, out = fit_progression_1d([3, 6, 9, 100], 0, 9, 1)
    assert K.h == ((3,),) and out == [3]
    K, out = fit_progression_1d([4, 4, 4], Fr(1, 2), 9)
    assert flat(points_of(K)[0]) == [4] and K.volume == 1 and out == []


def test_fit_noisy_values():
    vals = [0.01, 2.98, 6.02, 9.0, -3.01]
    K, out = fit_progression_1d(vals, 0.05, 9)
    assert out == []
    assert cover_count([(v,) for v in vals], K, 0.05)[0] == 5


# -- inverse detection ----------------------------------------------------------


def test_selection_volume():
    assert selection_volume(Fr(1, 2), 1, 0, Fr(1, 2), 1, 50) == (50, math.inf)
    m, y = selection_volume(Fr(1, 4), 1, 8, Fr(1, 2), 1, 50)
    assert y == pytest.approx(16.0) and m == 16


def test_detect_planted_ap():
    a = planted_instance(1, [3], 5, 16, 0, 0, seed=4)
    assert set(a.scalars()) <= {0, 3, -3, 6, -6}
    rep = inverse_detect(a, RAD, 0, 1, 0)
    assert rep.covered == 16 and rep.outliers == ()
    assert abs(rep.progression.h[0][0]) == 3 or rep.volume == 1
    assert rep.path == "nthm8"
    assert rep.bound_targets["coverage"].satisfied


def test_detect_dissociated_reports_outliers():
    a = CoefficientVector.of([2**k for k in range(8)])
    rep = inverse_detect(a, RAD, 0, 1, 0, StructureConfig(m_cap=3, volume_rule="cap"))
    assert rep.volume <= 3
    assert rep.covered + len(rep.outliers) == 8
    assert len(rep.outliers) >= 8 - 3


def test_detect_product_structure():
    a = planted_instance(2, [(2, 0), (0, 3)], 9, 12, 0, 0, seed=1)
    rep = inverse_detect(a, RAD, 0, 1, 0)
    assert isinstance(rep.progression, ProductCGAP)
    assert rep.covered == 12
    assert all(sum(1 for c in g if c != 0) == 1 for g in rep.progression.generators())


def test_detect_budget_modes_agree_on_clean_input():
    a = planted_instance(2, [(2, 0), (0, 3)], 9, 12, 1, 0, seed=2)
    shared = inverse_detect(a, RAD, 0, 1, 1)
    per = inverse_detect(a, RAD, 0, 1, 1, StructureConfig(budget_mode="per-coordinate"))
    assert shared.covered >= 11 and per.covered >= 11


def test_detect_invalid():
    a = CoefficientVector.of([1, 2])
    with pytest.raises(InvalidInput):
        inverse_detect(a, RAD, 1, 0, 0)
    with pytest.raises(InvalidInput):
        inverse_detect(a, RAD, -1, 1, 0)
    with pytest.raises(InvalidInput):
        inverse_detect(a, RAD, 1, 1, 3)


def test_report_round_trip():
    a = planted_instance(2, [(2, 0), (0, 3)], 9, 12, 0, 0, seed=1)
    rep = inverse_detect(a, RAD, 0, 1, 0)
    back = StructureReport.from_json(rep.to_json())
    assert back.to_json() == rep.to_json()


def test_structure_config_rejects_unknown():
    with pytest.raises(InvalidInput):
        StructureConfig.from_json({"m_cap": 3, "color": "red"})
    cfg = StructureConfig(m_cap=7)
    assert StructureConfig.from_json(cfg.to_json()) == cfg


# -- signed cubes -----------------------------------------------------------------


def test_k1_all_equal():
    rep = k1_structure_report(CoefficientVector.of([5, 5, 5]), RAD, [1], [1])
    assert isinstance(rep.progression, SignedCube)
    assert rep.progression.u == ((5.0,),) and rep.residual_mass == 0


def test_k1_odd_pattern():
    rep = k1_structure_report(CoefficientVector.of([1, -1, 3, -3]), RAD, [0], [0])
    assert rep.rank == 2 and rep.residual_mass == 0
    assert flat(points_of(rep.progression)[0]) == [-3, -2, -1, 0, 1, 2, 3]
    assert rep.path == "thm55" and rep.details["p_variant"] == "p(0)"


def test_k1_degenerate_tail():
    X = DiscreteDistribution.uniform([0, 1])
    rep = k1_structure_report(CoefficientVector.of([1, 7, 20]), X, [1], [1])
    target = rep.bound_targets["n1ss68d"]
    assert target.lhs == 0 and target.degenerate and target.satisfied
    assert rep.path == "nthm4"


def test_k1_two_dimensional():
    a = CoefficientVector.of([(1, 0), (2, 4), (-1, 4), (0, -4)])
    rep = k1_structure_report(a, RAD, [0, 0], [0, 0])
    assert rep.residual_mass == 0 and rep.covered == 4
    assert all(sum(1 for c in u if c != 0) == 1 for u in rep.progression.u)


def test_k1_paths_agree_when_tails_match():
    # Rademacher: p(0) = p(1) = 1/2, so both paths weigh the residual equally
    a = CoefficientVector.of([1, 2, 7])
    zero = k1_structure_report(a, RAD, [0], [0])
    one = k1_structure_report(a, RAD, [1], [0])
    assert zero.details["p"] == one.details["p"]
    assert zero.progression == one.progression
    assert zero.residual_mass == one.residual_mass


def test_k1_compound_poisson_and_iid():
    spec = CompoundPoissonSpec.from_coefficients(CoefficientVector.of([2, 2, 4]), 1)
    rep = k1_report_compound_poisson(spec, [1], [Fr(1, 2)])
    assert rep.path == "thm11" and rep.residual_mass == 0
    rep = k1_report_iid(DiscreteDistribution.uniform([-2, 0, 2]), 4, [1], [Fr(1, 2)])
    assert rep.path == "t2" and rep.residual_mass == 0


def test_grow_signed_cube_rank_cap():
    u, residual, mask = grow_signed_cube([1, 10, 100, 1000], [1, 1, 1, 1], 0, 2)
    assert len(u) == 2 and residual > 0 and mask.sum() == 2
    assert grow_signed_cube([0, 0], [1, 1], 0, 3)[0] == (0.0,)


@given(st.lists(st.sampled_from([-5, -3, -2, 0, 2, 3, 5]), min_size=1, max_size=8).filter(any))
@settings(max_examples=40, deadline=None)
def test_k1_recovers_planted_cube(values):
    # every value lies in K_1((2, 3)), so rank <= 2 * 2 suffices
    rep = k1_structure_report(CoefficientVector.of(values), RAD, [0], [0], StructureConfig(max_rank=4))
    assert rep.residual_mass == 0
    assert rep.rank <= 4
