"""Acceptance criteria 1-11, one test each.

Every test records a PASS/FAIL line (shown in the terminal summary) and
then asserts.  Tolerances are pinned at the top of the file.
"""
from fractions import Fraction as Fr
import json
import math

import numpy as np

from arakcf import CoefficientVector, CompoundPoissonSpec, DiscreteDistribution, concentration, exact_sum_distribution
from arakcf.calibration import load_calibration
from arakcf.charfn import compound_poisson_exact, lattice_masses
from arakcf.cli import main
from arakcf.harness import (
    SUITES,
    generate_cases,
    h_suite,
    planted_instance,
    run_suite,
    verify_sandwich_band,
)
from arakcf.measures import SpectralMeasure
from arakcf.progressions import ProductCGAP
from arakcf.structure import StructureConfig, beta_exact_r1, inverse_detect, k1_structure_report

from oracles import brute_beta_r1

EQ6_SLACK = -1e-12
CP_MASS_TOL = 1e-10
CP_SUM_TOL = 1e-8
BAND_DRIFT = 0.05
CONSTANT_DRIFT = 0.05
VOLUME_FACTOR = 4
RANK_FACTOR = 2

RAD = DiscreteDistribution.rademacher()


def enumerate_patterns(a, p):
    """Exact law of sum X_k a_k for X in {-1, 0, 1} with P(X = +-1) = p / 2.

    p = 1 is Rademacher (2^n patterns), otherwise all 3^n patterns.
    """
    n = len(a)
    values = (-1, 1) if p == 1 else (-1, 0, 1)
    grids = np.array(np.meshgrid(*[values] * n, indexing="ij")).reshape(n, -1).T
    sums = grids @ np.asarray(a, dtype=np.int64)
    zeros = (grids == 0).sum(axis=1)
    law = {}
    for (s, z), count in zip(*np.unique(np.stack([sums, zeros], axis=1), axis=0, return_counts=True)):
        w = Fr(1, 2 ** n) if p == 1 else (1 - p) ** int(z) * (p / 2) ** (n - int(z))
        law[int(s)] = law.get(int(s), 0) + int(count) * w
    return law


def test_criterion_01_exact_oracle(criterion):
    rng = np.random.default_rng(101)
    bad = 0
    for i in range(100):
        n = 1 + i % 12
        a = [int(v) for v in rng.integers(-6, 7, size=n)]
        if not any(a):
            a[0] = 1
        p = Fr(1) if i % 2 == 0 else Fr(int(rng.integers(1, 4)), 4)
        X = RAD if p == 1 else DiscreteDistribution.lazy_rademacher(p)
        law = enumerate_patterns(a, p)
        F = exact_sum_distribution(CoefficientVector.of(a), X)
        got = {pt[0]: w for pt, w in F}
        if got != law or concentration(F, 0).value != max(law.values()):
            bad += 1
    assert criterion(1, bad == 0, f"100 instances, n <= 12, exact laws and Q(F, 0) vs enumeration: {bad} mismatches (tolerance 0)")


def test_criterion_02_regularity(criterion):
    cfg = SUITES["default"].replace(families={"rademacher": 200}, identities=("77j",), mu_lambda=("1/2", 1, 2, "5/2"))
    records = run_suite(cfg)
    cases = {r.case_id.split("/")[0] for r in records}
    bad = [r for r in records if not r.passed]
    ok = not bad and len(cases) == 200
    assert criterion(2, ok, f"{len(cases)} instances x {len(records) // len(cases)} (lambda, mu) pairs: {len(bad)} violations")


def test_criterion_03_scaling(criterion):
    cfg = SUITES["default"].replace(families={"rademacher": 30, "lazy": 20}, identities=("scaling",), scales=("1/3", 2, 7))
    records = run_suite(cfg)
    bad = [r for r in records if not r.passed]
    cases = {r.case_id.split("/")[0] for r in records}
    ok = not bad and len(cases) == 50
    assert criterion(3, ok, f"{len(cases)} instances x v in {{1/3, 2, 7}}: {len(bad)} inequalities (exact)")


def test_criterion_04_eq6(criterion):
    cfg = SUITES["default"].replace(families={}, identities=("eq6",), eq6_laws=50, eq6_grid=10_000)
    records = run_suite(cfg)
    slack = min(float(r.rhs) - float(r.lhs) for r in records)
    ok = len(records) == 50 and slack >= EQ6_SLACK and all(r.passed for r in records)
    assert criterion(4, ok, f"50 laws on a 10^4-point grid: min slack {slack:.3e} (need >= {EQ6_SLACK:g})")


def test_criterion_05_compound_poisson_oracles(criterion):
    rng = np.random.default_rng(55)
    worst_mass, worst_sum = 0.0, 0.0
    for i in range(20):
        n = int(rng.integers(1, 6))
        a = CoefficientVector.of([int(v) for v in rng.integers(1, 6, size=n)])
        lam = [Fr(1, 4), Fr(1, 2), 1, 2][i % 4]
        spec = CompoundPoissonSpec.from_coefficients(a, lam)
        inverted, _ = lattice_masses(spec)
        series = compound_poisson_exact(spec)
        left = {p[0]: float(w) for p, w in inverted}
        right = {p[0]: float(w) for p, w in series}
        for k in set(left) | set(right):
            worst_mass = max(worst_mass, abs(left.get(k, 0.0) - right.get(k, 0.0)))
        worst_sum = max(worst_sum, abs(sum(left.values()) - 1), abs(sum(right.values()) - 1))
    ok = worst_mass <= CP_MASS_TOL and worst_sum <= CP_SUM_TOL
    assert criterion(5, ok, f"20 lattice specs: max mass gap {worst_mass:.2e} (<= {CP_MASS_TOL:g}), max sum defect {worst_sum:.2e} (<= {CP_SUM_TOL:g})")


def test_criterion_06_sandwich_band(criterion):
    stored = load_calibration()["identities"]["sandwich-1b"]
    bands = []
    for seed in (7, 23):
        cfg = SUITES["default"].replace(seed=seed)
        members = h_suite(generate_cases(cfg), cfg)
        bands.append((len(members), *verify_sandwich_band(members)))
    ok = all(
        size >= 100 and low > 0 and low >= stored["min"] * (1 - BAND_DRIFT) and high <= stored["max"] * (1 + BAND_DRIFT)
        for size, low, high in bands
    )
    detail = ", ".join(f"{size} members [{low:.4f}, {high:.4f}]" for size, low, high in bands)
    assert criterion(6, ok, f"{detail} vs stored [{stored['min']:.4f}, {stored['max']:.4f}] +-{BAND_DRIFT:.0%}")


def test_criterion_07_calibrated_shapes(criterion):
    table = load_calibration()["identities"]
    idents = ("lemma42", "cor1166", "thm7")
    worst = {i: 0.0 for i in idents}
    over = 0
    per_seed = []
    for seed in (19, 41):
        records = run_suite(SUITES["default"].replace(seed=seed, identities=idents), threads=4)
        maxima = {}
        for r in records:
            if r.error:
                over += 1
                continue
            if r.ratio is None:
                continue
            c = table[r.identity]["max"]
            if r.ratio > c * (1 + 1e-12):
                over += 1
            maxima[r.identity] = max(maxima.get(r.identity, 0.0), r.ratio)
        per_seed.append(maxima)
        for i in idents:
            worst[i] = max(worst[i], abs(maxima[i] / table[i]["max"] - 1))
    finite = all(math.isfinite(table[i]["max"]) and table[i]["max"] > 0 for i in idents)
    ok = over == 0 and finite and all(w <= CONSTANT_DRIFT for w in worst.values())
    detail = "; ".join(f"{i}: c={table[i]['max']:.4g}, drift {worst[i]:.1%}" for i in idents)
    assert criterion(7, ok, f"{over} records above c*RHS; {detail} (<= {CONSTANT_DRIFT:.0%})")


def test_criterion_08_beta_exact(criterion):
    rng = np.random.default_rng(88)
    bad = 0
    for _ in range(50):
        size = int(rng.integers(2, 17))
        xs = sorted({Fr(int(rng.integers(-40, 41)), int(rng.integers(1, 4))) for _ in range(size)})
        ws = [Fr(int(rng.integers(1, 5)), int(rng.integers(1, 3))) for _ in xs]
        tau = [Fr(0), Fr(1, 2), Fr(1), Fr(3, 2)][int(rng.integers(0, 4))]
        m = [1, 2, 3, 4, 5][int(rng.integers(0, 5))]
        W = SpectralMeasure({(x,): w for x, w in zip(xs, ws)})
        if beta_exact_r1(W, m, tau).upper != brute_beta_r1(xs, ws, tau, m):
            bad += 1
    assert criterion(8, bad == 0, f"50 rational supports (|supp| <= 16): {bad} mismatches with the brute-force scan (exact)")


def _planted_case(rng, i):
    rank = 1 + i % 2
    volume = int(rng.integers(2, 26))
    noisy = i % 3 == 2
    n = int(rng.integers(8, 21 if noisy else 33))
    outliers = int(rng.integers(0, n // 8 + 1))
    tau = Fr(1, 4) if noisy else [Fr(0), Fr(1)][i % 2]
    noise = float(rng.uniform(0, float(tau))) if noisy else 0
    if rank == 1:
        gens = [int(rng.integers(1, 6))]
    elif i % 4 == 1:
        gens = [(int(rng.integers(1, 6)), 0), (0, int(rng.integers(1, 6)))]
    else:
        s = int(rng.integers(1, 4))
        gens = [(s,), (s * int(rng.integers(2, 4)),)]
    a = planted_instance(rank, gens, volume, n, outliers, noise, int(rng.integers(2**31)))
    return a, tau, outliers, volume


def test_criterion_09_inverse_recovery(criterion):
    rng = np.random.default_rng(909)
    fails, products = [], 0
    for i in range(100):
        a, tau, outliers, volume = _planted_case(rng, i)
        rep = inverse_detect(a, RAD, tau, 1, outliers)
        ok = rep.covered >= a.n - outliers and rep.volume <= VOLUME_FACTOR * volume
        if isinstance(rep.progression, ProductCGAP):
            products += 1
            ok = ok and all(sum(1 for c in g if c != 0) == 1 for g in rep.progression.generators())
        if not ok:
            fails.append(i)
    assert criterion(9, not fails, f"100 planted instances ({products} products): {len(fails)} failures {fails[:5]}")


def test_criterion_10_k1_report(criterion):
    rng = np.random.default_rng(1010)
    fails = 0
    for i in range(60):
        r_star = 1 + i % 3
        u = [int(v) for v in rng.integers(1, 9, size=r_star)]
        delta = [Fr(0), Fr(1, 2)][i % 2]
        n = int(rng.integers(3, 11))
        a = []
        for _ in range(n):
            signs = rng.integers(-1, 2, size=r_star)
            x = sum(int(s) * g for s, g in zip(signs, u))
            a.append(x + (Fr(int(rng.integers(-2, 3)), 4) if delta else 0))
        if not any(a):
            a[0] = u[0]
        tau = [delta if delta else 0]
        rep = k1_structure_report(CoefficientVector.of(a), RAD, tau, [delta], StructureConfig(max_rank=RANK_FACTOR * r_star))
        if rep.residual_mass != 0 or rep.rank > RANK_FACTOR * r_star:
            fails += 1
    a = CoefficientVector.of([1, 3, -4, 7])
    zero = k1_structure_report(a, RAD, [0], [0])
    one = k1_structure_report(a, RAD, [1], [0])
    consistent = (
        zero.path == "thm55"
        and zero.details["p_variant"] == "p(0)"
        and one.details["p_variant"] == "p(1)"
        and zero.details["p"] == one.details["p"]
        and zero.residual_mass == one.residual_mass
    )
    ok = fails == 0 and consistent
    assert criterion(10, ok, f"60 planted signed cubes: {fails} with residual > 0 or rank > {RANK_FACTOR}r*; p(0)/p(1) paths consistent: {consistent}")


def test_criterion_11_determinism(criterion, tmp_path, capsys):
    one, eight = tmp_path / "t1.csv", tmp_path / "t8.csv"
    codes = [
        main(["verify", "--suite", "default", "--seed", "7", "--threads", "1", "-o", str(one)]),
        main(["verify", "--suite", "default", "--seed", "7", "--threads", "8", "-o", str(eight)]),
    ]
    capsys.readouterr()
    same = one.read_bytes() == eight.read_bytes()
    rows = one.read_text().count("\n") - 1
    ok = same and codes == [0, 0]
    assert criterion(11, ok, f"verify --seed 7 with 1 and 8 threads: {rows} rows, byte-identical: {same}, exit codes {codes}")
