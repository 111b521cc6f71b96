import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arakcf import CapExceeded, CoefficientVector, InvalidInput
from arakcf.progressions import (
    CGAP,
    GAP,
    Box,
    Ellipsoid,
    ProductCGAP,
    SignedCube,
    Slabs,
    cover_count,
    embed_cgap_in_gap,
    enumerate_lattice_points,
    is_proper,
    neighborhood_distance,
    points_of,
    product,
    progression_from_json,
    properize,
)


def flat(pts):
    return [p[0] for p in pts]


def test_lattice_points_box_and_disk():
    assert enumerate_lattice_points(Box((2.5,))) == [(-2,), (-1,), (0,), (1,), (2,)]
    assert enumerate_lattice_points(Box((0.5,))) == [(0,)]
    disk = enumerate_lattice_points(Ellipsoid.ball(1.5, 2))
    brute = [v for v in itertools.product(range(-2, 3), repeat=2) if v[0] ** 2 + v[1] ** 2 <= 2.25]
    assert disk == sorted(brute)
    assert len(disk) == 9


def test_lattice_points_slabs():
    pts = enumerate_lattice_points(Slabs(((0.5, 0.0), (0.0, 1.0))))
    assert pts == sorted(itertools.product(range(-2, 3), range(-1, 2)))


def test_lattice_points_cap():
    with pytest.raises(CapExceeded):
        enumerate_lattice_points(Box((50.0, 50.0)), cap=100)


def test_points_of_examples():
    K = GAP.symmetric([(3,)], [2])
    pts, mult = points_of(K)
    assert flat(pts) == [-6, -3, 0, 3, 6]
    assert is_proper(K)
    assert flat(points_of(CGAP.arithmetic(2, 2))[0]) == [-4, -2, 0, 2, 4]
    collinear = GAP.symmetric([(1,), (1,)], [1, 1])
    pts, mult = points_of(collinear)
    # m_1 + m_2 takes the five values -2..2, so |K| = 5 < 9
    assert flat(pts) == [-2, -1, 0, 1, 2] and collinear.volume == 9
    assert mult[(0,)] == 3
    assert sum(mult.values()) == 9
    assert not is_proper(collinear)


def test_neighborhood_distance():
    K = GAP.symmetric([(3,)], [2])
    assert neighborhood_distance((4,), K) == 1
    assert neighborhood_distance((3,), K) == 0
    grid = product([GAP((0,), [(3,)], [0], [2]), GAP((0,), [], [], [])])
    assert neighborhood_distance((4, 0), grid) == 1


def test_cover_count():
    K = GAP((0,), [(1,)], [0], [5])
    covered, out = cover_count(CoefficientVector.of([1, 2, 3, 10]), K, 0)
    assert covered == 3 and out == [3]
    assert cover_count(CoefficientVector.of([1, 2, 3, 10]), K, 10)[0] == 4


def test_embed_cgap():
    K = CGAP(((1,), (10,)), Ellipsoid.ball(1.5, 2))
    gap, ratio = embed_cgap_in_gap(K)
    assert gap.lower == (-1, -1) and gap.upper == (1, 1)
    assert gap.volume == 9 and len(points_of(K)[0]) == 9 and ratio == 1
    box = CGAP.arithmetic(3, 2)
    gap, _ = embed_cgap_in_gap(box)
    assert points_of(gap)[0] == points_of(box)[0]
    zero = CGAP(((1,),), Box((0.25,)))
    assert points_of(embed_cgap_in_gap(zero)[0])[0] == [(0,)]


def test_product():
    K = product([CGAP.arithmetic(3, 1), CGAP.arithmetic(5, 1)])
    assert isinstance(K, ProductCGAP)
    assert len(points_of(K)[0]) == 9 and K.rank == 2
    assert all(sum(1 for c in g if c != 0) == 1 for g in K.generators())
    cube = product([SignedCube(((1,),)), SignedCube(((2,),))])
    assert cube.u == ((1, 0), (0, 2))
    flat_part = product([CGAP.arithmetic(3, 1), CGAP.arithmetic(1, 0)])
    assert {p[1] for p in points_of(flat_part)[0]} == {0}


def test_properize_collinear_gap():
    K = GAP.symmetric([(1,), (1,)], [1, 1])
    P = properize(K, 0.1)
    assert is_proper(P)
    assert P.lower == K.lower and P.upper == K.upper
    original = np.array(flat(points_of(K)[0]), dtype=float)
    perturbed = np.array(flat(points_of(P)[0]), dtype=float)
    # [K]_tau inside [P]_{2 tau}: every point of K is within tau of P
    assert max(np.min(np.abs(perturbed - x)) for x in original) <= 0.1
    proper = GAP.symmetric([(1,), (3,)], [1, 1])
    assert properize(proper, 0.1) is proper


def test_properize_signed_cube():
    K = SignedCube(((1,), (2,), (3,)))
    P = properize(K, 0.5)
    assert isinstance(P, SignedCube)
    assert len(points_of(P)[0]) == 27


def test_json_round_trip():
    for K in (
        GAP.symmetric([(1, 2), (0, 5)], [1, 2]),
        CGAP(((1,), (10,)), Ellipsoid.ball(1.5, 2)),
        CGAP.arithmetic(0.5, 3, shift=1.25),
        SignedCube(((1,), (3,))),
        product([CGAP.arithmetic(3, 1), CGAP.arithmetic(5, 2)]),
    ):
        assert progression_from_json(K.to_json()) == K


def test_invalid():
    with pytest.raises(InvalidInput):
        GAP((0,), [(1,)], [2], [1])
    with pytest.raises(InvalidInput):
        Ellipsoid(((1.0, 2.0), (2.0, 1.0)))
    with pytest.raises(InvalidInput):
        properize(GAP.symmetric([(1,)], [1]), 0)


@given(st.integers(1, 5), st.integers(0, 6), st.integers(-10, 10))
@settings(max_examples=40)
def test_arithmetic_cgap_is_proper(step, half, shift):
    K = CGAP.arithmetic(step, half, shift=shift)
    pts = flat(points_of(K)[0])
    assert pts == [shift + j * step for j in range(-half, half + 1)]
    assert K.volume == 2 * half + 1


@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.floats(0.05, 0.45))
@settings(max_examples=30, deadline=None)
def test_properize_keeps_points_close(gens, tau):
    K = SignedCube(tuple((g,) for g in gens))
    P = properize(K, tau)
    assert len(points_of(P)[0]) == 3 ** len(gens)
    src = np.array(flat(points_of(K)[0]), dtype=float)
    dst = np.array(flat(points_of(P)[0]), dtype=float)
    assert max(np.min(np.abs(dst - x)) for x in src) <= tau + 1e-12
