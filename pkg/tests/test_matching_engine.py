import random

import pytest

from gridphp.grid_core import Figure, StructureError, tile
from gridphp.matching_engine import (
    CapacityError,
    ExtensionWitness,
    InfeasibleError,
    IntervalUnion,
    PartialMatching,
    complete_matching,
    extend_with_node,
    is_locally_consistent,
    match_square_with_dents,
    profile,
    well_cover,
    well_covers,
)


def test_partial_matching_must_be_disjoint():
    with pytest.raises(StructureError):
        PartialMatching([((1, 1), (1, 2)), ((1, 2), (1, 3))])


def test_partial_matching_round_trip():
    M = PartialMatching([((3, 3), (3, 4)), ((5, 5), (6, 5))])
    assert PartialMatching.from_json(M.to_json()) == M
    assert M.partner((3, 4)) == (3, 3)
    assert M.partner((9, 9)) is None


def test_interval_union_merges_neighbours():
    iu = IntervalUnion.from_points([1, 2, 3, 4, 7, 8])
    assert iu.intervals == ((1, 4), (7, 8))
    assert iu.is_even() and iu.size == 6
    assert iu.clip(7).intervals == ((1, 4), (7, 7))


def test_profile_of_empty_interval_grows():
    p = profile((1, 4), [])
    assert p.f_l == (0, 2, 4, 6)
    assert p.nonnegative()


def test_well_cover_single_point():
    cover = well_cover([10], 200)
    assert well_covers(cover, [10])
    assert cover.is_even() and cover.size <= 6


def test_well_cover_random_contract():
    rng = random.Random(1)
    for _ in range(500):
        K = [rng.randint(1, 60) for _ in range(rng.randint(1, 8))]
        cover = well_cover(K, 60)
        assert cover.is_even()
        assert cover.size <= 6 * len(K)
        assert well_covers(cover, K)


def test_well_cover_rejects_outside_points():
    with pytest.raises(ValueError):
        well_cover([0], 10)


def test_empty_matching_is_consistent():
    w = is_locally_consistent(PartialMatching(), 10)
    assert w is not None and w.S.size == 0


def test_single_edge_is_consistent_and_witness_verifies():
    M = PartialMatching([((4, 4), (4, 5))])
    w = is_locally_consistent(M, 20)
    assert w is not None and w.verify(M, bound=48)
    assert tile(Figure(w.cells())) is not None
    assert ExtensionWitness.from_json(w.to_json()) == w


def test_corner_trap_is_inconsistent():
    # (1,1) can only be matched right or down and both partners are taken
    M = PartialMatching([((1, 2), (1, 3)), ((2, 1), (3, 1))])
    assert is_locally_consistent(M, 6) is None


def test_complete_matching_respects_fixed():
    dm = complete_matching([1, 2], [1, 2, 3, 4], [((1, 2), (1, 3))])
    assert dm is not None
    assert ((1, 2), (1, 3)) in dm.dominoes


def test_extend_with_node_grows_by_two():
    n = 500
    M = PartialMatching([((100, 100), (100, 101))])
    w = is_locally_consistent(M, n)
    partner, M2, w2 = extend_with_node(M, w, (300, 17), n)
    assert M2.partner((300, 17)) == partner
    assert w2.verify(M2)
    assert w2.S.size - w.S.size <= 2 and w2.T.size - w.T.size <= 2


def test_extend_with_node_capacity():
    n = 100  # n/50 - 9 < 0
    M = PartialMatching()
    with pytest.raises(CapacityError):
        extend_with_node(M, is_locally_consistent(M, n), (3, 3), n)


def test_onion_matcher_plain_and_dented():
    dm = match_square_with_dents(6, [])
    cells = {(r, c) for r in range(1, 7) for c in range(1, 7)}
    assert dm.is_perfect_on(cells)
    dents = [(1, 3), (1, 4)]
    dm = match_square_with_dents(8, dents)
    cells = {(r, c) for r in range(1, 9) for c in range(1, 9)} - set(dents)
    assert dm.is_perfect_on(cells)


def test_onion_matcher_rejects_bad_dents():
    with pytest.raises(InfeasibleError):
        match_square_with_dents(6, [(3, 3)])  # not on the boundary
    with pytest.raises(InfeasibleError):
        match_square_with_dents(6, [(1, 2), (1, 3)])  # too close to a corner
    with pytest.raises(InfeasibleError):
        match_square_with_dents(8, [(1, 4), (1, 6)])  # same colour twice
