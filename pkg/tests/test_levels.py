"""Pullback tower: oracle equivalence, separation levels, joining numbers,
flowers, neighborhoods, ffi, and reachability."""

import numpy as np
import pytest

from cellseq import CellComplexError, Point, ResourceCapExceeded, Tower
from cellseq.examples import identity_subdivision, pillowcase, torus_doubling

import oracles


@pytest.fixture(scope="module")
def t2():
    rule, real = torus_doubling(2)
    return Tower(rule), real


@pytest.fixture(scope="module")
def pw():
    rule, real = pillowcase()
    return Tower(rule), real


@pytest.mark.parametrize("m", range(5))
def test_torus_levels_match_geometric_oracle(t2, m):
    tower, real = t2
    assert oracles.check_level_matches_oracle(tower, real, m, "torus") == []


@pytest.mark.parametrize("m", range(5))
def test_pillow_levels_match_geometric_oracle(pw, m):
    tower, real = pw
    assert oracles.check_level_matches_oracle(tower, real, m, "pillow") == []


def test_chamber_counts(t2, pw):
    tower, _ = t2
    deg = tower.rule.degree()
    for m in range(6):
        assert len(tower.chambers_at_level(m)) == 4 * deg**m
    tower_p, _ = pw
    for m in range(6):
        assert len(tower_p.chambers_at_level(m)) == 2 * 4**m


def test_vertex_counts(t2, pw):
    tower, _ = t2
    for m in range(5):
        assert len(tower.vertices_at_level(m)) == (2 ** (m + 1)) ** 2
    tower_p, _ = pw
    for m in range(4):
        k = 2**m
        assert len(tower_p.vertices_at_level(m)) == 2 * (k - 1) ** 2 + 4 * k if m else 4


def test_image_and_parent_structure(t2):
    tower, _ = t2
    for X in tower.chambers_at_level(2)[:8]:
        assert tower.image(X).level == 1
        assert tower.minimal_parent(X).level == 1
        assert tower.image_iter(X, 2).level == 0
        assert tower.minimal_parent(tower.image(X)) is tower.image(tower.minimal_parent(X))
    with pytest.raises(CellComplexError):
        tower.image(tower.cells_at_level(0)[0])
    with pytest.raises(CellComplexError):
        tower.minimal_parent(tower.cells_at_level(0)[0])


def test_refinement_partition_at_depth(t2):
    """Chambers with a fixed minimal parent tile that parent exhaustively."""
    tower, real = t2
    for m in (2, 3):
        by_parent = {}
        for X in tower.chambers_at_level(m):
            by_parent.setdefault(tower.minimal_parent(X), []).append(X)
        for P, tiles in by_parent.items():
            assert len(tiles) == 4
            gp = real.geom_of(P, tower)
            area = sum(
                np.prod([l for l in real.geom_of(X, tower).lens]) for X in tiles
            )
            assert area == pytest.approx(np.prod(gp.lens))


def test_separation_level_against_oracle(t2):
    tower, real = t2
    depth = 5
    addrs = tower.vertex_addresses(depth, at_level=2)
    coords = [
        tuple(round(x / 2.0**-depth) for x in real.geom_of(a.carrier, tower).starts)
        for a in addrs
    ]
    for i, a in enumerate(addrs):
        for j, b in enumerate(addrs):
            want = oracles.torus_separation_oracle(coords[i], coords[j], depth, depth)
            got = tower.separation_level(a, b)
            if i == j:
                assert got.truncated
            else:
                assert got.value == want
                assert got.truncated == (want == depth)


def test_separation_matrix_matches_scalar(t2):
    tower, _ = t2
    addrs = tower.vertex_addresses(4, at_level=2)
    M, trunc = tower.separation_matrix(addrs)
    for i in range(0, len(addrs), 7):
        for j in range(0, len(addrs), 5):
            s = tower.separation_level(addrs[i], addrs[j])
            assert M[i, j] == s.value and trunc[i, j] == s.truncated


def test_separation_specific_values(t2):
    tower, real = t2
    a = real.snap(Point((0.0, 0.0)), 6, tower)
    b = real.snap(Point((1.0, 0.0)), 6, tower)
    assert tower.separation_level(a, b).value == 1
    c = real.snap(Point((0.0, 0.125)), 6, tower)
    s = tower.separation_level(a, c)
    assert s.value == 4 and not s.truncated
    same = real.snap(Point((0.0, 0.0)), 6, tower)
    assert tower.separation_level(a, same).truncated
    with pytest.raises(CellComplexError):
        tower.separation_level(a, real.snap(Point((0.0, 0.0)), 5, tower))


def test_flower_invariance_small(t2, pw):
    for tower, _ in (t2, pw):
        for m in (1, 2, 3):
            rep = tower.check_flower_invariance(m)
            assert rep.ok, rep.failures[:3]


def test_flower_invariance_identity_rule():
    tower = Tower(identity_subdivision(2)[0])
    rep = tower.check_flower_invariance(1)
    assert rep.ok


def test_joining_numbers_match_bruteforce(t2):
    tower, _ = t2
    for m in (0, 1, 2):
        want = _bruteforce_joining(tower, m, cap=5)
        assert tower.joining_number(m, cap=8) == want


def _bruteforce_joining(tower, m, cap):
    """Exhaustive growth of connected families, checked by joins_base."""
    cells = tower.cells_at_level(m)
    neighbours = {
        c: [d for d in cells if tower.intersects(c, d) and d is not c] for c in cells
    }
    frontier = [frozenset([c]) for c in cells]
    seen = set(frontier)
    for size in range(1, cap + 1):
        for fam in frontier:
            if tower.joins_base(fam):
                return size
        grown = set()
        for fam in frontier:
            for c in fam:
                for d in neighbours[c]:
                    new = fam | {d}
                    if len(new) == size + 1 and new not in seen:
                        seen.add(new)
                        grown.add(new)
        frontier = list(grown)
    return None


def test_joining_exact_values_and_monotonicity(t2):
    tower, _ = t2
    rep = tower.joining_report(3, cap=16)
    assert [rep.values[m] for m in range(4)] == [1, 2, 4, 8]
    assert rep.monotone


def test_joins_base_examples(t2):
    tower, real = t2
    # a single level-0 chamber joins; a single half-square does not (every
    # met D0 cell contains the corner vertex of its quadrant)
    assert tower.joins_base([tower.chambers_at_level(0)[0]])
    half = tower.chambers_at_level(1)
    for X in half:
        assert not tower.joins_base([X])
    # two half-squares spanning a full unit edge do join
    a = next(X for X in half if real.geom_of(X, tower).starts == (0.0, 0.0))
    b = next(X for X in half if real.geom_of(X, tower).starts == (0.5, 0.0))
    assert tower.joins_base([a, b])


def test_neighborhoods_u1_u2(t2):
    tower, _ = t2
    X = tower.chambers_at_level(2)[5]
    u1, u2 = tower.neighborhoods_u1_u2([X])
    assert X in u1 and u1 <= u2
    assert len(u1) == 9 and len(u2) == 25
    allc = tower.chambers_at_level(1)
    u1a, u2a = tower.neighborhoods_u1_u2(allc)
    assert u1a == u2a == frozenset(allc)
    with pytest.raises(CellComplexError):
        tower.neighborhoods_u1_u2([])


def test_u1_forward_invariance(t2, pw):
    for tower, _ in (t2, pw):
        assert tower.check_u1_forward_invariance(1, 1)
        assert tower.check_u1_forward_invariance(1, 2)


def test_ffi(t2, pw):
    tower, _ = t2
    rep = tower.ffi_report(4)
    assert all(rep.sup_counts[m] == 4 for m in range(5))
    tower_p, _ = pw
    rep_p = tower_p.ffi_report(4)
    assert all(rep_p.sup_counts[m] <= 4 for m in range(5))
    assert rep_p.method[4] == "exact"


def test_image_reachability(t2):
    tower, _ = t2
    for m in (1, 2):
        rep = tower.image_reachability(m)
        assert rep.onto and rep.fiber_counts_constant and rep.expanding
        assert rep.cover_steps is not None and rep.cover_steps <= m
    ident = Tower(identity_subdivision(2)[0])
    rep = ident.image_reachability(2)
    assert rep.onto and not rep.expanding and rep.cover_steps is None


def test_persistence(t2):
    tower, _ = t2
    for v in tower.vertices_at_level(1)[:6]:
        deep = tower.persist_to(v, 4)
        assert deep.level == 4 and deep.dim == 0
        back = deep
        for _ in range(3):
            back = tower.minimal_parent(back)
        assert back is v


def test_common_face_witness(t2):
    tower, _ = t2
    a, b = tower.chambers_at_level(2)[0], tower.chambers_at_level(2)[1]
    if tower.intersects(a, b):
        w = tower.common_face_witness(a, b)
        assert w in tower.closure(a) and w in tower.closure(b)
    assert tower.common_face_witness(a, a) is a


def test_resource_cap(t2):
    tower = Tower(torus_doubling(2)[0], cell_cap=100)
    with pytest.raises(ResourceCapExceeded):
        tower.cells_at_level(3)


def test_pair_validation(t2):
    tower, _ = t2
    c1 = tower.cells_at_level(1)
    p = c1[0]
    bad_q = next(
        q for q in c1 if tower.minimal_parent(q) is not tower.image(p)
    )
    with pytest.raises(CellComplexError):
        tower.pair(p, bad_q)


@pytest.mark.parametrize("m", range(4))
def test_refinement_partition_exhaustive(t2, pw, m):
    for tower, _ in (t2, pw):
        assert tower.check_refinement_partition(m) == []


def test_joining_cap_reported_not_thrown(t2):
    tower, real = t2
    rep = tower.joining_report(
        1, cap=1, mesh=lambda m: real.mesh(tower, m), lebesgue0=0.25
    )
    assert rep.values[0] == 1
    assert rep.values[1] is None  # exceeded the cap; reported, not raised
    assert rep.lower_bounds[1] > 0
