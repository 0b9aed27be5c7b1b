"""Subdivision-rule validation, multiplicity counts, branch and postcritical data."""

import pytest

from cellseq import RuleDataError, SubdivisionRule, cpcf_data, multiplicity_table, validate_rule
from cellseq.examples import identity_subdivision, pillowcase, torus_doubling

import oracles


@pytest.fixture(scope="module")
def torus2():
    return torus_doubling(2)[0]


@pytest.fixture(scope="module")
def torus3():
    return torus_doubling(3)[0]


@pytest.fixture(scope="module")
def pillow():
    return pillowcase()[0]


def test_builtin_rules_validate(torus2, torus3, pillow):
    assert validate_rule(torus2).ok
    assert validate_rule(torus3).ok
    assert validate_rule(pillow).ok
    assert validate_rule(identity_subdivision(2)[0]).ok


def test_dimension_breaking_image_fails(torus2):
    image = dict(torus2.image)
    edge = next(c for c in torus2.refined.cells if torus2.refined.dim(c) == 1)
    image[edge] = torus2.base.vertices[0]
    bad = SubdivisionRule(torus2.base, torus2.refined, dict(torus2.parent), image)
    report = validate_rule(bad)
    assert not report.ok
    assert any(edge in p for p in report.problems)


def test_wrong_parent_fails(torus2):
    parent = dict(torus2.parent)
    X = torus2.refined.chambers[0]
    wrong = next(p for p in torus2.base.chambers if p != parent[X])
    parent[X] = wrong
    bad = SubdivisionRule(torus2.base, torus2.refined, parent, dict(torus2.image))
    report = validate_rule(bad)
    assert not report.ok
    assert any(X in p for p in report.problems)


def test_degree(torus2, torus3, pillow):
    assert torus2.degree() == 4
    assert torus3.degree() == 8
    assert pillow.degree() == 4
    assert identity_subdivision(2)[0].degree() == 1


def test_degree_raises_on_nonconstant_fibers(torus2):
    image = dict(torus2.image)
    chambers = torus2.refined.chambers
    # redirect one chamber fibre (keeps dimensions, breaks the counts)
    donor, receiver = torus2.image[chambers[0]], None
    for X in chambers:
        if torus2.image[X] != donor:
            receiver = torus2.image[X]
            break
    image[chambers[0]] = receiver
    bad = SubdivisionRule(torus2.base, torus2.refined, dict(torus2.parent), image)
    with pytest.raises(RuleDataError):
        bad.degree()


def test_torus_multiplicity_all_one(torus2, torus3):
    for rule in (torus2, torus3):
        assert all(rule.local_multiplicity(c) == 1 for c in rule.refined.cells)
        assert not rule.branch_cells().ids


def test_torus_multiplicity_matches_oracle(torus2):
    for c in torus2.refined.vertices:
        s0, s1 = c[1:].split("_")
        key = tuple((int(t.split("e")[0]), int(t.split("e")[1])) for t in (s0, s1))
        assert torus2.local_multiplicity(c) == oracles.torus_multiplicity_oracle(key, 2)


PILLOW_BRANCH_VERTICES = {
    # face centres and boundary-edge midpoints: the vertices that map onto
    # pillow corners with a full disk wrapping onto a half-angle cone
    "F|1e0_1e0",
    "B|1e0_1e0",
    "S|1e0_0e0",
    "S|1e0_2e0",
    "S|0e0_1e0",
    "S|2e0_1e0",
}


def _pillow_key(cid: str):
    face = {"F": 0, "B": 1, "S": None}[cid[0]]
    toks = tuple(
        (int(t.split("e")[0]), int(t.split("e")[1])) for t in cid[2:].split("_")
    )
    return (face, toks)


def test_pillow_multiplicity_matches_oracle_and_frozen_set(pillow):
    cells1 = oracles.pillow_cells(1)
    cells0 = oracles.pillow_cells(0)
    observed_two = set()
    for v in pillow.refined.vertices:
        i_lib = pillow.local_multiplicity(v)
        i_oracle = oracles.pillow_multiplicity_oracle(_pillow_key(v), cells1, cells0)
        assert i_lib == i_oracle, v
        if i_lib >= 2:
            observed_two.add(v)
            assert i_lib == 2
    assert observed_two == PILLOW_BRANCH_VERTICES
    # non-vertex cells are all unbranched
    for c in pillow.refined.cells:
        if pillow.refined.dim(c) > 0:
            assert pillow.local_multiplicity(c) == 1


def test_multiplicity_inequality(torus2, torus3, pillow):
    for rule in (torus2, torus3, pillow):
        assert multiplicity_table(rule).inequality_ok


def test_multiplicity_upper_semicontinuous_on_poset(pillow):
    d1 = pillow.refined
    for c in d1.cells:
        for f in d1.faces_of(c):
            assert pillow.local_multiplicity(f) >= pillow.local_multiplicity(c)


def test_branch_complex(pillow, torus2):
    assert torus2.branch_cells().ids == frozenset()
    ids = pillow.branch_cells().ids
    assert ids == PILLOW_BRANCH_VERTICES
    assert identity_subdivision(2)[0].branch_cells().ids == frozenset()


def test_vertex_chamber_count(torus2, torus3, pillow):
    assert all(torus2.vertex_chamber_count(v, 0) == 4 for v in torus2.base.vertices)
    assert all(torus3.vertex_chamber_count(v, 0) == 8 for v in torus3.base.vertices)
    corner = "S|0e0_0e0"
    assert pillow.vertex_chamber_count(corner, 0) == 2


def test_cpcf_data(torus2, pillow):
    rep = cpcf_data(torus2)
    assert rep.postcritical == frozenset() and rep.is_cpcf
    rep = cpcf_data(pillow)
    corners = {c for c in pillow.base.vertices}
    assert rep.postcritical == corners  # the four pillow corners
    assert rep.forward_of_postcritical <= rep.postcritical
    assert rep.is_cpcf
    assert cpcf_data(identity_subdivision(2)[0]).postcritical == frozenset()


def test_image_set_through_subdivision(torus2):
    # the image of a D0 chamber is the whole complex (unit square doubles
    # over the full torus)
    X = torus2.base.chambers[0]
    assert torus2.image_set(X) == frozenset(torus2.base.cells)
