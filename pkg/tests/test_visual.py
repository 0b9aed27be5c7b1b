"""Quasi-distance, chain metrization, cell-metric bounds, hyperbolicity."""

import math

import numpy as np
import pytest

from cellseq import (
    stable_epsilon,
    CellComplexError,
    Point,
    Tower,
    TruncatedPairError,
    VisualMetricConfig,
    cell_metric_report,
    chain_metric,
    flat_comparability,
    hyperbolicity_constants,
    quasi_distance,
)
from cellseq.examples import pillowcase, torus_doubling


@pytest.fixture(scope="module")
def t2():
    rule, real = torus_doubling(2)
    return Tower(rule), real


def _vertex_sample(tower, depth, level):
    return tuple(tower.vertex_addresses(depth, at_level=level))


def test_quasi_distance_values(t2):
    tower, real = t2
    a = real.snap(Point((0.0, 0.0)), 6, tower)
    b = real.snap(Point((1.0, 0.0)), 6, tower)
    assert quasi_distance(tower, a, b, 2.0) == 0.5
    same = real.snap(Point((0.0, 0.0)), 6, tower)
    assert quasi_distance(tower, a, same, 2.0) == 0.0
    close = real.snap(Point((2.0**-6, 0.0)), 6, tower)
    with pytest.raises(TruncatedPairError):
        quasi_distance(tower, a, close, 2.0)
    for x in _vertex_sample(tower, 5, 2)[:6]:
        for y in _vertex_sample(tower, 5, 2)[:6]:
            if x.carrier is not y.carrier:
                q = quasi_distance(tower, x, y, 2.0)
                assert 0 < q <= 1.0


def test_config_validation(t2):
    tower, _ = t2
    with pytest.raises(CellComplexError):
        VisualMetricConfig(1.0, 1.0, 4)
    with pytest.raises(CellComplexError):
        VisualMetricConfig(2.0, 0.0, 4)
    with pytest.raises(CellComplexError):
        VisualMetricConfig(2.0, 1.0, 4, tuple(tower.vertex_addresses(3, at_level=2)))


def test_two_point_sample_is_direct(t2):
    tower, _ = t2
    sample = _vertex_sample(tower, 5, 1)[:2]
    cfg = VisualMetricConfig(2.0, 1.0, 5, sample)
    rep = chain_metric(tower, cfg)
    assert rep.rho[0, 1] == rep.q[0, 1] ** 1.0
    assert rep.metric_ok


def test_chain_metric_properties(t2):
    tower, _ = t2
    sample = _vertex_sample(tower, 6, 3)
    cfg = VisualMetricConfig(2.0, 1.0, 6, sample)
    rep = chain_metric(tower, cfg)
    assert rep.metric_ok
    assert rep.dominated  # rho <= q^eps pointwise
    assert np.isfinite(rep.c_meas)
    off = ~np.eye(len(sample), dtype=bool)
    assert (rep.rho[off] > 0).all()


def test_c_meas_depth_stability(t2):
    tower, _ = t2
    reps = {}
    for depth in (4, 6):
        sample = _vertex_sample(tower, depth, 3)
        cfg = VisualMetricConfig(2.0, 1.0, depth, sample)
        reps[depth] = chain_metric(tower, cfg)
    ratio = reps[6].c_meas / reps[4].c_meas
    assert 0.5 <= ratio <= 2.0


def test_empty_sample_rejected(t2):
    tower, _ = t2
    with pytest.raises(CellComplexError):
        chain_metric(tower, VisualMetricConfig(2.0, 1.0, 4, ()))


def test_cell_metric_bounds(t2):
    tower, _ = t2
    sample = _vertex_sample(tower, 5, 3)
    cfg = VisualMetricConfig(2.0, 1.0, 5, sample)
    rep = chain_metric(tower, cfg)
    cm = cell_metric_report(tower, rep, 3)
    assert cm.fully_covered
    for m, (dmax, dmin, gap, covered, total) in cm.rows.items():
        assert 1.0 / cm.c_prime <= dmin <= dmax <= cm.c_prime
        assert gap >= 1.0 / cm.c_prime
    # the dyadic torus is exactly self-similar: scaled diameters agree across levels
    vals = {m: row[0] for m, row in cm.rows.items()}
    assert max(vals.values()) == pytest.approx(min(vals.values()))


def test_hyperbolicity(t2):
    tower, _ = t2
    addrs = _vertex_sample(tower, 5, 3)
    rep = hyperbolicity_constants(tower, addrs)
    assert rep.k0 <= 3
    assert rep.iteration_ok


def test_hyperbolicity_depth4_full_grid(t2):
    tower, _ = t2
    addrs = _vertex_sample(tower, 4, 4)
    rep = hyperbolicity_constants(tower, addrs)
    assert rep.k0 <= 3 and rep.iteration_ok


def test_flat_comparability(t2):
    """The combinatorial metric is bi-Lipschitz to the flat one on the sample."""
    tower, real = t2
    sample = _vertex_sample(tower, 6, 3)
    cfg = VisualMetricConfig(2.0, 1.0, 6, sample)
    rep = chain_metric(tower, cfg)
    pts = []
    for a in sample:
        g = real.geom_of(a.carrier, tower)
        pts.append(Point(g.starts, g.face))
    flat = np.array([[real.point_distance(p, q) for q in pts] for p in pts])
    lo, hi = flat_comparability(rep, flat)
    assert 0 < lo <= hi < math.inf
    assert hi / lo <= 16.0


def test_pillow_chain_metric(pw_tower=None):
    rule, real = pillowcase()
    tower = Tower(rule)
    sample = tuple(tower.vertex_addresses(5, at_level=2))
    cfg = VisualMetricConfig(2.0, 1.0, 5, sample)
    rep = chain_metric(tower, cfg)
    assert rep.metric_ok and rep.dominated and np.isfinite(rep.c_meas)


def test_stable_epsilon_accepts_one_on_torus(t2):
    tower, _ = t2
    eps, cs = stable_epsilon(tower, 2.0, (4, 5), 2)
    assert eps == 1.0
    assert set(cs) == {4, 5}
