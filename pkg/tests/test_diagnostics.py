"""QV constants, BQS envelopes, approximation levels, CXC axioms, QS modulus."""

import math

import numpy as np
import pytest

from cellseq import (
    CellComplexError,
    Marking,
    Point,
    Tower,
    VisualMetricConfig,
    chain_metric,
)
from cellseq import diagnostics as dg
from cellseq.examples import identity_subdivision, pillowcase, torus_doubling


@pytest.fixture(scope="module")
def t2():
    rule, real = torus_doubling(2)
    return Tower(rule), real


@pytest.fixture(scope="module")
def pw():
    rule, real = pillowcase()
    return Tower(rule), real


@pytest.fixture(scope="module")
def qv2(t2):
    tower, real = t2
    return dg.qv_constants(tower, real, 4, 4)


def test_qv_torus_exact(qv2):
    for k in (1, 2, 3, 4):
        assert qv2.alpha[k] == pytest.approx(2.0**k, abs=1e-12)
        assert qv2.beta[k] == pytest.approx(2.0**k, abs=1e-12)
    for m, lam in qv2.lambda_by_level.items():
        assert lam == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert qv2.lambda_sep == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert qv2.mu >= 1.0 and np.isfinite(qv2.mu)


def test_qv_alpha_grows(qv2):
    ks = sorted(qv2.alpha)
    for a, b in zip(ks, ks[1:]):
        assert qv2.alpha[b] > qv2.alpha[a]


def test_qv_invariant_chain(qv2):
    for k in qv2.alpha:
        assert 0 < qv2.alpha[k] <= qv2.beta[k]
    assert qv2.lambda_sep > 0
    assert qv2.mu >= 1


def test_qv_pillow_stable():
    rule, real = pillowcase()
    tower = Tower(rule)
    qv = dg.qv_constants(tower, real, 5, 2, mu_sample_level=1)
    assert qv.lambda_sep > 0
    vals = [qv.lambda_by_level[m] for m in range(1, 6)]
    assert max(vals) / min(vals) < 2.0


def test_bqs_envelope_torus(t2):
    tower, real = t2
    marking = Marking(real, tower)
    env = dg.bqs_envelope(tower, real, marking, range(1, 7))
    lo, hi = env.ratio_range
    assert 0.25 <= lo <= hi <= 4.0
    assert env.m_stability_factor <= 2.0
    assert env.submultiplicative_ok
    # identical continua are ratio-1 samples
    assert any(t == 1.0 and r == 1.0 for t, r in env.envelope)


def test_bqs_envelope_pillow(pw):
    tower, real = pw
    marking = Marking(real, tower)
    env = dg.bqs_envelope(tower, real, marking, range(1, 5))
    assert np.isfinite(env.ratio_range[1])
    assert env.m_stability_factor <= 2.0


def test_approximation_of(t2):
    tower, real = t2
    level, flower = dg.approximation_of(
        tower, real, [Point((0.501, 0.501)), Point((0.53, 0.52))], 8
    )
    assert level == 6 and flower is not None and flower.dim == 0
    whole = [Point((0.0, 0.0)), Point((1.0, 1.0)), Point((0.5, 1.5))]
    assert dg.approximation_of(tower, real, whole, 6) == (-1, None)
    with pytest.raises(CellComplexError):
        dg.approximation_of(tower, real, [Point((0.1, 0.1))], 4)


def test_cxc_torus(t2):
    tower, real = t2
    rep = dg.cxc_report(tower, real, 4)
    assert rep.expanding
    assert rep.expansion_rate == pytest.approx(0.5, abs=1e-12)
    assert rep.theta == pytest.approx(0.5, abs=1e-12)
    assert rep.degree_max == 1
    lo, hi = rep.roundness_ratio_range
    assert 0.5 <= lo <= hi <= 2.0  # similarity invariance up to wraparound
    assert rep.ball_constant >= 1.0
    assert rep.irreducibility_proxy_ok


def test_cxc_pillow(pw):
    tower, real = pw
    rep = dg.cxc_report(tower, real, 3)
    assert rep.degree_max == 2
    assert rep.expanding
    assert abs(rep.expansion_rate - 0.5) < 0.05


def test_cxc_identity_flagged():
    rule, real = identity_subdivision(2)
    rep = dg.cxc_report(Tower(rule), real, 3)
    assert not rep.expanding
    assert rep.theta is None


def test_qs_identity_modulus(t2):
    tower, real = t2
    sample = tuple(tower.vertex_addresses(5, at_level=2))
    cfg = VisualMetricConfig(2.0, 1.0, 5, sample)
    rep = chain_metric(tower, cfg)
    pts = []
    for a in sample:
        g = real.geom_of(a.carrier, tower)
        pts.append(Point(g.starts, g.face))
    flat = np.array([[real.point_distance(p, q) for q in pts] for p in pts])
    table = dg.qs_identity_modulus(rep.rho, flat)
    ts = [t for t, _ in table]
    vals = [v for _, v in table]
    assert vals == sorted(vals)  # monotone by construction
    # bounded by an affine (here: linear) function of t on the sampled range
    assert all(v <= 2.0 * t + 1e-9 for t, v in table)
    assert ts[0] < 1 < ts[-1]
