"""Numeric distortion diagnostics: quasi-visual constants, branched
quasisymmetry envelopes, coarse-expansion axioms, and the quasisymmetry
modulus of the identity between the combinatorial and flat metrics.

Everything here is a measurement over enumerable or sampled configurations;
envelopes are step functions over the sampled range with no extrapolation,
and reports carry the sampled domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cells import CellComplexError
from .levels import LevelCell, Tower
from .realization import Marking, Point, Realization, TorusRealization


@dataclass
class QVConstants:
    """Neighbour diameter ratios, disjoint-chamber separation, and the
    point-distance versus carrier-chamber-diameter band."""

    alpha: dict[int, float]            # per offset k: min diam ratio over meeting pairs
    beta: dict[int, float]             # per offset k: max diam ratio
    lambda_by_level: dict[int, float]  # per level: min dist/diam over disjoint pairs
    lambda_sep: float
    mu: float

    def to_dict(self) -> dict:
        return {
            "alpha": {str(k): v for k, v in sorted(self.alpha.items())},
            "beta": {str(k): v for k, v in sorted(self.beta.items())},
            "lambda_by_level": {str(k): v for k, v in sorted(self.lambda_by_level.items())},
            "lambda_sep": self.lambda_sep,
            "mu": self.mu,
        }


def _met_coarse_chambers(tower: Tower, W: LevelCell, m: int) -> set[LevelCell]:
    """Level-m chambers meeting the deeper cell W (via ancestor carriers)."""
    k = W.level - m
    ancestors = set()
    for z in tower.closure(W):
        a = z
        for _ in range(k):
            a = tower.minimal_parent(a)
        ancestors.add(a)
    out: set[LevelCell] = set()
    for a in ancestors:
        for s in tower.star(a):
            if s.dim == tower.dim_top:
                out.add(s)
    return out


def _disjoint_min_ratio(tower: Tower, realization: Realization, m: int) -> float:
    """min over ordered disjoint chamber pairs of dist / diam(first)."""
    chambers = tower.chambers_at_level(m)
    geoms = [realization.geom_of(X, tower) for X in chambers]
    diams = np.array([realization.diam(g) for g in geoms])
    n = len(chambers)
    meet = np.zeros((n, n), dtype=bool)
    index = {X: i for i, X in enumerate(chambers)}
    shared: dict[LevelCell, list[int]] = {}
    for X in chambers:
        for z in tower.closure(X):
            shared.setdefault(z, []).append(index[X])
    for group in shared.values():
        g = np.asarray(group)
        meet[np.ix_(g, g)] = True
    if isinstance(realization, TorusRealization):
        L = realization.L
        starts = np.array([g.starts for g in geoms])
        lens = np.array([g.lens for g in geoms])
        centers = starts + lens / 2
        best = math.inf
        chunk = max(1, 2**22 // max(n, 1))
        for lo in range(0, n, chunk):
            hi = min(n, lo + chunk)
            d = np.abs(centers[lo:hi, None, :] - centers[None, :, :]) % L
            d = np.minimum(d, L - d)
            gap = np.maximum(0.0, d - (lens[lo:hi, None, :] + lens[None, :, :]) / 2)
            dist = np.sqrt((gap**2).sum(axis=2))
            ratio = dist / diams[lo:hi, None]
            ratio[meet[lo:hi]] = math.inf
            best = min(best, float(ratio.min()))
        return best
    # pillowcase: one batched net sweep from every cell node, then grouped
    # minima over source and target chamber blocks
    from scipy.sparse.csgraph import dijkstra

    node_groups = [realization.node_ids(g) for g in geoms]
    cat = np.concatenate([np.asarray(g) for g in node_groups])
    offsets = np.cumsum([0] + [len(g) for g in node_groups])[:-1]
    best = math.inf
    chunk = max(1, 2_000_000 // max(len(realization._node_index), 1))
    row_of = np.repeat(np.arange(n), [len(g) for g in node_groups])
    for lo in range(0, len(cat), chunk):
        hi = min(len(cat), lo + chunk)
        d = dijkstra(realization._net(), indices=cat[lo:hi])
        pair = np.minimum.reduceat(d[:, cat], offsets, axis=1)
        rows = row_of[lo:hi]
        for i in np.unique(rows):
            dist = pair[rows == i].min(axis=0)
            ratio = dist / diams[i]
            ratio[meet[i]] = math.inf
            best = min(best, float(ratio.min()))
    return best


def qv_constants(
    tower: Tower,
    realization: Realization,
    max_m: int,
    max_k: int,
    mu_sample_level: int = 2,
    mu_depth: int | None = None,
) -> QVConstants:
    """Measure the three quasi-visual comparability quantities.

    alpha/beta: diameter ratios over all meeting chamber pairs at levels
    (m, m+k); lambda: distance over diameter for disjoint same-level pairs;
    mu: distance of two sampled points against the diameter of any chamber
    at their separation level containing the first point.
    """
    alpha: dict[int, float] = {}
    beta: dict[int, float] = {}
    for k in range(1, max_k + 1):
        lo, hi = math.inf, 0.0
        for m in range(0, max_m - k + 1):
            for W in tower.chambers_at_level(m + k):
                dw = realization.cell_diam(W, tower)
                for Z in _met_coarse_chambers(tower, W, m):
                    r = realization.cell_diam(Z, tower) / dw
                    lo, hi = min(lo, r), max(hi, r)
        alpha[k], beta[k] = lo, hi

    lam: dict[int, float] = {}
    for m in range(1, max_m + 1):
        lam[m] = _disjoint_min_ratio(tower, realization, m)
    lambda_sep = min(lam.values())

    depth = mu_depth if mu_depth is not None else max_m + 1
    addresses = tower.vertex_addresses(depth, at_level=mu_sample_level)
    levels, truncated = tower.separation_matrix(addresses)
    pts = []
    for a in addresses:
        g = realization.geom_of(a.carrier_at(a.depth), tower)
        pts.append(Point(g.starts, g.face))
    mu = 1.0
    n = len(addresses)
    for i in range(n):
        for j in range(i + 1, n):
            if truncated[i, j]:
                continue
            d = realization.point_distance(pts[i], pts[j])
            for Z in addresses[i].chambers_at(int(levels[i, j])):
                ratio = d / realization.cell_diam(Z, tower)
                mu = max(mu, ratio, 1.0 / ratio)
    return QVConstants(alpha, beta, lam, lambda_sep, mu)


@dataclass
class BQSEnvelope:
    """Sampled (size ratio, image size ratio) pairs with a monotone envelope.

    The default continuum family is axis-aligned two-leg polylines running
    from a flower's centre vertex to the markings of two of its cells; both
    legs stay inside one cell, so every diameter is an exact chart distance.
    """

    samples_by_level: dict[int, list[tuple[float, float]]]
    envelope: list[tuple[float, float]]       # global running-max step function
    ratio_range: tuple[float, float]          # min and max of r / t over samples
    m_stability_factor: float                 # max cross-level envelope deviation
    submultiplicative_ok: bool

    def to_dict(self) -> dict:
        return {
            "n_samples": {str(m): len(v) for m, v in sorted(self.samples_by_level.items())},
            "envelope": [list(p) for p in self.envelope],
            "ratio_range": list(self.ratio_range),
            "m_stability_factor": self.m_stability_factor,
            "submultiplicative_ok": self.submultiplicative_ok,
        }


def _chart_distance(realization: Realization, p: Point, q: Point) -> float:
    if isinstance(realization, TorusRealization):
        return realization.point_distance(p, q)
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(p.coords, q.coords)))


def default_continuum_sampler(
    tower: Tower, realization: Realization, marking: Marking, m: int,
    vertices_cap: int = 12,
) -> list[tuple[float, float]]:
    """(t, r) samples from marked polyline pairs in level-m flowers."""
    verts = tower.vertices_at_level(m)
    step = max(1, len(verts) // vertices_cap)
    samples: list[tuple[float, float]] = []
    for p in verts[::step][:vertices_cap]:
        ppos = marking.point(p)
        legs = []
        for c in sorted(tower.star(p), key=lambda c: c.seq):
            if c.dim == 0:
                continue
            cpos = marking.point(c)
            size = _chart_distance(realization, ppos, cpos)
            img_p = marking.point(tower.image_iter(p, m))
            img_c = marking.point(tower.image_iter(c, m))
            img_size = _chart_distance(realization, img_p, img_c)
            if size > 0 and img_size > 0:
                legs.append((size, img_size))
        for ea, fa in legs:
            for eb, fb in legs:
                samples.append((ea / eb, fa / fb))
    return samples


def bqs_envelope(
    tower: Tower,
    realization: Realization,
    marking: Marking,
    m_range: Sequence[int],
    sampler: Callable[[Tower, Realization, Marking, int], list[tuple[float, float]]]
    | None = None,
) -> BQSEnvelope:
    sampler = sampler or default_continuum_sampler
    by_level: dict[int, list[tuple[float, float]]] = {}
    for m in m_range:
        samples = [(t, r) for t, r in sampler(tower, realization, marking, m) if t > 0]
        if not samples:
            raise CellComplexError(f"no admissible continua sampled at level {m}")
        by_level[m] = sorted(samples)

    def envelope_of(samples):
        out = []
        best = 0.0
        for t, r in samples:
            best = max(best, r)
            if out and out[-1][0] == t:
                out[-1] = (t, best)
            else:
                out.append((t, best))
        return out

    env_by_level = {m: envelope_of(v) for m, v in by_level.items()}
    all_samples = sorted(s for v in by_level.values() for s in v)
    global_env = envelope_of(all_samples)
    ratios = [r / t for t, r in all_samples]
    stability = 1.0
    levels = sorted(env_by_level)
    for a in levels:
        for b in levels:
            for t, r in env_by_level[a]:
                vb = _eval_env(env_by_level[b], t)
                if vb is not None and vb > 0:
                    stability = max(stability, r / vb)
    sub_ok = True
    env_ts = [t for t, _ in global_env]
    for ta, ra in all_samples[:: max(1, len(all_samples) // 40)]:
        for tb, rb in all_samples[:: max(1, len(all_samples) // 40)]:
            t = ta * tb
            if env_ts[0] <= t <= env_ts[-1]:
                bound = _eval_env(global_env, t)
                if bound is not None and ra * rb > 2.0 * bound:
                    sub_ok = False
    return BQSEnvelope(
        by_level, global_env, (min(ratios), max(ratios)), stability, sub_ok
    )


def _eval_env(env: list[tuple[float, float]], t: float) -> float | None:
    if not env or t < env[0][0]:
        return None
    lo, hi = 0, len(env)
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if env[mid][0] <= t:
            lo = mid
        else:
            hi = mid
    return env[lo][1]


def approximation_of(
    tower: Tower, realization: Realization, points: Sequence[Point], max_level: int
) -> tuple[int, LevelCell | None]:
    """Deepest flower (in the pullback flower covers) containing the sample.

    Returns (-1, None) when no level-0 flower contains it.  The sample is
    located combinatorially: a point lies in the flower of a vertex iff the
    vertex cell is a face of the point's carrier.
    """
    pts = list(points)
    if len({(p.face, p.coords) for p in pts}) < 2:
        raise CellComplexError("degenerate sample: need at least two distinct points")
    best: tuple[int, LevelCell | None] = (-1, None)
    for level in range(max_level + 1):
        common: set[LevelCell] | None = None
        for p in pts:
            carrier = realization.snap(p, level, tower).carrier
            verts = {z for z in tower.closure(carrier) if z.dim == 0}
            common = verts if common is None else common & verts
            if not common:
                break
        if not common:
            return best
        best = (level, min(common, key=lambda v: v.seq))
    return best


@dataclass
class CXCReport:
    mesh_decay: list[float]
    expansion_rate: float | None
    expanding: bool
    degree_max: int
    roundness_ratio_range: tuple[float, float]
    diameter_ratio_range: tuple[float, float]
    ball_constant: float               # K of the ball-sandwich property
    neighbour_constant: float          # C bounding consecutive-level diam ratios
    theta: float | None                # decay rate of cover meshes
    irreducibility_proxy_ok: bool

    def to_dict(self) -> dict:
        return {
            "mesh_decay": self.mesh_decay,
            "expansion_rate": self.expansion_rate,
            "expanding": self.expanding,
            "degree_max": self.degree_max,
            "roundness_ratio_range": list(self.roundness_ratio_range),
            "diameter_ratio_range": list(self.diameter_ratio_range),
            "ball_constant": self.ball_constant,
            "neighbour_constant": self.neighbour_constant,
            "theta": self.theta,
            "irreducibility_proxy_ok": self.irreducibility_proxy_ok,
        }


def _flower_geoms(tower: Tower, realization: Realization, v: LevelCell):
    return [
        realization.geom_of(s, tower) for s in tower.star(v) if s.dim == tower.dim_top
    ]


def _flower_diam(tower: Tower, realization: Realization, v: LevelCell) -> float:
    return realization.union_diam(_flower_geoms(tower, realization, v))


def _roundness(tower: Tower, realization: Realization, v: LevelCell) -> float:
    """Outradius over inradius of the flower, measured at the centre vertex."""
    geoms = _flower_geoms(tower, realization, v)
    pos = realization.geom_of(v, tower)
    p = Point(pos.starts, pos.face)
    if isinstance(realization, TorusRealization):
        L = realization.L
        out = 0.0
        for g in geoms:
            acc = 0.0
            for x, s, l in zip(p.coords, g.starts, g.lens):
                d = max(
                    min(abs(x - s) % L, L - abs(x - s) % L),
                    min(abs(x - s - l) % L, L - abs(x - s - l) % L),
                )
                acc += min(d, L / 2) ** 2
            out = max(out, math.sqrt(acc))
        inr = math.inf
        for ax in range(len(p.coords)):
            lo, hi = 0.0, 0.0
            for g in geoms:
                d = (g.starts[ax] - p.coords[ax]) % L
                if d >= L / 2:
                    d -= L
                lo = min(lo, d)
                hi = max(hi, d + g.lens[ax])
            if hi - lo >= L - 1e-12:
                inr = min(inr, L / 2)  # the flower wraps this axis entirely
            else:
                inr = min(inr, min(-lo, hi))
        return out / inr
    member: set[int] = set()
    for g in geoms:
        member.update(realization.node_ids(g))
    node = realization._nearest_node(p)
    d_all = realization._dijkstra_min([node])
    out = float(d_all[sorted(member)].max())
    complement = sorted(set(range(len(d_all))) - member)
    if not complement:
        return 1.0
    inr = float(realization._dijkstra_min(complement)[node])
    return out / inr if inr > 0 else math.inf


def cxc_report(
    tower: Tower,
    realization: Realization,
    max_m: int,
    vertices_cap: int = 8,
) -> CXCReport:
    """Measure the coarse-expansion axioms on the flower covers.

    [Expans] is the flower-mesh decay; [Deg] the maximal chamber-count
    degree of iterates restricted to flowers; [Round]/[Diam] distortion is
    sampled on centre vertices and nested flowers obtained by letting a
    vertex persist to deeper levels.  Topological exactness is replaced by
    the combinatorial reachability proxy and labelled as such.
    """
    flower_mesh: list[float] = []
    for m in range(max_m + 1):
        worst = 0.0
        for v in tower.vertices_at_level(m):
            worst = max(worst, _flower_diam(tower, realization, v))
        flower_mesh.append(worst)
    ratios = [b / a for a, b in zip(flower_mesh, flower_mesh[1:])]
    # coarse flowers may saturate the injectivity radius of a small model;
    # the axiom asks for decay, so fit the rate on the strictly-decaying tail
    tail = ratios
    while tail and tail[0] >= 1.0 - 1e-12:
        tail = tail[1:]
    expanding = bool(tail) and all(r < 1.0 - 1e-12 for r in tail)
    rate = float(np.exp(np.mean(np.log(tail)))) if expanding else None

    deg_max = 1
    round_lo, round_hi = math.inf, 0.0
    for m in range(0, max_m):
        for k in range(1, max_m - m + 1):
            verts = tower.vertices_at_level(m + k)
            step = max(1, len(verts) // vertices_cap)
            for p in verts[::step][:vertices_cap]:
                q = tower.image_iter(p, k)
                up = [X for X in tower.star(p) if X.dim == tower.dim_top]
                per_target: dict[LevelCell, int] = {}
                for X in up:
                    t = tower.image_iter(X, k)
                    per_target[t] = per_target.get(t, 0) + 1
                deg_max = max(deg_max, max(per_target.values()))
                r_up = _roundness(tower, realization, p)
                r_dn = _roundness(tower, realization, q)
                round_lo = min(round_lo, r_up / r_dn)
                round_hi = max(round_hi, r_up / r_dn)

    diam_lo, diam_hi = math.inf, 0.0
    for m in range(0, max_m):
        for k in range(1, max_m - m):
            verts = tower.vertices_at_level(m)
            step = max(1, len(verts) // vertices_cap)
            for v in verts[::step][:vertices_cap]:
                for j in range(1, max_m - m - k + 1):
                    deep = tower.persist_to(v, m + k)
                    deeper = tower.persist_to(v, m + k + j)
                    t = _flower_diam(tower, realization, deeper) / _flower_diam(
                        tower, realization, deep
                    )
                    img_deep = tower.image_iter(deep, k)
                    img_deeper = tower.image_iter(deeper, k)
                    r = _flower_diam(tower, realization, img_deeper) / _flower_diam(
                        tower, realization, img_deep
                    )
                    diam_lo = min(diam_lo, r / t)
                    diam_hi = max(diam_hi, r / t)

    ball_k = 1.0
    for m in range(1, max_m + 1):
        verts = tower.vertices_at_level(m)
        step = max(1, len(verts) // vertices_cap)
        for v in verts[::step][:vertices_cap]:
            ball_k = max(ball_k, _roundness(tower, realization, v))

    nb = 1.0
    for m in range(0, max_m):
        verts = tower.vertices_at_level(m)
        step = max(1, len(verts) // vertices_cap)
        for v in verts[::step][:vertices_cap]:
            a = _flower_diam(tower, realization, v)
            b = _flower_diam(tower, realization, tower.persist(v))
            nb = max(nb, a / b, b / a)

    reach = tower.image_reachability(min(2, max_m))
    return CXCReport(
        mesh_decay=flower_mesh,
        expansion_rate=rate,
        expanding=expanding,
        degree_max=deg_max,
        roundness_ratio_range=(round_lo if round_lo < math.inf else 1.0, round_hi or 1.0),
        diameter_ratio_range=(diam_lo if diam_lo < math.inf else 1.0, diam_hi or 1.0),
        ball_constant=ball_k,
        neighbour_constant=nb,
        theta=rate,
        irreducibility_proxy_ok=reach.onto,
    )


def qs_identity_modulus(
    rho: np.ndarray, flat: np.ndarray, max_points: int = 64
) -> list[tuple[float, float]]:
    """Empirical quasisymmetry modulus of the identity map on a shared sample.

    For every triple (x, a, b) with rho(x,a)/rho(x,b) = t, records the flat
    ratio; the returned step function dominates all sampled triples and is
    monotone by construction.
    """
    n = min(rho.shape[0], max_points)
    ts, rs = [], []
    for x in range(n):
        cr = rho[x, :n]
        cf = flat[x, :n]
        ok = (cr > 0) & (cf > 0)
        idx = np.nonzero(ok)[0]
        if len(idx) < 2:
            continue
        t = cr[idx][:, None] / cr[idx][None, :]
        r = cf[idx][:, None] / cf[idx][None, :]
        ts.append(t.ravel())
        rs.append(r.ravel())
    t_all = np.concatenate(ts)
    r_all = np.concatenate(rs)
    order = np.argsort(t_all, kind="stable")
    t_sorted = t_all[order]
    r_running = np.maximum.accumulate(r_all[order])
    # downsample to a manageable step table
    step = max(1, len(t_sorted) // 200)
    pts = list(zip(t_sorted[::step], r_running[::step]))
    if (t_sorted[-1], r_running[-1]) != pts[-1]:
        pts.append((float(t_sorted[-1]), float(r_running[-1])))
    return [(float(a), float(b)) for a, b in pts]
