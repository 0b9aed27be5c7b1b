"""Visual quasi-distance, chain metrization, and separation-level diagnostics.

The quasi-distance of two addresses is factor**(-separation level).  The
chain metric regularises it on a finite sample: shortest paths on the
complete graph with edge weights q**epsilon.  Shortest-path relaxation is
exact for the sampled points and lower-bounds the continuum chain
construction; the comparability constant of the two quantities is measured
and reported rather than normalised away.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cells import CellComplexError
from .levels import PointAddress, Tower


class TruncatedPairError(ValueError):
    """Separation level hit the address depth; the true value is only bounded."""


@dataclass(frozen=True)
class VisualMetricConfig:
    factor: float                      # expansion factor, > 1
    epsilon: float = 1.0               # snowflake exponent in (0, 1]
    depth: int = 6
    sample: tuple[PointAddress, ...] = ()

    def __post_init__(self):
        if not self.factor > 1:
            raise CellComplexError("expansion factor must exceed 1")
        if not 0 < self.epsilon <= 1:
            raise CellComplexError("epsilon must lie in (0, 1]")
        for a in self.sample:
            if a.depth != self.depth:
                raise CellComplexError("sample addresses must share the config depth")


def quasi_distance(tower: Tower, x: PointAddress, y: PointAddress, factor: float) -> float:
    """factor**(-m(x, y)); zero for equal addresses, error on truncation."""
    if x.carrier is y.carrier:
        return 0.0
    sep = tower.separation_level(x, y)
    if sep.truncated:
        raise TruncatedPairError(
            f"separation level >= depth {x.depth}; deepen the addresses"
        )
    return float(factor) ** (-sep.value)


@dataclass
class VisualMetricReport:
    config: VisualMetricConfig
    q: np.ndarray                      # quasi-distance matrix (truncated pairs capped)
    rho: np.ndarray                    # chain metric (shortest paths on q**eps)
    truncated: np.ndarray              # mask of capped pairs (excluded from C)
    c_meas: float                      # max of q**eps / rho over untruncated pairs
    metric_ok: bool                    # symmetry, positivity, triangle inequality
    dominated: bool                    # rho <= q**eps pointwise
    cell_table: "CellMetricReport | None" = None  # filled by cell_metric_report

    def to_dict(self) -> dict:
        out = {
            "factor": self.config.factor,
            "epsilon": self.config.epsilon,
            "depth": self.config.depth,
            "n_sample": len(self.config.sample),
            "c_meas": self.c_meas,
            "n_truncated_pairs": int(self.truncated.sum() // 2),
            "metric_ok": self.metric_ok,
            "dominated": self.dominated,
        }
        if self.cell_table is not None:
            out["cell_table"] = self.cell_table.to_dict()
        return out


def chain_metric(tower: Tower, config: VisualMetricConfig) -> VisualMetricReport:
    """Chain metrization of the quasi-distance on the config sample."""
    from scipy.sparse.csgraph import floyd_warshall

    sample = config.sample
    if not sample:
        raise CellComplexError("empty sample")
    levels, truncated = tower.separation_matrix(sample)
    q = np.power(float(config.factor), -levels.astype(float))
    same = np.array(
        [[a.carrier is b.carrier for b in sample] for a in sample], dtype=bool
    )
    q[same] = 0.0
    truncated = truncated & ~same
    w = np.power(q, config.epsilon)
    np.fill_diagonal(w, 0.0)
    rho = floyd_warshall(w)
    off = ~np.eye(len(sample), dtype=bool)
    metric_ok = bool(
        np.allclose(rho, rho.T, atol=1e-12)
        and (rho[off & ~same] > 0).all()
        and _triangle_ok(rho)
    )
    dominated = bool((rho <= w + 1e-12).all())
    usable = off & ~truncated & ~same
    c_meas = float((w[usable] / rho[usable]).max()) if usable.any() else 1.0
    return VisualMetricReport(config, q, rho, truncated, c_meas, metric_ok, dominated)


def _triangle_ok(rho: np.ndarray, tol: float = 1e-12) -> bool:
    for k in range(rho.shape[0]):
        if (rho > rho[:, k][:, None] + rho[k, :][None, :] + tol).any():
            return False
    return True


@dataclass
class CellMetricReport:
    """Chamber diameters and disjoint-chamber gaps in the chain metric.

    ``rows[m]`` holds (max diam * factor^m, min diam * factor^m,
    min disjoint dist * factor^m, chambers covered, chambers total); the
    single constant ``c_prime`` makes all covered values lie within
    [1/c_prime, c_prime] (and gaps above 1/c_prime) across the level range.
    """

    rows: dict[int, tuple[float, float, float, int, int]]
    c_prime: float
    fully_covered: bool

    def to_dict(self) -> dict:
        return {
            "rows": {str(m): list(r) for m, r in sorted(self.rows.items())},
            "c_prime": self.c_prime,
            "fully_covered": self.fully_covered,
        }


def cell_metric_report(
    tower: Tower, report: VisualMetricReport, max_m: int
) -> CellMetricReport:
    sample = report.config.sample
    factor = report.config.factor
    rho = report.rho
    rows: dict[int, tuple[float, float, float, int, int]] = {}
    c_required = 1.0
    fully = True
    for m in range(1, max_m + 1):
        membership: dict = {}
        for i, a in enumerate(sample):
            for X in a.chambers_at(m):
                membership.setdefault(X, []).append(i)
        chambers = tower.chambers_at_level(m)
        covered = {X: idx for X, idx in membership.items() if len(idx) >= 2}
        if not covered:
            raise CellComplexError(f"no chamber at level {m} holds two sample points")
        scale = float(factor) ** m
        diams = {}
        for X, idx in covered.items():
            block = rho[np.ix_(idx, idx)]
            diams[X] = float(block.max())
        vals = np.array(list(diams.values())) * scale
        dmax, dmin = float(vals.max()), float(vals.min())
        gap = np.inf
        items = sorted(covered.items(), key=lambda kv: kv[0].seq)
        for i, (X, ix) in enumerate(items):
            for Y, iy in items[i + 1:]:
                if not tower.intersects(X, Y):
                    gap = min(gap, float(rho[np.ix_(ix, iy)].min()))
        gap_scaled = float(gap * scale) if np.isfinite(gap) else np.inf
        rows[m] = (dmax, dmin, gap_scaled, len(covered), len(chambers))
        fully = fully and len(covered) == len(chambers)
        c_required = max(c_required, dmax, 1.0 / dmin if dmin > 0 else np.inf)
        if np.isfinite(gap_scaled):
            c_required = max(c_required, 1.0 / gap_scaled)
    out = CellMetricReport(rows, float(c_required), fully)
    report.cell_table = out
    return out


def stable_epsilon(
    tower: Tower,
    factor: float,
    depths: tuple[int, int],
    sample_level: int,
    start: float = 1.0,
    ratio_cap: float = 2.0,
    floor: float = 2.0**-6,
) -> tuple[float, dict[int, float]]:
    """Largest exponent (starting from ``start``, halving) whose
    comparability constant is stable across the two depths.

    This is the snowflake direction of the metrization argument: a smaller
    exponent always exists, so the loop terminates at ``floor`` even for
    badly distorted data.
    """
    eps = start
    while True:
        cs: dict[int, float] = {}
        for depth in depths:
            sample = tuple(tower.vertex_addresses(depth, at_level=sample_level))
            rep = chain_metric(tower, VisualMetricConfig(factor, eps, depth, sample))
            cs[depth] = rep.c_meas
        vals = list(cs.values())
        if max(vals) / min(vals) <= ratio_cap or eps <= floor:
            return eps, cs
        eps /= 2


@dataclass
class HyperbolicityReport:
    k0: int
    iteration_ok: bool
    n_points: int
    depth: int

    def to_dict(self) -> dict:
        return {
            "k0": self.k0,
            "iteration_ok": self.iteration_ok,
            "n_points": self.n_points,
            "depth": self.depth,
        }


def hyperbolicity_constants(
    tower: Tower, addresses: Sequence[PointAddress]
) -> HyperbolicityReport:
    """Empirical hyperbolicity defect and the one-step iteration inequality.

    k0 is the largest value of min(m(x,z), m(z,y)) - m(x,y) over sampled
    triples, skipping pairs (x, y) whose separation level is truncated (their
    true value is at least the depth, so they cannot bind).  Truncated values
    elsewhere enter at their capped value, which only lowers the min.
    """
    addresses = list(addresses)
    depth = addresses[0].depth
    levels, truncated = tower.separation_matrix(addresses)
    m = levels.astype(np.int32)
    defect = 0
    usable = ~truncated
    for z in range(len(addresses)):
        cand = np.minimum(m[:, z][:, None], m[z, :][None, :]) - m
        cand[~usable] = -(10**6)
        defect = max(defect, int(cand.max()))
    images = [a.forward() for a in addresses]
    m_img, _ = tower.separation_matrix(images)
    iteration_ok = bool((m_img.astype(np.int32) >= m - 1).all())
    return HyperbolicityReport(max(defect, 0), iteration_ok, len(addresses), depth)


def flat_comparability(
    report: VisualMetricReport, flat: np.ndarray
) -> tuple[float, float]:
    """Range of rho / flat-distance over untruncated distinct pairs."""
    off = ~np.eye(report.rho.shape[0], dtype=bool) & ~report.truncated
    good = off & (flat > 0)
    ratios = report.rho[good] / flat[good]
    return float(ratios.min()), float(ratios.max())
