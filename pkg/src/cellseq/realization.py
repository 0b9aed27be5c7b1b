"""Geometric realizations: exact flat-torus boxes and pillowcase net geodesics.

A realization stores axis-aligned box geometry for the level-0 and level-1
cells plus one affine inverse branch per level-1 chamber.  Deep cells are
never stored: the geometry of a level-m cell is obtained by applying the
inverse branch of its chamber anchor to the geometry of its image, so the
cost is O(level) per cell and all dyadic coordinates stay exact in floats.

Metric queries are exact circular-interval arithmetic on the torus; the
pillowcase (a flat sphere built from two unit squares glued along their
boundary) uses geodesic distances on an 8-neighbour grid net of spacing
``h``, with errors O(h).  Axis or diagonal lattice segments are measured
exactly, so dyadic cell diameters come out exact on the net as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cells import CellComplexError, ValidationReport
from .levels import LevelCell, PointAddress, Tower
from .parallel import pmap
from .rules import SubdivisionRule

TOL = 1e-12


@dataclass(frozen=True)
class Geometry:
    """An axis-aligned box, optionally tagged with a chart face (pillowcase)."""

    starts: tuple[float, ...]
    lens: tuple[float, ...]
    face: int | None = None

    @property
    def dim(self) -> int:
        return sum(1 for x in self.lens if x > TOL)

    def corners(self):
        pts = [()]
        for s, l in zip(self.starts, self.lens):
            vals = (s,) if l <= TOL else (s, s + l)
            pts = [p + (v,) for p in pts for v in vals]
        return pts


@dataclass(frozen=True)
class Point:
    coords: tuple[float, ...]
    face: int | None = None


@dataclass(frozen=True)
class AffineBranch:
    """Inverse branch of one level-1 chamber: y -> offset + scale * y.

    ``source`` is the representative frame of the chamber's image box; input
    geometry is aligned into that frame before the map is applied.  Negative
    scales encode chart reflections (pillowcase folding).
    """

    scale: tuple[float, ...]
    offset: tuple[float, ...]
    source: Geometry
    target_face: int | None = None


@dataclass
class ExpansionReport:
    meshes: list[float]
    ratios: list[float]
    rate: float | None
    expanding: bool
    flower_meshes: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "meshes": self.meshes,
            "ratios": self.ratios,
            "rate": self.rate,
            "expanding": self.expanding,
            "flower_meshes": self.flower_meshes,
        }


def _circ_gap(c1: float, l1: float, c2: float, l2: float, L: float) -> float:
    d = abs(c1 - c2) % L
    d = min(d, L - d)
    return max(0.0, d - (l1 + l2) / 2.0)


def _circ_maxdist(c1: float, l1: float, c2: float, l2: float, L: float) -> float:
    d = abs(c1 - c2) % L
    d = min(d, L - d)
    return min(L / 2.0, d + (l1 + l2) / 2.0)


class Realization:
    """Shared affine machinery; metric primitives live in the subclasses."""

    model = "abstract"

    def __init__(
        self,
        rule: SubdivisionRule,
        base_boxes: dict[str, Geometry],
        refined_boxes: dict[str, Geometry],
        branches: dict[str, AffineBranch],
    ):
        self.rule = rule
        self.base_boxes = dict(base_boxes)
        self.refined_boxes = dict(refined_boxes)
        self.branches = dict(branches)
        self._geom_cache: dict[LevelCell, Geometry] = {}
        self._diam_cache: dict[LevelCell, float] = {}
        missing = [c for c in rule.base.cells if c not in self.base_boxes]
        missing += [c for c in rule.refined.cells if c not in self.refined_boxes]
        if missing:
            raise CellComplexError(f"realization lacks boxes for {missing[:5]}")
        for X in rule.refined.chambers:
            if X not in self.branches:
                raise CellComplexError(f"realization lacks a branch inverse for {X!r}")

    # -- frame arithmetic -----------------------------------------------------

    def _align(self, g: Geometry, frame: Geometry) -> Geometry:
        raise NotImplementedError

    def _canonical(self, starts, lens, face) -> Geometry:
        raise NotImplementedError

    def apply_branch(self, br: AffineBranch, g: Geometry) -> Geometry:
        g = self._align(g, br.source)
        starts, lens = [], []
        for s, off, x0, ln in zip(br.scale, br.offset, g.starts, g.lens):
            a = off + s * x0
            b = off + s * (x0 + ln)
            starts.append(min(a, b))
            lens.append(abs(b - a))
        return self._canonical(starts, lens, br.target_face)

    def apply_branch_point(self, br: AffineBranch, p: Point) -> Point:
        g = self._align(Geometry(p.coords, (0.0,) * len(p.coords), p.face), br.source)
        coords = tuple(off + s * x for s, off, x in zip(br.scale, br.offset, g.starts))
        return self._canonical_point(coords, br.target_face)

    def _canonical_point(self, coords, face) -> Point:
        g = self._canonical(coords, (0.0,) * len(coords), face)
        return Point(g.starts, g.face)

    # -- cell geometry ----------------------------------------------------------

    def _anchor_chamber(self, c: LevelCell, tower: Tower) -> str:
        """Level-1 chamber id whose branch inverse realizes f on cells under c."""
        a = tower.level1_ancestor(c) if c.level >= 1 else c
        if a.dim == self.rule.refined.dim_top:
            return a.cid
        cofaces = sorted(
            s for s in self.rule.refined.star(a.cid)
            if self.rule.refined.dim(s) == self.rule.refined.dim_top
        )
        return cofaces[0]

    def geom_of(self, c: LevelCell, tower: Tower) -> Geometry:
        got = self._geom_cache.get(c)
        if got is not None:
            return got
        if c.level == 0:
            out = self.base_boxes[c.cid]
        elif c.level == 1:
            out = self.refined_boxes[c.cid]
        else:
            anchor = self._anchor_chamber(tower.minimal_parent(c), tower)
            inner = self.geom_of(tower.image(c), tower)
            out = self.apply_branch(self.branches[anchor], inner)
        self._geom_cache[c] = out
        return out

    # -- metric interface ----------------------------------------------------------

    def diam(self, g: Geometry) -> float:
        raise NotImplementedError

    def dist(self, a: Geometry, b: Geometry) -> float:
        raise NotImplementedError

    def union_diam(self, gs: Sequence[Geometry]) -> float:
        raise NotImplementedError

    def point_distance(self, p: Point, q: Point) -> float:
        raise NotImplementedError

    def space_diameter(self) -> float:
        raise NotImplementedError

    def cell_diam(self, c: LevelCell, tower: Tower) -> float:
        got = self._diam_cache.get(c)
        if got is None:
            got = self._diam_cache[c] = self.diam(self.geom_of(c, tower))
        return got

    def cell_dist(self, a: LevelCell, b: LevelCell, tower: Tower) -> float:
        return self.dist(self.geom_of(a, tower), self.geom_of(b, tower))

    def mesh(self, tower: Tower, m: int) -> float:
        """Max chamber diameter at level m (every cell lies in a chamber)."""
        chambers = tower.chambers_at_level(m)
        geoms = [self.geom_of(X, tower) for X in chambers]
        return max(pmap(self.diam, geoms))

    # -- the forward map -------------------------------------------------------------

    def forward(self, p: Point) -> Point:
        """Evaluate the map geometrically, inverting a containing branch."""
        if not hasattr(self, "_branch_order"):
            self._branch_order = sorted(self.branches)
        for X in self._branch_order:
            br = self.branches[X]
            tgt = self.refined_boxes[X]
            if self._contains_point(tgt, p):
                aligned = self._align_point_into(p, tgt)
                coords = tuple(
                    (x - off) / s
                    for s, off, x in zip(br.scale, br.offset, aligned)
                )
                return self._canonical_point(coords, br.source.face)
        raise CellComplexError(f"point {p} is outside every chamber box")

    def _contains_point(self, g: Geometry, p: Point) -> bool:
        raise NotImplementedError

    def _align_point_into(self, p: Point, frame: Geometry) -> tuple[float, ...]:
        raise NotImplementedError

    def _contains_box(self, outer: Geometry, inner: Geometry) -> bool:
        raise NotImplementedError

    # -- carriers and snapping ----------------------------------------------------------

    def carrier_id(self, p: Point, which: str) -> str:
        """Cell (of D0 or D1) whose interior contains the point: the minimal
        cell among those whose closed box contains it."""
        boxes = self.base_boxes if which == "base" else self.refined_boxes
        cx = self.rule.base if which == "base" else self.rule.refined
        best: str | None = None
        for cid in sorted(boxes):
            if self._contains_point(boxes[cid], p):
                if best is None or cx.dim(cid) < cx.dim(best):
                    best = cid
        if best is None:
            raise CellComplexError(f"point {p} not covered by {which} boxes")
        return best

    def snap(self, p: Point, depth: int, tower: Tower) -> PointAddress:
        """Address of a point: carriers along the forward orbit, zipped up."""
        if depth == 0:
            return PointAddress(tower, 0, tower.cell0(self.carrier_id(p, "base")))
        orbit = [p]
        for _ in range(depth - 1):
            orbit.append(self.forward(orbit[-1]))
        row = [tower.cell1(self.carrier_id(q, "refined")) for q in orbit]
        while len(row) > 1:
            row = [tower.pair(row[j], row[j + 1]) for j in range(len(row) - 1)]
        return PointAddress(tower, depth, row[0])


class TorusRealization(Realization):
    """Flat torus (R / L Z)^n with exact box arithmetic."""

    model = "flat_torus"

    def __init__(self, rule, base_boxes, refined_boxes, branches, side: float = 2.0):
        self.L = float(side)
        super().__init__(rule, base_boxes, refined_boxes, branches)

    def _canonical(self, starts, lens, face) -> Geometry:
        return Geometry(tuple(s % self.L for s in starts), tuple(lens), None)

    def _align(self, g: Geometry, frame: Geometry) -> Geometry:
        starts = []
        for s, ln, fs, fl in zip(g.starts, g.lens, frame.starts, frame.lens):
            for k in range(-2, 3):
                cand = s + k * self.L
                if fs - TOL <= cand and cand + ln <= fs + fl + TOL:
                    starts.append(cand)
                    break
            else:
                raise CellComplexError("box does not fit into the branch frame")
        return Geometry(tuple(starts), g.lens, None)

    def _contains_point(self, g: Geometry, p: Point) -> bool:
        for x, s, ln in zip(p.coords, g.starts, g.lens):
            d = (x - s) % self.L
            if d > ln + TOL and d < self.L - TOL:
                return False
        return True

    def _align_point_into(self, p: Point, frame: Geometry):
        out = []
        for x, s, ln in zip(p.coords, frame.starts, frame.lens):
            d = (x - s) % self.L
            if d > ln + TOL:
                d = d - self.L
            out.append(s + d)
        return tuple(out)

    def _contains_box(self, outer: Geometry, inner: Geometry) -> bool:
        for s2, l2, s1, l1 in zip(inner.starts, inner.lens, outer.starts, outer.lens):
            d = (s2 - s1) % self.L
            if d + l2 > l1 + TOL:
                return False
        return True

    def diam(self, g: Geometry) -> float:
        return math.sqrt(sum(min(l, self.L - l) ** 2 for l in g.lens))

    def dist(self, a: Geometry, b: Geometry) -> float:
        return math.sqrt(
            sum(
                _circ_gap(s1 + l1 / 2, l1, s2 + l2 / 2, l2, self.L) ** 2
                for s1, l1, s2, l2 in zip(a.starts, a.lens, b.starts, b.lens)
            )
        )

    def dist_linf(self, a: Geometry, b: Geometry) -> float:
        return max(
            _circ_gap(s1 + l1 / 2, l1, s2 + l2 / 2, l2, self.L)
            for s1, l1, s2, l2 in zip(a.starts, a.lens, b.starts, b.lens)
        )

    def union_diam(self, gs: Sequence[Geometry]) -> float:
        best = 0.0
        for i, a in enumerate(gs):
            for b in gs[i:]:
                d = math.sqrt(
                    sum(
                        _circ_maxdist(s1 + l1 / 2, l1, s2 + l2 / 2, l2, self.L) ** 2
                        for s1, l1, s2, l2 in zip(a.starts, a.lens, b.starts, b.lens)
                    )
                )
                best = max(best, d)
        return best

    def point_distance(self, p: Point, q: Point) -> float:
        return math.sqrt(
            sum(
                min(abs(x - y) % self.L, self.L - abs(x - y) % self.L) ** 2
                for x, y in zip(p.coords, q.coords)
            )
        )

    def space_diameter(self) -> float:
        n = len(next(iter(self.base_boxes.values())).starts)
        return math.sqrt(n) * self.L / 2.0


class PillowRealization(Realization):
    """Two unit-square charts glued along their boundary, with a geodesic net.

    Chart coordinates live in [0, 1]^2 on faces 0 and 1; boundary points are
    canonicalised to face 0.  Distances and diameters are measured on an
    8-neighbour grid graph of spacing ``1/net_div``; box diameters are taken
    over box corners, which is exact for dyadic boxes aligned with the net.
    """

    model = "pillowcase"

    def __init__(self, rule, base_boxes, refined_boxes, branches, net_div: int = 32):
        self.side = 1.0
        self.net_div = int(net_div)
        self._graph = None
        self._node_index: dict[tuple[int, int, int], int] = {}
        self._node_xy: np.ndarray | None = None
        super().__init__(rule, base_boxes, refined_boxes, branches)

    # -- chart bookkeeping ------------------------------------------------------

    def _on_boundary_box(self, starts, lens) -> bool:
        return any(
            l <= TOL and (abs(s) <= TOL or abs(s - self.side) <= TOL)
            for s, l in zip(starts, lens)
        )

    def _canonical(self, starts, lens, face) -> Geometry:
        f = 0 if self._on_boundary_box(starts, lens) else face
        return Geometry(tuple(float(s) for s in starts), tuple(float(l) for l in lens), f)

    def _align(self, g: Geometry, frame: Geometry) -> Geometry:
        if g.face != frame.face and not self._on_boundary_box(g.starts, g.lens):
            raise CellComplexError("chart mismatch aligning pillowcase geometry")
        for s, ln, fs, fl in zip(g.starts, g.lens, frame.starts, frame.lens):
            if s < fs - TOL or s + ln > fs + fl + TOL:
                raise CellComplexError("box does not fit into the branch frame")
        return Geometry(g.starts, g.lens, frame.face)

    def _point_on_boundary(self, coords) -> bool:
        return any(abs(x) <= TOL or abs(x - self.side) <= TOL for x in coords)

    def _contains_point(self, g: Geometry, p: Point) -> bool:
        if p.face != g.face:
            if not (self._point_on_boundary(p.coords) or self._on_boundary_box(g.starts, g.lens)):
                return False
        return all(
            s - TOL <= x <= s + ln + TOL
            for x, s, ln in zip(p.coords, g.starts, g.lens)
        )

    def _align_point_into(self, p: Point, frame: Geometry):
        return p.coords

    def _contains_box(self, outer: Geometry, inner: Geometry) -> bool:
        if inner.face != outer.face:
            if not self._on_boundary_box(inner.starts, inner.lens):
                return False
        return all(
            os - TOL <= s and s + ln <= os + ol + TOL
            for s, ln, os, ol in zip(inner.starts, inner.lens, outer.starts, outer.lens)
        )

    # -- the net ------------------------------------------------------------------

    def _canon_node(self, face: int, i: int, j: int) -> tuple[int, int, int]:
        N = self.net_div
        if i in (0, N) or j in (0, N):
            return (0, i, j)
        return (face, i, j)

    def _build_net(self):
        from scipy.sparse import csr_matrix

        N = self.net_div
        h = self.side / N
        index: dict[tuple[int, int, int], int] = {}
        for face in (0, 1):
            for i in range(N + 1):
                for j in range(N + 1):
                    key = self._canon_node(face, i, j)
                    if key not in index:
                        index[key] = len(index)
        weights: dict[tuple[int, int], float] = {}
        steps = [(1, 0, h), (0, 1, h), (1, 1, h * math.sqrt(2)), (1, -1, h * math.sqrt(2))]
        for face in (0, 1):
            for i in range(N + 1):
                for j in range(N + 1):
                    a = index[self._canon_node(face, i, j)]
                    for di, dj, w in steps:
                        ii, jj = i + di, j + dj
                        if 0 <= ii <= N and 0 <= jj <= N:
                            b = index[self._canon_node(face, ii, jj)]
                            if a != b:
                                key = (min(a, b), max(a, b))
                                weights[key] = min(weights.get(key, w), w)
        n = len(index)
        rows, cols, vals = [], [], []
        for (a, b), w in weights.items():
            rows += [a, b]
            cols += [b, a]
            vals += [w, w]
        self._graph = csr_matrix((vals, (rows, cols)), shape=(n, n))
        self._node_index = index
        xy = np.zeros((n, 2))
        for (face, i, j), k in index.items():
            xy[k] = (i * h, j * h)
        self._node_xy = xy

    def _net(self):
        if self._graph is None:
            self._build_net()
        return self._graph

    def _box_nodes(self, g: Geometry) -> list[int]:
        N = self.net_div
        h = self.side / N
        i0 = max(0, math.ceil((g.starts[0] - TOL) / h))
        i1 = min(N, math.floor((g.starts[0] + g.lens[0] + TOL) / h))
        j0 = max(0, math.ceil((g.starts[1] - TOL) / h))
        j1 = min(N, math.floor((g.starts[1] + g.lens[1] + TOL) / h))
        face = g.face if g.face is not None else 0
        self._net()
        out = set()
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                out.add(self._node_index[self._canon_node(face, i, j)])
        if not out:
            raise CellComplexError(
                f"net spacing 1/{N} is too coarse to resolve box {g}"
            )
        return sorted(out)

    def _box_corner_nodes(self, g: Geometry) -> list[int]:
        N = self.net_div
        h = self.side / N
        face = g.face if g.face is not None else 0
        self._net()
        out = set()
        for pt in g.corners():
            i = round(pt[0] / h)
            j = round(pt[1] / h)
            if abs(i * h - pt[0]) > h / 2 or abs(j * h - pt[1]) > h / 2:
                continue
            i = min(max(i, 0), N)
            j = min(max(j, 0), N)
            out.add(self._node_index[self._canon_node(face, i, j)])
        return sorted(out) if out else self._box_nodes(g)[:1]

    def _dijkstra_min(self, sources: list[int]) -> np.ndarray:
        from scipy.sparse.csgraph import dijkstra

        return dijkstra(self._net(), indices=sources, min_only=True)

    def _lattice_dist(self, a: tuple[int, int, int], b: tuple[int, int, int]) -> float:
        """Net distance between nodes reachable within one face chart.

        Folding the back face onto the front is a net isometry fixing the
        boundary, so for nodes of one chart the geodesic stays in that chart
        and equals the 8-neighbour lattice distance.
        """
        h = self.side / self.net_div
        dx = abs(a[1] - b[1])
        dy = abs(a[2] - b[2])
        return h * (math.sqrt(2) * min(dx, dy) + abs(dx - dy))

    def diam(self, g: Geometry) -> float:
        """Max distance between box corners; exact for chart-aligned boxes
        (all corners of one box lie in a single chart)."""
        N = self.net_div
        h = self.side / N
        face = g.face if g.face is not None else 0
        corners = []
        for pt in g.corners():
            corners.append(self._canon_node(face, round(pt[0] / h), round(pt[1] / h)))
        best = 0.0
        for i, a in enumerate(corners):
            for b in corners[i + 1:]:
                best = max(best, self._lattice_dist(a, b))
        return best

    def dist(self, a: Geometry, b: Geometry) -> float:
        d = self._dijkstra_min(self._box_nodes(a))
        return float(d[self._box_nodes(b)].min())

    def distances_from(self, g: Geometry) -> np.ndarray:
        """Net distances from a box to every node (for batched queries)."""
        return self._dijkstra_min(self._box_nodes(g))

    def node_ids(self, g: Geometry) -> list[int]:
        return self._box_nodes(g)

    def union_diam(self, gs: Sequence[Geometry]) -> float:
        sources: set[int] = set()
        targets: set[int] = set()
        for g in gs:
            sources.update(self._box_corner_nodes(g))
            targets.update(self._box_nodes(g))
        tg = sorted(targets)
        best = 0.0
        for s in sorted(sources):
            d = self._dijkstra_min([s])
            best = max(best, float(d[tg].max()))
        return best

    def _nearest_node(self, p: Point) -> int:
        N = self.net_div
        h = self.side / N
        face = p.face if p.face is not None else 0
        i = min(max(round(p.coords[0] / h), 0), N)
        j = min(max(round(p.coords[1] / h), 0), N)
        self._net()
        return self._node_index[self._canon_node(face, i, j)]

    def point_distance(self, p: Point, q: Point) -> float:
        d = self._dijkstra_min([self._nearest_node(p)])
        return float(d[self._nearest_node(q)])

    def space_diameter(self) -> float:
        return math.sqrt(2.0) * self.side


# -- level-wide reports -------------------------------------------------------------


def expansion_check(
    tower: Tower,
    realization: Realization,
    max_m: int,
    flower_max: int | None = None,
) -> ExpansionReport:
    """Mesh decay of the chamber covers, with a flower-cover cross-check.

    The fitted rate is the geometric mean of consecutive mesh ratios; the
    sequence is flagged non-expanding unless every ratio is below 1.
    """
    meshes = [realization.mesh(tower, m) for m in range(max_m + 1)]
    ratios = [b / a for a, b in zip(meshes, meshes[1:])]
    expanding = bool(ratios) and all(r < 1.0 - TOL for r in ratios)
    rate = float(np.exp(np.mean(np.log(ratios)))) if expanding else None
    flower_meshes = []
    if flower_max is not None:
        for m in range(min(flower_max, max_m) + 1):
            worst = 0.0
            for v in tower.vertices_at_level(m):
                boxes = [
                    realization.geom_of(s, tower)
                    for s in tower.star(v)
                    if s.dim == tower.dim_top
                ]
                worst = max(worst, realization.union_diam(boxes))
            flower_meshes.append(worst)
    return ExpansionReport(meshes, ratios, rate, expanding, flower_meshes)


def lebesgue_number(
    tower: Tower,
    realization: Realization,
    m: int,
    samples_per_cell: int = 8,
) -> float:
    """Sampled Lebesgue number of the level-m flower cover (a lower bound).

    Torus: flowers are open hull boxes around vertices; the largest admissible
    ball radius at a sample point is its hull margin, evaluated on a grid of
    ``samples_per_cell`` points per chamber side.  Pillowcase: net nodes are
    the samples and the radius at a node is its net distance to the nearest
    node outside the flower.
    """
    verts = tower.vertices_at_level(m)
    if isinstance(realization, TorusRealization):
        L = realization.L
        positions = np.array([realization.geom_of(v, tower).starts for v in verts])
        hull_lo, hull_hi = [], []
        for v, pos in zip(verts, positions):
            boxes = [
                realization.geom_of(s, tower)
                for s in tower.star(v)
                if s.dim == tower.dim_top
            ]
            lo, hi = [], []
            for ax in range(len(pos)):
                los, his = [], []
                for g in boxes:
                    d = (g.starts[ax] - pos[ax]) % L
                    if d > L / 2:
                        d -= L
                    los.append(d)
                    his.append(d + g.lens[ax])
                lo.append(pos[ax] + min(los))
                hi.append(pos[ax] + max(his))
            hull_lo.append(lo)
            hull_hi.append(hi)
        hull_lo = np.array(hull_lo)
        hull_hi = np.array(hull_hi)
        n = positions.shape[1]
        side = float(min(realization.geom_of(X, tower).lens[0] for X in tower.chambers_at_level(m)))
        step = side / samples_per_cell
        axes = [np.arange(0.0, L, step) for _ in range(n)]
        mesh_pts = np.stack([g.ravel() for g in np.meshgrid(*axes)], axis=1)
        best = np.full(len(mesh_pts), -np.inf)
        for lo, hi, pos in zip(hull_lo, hull_hi, positions):
            rel = (mesh_pts - pos + L / 2) % L - L / 2
            margin = np.minimum((rel + pos - lo), (hi - (rel + pos)))
            # an axis whose hull wraps the whole circle never constrains
            full = (hi - lo) >= L - TOL
            margin[:, full] = L / 2
            best = np.maximum(best, margin.min(axis=1))
        return float(min(best.min(), realization.space_diameter() / 2))
    if isinstance(realization, PillowRealization):
        realization._net()
        n_nodes = realization._graph.shape[0]
        best = np.full(n_nodes, -np.inf)
        all_nodes = set(range(n_nodes))
        for v in verts:
            member: set[int] = set()
            for s in tower.star(v):
                member.update(realization.node_ids(realization.geom_of(s, tower)))
            outside = sorted(all_nodes - member)
            if not outside:
                return realization.space_diameter() / 2.0
            d = realization._dijkstra_min(outside)
            best = np.maximum(best, np.where(np.isin(np.arange(n_nodes), sorted(member)), d, -np.inf))
        return float(best[best > -np.inf].min())
    raise CellComplexError(f"no Lebesgue sampler for model {realization.model!r}")


class Marking:
    """Interior base points propagated through the inverse branches.

    ``point(c)`` realises the construction p_m(c) = (f^m|_c)^{-1} p_0(f^m c);
    compatibility f(p_m(c)) = p_{m-1}(f(c)) then holds mechanically and is
    re-measured by :meth:`verify`.
    """

    def __init__(self, realization: Realization, tower: Tower,
                 base_points: dict[str, Point] | None = None):
        self.realization = realization
        self.tower = tower
        if base_points is None:
            base_points = {}
            for cid, g in realization.base_boxes.items():
                coords = tuple(s + l / 2.0 for s, l in zip(g.starts, g.lens))
                base_points[cid] = Point(coords, g.face)
        for cid, p in base_points.items():
            g = realization.base_boxes[cid]
            for x, s, l in zip(p.coords, g.starts, g.lens):
                interior = (l <= TOL and abs(x - s) <= TOL) or (s + TOL < x < s + l - TOL)
                if not interior:
                    raise CellComplexError(f"base point for {cid!r} is not interior")
        self.base_points = base_points
        self._cache: dict[LevelCell, Point] = {}

    def point(self, c: LevelCell) -> Point:
        got = self._cache.get(c)
        if got is not None:
            return got
        t, r = self.tower, self.realization
        if c.level == 0:
            out = self.base_points[c.cid]
        else:
            anchor = r._anchor_chamber(c if c.level == 1 else t.minimal_parent(c), t)
            out = r.apply_branch_point(r.branches[anchor], self.point(t.image(c)))
        self._cache[c] = out
        return out

    def verify(self, max_m: int, tol: float = 1e-12) -> bool:
        t, r = self.tower, self.realization
        for m in range(1, max_m + 1):
            for c in t.cells_at_level(m):
                fwd = r.forward(self.point(c))
                ref = self.point(t.image(c))
                if max(
                    abs(a - b) for a, b in zip(fwd.coords, ref.coords)
                ) > tol or (fwd.face != ref.face and not r2_faces_ok(r, fwd, ref)):
                    return False
        return True


def r2_faces_ok(r: Realization, p: Point, q: Point) -> bool:
    if not isinstance(r, PillowRealization):
        return True
    return r._point_on_boundary(p.coords) and r._point_on_boundary(q.coords)


def check_realization(rule: SubdivisionRule, realization: Realization) -> ValidationReport:
    """Geometric consistency of the rule data against the stored boxes.

    Verifies box containment and minimality for the parent map, box-level
    agreement of each branch inverse with the image map on the whole closure
    of its chamber (the face correspondence is conjugated), and dimension
    agreement between boxes and cells.
    """
    problems: list[str] = []
    d0, d1 = rule.base, rule.refined
    for cid in d0.cells:
        if realization.base_boxes[cid].dim != d0.dim(cid):
            problems.append(f"box of {cid} has wrong dimension")
    for cid in d1.cells:
        if realization.refined_boxes[cid].dim != d1.dim(cid):
            problems.append(f"box of {cid} has wrong dimension")
        box = realization.refined_boxes[cid]
        parent = rule.parent[cid]
        if not realization._contains_box(realization.base_boxes[parent], box):
            problems.append(f"box of {cid} not inside box of its parent {parent}")
        candidates = [
            p for p in d0.cells
            if realization._contains_box(realization.base_boxes[p], box)
        ]
        if candidates:
            minimal = min(candidates, key=lambda p: (d0.dim(p), p))
            if minimal != parent:
                problems.append(
                    f"parent of {cid} is {parent} but the minimal containing box "
                    f"is {minimal}"
                )
    for X in d1.chambers:
        br = realization.branches[X]
        for r in d1.closure(X):
            img_box = realization.base_boxes[rule.image[r]]
            try:
                got = realization.apply_branch(br, img_box)
            except CellComplexError:
                problems.append(f"branch inverse of {X} cannot realize face {r}")
                continue
            want = realization.refined_boxes[r]
            if (
                max(abs(a - b) for a, b in zip(got.starts, want.starts)) > 1e-9
                or max(abs(a - b) for a, b in zip(got.lens, want.lens)) > 1e-9
            ):
                problems.append(
                    f"branch inverse of {X} maps image of {r} to {got}, expected {want}"
                )
    return ValidationReport(not problems, problems)


# -- serialization ----------------------------------------------------------------


def realization_to_json(r: Realization) -> dict:
    def box(g: Geometry) -> dict:
        out = {"start": list(g.starts), "len": list(g.lens)}
        if g.face is not None:
            out["face"] = g.face
        return out

    data: dict = {
        "model": r.model,
        "boxes": {
            "base": {cid: box(g) for cid, g in sorted(r.base_boxes.items())},
            "refined": {cid: box(g) for cid, g in sorted(r.refined_boxes.items())},
        },
        "branch_inverses": {
            cid: {
                "scale": list(br.scale),
                "offset": list(br.offset),
                "source": box(br.source),
                **({"target_face": br.target_face} if br.target_face is not None else {}),
            }
            for cid, br in sorted(r.branches.items())
        },
    }
    if isinstance(r, TorusRealization):
        data["side"] = r.L
        data["dim"] = len(next(iter(r.base_boxes.values())).starts)
    if isinstance(r, PillowRealization):
        data["side"] = r.side
        data["net_div"] = r.net_div
    return data


def realization_from_json(rule: SubdivisionRule, data: dict) -> Realization:
    def box(d: dict) -> Geometry:
        return Geometry(tuple(d["start"]), tuple(d["len"]), d.get("face"))

    try:
        model = data["model"]
        base = {cid: box(d) for cid, d in data["boxes"]["base"].items()}
        refined = {cid: box(d) for cid, d in data["boxes"]["refined"].items()}
        branches = {
            cid: AffineBranch(
                tuple(d["scale"]), tuple(d["offset"]), box(d["source"]),
                d.get("target_face"),
            )
            for cid, d in data["branch_inverses"].items()
        }
    except (KeyError, TypeError) as exc:
        raise CellComplexError(f"malformed realization JSON: {exc}") from exc
    if model == "flat_torus":
        return TorusRealization(rule, base, refined, branches, side=data.get("side", 2.0))
    if model == "pillowcase":
        return PillowRealization(rule, base, refined, branches, net_div=data.get("net_div", 32))
    raise CellComplexError(f"unsupported realization model {model!r}")


def mesh_table_csv(tower: Tower, realization: Realization, max_m: int) -> str:
    """CSV of per-level mesh and extremal chamber diameters."""
    lines = ["level,mesh,min_chamber_diam,n_chambers"]
    for m in range(max_m + 1):
        diams = [realization.cell_diam(X, tower) for X in tower.chambers_at_level(m)]
        lines.append(f"{m},{max(diams)!r},{min(diams)!r},{len(diams)}")
    return "\n".join(lines) + "\n"
