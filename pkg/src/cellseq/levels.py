"""The iterated pullback tower of a cellular Markov rule.

Cells of the level-m decomposition are encoded recursively: a level-m cell
(m >= 2) is the pair of its minimal parent and its image, both level-(m-1)
cells, subject to the compatibility constraint

    minimal_parent(image component) == image(parent component),

which characterises exactly the cells produced by pulling back the
level-(m-1) decomposition through the map.  Faces, closures, stars,
intersections, carriers and separation levels are all local recursions
over this encoding; levels are only materialised when an operation
genuinely enumerates them.

Cells are hash-consed: structural equality is object identity, and every
cell carries a deterministic sequence number used for ordering.  The
interning table is append-only, so queries are pure and safe to share.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .cells import CellComplexError
from .rules import SubdivisionRule


class ResourceCapExceeded(RuntimeError):
    """Raised when materialising a level would exceed the configured cap."""


class LevelCell:
    """One cell of some level-m decomposition (interned; compare by identity)."""

    __slots__ = ("level", "cid", "parent", "image", "dim", "seq")

    def __init__(self, level, cid, parent, image, dim, seq):
        self.level = level
        self.cid = cid          # underlying id, levels 0 and 1 only
        self.parent = parent    # minimal parent, a LevelCell at level-1 (None at level 0)
        self.image = image      # image cell, a LevelCell at level-1 (None at level 0)
        self.dim = dim
        self.seq = seq

    def __repr__(self) -> str:
        if self.level <= 1:
            return f"<L{self.level} {self.cid}>"
        return f"<L{self.level} dim{self.dim} #{self.seq}>"

    def key(self):
        """Structural key (nested); mainly for dumps and debugging."""
        if self.level <= 1:
            return self.cid
        return (self.parent.key(), self.image.key())


@dataclass(frozen=True)
class SeparationLevel:
    """Separation level of two point addresses; ``truncated`` means ">= depth"."""

    value: int
    truncated: bool


@dataclass(frozen=True)
class PointAddress:
    """A point known through its carrier cell at a fixed depth."""

    tower: "Tower"
    depth: int
    carrier: LevelCell

    def __post_init__(self):
        if self.carrier.level != self.depth:
            raise CellComplexError("carrier level does not match address depth")

    def carrier_at(self, level: int) -> LevelCell:
        """Carrier of the same point at a shallower level (iterated parent)."""
        if not 0 <= level <= self.depth:
            raise CellComplexError(f"level {level} outside [0, {self.depth}]")
        c = self.carrier
        for _ in range(self.depth - level):
            c = self.tower.minimal_parent(c)
        return c

    def chambers_at(self, level: int) -> tuple[LevelCell, ...]:
        """All level-``level`` chambers containing the point."""
        t = self.tower
        return tuple(s for s in t.star(self.carrier_at(level)) if s.dim == t.dim_top)

    def forward(self) -> "PointAddress":
        """Address of the image point, one level shallower."""
        if self.depth < 1:
            raise CellComplexError("cannot map a depth-0 address forward")
        return PointAddress(self.tower, self.depth - 1, self.tower.image(self.carrier))


@dataclass
class JoiningReport:
    """Exact joining numbers J(D_m, D_0) per level, with monotonicity flag."""

    values: dict[int, int | None]   # None means "> cap"
    cap: int
    monotone: bool
    lower_bounds: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "values": {str(k): v for k, v in sorted(self.values.items())},
            "cap": self.cap,
            "monotone": self.monotone,
            "lower_bounds": {str(k): v for k, v in sorted(self.lower_bounds.items())},
        }


@dataclass
class FlowerInvarianceReport:
    level: int
    vertices_checked: int
    image_identity_ok: bool
    pullback_partition_ok: bool
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.image_identity_ok and self.pullback_partition_ok

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "vertices_checked": self.vertices_checked,
            "image_identity_ok": self.image_identity_ok,
            "pullback_partition_ok": self.pullback_partition_ok,
            "failures": list(self.failures),
        }


@dataclass
class FfiReport:
    """Per-level suprema of vertex chamber counts.

    ``method[m]`` records how the supremum was obtained: "exact" when every
    level-m vertex was enumerated, otherwise "sampled+bound" (sampled lower
    value equal to a certified combinatorial upper bound) or "sampled".
    """

    sup_counts: dict[int, int]
    method: dict[int, str]
    bounded: bool

    def to_dict(self) -> dict:
        return {
            "sup_counts": {str(k): v for k, v in sorted(self.sup_counts.items())},
            "method": {str(k): v for k, v in sorted(self.method.items())},
            "bounded": self.bounded,
        }


@dataclass
class ReachabilityReport:
    level: int
    onto: bool
    fiber_counts_constant: bool
    expanding: bool
    cover_steps: int | None   # U^1-iterations until images cover the base chambers

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "onto": self.onto,
            "fiber_counts_constant": self.fiber_counts_constant,
            "expanding": self.expanding,
            "cover_steps": self.cover_steps,
        }


class Tower:
    """Lazy tower of level decompositions over a validated subdivision rule."""

    def __init__(self, rule: SubdivisionRule, cell_cap: int = 2_000_000):
        self.rule = rule
        self.dim_top = rule.base.dim_top
        self.cell_cap = cell_cap
        self._intern: dict = {}
        self._seq = 0
        self._levels: dict[int, list[LevelCell]] = {}
        self._chambers: dict[int, list[LevelCell]] = {}
        self._closure: dict[LevelCell, frozenset] = {}
        self._star: dict[LevelCell, frozenset] = {}
        self._level0 = {c: self._make(0, c, None, None, rule.base.dim(c)) for c in rule.base.cells}
        self._level1 = {
            c: self._make(1, c, None, None, rule.refined.dim(c)) for c in rule.refined.cells
        }

    # -- construction -------------------------------------------------------

    def _make(self, level, cid, parent, image, dim) -> LevelCell:
        cell = LevelCell(level, cid, parent, image, dim, self._seq)
        self._seq += 1
        return cell

    def cell0(self, cid: str) -> LevelCell:
        return self._level0[cid]

    def cell1(self, cid: str) -> LevelCell:
        return self._level1[cid]

    def pair(self, parent: LevelCell, image: LevelCell) -> LevelCell:
        """Intern the level-(m) cell with the given parent and image components."""
        if parent.level != image.level:
            raise CellComplexError("pair components must share a level")
        if parent.level < 1:
            raise CellComplexError("pairs start at level 2")
        if self.minimal_parent(image) is not self.image(parent):
            raise CellComplexError("invalid pair: parent/image compatibility fails")
        key = (parent, image)
        got = self._intern.get(key)
        if got is None:
            got = self._make(parent.level + 1, None, parent, image, image.dim)
            self._intern[key] = got
        return got

    # -- the two structure maps ----------------------------------------------

    def image(self, c: LevelCell) -> LevelCell:
        """The induced map to the next-lower level (undefined at level 0)."""
        if c.level == 0:
            raise CellComplexError("level-0 cells have no image")
        if c.level == 1:
            return self._level0[self.rule.image[c.cid]]
        return c.image

    def minimal_parent(self, c: LevelCell) -> LevelCell:
        """The unique next-lower cell whose interior contains the interior."""
        if c.level == 0:
            raise CellComplexError("level-0 cells have no parent")
        if c.level == 1:
            return self._level0[self.rule.parent[c.cid]]
        return c.parent

    def image_iter(self, c: LevelCell, k: int) -> LevelCell:
        for _ in range(k):
            c = self.image(c)
        return c

    def level0_ancestor(self, c: LevelCell) -> LevelCell:
        while c.level > 0:
            c = self.minimal_parent(c)
        return c

    def level1_ancestor(self, c: LevelCell) -> LevelCell:
        if c.level == 0:
            raise CellComplexError("level-0 cell has no level-1 ancestor")
        while c.level > 1:
            c = self.minimal_parent(c)
        return c

    # -- local poset queries ---------------------------------------------------

    def closure(self, c: LevelCell) -> frozenset:
        """Face-or-equal cells; componentwise on pairs."""
        got = self._closure.get(c)
        if got is not None:
            return got
        if c.level == 0:
            out = frozenset(self._level0[x] for x in self.rule.base.closure(c.cid))
        elif c.level == 1:
            out = frozenset(self._level1[x] for x in self.rule.refined.closure(c.cid))
        else:
            out = frozenset(
                self.pair(r, s)
                for r in self.closure(c.parent)
                for s in self.closure(c.image)
                if self.minimal_parent(s) is self.image(r)
            )
        self._closure[c] = out
        return out

    def star(self, c: LevelCell) -> frozenset:
        """Coface-or-equal cells (the flower's index set); componentwise on pairs."""
        got = self._star.get(c)
        if got is not None:
            return got
        if c.level == 0:
            out = frozenset(self._level0[x] for x in self.rule.base.star(c.cid))
        elif c.level == 1:
            out = frozenset(self._level1[x] for x in self.rule.refined.star(c.cid))
        else:
            out = frozenset(
                self.pair(r, s)
                for r in self.star(c.parent)
                for s in self.star(c.image)
                if self.minimal_parent(s) is self.image(r)
            )
        self._star[c] = out
        return out

    flower_at_level = star

    def faces(self, c: LevelCell) -> frozenset:
        return self.closure(c) - {c}

    def intersects(self, a: LevelCell, b: LevelCell) -> bool:
        """Same-level cells meet iff their closures share a cell."""
        if a.level != b.level:
            raise CellComplexError("intersection test needs cells of equal level")
        if a is b:
            return True
        ca, cb = self.closure(a), self.closure(b)
        if len(ca) > len(cb):
            ca, cb = cb, ca
        return any(z in cb for z in ca)

    def common_face_witness(self, a: LevelCell, b: LevelCell) -> LevelCell | None:
        """Some maximal common cell of the two closures, or None."""
        common = self.closure(a) & self.closure(b)
        if not common:
            return None
        return max(common, key=lambda z: (z.dim, -z.seq))

    # -- enumeration ------------------------------------------------------------

    def cells_at_level(self, m: int) -> list[LevelCell]:
        """All level-m cells, materialised once, in deterministic order."""
        if m in self._levels:
            return self._levels[m]
        if m == 0:
            out = [self._level0[c] for c in self.rule.base.cells]
        elif m == 1:
            out = [self._level1[c] for c in self.rule.refined.cells]
        else:
            prev = self.cells_at_level(m - 1)
            by_parent: dict[LevelCell, list[LevelCell]] = {}
            for q in prev:
                by_parent.setdefault(self.minimal_parent(q), []).append(q)
            est = 0
            out = []
            for p in prev:
                for q in by_parent.get(self.image(p), ()):
                    out.append(self.pair(p, q))
                    est += 1
                    if est > self.cell_cap:
                        raise ResourceCapExceeded(
                            f"level {m} exceeds cell cap {self.cell_cap}"
                        )
        self._levels[m] = out
        return out

    def chambers_at_level(self, m: int) -> list[LevelCell]:
        """Level-m chambers only; needs nothing beyond chambers at m-1."""
        if m in self._chambers:
            return self._chambers[m]
        if m in self._levels:
            out = [c for c in self._levels[m] if c.dim == self.dim_top]
        elif m <= 1:
            out = [c for c in self.cells_at_level(m) if c.dim == self.dim_top]
        else:
            prev = self.chambers_at_level(m - 1)
            by_parent: dict[LevelCell, list[LevelCell]] = {}
            for q in prev:
                by_parent.setdefault(self.minimal_parent(q), []).append(q)
            out = []
            n = 0
            for p in prev:
                for q in by_parent.get(self.image(p), ()):
                    out.append(self.pair(p, q))
                    n += 1
                    if n > self.cell_cap:
                        raise ResourceCapExceeded(
                            f"level {m} chambers exceed cell cap {self.cell_cap}"
                        )
        self._chambers[m] = out
        return out

    def vertices_at_level(self, m: int) -> list[LevelCell]:
        """Level-m vertex cells; needs all cells at level m-1, not level m."""
        if m <= 1:
            return [c for c in self.cells_at_level(m) if c.dim == 0]
        prev = self.cells_at_level(m - 1)
        verts_prev = [v for v in prev if v.dim == 0]
        by_image: dict[LevelCell, list[LevelCell]] = {}
        for p in prev:
            by_image.setdefault(self.image(p), []).append(p)
        out = []
        for v in verts_prev:
            for p in by_image.get(self.minimal_parent(v), ()):
                out.append(self.pair(p, v))
        return out

    def persist(self, v: LevelCell) -> LevelCell:
        """The cell one level deeper occupying the same vertex point.

        Vertices survive refinement: a level-m vertex is also a level-(m+1)
        cell, namely the pair (itself, persistence of its image).
        """
        if v.dim != 0:
            raise CellComplexError("persist is defined for vertex cells")
        if v.level == 0:
            matches = [
                c for c in self.rule.refined.vertices if self.rule.parent[c] == v.cid
            ]
            if len(matches) != 1:
                raise CellComplexError(f"vertex {v!r} has no unique level-1 copy")
            return self._level1[matches[0]]
        return self.pair(v, self.persist(self.image(v)))

    def persist_to(self, v: LevelCell, depth: int) -> LevelCell:
        while v.level < depth:
            v = self.persist(v)
        return v

    def vertex_addresses(self, depth: int, at_level: int | None = None) -> list[PointAddress]:
        """Addresses at ``depth`` for all vertices of level ``at_level`` (default: depth)."""
        lvl = depth if at_level is None else at_level
        if lvl > depth:
            raise CellComplexError("vertex level cannot exceed address depth")
        return [
            PointAddress(self, depth, self.persist_to(v, depth))
            for v in self.vertices_at_level(lvl)
        ]

    # -- separation level ----------------------------------------------------------

    def separation_level(self, x: PointAddress, y: PointAddress) -> SeparationLevel:
        """Deepest level at which chambers containing x and y still meet.

        Scans from the address depth downwards; the qualifying set of levels
        is downward closed, so the first hit is the supremum.  A hit at the
        full depth is reported as truncated ("the supremum is at least the
        depth"), since deeper levels were not inspected.
        """
        if x.tower is not self or y.tower is not self:
            raise CellComplexError("addresses belong to a different tower")
        if x.depth != y.depth:
            raise CellComplexError("separation level needs equal depths")
        for lvl in range(x.depth, -1, -1):
            cx = x.chambers_at(lvl)
            cy = y.chambers_at(lvl)
            if any(self.intersects(a, b) for a in cx for b in cy):
                return SeparationLevel(lvl, lvl == x.depth)
        return SeparationLevel(0, False)

    def separation_matrix(
        self, addresses: Sequence[PointAddress], dense_chamber_cap: int = 4096
    ) -> tuple[np.ndarray, np.ndarray]:
        """All-pairs separation levels for addresses of one depth.

        Returns ``(levels, truncated)`` where levels[i, j] is the separation
        level capped at the common depth and truncated[i, j] marks pairs
        whose chambers still meet at that depth.  Levels with few chambers
        are handled by one dense boolean pass; deeper levels only re-test
        the pairs still alive at the previous level (the hit relation is
        downward closed in the level).
        """
        if not addresses:
            raise CellComplexError("empty address list")
        depth = addresses[0].depth
        if any(a.depth != depth for a in addresses):
            raise CellComplexError("addresses must share one depth")
        n = len(addresses)
        levels = np.zeros((n, n), dtype=np.int16)
        hit = np.ones((n, n), dtype=bool)
        for lvl in range(1, depth + 1):
            chambers = self.chambers_at_level(lvl)
            nch = len(chambers)
            if nch <= dense_chamber_cap:
                index = {c: i for i, c in enumerate(chambers)}
                adj = np.zeros((nch, nch), dtype=bool)
                shared: dict[LevelCell, list[int]] = {}
                for c in chambers:
                    i = index[c]
                    for z in self.closure(c):
                        shared.setdefault(z, []).append(i)
                for group in shared.values():
                    g = np.asarray(group)
                    adj[np.ix_(g, g)] = True
                K = max(len(a.chambers_at(lvl)) for a in addresses)
                ch = np.zeros((n, K), dtype=np.int64)
                for i, a in enumerate(addresses):
                    row = sorted(index[c] for c in a.chambers_at(lvl))
                    ch[i] = (row + [row[0]] * (K - len(row)))[:K]
                new_hit = np.zeros((n, n), dtype=bool)
                for a in range(K):
                    rows = ch[:, a]
                    for b in range(K):
                        new_hit |= adj[rows[:, None], ch[:, b][None, :]]
                hit = new_hit
            else:
                pairs = np.argwhere(hit)
                chamber_sets = [a.chambers_at(lvl) for a in addresses]
                new_hit = np.zeros((n, n), dtype=bool)
                for i, j in pairs:
                    if new_hit[i, j]:
                        continue
                    if any(
                        self.intersects(X, Y)
                        for X in chamber_sets[i]
                        for Y in chamber_sets[j]
                    ):
                        new_hit[i, j] = True
                        new_hit[j, i] = True
                hit = new_hit
            levels[hit] = lvl
        return levels, hit.copy()

    # -- flower invariance ------------------------------------------------------------

    def check_flower_invariance(self, m: int) -> FlowerInvarianceReport:
        """Verify the two flower laws at level m.

        (a) for every level-m vertex p the image of its star equals the star
        of its image vertex; (b) the level-m flowers over a level-(m-1)
        vertex q are pairwise disjoint and their stars partition the cells
        mapping into the star of q (the combinatorial form of "components of
        the preimage of a flower are flowers").
        """
        if m < 1:
            raise CellComplexError("flower invariance starts at level 1")
        failures: list[str] = []
        verts = self.vertices_at_level(m)
        for p in verts:
            got = frozenset(self.image(s) for s in self.star(p))
            want = self.star(self.image(p))
            if got != want:
                failures.append(f"image(star) != star(image) at vertex #{p.seq} (level {m})")
        identity_ok = not failures

        part_failures: list[str] = []
        by_image: dict[LevelCell, list[LevelCell]] = {}
        for p in verts:
            by_image.setdefault(self.image(p), []).append(p)
        # cells mapping into the star of a level-(m-1) vertex q, collected in
        # one pass: image(c) lies in star(q) iff q is a vertex of closure(image(c))
        preimages: dict[LevelCell, set] = {q: set() for q in by_image}
        for c in self.cells_at_level(m):
            for q in self.closure(self.image(c)):
                if q.dim == 0 and q in preimages:
                    preimages[q].add(c)
        for q, ps in by_image.items():
            union: set = set()
            for p in ps:
                sp = self.star(p)
                if union & sp:
                    part_failures.append(
                        f"flowers over vertex #{q.seq} overlap at level {m}"
                    )
                union |= sp
            if union != preimages[q]:
                part_failures.append(
                    f"flowers over vertex #{q.seq} do not exhaust the preimage at level {m}"
                )
        failures += part_failures
        return FlowerInvarianceReport(
            level=m,
            vertices_checked=len(verts),
            image_identity_ok=identity_ok,
            pullback_partition_ok=not part_failures,
            failures=failures,
        )

    def check_refinement_partition(self, m: int) -> list[str]:
        """Verify that level-(m+1) cells tile their minimal parents.

        For every level-m cell p: the cells one level deeper with minimal
        parent p are nonempty with top dimension dim(p), interior walls
        bound exactly two top tiles of p, and walls lying in a facet of p
        bound exactly one.  Returns discrepancy strings (empty = pass).
        """
        problems: list[str] = []
        by_parent: dict[LevelCell, list[LevelCell]] = {}
        for c in self.cells_at_level(m + 1):
            by_parent.setdefault(self.minimal_parent(c), []).append(c)
        for p in self.cells_at_level(m):
            tiles = by_parent.get(p, [])
            if not tiles:
                problems.append(f"level {m} cell #{p.seq} has no tiles")
                continue
            dp = p.dim
            top = {c for c in tiles if c.dim == dp}
            if not top or max(c.dim for c in tiles) != dp:
                problems.append(f"tiling of cell #{p.seq} has wrong top dimension")
                continue
            if dp == 0:
                continue
            for w in tiles:
                if w.dim != dp - 1:
                    continue
                nbound = sum(1 for X in self.star(w) if X in top)
                if nbound != 2:
                    problems.append(
                        f"interior wall #{w.seq} of cell #{p.seq} bounds {nbound} tiles"
                    )
            for q in self.faces(p):
                if q.dim != dp - 1:
                    continue
                for w in by_parent.get(q, []):
                    if w.dim != dp - 1:
                        continue
                    nbound = sum(1 for X in self.star(w) if X in top)
                    if nbound != 1:
                        problems.append(
                            f"boundary wall #{w.seq} bounds {nbound} tiles of #{p.seq}"
                        )
        return problems

    # -- cellular neighborhoods ---------------------------------------------------------

    def neighborhoods_u1_u2(
        self, cells: Iterable[LevelCell]
    ) -> tuple[frozenset, frozenset]:
        """Chamber skeletons of the one- and two-step cellular neighborhoods."""
        group = list(cells)
        if not group:
            raise CellComplexError("neighborhood of an empty set")
        level = group[0].level
        if any(c.level != level for c in group):
            raise CellComplexError("neighborhood input must live at one level")
        u1 = self._chambers_meeting(group)
        u2 = self._chambers_meeting(u1)
        return frozenset(u1), frozenset(u2)

    def _chambers_meeting(self, group: Iterable[LevelCell]) -> set:
        out: set = set()
        for g in group:
            for z in self.closure(g):
                for s in self.star(z):
                    if s.dim == self.dim_top:
                        out.add(s)
        return out

    def check_u1_forward_invariance(self, m: int, k: int, seeds: int = 4) -> bool:
        """Spot-check f^k(U^1_{m+k}(X)) inside U^1_m(f^k X) on chamber seeds."""
        chambers = self.chambers_at_level(m + k)
        step = max(1, len(chambers) // max(seeds, 1))
        for X in chambers[::step][:seeds]:
            u1, _ = self.neighborhoods_u1_u2([X])
            target, _ = self.neighborhoods_u1_u2([self.image_iter(X, k)])
            if not {self.image_iter(Y, k) for Y in u1} <= set(target):
                return False
        return True

    # -- joining numbers -----------------------------------------------------------------

    def met_base_cells(self, c: LevelCell) -> frozenset[str]:
        """D0 cells whose point set meets the level cell ``c``."""
        anc = {self.level0_ancestor(z).cid for z in self.closure(c)}
        base = self.rule.base
        out: set[str] = set()
        for a in anc:
            out |= base.star(a)
        return frozenset(out)

    def joins_base(self, cells: Iterable[LevelCell]) -> bool:
        """Whether the union of level cells joins opposite sides of D0."""
        met: set[str] = set()
        for c in cells:
            met |= self.met_base_cells(c)
        if not met:
            return False
        base = self.rule.base
        witness: frozenset[str] | None = None
        for x in met:
            witness = base.closure(x) if witness is None else witness & base.closure(x)
            if not witness:
                return True
        return not witness

    def _kill_sets(self, m: int) -> tuple[list[LevelCell], list[int], dict[str, int]]:
        """Vertex-elimination bitmasks: which base vertices each cell rules out.

        A family joins opposite sides of D0 iff every base vertex is missing
        from the closure of some met D0 cell; the bitmask of a level cell
        records the base vertices it eliminates on its own.
        """
        base = self.rule.base
        vbit = {v: 1 << i for i, v in enumerate(base.vertices)}
        cells = self.cells_at_level(m)
        masks = []
        for c in cells:
            mask = 0
            for x in self.met_base_cells(c):
                cl = base.closure(x)
                for v, bit in vbit.items():
                    if v not in cl:
                        mask |= bit
            masks.append(mask)
        return cells, masks, vbit

    def joining_number(self, m: int, cap: int = 64) -> int | None:
        """Exact minimal size of a connected level-m family joining D0.

        Connected set cover over the base-vertex universe, solved by the
        Steiner-style mask DP: dp[mask][cell] is the least connected family
        containing ``cell`` that eliminates the vertex set ``mask``.  Exact
        for tree-shaped optima, not just chains.  Returns None when the
        minimum exceeds ``cap``.
        """
        cells, masks, vbit = self._kill_sets(m)
        full = (1 << len(vbit)) - 1
        if full == 0:
            return 1 if cells else None
        n = len(cells)
        index = {c: i for i, c in enumerate(cells)}
        adjacency: list[set[int]] = [set() for _ in range(n)]
        shared: dict[LevelCell, list[int]] = {}
        for c in cells:
            for z in self.closure(c):
                shared.setdefault(z, []).append(index[c])
        for group in shared.values():
            for i in group:
                adjacency[i].update(group)
        for i in range(n):
            adjacency[i].discard(i)

        INF = float("inf")
        dp: dict[int, list[float]] = {}
        heap: list[tuple[float, int, int]] = []

        def relax(mask: int, i: int, val: float) -> None:
            row = dp.setdefault(mask, [INF] * n)
            if val < row[i]:
                row[i] = val
                heapq.heappush(heap, (val, mask, i))

        for i in range(n):
            relax(masks[i], i, 1)
        best: float = INF
        while heap:
            val, mask, i = heapq.heappop(heap)
            if val > dp[mask][i]:
                continue
            if val >= best or val > cap:
                continue
            if mask == full:
                best = min(best, val)
                continue
            for j in adjacency[i]:
                relax(mask | masks[j], j, val + 1)
            for other_mask, row in list(dp.items()):
                if other_mask & ~mask == 0:
                    continue
                w = row[i]
                if w < INF and val + w - 1 <= cap:
                    relax(mask | other_mask, i, val + w - 1)
        if best is INF or best > cap:
            return None
        return int(best)

    def joining_report(
        self, max_m: int, cap: int = 64, mesh: Callable[[int], float] | None = None,
        lebesgue0: float | None = None,
    ) -> JoiningReport:
        values: dict[int, int | None] = {}
        lower: dict[int, float] = {}
        for m in range(max_m + 1):
            values[m] = self.joining_number(m, cap=cap)
            if mesh is not None and lebesgue0 is not None:
                lower[m] = lebesgue0 / mesh(m)
        known = [v for v in values.values() if v is not None]
        monotone = all(a <= b for a, b in zip(known, known[1:]))
        return JoiningReport(values, cap, monotone, lower)

    # -- finite forward index ---------------------------------------------------------------

    def vertex_chamber_count(self, v: LevelCell) -> int:
        if v.dim != 0:
            raise CellComplexError("chamber count is defined at vertices")
        return sum(1 for s in self.star(v) if s.dim == self.dim_top)

    def ffi_report(self, max_m: int, exact_cell_cap: int = 10_000) -> FfiReport:
        """Sup of vertex chamber counts per level, exact while affordable.

        Levels whose predecessor enumeration would exceed ``exact_cell_cap``
        are handled by persisting the deepest exactly-enumerated vertex set
        and evaluating stars locally; when the rule has an empty branch set
        the count is additionally certified by the combinatorial bound
        N(D_m, x) <= max_vertex N(D_0, .) (local multiplicities are all 1).
        """
        sup: dict[int, int] = {}
        method: dict[int, str] = {}
        base_bound = max(
            self.vertex_chamber_count(self._level0[v]) for v in self.rule.base.vertices
        )
        branch_empty = not self.rule.branch_cells().ids
        exact_limit = 0
        n_cells = len(self.rule.base.cells)
        deg = self.rule.degree()
        n1 = len(self.rule.refined.cells)
        while exact_limit < max_m:
            # vertices at level m+1 need cells at level m
            est = n_cells if exact_limit == 0 else n1 * deg ** (exact_limit - 1)
            if est > exact_cell_cap:
                break
            exact_limit += 1
        sample = None
        for m in range(max_m + 1):
            if m <= exact_limit:
                verts = self.vertices_at_level(m)
                sup[m] = max(self.vertex_chamber_count(v) for v in verts)
                method[m] = "exact"
            else:
                if sample is None:
                    sample = self.vertices_at_level(exact_limit)
                    step = max(1, len(sample) // 512)
                    sample = sample[::step]
                deep = [self.persist_to(v, m) for v in sample]
                observed = max(self.vertex_chamber_count(v) for v in deep)
                if branch_empty and observed == base_bound:
                    sup[m] = observed
                    method[m] = "sampled+bound"
                else:
                    sup[m] = observed
                    method[m] = "sampled"
        bounded = max(sup.values()) <= base_bound or branch_empty
        return FfiReport(sup, method, bounded)

    # -- topological exactness proxy -----------------------------------------------------------

    def image_reachability(self, m: int, seeds: int = 4) -> ReachabilityReport:
        """Check f_*^m is onto base chambers and measure a U^1 spreading time."""
        chambers = self.chambers_at_level(m)
        counts: dict[LevelCell, int] = {}
        for X in chambers:
            counts[self.image_iter(X, m)] = counts.get(self.image_iter(X, m), 0) + 1
        base_chambers = [c for c in self.cells_at_level(0) if c.dim == self.dim_top]
        onto = set(counts) == set(base_chambers)
        constant = len(set(counts.values())) <= 1
        expanding = self.rule.degree() > 1
        steps: int | None = None
        if expanding and chambers:
            step = max(1, len(chambers) // max(seeds, 1))
            worst = 0
            for X in chambers[::step][:seeds]:
                current = {X}
                k = 0
                while {self.image_iter(Y, m) for Y in current} != set(base_chambers):
                    u1, _ = self.neighborhoods_u1_u2(current)
                    if u1 == current:
                        k = -1
                        break
                    current = set(u1)
                    k += 1
                worst = max(worst, k)
            steps = worst if worst >= 0 else None
        return ReachabilityReport(m, onto, constant, expanding, steps)
