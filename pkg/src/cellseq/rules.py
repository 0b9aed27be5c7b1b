"""Cellular Markov subdivision data: a refinement D1 of D0 with a cellular map.

A :class:`SubdivisionRule` packages the two complexes together with the
``parent`` map (minimal D0-cell containing each D1-cell) and the ``image``
map (the induced cell map of the dynamics).  On top of it live the
combinatorial multiplicity counts, the branch subcomplex, the postcritical
cell set, and the degree, each computed from the displayed counting
formulas rather than from any point-set model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .cells import CellComplex, CellComplexError, CellSet, ValidationReport, validate_complex


class RuleDataError(ValueError):
    """Raised when rule data is structurally unusable (not a mere violation)."""


class SubdivisionRule:
    """(D0, D1, parent, image) with D1 refining D0 and the map cellular."""

    def __init__(
        self,
        base: CellComplex,
        refined: CellComplex,
        parent: dict[str, str],
        image: dict[str, str],
    ):
        self.base = base
        self.refined = refined
        self.parent = dict(parent)
        self.image = dict(image)
        for name, mapping in (("parent", self.parent), ("image", self.image)):
            for c, t in mapping.items():
                if c not in refined:
                    raise RuleDataError(f"{name} map given for unknown D1 cell {c!r}")
                if t not in base:
                    raise RuleDataError(f"{name}[{c!r}] = {t!r} is not a D0 cell")
        missing = [c for c in refined.cells if c not in self.parent or c not in self.image]
        if missing:
            raise RuleDataError(f"parent/image undefined for D1 cells {missing[:5]}")

    @cached_property
    def _multiplicity(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.refined.cells:
            tgt = self.image[c]
            best = 0
            for tau in self.base.star(tgt):
                n = sum(1 for s in self.refined.star(c) if self.image[s] == tau)
                best = max(best, n)
            out[c] = best
        return out

    def local_multiplicity(self, c: str) -> int:
        """Constant value of the local multiplicity on the cell interior.

        Counted per the combinatorial formula: the maximum, over D0-cells tau
        containing the image, of the number of D1-cells containing ``c`` that
        map onto tau.
        """
        if c not in self.refined:
            raise CellComplexError(f"unknown D1 cell {c!r}")
        return self._multiplicity[c]

    def degree(self) -> int:
        """Chambers over a target chamber; must not depend on the target."""
        counts: dict[str, int] = {Y: 0 for Y in self.base.chambers}
        for X in self.refined.chambers:
            Y = self.image[X]
            if Y not in counts:
                raise RuleDataError(f"chamber {X!r} maps to non-chamber {Y!r}")
            counts[Y] += 1
        values = sorted(set(counts.values()))
        if len(values) != 1:
            raise RuleDataError(f"fiber count not constant over target chambers: {counts}")
        return values[0]

    def branch_cells(self) -> CellSet:
        """D1 cells of multiplicity >= 2; always face-closed for valid data."""
        ids = frozenset(c for c in self.refined.cells if self._multiplicity[c] >= 2)
        for c in ids:
            stray = self.refined.faces_of(c) - ids
            if stray:
                raise RuleDataError(
                    f"branch set not face-closed: faces {sorted(stray)} of {c!r} "
                    "have multiplicity 1"
                )
        return CellSet(self.refined, ids)

    def image_set(self, d0_cell: str) -> frozenset[str]:
        """Forward image of a D0 cell, computed through its D1 subdivision."""
        if d0_cell not in self.base:
            raise CellComplexError(f"unknown D0 cell {d0_cell!r}")
        inside = self.base.closure(d0_cell)
        return frozenset(
            self.image[c] for c in self.refined.cells if self.parent[c] in inside
        )

    def vertex_chamber_count(self, v: str, level: int = 1) -> int:
        """Number of chambers whose closure contains the vertex ``v``."""
        cx = self.refined if level == 1 else self.base
        if cx.dim(v) != 0:
            raise CellComplexError(f"{v!r} is not a vertex")
        return sum(1 for s in cx.star(v) if cx.dim(s) == cx.dim_top)


@dataclass
class MultiplicityTable:
    """Per-cell multiplicities and vertex chamber counts, with the two-sided bound."""

    per_cell: dict[str, int]
    vertex_rows: list[tuple[str, int, int, int]]  # (vertex, i, N(D1,x), N(D0,f(x)))
    inequality_ok: bool

    def to_dict(self) -> dict:
        return {
            "per_cell": dict(sorted(self.per_cell.items())),
            "vertex_rows": [list(r) for r in self.vertex_rows],
            "inequality_ok": self.inequality_ok,
        }


def multiplicity_table(rule: SubdivisionRule) -> MultiplicityTable:
    rows = []
    ok = True
    for v in rule.refined.vertices:
        i = rule.local_multiplicity(v)
        n1 = rule.vertex_chamber_count(v, level=1)
        n0 = rule.vertex_chamber_count(rule.image[v], level=0)
        rows.append((v, i, n1, n0))
        if not (i <= n1 <= n0 * i):
            ok = False
    return MultiplicityTable({c: rule.local_multiplicity(c) for c in rule.refined.cells}, rows, ok)


@dataclass
class CPCFReport:
    """Branch/postcritical cell data extracted from a Markov rule.

    ``postcritical`` is the least set of D0 cells containing the images of
    the branch cells and closed under the set-valued forward map; it is the
    cell skeleton of the postcritical set.  ``restricted_postcritical`` is
    the same set viewed as a subcomplex of D0 (the finest choice; whether a
    strictly finer one is ever required is recorded as open).
    """

    branch: frozenset[str]
    postcritical: frozenset[str]
    forward_of_postcritical: frozenset[str]
    branch_multiplicities: dict[str, int]
    is_cpcf: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "branch": sorted(self.branch),
            "postcritical": sorted(self.postcritical),
            "forward_of_postcritical": sorted(self.forward_of_postcritical),
            "branch_multiplicities": dict(sorted(self.branch_multiplicities.items())),
            "is_cpcf": self.is_cpcf,
            "notes": list(self.notes),
        }


def cpcf_data(rule: SubdivisionRule) -> CPCFReport:
    """Postcritical cells as the forward closure of the branch images."""
    branch = rule.branch_cells().ids
    post: set[str] = set()
    frontier = {rule.image[c] for c in branch}
    while frontier:
        post |= frontier
        nxt: set[str] = set()
        for c in frontier:
            nxt |= rule.image_set(c)
        frontier = nxt - post
    forward: set[str] = set()
    for c in post:
        forward |= rule.image_set(c)
    notes = []
    invariant = forward <= post
    if not invariant:
        notes.append("postcritical set is not forward invariant (inconsistent data)")
    cellular = all(rule.image[c] in post for c in branch)
    if not cellular:
        notes.append("branch cells do not map into the postcritical subcomplex")
    notes.append(
        "restricted postcritical complex taken as the restriction of D0; "
        "no finer refinement was needed for any Markov rule inspected"
    )
    return CPCFReport(
        branch=frozenset(branch),
        postcritical=frozenset(post),
        forward_of_postcritical=frozenset(forward),
        branch_multiplicities={c: rule.local_multiplicity(c) for c in sorted(branch)},
        is_cpcf=invariant and cellular,
        notes=notes,
    )


def validate_rule(rule: SubdivisionRule) -> ValidationReport:
    """Check the subdivision-rule invariants on top of the two complexes.

    Beyond individual complex validity: the image map preserves dimension
    and the face relation and restricts to a poset isomorphism on every
    closure; the parent map is dimension-nondecreasing and face-compatible;
    and the cells sharing a parent tile that parent (nonempty, correct top
    dimension, interior walls shared by two tiles, boundary walls by one).
    """
    problems: list[str] = []
    d0, d1 = rule.base, rule.refined

    for tag, cx in (("D0", d0), ("D1", d1)):
        rep = validate_complex(cx)
        problems += [f"{tag}: {p}" for p in rep.problems]
    if problems:
        return ValidationReport(False, problems)

    for c in d1.cells:
        if d1.dim(c) != d0.dim(rule.image[c]):
            problems.append(
                f"image breaks dimension: {c} (dim {d1.dim(c)}) -> "
                f"{rule.image[c]} (dim {d0.dim(rule.image[c])})"
            )
        for r in d1.faces_of(c):
            if rule.image[r] not in d0.faces_of(rule.image[c]):
                problems.append(
                    f"image breaks the face relation: {r} < {c} but "
                    f"{rule.image[r]} is not a proper face of {rule.image[c]}"
                )

    for c in d1.cells:
        cls = d1.closure(c)
        imgs = [rule.image[r] for r in cls]
        target = d0.closure(rule.image[c])
        if len(set(imgs)) != len(imgs) or set(imgs) != target:
            problems.append(
                f"image is not a closure bijection at {c}: closure maps onto "
                f"{sorted(set(imgs))}, expected {sorted(target)}"
            )

    for c in d1.cells:
        p = rule.parent[c]
        if d0.dim(p) < d1.dim(c):
            problems.append(
                f"parent dimension too small: {c} (dim {d1.dim(c)}) has parent "
                f"{p} (dim {d0.dim(p)})"
            )
        pcl = d0.closure(p)
        for r in d1.faces_of(c):
            if rule.parent[r] not in pcl:
                problems.append(
                    f"parent incompatible with faces: face {r} of {c} has parent "
                    f"{rule.parent[r]} outside closure({p})"
                )

    by_parent: dict[str, list[str]] = {p: [] for p in d0.cells}
    for c in d1.cells:
        by_parent[rule.parent[c]].append(c)
    for p in d0.cells:
        tiles = by_parent[p]
        if not tiles:
            problems.append(f"no D1 cell has parent {p}")
            continue
        dp = d0.dim(p)
        top = [c for c in tiles if d1.dim(c) == dp]
        if max(d1.dim(c) for c in tiles) != dp or not top:
            problems.append(f"subdivision of {p} has wrong top dimension")
            continue
        if dp == 0:
            continue
        # interior walls of the tiling of p: (dp-1)-cells with parent p
        walls = [c for c in tiles if d1.dim(c) == dp - 1]
        topset = set(top)
        for w in walls:
            n = sum(1 for X in d1.star(w) if X in topset)
            if n != 2:
                problems.append(
                    f"interior wall {w} of the subdivision of {p} bounds {n} tiles, "
                    "expected 2"
                )
        boundary_parents = d0.faces_of(p)
        for q in boundary_parents:
            if d0.dim(q) != dp - 1:
                continue
            for w in by_parent[q]:
                if d1.dim(w) != dp - 1:
                    continue
                n = sum(1 for X in d1.star(w) if X in topset)
                if n != 1:
                    problems.append(
                        f"boundary wall {w} (parent {q}) bounds {n} tiles of {p}, "
                        "expected 1"
                    )

    return ValidationReport(not problems, problems)


def rule_to_json(rule: SubdivisionRule) -> dict:
    return {
        "base": rule.base.to_json(),
        "refined": rule.refined.to_json(),
        "parent": dict(sorted(rule.parent.items())),
        "image": dict(sorted(rule.image.items())),
    }


def rule_from_json(data: dict) -> SubdivisionRule:
    for key in ("base", "refined", "parent", "image"):
        if key not in data:
            raise CellComplexError(f"rule JSON missing field {key!r}")
    base = CellComplex.from_json(data["base"])
    refined = CellComplex.from_json(data["refined"])
    return SubdivisionRule(
        base,
        refined,
        {str(k): str(v) for k, v in data["parent"].items()},
        {str(k): str(v) for k, v in data["image"].items()},
    )
