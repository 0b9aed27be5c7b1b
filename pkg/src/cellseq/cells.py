"""Finite cell complexes as face posets.

A complex stores, for every cell, its dimension and the full set of proper
faces (transitively closed).  All predicates used downstream -- carriers,
closures, stars/flowers, "joins opposite sides" -- are poset-level queries:
two cells intersect as point sets iff they share a common face or one is a
face of the other, so no point-set geometry is needed here.

Complexes are immutable after construction and all queries are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping


class CellComplexError(ValueError):
    """Raised for malformed complex data (unknown ids, cycles, bad input)."""


@dataclass
class ValidationReport:
    """Outcome of a structural validation; violations are data, not errors."""

    ok: bool
    problems: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return "pass"
        return "fail:\n" + "\n".join("  - " + p for p in self.problems)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "problems": list(self.problems)}


@dataclass(frozen=True)
class CommonFaces:
    """Maximal common cells of two closures, plus the intersection predicate."""

    cells: tuple[str, ...]
    intersects: bool


@dataclass(frozen=True)
class Graph:
    """Tiny deterministic adjacency structure (nodes sorted, neighbours sorted)."""

    nodes: tuple[str, ...]
    adj: Mapping[str, tuple[str, ...]]

    def edges(self) -> Iterator[tuple[str, str]]:
        for u in self.nodes:
            for v in self.adj[u]:
                if u < v:
                    yield (u, v)

    def to_dot(self, name: str = "cells") -> str:
        lines = [f"graph {name} {{"]
        for u in self.nodes:
            lines.append(f'  "{u}";')
        for u, v in self.edges():
            lines.append(f'  "{u}" -- "{v}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


class CellComplex:
    """A finite cell complex given by cell dimensions and face lists.

    ``faces`` may list immediate faces only; the constructor computes the
    transitive closure and rejects cyclic or dangling face data.  ``closed``
    records whether the complex claims to decompose a closed manifold, which
    enables the chamber-coverage and facet-pairing checks in validation.
    """

    def __init__(
        self,
        dim_top: int,
        dims: Mapping[str, int],
        faces: Mapping[str, Iterable[str]],
        closed: bool = True,
    ):
        if dim_top < 0:
            raise CellComplexError("dim_top must be nonnegative")
        self.dim_top = int(dim_top)
        self.closed = bool(closed)
        self._dim = {str(c): int(d) for c, d in dims.items()}
        self.cells: tuple[str, ...] = tuple(sorted(self._dim))
        for c, fs in faces.items():
            if c not in self._dim:
                raise CellComplexError(f"faces given for unknown cell {c!r}")
            for x in fs:
                if x not in self._dim:
                    raise CellComplexError(f"cell {c!r} lists unknown face {x!r}")
        self._faces = self._transitive_closure({c: set(faces.get(c, ())) for c in self.cells})
        self._star_cache: dict[str, frozenset[str]] | None = None

    def _transitive_closure(self, imm: dict[str, set[str]]) -> dict[str, frozenset[str]]:
        out: dict[str, frozenset[str]] = {}
        seen_on_path: set[str] = set()

        def close(c: str) -> frozenset[str]:
            if c in out:
                return out[c]
            if c in seen_on_path:
                raise CellComplexError(f"cyclic face relation at cell {c!r}")
            seen_on_path.add(c)
            acc: set[str] = set()
            for x in imm[c]:
                acc.add(x)
                acc |= close(x)
            seen_on_path.discard(c)
            if c in acc:
                raise CellComplexError(f"cyclic face relation at cell {c!r}")
            out[c] = frozenset(acc)
            return out[c]

        for c in imm:
            close(c)
        return out

    # -- basic queries ----------------------------------------------------

    def __contains__(self, c: str) -> bool:
        return c in self._dim

    def _check(self, c: str) -> None:
        if c not in self._dim:
            raise CellComplexError(f"unknown cell {c!r}")

    def dim(self, c: str) -> int:
        self._check(c)
        return self._dim[c]

    def faces_of(self, c: str) -> frozenset[str]:
        """All proper faces of ``c`` (transitively closed)."""
        self._check(c)
        return self._faces[c]

    def closure(self, c: str) -> frozenset[str]:
        """``{c}`` together with all its proper faces."""
        self._check(c)
        return self._faces[c] | {c}

    def star(self, c: str) -> frozenset[str]:
        """All cells having ``c`` in their closure (the flower's index set)."""
        self._check(c)
        if self._star_cache is None:
            inv: dict[str, set[str]] = {x: {x} for x in self.cells}
            for s in self.cells:
                for x in self._faces[s]:
                    inv[x].add(s)
            self._star_cache = {x: frozenset(v) for x, v in inv.items()}
        return self._star_cache[c]

    # The flower of a cell is the union of interiors of its cofaces; its
    # combinatorial skeleton is exactly the star.
    flower = star

    def skeleton(self, k: int) -> tuple[str, ...]:
        return tuple(c for c in self.cells if self._dim[c] == k)

    @property
    def vertices(self) -> tuple[str, ...]:
        return self.skeleton(0)

    @property
    def chambers(self) -> tuple[str, ...]:
        return self.skeleton(self.dim_top)

    @property
    def facets(self) -> tuple[str, ...]:
        return self.skeleton(self.dim_top - 1)

    def euler_characteristic(self) -> int:
        return sum((-1) ** self._dim[c] for c in self.cells)

    # -- intersection predicates ------------------------------------------

    def common_faces(self, a: str, b: str) -> CommonFaces:
        """Maximal cells contained in both closures.

        The two cells intersect as point sets iff the result is nonempty
        (a cell that is a face of the other contributes itself).
        """
        common = self.closure(a) & self.closure(b)
        maximal = [c for c in common if not any(c in self._faces[d] for d in common)]
        return CommonFaces(tuple(sorted(maximal)), bool(common))

    def intersects(self, a: str, b: str) -> bool:
        return bool(self.closure(a) & self.closure(b))

    def cells_meeting(self, ids: Iterable[str]) -> frozenset[str]:
        """All cells of the complex whose point set meets the union of ``ids``."""
        met: set[str] = set()
        for a in ids:
            for z in self.closure(a):
                met |= self.star(z)
        return frozenset(met)

    def joins_opposite_sides(self, ids: Iterable[str]) -> bool:
        """True iff the cells meeting the union have empty total intersection.

        The total intersection of a family of cells is nonempty exactly when
        some cell lies in every member's closure, so the test is a poset
        query.  The empty set never joins, by convention.
        """
        ids = list(ids)
        if not ids:
            return False
        met = self.cells_meeting(ids)
        witness: frozenset[str] | None = None
        for c in met:
            witness = self.closure(c) if witness is None else witness & self.closure(c)
            if not witness:
                return True
        return not witness

    def adjacency_graph(self, kind: str = "chambers") -> Graph:
        """Intersection graph on chambers (or on all cells)."""
        if kind == "chambers":
            nodes = self.chambers
        elif kind == "all":
            nodes = self.cells
        else:
            raise CellComplexError(f"unknown adjacency kind {kind!r}")
        nodeset = set(nodes)
        adj: dict[str, set[str]] = {u: set() for u in nodes}
        for z in self.cells:
            group = [s for s in self.star(z) if s in nodeset]
            for u in group:
                for v in group:
                    if u != v:
                        adj[u].add(v)
        return Graph(nodes, {u: tuple(sorted(vs)) for u, vs in adj.items()})

    # -- derived complexes -------------------------------------------------

    def restriction(self, ids: Iterable[str]) -> "CellComplex":
        """Sub-poset on a face-closed set, as a standalone complex.

        The result has ``dim_top`` equal to the top dimension present and is
        not marked as a closed-manifold decomposition (chamber coverage and
        facet pairing are relaxed in validation).
        """
        keep = set(ids)
        for c in keep:
            self._check(c)
        for c in keep:
            missing = self._faces[c] - keep
            if missing:
                raise CellComplexError(
                    f"restriction set is not face-closed: {c!r} needs {sorted(missing)}"
                )
        dim_top = max((self._dim[c] for c in keep), default=0)
        return CellComplex(
            dim_top,
            {c: self._dim[c] for c in keep},
            {c: self._faces[c] & keep for c in keep},
            closed=False,
        )

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "dim_top": self.dim_top,
            "cells": [
                {"id": c, "dim": self._dim[c], "faces": sorted(self._faces[c])}
                for c in self.cells
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "CellComplex":
        try:
            dim_top = data["dim_top"]
            entries = data["cells"]
        except (KeyError, TypeError) as exc:
            raise CellComplexError(f"malformed complex JSON: missing {exc}") from exc
        dims: dict[str, int] = {}
        faces: dict[str, list[str]] = {}
        for e in entries:
            if "id" not in e or "dim" not in e:
                raise CellComplexError(f"malformed cell entry {e!r}")
            cid = str(e["id"])
            if cid in dims:
                raise CellComplexError(f"duplicate cell id {cid!r}")
            dims[cid] = int(e["dim"])
            faces[cid] = [str(x) for x in e.get("faces", [])]
        cx = cls(int(dim_top), dims, faces)
        for c in cx.cells:
            for x in cx.faces_of(c):
                if cx.dim(x) >= cx.dim(c):
                    raise CellComplexError(
                        f"dimension violation: face {x!r} of {c!r} has dim "
                        f"{cx.dim(x)} >= {cx.dim(c)}"
                    )
        return cx

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1)


def validate_complex(cx: CellComplex, pseudo_manifold: bool = True) -> ValidationReport:
    """Check the face-poset axioms of a cell decomposition.

    Verified: strict order with monotone dimensions, gradedness (a face in
    every lower dimension), boundary facet pairing inside every cell, and --
    for complexes marked ``closed`` -- chamber coverage plus the global
    pseudo-manifold pairing (every facet bounds exactly two chambers, when
    ``pseudo_manifold`` is set).  Topological ball-ness of cells has no
    finite certificate and is not attempted.
    """
    problems: list[str] = []

    for c in cx.cells:
        for x in cx.faces_of(c):
            if cx.dim(x) >= cx.dim(c):
                problems.append(
                    f"dimension not monotone: {x} (dim {cx.dim(x)}) is a face of "
                    f"{c} (dim {cx.dim(c)})"
                )

    for c in cx.cells:
        d = cx.dim(c)
        have = {cx.dim(x) for x in cx.faces_of(c)}
        for k in range(d):
            if k not in have:
                problems.append(f"cell {c} (dim {d}) has no face of dimension {k}")

    for c in cx.cells:
        d = cx.dim(c)
        if d == 0:
            if cx.faces_of(c):
                problems.append(f"vertex {c} has proper faces")
            continue
        cls = cx.closure(c)
        walls = [x for x in cls if cx.dim(x) == d - 1]
        if d == 1:
            if len(walls) != 2:
                problems.append(f"edge {c} has {len(walls)} endpoints, expected 2")
            continue
        for r in [x for x in cls if cx.dim(x) == d - 2]:
            n = sum(1 for w in walls if r in cx.faces_of(w))
            if n != 2:
                problems.append(
                    f"boundary of {c} is not facet-paired: {r} bounds {n} of its "
                    f"(dim {d - 1})-faces, expected 2"
                )

    if cx.closed:
        chamber_set = set(cx.chambers)
        if not chamber_set:
            problems.append(f"no cell of top dimension {cx.dim_top}")
        for c in cx.cells:
            if c in chamber_set:
                continue
            if not any(c in cx.faces_of(X) for X in chamber_set):
                problems.append(f"cell {c} is not contained in any chamber")
        if pseudo_manifold:
            for fct in cx.facets:
                n = sum(1 for X in chamber_set if fct in cx.faces_of(X))
                if n != 2:
                    problems.append(
                        f"facet {fct} bounds {n} chambers, expected 2 "
                        f"(offending chambers adjacent to {fct})"
                    )

    return ValidationReport(not problems, problems)


@dataclass(frozen=True)
class CellSet:
    """A subset of cells of one complex."""

    complex: CellComplex
    ids: frozenset[str]

    def __post_init__(self):
        for c in self.ids:
            if c not in self.complex:
                raise CellComplexError(f"CellSet member {c!r} not in complex")

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.ids))

    def __len__(self) -> int:
        return len(self.ids)

    def face_closed(self) -> bool:
        return all(self.complex.faces_of(c) <= self.ids for c in self.ids)
