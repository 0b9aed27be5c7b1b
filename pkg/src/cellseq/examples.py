"""Built-in verified model systems and the rule file loader.

``torus_doubling(n)`` builds the coordinate-doubling map on the cubical
torus (R/2Z)^n: two unit cubes per axis at level 0, half-cubes at level 1,
and affine inverse branches of scale 1/2.  ``pillowcase()`` builds the
degree-4 folding map on the flat sphere made of two unit squares glued
along their boundary (the classical (2,2,2,2) orbifold picture), with
reflecting inverse branches of scale +-1/2 and an epsilon-net metric.
``identity_subdivision(n)`` is the degenerate rule D1 = D0 used to check
that diagnostics degrade gracefully.
"""

from __future__ import annotations

import itertools
import json
from pathlib import Path

from .cells import CellComplex, CellComplexError
from .realization import (
    AffineBranch,
    Geometry,
    PillowRealization,
    Realization,
    TorusRealization,
    realization_from_json,
    realization_to_json,
)
from .rules import SubdivisionRule, rule_from_json, rule_to_json


def _grid_tokens(k: int) -> list[tuple[int, int]]:
    """Per-axis (start, extent) tokens of the circular grid with k intervals."""
    return [(s, 0) for s in range(k)] + [(s, 1) for s in range(k)]


def _grid_id(tokens) -> str:
    return "g" + "_".join(f"{s}e{e}" for s, e in tokens)


def _grid_complex(n: int, k: int, side: float) -> tuple[CellComplex, dict[str, Geometry]]:
    """Cubical decomposition of the torus (R / side Z)^n with k cubes per axis."""
    unit = side / k
    dims: dict[str, int] = {}
    faces: dict[str, list[str]] = {}
    boxes: dict[str, Geometry] = {}
    for tokens in itertools.product(_grid_tokens(k), repeat=n):
        cid = _grid_id(tokens)
        dims[cid] = sum(e for _, e in tokens)
        imm = []
        for ax, (s, e) in enumerate(tokens):
            if e == 1:
                for s2 in (s, (s + 1) % k):
                    imm.append(_grid_id(tokens[:ax] + ((s2, 0),) + tokens[ax + 1:]))
        faces[cid] = imm
        boxes[cid] = Geometry(
            tuple(s * unit for s, _ in tokens), tuple(e * unit for _, e in tokens), None
        )
    return CellComplex(n, dims, faces), boxes


def torus_doubling(n: int) -> tuple[SubdivisionRule, Realization]:
    """Coordinate doubling on (R/2Z)^n; degree 2^n, no branch cells."""
    if n not in (2, 3):
        raise CellComplexError(f"torus_doubling supports n in {{2, 3}}, got {n}")
    side = 2.0
    d0, boxes0 = _grid_complex(n, 2, side)
    d1, boxes1 = _grid_complex(n, 4, side)

    image: dict[str, str] = {}
    parent: dict[str, str] = {}
    for tokens in itertools.product(_grid_tokens(4), repeat=n):
        cid = _grid_id(tokens)
        image[cid] = _grid_id(tuple((s % 2, e) for s, e in tokens))
        ptoks = []
        for s, e in tokens:
            if e == 1 or s % 2 == 1:
                ptoks.append((s // 2, 1))
            else:
                ptoks.append((s // 2, 0))
        parent[cid] = _grid_id(tuple(ptoks))
    rule = SubdivisionRule(d0, d1, parent, image)

    branches: dict[str, AffineBranch] = {}
    for X in d1.chambers:
        tgt = boxes1[X]
        src = boxes0[image[X]]
        scale = tuple(0.5 for _ in range(n))
        offset = tuple(t - 0.5 * s for t, s in zip(tgt.starts, src.starts))
        branches[X] = AffineBranch(scale, offset, src, None)
    return rule, TorusRealization(rule, boxes0, boxes1, branches, side=side)


def identity_subdivision(n: int = 2) -> tuple[SubdivisionRule, Realization]:
    """Degenerate rule D1 = D0 (a homeomorphism); degree 1, nothing expands."""
    side = 2.0
    d0, boxes0 = _grid_complex(n, 2, side)
    d1, boxes1 = _grid_complex(n, 2, side)
    ident = {c: c for c in d1.cells}
    rule = SubdivisionRule(d0, d1, dict(ident), dict(ident))
    branches = {
        X: AffineBranch(
            tuple(1.0 for _ in range(n)), tuple(0.0 for _ in range(n)), boxes0[X], None
        )
        for X in d1.chambers
    }
    return rule, TorusRealization(rule, boxes0, boxes1, branches, side=side)


# -- pillowcase ---------------------------------------------------------------


def _pillow_tokens(k: int):
    return [(s, 0) for s in range(k + 1)] + [(s, 1) for s in range(k)]


def _pillow_shared(tokens, k: int) -> bool:
    return any(e == 0 and s in (0, k) for s, e in tokens)


def _pillow_id(face: int, tokens, k: int) -> str:
    tag = "S" if _pillow_shared(tokens, k) else ("F", "B")[face]
    return tag + "|" + "_".join(f"{s}e{e}" for s, e in tokens)


def _pillow_complex(k: int) -> tuple[CellComplex, dict[str, Geometry]]:
    """Double of the unit square, subdivided into a k x k grid per face."""
    unit = 1.0 / k
    dims: dict[str, int] = {}
    faces: dict[str, list[str]] = {}
    boxes: dict[str, Geometry] = {}
    for face in (0, 1):
        for tokens in itertools.product(_pillow_tokens(k), repeat=2):
            cid = _pillow_id(face, tokens, k)
            if cid in dims:
                continue
            dims[cid] = sum(e for _, e in tokens)
            imm = []
            for ax, (s, e) in enumerate(tokens):
                if e == 1:
                    for s2 in (s, s + 1):
                        imm.append(
                            _pillow_id(face, tokens[:ax] + ((s2, 0),) + tokens[ax + 1:], k)
                        )
            faces[cid] = imm
            shared = _pillow_shared(tokens, k)
            boxes[cid] = Geometry(
                tuple(s * unit for s, _ in tokens),
                tuple(e * unit for _, e in tokens),
                0 if shared else face,
            )
    return CellComplex(2, dims, faces), boxes


def pillowcase(net_div: int = 32) -> tuple[SubdivisionRule, Realization]:
    """Degree-4 folding map on the doubled unit square (four cone points)."""
    d0, boxes0 = _pillow_complex(1)
    d1, boxes1 = _pillow_complex(2)

    image: dict[str, str] = {}
    parent: dict[str, str] = {}
    for face in (0, 1):
        for tokens in itertools.product(_pillow_tokens(2), repeat=2):
            cid = _pillow_id(face, tokens, 2)
            if cid in image:
                continue
            out = []
            flips = 0
            for s, e in tokens:
                if s + e <= 1:
                    out.append((s, e))
                else:
                    out.append((2 - s - e, e))
                    flips += 1
            f_in = 0 if _pillow_shared(tokens, 2) else face
            image[cid] = _pillow_id((f_in + flips) % 2, tuple(out), 1)
            ptoks = []
            for s, e in tokens:
                if e == 1 or s == 1:
                    ptoks.append((0, 1))
                else:
                    ptoks.append((s // 2, 0))
            parent[cid] = _pillow_id(face, tuple(ptoks), 1)
    rule = SubdivisionRule(d0, d1, parent, image)

    branches: dict[str, AffineBranch] = {}
    for face in (0, 1):
        for a in (0, 1):
            for b in (0, 1):
                tokens = ((a, 1), (b, 1))
                cid = _pillow_id(face, tokens, 2)
                src_face = (face + a + b) % 2
                src = Geometry((0.0, 0.0), (1.0, 1.0), src_face)
                scale = tuple(0.5 if t == 0 else -0.5 for t in (a, b))
                offset = tuple(0.0 if t == 0 else 1.0 for t in (a, b))
                branches[cid] = AffineBranch(scale, offset, src, face)
    return rule, PillowRealization(rule, boxes0, boxes1, branches, net_div=net_div)


# -- dispatch and files -------------------------------------------------------------

EXAMPLE_NAMES = ("torus2", "torus3", "pillow", "identity2")


def by_name(name: str) -> tuple[SubdivisionRule, Realization]:
    if name == "torus2":
        return torus_doubling(2)
    if name == "torus3":
        return torus_doubling(3)
    if name == "pillow":
        return pillowcase()
    if name == "identity2":
        return identity_subdivision(2)
    raise CellComplexError(f"unknown example {name!r}; choices: {EXAMPLE_NAMES}")


def dump_rule(rule: SubdivisionRule, realization: Realization | None, path) -> None:
    data = rule_to_json(rule)
    if realization is not None:
        data["realization"] = realization_to_json(realization)
    Path(path).write_text(json.dumps(data, sort_keys=True, indent=1))


def load_rule(path) -> tuple[SubdivisionRule, Realization | None]:
    """Load and parse a rule file; realization attached when present.

    Schema errors raise with the offending field; structural validity is the
    caller's business (run validate_rule / check_realization on the result).
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CellComplexError(f"not valid JSON: {exc}") from exc
    rule = rule_from_json(data)
    realization = None
    if "realization" in data:
        realization = realization_from_json(rule, data["realization"])
    return rule, realization
