"""Command-line surface: validate | iterate | visual | diagnose | example | export.

All reports are emitted as JSON with sorted keys; CSV and DOT go to files.
Runs are deterministic: there is no randomness anywhere in the pipeline, the
seed flag is recorded in the output for reproducibility bookkeeping only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import examples as ex
from .cells import CellComplexError, validate_complex
from .levels import Tower
from .realization import check_realization, expansion_check, mesh_table_csv
from .rules import cpcf_data, multiplicity_table, validate_rule
from .visual import VisualMetricConfig, cell_metric_report, chain_metric


def _load(spec: str):
    if spec in ex.EXAMPLE_NAMES:
        return ex.by_name(spec)
    return ex.load_rule(spec)


def _emit(data: dict, out: str | None) -> None:
    text = json.dumps(data, sort_keys=True, indent=1, default=float)
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _cmd_validate(args) -> int:
    rule, realization = _load(args.rule)
    reports = {
        "base_complex": validate_complex(rule.base).to_dict(),
        "refined_complex": validate_complex(rule.refined).to_dict(),
        "rule": validate_rule(rule).to_dict(),
    }
    if realization is not None:
        reports["realization"] = check_realization(rule, realization).to_dict()
    ok = all(r["ok"] for r in reports.values())
    _emit({"ok": ok, "reports": reports, "seed": args.seed}, args.out)
    return 0 if ok else 1


def _cmd_iterate(args) -> int:
    rule, realization = _load(args.rule)
    tower = Tower(rule)
    if args.emit == "counts":
        counts = {m: len(tower.chambers_at_level(m)) for m in range(args.level + 1)}
        _emit(
            {
                "chamber_counts": {str(m): c for m, c in counts.items()},
                "degree": rule.degree(),
                "seed": args.seed,
            },
            args.out,
        )
        return 0
    if args.emit == "cells":
        cells = tower.cells_at_level(args.level)
        _emit(
            {
                "level": args.level,
                "cells": [
                    {"seq": c.seq, "dim": c.dim, "key": _key_json(c)} for c in cells
                ],
                "seed": args.seed,
            },
            args.out,
        )
        return 0
    if args.emit == "adjacency":
        chambers = tower.chambers_at_level(args.level)
        lines = [f"graph level{args.level} {{"]
        for c in chambers:
            lines.append(f'  "{c.seq}";')
        for i, a in enumerate(chambers):
            for b in chambers[i + 1:]:
                if tower.intersects(a, b):
                    lines.append(f'  "{a.seq}" -- "{b.seq}";')
        lines.append("}")
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    raise CellComplexError(f"unknown emit kind {args.emit!r}")


def _key_json(c):
    k = c.key()
    def conv(x):
        if isinstance(x, tuple):
            return [conv(y) for y in x]
        return x
    return conv(k)


def _parse_sample(spec: str, depth: int) -> int:
    """'vertices' or 'vertices:LEVEL' -> vertex level of the sample grid."""
    if spec == "vertices":
        return min(3, depth)
    if spec.startswith("vertices:"):
        level = int(spec.split(":", 1)[1])
        if not 0 <= level <= depth:
            raise CellComplexError(f"sample level {level} outside [0, {depth}]")
        return level
    raise CellComplexError(f"unknown sample spec {spec!r}")


def _cmd_visual(args) -> int:
    rule, realization = _load(args.rule)
    tower = Tower(rule)
    sample_level = _parse_sample(args.sample, args.depth)
    sample = tuple(tower.vertex_addresses(args.depth, at_level=sample_level))
    config = VisualMetricConfig(args.lam, args.eps, args.depth, sample)
    report = chain_metric(tower, config)
    out = report.to_dict()
    out["sample_level"] = sample_level
    out["seed"] = args.seed
    if args.cell_levels:
        out["cell_metric"] = cell_metric_report(tower, report, args.cell_levels).to_dict()
    if args.csv:
        rows = ["i,j,q,rho"]
        n = len(sample)
        for i in range(n):
            for j in range(i + 1, n):
                rows.append(f"{i},{j},{report.q[i, j]!r},{report.rho[i, j]!r}")
        Path(args.csv).write_text("\n".join(rows) + "\n")
    _emit(out, args.out)
    return 0


def _cmd_diagnose(args) -> int:
    from . import diagnostics as dg
    from .realization import Marking

    rule, realization = _load(args.rule)
    if realization is None:
        raise CellComplexError("diagnostics need a realization")
    tower = Tower(rule)
    out: dict = {"suite": args.suite, "seed": args.seed}
    scatter: list[str] = []
    if args.suite == "qv":
        qv = dg.qv_constants(tower, realization, args.max_level, args.max_level)
        out["qv"] = qv.to_dict()
        scatter = ["k,alpha,beta"] + [
            f"{k},{qv.alpha[k]!r},{qv.beta[k]!r}" for k in sorted(qv.alpha)
        ]
    elif args.suite == "bqs":
        marking = Marking(realization, tower)
        env = dg.bqs_envelope(tower, realization, marking, range(1, args.max_level + 1))
        out["bqs"] = env.to_dict()
        scatter = ["level,t,r"] + [
            f"{m},{t!r},{r!r}"
            for m, samples in sorted(env.samples_by_level.items())
            for t, r in samples
        ]
    elif args.suite == "cxc":
        rep = dg.cxc_report(tower, realization, args.max_level)
        out["cxc"] = rep.to_dict()
        scatter = ["level,flower_mesh"] + [
            f"{m},{v!r}" for m, v in enumerate(rep.mesh_decay)
        ]
    elif args.suite == "qs":
        sample_level = min(2, args.max_level)
        depth = args.max_level + 1
        sample = tuple(tower.vertex_addresses(depth, at_level=sample_level))
        config = VisualMetricConfig(2.0, 1.0, depth, sample)
        report = chain_metric(tower, config)
        import numpy as np

        from .realization import Point

        pts = []
        for a in sample:
            g = realization.geom_of(a.carrier_at(a.depth), tower)
            pts.append(Point(g.starts, g.face))
        flat = np.array(
            [[realization.point_distance(p, q) for q in pts] for p in pts]
        )
        table = dg.qs_identity_modulus(report.rho, flat)
        out["qs_modulus"] = [list(p) for p in table]
        scatter = ["t,theta"] + [f"{t!r},{v!r}" for t, v in table]
    else:
        raise CellComplexError(f"unknown suite {args.suite!r}")
    if args.csv:
        Path(args.csv).write_text("\n".join(scatter) + "\n")
    _emit(out, args.out)
    return 0


def _cmd_example(args) -> int:
    rule, realization = ex.by_name(args.name)
    if args.dump:
        ex.dump_rule(rule, realization, args.dump)
    _emit(
        {
            "name": args.name,
            "degree": rule.degree(),
            "d0_cells": len(rule.base.cells),
            "d1_cells": len(rule.refined.cells),
            "euler_characteristic_d1": rule.refined.euler_characteristic(),
            "dumped_to": args.dump,
            "seed": args.seed,
        },
        args.out,
    )
    return 0


def _cmd_export(args) -> int:
    rule, realization = _load(args.rule)
    tower = Tower(rule)
    if args.what == "mesh":
        if realization is None:
            raise CellComplexError("mesh export needs a realization")
        text = mesh_table_csv(tower, realization, args.level)
    elif args.what == "adjacency":
        text = rule.base.adjacency_graph("chambers").to_dot("base_chambers")
    elif args.what == "expansion":
        if realization is None:
            raise CellComplexError("expansion export needs a realization")
        rep = expansion_check(tower, realization, args.level, flower_max=min(3, args.level))
        text = json.dumps(rep.to_dict(), sort_keys=True, indent=1) + "\n"
    elif args.what == "cpcf":
        text = json.dumps(cpcf_data(rule).to_dict(), sort_keys=True, indent=1) + "\n"
    elif args.what == "multiplicity":
        text = json.dumps(multiplicity_table(rule).to_dict(), sort_keys=True, indent=1) + "\n"
    else:
        raise CellComplexError(f"unknown export kind {args.what!r}")
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cellseq")
    p.add_argument("--seed", type=int, default=0, help="recorded in reports; no randomness is used")
    p.add_argument(
        "--jobs",
        type=int,
        default=int(os.environ.get("CELLSEQ_JOBS", "1")),
        help="worker bound for batch computations (results are order-independent)",
    )
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("validate", help="validate a rule file or built-in example")
    q.add_argument("rule")
    q.add_argument("--out")
    q.set_defaults(fn=_cmd_validate)

    q = sub.add_parser("iterate", help="enumerate the pullback tower")
    q.add_argument("rule")
    q.add_argument("--level", type=int, required=True)
    q.add_argument("--emit", choices=("counts", "cells", "adjacency"), default="counts")
    q.add_argument("--out")
    q.set_defaults(fn=_cmd_iterate)

    q = sub.add_parser("visual", help="visual metric report")
    q.add_argument("rule")
    q.add_argument("--lambda", dest="lam", type=float, default=2.0)
    q.add_argument("--eps", type=float, default=1.0)
    q.add_argument("--depth", type=int, default=6)
    q.add_argument("--sample", default="vertices",
                   help="sample grid: 'vertices' or 'vertices:LEVEL'")
    q.add_argument("--cell-levels", type=int, default=0)
    q.add_argument("--csv")
    q.add_argument("--out")
    q.set_defaults(fn=_cmd_visual)

    q = sub.add_parser("diagnose", help="distortion diagnostics")
    q.add_argument("rule")
    q.add_argument("--suite", choices=("qv", "bqs", "cxc", "qs"), required=True)
    q.add_argument("--max-level", type=int, default=4)
    q.add_argument("--csv", help="write suite scatter data as CSV")
    q.add_argument("--out")
    q.set_defaults(fn=_cmd_diagnose)

    q = sub.add_parser("example", help="emit a built-in example")
    q.add_argument("name", choices=ex.EXAMPLE_NAMES)
    q.add_argument("--dump")
    q.add_argument("--out")
    q.set_defaults(fn=_cmd_example)

    q = sub.add_parser("export", help="export tables and graphs")
    q.add_argument("rule")
    q.add_argument("--what", choices=("mesh", "adjacency", "expansion", "cpcf", "multiplicity"), required=True)
    q.add_argument("--level", type=int, default=4)
    q.add_argument("--out")
    q.set_defaults(fn=_cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    from .parallel import set_jobs

    set_jobs(args.jobs)
    try:
        return args.fn(args)
    except (CellComplexError, ValueError, OSError) as exc:
        sys.stderr.write(f"cellseq: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
