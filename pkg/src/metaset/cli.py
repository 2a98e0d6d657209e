"""Command-line interface.

Exit codes: 0 success, 2 validation failure (bad input, format or
argument), 3 numerical failure (non-PSD kernel, singular system, no
feasible design).  ``METASET_THREADS`` caps worker threads.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .dpp import NotPSDError, diversity_score, greedy_select, joint_kernel, random_baseline, sweep
from .expr import ExprError, evaluate, find_scalar_duplicates, load_catalog, parse
from .isogen import IsovalueError
from .metrics import (descriptor_distance, family_distance_matrix, member_distances,
                      property_distance, rbf_kernel, reciprocal_kernel, cosine_kernel)
from .pipeline import PipelineConfig, PipelineError, build_dataset, run_pipeline, score_report
from .seeds import derive_seed

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

logger = logging.getLogger("metaset")


def _numerical_errors():
    from .mech.fem import SingularSystemError, SolverError
    from .mech.ga import NoFeasibleDesign
    from .mech.homogenize import HomogenizationError
    return (NotPSDError, IsovalueError, SingularSystemError, SolverError, NoFeasibleDesign,
            HomogenizationError, np.linalg.LinAlgError, FloatingPointError)


def thread_cap():
    return max(1, int(os.environ.get("METASET_THREADS", "1")))


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


# --- expr --------------------------------------------------------------------

def cmd_expr_eval(args):
    point = _floats(args.point)
    expr = parse(args.expr, dims=len(point))
    print(repr(evaluate(expr, point)))


def cmd_expr_dups(args):
    for a, b in find_scalar_duplicates(load_catalog(args.catalog, dims=args.dims)):
        print(f"{a}\t{b}")


# --- isogen ------------------------------------------------------------------

def cmd_isogen_build(args):
    entries, report = build_dataset(args.catalog, args.out, args.samples, args.points,
                                    args.res, args.seed, args.screen_res)
    kept = sum(r["retained"] for r in report)
    print(f"{kept}/{len(report)} families retained, {len(entries)} cells written to {args.out}")


# --- metrics -----------------------------------------------------------------

def cmd_metrics_kernel(args):
    manifest = Path(args.manifest)
    entries = io.read_manifest(manifest)
    labels = [e["family_id"] for e in entries]
    if args.space == "shape2d":
        cells = [io.load_cell2d(e, manifest) for e in entries]
        d = descriptor_distance(cells)
        kernel, kind = rbf_kernel, "shape"
    elif args.space == "hausdorff":
        clouds = []
        for e in entries:
            io.read_voxels(io.resolve(manifest, e["cell_path"]), expected_density=e["density"])
            clouds.append(io.read_cloud(io.resolve(manifest, e["cloud_path"])))
        d = member_distances(clouds, "hausdorff")
        kernel, kind = reciprocal_kernel, "shape"
    elif args.space == "embed":
        if any(e["embedding"] is None for e in entries):
            raise ValueError("manifest lacks embeddings")
        emb = np.array([e["embedding"] for e in entries], dtype=float)
        if args.by_family:
            d = member_distances(emb, "cosine")
            kernel, kind = reciprocal_kernel, "shape"
        else:
            d, kernel, kind = None, None, "shape"
            mat = cosine_kernel(emb)
    else:
        if any(e["properties"] is None for e in entries):
            raise ValueError("manifest lacks property vectors")
        props = np.array([e["properties"] for e in entries], dtype=float)
        if args.by_family:
            order = list(dict.fromkeys(labels))
            props = np.array([props[[lab == f for lab in labels]].mean(axis=0) for f in order])
            labels = order
        d = property_distance(props)
        kernel, kind = rbf_kernel, "property"
        args.by_family = False  # already aggregated
    if d is not None:
        if args.by_family:
            d, _ = family_distance_matrix(d, labels)
        mat = d if args.distance else kernel(d)
        if args.distance:
            kind = "distance"
    io.write_kernel(args.out, mat, kind, csv_mirror=args.csv)
    print(f"wrote {mat.shape[0]}x{mat.shape[0]} {kind} matrix to {args.out}")


# --- select ------------------------------------------------------------------

def _load_pair(args):
    LP, _ = io.read_kernel(args.lp)
    LS, _ = io.read_kernel(args.ls)
    return LP, LS


def cmd_select(args):
    LP, LS = _load_pair(args)
    if args.mode == "sweep":
        results = sweep(LP, LS, _floats(args.weights), args.k)
        rows = []
        for r in results:
            d = r.to_dict()
            d["seed"] = args.seed
            rows.append(d)
            print(f"w={r.w:.2f} shape={r.score_shape:.6g} property={r.score_property:.6g}")
        if args.out:
            Path(args.out).write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
        return
    res = greedy_select(joint_kernel(LP, LS, args.w), args.k)
    res.w = args.w
    res.score_shape = diversity_score(LS, res.indices)
    res.score_property = diversity_score(LP, res.indices)
    out = res.to_dict()
    out["seed"] = args.seed
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --- design ------------------------------------------------------------------

def _load_dataset2d(manifest):
    entries = io.read_manifest(manifest)
    cells = [io.load_cell2d(e, manifest) for e in entries]
    if any(c.properties is None or len(c.properties) != 4 for c in cells):
        raise ValueError("2D design needs (C11, C12, C22, C33) properties for every cell")
    return cells


def cmd_design_ga(args):
    from .mech.experiment import experiment_mbb, format_table, summarize, write_report
    from .mech.fem import load_problem
    from .mech.ga import GAConfig, NoFeasibleDesign

    problem = load_problem(args.problem)
    cells = _load_dataset2d(args.manifest)
    if args.subset:
        sel = json.loads(Path(args.subset).read_text(encoding="utf-8"))
        idx = [int(i) for i in sel["indices"]]
        if max(idx) >= len(cells):
            raise ValueError("selection indices exceed the manifest size")
    else:
        idx = list(range(len(cells)))
    cfg = GAConfig(population=args.population, generations=args.generations, threads=thread_cap())
    name = Path(args.subset).stem if args.subset else "all"
    rows = experiment_mbb(problem, cells, {name: idx}, runs=args.runs, seed=args.seed, config=cfg)
    if args.out:
        write_report(args.out, rows)
    print(format_table(summarize(rows)))
    if not any(r["n_dc"] == 0 for r in rows):
        raise NoFeasibleDesign("no run reached N_dc = 0; report lists the best penalized designs")
    return rows


def cmd_design_dataset(args):
    from .expr import starter_catalog_path
    from .mech.dataset import gen2d_dataset

    catalog = load_catalog(args.catalog or starter_catalog_path(2), dims=2)
    cells = gen2d_dataset(catalog, args.count, args.vf_min, args.res, args.seed)
    out = Path(args.out)
    (out / "cells").mkdir(parents=True, exist_ok=True)
    entries = []
    for c in cells:
        name = c.cell_id.replace(":", "_")
        io.write_pbm(out / "cells" / f"{name}.pbm", c.solid)
        entries.append({"id": c.cell_id, "family_id": c.cell_id.split(":", 1)[1],
                        "density": c.volume_fraction, "cell_path": f"cells/{name}.pbm",
                        "cloud_path": None, "properties": [float(v) for v in c.properties],
                        "embedding": None})
    io.write_manifest(out / "manifest.json", entries)
    print(f"wrote {len(entries)} cells to {out}")


def cmd_design_problem(args):
    from .mech.fem import mbb_problem, save_problem

    problem = mbb_problem(args.rows, args.cols, args.m, args.target, args.amplitude)
    save_problem(args.out, problem)
    print(f"wrote {args.out}")


# --- pipeline / report ---------------------------------------------------------

def cmd_pipeline(args):
    cfg = PipelineConfig.from_file(args.config)
    if args.out:
        cfg.out = args.out
    summary = run_pipeline(cfg)
    print(f"{len(summary['families'])} families, {len(summary['artifacts'])} artifacts in {cfg.out}")


def cmd_report(args):
    if args.design:
        import csv
        from .mech.experiment import format_table, summarize
        with open(args.design, newline="", encoding="utf-8") as fh:
            rows = [{"subset": r["subset"], "mse": float(r["mse"]), "r_dc": float(r["r_dc"]),
                     "n_dc": int(r["n_dc"])} for r in csv.DictReader(fh)]
        print(format_table(summarize(rows)))
        return
    LP, _ = io.read_kernel(args.lp)
    LS, _ = io.read_kernel(args.ls)
    sel = json.loads(Path(args.selection).read_text(encoding="utf-8"))
    k = len(sel["indices"])
    seed = derive_seed(args.seed, "baseline", k)
    baselines = {"shape": random_baseline(LS, k, args.trials, seed),
                 "property": random_baseline(LP, k, args.trials, seed)}
    row = score_report(sel, LS, LP, baselines)
    for key, val in row.items():
        print(f"{key:>20}  {val}")


# --- parser ------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="metaset", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("expr", help="level-set expressions").add_subparsers(dest="action", required=True)
    e = ex.add_parser("eval", help="evaluate an expression at one point")
    e.add_argument("--expr", required=True, help="expression in X, Y[, Z]")
    e.add_argument("--point", required=True, help="comma-separated cell coordinates in [0, 1)")
    e.set_defaults(func=cmd_expr_eval)
    e = ex.add_parser("dups", help="list scalar-multiple duplicate families in a catalog")
    e.add_argument("--catalog", required=True, help="catalog file")
    e.add_argument("--dims", type=int, default=None, help="2 or 3 (default: inferred)")
    e.set_defaults(func=cmd_expr_dups)

    iso = sub.add_parser("isogen", help="3D isosurface datasets").add_subparsers(dest="action", required=True)
    b = iso.add_parser("build", help="screen families, sample cells and clouds, write a manifest")
    b.add_argument("--catalog", required=True, help="3D catalog file")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--samples", type=int, default=100, help="cells per retained family")
    b.add_argument("--points", type=int, default=4096, help="surface points per cell")
    b.add_argument("--res", type=int, default=64, help="voxel resolution per axis")
    b.add_argument("--screen-res", type=int, default=None, help="resolution for feasibility screening (default: --res)")
    b.add_argument("--seed", type=int, default=0, help="master seed")
    b.set_defaults(func=cmd_isogen_build)

    met = sub.add_parser("metrics", help="distance and kernel matrices").add_subparsers(dest="action", required=True)
    k = met.add_parser("kernel", help="build a KMAT kernel from a manifest")
    k.add_argument("--manifest", required=True, help="dataset manifest")
    k.add_argument("--space", required=True, choices=["shape2d", "hausdorff", "embed", "property"],
                   help="similarity space")
    k.add_argument("--out", required=True, help="output .kmat path")
    k.add_argument("--by-family", action="store_true", help="aggregate members into family-level entries")
    k.add_argument("--distance", action="store_true", help="write the distance matrix instead of the kernel")
    k.add_argument("--csv", action="store_true", help="also write a CSV mirror")
    k.set_defaults(func=cmd_metrics_kernel)

    s = sub.add_parser("select", help="greedy diverse subset selection")
    s.add_argument("mode", nargs="?", choices=["run", "sweep"], default="run", help="single weight or sweep")
    s.add_argument("--lp", required=True, help="property kernel (.kmat)")
    s.add_argument("--ls", required=True, help="shape kernel (.kmat)")
    s.add_argument("--w", type=float, default=0.5, help="shape weight in [0, 1]")
    s.add_argument("--weights", default="0,0.25,0.5,0.75,1", help="comma-separated weights for sweep")
    s.add_argument("--k", type=int, required=True, help="subset size")
    s.add_argument("--seed", type=int, default=0, help="recorded in the output")
    s.add_argument("--out", default=None, help="selection JSON (stdout when omitted)")
    s.set_defaults(func=cmd_select)

    des = sub.add_parser("design", help="2D assembly design").add_subparsers(dest="action", required=True)
    g = des.add_parser("ga", help="GA assembly design over a cell subset")
    g.add_argument("--problem", required=True, help="problem JSON")
    g.add_argument("--manifest", required=True, help="2D dataset manifest")
    g.add_argument("--subset", default=None, help="selection JSON (default: whole dataset)")
    g.add_argument("--runs", type=int, default=10, help="independent seeded runs")
    g.add_argument("--seed", type=int, default=0, help="master seed")
    g.add_argument("--population", type=int, default=100, help="GA population size")
    g.add_argument("--generations", type=int, default=200, help="GA generations")
    g.add_argument("--out", default=None, help="report CSV")
    g.set_defaults(func=cmd_design_ga)
    d = des.add_parser("dataset", help="generate a synthetic 2D cell dataset")
    d.add_argument("--catalog", default=None, help="2D catalog (default: starter catalog)")
    d.add_argument("--out", required=True, help="output directory")
    d.add_argument("--count", type=int, default=200, help="number of cells")
    d.add_argument("--vf-min", type=float, default=0.70, help="minimum volume fraction")
    d.add_argument("--res", type=int, default=50, help="pixels per side")
    d.add_argument("--seed", type=int, default=0, help="seed")
    d.set_defaults(func=cmd_design_dataset)
    d = des.add_parser("problem", help="write an MBB half-beam problem file")
    d.add_argument("--out", required=True, help="problem JSON path")
    d.add_argument("--rows", type=int, default=4, help="macro rows")
    d.add_argument("--cols", type=int, default=4, help="macro columns")
    d.add_argument("--m", type=int, default=4, help="elements per cell side")
    d.add_argument("--target", default="wave", choices=["parabola", "sine", "wave"], help="target shape")
    d.add_argument("--amplitude", type=float, default=None, help="target amplitude (default: calibrated)")
    d.set_defaults(func=cmd_design_problem)

    pl = sub.add_parser("pipeline", help="run generate, measure, select and report")
    pl.add_argument("--config", required=True, help="pipeline config JSON")
    pl.add_argument("--out", default=None, help="override the output directory")
    pl.set_defaults(func=cmd_pipeline)

    r = sub.add_parser("report", help="score a selection or summarize a design report")
    r.add_argument("--selection", help="selection JSON")
    r.add_argument("--lp", help="property kernel (.kmat)")
    r.add_argument("--ls", help="shape kernel (.kmat)")
    r.add_argument("--trials", type=int, default=1000, help="random baseline subsets")
    r.add_argument("--seed", type=int, default=0, help="baseline seed")
    r.add_argument("--design", help="design report CSV to summarize instead")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report" and not args.design and not (args.selection and args.lp and args.ls):
        parser.error("report needs --design, or --selection with --lp and --ls")
    numerical = _numerical_errors()
    try:
        args.func(args)
    except numerical as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.cause, numerical) else EXIT_VALIDATION
    except (ValueError, ExprError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
