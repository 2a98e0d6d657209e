"""End-to-end run: generate -> measure -> select -> report.

Stages talk only through files under the output directory:

    manifest.json, families.json, embeddings.csv
    cells/*.vxc, clouds/*.pc3d
    kernels/{distance_hh,distance_eh,shape_hh,shape_eh,property}.kmat (+ .csv)
    selections/k<k>_w<w>.json
    reports/tradeoff.csv, reports/scores.csv
    summary.json  (sha256 of every artifact above)
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .dpp import greedy_select, joint_kernel, random_baseline, diversity_score
from .expr import load_catalog, starter_catalog_path
from .isogen import (extract_surface_points, geometric_properties, sample_family,
                     screen_family)
from .metrics import (family_distance_matrix, member_distances, property_distance,
                      rbf_kernel, reciprocal_kernel, synthetic_embeddings)
from .seeds import derive_seed

logger = logging.getLogger(__name__)

METRICS = ("H-H", "E-H")


class PipelineError(RuntimeError):
    def __init__(self, stage, item, cause):
        super().__init__(f"stage {stage!r} failed on {item!r}: {cause}")
        self.stage, self.item, self.cause = stage, item, cause


@contextmanager
def stage(name, item):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:  # noqa: BLE001 - rewrapped with context
        raise PipelineError(name, item, exc) from exc


@dataclass
class PipelineConfig:
    catalog: str = ""
    out: str = "run"
    resolution: int = 32
    screen_resolution: int | None = None
    samples: int = 4
    points: int = 4096
    metric: str = "H-H"
    weights: list = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    subset_sizes: list = field(default_factory=lambda: [10])
    seed: int = 0
    baseline_trials: int = 1000
    embedding_dim: int = 64

    def validate(self):
        if not self.catalog:
            self.catalog = str(starter_catalog_path(3))
        if not Path(self.catalog).is_file():
            raise FileNotFoundError(f"catalog not found: {self.catalog}")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not self.weights or any(not 0.0 <= w <= 1.0 for w in self.weights):
            raise ValueError(f"weights must lie in [0, 1]: {self.weights}")
        if not self.subset_sizes or any(int(k) < 1 for k in self.subset_sizes):
            raise ValueError(f"subset sizes must be >= 1: {self.subset_sizes}")
        if self.samples < 1 or self.points < 1:
            raise ValueError("samples and points must be positive")
        return self

    @classmethod
    def from_file(cls, path):
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        base = Path(path).parent
        for key in ("catalog", "out"):
            val = getattr(cfg, key)
            if val and not Path(val).is_absolute():
                setattr(cfg, key, str(base / val))
        return cfg


# --- stages ----------------------------------------------------------------------

def cloud_seed(master, solid):
    """Point-sampling seed keyed on the voxel content, so identical cells
    (e.g. from scalar-multiple families) get identical clouds."""
    digest = hashlib.sha256(np.packbits(np.asarray(solid, dtype=bool)).tobytes()).digest()
    return derive_seed(master, "points", int.from_bytes(digest[:4], "little"))


def build_dataset(catalog_path, out, samples, points, resolution, seed,
                  screen_resolution=None, embedding_dim=64):
    """Screen, sample and write cells, clouds and the manifest.

    Returns ``(manifest entries, family report)``.
    """
    out = Path(out)
    (out / "cells").mkdir(parents=True, exist_ok=True)
    (out / "clouds").mkdir(parents=True, exist_ok=True)
    with stage("isogen", str(catalog_path)):
        entries = load_catalog(catalog_path, dims=3)
    if not entries:
        raise PipelineError("isogen", str(catalog_path), "no families")
    report, entries_out, solids = [], [], []
    for entry in entries:
        with stage("isogen", entry.family_id):
            fam = screen_family(entry, screen_resolution or resolution)
            report.append({"family_id": entry.family_id, "form": entry.form.value,
                           "expr": str(entry.expr), "feasible_range": fam.feasible_range,
                           "retained": fam.retained})
            if not fam.retained:
                continue
            cells = sample_family(fam, samples, resolution)
        for j, cell in enumerate(cells):
            cid = f"{entry.family_id}-{j:03d}"
            with stage("isogen", cid):
                pts = extract_surface_points(cell, points, cloud_seed(seed, cell.solid))
                io.write_voxels(out / "cells" / f"{cid}.vxc", cell.solid)
                io.write_cloud(out / "clouds" / f"{cid}.pc3d", pts)
                entries_out.append({
                    "id": cid, "family_id": entry.family_id, "density": cell.density,
                    "cell_path": f"cells/{cid}.vxc", "cloud_path": f"clouds/{cid}.pc3d",
                    "properties": [float(v) for v in geometric_properties(cell)],
                    "embedding": None,
                })
                solids.append(cell.solid)
    if not entries_out:
        raise PipelineError("isogen", str(catalog_path), "no families retained after screening")
    with stage("embed", "dataset"):
        emb = synthetic_embeddings(solids, embedding_dim, seed=derive_seed(seed, "embed"))
        for e, v in zip(entries_out, emb):
            e["embedding"] = [float(x) for x in v]
        io.write_embeddings(out / "embeddings.csv", [e["id"] for e in entries_out], emb)
    io.write_manifest(out / "manifest.json", entries_out)
    (out / "families.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return entries_out, report


def load_member_data(manifest_path):
    """Clouds, embeddings, properties and family labels from a manifest."""
    entries = io.read_manifest(manifest_path)
    clouds, labels = [], []
    for e in entries:
        with stage("metrics", e["id"]):
            io.read_voxels(io.resolve(manifest_path, e["cell_path"]), expected_density=e["density"])
            clouds.append(io.read_cloud(io.resolve(manifest_path, e["cloud_path"])))
            labels.append(e["family_id"])
    emb = np.array([e["embedding"] for e in entries], dtype=float)
    props = np.array([e["properties"] for e in entries], dtype=float)
    return entries, clouds, emb, props, labels


def family_kernels(clouds, embeddings, properties, labels):
    """Family-level distances and kernels for both shape metrics and properties."""
    d_hh, order = family_distance_matrix(member_distances(clouds, "hausdorff"), labels)
    d_eh, _ = family_distance_matrix(member_distances(embeddings, "cosine"), labels)
    fam_props = np.array([properties[[lab == f for lab in labels]].mean(axis=0) for f in order])
    d_p = property_distance(fam_props)
    return order, {
        "distance_hh": (d_hh, "distance"),
        "distance_eh": (d_eh, "distance"),
        "shape_hh": (reciprocal_kernel(d_hh), "shape"),
        "shape_eh": (reciprocal_kernel(d_eh), "shape"),
        "property": (rbf_kernel(d_p), "property"),
    }


def score_report(selection, L_S, L_P, baselines, w=None):
    """Shape, property and joint scores of a selection with baseline ranks.

    ``baselines`` maps ``"shape"`` / ``"property"`` to ``BaselineScores``
    drawn at the selection's size.
    """
    idx = list(selection["indices"] if isinstance(selection, dict) else selection)
    w = selection.get("w") if w is None and isinstance(selection, dict) else w
    shape = diversity_score(L_S, idx)
    prop = diversity_score(L_P, idx)
    row = {"k": len(idx), "w": w, "score_shape": shape, "score_property": prop,
           "score_joint": None if w is None else diversity_score(joint_kernel(L_P, L_S, w), idx)}
    for name, value in (("shape", shape), ("property", prop)):
        if name in baselines:
            row[f"rank_{name}"] = baselines[name].rank_of(value)
            row[f"baseline_{name}_max"] = float(baselines[name].scores.max())
    return row


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else ("" if v is None else v)


def write_rows(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _fmt(v) for k, v in r.items()})


def select_and_report(out, order, kernels, cfg):
    out = Path(out)
    (out / "selections").mkdir(parents=True, exist_ok=True)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    LP = kernels["property"][0]
    shape_key = "shape_hh" if cfg.metric == "H-H" else "shape_eh"
    LS = kernels[shape_key][0]
    other_key = "shape_eh" if shape_key == "shape_hh" else "shape_hh"
    tradeoff, scores = [], []
    for k in cfg.subset_sizes:
        k = int(k)
        if k > len(order):
            raise PipelineError("select", f"k={k}", f"only {len(order)} families retained")
        bseed = derive_seed(cfg.seed, "baseline", k)
        baselines = {
            "shape": random_baseline(LS, k, cfg.baseline_trials, bseed),
            "property": random_baseline(LP, k, cfg.baseline_trials, bseed),
            "cross": random_baseline(kernels[other_key][0], k, cfg.baseline_trials, bseed),
        }
        for w in cfg.weights:
            with stage("select", f"k={k},w={w}"):
                res = greedy_select(joint_kernel(LP, LS, float(w)), k)
                res.w = float(w)
                res.score_shape = diversity_score(LS, res.indices)
                res.score_property = diversity_score(LP, res.indices)
                sel = res.to_dict()
                sel["seed"] = cfg.seed
                sel["metric"] = cfg.metric
                sel["families"] = [order[i] for i in res.indices]
                path = out / "selections" / f"k{k}_w{float(w):.2f}.json"
                path.write_text(json.dumps(sel, indent=2) + "\n", encoding="utf-8")
            tradeoff.append({"k": k, "w": float(w), "score_shape": res.score_shape,
                             "score_property": res.score_property, "score_joint": res.score})
            row = score_report(sel, LS, LP, baselines)
            cross = diversity_score(kernels[other_key][0], res.indices)
            row["score_cross"] = cross
            row["rank_cross"] = baselines["cross"].rank_of(cross)
            scores.append(row)
    write_rows(out / "reports" / "tradeoff.csv", tradeoff)
    write_rows(out / "reports" / "scores.csv", scores)
    return tradeoff, scores


def _artifact_hashes(out):
    out = Path(out)
    hashes = {}
    for path in sorted(out.rglob("*")):
        if path.is_file() and path.name != "summary.json":
            hashes[path.relative_to(out).as_posix()] = io.sha256_file(path)
    return hashes


def run_pipeline(config):
    """Run every stage and write ``summary.json``; returns the summary dict."""
    cfg = config.validate() if isinstance(config, PipelineConfig) else PipelineConfig(**config).validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    build_dataset(cfg.catalog, out, cfg.samples, cfg.points, cfg.resolution, cfg.seed,
                  cfg.screen_resolution, cfg.embedding_dim)
    _, clouds, emb, props, labels = load_member_data(out / "manifest.json")
    with stage("metrics", "family kernels"):
        order, kernels = family_kernels(clouds, emb, props, labels)
    (out / "kernels").mkdir(exist_ok=True)
    for name, (mat, kind) in kernels.items():
        io.write_kernel(out / "kernels" / f"{name}.kmat", mat, kind, csv_mirror=True)
    (out / "kernels" / "families.json").write_text(json.dumps(order, indent=2) + "\n", encoding="utf-8")
    select_and_report(out, order, kernels, cfg)
    config_echo = asdict(cfg)
    config_echo["catalog"] = io.sha256_file(cfg.catalog)  # content, not location
    config_echo.pop("out")
    summary = {"config": config_echo, "families": order, "artifacts": _artifact_hashes(out)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    return summary
