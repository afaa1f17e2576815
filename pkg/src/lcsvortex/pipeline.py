"""Five-stage vortex census: orchestration, checkpoints and reporting.

Stages: flow map -> Cauchy-Green tensor -> singularity location/selection ->
classification/pairing -> closed-orbit sweep. Each stage writes its artifact
before the next starts, so a failed run resumes from the last checkpoint.
All artifacts are deterministic: rerunning with the same configuration
reproduces them byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import cauchy_green, flowmap, lambda_lines, topology, velocity
from .config import PipelineConfig, canonical_text
from .errors import ConfigError, StageError
from .grid import Axis, read_grid
from .validation import check_velocity_field

STAGES = ("flowmap", "cauchy-green", "singularities", "classification", "integration")


@dataclass
class StageReport:
    """Wall-clock durations and object counts per pipeline stage."""

    durations: dict = dc_field(default_factory=dict)
    counts: dict = dc_field(default_factory=dict)

    def record(self, stage: str, seconds: float, **counts):
        self.durations[stage] = seconds
        self.counts.update(counts)

    def funnel(self) -> list:
        order = ("singularities_found", "singularities_kept", "wedges",
                 "wedges_paired", "pairs", "eddies")
        return [self.counts[k] for k in order if k in self.counts]

    def to_text(self) -> str:
        lines = ["stage             seconds   objects",
                 "-----             -------   -------"]
        labels = {
            "flowmap": "",
            "cauchy-green": "",
            "singularities": "{singularities_found} found, {singularities_kept} kept",
            "classification": "{wedges} wedges, {trisectors} trisectors, "
                              "{wedges_paired} paired, {pairs} pairs",
            "integration": "{eddies} eddies",
        }
        for stage in STAGES:
            if stage not in self.durations:
                continue
            try:
                desc = labels[stage].format(**self.counts)
            except KeyError:
                desc = ""
            lines.append(f"{stage:<17} {self.durations[stage]:7.2f}   {desc}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({"durations": self.durations, "counts": self.counts},
                          sort_keys=True, indent=2) + "\n"


def build_velocity_field(cfg: PipelineConfig):
    if cfg.velocity == "double_gyre":
        params = velocity.DoubleGyreParams(cfg.double_gyre_a, cfg.double_gyre_epsilon,
                                           cfg.double_gyre_omega)
        return velocity.DoubleGyreField(params)
    if cfg.velocity == "multi_vortex":
        return velocity.default_multi_vortex()
    return load_gridded_field(cfg.gridded_header)


def load_gridded_field(header_path) -> velocity.GriddedVelocityField:
    axes, arrays, _ = read_grid(header_path)
    names = {n.lower(): n for n in axes}
    x = axes[names.get("x", names.get("lon", ""))] if ("x" in names or "lon" in names) else None
    y = axes[names.get("y", names.get("lat", ""))] if ("y" in names or "lat" in names) else None
    if x is None or y is None:
        raise ConfigError(f"{header_path}: gridded velocity needs x/lon and y/lat axes")
    t = None
    for cand in ("t", "time"):
        if cand in names:
            t = axes[names[cand]]
    if "u" not in arrays or "v" not in arrays:
        raise ConfigError(f"{header_path}: gridded velocity needs arrays 'u' and 'v'")
    x = Axis("x", x.start, x.step, x.size, x.units)
    y = Axis("y", y.start, y.step, y.size, y.units)
    if t is not None:
        t = Axis("t", t.start, t.step, t.size, t.units)
    return velocity.GriddedVelocityField(x, y, t, arrays["u"][1], arrays["v"][1])


def integrator_config(cfg: PipelineConfig) -> flowmap.IntegratorConfig:
    return flowmap.IntegratorConfig(method=cfg.integrator, abs_tol=cfg.abs_tol,
                                    rel_tol=cfg.rel_tol, step=cfg.rk4_step)


# ---------------------------------------------------------------------------
# in-memory stage functions


def stage_flowmap(field_obj, cfg: PipelineConfig) -> flowmap.FlowMapGrid:
    return flowmap.compute_flow_map_grid(
        field_obj, cfg.domain, cfg.resolution, rho=cfg.rho, cfg=integrator_config(cfg),
        t0=cfg.t0, T=cfg.T, threads=cfg.threads)


def stage_cauchy_green(fm: flowmap.FlowMapGrid):
    return cauchy_green.build_tensor_field(fm)


def stage_singularities(tf, cfg: PipelineConfig):
    located = topology.locate_singularities(tf)
    delta = min(tf.x_axis.step, tf.y_axis.step)
    kept = topology.select_isolated(located, delta, cfg.min_separation_factor)
    return located, kept


def stage_classification(tf, kept, cfg: PipelineConfig):
    delta = min(tf.x_axis.step, tf.y_axis.step)
    topology.classify_all(tf, kept, delta)
    wedges = [s for s in kept if s.kind is topology.SingularityType.WEDGE]
    trisectors = [s for s in kept if s.kind is topology.SingularityType.TRISECTOR]
    pairs = topology.pair_wedges(wedges, trisectors, cfg.max_pair_distance)
    return wedges, trisectors, pairs


def stage_integration(tf, ef, pairs, singularities, cfg: PipelineConfig,
                      field_obj=None):
    bounds = ((tf.x_axis.start, tf.x_axis.stop), (tf.y_axis.start, tf.y_axis.stop))
    verify = None
    if field_obj is not None:
        verify = lambda_lines.stretch_verifier(field_obj, cfg.t0, cfg.T,
                                               integrator_config(cfg),
                                               cfg.stretch_tolerance)
    sections = []
    boundaries = []
    for pair in pairs:
        section = lambda_lines.build_section(pair, cfg.section_length,
                                             cfg.section_seeds, bounds=bounds)
        sections.append(section)
        vb = lambda_lines.sweep_lambda(
            tf, ef, pair, section, singularities,
            lam_min=cfg.lambda_min, lam_max=cfg.lambda_max, lam_step=cfg.lambda_step,
            signs=cfg.sign_tuple, step=cfg.orbit_step, max_arclength=cfg.max_arclength,
            verify=verify)
        boundaries.append(vb)
    return sections, boundaries


# ---------------------------------------------------------------------------
# artifact serialization


def _fmt(x) -> str:
    return repr(float(x))


def write_singularities_csv(path, located, kept):
    kept_ids = {id(s) for s in kept}
    rows = sorted(located, key=lambda s: (s.x, s.y))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "type", "nn_distance", "kept"])
        for s in rows:
            w.writerow([_fmt(s.x), _fmt(s.y), s.kind.value,
                        _fmt(s.nn_distance) if math.isfinite(s.nn_distance) else "inf",
                        1 if id(s) in kept_ids else 0])


def read_singularities_csv(path):
    located, kept = [], []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            s = topology.Singularity(float(row["x"]), float(row["y"]),
                                     topology.SingularityType(row["type"]),
                                     float(row["nn_distance"]))
            located.append(s)
            if row["kept"] == "1":
                kept.append(s)
    return located, kept


def write_pairs_csv(path, pairs):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "y1", "x2", "y2", "mid_x", "mid_y", "separation"])
        for p in pairs:
            mid = p.midpoint
            w.writerow([_fmt(p.first.x), _fmt(p.first.y), _fmt(p.second.x),
                        _fmt(p.second.y), _fmt(mid[0]), _fmt(mid[1]), _fmt(p.separation)])


def read_pairs_csv(path, kept):
    """Rebuild wedge pairs against the kept singularity list (by position)."""
    def find(x, y):
        for s in kept:
            if abs(s.x - x) < 1e-12 and abs(s.y - y) < 1e-12:
                return s
        raise StageError("integration", f"pair member ({x}, {y}) not in singularity list")

    pairs = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            pairs.append(topology.WedgePair(find(float(row["x1"]), float(row["y1"])),
                                            find(float(row["x2"]), float(row["y2"]))))
    return pairs


def write_sections_csv(path, sections):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair_index", "anchor_x", "anchor_y", "length", "n_seeds"])
        for i, s in enumerate(sections):
            w.writerow([i, _fmt(s.anchor[0]), _fmt(s.anchor[1]), _fmt(s.length),
                        len(s.seeds)])


def write_boundaries(geojson_path, csv_path, boundaries):
    features = []
    with Path(csv_path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pair_index", "vertex", "x", "y"])
        for i, vb in enumerate(boundaries):
            if vb is None:
                continue
            verts = vb.polygon.vertices
            ring = [[float(x), float(y)] for x, y in verts]
            ring.append(ring[0])
            features.append({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "pair_index": i,
                    "lambda": vb.lam,
                    "sign": vb.sign,
                    "wedges_enclosed": vb.census[0],
                    "trisectors_enclosed": vb.census[1],
                    "seed_offset": vb.seed_offset,
                    "area": vb.polygon.area,
                },
            })
            for k, (x, y) in enumerate(verts):
                w.writerow([i, k, _fmt(x), _fmt(y)])
    payload = {"type": "FeatureCollection", "features": features}
    Path(geojson_path).write_text(json.dumps(payload, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# orchestrator


class _Runner:
    def __init__(self, cfg: PipelineConfig, report: StageReport):
        self.cfg = cfg
        self.report = report

    def run(self, stage: str, fn, **counts_fn):
        start = time.perf_counter()
        try:
            result = fn()
        except Exception as err:
            raise StageError(stage, err) from err
        seconds = time.perf_counter() - start
        counts = {k: f(result) for k, f in counts_fn.items()}
        self.report.record(stage, seconds, **counts)
        return result


def run_census(cfg: PipelineConfig, resume: bool = False, log=print) -> StageReport:
    """Execute the full pipeline, writing artifacts and a stage report.

    With ``resume=True``, existing checkpoints (matching the configuration
    fingerprint) short-circuit the stages that produced them; downstream
    artifacts are recomputed and come out byte-identical.
    """
    out = Path(cfg.output_dir)
    ckpt = cfg.checkpoint_path
    out.mkdir(parents=True, exist_ok=True)
    ckpt.mkdir(parents=True, exist_ok=True)

    fingerprint = canonical_text(cfg)
    fp_file = ckpt / "config.fingerprint"
    if resume and fp_file.exists() and fp_file.read_text() != fingerprint:
        raise ConfigError("checkpoint fingerprint does not match this configuration; "
                          "refusing to resume")
    fp_file.write_text(fingerprint)

    report = StageReport()
    runner = _Runner(cfg, report)
    fm_path = ckpt / "flowmap.grid"
    cg_path = ckpt / "cauchy_green.grid"

    field_obj = check_velocity_field(build_velocity_field(cfg))
    tf = ef = None
    if resume and cg_path.exists():
        log(f"resuming from {cg_path}")
        tf, ef = cauchy_green.load_tensor_field(cg_path)
        report.record("flowmap", 0.0)
        report.record("cauchy-green", 0.0)
    else:
        if resume and fm_path.exists():
            log(f"resuming from {fm_path}")
            fm = flowmap.load_flow_map(fm_path)
            report.record("flowmap", 0.0)
        else:
            fm = runner.run("flowmap", lambda: stage_flowmap(field_obj, cfg))
            flowmap.save_flow_map(fm_path, fm)
        tf, ef = runner.run("cauchy-green", lambda: stage_cauchy_green(fm))
        cauchy_green.save_tensor_field(cg_path, tf, ef)

    located, kept = runner.run(
        "singularities", lambda: stage_singularities(tf, cfg),
        singularities_found=lambda r: len(r[0]), singularities_kept=lambda r: len(r[1]))

    wedges, trisectors, pairs = runner.run(
        "classification", lambda: stage_classification(tf, kept, cfg),
        wedges=lambda r: len(r[0]), trisectors=lambda r: len(r[1]),
        wedges_paired=lambda r: len({id(s) for p in r[2] for s in (p.first, p.second)}),
        pairs=lambda r: len(r[2]))
    write_singularities_csv(out / "singularities.csv", located, kept)
    write_pairs_csv(out / "pairs.csv", pairs)

    sections, boundaries = runner.run(
        "integration", lambda: stage_integration(tf, ef, pairs, kept, cfg, field_obj),
        eddies=lambda r: sum(1 for b in r[1] if b is not None))
    write_sections_csv(out / "sections.csv", sections)
    write_boundaries(out / "boundaries.geojson", out / "boundaries.csv", boundaries)

    for vb in boundaries:
        if vb is not None and vb.census != (2, 0):
            raise StageError("integration",
                             f"accepted boundary census {vb.census} violates (2, 0)")

    (out / "report.txt").write_text(report.to_text())
    (out / "report.json").write_text(report.to_json())
    log(report.to_text())
    return report
