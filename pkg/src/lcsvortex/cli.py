"""Command-line interface for the vortex census pipeline.

Subcommands map to the pipeline stages plus an end-to-end run and a
renderer. Exit codes: 0 on success, 2 for configuration problems, 3 for a
stage failure (earlier checkpoints stay usable for a resumed run).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import cauchy_green, flowmap, pipeline, render
from .config import load_config
from .errors import ConfigError, LcsVortexError, MissingLayer, StageError


def _add_common(parser):
    parser.add_argument("--config", metavar="FILE", help="configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a configuration key")
    parser.add_argument("--output-dir", help="artifact directory")
    parser.add_argument("--checkpoint-dir", help="checkpoint directory")
    parser.add_argument("--threads", type=int, help="worker thread cap")


def _add_sweep_flags(parser):
    parser.add_argument("--lambda-min", type=float)
    parser.add_argument("--lambda-max", type=float)
    parser.add_argument("--lambda-step", type=float)
    parser.add_argument("--section-length", type=float)
    parser.add_argument("--seeds", type=int, help="seeds per Poincare section")
    parser.add_argument("--signs", choices=("both", "plus", "minus"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcsvortex",
        description="Automated detection of coherent Lagrangian vortex boundaries")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("compute-flowmap", "advect the auxiliary grid and checkpoint the flow map"),
        ("compute-cg", "build the strain tensor fields from a flow-map checkpoint"),
        ("detect-singularities", "locate, select, classify and pair singularities"),
        ("detect-vortices", "sweep the stretching parameter for closed orbits"),
        ("run-census", "run all stages end to end"),
        ("render", "render artifacts to SVG"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name in ("detect-vortices", "run-census"):
            _add_sweep_flags(p)
        if name == "run-census":
            p.add_argument("--resume", action="store_true",
                           help="reuse existing checkpoints")
        if name == "render":
            p.add_argument("--layers", default=",".join(render.LAYERS),
                           help="comma-separated layer list "
                                f"(default: {','.join(render.LAYERS)})")
            p.add_argument("--out", default=None, help="output SVG path")

    return parser


def _config_from_args(args) -> "pipeline.PipelineConfig":
    overrides = list(args.overrides)
    if args.output_dir:
        overrides.append(f"output_dir={args.output_dir}")
    if args.checkpoint_dir:
        overrides.append(f"checkpoint_dir={args.checkpoint_dir}")
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    flag_map = {
        "lambda_min": "lambda_min", "lambda_max": "lambda_max",
        "lambda_step": "lambda_step", "section_length": "section_length",
        "seeds": "section_seeds", "signs": "signs",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    return load_config(args.config, overrides)


def _timed(label, fn, log):
    start = time.perf_counter()
    result = fn()
    log(f"{label}: {time.perf_counter() - start:.2f}s")
    return result


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise StageError(producer, f"missing artifact {path}; run '{producer}' first")
    return path


def cmd_compute_flowmap(args, log):
    cfg = _config_from_args(args)
    cfg.checkpoint_path.mkdir(parents=True, exist_ok=True)
    field_obj = pipeline.build_velocity_field(cfg)
    try:
        fm = _timed("flowmap", lambda: pipeline.stage_flowmap(field_obj, cfg), log)
    except LcsVortexError as err:
        raise StageError("compute-flowmap", err) from err
    flowmap.save_flow_map(cfg.checkpoint_path / "flowmap.grid", fm)
    log(f"wrote {cfg.checkpoint_path / 'flowmap.grid'}")


def cmd_compute_cg(args, log):
    cfg = _config_from_args(args)
    fm_path = _require(cfg.checkpoint_path / "flowmap.grid", "compute-flowmap")
    fm = flowmap.load_flow_map(fm_path)
    tf, ef = _timed("cauchy-green", lambda: pipeline.stage_cauchy_green(fm), log)
    cauchy_green.save_tensor_field(cfg.checkpoint_path / "cauchy_green.grid", tf, ef)
    log(f"wrote {cfg.checkpoint_path / 'cauchy_green.grid'}")


def cmd_detect_singularities(args, log):
    cfg = _config_from_args(args)
    cg_path = _require(cfg.checkpoint_path / "cauchy_green.grid", "compute-cg")
    tf, _ = cauchy_green.load_tensor_field(cg_path)
    located, kept = _timed("singularities",
                           lambda: pipeline.stage_singularities(tf, cfg), log)
    wedges, trisectors, pairs = _timed(
        "classification", lambda: pipeline.stage_classification(tf, kept, cfg), log)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_singularities_csv(out / "singularities.csv", located, kept)
    pipeline.write_pairs_csv(out / "pairs.csv", pairs)
    log(f"{len(located)} found, {len(kept)} kept, {len(wedges)} wedges, "
        f"{len(trisectors)} trisectors, {len(pairs)} pairs")


def cmd_detect_vortices(args, log):
    cfg = _config_from_args(args)
    cg_path = _require(cfg.checkpoint_path / "cauchy_green.grid", "compute-cg")
    out = Path(cfg.output_dir)
    sing_path = _require(out / "singularities.csv", "detect-singularities")
    pairs_path = _require(out / "pairs.csv", "detect-singularities")
    tf, ef = cauchy_green.load_tensor_field(cg_path)
    _, kept = pipeline.read_singularities_csv(sing_path)
    pairs = pipeline.read_pairs_csv(pairs_path, kept)
    sections, boundaries = _timed(
        "integration",
        lambda: pipeline.stage_integration(tf, ef, pairs, kept, cfg), log)
    pipeline.write_sections_csv(out / "sections.csv", sections)
    pipeline.write_boundaries(out / "boundaries.geojson", out / "boundaries.csv",
                              boundaries)
    log(f"{sum(1 for b in boundaries if b is not None)} eddies "
        f"from {len(pairs)} pairs")


def cmd_run_census(args, log):
    cfg = _config_from_args(args)
    pipeline.run_census(cfg, resume=args.resume, log=log)


def cmd_render(args, log):
    cfg = _config_from_args(args)
    layers = tuple(l.strip() for l in args.layers.split(",") if l.strip())
    out_path = args.out or str(Path(cfg.output_dir) / "render.svg")
    path = render.render_svg(cfg.output_dir, out_path, layers=layers,
                             checkpoint_dir=cfg.checkpoint_dir)
    log(f"wrote {path}")


_COMMANDS = {
    "compute-flowmap": cmd_compute_flowmap,
    "compute-cg": cmd_compute_cg,
    "detect-singularities": cmd_detect_singularities,
    "detect-vortices": cmd_detect_vortices,
    "run-census": cmd_run_census,
    "render": cmd_render,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    def log(message):
        print(message)

    try:
        _COMMANDS[args.command](args, log)
    except (ConfigError, MissingLayer) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except StageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
