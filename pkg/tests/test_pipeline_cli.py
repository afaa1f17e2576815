import json
import math

import numpy as np
import pytest

from lcsvortex.cli import main
from lcsvortex.config import OUTPUT_DIR_ENV, PipelineConfig, load_config
from lcsvortex.errors import ConfigError
from lcsvortex.grid import Axis, write_grid
from lcsvortex.pipeline import run_census

QUICK = """
velocity = double_gyre
double_gyre.A = 0.2
double_gyre.epsilon = 0.2
double_gyre.omega = 0.6283185307179586
t0 = 0.0
T = {T}
domain = 0, 1, 0, 1
resolution = {n}, {n}
rho = 0.1
integrator = rk45
abs_tol = 1e-6
rel_tol = 1e-6
max_pair_distance = 0.25
section_length = {section}
section_seeds = {seeds}
lambda_min = {lmin}
lambda_max = {lmax}
lambda_step = {lstep}
signs = {signs}
output_dir = {out}
threads = 1
"""


def quick_config(tmp_path, out="out", n=64, T=5 * math.pi / 2, section=0.45,
                 seeds=12, lmin=0.97, lmax=0.99, lstep=0.01, signs="minus"):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(QUICK.format(T=T, n=n, section=section, seeds=seeds, lmin=lmin,
                                lmax=lmax, lstep=lstep, signs=signs,
                                out=tmp_path / out))
    return cfg


ARTIFACTS = ["singularities.csv", "pairs.csv", "sections.csv",
             "boundaries.geojson", "boundaries.csv", "report.txt", "report.json"]


class TestConfig:
    def test_file_plus_overrides(self, tmp_path):
        path = quick_config(tmp_path)
        cfg = load_config(path, ["lambda_step=0.02", "threads=3"])
        assert cfg.lambda_step == 0.02
        assert cfg.threads == 3
        assert cfg.resolution == (64, 64)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("no_such_knob = 3\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_env_var_overrides_output(self, tmp_path, monkeypatch):
        path = quick_config(tmp_path)
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env_out"))
        cfg = load_config(path)
        assert cfg.output_dir == str(tmp_path / "env_out")

    def test_invalid_values_raise(self):
        with pytest.raises(ConfigError):
            PipelineConfig(signs="up")
        with pytest.raises(ConfigError):
            PipelineConfig(lambda_min=1.2, lambda_max=0.8)
        with pytest.raises(ConfigError):
            PipelineConfig(velocity="gridded")


class TestRunCensus:
    def test_artifacts_and_funnel(self, tmp_path):
        cfg = load_config(quick_config(tmp_path))
        report = run_census(cfg, log=lambda *_: None)
        out = tmp_path / "out"
        for name in ARTIFACTS:
            assert (out / name).exists(), name
        assert (out / "checkpoints" / "flowmap.grid").exists()
        assert (out / "checkpoints" / "cauchy_green.grid").exists()
        funnel = report.funnel()
        assert funnel and all(a >= b for a, b in zip(funnel, funnel[1:]))
        payload = json.loads((out / "report.json").read_text())
        assert payload["counts"] == report.counts

    def test_rerun_bitwise_identical(self, tmp_path):
        cfg_a = load_config(quick_config(tmp_path, out="a"))
        cfg_b = load_config(quick_config(tmp_path, out="b"))
        ra = run_census(cfg_a, log=lambda *_: None)
        rb = run_census(cfg_b, log=lambda *_: None)
        assert ra.counts == rb.counts
        for name in ("singularities.csv", "pairs.csv", "sections.csv",
                     "boundaries.geojson", "boundaries.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes(), name

    def test_resume_from_cg_checkpoint(self, tmp_path):
        cfg = load_config(quick_config(tmp_path))
        first = run_census(cfg, log=lambda *_: None)
        out = tmp_path / "out"
        originals = {name: (out / name).read_bytes() for name in ARTIFACTS
                     if name not in ("report.txt", "report.json")}
        for name in originals:
            (out / name).unlink()
        resumed = run_census(cfg, resume=True, log=lambda *_: None)
        assert resumed.durations["flowmap"] == 0.0
        assert resumed.durations["cauchy-green"] == 0.0
        assert resumed.counts == first.counts
        for name, blob in originals.items():
            assert (out / name).read_bytes() == blob, name

    def test_resume_rejects_config_mismatch(self, tmp_path):
        cfg = load_config(quick_config(tmp_path))
        run_census(cfg, log=lambda *_: None)
        other = load_config(quick_config(tmp_path), ["T=2.0"])
        with pytest.raises(ConfigError):
            run_census(other, resume=True, log=lambda *_: None)

    def test_zero_velocity_field_clean_run(self, tmp_path):
        x_axis = Axis("x", 0.0, 0.1, 11)
        y_axis = Axis("y", 0.0, 0.1, 11)
        write_grid(tmp_path / "zero.grid", [x_axis, y_axis], {
            "u": (("y", "x"), np.zeros((11, 11))),
            "v": (("y", "x"), np.zeros((11, 11))),
        })
        cfg = PipelineConfig(velocity="gridded", gridded_header=str(tmp_path / "zero.grid"),
                             T=1.0, domain=(0.2, 0.8, 0.2, 0.8), resolution=(16, 16),
                             section_length=0.2, output_dir=str(tmp_path / "out"))
        report = run_census(cfg, log=lambda *_: None)
        assert report.counts["singularities_found"] == 0
        assert report.counts["eddies"] == 0


class TestCli:
    def test_staged_chain_matches_run_census(self, tmp_path):
        path = quick_config(tmp_path, out="staged")
        for cmd in ("compute-flowmap", "compute-cg", "detect-singularities",
                    "detect-vortices"):
            assert main([cmd, "--config", str(path)]) == 0
        assert main(["render", "--config", str(path)]) == 0
        staged = tmp_path / "staged"
        assert (staged / "render.svg").exists()

        cfg_full = load_config(quick_config(tmp_path, out="full"))
        run_census(cfg_full, log=lambda *_: None)
        for name in ("singularities.csv", "pairs.csv", "boundaries.geojson"):
            assert (staged / name).read_bytes() == \
                (tmp_path / "full" / name).read_bytes(), name

    def test_missing_config_file_is_exit_2(self, tmp_path):
        assert main(["run-census", "--config", str(tmp_path / "nope.cfg")]) == 2

    def test_bad_override_is_exit_2(self, tmp_path):
        path = quick_config(tmp_path)
        assert main(["run-census", "--config", str(path), "--set", "bogus=1"]) == 2

    def test_stage_failure_is_exit_3(self, tmp_path):
        path = quick_config(tmp_path)
        # cauchy-green without its upstream checkpoint
        assert main(["compute-cg", "--config", str(path)]) == 3

    def test_render_missing_layer_is_exit_2(self, tmp_path):
        path = quick_config(tmp_path, out="empty")
        assert main(["render", "--config", str(path), "--layers", "boundaries"]) == 2

    def test_cli_flag_overrides(self, tmp_path):
        path = quick_config(tmp_path, out="flags")
        code = main(["run-census", "--config", str(path), "--lambda-min", "0.98",
                     "--lambda-max", "0.99", "--seeds", "8"])
        assert code == 0
        payload = json.loads((tmp_path / "flags" / "report.json").read_text())
        assert payload["counts"]["singularities_found"] >= 0


class TestRender:
    def test_layer_selection(self, tmp_path):
        path = quick_config(tmp_path, out="render_out")
        assert main(["run-census", "--config", str(path)]) == 0
        out = tmp_path / "render_out"
        assert main(["render", "--config", str(path), "--layers",
                     "backdrop,singularities", "--out", str(out / "partial.svg")]) == 0
        text = (out / "partial.svg").read_text()
        assert "<image" in text and "<svg" in text

    def test_render_deterministic(self, tmp_path):
        path = quick_config(tmp_path, out="rdet")
        assert main(["run-census", "--config", str(path)]) == 0
        out = tmp_path / "rdet"
        assert main(["render", "--config", str(path), "--out", str(out / "r1.svg")]) == 0
        assert main(["render", "--config", str(path), "--out", str(out / "r2.svg")]) == 0
        assert (out / "r1.svg").read_bytes() == (out / "r2.svg").read_bytes()
