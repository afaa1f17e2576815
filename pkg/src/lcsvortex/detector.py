"""Estimator-style front end for the vortex-boundary pipeline.

``VortexBoundaryDetector`` wraps the full detection chain behind the
scikit-learn estimator protocol: constructor parameters are plain attributes
(so ``get_params``/``set_params``/``clone`` work), ``fit`` consumes a
velocity field and exposes fitted state through trailing-underscore
attributes, and ``transform`` advects arbitrary points through the fitted
flow-map window.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import lambda_lines, topology
from .cauchy_green import build_tensor_field
from .errors import ConfigError
from .flowmap import IntegratorConfig, advect, compute_flow_map_grid
from .pipeline import StageReport, stage_classification, stage_integration, stage_singularities
from .validation import (
    check_domain,
    check_lambda_grid,
    check_points,
    check_positive,
    check_resolution,
    check_velocity_field,
)

_SIGNS = {"both": (1, -1), "plus": (1,), "minus": (-1,)}


class VortexBoundaryDetector(BaseEstimator):
    """Detect coherent vortex boundaries in a 2D unsteady velocity field.

    Parameters mirror the pipeline configuration: the advection window
    (``t0``, ``T``), the analysis grid (``domain``, ``resolution``, ``rho``),
    integrator tolerances, singularity selection/pairing thresholds, the
    Poincare-section geometry and the stretching-parameter sweep.

    After ``fit(field)`` the detector carries:

    - ``flow_map_``, ``tensor_field_``, ``eigen_field_``
    - ``singularities_`` (selected and classified), ``wedge_pairs_``
    - ``sections_`` and ``boundaries_`` (one entry per pair, None where no
      closed orbit was accepted)
    - ``vortex_boundaries_`` (the accepted boundaries only) and ``report_``
    """

    def __init__(self, t0=0.0, T=1.0, domain=(0.0, 1.0, 0.0, 1.0),
                 resolution=(200, 200), rho=0.1, integrator="rk45",
                 abs_tol=1e-6, rel_tol=1e-6, rk4_step=None,
                 min_separation_factor=2.0, max_pair_distance=2.0,
                 section_length=1.5, section_seeds=100,
                 lambda_min=0.85, lambda_max=1.15, lambda_step=0.01,
                 signs="both", orbit_step=None, max_arclength=None,
                 stretch_tolerance=0.02, threads=1):
        self.t0 = t0
        self.T = T
        self.domain = domain
        self.resolution = resolution
        self.rho = rho
        self.integrator = integrator
        self.abs_tol = abs_tol
        self.rel_tol = rel_tol
        self.rk4_step = rk4_step
        self.min_separation_factor = min_separation_factor
        self.max_pair_distance = max_pair_distance
        self.section_length = section_length
        self.section_seeds = section_seeds
        self.lambda_min = lambda_min
        self.lambda_max = lambda_max
        self.lambda_step = lambda_step
        self.signs = signs
        self.orbit_step = orbit_step
        self.max_arclength = max_arclength
        self.stretch_tolerance = stretch_tolerance
        self.threads = threads

    def _validate(self):
        check_domain(self.domain)
        check_resolution(self.resolution)
        check_positive(self.rho, "rho")
        check_lambda_grid(self.lambda_min, self.lambda_max, self.lambda_step)
        if self.signs not in _SIGNS:
            raise ConfigError(f"signs must be one of {tuple(_SIGNS)}, got {self.signs!r}")

    def _integrator_config(self):
        return IntegratorConfig(method=self.integrator, abs_tol=self.abs_tol,
                                rel_tol=self.rel_tol, step=self.rk4_step)

    def fit(self, X, y=None):
        """Run the detection pipeline on velocity field ``X``."""
        self._validate()
        field_obj = check_velocity_field(X)
        cfg = _ParamView(self)

        import time

        report = StageReport()
        t = time.perf_counter()
        self.flow_map_ = compute_flow_map_grid(
            field_obj, self.domain, self.resolution, rho=self.rho,
            cfg=self._integrator_config(), t0=self.t0, T=self.T, threads=self.threads)
        report.record("flowmap", time.perf_counter() - t)

        t = time.perf_counter()
        self.tensor_field_, self.eigen_field_ = build_tensor_field(self.flow_map_)
        report.record("cauchy-green", time.perf_counter() - t)

        t = time.perf_counter()
        located, kept = stage_singularities(self.tensor_field_, cfg)
        report.record("singularities", time.perf_counter() - t,
                      singularities_found=len(located), singularities_kept=len(kept))

        t = time.perf_counter()
        wedges, trisectors, pairs = stage_classification(self.tensor_field_, kept, cfg)
        report.record("classification", time.perf_counter() - t,
                      wedges=len(wedges), trisectors=len(trisectors),
                      wedges_paired=len({id(s) for p in pairs for s in (p.first, p.second)}),
                      pairs=len(pairs))

        t = time.perf_counter()
        sections, boundaries = stage_integration(
            self.tensor_field_, self.eigen_field_, pairs, kept, cfg, field_obj)
        report.record("integration", time.perf_counter() - t,
                      eddies=sum(1 for b in boundaries if b is not None))

        self.field_ = field_obj
        self.all_singularities_ = located
        self.singularities_ = kept
        self.wedge_pairs_ = pairs
        self.sections_ = sections
        self.boundaries_ = boundaries
        self.vortex_boundaries_ = [b for b in boundaries if b is not None]
        self.report_ = report
        return self

    def transform(self, X):
        """Advect points through the fitted flow-map window [t0, t0+T]."""
        if not hasattr(self, "field_"):
            raise RuntimeError("detector is not fitted; call fit(field) first")
        pts = check_points(X)
        return advect(self.field_, pts, self.t0, self.T, self._integrator_config())


class _ParamView:
    """Adapter exposing detector parameters under the pipeline-config names."""

    def __init__(self, det: VortexBoundaryDetector):
        self.t0 = det.t0
        self.T = det.T
        self.integrator = det.integrator
        self.abs_tol = det.abs_tol
        self.rel_tol = det.rel_tol
        self.rk4_step = det.rk4_step
        self.min_separation_factor = det.min_separation_factor
        self.max_pair_distance = det.max_pair_distance
        self.section_length = det.section_length
        self.section_seeds = det.section_seeds
        self.lambda_min = det.lambda_min
        self.lambda_max = det.lambda_max
        self.lambda_step = det.lambda_step
        self.sign_tuple = _SIGNS[det.signs]
        self.orbit_step = det.orbit_step
        self.max_arclength = det.max_arclength
        self.stretch_tolerance = det.stretch_tolerance
