"""Automated detection of coherent Lagrangian vortex boundaries in 2D flows.

The package follows the detection chain end to end: velocity fields are
advected into a flow map, its gradient yields the Cauchy-Green strain
tensor, isotropic points of that tensor are located and classified by their
line-field topology, and closed orbits of the uniform-stretching direction
fields (found on Poincare sections anchored at wedge pairs) delimit the
vortices. ``VortexBoundaryDetector`` wraps the chain as an estimator; the
``lcsvortex`` command line exposes it stage by stage with checkpointing.
"""

from .cauchy_green import (
    EigenField,
    SymmetricTensorField,
    build_tensor_field,
    cg_from_gradient,
    eigen_decompose,
)
from .config import PipelineConfig, load_config
from .detector import VortexBoundaryDetector
from .flowmap import FlowMapGrid, IntegratorConfig, advect, compute_flow_map_grid
from .grid import Axis, ScalarGrid2D, read_grid, write_grid
from .lambda_lines import (
    EtaFieldSpec,
    PoincareSection,
    VortexBoundary,
    build_section,
    eta_direction,
    extend_eta,
    find_closed_orbits,
    integrate_lambda_line,
    return_distance,
    sweep_lambda,
)
from .pipeline import StageReport, run_census
from .topology import (
    ClosedPolygon,
    Singularity,
    SingularityType,
    WedgePair,
    census_enclosed,
    classify_singularity,
    line_field_index,
    locate_singularities,
    pair_wedges,
    select_isolated,
    vector_field_index,
)
from .velocity import (
    DoubleGyreField,
    DoubleGyreParams,
    GriddedVelocityField,
    PhysicalConstants,
    ScalarSeries,
    eval_double_gyre,
    geostrophic_from_ssh,
    interpolate_velocity,
)

__version__ = "0.1.0"
