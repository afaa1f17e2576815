"""Cauchy-Green strain tensor fields and their eigen-decomposition.

The tensor C = DF^T DF is stored through its three independent components
(c11, c12, c22). The 2x2 symmetric eigensolve is closed-form (trace and
discriminant), deterministic, and applies a fixed sign convention: each
eigenvector representative lies in the closed upper half-plane, with ties on
the horizontal resolved to positive x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositiveDefinite
from .flowmap import FlowMapGrid, deformation_gradient_field
from .grid import Axis, read_grid, write_grid

RELATIVE_DEGENERACY = 1e-8


def cg_from_gradient(df):
    """Cauchy-Green components (C11, C12, C22) from a flow-map gradient.

    ``df`` may be a single 2x2 matrix or a (..., 2, 2) stack.
    """
    df = np.asarray(df, dtype=float)
    c11 = df[..., 0, 0] ** 2 + df[..., 1, 0] ** 2
    c12 = df[..., 0, 0] * df[..., 0, 1] + df[..., 1, 0] * df[..., 1, 1]
    c22 = df[..., 0, 1] ** 2 + df[..., 1, 1] ** 2
    return c11, c12, c22


def _apply_sign_convention(vx, vy):
    """Flip representatives into the closed upper half-plane (ties -> +x)."""
    flip = (vy < 0) | ((vy == 0) & (vx < 0))
    s = np.where(flip, -1.0, 1.0)
    return vx * s, vy * s


def _eig_sym(c11, c12, c22):
    """Vectorized closed-form eigensolve of symmetric 2x2 tensors.

    Returns (lam1, lam2, xi1, xi2, rel_gap) with lam1 <= lam2, unit
    eigenvectors stacked on the last axis, and rel_gap = (lam2-lam1)/lam2
    for degeneracy decisions.
    """
    c11 = np.asarray(c11, dtype=float)
    c12 = np.asarray(c12, dtype=float)
    c22 = np.asarray(c22, dtype=float)
    mean = 0.5 * (c11 + c22)
    half = 0.5 * (c11 - c22)
    disc = np.hypot(half, c12)
    lam1 = mean - disc
    lam2 = mean + disc

    # eigenvector of lam2: (c12, lam2-c11) or (lam2-c22, c12), pick the
    # branch with the larger second entry for numerical robustness
    d1 = lam2 - c11
    d2 = lam2 - c22
    use1 = np.abs(d1) >= np.abs(d2)
    vx = np.where(use1, c12, d2)
    vy = np.where(use1, d1, c12)
    norm = np.hypot(vx, vy)
    tiny = norm <= 0
    vx = np.where(tiny, 1.0, vx)
    vy = np.where(tiny, 0.0, vy)
    norm = np.where(tiny, 1.0, norm)
    vx = vx / norm
    vy = vy / norm
    x2x, x2y = _apply_sign_convention(vx, vy)
    x1x, x1y = _apply_sign_convention(-x2y, x2x)
    xi1 = np.stack([x1x, x1y], axis=-1)
    xi2 = np.stack([x2x, x2y], axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel_gap = np.where(lam2 != 0, (lam2 - lam1) / lam2, 0.0)
    return lam1, lam2, xi1, xi2, rel_gap


def eigen_decompose(c):
    """Eigen-decompose one symmetric positive-definite 2x2 tensor.

    ``c`` is a 2x2 matrix or a (c11, c12, c22) triple. Returns
    (lam1, lam2, xi1, xi2, degenerate) with lam1 <= lam2 and unit
    eigenvectors under the upper-half-plane sign convention.
    """
    c = np.asarray(c, dtype=float)
    if c.shape == (2, 2):
        c11, c12, c22 = c[0, 0], c[0, 1], c[1, 1]
    elif c.shape == (3,):
        c11, c12, c22 = c
    else:
        raise ValueError("expected a 2x2 matrix or a (c11, c12, c22) triple")
    if not (c11 > 0 and c11 * c22 - c12 * c12 > 0):
        raise NotPositiveDefinite(f"tensor ({c11}, {c12}, {c22}) is not positive-definite")
    lam1, lam2, xi1, xi2, rel_gap = _eig_sym(c11, c12, c22)
    return float(lam1), float(lam2), xi1, xi2, bool(rel_gap <= RELATIVE_DEGENERACY)


@dataclass(frozen=True)
class SymmetricTensorField:
    """Per-node (C11, C12, C22) on a uniform grid with a validity mask."""

    x_axis: Axis
    y_axis: Axis
    c11: np.ndarray = field(repr=False)
    c12: np.ndarray = field(repr=False)
    c22: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)

    def __post_init__(self):
        expect = (self.y_axis.size, self.x_axis.size)
        for name in ("c11", "c12", "c22", "valid"):
            if getattr(self, name).shape != expect:
                raise ValueError(f"{name} shape {getattr(self, name).shape} != {expect}")


@dataclass(frozen=True)
class EigenField:
    """Eigenvalue/eigenvector fields of a tensor field (lam1 <= lam2)."""

    x_axis: Axis
    y_axis: Axis
    lam1: np.ndarray = field(repr=False)
    lam2: np.ndarray = field(repr=False)
    xi1: np.ndarray = field(repr=False)
    xi2: np.ndarray = field(repr=False)
    degenerate: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)


def build_tensor_field(fm: FlowMapGrid):
    """Cauchy-Green tensor and eigen fields from an advected flow-map grid.

    Invalid flow-map nodes propagate into the masks; nodes whose tensor loses
    positive-definiteness to round-off are masked as well. The degeneracy
    flag marks nodes with lam2 - lam1 below 1e-8 times the field-wide
    maximum of lam2, where eigenvector directions are unreliable.
    """
    df = deformation_gradient_field(fm)
    c11, c12, c22 = cg_from_gradient(df)
    with np.errstate(invalid="ignore"):
        pd = (c11 > 0) & (c11 * c22 - c12 * c12 > 0)
    valid = fm.valid & pd
    c11 = np.where(valid, c11, np.nan)
    c12 = np.where(valid, c12, np.nan)
    c22 = np.where(valid, c22, np.nan)
    tf = SymmetricTensorField(fm.x_axis, fm.y_axis, c11, c12, c22, valid)

    lam1, lam2, xi1, xi2, _ = _eig_sym(c11, c12, c22)
    lam2_max = np.nanmax(lam2) if valid.any() else 1.0
    eps_degen = RELATIVE_DEGENERACY * lam2_max
    with np.errstate(invalid="ignore"):
        degenerate = valid & ((lam2 - lam1) < eps_degen)
    ef = EigenField(fm.x_axis, fm.y_axis, lam1, lam2, xi1, xi2, degenerate, valid)
    return tf, ef


def eigen_field_from_tensor(tf: SymmetricTensorField) -> EigenField:
    """Per-node eigen decomposition of an existing tensor field."""
    lam1, lam2, xi1, xi2, _ = _eig_sym(tf.c11, tf.c12, tf.c22)
    lam2_max = np.nanmax(lam2) if tf.valid.any() else 1.0
    with np.errstate(invalid="ignore"):
        degenerate = tf.valid & ((lam2 - lam1) < RELATIVE_DEGENERACY * lam2_max)
    return EigenField(tf.x_axis, tf.y_axis, lam1, lam2, xi1, xi2, degenerate, tf.valid)


def interpolate_tensor(tf: SymmetricTensorField, pts):
    """Bilinear tensor components at query points; returns (c11, c12, c22, ok).

    ``ok`` is False outside the grid or where the enclosing cell touches an
    invalid node.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x = pts[:, 0]
    y = pts[:, 1]
    inside = np.isfinite(x) & np.isfinite(y)
    inside &= tf.x_axis.contains(np.where(np.isfinite(x), x, tf.x_axis.start))
    inside &= tf.y_axis.contains(np.where(np.isfinite(y), y, tf.y_axis.start))
    xs = np.where(inside, x, tf.x_axis.start)
    ys = np.where(inside, y, tf.y_axis.start)
    ix, sx = tf.x_axis.cell_fraction(xs)
    iy, sy = tf.y_axis.cell_fraction(ys)
    ok = inside & (tf.valid[iy, ix] & tf.valid[iy, ix + 1]
                   & tf.valid[iy + 1, ix] & tf.valid[iy + 1, ix + 1])
    w00 = (1 - sx) * (1 - sy)
    w10 = sx * (1 - sy)
    w01 = (1 - sx) * sy
    w11 = sx * sy
    out = []
    for comp in (tf.c11, tf.c12, tf.c22):
        val = (w00 * comp[iy, ix] + w10 * comp[iy, ix + 1]
               + w01 * comp[iy + 1, ix] + w11 * comp[iy + 1, ix + 1])
        out.append(np.where(ok, val, np.nan))
    return out[0], out[1], out[2], ok


def eigen_at(tf: SymmetricTensorField, pts):
    """Interpolate the tensor at points and eigendecompose there.

    Interpolating tensor components (rather than eigenvectors, which carry a
    sign ambiguity) keeps off-node eigen-directions well-defined. Returns
    (lam1, lam2, xi1, xi2, rel_gap, ok).
    """
    c11, c12, c22, ok = interpolate_tensor(tf, pts)
    lam1, lam2, xi1, xi2, rel_gap = _eig_sym(
        np.where(ok, c11, 1.0), np.where(ok, c12, 0.0), np.where(ok, c22, 1.0))
    return lam1, lam2, xi1, xi2, rel_gap, ok


def save_tensor_field(header_path, tf: SymmetricTensorField, ef: EigenField):
    arrays = {
        "c11": (("y", "x"), tf.c11),
        "c12": (("y", "x"), tf.c12),
        "c22": (("y", "x"), tf.c22),
        "valid": (("y", "x"), tf.valid.astype(float)),
        "lam1": (("y", "x"), ef.lam1),
        "lam2": (("y", "x"), ef.lam2),
        "xi1_x": (("y", "x"), ef.xi1[..., 0]),
        "xi1_y": (("y", "x"), ef.xi1[..., 1]),
        "xi2_x": (("y", "x"), ef.xi2[..., 0]),
        "xi2_y": (("y", "x"), ef.xi2[..., 1]),
        "degenerate": (("y", "x"), ef.degenerate.astype(float)),
    }
    write_grid(header_path, [tf.x_axis, tf.y_axis], arrays, {"kind": "cauchy_green"})


def load_tensor_field(header_path):
    axes, arrays, _ = read_grid(header_path)
    valid = arrays["valid"][1] == 1.0
    tf = SymmetricTensorField(axes["x"], axes["y"], arrays["c11"][1], arrays["c12"][1],
                              arrays["c22"][1], valid)
    xi1 = np.stack([arrays["xi1_x"][1], arrays["xi1_y"][1]], axis=-1)
    xi2 = np.stack([arrays["xi2_x"][1], arrays["xi2_y"][1]], axis=-1)
    ef = EigenField(axes["x"], axes["y"], arrays["lam1"][1], arrays["lam2"][1],
                    xi1, xi2, arrays["degenerate"][1] == 1.0, valid)
    return tf, ef
