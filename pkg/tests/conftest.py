"""Shared synthetic tensor-field builders.

A convenient family of symmetric tensor fields comes from a complex function
w(z): C = I + [[Re w, Im w], [Im w, -Re w]] has eigenvalues 1 +- |w| and its
dominant eigendirection sits at angle arg(w)/2. Zeros of w are exactly the
isotropic points, simple zeros give wedges (index +1/2), simple zeros of
conj(z) factors give trisectors (index -1/2). A pointwise positive rescaling
of w keeps directions and zeros while keeping the tensor positive-definite.
"""

import numpy as np
import pytest

from lcsvortex.cauchy_green import SymmetricTensorField, eigen_field_from_tensor
from lcsvortex.grid import Axis


def w_tensor_components(wfunc, x, y, squash=True):
    z = np.asarray(x) + 1j * np.asarray(y)
    w = wfunc(z)
    if squash:
        w = 0.9 * w / (1.0 + np.abs(w))
    return 1.0 + w.real, w.imag, 1.0 - w.real


def make_w_tensor_field(wfunc, extent=(-1.0, 1.0, -1.0, 1.0), n=101, squash=True):
    xmin, xmax, ymin, ymax = extent
    x_axis = Axis("x", xmin, (xmax - xmin) / (n - 1), n)
    y_axis = Axis("y", ymin, (ymax - ymin) / (n - 1), n)
    X, Y = np.meshgrid(x_axis.coords(), y_axis.coords())
    c11, c12, c22 = w_tensor_components(wfunc, X, Y, squash)
    tf = SymmetricTensorField(x_axis, y_axis, c11, c12, c22,
                              np.ones_like(c11, dtype=bool))
    return tf


def w_line_field(wfunc):
    """Representative-vector callable of the line field at angle arg(w)/2."""

    def lf(pts):
        z = pts[:, 0] + 1j * pts[:, 1]
        ang = 0.5 * np.angle(wfunc(z))
        return np.column_stack([np.cos(ang), np.sin(ang)])

    return lf


def make_eig_tensor_field(lam1_func, lam2_func, theta_func,
                          extent=(-2.0, 2.0, -2.0, 2.0), n=161):
    """Tensor field with prescribed eigenvalues and dominant direction angle."""
    xmin, xmax, ymin, ymax = extent
    x_axis = Axis("x", xmin, (xmax - xmin) / (n - 1), n)
    y_axis = Axis("y", ymin, (ymax - ymin) / (n - 1), n)
    X, Y = np.meshgrid(x_axis.coords(), y_axis.coords())
    lam1 = np.broadcast_to(lam1_func(X, Y), X.shape).astype(float)
    lam2 = np.broadcast_to(lam2_func(X, Y), X.shape).astype(float)
    theta = theta_func(X, Y)
    ct, st = np.cos(theta), np.sin(theta)
    gap = lam2 - lam1
    c11 = lam1 + gap * ct * ct
    c12 = gap * ct * st
    c22 = lam1 + gap * st * st
    tf = SymmetricTensorField(x_axis, y_axis, c11, c12, c22,
                              np.ones_like(c11, dtype=bool))
    return tf


@pytest.fixture
def wedge_tensor_field():
    return make_w_tensor_field(lambda z: z)


@pytest.fixture
def trisector_tensor_field():
    return make_w_tensor_field(lambda z: np.conj(z))


def eigen_of(tf):
    return eigen_field_from_tensor(tf)
