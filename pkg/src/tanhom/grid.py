"""Uniform-grid multilinear (Q1) element machinery.

Fields are nodal arrays with leading channel axes; every operator below acts
on the trailing spatial axes.  Gradients are evaluated at element centers,
where they are exact for the multilinear reconstruction: along each axis the
center value of the derivative is the plain corner difference, averaged over
the remaining axes.  One-point quadrature at the centers keeps quadratic
energies exactly quadratic and never samples a coefficient discontinuity that
sits on a grid line.
"""

from __future__ import annotations

import numpy as np


def _diff(arr: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(arr, -1, axis=axis) - arr) / h
    lo = [slice(None)] * arr.ndim
    hi = [slice(None)] * arr.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return (arr[tuple(hi)] - arr[tuple(lo)]) / h


def _avg(arr: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return 0.5 * (np.roll(arr, -1, axis=axis) + arr)
    lo = [slice(None)] * arr.ndim
    hi = [slice(None)] * arr.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (arr[tuple(hi)] + arr[tuple(lo)])


def _diff_adjoint(w: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(w, 1, axis=axis) - w) / h
    shape = list(w.shape)
    shape[axis] += 1
    out = np.zeros(shape, dtype=w.dtype)
    lo = [slice(None)] * w.ndim
    hi = [slice(None)] * w.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    out[tuple(hi)] += w / h
    out[tuple(lo)] -= w / h
    return out


def _avg_adjoint(w: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return 0.5 * (np.roll(w, 1, axis=axis) + w)
    shape = list(w.shape)
    shape[axis] += 1
    out = np.zeros(shape, dtype=w.dtype)
    lo = [slice(None)] * w.ndim
    hi = [slice(None)] * w.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    out[tuple(hi)] += 0.5 * w
    out[tuple(lo)] += 0.5 * w
    return out


class UniformGrid:
    """Tensor grid on (0, side)^ndim with spacing ``h`` and Q1 elements.

    ``periodic`` grids store one value per period and wrap; otherwise nodes
    include both edges.  ``channels`` leading axes are carried through all
    operators untouched.
    """

    def __init__(self, ndim: int, elements_per_side: int, h: float, periodic: bool):
        if ndim < 1:
            raise ValueError("grid dimension must be at least 1")
        if elements_per_side < 1:
            raise ValueError("need at least one element per side")
        self.ndim = ndim
        self.elements_per_side = elements_per_side
        self.h = float(h)
        self.periodic = bool(periodic)
        nodes = elements_per_side if periodic else elements_per_side + 1
        self.node_shape = (nodes,) * ndim
        self.element_shape = (elements_per_side,) * ndim
        self.n_elements = elements_per_side**ndim

    def centers(self) -> np.ndarray:
        """Element-center coordinates, shape (*element_shape, ndim)."""
        axis = (np.arange(self.elements_per_side) + 0.5) * self.h
        mesh = np.meshgrid(*([axis] * self.ndim), indexing="ij")
        return np.stack(mesh, axis=-1)

    def center_gradient(self, values: np.ndarray) -> np.ndarray:
        """Gradient at element centers: (*channels, *nodes) -> (*channels, ndim, *elements)."""
        lead = values.ndim - self.ndim
        out = []
        for k in range(self.ndim):
            g = values
            for j in range(self.ndim):
                axis = lead + j
                if j == k:
                    g = _diff(g, axis, self.h, self.periodic)
                else:
                    g = _avg(g, axis, self.periodic)
            out.append(g)
        return np.stack(out, axis=lead)

    def center_gradient_adjoint(self, weights: np.ndarray) -> np.ndarray:
        """Transpose of ``center_gradient``: (*channels, ndim, *elements) -> (*channels, *nodes)."""
        lead = weights.ndim - self.ndim - 1
        total = None
        for k in range(self.ndim):
            g = np.take(weights, k, axis=lead)
            for j in reversed(range(self.ndim)):
                axis = lead + j
                if j == k:
                    g = _diff_adjoint(g, axis, self.h, self.periodic)
                else:
                    g = _avg_adjoint(g, axis, self.periodic)
            total = g if total is None else total + g
        return total

    def interior(self) -> tuple[slice, ...]:
        """Slices selecting interior nodes of a non-periodic grid."""
        if self.periodic:
            raise ValueError("periodic grids have no boundary")
        return (slice(1, -1),) * self.ndim
