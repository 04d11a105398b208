"""Structured Q1 grid on the rescaled beam and its discrete operators.

Quadrature uses the element midpoint in x1 and two Gauss points in x2. The
midpoint in x1 keeps bending modes free of parasitic shear; the two points
through the thickness integrate the linear-in-x2 bending strain exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])
_GAUSS = np.array([-1.0, 1.0]) / math.sqrt(3.0)


@dataclass(frozen=True)
class Grid2:
    """Tensor grid on ``(-eta, L + eta) x (-1/2, 1/2)``.

    Nodes are numbered ``i * n2 + j`` with ``i`` along x1. ``eta`` is the
    clamp extension; it is a whole number of cells so that x1 = 0 and x1 = L
    are node columns.
    """

    n1: int
    n2: int
    L: float
    eta: float = 0.0

    def __post_init__(self):
        if self.n1 < 3 or self.n2 < 2:
            raise ValueError("grid needs n1 >= 3 and n2 >= 2")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @classmethod
    def for_beam(cls, L: float, delta1: float, n2: int = 5, ext_cells: int = 0) -> "Grid2":
        """Grid with spacing close to ``delta1`` and ``ext_cells`` columns beyond each end."""
        inner = max(2, int(round(L / delta1)))
        d = L / inner
        return cls(inner + 1 + 2 * ext_cells, n2, L, ext_cells * d)

    @property
    def d1(self) -> float:
        return (self.L + 2 * self.eta) / (self.n1 - 1)

    @property
    def d2(self) -> float:
        return 1.0 / (self.n2 - 1)

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(-self.eta, self.L + self.eta, self.n1)

    @property
    def x2(self) -> np.ndarray:
        return np.linspace(-0.5, 0.5, self.n2)

    @property
    def n_nodes(self) -> int:
        return self.n1 * self.n2

    @property
    def n_elements(self) -> int:
        return (self.n1 - 1) * (self.n2 - 1)

    def nodes(self) -> np.ndarray:
        X1, X2 = np.meshgrid(self.x1, self.x2, indexing="ij")
        return np.stack([X1.ravel(), X2.ravel()], -1)

    def node_weights(self) -> np.ndarray:
        """Trapezoid area weights per node."""
        w1 = np.full(self.n1, self.d1)
        w1[[0, -1]] *= 0.5
        w2 = np.full(self.n2, self.d2)
        w2[[0, -1]] *= 0.5
        return np.outer(w1, w2).ravel()

    def element_nodes(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(self.n1 - 1), np.arange(self.n2 - 1), indexing="ij")
        i, j = i.ravel(), j.ravel()
        n2 = self.n2
        return np.stack([i * n2 + j, (i + 1) * n2 + j, (i + 1) * n2 + j + 1, i * n2 + j + 1], -1)

    def element_boxes(self) -> np.ndarray:
        """``(x1_lo, x1_hi, x2_lo, x2_hi)`` per element."""
        i, j = np.meshgrid(np.arange(self.n1 - 1), np.arange(self.n2 - 1), indexing="ij")
        x1, x2 = self.x1, self.x2
        return np.stack([x1[i.ravel()], x1[i.ravel() + 1], x2[j.ravel()], x2[j.ravel() + 1]], -1)

    def quad_points(self) -> np.ndarray:
        box = self.element_boxes()
        xm = 0.5 * (box[:, 0] + box[:, 1])
        ym = 0.5 * (box[:, 2] + box[:, 3])
        pts = np.empty((box.shape[0], 2, 2))
        for k, g in enumerate(_GAUSS):
            pts[:, k, 0] = xm
            pts[:, k, 1] = ym + 0.5 * self.d2 * g
        return pts.reshape(-1, 2)

    def quad_weights(self) -> np.ndarray:
        return np.full(2 * self.n_elements, 0.5 * self.d1 * self.d2)

    def interior_columns(self) -> np.ndarray:
        """Indices of node columns with 0 <= x1 <= L."""
        x = self.x1
        tol = 1e-9 * self.d1
        return np.flatnonzero((x >= -tol) & (x <= self.L + tol))


@dataclass(frozen=True)
class Operators:
    """Sparse maps from nodal fields to quadrature-point values.

    ``grad_h`` maps flattened ``y`` (node-major, 2 per node) to ``grad_h y``
    with 4 entries per point (row-major 2x2). ``interp`` maps nodal ``s`` to
    point values; ``grad_s`` maps nodal ``s`` to ``grad_h s`` (2 per point).
    """

    grad_h: sp.csr_matrix
    interp: sp.csr_matrix
    grad_s: sp.csr_matrix
    weights: np.ndarray
    element_of_point: np.ndarray


@lru_cache(maxsize=32)
def operators(grid: Grid2, h: float) -> Operators:
    conn = grid.element_nodes()
    ne = conn.shape[0]
    nq = 2 * ne
    d1, d2 = grid.d1, grid.d2
    N = np.empty((2, 4))
    dN = np.empty((2, 4, 2))
    for k, g in enumerate(_GAUSS):
        N[k] = 0.25 * (1 + _ETA * g)
        dN[k, :, 0] = (2.0 / d1) * 0.25 * _XI * (1 + _ETA * g)
        dN[k, :, 1] = (2.0 / d2) * 0.25 * _ETA / h

    q = np.arange(nq)
    e = q // 2
    k = q % 2
    # grad_h y
    rows, cols, vals = [], [], []
    for a in range(4):
        node = conn[e, a]
        for c in range(2):
            for col in range(2):
                rows.append(4 * q + 2 * c + col)
                cols.append(2 * node + c)
                vals.append(dN[k, a, col])
    B = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(4 * nq, 2 * grid.n_nodes))
    rows, cols, vals = [], [], []
    for a in range(4):
        rows.append(q)
        cols.append(conn[e, a])
        vals.append(N[k, a])
    Nm = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(nq, grid.n_nodes))
    rows, cols, vals = [], [], []
    for a in range(4):
        for col in range(2):
            rows.append(2 * q + col)
            cols.append(conn[e, a])
            vals.append(dN[k, a, col])
    G = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(2 * nq, grid.n_nodes))
    return Operators(B, Nm, G, grid.quad_weights(), e)


def block_diag4(T: np.ndarray) -> sp.csr_matrix:
    """Sparse block diagonal matrix from an array of 4x4 blocks."""
    nq = T.shape[0]
    r = (4 * np.arange(nq)[:, None, None] + np.arange(4)[None, :, None]) * np.ones((1, 1, 4), int)
    c = (4 * np.arange(nq)[:, None, None] + np.arange(4)[None, None, :]) * np.ones((1, 4, 1), int)
    return sp.csr_matrix((T.ravel(), (r.ravel(), c.ravel())), shape=(4 * nq, 4 * nq))
