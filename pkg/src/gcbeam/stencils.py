"""Finite-difference operators on a uniform grid of [0, L].

Two sampling locations are used throughout the package: the ``n`` grid
nodes and the ``n - 1`` cell midpoints.  Every operator is a sparse matrix
acting along axis 0 of an array, so trailing axes (tensor components, batch
columns) pass through untouched.  All stencils are second-order accurate,
including the one-sided ones used next to the endpoints.

Fields whose energy involves second or higher derivatives are also handled
on a grid extended by one ghost node beyond each end.  The ghost value is a
genuine unknown of the discrete problem (fixed by an anchor or by
stationarity), and it is interchangeable with the endpoint slope through
the centered stencil ``SLOPE_OFFSETS``.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np
import scipy.sparse as sp

NODE = "node"
MID = "mid"

# node offsets (left end, unit spacing) of the endpoint slope on a ghosted grid;
# wider one-sided variants degrade the clamped-end convergence to first order
SLOPE_OFFSETS = (-1, 0, 1)


def fd_weights(offsets, order: int, x0: float = 0.0) -> np.ndarray:
    """Weights ``w`` with ``sum(w * f(x0 + o)) ~ f^(order)(x0)`` for unit spacing.

    Solves the Taylor table, so ``len(offsets) - order`` is the accuracy order.
    """
    offsets = np.asarray(offsets, dtype=float) - x0
    m = len(offsets)
    if order >= m:
        raise ValueError("need more points than the derivative order")
    vander = np.array([offsets**j / factorial(j) for j in range(m)])
    rhs = np.zeros(m)
    rhs[order] = 1.0
    return np.linalg.solve(vander, rhs)


def _rows_to_csr(rows, shape):
    data, ii, jj = [], [], []
    for i, (cols, w) in enumerate(rows):
        ii.extend([i] * len(cols))
        jj.extend(cols)
        data.extend(w)
    return sp.csr_matrix((data, (ii, jj)), shape=shape)


def _node_derivative(n: int, order: int) -> list:
    """Rows of a nodal derivative: centered inside, one-sided near the ends."""
    half = (order + 1) // 2
    width = order + 2  # one-sided points for second-order accuracy
    centered = fd_weights(range(-half, half + 1), order)
    rows = []
    for k in range(n):
        if half <= k < n - half:
            rows.append((list(range(k - half, k + half + 1)), centered))
        elif k < half:
            cols = list(range(width))
            rows.append((cols, fd_weights(cols, order, x0=k)))
        else:
            cols = list(range(n - width, n))
            rows.append((cols, fd_weights(cols, order, x0=k)))
    return rows


def _mid_derivative(n: int, order: int) -> list:
    """Rows of an odd derivative sampled at midpoints ``k + 1/2``."""
    half = (order + 1) // 2
    width = order + 2
    centered = fd_weights(range(-half + 1, half + 1), order, x0=0.5)
    rows = []
    for k in range(n - 1):
        lo, hi = k - half + 1, k + half
        if lo >= 0 and hi <= n - 1:
            rows.append((list(range(lo, hi + 1)), centered))
        elif lo < 0:
            cols = list(range(width))
            rows.append((cols, fd_weights(cols, order, x0=k + 0.5)))
        else:
            cols = list(range(n - width, n))
            rows.append((cols, fd_weights(cols, order, x0=k + 0.5)))
    return rows


class GridOps:
    """Sparse difference, averaging and quadrature operators for one grid."""

    max_order = 3

    def __init__(self, n: int, L: float):
        if n < 5:
            raise ValueError(f"grid too coarse: n={n} < 5")
        self.n = int(n)
        self.L = float(L)
        self.h = self.L / (self.n - 1)
        self.nodes = np.linspace(0.0, self.L, self.n)
        self.mids = 0.5 * (self.nodes[1:] + self.nodes[:-1])

        w = np.full(self.n, self.h)
        w[[0, -1]] = 0.5 * self.h
        self.weights = {NODE: w, MID: np.full(self.n - 1, self.h)}

        h = self.h
        avg = sp.diags([0.5, 0.5], [0, 1], shape=(n - 1, n), format="csr")
        d1_mid = sp.diags([-1.0 / h, 1.0 / h], [0, 1], shape=(n - 1, n), format="csr")
        d1_node = _rows_to_csr(_node_derivative(n, 1), (n, n)) / h
        d2_node = _rows_to_csr(_node_derivative(n, 2), (n, n)) / h**2
        d3_mid = _rows_to_csr(_mid_derivative(n, 3), (n - 1, n)) / h**3
        self._ops = {
            (0, NODE): sp.identity(n, format="csr"),
            (1, NODE): d1_node,
            (2, NODE): d2_node,
            (0, MID): avg,
            (1, MID): d1_mid,
            (2, MID): (avg @ d2_node).tocsr(),
            (3, MID): d3_mid,
        }

        self._ghost_ops = self._build_ghost_ops()

    def _build_ghost_ops(self) -> dict:
        n, h = self.n, self.h
        d1c = fd_weights([-1, 0, 1], 1) / h
        d2c = fd_weights([-1, 0, 1], 2) / h**2
        d3c = fd_weights([-1, 0, 1, 2], 3, x0=0.5) / h**3
        # extended index = physical index + 1
        node_rows = lambda w, offs: [([k + 1 + o for o in offs], w) for k in range(n)]
        mid_rows = lambda w, offs: [([k + 1 + o for o in offs], w) for k in range(n - 1)]
        shape_n, shape_m = (n, n + 2), (n - 1, n + 2)
        d2n = _rows_to_csr(node_rows(d2c, (-1, 0, 1)), shape_n)
        avg = _rows_to_csr(mid_rows(np.array([0.5, 0.5]), (0, 1)), shape_m)
        return {
            (0, NODE): _rows_to_csr(node_rows(np.ones(1), (0,)), shape_n),
            (1, NODE): _rows_to_csr(node_rows(d1c, (-1, 0, 1)), shape_n),
            (2, NODE): d2n,
            (0, MID): avg,
            (1, MID): _rows_to_csr(mid_rows(np.array([-1.0, 1.0]) / h, (0, 1)), shape_m),
            (2, MID): (avg[:, 1:-1] @ d2n).tocsr(),
            (3, MID): _rows_to_csr(mid_rows(d3c, (-1, 0, 1, 2)), shape_m),
        }

    def ghost_op(self, order: int, loc: str) -> sp.csr_matrix:
        """Centered operator acting on a ghost-extended array of length n + 2."""
        try:
            return self._ghost_ops[(order, loc)]
        except KeyError:
            raise ValueError(f"no derivative of order {order} at {loc}") from None

    def ghost_end_weights(self, order: int, end: str) -> tuple[np.ndarray, np.ndarray]:
        """(extended indices, weights) of an endpoint derivative on a ghosted grid."""
        if order == 0:
            offs, w = (0,), np.ones(1)
        elif order == 1:
            offs, w = SLOPE_OFFSETS, fd_weights(SLOPE_OFFSETS, 1)
        elif order == 2:
            offs, w = (-1, 0, 1), fd_weights([-1, 0, 1], 2)
        else:
            raise ValueError(f"no endpoint derivative of order {order} on a ghosted grid")
        offs = np.array(offs)
        if end == "0":
            idx = offs + 1
        else:
            idx = (self.n - 1 - offs) + 1
            w = w * (-1) ** order
        return idx, w / self.h**order

    def apply_ghost(self, order: int, loc: str, x_ext: np.ndarray) -> np.ndarray:
        flat = np.asarray(x_ext, dtype=float).reshape(self.n + 2, -1)
        out = self.ghost_op(order, loc) @ flat
        return out.reshape((out.shape[0],) + np.shape(x_ext)[1:])

    def extend(self, x: np.ndarray, slope_left, slope_right) -> np.ndarray:
        """Ghost-extended copy of ``x`` whose endpoint slopes equal the given ones."""
        x = np.asarray(x, dtype=float)
        out = np.zeros((self.n + 2,) + x.shape[1:])
        out[1:-1] = x
        for end, slope, ghost in (("0", slope_left, 0), ("L", slope_right, -1)):
            idx, w = self.ghost_end_weights(1, end)
            known = np.tensordot(w[1:], out[idx[1:]], axes=(0, 0))
            out[ghost] = (np.asarray(slope, dtype=float) - known) / w[0]
        return out

    def op(self, order: int, loc: str) -> sp.csr_matrix:
        try:
            return self._ops[(order, loc)]
        except KeyError:
            raise ValueError(f"no derivative of order {order} at {loc}") from None

    def apply(self, order: int, loc: str, x: np.ndarray) -> np.ndarray:
        """Derivative of ``x`` (grid along axis 0) sampled at ``loc``."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(self.n, -1)
        out = self.op(order, loc) @ flat
        return out.reshape((out.shape[0],) + x.shape[1:])

    def end_weights(self, order: int, end: str) -> tuple[np.ndarray, np.ndarray]:
        """(node indices, weights) of the one-sided derivative at an endpoint."""
        if order == 0:
            idx = np.array([0 if end == "0" else self.n - 1])
            return idx, np.ones(1)
        width = order + 2
        if width > self.n:
            raise ValueError(f"grid too coarse for a derivative of order {order}")
        if end == "0":
            idx = np.arange(width)
            w = fd_weights(idx, order, x0=0)
        else:
            idx = np.arange(self.n - width, self.n)
            w = fd_weights(idx, order, x0=self.n - 1)
        return idx, w / self.h**order

    def at_end(self, order: int, end: str, x: np.ndarray) -> np.ndarray:
        idx, w = self.end_weights(order, end)
        x = np.asarray(x, dtype=float)
        return np.tensordot(w, x[idx], axes=(0, 0))

    def integrate(self, values: np.ndarray, loc: str = NODE) -> np.ndarray:
        """Quadrature along axis 0: trapezoid on nodes, midpoint rule on cells."""
        return np.tensordot(self.weights[loc], values, axes=(0, 0))


@lru_cache(maxsize=32)
def grid_ops(n: int, L: float) -> GridOps:
    return GridOps(n, L)
