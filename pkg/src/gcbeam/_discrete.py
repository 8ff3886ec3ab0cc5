"""Discrete operators shared by the assembly probe and the solver.

The discrete unknown vector is node-major: entry ``(k + G) * m + p`` holds
field ``p`` at node ``k``, where ``k`` runs over ``-G .. n-1+G`` and ``G`` is
1 when any field carries ghost nodes.  Ghost slots of fields without ghosts
are pinned to zero by identity constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import field_index, parse_dof
from .stencils import NODE, GridOps, grid_ops


class IllPosedError(RuntimeError):
    """The anchoring leaves a zero-energy mode."""

    def __init__(self, message, mode_fields=()):
        super().__init__(message)
        self.mode_fields = tuple(mode_fields)


class SolverError(RuntimeError):
    """The linear solve failed or did not meet its residual tolerance."""


@dataclass(frozen=True)
class Layout:
    fields: tuple[str, ...]
    ghosted: tuple[bool, ...]
    n: int

    @property
    def m(self) -> int:
        return len(self.fields)

    @property
    def G(self) -> int:
        return 1 if any(self.ghosted) else 0

    @property
    def n_ext(self) -> int:
        return self.n + 2 * self.G

    @property
    def size(self) -> int:
        return self.n_ext * self.m

    def index(self, p: int, k) -> np.ndarray:
        return (np.asarray(k) + self.G) * self.m + p


def make_layout(fields, half_orders: dict, n: int) -> Layout:
    return Layout(tuple(fields), tuple(half_orders[f] >= 2 for f in fields), n)


def _field_op(lay: Layout, g: GridOps, p: int, order: int, loc: str) -> sp.csr_matrix:
    """Operator from one field's extended samples (length n_ext) to ``loc``."""
    if lay.ghosted[p]:
        return g.ghost_op(order, loc)
    op = g.op(order, loc)
    if lay.G:
        op = sp.hstack([sp.csr_matrix((op.shape[0], 1)), op, sp.csr_matrix((op.shape[0], 1))])
    return op.tocsr()


def _select(lay: Layout, p: int) -> sp.csr_matrix:
    return sp.csr_matrix(([1.0], ([0], [p])), shape=(1, lay.m))


def strain_operator(lay: Layout, g: GridOps, term) -> sp.csr_matrix:
    index = {f: k for k, f in enumerate(lay.fields)}
    G = None
    for coef, r, label in term.parts:
        blk = coef * sp.kron(_field_op(lay, g, index[label], r, term.loc), _select(lay, index[label]))
        G = blk if G is None else G + blk
    return G.tocsr()


def hessian(lay: Layout, g: GridOps, terms) -> sp.csr_matrix:
    H = sp.csr_matrix((lay.size, lay.size))
    for t in terms:
        Gt = strain_operator(lay, g, t)
        H = H + t.kappa * (Gt.T @ sp.diags(g.weights[t.loc]) @ Gt)
    return H.tocsr()


def end_row(lay: Layout, g: GridOps, p: int, order: int, end: str) -> sp.csr_matrix:
    """Row functional giving the ``order``-th derivative of field ``p`` at ``end``."""
    if lay.ghosted[p]:
        idx, w = g.ghost_end_weights(order, end)
        cols = (idx - 1 + lay.G) * lay.m + p
    else:
        idx, w = g.end_weights(order, end)
        cols = lay.index(p, idx)
    return sp.csr_matrix((w, (np.zeros(len(cols), int), cols)), shape=(1, lay.size))


def load_vector(lay: Layout, g: GridOps, bulk: np.ndarray, tractions: dict) -> np.ndarray:
    """Discrete work functional: trapezoid bulk pairing plus end pairings.

    ``bulk`` has shape (n, m); ``tractions`` maps (end, DOF label) to value.
    """
    F = np.zeros(lay.size)
    w = g.weights[NODE]
    for p in range(lay.m):
        F[lay.index(p, np.arange(lay.n))] += w * bulk[:, p]
    index = {f: k for k, f in enumerate(lay.fields)}
    for (end, dof), value in tractions.items():
        base, order = parse_dof(dof)
        F += value * end_row(lay, g, index[base], order, end).toarray().ravel()
    return F


def constraints(lay: Layout, g: GridOps, anchors: dict):
    """Anchor rows grouped by (end, field): {(end, p): (rows csr, values)}."""
    index = {f: k for k, f in enumerate(lay.fields)}
    groups: dict = {}
    for (end, dof), value in anchors.items():
        base, order = parse_dof(dof)
        p = index[base]
        groups.setdefault((end, p), []).append((end_row(lay, g, p, order, end), value))
    if lay.G:
        for p, ghosted in enumerate(lay.ghosted):
            if ghosted:
                continue
            for end, k in (("0", -1), ("L", lay.n)):
                row = sp.csr_matrix(([1.0], ([0], [lay.index(p, k)])), shape=(1, lay.size))
                groups.setdefault((f"ghost{end}", p), []).append((row, 0.0))
    out = {}
    for key, items in groups.items():
        out[key] = (sp.vstack([r for r, _ in items]).tocsr(), np.array([v for _, v in items]))
    return out


def all_constraints(groups) -> tuple[sp.csr_matrix, np.ndarray]:
    if not groups:
        return None, np.zeros(0)
    rows = sp.vstack([c for c, _ in groups.values()]).tocsr()
    vals = np.concatenate([v for _, v in groups.values()])
    return rows, vals


def constrained_system(A: sp.csr_matrix, F: np.ndarray, groups) -> tuple[sp.csr_matrix, np.ndarray]:
    """Square system whose solution minimises ``x.A.x/2 - F.x`` under the anchors.

    For each anchor group a set of pivot unknowns is chosen (QR with column
    pivoting on the local constraint block).  Pivot rows become the anchor
    equations; every other row ``j`` becomes ``(Z^T (A x - F))_j`` with the
    local null-space basis ``Z``, so locality and bandedness are preserved.
    """
    size = A.shape[0]
    T = sp.lil_matrix((size, size))
    T.setdiag(1.0)
    C_rows, C_cols, C_vals = [], [], []
    rhs_extra = np.zeros(size)
    for key, (C, values) in groups.items():
        cols = np.unique(C.indices)
        B = C[:, cols].toarray()
        k = B.shape[0]
        _, R, perm = sla.qr(B, pivoting=True, mode="economic")
        if k > len(cols) or abs(R[k - 1, k - 1]) <= 1e-12 * abs(R[0, 0]):
            raise IllPosedError(f"redundant or conflicting anchors in group {key}")
        piv, rest = cols[perm[:k]], cols[perm[k:]]
        Cp, Cr = B[:, perm[:k]], B[:, perm[k:]]
        Z = -np.linalg.solve(Cp, Cr)  # x_piv = Cp^-1 v + Z x_rest
        for i, pi in enumerate(piv):
            T[pi, pi] = 0.0
            for jj, rj in enumerate(rest):
                if Z[i, jj] != 0.0:
                    T[rj, pi] = Z[i, jj]
        for i, pi in enumerate(piv):
            row = C.getrow(i)
            C_rows.extend([pi] * row.nnz)
            C_cols.extend(row.indices.tolist())
            C_vals.extend(row.data.tolist())
            rhs_extra[pi] = values[i]
    T = T.tocsr()
    M = (T @ A + sp.csr_matrix((C_vals, (C_rows, C_cols)), shape=(size, size))).tocsr()
    M.eliminate_zeros()
    return M, T @ F + rhs_extra


def banded_solve(M: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    coo = M.tocoo()
    lower = int(max(0, np.max(coo.row - coo.col))) if coo.nnz else 0
    upper = int(max(0, np.max(coo.col - coo.row))) if coo.nnz else 0
    ab = np.zeros((lower + upper + 1, M.shape[0]))
    ab[upper + coo.row - coo.col, coo.col] = coo.data
    try:
        x = sla.solve_banded((lower, upper), ab, rhs, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"banded factorisation failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("banded solve produced non-finite values")
    return x


def strain_stack(lay: Layout, g: GridOps, terms) -> sp.csr_matrix:
    """``B`` with ``B^T B = hessian / h``: weighted strain rows of every term."""
    blocks = [
        sp.diags(np.sqrt(t.kappa * g.weights[t.loc] / g.h)) @ strain_operator(lay, g, t) for t in terms
    ]
    if not blocks:
        return sp.csr_matrix((0, lay.size))
    return sp.vstack(blocks).tocsr()


def augmented_solve(B: sp.csr_matrix, F: np.ndarray, C, v: np.ndarray) -> np.ndarray:
    """Minimiser of ``|B x|^2 / 2 - F.x`` under ``C x = v`` via the augmented system.

    Solving ``[[-I, B, 0], [B^T, 0, C^T], [0, C, 0]]`` instead of the
    stiffness system ``B^T B`` keeps the condition number near that of
    ``B``, its square root, which matters for sixth-order operators.
    """
    m, size = B.shape
    C = sp.csr_matrix((0, size)) if C is None else C
    K = sp.bmat(
        [[-sp.identity(m), B, None], [B.T, None, C.T], [None, C, None]], format="csc"
    )
    rhs = np.concatenate([np.zeros(m), F, v])
    try:
        sol = spla.splu(K).solve(rhs)
    except RuntimeError as exc:  # exactly singular factor
        raise SolverError(f"augmented factorisation failed: {exc}") from exc
    x = sol[m : m + size]
    if not np.all(np.isfinite(x)):
        raise SolverError("augmented solve produced non-finite values")
    return x


def residual_ok(M, x, rhs, rtol=1e-10) -> tuple[bool, float, float]:
    r = np.max(np.abs(M @ x - rhs)) if len(rhs) else 0.0
    normA = np.max(np.abs(M).sum(axis=1)) if M.nnz else 0.0
    bound = rtol * (normA * np.max(np.abs(x), initial=0.0) + np.max(np.abs(rhs), initial=0.0))
    return r <= bound, float(r), float(bound)


def null_mode_probe(fields, half_orders: dict, terms, anchors: dict, L: float, rel_tol=1e-12):
    """Smallest constrained eigenpair of the discrete Hessian on a coarse grid.

    Returns ``None`` when the problem is positive definite on the anchored
    space, otherwise the labels carrying the zero-energy mode.
    """
    max_order = 2 * max(half_orders.values(), default=1)
    n0 = max(2 * max_order + 5, 9)
    g = grid_ops(n0, L)
    lay = make_layout(fields, half_orders, n0)
    H = hessian(lay, g, terms).toarray()
    C, _ = all_constraints(constraints(lay, g, anchors))
    Z = np.eye(lay.size) if C is None else sla.null_space(C.toarray())
    if Z.shape[1] == 0:
        return None
    K = Z.T @ H @ Z
    K = 0.5 * (K + K.T)
    vals, vecs = np.linalg.eigh(K)
    top = max(abs(vals[-1]), 0.0)
    if top > 0 and vals[0] > rel_tol * top:
        return None
    mode = (Z @ vecs[:, 0]).reshape(lay.n_ext, lay.m)
    weight = np.sqrt(np.sum(mode**2, axis=0))
    labels = [f for f, w in zip(fields, weight) if w >= 0.1 * weight.max()]
    return labels


def field_kind(label: str) -> str:
    return field_index(label)[0]
