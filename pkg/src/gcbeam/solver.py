"""Finite-difference discretisation and banded solve of a LinearBVP.

The discrete operator is the Hessian of the discretised energy, divided by
the grid spacing so that interior rows coincide with the centered stencils
of the strong form (for instance ``(1, -2, 1)/h^2`` for ``u''``).  Natural
boundary rows therefore come out of the same quadrature and need no
separate flux stencils, and the operator is exactly symmetric before the
anchor rows are substituted.

The anchored banded system is factorised directly unless the energy holds
a third derivative (holonomic regime with ``c > 0``).  Its sixth-order
operator has a condition number near ``(2 n / pi)^6``, beyond double
precision at the default grid, so that case solves the equivalent
augmented least-squares system whose conditioning is the square root.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import _discrete as D
from ._discrete import IllPosedError, Layout, SolverError
from .assembly import LinearBVP
from .model import FieldState, Regime, field_index
from .stencils import NODE, GridOps, grid_ops

DEFAULT_N = 401
RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class DiscreteSystem:
    """Square banded system of one BVP on one grid."""

    bvp: LinearBVP
    n: int
    h: float
    matrix: sp.csr_matrix
    rhs_vector: np.ndarray
    layout: Layout
    hessian: sp.csr_matrix  # unconstrained operator (energy Hessian / h)
    load: np.ndarray  # unconstrained load vector / h
    method: str = "banded"  # or "augmented"

    @property
    def nodes(self) -> np.ndarray:
        return grid_ops(self.n, self.bvp.config.L).nodes

    @property
    def dof_map(self) -> dict:
        """(unknown label, grid index) -> row; ghost nodes carry index -1 and n."""
        lay = self.layout
        out = {}
        for p, label in enumerate(lay.fields):
            for k in range(-lay.G, self.n + lay.G):
                out[(label, k)] = int(lay.index(p, k))
        return out

    @property
    def bandwidth(self) -> int:
        coo = self.matrix.tocoo()
        return int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0


def discretize(bvp: LinearBVP, n: int = DEFAULT_N, method: str = "auto") -> DiscreteSystem:
    """Assemble the anchored banded system on ``n`` uniform nodes.

    ``method`` is ``"banded"``, ``"augmented"`` or ``"auto"`` (augmented
    exactly when some term holds a third derivative).
    """
    if method == "auto":
        method = "augmented" if any(t.order >= 3 for t in bvp.terms) else "banded"
    if method not in ("banded", "augmented"):
        raise ValueError(f"unknown solve method {method!r}")
    max_order = max(bvp.order.values(), default=0)
    if n < max(2 * max_order + 1, 5):
        raise ValueError(f"grid too coarse: n={n} < {max(2 * max_order + 1, 5)} for order {max_order}")
    g = grid_ops(int(n), bvp.config.L)
    lay = D.make_layout(bvp.unknowns, bvp.half_orders, g.n)
    A = D.hessian(lay, g, bvp.terms) / g.h
    natural = {
        (row.end, row.dof): row.value
        for end in ("0", "L")
        for row in bvp.boundary_rows[end]
        if row.kind == "natural" and row.value != 0.0
    }
    F = D.load_vector(lay, g, bvp.rhs(g.nodes), natural) / g.h
    groups = D.constraints(lay, g, bvp.anchors)
    M, rhs = D.constrained_system(A, F, groups)
    return DiscreteSystem(bvp, g.n, g.h, M, rhs, lay, A, F, method)


def solve_vector(ds: DiscreteSystem) -> np.ndarray:
    """Raw solution vector in the layout of ``ds``."""
    try:
        if ds.method == "augmented":
            g = grid_ops(ds.n, ds.bvp.config.L)
            C, v = D.all_constraints(D.constraints(ds.layout, g, ds.bvp.anchors))
            x = D.augmented_solve(D.strain_stack(ds.layout, g, ds.bvp.terms), ds.load, C, v)
        else:
            x = D.banded_solve(ds.matrix, ds.rhs_vector)
    except SolverError:
        mode = D.null_mode_probe(
            list(ds.bvp.unknowns), ds.bvp.half_orders, ds.bvp.terms, ds.bvp.anchors, ds.bvp.config.L
        )
        if mode is not None:
            raise IllPosedError(f"singular system: zero-energy mode in {', '.join(mode)}", mode) from None
        raise
    ok, res, bound = D.residual_ok(ds.matrix, x, ds.rhs_vector, RESIDUAL_RTOL)
    if not ok:
        raise SolverError(f"residual {res:.3e} exceeds tolerance {bound:.3e}")
    return x


def solve(ds: DiscreteSystem) -> FieldState:
    """Solve the discrete system and expand to a full field state."""
    return expand_solution(ds, solve_vector(ds))


def field_columns(ds: DiscreteSystem, x: np.ndarray) -> np.ndarray:
    """Extended samples (n + 2G, m) of each unknown."""
    return np.asarray(x).reshape(ds.layout.n_ext, ds.layout.m)


def _derivatives(g: GridOps, ext: np.ndarray, ghosted: bool, G: int, order: int) -> np.ndarray:
    """Nodal derivative of one field; endpoint values use the boundary-DOF stencils."""
    if ghosted:
        out = g.apply_ghost(order, NODE, ext)
        for end, k in (("0", 0), ("L", -1)):
            idx, w = g.ghost_end_weights(order, end)
            out[k] = w @ ext[idx]
        return out
    phys = ext[G : G + g.n] if G else ext
    return g.apply(order, NODE, phys)


def expand_solution(ds: DiscreteSystem, x: np.ndarray) -> FieldState:
    """Place the solved unknowns into a 39-field state.

    Fields outside the system stay zero.  In the reduced regimes the
    derived arrays are filled as the energy expects them: ``N[..., 0] = P'``
    and the frozen transversal constants (semi-holonomic), or ``P[:, :, 0] =
    u'``, ``N[:, :, 0, 0] = u''`` and the frozen slopes (holonomic).
    """
    bvp = ds.bvp
    cfg = bvp.config
    lay = ds.layout
    g = grid_ops(ds.n, cfg.L)
    cols = field_columns(ds, x)
    G = lay.G
    arrays = {"u": np.zeros((g.n, 3)), "P": np.zeros((g.n, 3, 3)), "N": np.zeros((g.n, 3, 3, 3))}
    for p, label in enumerate(lay.fields):
        kind, comp = field_index(label)
        arrays[kind][(slice(None),) + comp] = cols[G : G + g.n, p]
    u, P, N = arrays["u"], arrays["P"], arrays["N"]
    if cfg.regime == Regime.SemiHolonomic:
        if cfg.frozen_N_jalpha is not None:
            N[:, :, :, 1:] = cfg.frozen_N_jalpha
        for p, label in enumerate(lay.fields):
            kind, comp = field_index(label)
            if kind == "P":
                i, j = comp
                N[:, i, j, 0] = _derivatives(g, cols[:, p], lay.ghosted[p], G, 1)
    elif cfg.regime == Regime.Holonomic:
        if cfg.frozen_u_alpha_slope is not None:
            slope = cfg.frozen_u_alpha_slope
            P[:, :, 1:] = slope[None] * g.nodes[:, None, None]
            N[:, :, 0, 1:] = slope
            N[:, :, 1:, 0] = slope
        for p, label in enumerate(lay.fields):
            _, (i,) = field_index(label)
            P[:, i, 0] = _derivatives(g, cols[:, p], lay.ghosted[p], G, 1)
            N[:, i, 0, 0] = _derivatives(g, cols[:, p], lay.ghosted[p], G, 2)
    return FieldState(g.nodes.copy(), u, P, N)


def unknown_values(bvp: LinearBVP, state: FieldState) -> np.ndarray:
    """Nodal values (n, m) of the BVP's unknowns in a state."""
    out = np.empty((state.n, len(bvp.unknowns)))
    arrays = {"u": state.u, "P": state.P, "N": state.N}
    for p, label in enumerate(bvp.unknowns):
        kind, comp = field_index(label)
        out[:, p] = arrays[kind][(slice(None),) + comp]
    return out


@dataclass(frozen=True)
class RefinementTable:
    n: tuple[int, ...]
    h: tuple[float, ...]
    errors: tuple[float, ...]
    orders: tuple[float, ...]  # observed order between consecutive rows (nan for the first)

    def rows(self):
        return list(zip(self.n, self.h, self.errors, self.orders))


def grid_refinement_study(
    bvp: LinearBVP,
    n_list: Sequence[int],
    reference: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> RefinementTable:
    """L-infinity nodal errors of the unknowns and observed orders.

    ``reference(X)`` returns the exact unknowns, shape (len(X), m).  Without
    it the finest grid in ``n_list`` serves as reference, so every other
    grid must be nested in it.
    """
    n_list = sorted(int(n) for n in n_list)
    sols = {n: unknown_values(bvp, solve(discretize(bvp, n))) for n in n_list}
    if reference is None:
        finest = n_list[-1]
        ref_sol = sols[finest]
        n_list = n_list[:-1]
        def reference(X, _f=finest):
            stride = (_f - 1) // (len(X) - 1)
            if (len(X) - 1) * stride != _f - 1:
                raise ValueError("grids are not nested in the finest one")
            return ref_sol[::stride]
    hs, errs = [], []
    for n in n_list:
        X = np.linspace(0.0, bvp.config.L, n)
        errs.append(float(np.max(np.abs(sols[n] - reference(X)))))
        hs.append(bvp.config.L / (n - 1))
    orders = [float("nan")]
    for k in range(1, len(errs)):
        if errs[k] > 0 and errs[k - 1] > 0:
            orders.append(float(np.log(errs[k - 1] / errs[k]) / np.log(hs[k - 1] / hs[k])))
        else:
            orders.append(float("nan"))
    return RefinementTable(tuple(n_list), tuple(hs), tuple(errs), tuple(orders))
