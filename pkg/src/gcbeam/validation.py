"""Independent oracles, classical beam references and the penalty-limit sweeps.

``oracle_minimize`` shares nothing with the solver beyond the grid
stencils: it probes the energy module's discrete energy with a batch of
unit states, assembles the dense Hessian and gradient, eliminates the
anchors through a sparse null-space basis and finishes with a Cholesky
solve.  When the energy holds a third derivative the reduced Hessian is
too ill-conditioned for that, and the reduced least-squares problem is
solved through its augmented system instead.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import energy as E
from . import terms as T
from .assembly import assemble_full
from .model import (
    BeamConfig,
    BoundarySpec,
    FieldState,
    LoadSet,
    N_label,
    P_label,
    Regime,
    derivative_label,
    field_index,
    parse_dof,
    regime_fields,
    u_label,
    validate_config,
)
from .solver import DEFAULT_N, discretize, solve
from .stencils import MID, NODE, grid_ops

ALPHA = (1, 2)


class IndefiniteHessianError(RuntimeError):
    """The reduced discrete Hessian is not positive definite."""


# ---------------------------------------------------------------------------
# oracle


def _basis(config: BeamConfig, n: int, fields):
    """Affine parametrisation ``state = offset + basis @ x`` of the discrete DOFs.

    Returns the batched arrays of the offset (one column) and of the basis
    (one column per DOF).  Ghosted fields get two extra DOFs each, their
    endpoint slopes.
    """
    ghost = E.ghosted_field(config)
    dofs = []
    for label in fields:
        kind, comp = field_index(label)
        for k in range(n):
            dofs.append((kind, (k,) + comp))
        if kind == ghost:
            for k in (0, n - 1):
                if kind == "P":
                    dofs.append(("N", (k,) + comp + (0,)))
                else:
                    dofs.append(("P", (k,) + comp + (0,)))
    B = len(dofs)
    arrays = {
        "u": np.zeros((n, 3, B)),
        "P": np.zeros((n, 3, 3, B)),
        "N": np.zeros((n, 3, 3, 3, B)),
    }
    for col, (kind, idx) in enumerate(dofs):
        arrays[kind][idx + (col,)] = 1.0
    off = {"u": np.zeros((n, 3, 1)), "P": np.zeros((n, 3, 3, 1)), "N": np.zeros((n, 3, 3, 3, 1))}
    X = np.linspace(0.0, config.L, n)
    if config.regime == Regime.SemiHolonomic and config.frozen_N_jalpha is not None:
        off["N"][:, :, :, 1:, 0] = config.frozen_N_jalpha
    if config.regime == Regime.Holonomic and config.frozen_u_alpha_slope is not None:
        s = config.frozen_u_alpha_slope
        off["P"][:, :, 1:, 0] = s[None] * X[:, None, None]
        off["N"][:, :, 0, 1:, 0] = s
        off["N"][:, :, 1:, 0, 0] = s
    return X, dofs, arrays, off


def _strains(ev, config):
    out = []
    for group, kappa, loc, strain in E._internal_terms(ev, config):
        if kappa != 0.0:
            out.append((kappa, loc, strain.reshape(strain.shape[0], -1, strain.shape[-1])))
    return out


def _to_state(config, X, dofs, off, x) -> FieldState:
    arrays = {k: v[..., 0].copy() for k, v in off.items()}
    for (kind, idx), v in zip(dofs, x):
        arrays[kind][idx] += v
    g = grid_ops(len(X), config.L)
    ghost = E.ghosted_field(config)
    u, P, N = arrays["u"], arrays["P"], arrays["N"]
    if config.regime == Regime.SemiHolonomic:
        if ghost == "P":
            ext = g.extend(P, N[0, :, :, 0], N[-1, :, :, 0])
            inner = g.apply_ghost(1, NODE, ext)
            N[1:-1, :, :, 0] = inner[1:-1]
        else:
            N[:, :, :, 0] = g.apply(1, NODE, P)
    elif config.regime == Regime.Holonomic:
        if ghost == "u":
            ext = g.extend(u, P[0, :, 0], P[-1, :, 0])
            P[1:-1, :, 0] = g.apply_ghost(1, NODE, ext)[1:-1]
            N[:, :, 0, 0] = g.apply_ghost(2, NODE, ext)
            for end, k in (("0", 0), ("L", -1)):
                idx, w = g.ghost_end_weights(2, end)
                N[k, :, 0, 0] = np.tensordot(w, ext[idx], axes=(0, 0))
        else:
            P[:, :, 0] = g.apply(1, NODE, u)
            N[:, :, 0, 0] = g.apply(2, NODE, u)
    return FieldState(X, u, P, N)


def _anchor_elimination(C: np.ndarray, v: np.ndarray, B: int):
    """Particular solution and sparse null-space basis of ``C x = v``.

    Pivot unknowns are chosen by column-pivoted QR on the columns the
    anchors touch and expressed through the remaining ones.
    """
    if len(C) == 0:
        return np.zeros(B), sp.identity(B, format="csr")
    cols = np.flatnonzero(np.any(C != 0.0, axis=0))
    Cc = C[:, cols]
    _, R, perm = sla.qr(Cc, pivoting=True, mode="economic")
    k = len(C)
    if k > len(cols) or abs(R[k - 1, k - 1]) <= 1e-12 * abs(R[0, 0]):
        raise ValueError("redundant or conflicting anchors")
    piv = cols[perm[:k]]
    free = np.setdiff1d(np.arange(B), piv)
    Cp_inv = np.linalg.inv(C[:, piv])
    x0 = np.zeros(B)
    x0[piv] = Cp_inv @ v
    dep = -Cp_inv @ C[:, free]  # pivot values per unit free value
    Z = sp.lil_matrix((B, len(free)))
    Z[free, np.arange(len(free))] = 1.0
    for i, p in enumerate(piv):
        nz = np.flatnonzero(dep[i])
        Z[p, nz] = dep[i, nz]
    return x0, Z.tocsr()


def oracle_minimize(
    config: BeamConfig,
    loads: LoadSet,
    bcs: BoundarySpec,
    n: int = 101,
    fields: Optional[Sequence[str]] = None,
) -> FieldState:
    """Minimise the discrete potential energy directly over the free DOFs.

    ``fields`` restricts the minimisation to a subset of the regime's
    unknowns (the others are held at zero), which keeps subsystem checks
    cheap.
    """
    report = validate_config(config, bcs, loads)
    if not report.ok:
        raise ValueError("; ".join(report.violations))
    fields = list(regime_fields(config.regime) if fields is None else fields)
    X, dofs, basis, off = _basis(config, n, fields)
    ev_b = E._Discrete(config, X, basis["u"], basis["P"], basis["N"])
    ev_0 = E._Discrete(config, X, off["u"], off["P"], off["N"])
    g = ev_b.g
    B = len(dofs)
    H = sp.csr_matrix((B, B))
    grad = np.zeros(B)
    roots = []  # sqrt(kappa W) S, whose Gram matrix is H
    for (kappa, loc, S), (_, _, S0) in zip(_strains(ev_b, config), _strains(ev_0, config)):
        # unit-state strains are very sparse
        Sf = sp.csr_matrix(S.reshape(-1, B))
        wts = np.repeat(g.weights[loc], S.shape[1])
        WS = (sp.diags(wts) @ Sf).tocsr()
        H = H + kappa * (Sf.T @ WS)
        grad += kappa * (WS.T @ S0.reshape(-1))
        roots.append(sp.diags(np.sqrt(kappa * wts)) @ Sf)
    grad += 0.5 * np.ravel(E._linear_internal(ev_b, config)) * np.ones(B)
    grad -= np.ravel(E._external(ev_b, config, loads, X))
    H = (0.5 * (H + H.T)).tocsr()

    # anchors: rows of boundary-DOF values, offset included
    rows, vals = [], []
    keep = set(fields)
    for (end, dof), value in sorted(bcs.anchors.items()):
        base, order = parse_dof(dof)
        if base not in keep:
            continue
        kind, comp = field_index(base)
        rows.append(np.ravel(ev_b.end(kind, order, end)[comp]))
        vals.append(value - float(np.ravel(ev_0.end(kind, order, end)[comp])[0]))
    x0, Z = _anchor_elimination(np.array(rows).reshape(len(rows), B), np.array(vals), B)
    r = -(Z.T @ (grad + H @ x0))
    if config.regime == Regime.Holonomic and config.c != 0.0:
        R = (sp.vstack(roots) @ Z).tocsc()
        m = R.shape[0]
        Kaug = sp.bmat([[-sp.identity(m), R], [R.T, None]], format="csc")
        try:
            y = spla.splu(Kaug).solve(np.concatenate([np.zeros(m), r]))[m:]
        except RuntimeError as exc:
            raise IndefiniteHessianError("reduced Hessian is singular") from exc
        return _to_state(config, X, dofs, off, x0 + Z @ y)
    K = (Z.T @ H @ Z).toarray()
    try:
        factor = sla.cho_factor(K)
    except np.linalg.LinAlgError as exc:
        raise IndefiniteHessianError("reduced Hessian is not positive definite") from exc
    y = sla.cho_solve(factor, r)
    return _to_state(config, X, dofs, off, x0 + Z @ y)


# ---------------------------------------------------------------------------
# classical references


def classical_reference(kind: str, params: dict):
    """Closed-form deflection ``w(X)`` of a classical beam.

    ``kind`` is ``"EulerBernoulli"`` or ``"Timoshenko"``.  ``params`` holds
    ``EI``, ``L``, optional ``F`` (tip force), ``q`` (uniform load), ``kGA``
    (Timoshenko only) and ``support`` (``"cantilever"`` or
    ``"simply-supported"``; the tip force only applies to cantilevers).
    """
    if kind not in ("EulerBernoulli", "Timoshenko"):
        raise ValueError(f"unsupported beam theory {kind!r}")
    EI = float(params["EI"])
    L = float(params["L"])
    F = float(params.get("F", 0.0))
    q = float(params.get("q", 0.0))
    support = params.get("support", "cantilever")
    shear = kind == "Timoshenko"
    kGA = float(params["kGA"]) if shear else np.inf

    if support == "cantilever":
        def w(X):
            X = np.asarray(X, dtype=float)
            out = F * X**2 * (3 * L - X) / (6 * EI) + q * X**2 * (6 * L**2 - 4 * L * X + X**2) / (24 * EI)
            if shear:
                out = out + F * X / kGA + q * (L * X - X**2 / 2) / kGA
            return out
    elif support == "simply-supported":
        if F:
            raise ValueError("tip force is only defined for the cantilever preset")
        def w(X):
            X = np.asarray(X, dtype=float)
            out = q * X * (L**3 - 2 * L * X**2 + X**3) / (24 * EI)
            if shear:
                out = out + q * X * (L - X) / (2 * kGA)
            return out
    else:
        raise ValueError(f"unsupported support preset {support!r}")
    return w


# ---------------------------------------------------------------------------
# boundary conditions across regimes


def compatible_anchors(config: BeamConfig, end: str, u, slope=None) -> BoundarySpec:
    """Anchors of every boundary DOF at ``end`` taken from a holonomic template.

    ``u(X, k)`` gives the k-th derivative of the template displacement,
    shape (3,) at a scalar ``X``; ``slope`` holds the constants
    ``u^i_{,alpha 1}``.  The template kinematics are ``P^i_1 = u^i'``,
    ``P^i_alpha = slope X``, ``N = grad P``, so the anchors are consistent
    with every regime at once.
    """
    slope = np.zeros((3, 2)) if slope is None else np.asarray(slope, dtype=float)
    X = 0.0 if end == "0" else config.L
    u0, u1, u2 = (np.asarray(u(X, k), dtype=float) for k in range(3))
    P = np.zeros((3, 3))
    P[:, 0] = u1
    P[:, 1:] = slope * X
    N = np.zeros((3, 3, 3))
    N[:, 0, 0] = u2
    N[:, 0, 1:] = slope
    N[:, 1:, 0] = slope
    dP = N[:, :, 0]
    values = {}
    for label in T.boundary_dofs(config):
        base, order = parse_dof(label)
        kind, comp = field_index(base)
        if kind == "u":
            values[(end, label)] = float([u0, u1, u2][order][comp])
        elif kind == "P":
            values[(end, label)] = float([P, dP][order][comp])
        else:
            values[(end, label)] = float(N[comp])
    return BoundarySpec(values)


def semiholonomic_limit(config: BeamConfig, bcs: BoundarySpec) -> tuple[BeamConfig, BoundarySpec]:
    """Semi-holonomic counterpart of a non-holonomic setup (e -> infinity).

    The frozen constants are the anchored values of ``N^i_{j alpha}``, which
    must be anchored for every component and agree between the two ends.
    Anchors of ``N^i_{j1}`` become anchors of ``P^i_{j,1}`` where that is a
    boundary DOF.
    """
    frozen = np.full((3, 3, 2), np.nan)
    for i, j, a in itertools.product(range(3), range(3), ALPHA):
        label = N_label(i, j, a)
        vals = [bcs.value(end, label) for end in ("0", "L") if bcs.is_anchored(end, label)]
        if not vals:
            raise ValueError(f"inconsistent BCs across regimes: {label} must be anchored")
        if any(abs(v - vals[0]) > 1e-12 * max(1.0, abs(vals[0])) for v in vals):
            raise ValueError(f"inconsistent BCs across regimes: {label} differs between the ends")
        frozen[i, j, a - 1] = vals[0]
    semi = config.replace(regime=Regime.SemiHolonomic, frozen_N_jalpha=frozen, e=0.0)
    dofs = set(T.boundary_dofs(semi))
    anchors = {}
    for (end, label), value in bcs.anchors.items():
        kind, comp = field_index(parse_dof(label)[0])
        if kind == "N":
            if comp[2] != 0:
                continue
            label = derivative_label(P_label(comp[0], comp[1]), 1)
        if label in dofs:
            anchors[(end, label)] = value
    return semi, BoundarySpec(anchors)


def holonomic_limit(config: BeamConfig, bcs: BoundarySpec) -> tuple[BeamConfig, BoundarySpec]:
    """Holonomic counterpart of a semi-holonomic setup (d -> infinity).

    Every ``P^i_alpha`` must be anchored somewhere, to the value
    ``Nbar^i_{1 alpha} X`` of the holonomic transversal gradient; the frozen
    slopes are ``Nbar^i_{1 alpha}``.  ``P^i_1`` and ``P^i_{1,1}`` anchors
    become anchors of ``u^i'`` and ``u^i''``.
    """
    frozen = np.zeros((3, 3, 2)) if config.frozen_N_jalpha is None else config.frozen_N_jalpha
    for i, a in itertools.product(range(3), ALPHA):
        label = P_label(i, a)
        ends = [end for end in ("0", "L") if bcs.is_anchored(end, label)]
        if not ends:
            raise ValueError(f"inconsistent BCs across regimes: {label} must be anchored")
        for end in ends:
            expected = frozen[i, 0, a - 1] * (0.0 if end == "0" else config.L)
            if abs(bcs.value(end, label) - expected) > 1e-12 * max(1.0, abs(expected)):
                raise ValueError(f"inconsistent BCs across regimes: {label}({end}) differs from the holonomic gradient")
    holo = config.replace(
        regime=Regime.Holonomic,
        frozen_N_jalpha=None,
        frozen_u_alpha_slope=np.array(frozen[:, 0, :]),
        d=0.0,
    )
    dofs = set(T.boundary_dofs(holo))
    anchors = {}
    for (end, label), value in bcs.anchors.items():
        base, order = parse_dof(label)
        kind, comp = field_index(base)
        if kind == "P":
            if comp[1] != 0:
                continue
            label = derivative_label(u_label(comp[0]), order + 1)
        if label in dofs:
            anchors[(end, label)] = value
    return holo, BoundarySpec(anchors)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepResult:
    modulus: str
    values: np.ndarray
    gaps: dict  # name -> array over values
    internal_gap: str  # key of the constraint gap in ``gaps``
    exponent: float
    tip: np.ndarray = field(default_factory=lambda: np.zeros(0))  # max |u(L)| of each solve
    limit_tip: float = float("nan")
    # floating-point resolution of the constraint gap: the gap is a difference
    # quotient of O(1) fields, so it cannot be resolved below ~eps * |field| / h
    resolution: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def column(self, name: str) -> np.ndarray:
        return self.gaps[name]

    def write_csv(self, path: str) -> None:
        names = list(self.gaps)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([self.modulus] + names + ["tip"])
            for k, v in enumerate(self.values):
                w.writerow([f"{v:.17g}"] + [f"{self.gaps[c][k]:.17g}" for c in names] + [f"{self.tip[k]:.17g}"])
            w.writerow([f"# fitted exponent of {self.internal_gap}: {self.exponent:.17g}"])


def fit_exponent(values, gaps) -> float:
    """Least-squares slope of log(gap) against log(modulus)."""
    values, gaps = np.asarray(values, float), np.asarray(gaps, float)
    ok = gaps > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(values[ok]), np.log(gaps[ok]), 1)[0])


def _linf(x):
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


def _rel(x, ref):
    scale = _linf(ref)
    return _linf(x) / scale if scale > 0 else _linf(x)


def _resolution(h, *fields):
    return 8.0 * np.finfo(float).eps * sum((2.0 / h if k == 0 else 1.0) * _linf(f) for k, f in enumerate(fields))


def _check_values(values):
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or len(values) < 1 or np.any(np.diff(values) <= 0) or np.any(values <= 0):
        raise ValueError("sweep values must be positive and strictly increasing")
    return values


def e_limit_sweep(config: BeamConfig, loads: LoadSet, bcs: BoundarySpec, e_values, n: int = DEFAULT_N) -> SweepResult:
    """Non-holonomic solves at increasing ``e`` against the semi-holonomic limit.

    Gaps: ``u`` and ``P`` against the limit solution (relative L-infinity)
    and the constraint gap ``max |P^i_{j,1} - N^i_{j1}|`` at cell midpoints.
    """
    values = _check_values(e_values)
    if config.regime != Regime.NonHolonomic:
        raise ValueError("the e-sweep starts from the non-holonomic regime")
    X = np.linspace(0.0, config.L, 17)
    if np.any(loads.bulk(X)[2] != 0.0):
        raise ValueError("inconsistent BCs across regimes: f2 has no semi-holonomic counterpart")
    semi, semi_bcs = semiholonomic_limit(config, bcs)
    ref = solve(discretize(assemble_full(semi, loads, semi_bcs), n))
    g = grid_ops(n, config.L)
    gaps = {"u": [], "P": [], "N_minus_gradP": []}
    tip, res = [], []
    for e in values:
        s = solve(discretize(assemble_full(config.replace(e=float(e)), loads, bcs), n))
        gaps["u"].append(_rel(s.u - ref.u, ref.u))
        gaps["P"].append(_rel(s.P - ref.P, ref.P))
        gap = g.apply(1, MID, s.P) - g.apply(0, MID, s.N[:, :, :, 0])
        gaps["N_minus_gradP"].append(_linf(gap))
        res.append(_resolution(g.h, s.P, s.N[:, :, :, 0]))
        tip.append(_linf(s.u[-1]))
    gaps = {k: np.array(v) for k, v in gaps.items()}
    return SweepResult(
        "e", values, gaps, "N_minus_gradP", fit_exponent(values, gaps["N_minus_gradP"]),
        np.array(tip), _linf(ref.u[-1]), np.array(res),
    )


def d_limit_sweep(config: BeamConfig, loads: LoadSet, bcs: BoundarySpec, d_values, n: int = DEFAULT_N) -> SweepResult:
    """Semi-holonomic solves at increasing ``d`` against the holonomic limit.

    Gaps: ``u`` against the limit solution, ``P^i_1`` against the limit
    ``u^i'`` (relative L-infinity) and the constraint gap
    ``max |u^i' - P^i_1|`` at cell midpoints.
    """
    values = _check_values(d_values)
    if config.regime != Regime.SemiHolonomic:
        raise ValueError("the d-sweep starts from the semi-holonomic regime")
    X = np.linspace(0.0, config.L, 17)
    if np.any(loads.bulk(X)[1] != 0.0):
        raise ValueError("inconsistent BCs across regimes: f1 has no holonomic counterpart")
    holo, holo_bcs = holonomic_limit(config, bcs)
    ref = solve(discretize(assemble_full(holo, loads, holo_bcs), n))
    g = grid_ops(n, config.L)
    gaps = {"u": [], "P1_minus_du": [], "du_minus_P1": []}
    tip, res = [], []
    for d in values:
        s = solve(discretize(assemble_full(config.replace(d=float(d)), loads, bcs), n))
        gaps["u"].append(_rel(s.u - ref.u, ref.u))
        gaps["P1_minus_du"].append(_rel(s.P[:, :, 0] - ref.P[:, :, 0], ref.P[:, :, 0]))
        gap = g.apply(1, MID, s.u) - g.apply(0, MID, s.P[:, :, 0])
        gaps["du_minus_P1"].append(_linf(gap))
        res.append(_resolution(g.h, s.u, s.P[:, :, 0]))
        tip.append(_linf(s.u[-1]))
    gaps = {k: np.array(v) for k, v in gaps.items()}
    return SweepResult(
        "d", values, gaps, "du_minus_P1", fit_exponent(values, gaps["du_minus_P1"]),
        np.array(tip), _linf(ref.u[-1]), np.array(res),
    )
