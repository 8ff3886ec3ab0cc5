"""Internal, external and total energy of the three regimes.

Conventions
-----------
``internal_energy`` returns the homogenised integral ``Psi_int`` term by
term, exactly as written for each regime.  The potential energy whose
stationary points are the equilibria is

    Pi = Psi_int / 2 - W_ext,

so the stored energy is half the written integral.  With this factor the
natural boundary conditions read ``a u'(L) = T`` and the classical
Euler-Bernoulli and Timoshenko deflections are recovered with ``b = EI``,
``d = kappa G A``.

Discretisation
--------------
A density whose highest derivative is odd is sampled at cell midpoints
(zeroth-order factors averaged) and integrated with the midpoint rule;
densities of even order are sampled at the nodes and integrated with the
trapezoid rule.  When a regime involves second or higher derivatives of a
field (``P`` in the semi-holonomic regime with ``c > 0``; ``u`` in the
holonomic regime with ``b`` or ``c`` nonzero) the stencils use one ghost
node per end.  The ghost is encoded in the state through the endpoint
slope stored in the derived array: ``N[end, :, :, 0]`` (semi-holonomic) or
``P[end, :, 0]`` (holonomic).  Interior entries of derived arrays are never
read.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields
from typing import Callable, Optional

import numpy as np

from .model import BeamConfig, FieldState, LoadSet, Regime, BoundarySpec
from .stencils import MID, NODE, grid_ops

GROUPS = (
    "sym_P_term",
    "N_norm_term",
    "gradN_term",
    "d_penalty_term",
    "curl_coupling_term",
    "e_penalty_term",
)


@dataclass(frozen=True)
class EnergyBreakdown:
    sym_P_term: float = 0.0
    N_norm_term: float = 0.0
    gradN_term: float = 0.0
    d_penalty_term: float = 0.0
    curl_coupling_term: float = 0.0
    e_penalty_term: float = 0.0
    external_term: float = 0.0
    total: float = 0.0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class InadmissibleTestError(ValueError):
    """A test variation does not vanish on the anchored DOFs."""


def ghosted_field(config: BeamConfig) -> Optional[str]:
    """Which field carries ghost nodes in this configuration, if any."""
    if config.regime == Regime.SemiHolonomic and config.c != 0.0:
        return "P"
    if config.regime == Regime.Holonomic and (config.b != 0.0 or config.c != 0.0):
        return "u"
    return None


# ---------------------------------------------------------------------------
# evaluators: both expose u/P/N(order, loc) returning (points, comps..., batch)


class _Discrete:
    def __init__(self, config: BeamConfig, X, u, P, N):
        n = len(X)
        if n < 5:
            raise ValueError(f"grid too coarse: n={n} < 5")
        self.g = grid_ops(n, float(X[-1] - X[0]))
        self.arrays = {"u": u, "P": P, "N": N}
        self.ghost = ghosted_field(config)
        self.ext = None
        if self.ghost == "P":
            self.ext = self.g.extend(P, N[0, :, :, 0], N[-1, :, :, 0])
        elif self.ghost == "u":
            self.ext = self.g.extend(u, P[0, :, 0], P[-1, :, 0])
        self.weights = self.g.weights

    def _get(self, name, order, loc):
        if name == self.ghost:
            return self.g.apply_ghost(order, loc, self.ext)
        return self.g.apply(order, loc, self.arrays[name])

    def u(self, order, loc):
        return self._get("u", order, loc)

    def P(self, order, loc):
        return self._get("P", order, loc)

    def N(self, order, loc):
        return self._get("N", order, loc)

    def end(self, name, order, end):
        """Endpoint derivative with the same stencils as the boundary DOFs."""
        if name == self.ghost:
            idx, w = self.g.ghost_end_weights(order, end)
            return np.tensordot(w, self.ext[idx], axes=(0, 0))
        return self.g.at_end(order, end, self.arrays[name])

    def integrate(self, values, loc):
        return self.g.integrate(values, loc)


class _Continuous:
    """Exact fields given as callables ``f(X, order)``; Gauss-Legendre quadrature."""

    def __init__(self, L, u, P, N, panels=200, points=8):
        xg, wg = np.polynomial.legendre.leggauss(points)
        edges = np.linspace(0.0, L, panels + 1)
        half = 0.5 * np.diff(edges)
        self.X = (edges[:-1, None] + half[:, None] * (xg[None, :] + 1)).ravel()
        self.w = (half[:, None] * wg[None, :]).ravel()
        self.L = L
        self.fns = {"u": u, "P": P, "N": N}

    def _get(self, name, order, loc):
        return np.asarray(self.fns[name](self.X, order), dtype=float)[..., None]

    def u(self, order, loc):
        return self._get("u", order, loc)

    def P(self, order, loc):
        return self._get("P", order, loc)

    def N(self, order, loc):
        return self._get("N", order, loc)

    def end(self, name, order, end):
        X = np.array([0.0 if end == "0" else self.L])
        return np.asarray(self.fns[name](X, order), dtype=float)[0][..., None]

    def integrate(self, values, loc):
        return np.tensordot(self.w, values, axes=(0, 0))


# ---------------------------------------------------------------------------
# transcription of the internal energies


def _sym(x, axes=(1, 2)):
    return x + np.swapaxes(x, *axes)


def _internal_terms(ev, config: BeamConfig):
    """Yield ``(group, modulus, loc, strain)``; density is modulus * |strain|^2."""
    a, b, c, d, e, s = config.a, config.b, config.c, config.d, config.e, config.ell4_over_12
    regime = config.regime
    if regime == Regime.NonHolonomic:
        P0, N0 = ev.P(0, NODE), ev.N(0, NODE)
        yield "sym_P_term", a / 4, NODE, _sym(P0)
        yield "sym_P_term", a * s / 4, NODE, _sym(N0[:, :, :, 1:])
        yield "N_norm_term", b, NODE, N0
        yield "gradN_term", c, MID, ev.N(1, MID)
        yield "d_penalty_term", d, MID, ev.u(1, MID) - ev.P(0, MID)[:, :, 0]
        P1, Nm = ev.P(1, MID), ev.N(0, MID)
        yield "curl_coupling_term", d * s, MID, P1[:, :, 1:] - Nm[:, :, 0, 1:]
        yield "e_penalty_term", e, MID, P1 - Nm[:, :, :, 0]
        yield "e_penalty_term", e * s, MID, ev.N(1, MID)[:, :, :, 1:]
    elif regime == Regime.SemiHolonomic:
        P1 = ev.P(1, MID)
        yield "sym_P_term", a / 4, NODE, _sym(ev.P(0, NODE))
        yield "N_norm_term", b, MID, P1
        yield "curl_coupling_term", d * s, MID, P1[:, :, 1:]
        yield "gradN_term", c, NODE, ev.P(2, NODE)
        yield "d_penalty_term", d, MID, ev.u(1, MID) - ev.P(0, MID)[:, :, 0]
    else:
        # (a/4)|sym grad u|^2 with the transversal gradient given: the cross
        # pairs (alpha, 1), (1, alpha) leave (a/2)(u^alpha')^2 each
        u1 = ev.u(1, MID)
        yield "sym_P_term", a, MID, u1[:, :1]
        yield "sym_P_term", a / 2, MID, u1[:, 1:]
        yield "N_norm_term", b, NODE, ev.u(2, NODE)
        yield "gradN_term", c, MID, ev.u(3, MID)


def _linear_internal(ev, config: BeamConfig):
    """Linear part of the written integral.

    Semi-holonomic: the frozen-N cross term.  Holonomic: ``a s_alpha
    int X u^alpha' dX`` from the given slopes ``s_alpha = u^1_{,alpha 1}``,
    written as ``a s_alpha (L u^alpha(L) - int u^alpha dX)``.
    """
    if config.regime == Regime.Holonomic:
        if config.frozen_u_alpha_slope is None or config.a == 0.0:
            return 0.0
        s = config.a * np.asarray(config.frozen_u_alpha_slope[0], dtype=float)
        if not s.any():
            return 0.0
        u_int = ev.integrate(ev.u(0, NODE)[:, 1:], NODE)  # (2, batch)
        return np.tensordot(s, config.L * ev.end("u", 0, "L")[1:] - u_int, axes=1)
    if config.regime != Regime.SemiHolonomic or config.frozen_N_jalpha is None:
        return 0.0
    ds = config.d * config.ell4_over_12
    if ds == 0.0:
        return 0.0
    nbar = config.frozen_N_jalpha[:, 0, :]  # N^i_{1 alpha}
    jump = ev.end("P", 0, "L")[:, 1:] - ev.end("P", 0, "0")[:, 1:]
    return -2.0 * ds * np.tensordot(nbar, jump, axes=([0, 1], [0, 1]))


def _reduce(strain, batch_axis=True):
    axes = tuple(range(1, strain.ndim - 1)) if batch_axis else tuple(range(1, strain.ndim))
    return np.sum(strain**2, axis=axes) if axes else strain**2


def _pair(x, y):
    axes = tuple(range(1, x.ndim - 1))
    return np.sum(x * y, axis=axes) if axes else x * y


def _external(ev, config: Optional[BeamConfig], loads: LoadSet, X):
    """Work of the loads; regime pairing when ``config`` is given, full otherwise."""
    f0, f1, f2 = (v[..., None] for v in loads.bulk(X))
    regime = Regime.NonHolonomic if config is None else config.regime
    work = ev.integrate(_pair(f0, ev.u(0, NODE)), NODE)
    if regime >= Regime.SemiHolonomic:
        work = work + ev.integrate(_pair(f1, ev.P(0, NODE)), NODE)
    if regime == Regime.NonHolonomic:
        work = work + ev.integrate(_pair(f2, ev.N(0, NODE)), NODE)
    for end in ("0", "L"):
        T0, T1, T2 = (loads.traction(k, end) for k in range(3))
        work = work + np.tensordot(T0, ev.end("u", 0, end), axes=1)
        if regime == Regime.Holonomic:
            work = work + np.tensordot(T1[:, 0], ev.end("u", 1, end), axes=1)
            work = work + np.tensordot(T2[:, 0, 0], ev.end("u", 2, end), axes=1)
            continue
        work = work + np.tensordot(T1, ev.end("P", 0, end), axes=2)
        if regime == Regime.SemiHolonomic:
            work = work + np.tensordot(T2[:, :, 0], ev.end("P", 1, end), axes=2)
        else:
            work = work + np.tensordot(T2, ev.end("N", 0, end), axes=3)
    return work


def _batched(state: FieldState):
    return state.X, state.u[..., None], state.P[..., None], state.N[..., None]


def _breakdown(ev, config, scale=1.0, loads=None, X=None) -> EnergyBreakdown:
    parts = dict.fromkeys(GROUPS, 0.0)
    for group, kappa, loc, strain in _internal_terms(ev, config):
        if kappa == 0.0:
            continue
        parts[group] += scale * kappa * float(ev.integrate(_reduce(strain), loc)[0])
    parts["curl_coupling_term"] += scale * float(np.ravel(_linear_internal(ev, config))[0])
    external = 0.0
    if loads is not None:
        external = -float(_external(ev, config, loads, X)[0])
    total = sum(parts.values()) + external
    return EnergyBreakdown(**parts, external_term=external, total=total)


# ---------------------------------------------------------------------------
# public API


def internal_energy(state: FieldState, config: BeamConfig) -> EnergyBreakdown:
    """Term-by-term value of the regime's written internal energy integral.

    Fields a regime does not use are ignored (``N`` in the semi-holonomic
    regime, ``P`` and ``N`` in the holonomic regime) apart from the endpoint
    slopes described in the module docstring.
    """
    X, u, P, N = _batched(state)
    return _breakdown(_Discrete(config, X, u, P, N), config)


def external_energy(state: FieldState, loads: LoadSet, config: Optional[BeamConfig] = None) -> float:
    """Work of bulk forces and end tractions.

    Without ``config`` every load is paired with its full field
    (``f0.u + f1:P + f2:.N`` and the three tractions).  With ``config`` the
    regime's pairing is used: the semi-holonomic regime drops ``f2`` and
    pairs ``T2[:, :, 0]`` with the endpoint slope of ``P``; the holonomic
    regime keeps ``f0`` and pairs ``T1[:, 0]``, ``T2[:, 0, 0]`` with the
    first and second derivatives of ``u``.
    """
    X, u, P, N = _batched(state)
    cfg = config if config is not None else BeamConfig(regime=Regime.NonHolonomic)
    ev = _Discrete(cfg, X, u, P, N)
    return float(_external(ev, config, loads, X)[0])


def total_energy(state: FieldState, config: BeamConfig, loads: LoadSet) -> EnergyBreakdown:
    """Potential energy ``Psi_int/2 - W_ext`` with its breakdown.

    Internal entries are the stored-energy contributions (half the written
    integral); ``external_term`` is ``-W_ext``.
    """
    X, u, P, N = _batched(state)
    return _breakdown(_Discrete(config, X, u, P, N), config, 0.5, loads, X)


def _bilinear(ev_x, ev_t, config):
    """``sum kappa int strain(x) . strain(t)`` for every batch column of ``t``."""
    out = 0.0
    for (g, kappa, loc, sx), (_, _, _, st) in zip(
        _internal_terms(ev_x, config), _internal_terms(ev_t, config)
    ):
        if kappa == 0.0:
            continue
        out = out + kappa * ev_t.integrate(_pair(sx, st), loc)
    return out


def weak_residual(
    state: FieldState,
    config: BeamConfig,
    loads: LoadSet,
    test: FieldState,
    bcs: Optional[BoundarySpec] = None,
    atol: float = 1e-12,
) -> float:
    """First variation of the discrete potential energy at ``state`` along ``test``.

    If ``bcs`` is given, the test must vanish on every anchored DOF.
    """
    if bcs is not None:
        bad = test_violations(test, config, bcs, atol)
        if bad:
            raise InadmissibleTestError(f"test does not vanish on anchored DOFs: {bad}")
    X, u, P, N = _batched(state)
    ev_x = _Discrete(config, X, u, P, N)
    _, tu, tP, tN = _batched(test)
    ev_t = _Discrete(config, X, tu, tP, tN)
    value = _bilinear(ev_x, ev_t, config)
    value = value + 0.5 * _linear_internal(ev_t, config) - _external(ev_t, config, loads, X)
    return float(np.ravel(value)[0])


def energy_norm(state: FieldState, config: BeamConfig) -> float:
    """``sqrt(Psi_quadratic)``, the norm induced by the internal quadratic form."""
    X, u, P, N = _batched(state)
    ev = _Discrete(config, X, u, P, N)
    return float(np.sqrt(max(_bilinear(ev, ev, config)[0], 0.0)))


def energy_scale(state: FieldState, config: BeamConfig, loads: LoadSet, test: FieldState) -> float:
    """Natural magnitude of ``weak_residual(state, ., ., test)`` terms."""
    X, u, P, N = _batched(test)
    work = abs(float(_external(_Discrete(config, X, u, P, N), config, loads, X)[0]))
    return energy_norm(state, config) * energy_norm(test, config) + work


# ---------------------------------------------------------------------------
# boundary values and admissibility


def boundary_values(state: FieldState, config: BeamConfig) -> dict[tuple[str, str], float]:
    """Value of every boundary DOF of the regime, keyed by (end, label)."""
    from .terms import boundary_dofs  # labels only
    from .model import parse_dof, field_index

    X, u, P, N = _batched(state)
    ev = _Discrete(config, X, u, P, N)
    out = {}
    for label in boundary_dofs(config):
        base, order = parse_dof(label)
        kind, idx = field_index(base)
        for end in ("0", "L"):
            out[(end, label)] = float(ev.end(kind, order, end)[idx][0])
    return out


def test_violations(test: FieldState, config: BeamConfig, bcs: BoundarySpec, atol=1e-12):
    vals = boundary_values(test, config)
    scale = max(1.0, max((abs(v) for v in vals.values()), default=0.0))
    return sorted(k for k in bcs.anchors if abs(vals.get(k, 0.0)) > atol * scale)


test_violations.__test__ = False  # not a pytest test


def admissible_projection(test: FieldState, config: BeamConfig, bcs: BoundarySpec) -> FieldState:
    """Closest variation to ``test`` (in the entries near the ends) that vanishes on the anchors.

    Boundary DOFs only read the four outermost nodes at each end, so the
    projection ``t - C^T (C C^T)^-1 C t`` acts on those entries alone.
    """
    from .model import parse_dof, field_index

    keys = sorted(bcs.anchors)
    if not keys:
        return test
    n = test.n
    nodes = sorted(set(range(min(4, n))) | set(range(max(n - 4, 0), n)))
    entries = []
    for k in nodes:
        entries += [("u", (k,) + c) for c in np.ndindex(3)]
        entries += [("P", (k,) + c) for c in np.ndindex(3, 3)]
        entries += [("N", (k,) + c) for c in np.ndindex(3, 3, 3)]
    B = len(entries)
    arrays = {"u": np.zeros((n, 3, B)), "P": np.zeros((n, 3, 3, B)), "N": np.zeros((n, 3, 3, 3, B))}
    for col, (kind, idx) in enumerate(entries):
        arrays[kind][idx + (col,)] = 1.0
    ev = _Discrete(config, test.X, arrays["u"], arrays["P"], arrays["N"])
    C = np.empty((len(keys), B))
    for r, (end, label) in enumerate(keys):
        base, order = parse_dof(label)
        kind, comp = field_index(base)
        C[r] = ev.end(kind, order, end)[comp]
    src = {"u": test.u, "P": test.P, "N": test.N}
    t = np.array([src[kind][idx] for kind, idx in entries])
    t = t - C.T @ np.linalg.lstsq(C @ C.T, C @ t, rcond=None)[0]
    out = {k: np.array(v, dtype=float) for k, v in src.items()}
    for (kind, idx), v in zip(entries, t):
        out[kind][idx] = v
    return FieldState(test.X, out["u"], out["P"], out["N"])


# ---------------------------------------------------------------------------
# exact (continuous) energies, used for consistency checks


FieldFn = Callable[[np.ndarray, int], np.ndarray]


def continuous_energy(
    config: BeamConfig,
    u: FieldFn,
    P: FieldFn,
    N: FieldFn,
    loads: Optional[LoadSet] = None,
    panels: int = 200,
    points: int = 8,
) -> float:
    """Potential energy of exact fields by composite Gauss-Legendre quadrature.

    ``u(X, k)`` returns the k-th derivative of ``u`` at ``X`` with shape
    (len(X), 3), and likewise for ``P`` and ``N``.
    """
    ev = _Continuous(config.L, u, P, N, panels, points)
    value = 0.0
    for _, kappa, loc, strain in _internal_terms(ev, config):
        if kappa:
            value += 0.5 * kappa * float(ev.integrate(_reduce(strain), loc)[0])
    value += 0.5 * float(np.ravel(_linear_internal(ev, config))[0])
    if loads is not None:
        f0, f1, f2 = (v[..., None] for v in loads.bulk(ev.X))
        regime = config.regime
        work = ev.integrate(_pair(f0, ev.u(0, NODE)), NODE)
        if regime >= Regime.SemiHolonomic:
            work = work + ev.integrate(_pair(f1, ev.P(0, NODE)), NODE)
        if regime == Regime.NonHolonomic:
            work = work + ev.integrate(_pair(f2, ev.N(0, NODE)), NODE)
        for end in ("0", "L"):
            T0, T1, T2 = (loads.traction(k, end) for k in range(3))
            work = work + np.tensordot(T0, ev.end("u", 0, end), axes=1)
            if regime == Regime.Holonomic:
                work = work + np.tensordot(T1[:, 0], ev.end("u", 1, end), axes=1)
                work = work + np.tensordot(T2[:, 0, 0], ev.end("u", 2, end), axes=1)
            else:
                work = work + np.tensordot(T1, ev.end("P", 0, end), axes=2)
                if regime == Regime.SemiHolonomic:
                    work = work + np.tensordot(T2[:, :, 0], ev.end("P", 1, end), axes=2)
                else:
                    work = work + np.tensordot(T2, ev.end("N", 0, end), axes=3)
        value -= float(np.ravel(work)[0])
    return value


def sample_state(config: BeamConfig, X: np.ndarray, u: FieldFn, P: FieldFn = None, N: FieldFn = None) -> FieldState:
    """Sample exact fields on a grid, filling the regime's derived arrays.

    In the semi-holonomic regime ``N[..., 0]`` is set to ``P'`` and the
    transversal slices to the frozen constants; in the holonomic regime ``P``
    and ``N`` are built from ``u`` and the frozen slopes.  This keeps the
    endpoint slopes read by the discrete energy exact.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    uu = np.asarray(u(X, 0), dtype=float)
    PP = np.zeros((n, 3, 3)) if P is None else np.asarray(P(X, 0), dtype=float)
    NN = np.zeros((n, 3, 3, 3)) if N is None else np.asarray(N(X, 0), dtype=float)
    if config.regime == Regime.SemiHolonomic:
        NN = np.zeros((n, 3, 3, 3))
        NN[:, :, :, 0] = P(X, 1)
        if config.frozen_N_jalpha is not None:
            NN[:, :, :, 1:] = config.frozen_N_jalpha
    elif config.regime == Regime.Holonomic:
        slope = np.zeros((3, 2)) if config.frozen_u_alpha_slope is None else config.frozen_u_alpha_slope
        PP = np.zeros((n, 3, 3))
        PP[:, :, 0] = u(X, 1)
        PP[:, :, 1:] = slope[None] * X[:, None, None]
        NN = np.zeros((n, 3, 3, 3))
        NN[:, :, 0, 0] = u(X, 2)
        NN[:, :, 0, 1:] = slope
        NN[:, :, 1:, 0] = slope
    return FieldState(X, uu, PP, NN)
