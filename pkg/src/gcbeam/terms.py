"""Symbolic quadratic form of each regime.

Every internal energy is written as a sum of squares

    Psi_int = sum_t kappa_t * int (sum_s c_s D^{r_s} x_{p_s})^2 dX + linear part,

and the total energy is ``Psi_int / 2 - W_ext``.  With this normalisation
the stationarity conditions are exactly the Euler-Lagrange systems of the
three regimes (for instance ``-d (u'' - P_1') = f0``).  The assembly,
solver and structure modules all work from this table; the energy module
keeps its own transcription so that each can be checked against the other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .model import (
    BeamConfig,
    LoadSet,
    N_label,
    P_label,
    Regime,
    derivative_label,
    regime_fields,
    u_label,
)
from .stencils import MID, NODE

R3 = range(3)
ALPHA = (1, 2)


@dataclass(frozen=True)
class Term:
    """``kappa * (sum coef * D^order field)^2`` integrated along the beam."""

    group: str
    kappa: float
    parts: tuple[tuple[float, int, str], ...]  # (coef, derivative order, field label)

    @property
    def order(self) -> int:
        return max(r for _, r, _ in self.parts)

    @property
    def loc(self) -> str:
        # odd derivative orders are sampled at cell midpoints, even ones at nodes
        return MID if self.order % 2 else NODE

    @property
    def fields(self) -> set[str]:
        return {p for _, _, p in self.parts}


def _sym(kappa, group, a_label, b_label, order=0):
    """Term ``kappa * (x_a + x_b)^2``, merging the diagonal case."""
    if a_label == b_label:
        return Term(group, kappa, ((2.0, order, a_label),))
    return Term(group, kappa, ((1.0, order, a_label), (1.0, order, b_label)))


def _nonholonomic(cfg: BeamConfig) -> Iterator[Term]:
    a, b, c, d, e, s = cfg.a, cfg.b, cfg.c, cfg.d, cfg.e, cfg.ell4_over_12
    for i, j in itertools.product(R3, R3):
        yield _sym(a / 4, "sym_P_term", P_label(i, j), P_label(j, i))
    for i, j, al in itertools.product(R3, R3, ALPHA):
        yield _sym(a * s / 4, "sym_P_term", N_label(i, j, al), N_label(j, i, al))
    for i, j, k in itertools.product(R3, R3, R3):
        yield Term("N_norm_term", b, ((1.0, 0, N_label(i, j, k)),))
        yield Term("gradN_term", c, ((1.0, 1, N_label(i, j, k)),))
    for i in R3:
        yield Term("d_penalty_term", d, ((1.0, 1, u_label(i)), (-1.0, 0, P_label(i, 0))))
    for i, al in itertools.product(R3, ALPHA):
        yield Term(
            "curl_coupling_term", d * s, ((1.0, 1, P_label(i, al)), (-1.0, 0, N_label(i, 0, al)))
        )
    for i, j in itertools.product(R3, R3):
        yield Term("e_penalty_term", e, ((1.0, 1, P_label(i, j)), (-1.0, 0, N_label(i, j, 0))))
    for i, j, al in itertools.product(R3, R3, ALPHA):
        yield Term("e_penalty_term", e * s, ((1.0, 1, N_label(i, j, al)),))


def _semiholonomic(cfg: BeamConfig) -> Iterator[Term]:
    a, b, c, d, s = cfg.a, cfg.b, cfg.c, cfg.d, cfg.ell4_over_12
    for i, j in itertools.product(R3, R3):
        yield _sym(a / 4, "sym_P_term", P_label(i, j), P_label(j, i))
    for i in R3:
        yield Term("N_norm_term", b, ((1.0, 1, P_label(i, 0)),))
        for al in ALPHA:
            # b from |N_{alpha 1}|^2, d l^4/12 from the curl-like coupling
            yield Term("N_norm_term", b, ((1.0, 1, P_label(i, al)),))
            yield Term("curl_coupling_term", d * s, ((1.0, 1, P_label(i, al)),))
    for i, j in itertools.product(R3, R3):
        yield Term("gradN_term", c, ((1.0, 2, P_label(i, j)),))
    for i in R3:
        yield Term("d_penalty_term", d, ((1.0, 1, u_label(i)), (-1.0, 0, P_label(i, 0))))


def _holonomic(cfg: BeamConfig) -> Iterator[Term]:
    # (a/4)|u^i_,j + u^j_,i|^2 with u^i_,alpha given: the axial component
    # keeps a (u^1')^2, each transversal one only (a/2) (u^alpha')^2
    for i in R3:
        yield Term("sym_P_term", cfg.a if i == 0 else cfg.a / 2, ((1.0, 1, u_label(i)),))
        yield Term("N_norm_term", cfg.b, ((1.0, 2, u_label(i)),))
        yield Term("gradN_term", cfg.c, ((1.0, 3, u_label(i)),))


_BUILDERS = {
    Regime.NonHolonomic: _nonholonomic,
    Regime.SemiHolonomic: _semiholonomic,
    Regime.Holonomic: _holonomic,
}


def quadratic_form(config: BeamConfig) -> list[Term]:
    """Nonzero terms of the regime's internal energy."""
    return [t for t in _BUILDERS[config.regime](config) if t.kappa != 0.0]


def unknowns(config: BeamConfig) -> list[str]:
    return regime_fields(config.regime)


def half_orders(config: BeamConfig, terms=None) -> dict[str, int]:
    """Highest derivative of each field in the energy (half the ODE order)."""
    terms = quadratic_form(config) if terms is None else terms
    out = {p: 0 for p in unknowns(config)}
    for t in terms:
        for _, r, p in t.parts:
            out[p] = max(out[p], r)
    return out


def boundary_dofs(config: BeamConfig, terms=None) -> list[str]:
    """Boundary DOF labels: derivatives 0..r-1 of each field of half order r."""
    out = []
    for p, r in half_orders(config, terms).items():
        out.extend(derivative_label(p, s) for s in range(r))
    return out


def bulk_pairings(config: BeamConfig) -> list[tuple[str, str, tuple[int, ...]]]:
    """(field label, load name, component) for each bulk load that does work."""
    out = [(u_label(i), "f0", (i,)) for i in R3]
    if config.regime >= Regime.SemiHolonomic:
        out += [(P_label(i, j), "f1", (i, j)) for i, j in itertools.product(R3, R3)]
    if config.regime == Regime.NonHolonomic:
        out += [
            (N_label(i, j, k), "f2", (i, j, k)) for i, j, k in itertools.product(R3, R3, R3)
        ]
    return out


def traction_pairings(config: BeamConfig) -> list[tuple[str, int, tuple[int, ...]]]:
    """(boundary DOF label, traction order, component) for each effective traction."""
    regime = config.regime
    out = [(u_label(i), 0, (i,)) for i in R3]
    if regime == Regime.Holonomic:
        out += [(derivative_label(u_label(i), 1), 1, (i, 0)) for i in R3]
        out += [(derivative_label(u_label(i), 2), 2, (i, 0, 0)) for i in R3]
        return out
    out += [(P_label(i, j), 1, (i, j)) for i, j in itertools.product(R3, R3)]
    if regime == Regime.SemiHolonomic:
        out += [
            (derivative_label(P_label(i, j), 1), 2, (i, j, 0)) for i, j in itertools.product(R3, R3)
        ]
    else:
        out += [
            (N_label(i, j, k), 2, (i, j, k)) for i, j, k in itertools.product(R3, R3, R3)
        ]
    return out


def traction_entries(config: BeamConfig, loads: LoadSet) -> list[tuple[str, str, float]]:
    """User tractions as (end, DOF label, value)."""
    out = []
    for end in ("0", "L"):
        for label, order, comp in traction_pairings(config):
            out.append((end, label, float(loads.traction(order, end)[comp])))
    return out


def _slope_coupling(config: BeamConfig) -> dict[int, float]:
    """``a u^1_{,alpha 1}`` for each transversal component ``alpha`` of ``u``.

    The holonomic cross term ``a u^alpha' u^1_{,alpha}`` with the affine
    ``u^1_{,alpha} = u^1_{,alpha 1} X`` is linear in ``u^alpha``.
    """
    if config.regime != Regime.Holonomic or config.frozen_u_alpha_slope is None or config.a == 0.0:
        return {}
    out = {}
    for al in ALPHA:
        value = config.a * float(config.frozen_u_alpha_slope[0, al - 1])
        if value != 0.0:
            out[al] = value
    return out


def intrinsic_bulk(config: BeamConfig) -> dict[str, float]:
    """Constant bulk forces produced by the frozen transversal constants.

    In the holonomic regime ``int a s X u' dX = a s (L u(L) - int u dX)``,
    which acts as a uniform force ``a s / 2`` plus an end load.
    """
    return {u_label(al): 0.5 * v for al, v in _slope_coupling(config).items()}


def intrinsic_tractions(config: BeamConfig) -> dict[tuple[str, str], float]:
    """Endpoint forces produced by the frozen transversal constants.

    In the semi-holonomic regime the cross term ``-(d l^4/6) Nbar P'_alpha``
    is a perfect derivative, so it acts as a pair of opposite end loads on
    ``P^i_alpha``.  In the holonomic regime the slope coupling of
    ``intrinsic_bulk`` leaves a load ``-a s L / 2`` at ``X = L``.
    """
    out = {}
    if config.regime == Regime.Holonomic:
        return {("L", u_label(al)): -0.5 * v * config.L for al, v in _slope_coupling(config).items()}
    if config.regime != Regime.SemiHolonomic or config.frozen_N_jalpha is None:
        return out
    ds = config.d * config.ell4_over_12
    if ds == 0.0:
        return out
    for i, al in itertools.product(R3, ALPHA):
        value = ds * config.frozen_N_jalpha[i, 0, al - 1]
        if value != 0.0:
            out[("L", P_label(i, al))] = value
            out[("0", P_label(i, al))] = -value
    return out


def total_tractions(config: BeamConfig, loads: LoadSet) -> dict[tuple[str, str], float]:
    out = {}
    for end, label, value in traction_entries(config, loads):
        if value != 0.0:
            out[(end, label)] = out.get((end, label), 0.0) + value
    for key, value in intrinsic_tractions(config).items():
        out[key] = out.get(key, 0.0) + value
    return out


def coefficient_vector(parts, fields: list[str], max_order: int) -> np.ndarray:
    """Dense (field, derivative order) coefficient table of a linear combination."""
    index = {p: k for k, p in enumerate(fields)}
    out = np.zeros((len(fields), max_order + 1))
    for coef, r, p in parts:
        out[index[p], r] += coef
    return out
