"""Euler-Lagrange systems of the three regimes and their decoupled subsystems.

The strong form is derived mechanically from the quadratic form of
``terms``: for ``Psi = sum kappa int (sum_t c_t D^{r_t} x_{p_t})^2`` the
equation of field ``q`` is

    sum kappa c_t c_s (-1)^{r_t} D^{r_t + r_s} x_{p_s} = f_q,

and the flux conjugate to ``D^s x_q`` at ``X = L`` is

    sum kappa c_t (-1)^{r_t - 1 - s} D^{r_t - 1 - s} (sum_u c_u D^{r_u} x_{p_u}).

At ``X = 0`` the same flux enters with the opposite sign, because every
traction is the work conjugate of the field value at its end.
"""

from __future__ import annotations

import csv
import itertools
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import terms as T
from ._discrete import IllPosedError, null_mode_probe
from .model import (
    BeamConfig,
    BoundarySpec,
    LoadSet,
    N_label,
    P_label,
    Regime,
    derivative_label,
    parse_dof,
    u_label,
    validate_config,
)

INDEX_NOTE = (
    "The transversal equation for the i,1alpha block of the first penalty "
    "limit carries a stray free index j on [f2]_i^{j alpha}; it is read as "
    "[f2]_i^{1 alpha}, consistent with the non-holonomic system."
)


class ConfigError(ValueError):
    """Raised when ``validate_config`` reports violations."""

    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = tuple(violations)


class LoadSupportError(ValueError):
    """Loads excite DOFs outside the requested subsystem."""


@dataclass(frozen=True)
class BoundaryRow:
    end: str
    dof: str
    kind: str  # "anchor" or "natural"
    value: float  # anchor value or prescribed traction
    flux: Optional[np.ndarray] = None  # (unknowns, orders) coefficients of the flux

    def describe(self, unknowns) -> str:
        if self.kind == "anchor":
            return f"{self.dof}({self.end}) = {self.value:.17g}"
        lhs = _format_combination(self.flux, unknowns)
        sign = "" if self.end == "L" else "-"
        return f"{sign}[{lhs}]({self.end}) = {self.value:.17g}"


@dataclass(frozen=True)
class LinearBVP:
    """Constant-coefficient linear two-point BVP of one regime or subsystem.

    ``bulk_coeffs[q, p, k]`` multiplies ``D^k x_p`` in equation ``q``;
    ``order[p]`` is the differential order of field ``p``.  ``terms`` is the
    quadratic form the system is the gradient of, which the solver
    discretises directly.
    """

    config: BeamConfig
    name: str
    unknowns: tuple[str, ...]
    order: dict
    terms: tuple
    bulk_coeffs: np.ndarray
    loads: LoadSet
    bcs: BoundarySpec
    boundary_rows: dict
    tractions: dict = field(default_factory=dict)

    @property
    def regime(self) -> Regime:
        return self.config.regime

    @property
    def half_orders(self) -> dict:
        return {p: self.order[p] // 2 for p in self.unknowns}

    @property
    def anchors(self) -> dict:
        return {
            (row.end, row.dof): row.value
            for end in ("0", "L")
            for row in self.boundary_rows[end]
            if row.kind == "anchor"
        }

    def rhs(self, X: np.ndarray) -> np.ndarray:
        """Bulk loads per equation sampled at ``X``: shape (len(X), unknowns)."""
        X = np.asarray(X, dtype=float)
        bulk = dict(zip(("f0", "f1", "f2"), self.loads.bulk(X)))
        out = np.zeros((len(X), len(self.unknowns)))
        index = {p: k for k, p in enumerate(self.unknowns)}
        for label, name, comp in T.bulk_pairings(self.config):
            if label in index:
                out[:, index[label]] = bulk[name][(slice(None),) + comp]
        for label, value in T.intrinsic_bulk(self.config).items():
            if label in index:
                out[:, index[label]] += value
        return out

    def equation(self, label: str) -> str:
        q = self.unknowns.index(label)
        return f"{_format_combination(self.bulk_coeffs[q], self.unknowns)} = f[{label}]"

    def dump_coefficients(self, directory: str) -> list[str]:
        """Write one CSV per equation: rows are unknowns, columns derivative orders."""
        os.makedirs(directory, exist_ok=True)
        paths = []
        K = self.bulk_coeffs.shape[2]
        for q, label in enumerate(self.unknowns):
            path = os.path.join(directory, f"{self.name}_{_safe(label)}.csv")
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["unknown"] + [f"D{k}" for k in range(K)])
                for p, other in enumerate(self.unknowns):
                    w.writerow([other] + [f"{v:.17g}" for v in self.bulk_coeffs[q, p]])
            paths.append(path)
        return paths


def _safe(label: str) -> str:
    return label.replace("^", "").replace(",", "d").replace("_", "")


def _format_combination(table, unknowns) -> str:
    out = []
    for p, k in zip(*np.nonzero(table)):
        coef = table[p, k]
        out.append(f"{coef:+.6g}*{derivative_label(unknowns[p], k)}")
    return " ".join(out) if out else "0"


def strong_form(terms, unknowns) -> np.ndarray:
    """Bulk coefficient table ``[equation, unknown, derivative order]``."""
    m = len(unknowns)
    K = 2 * max((t.order for t in terms), default=0)
    index = {p: k for k, p in enumerate(unknowns)}
    table = np.zeros((m, m, K + 1))
    for t in terms:
        for ct, rt, pt in t.parts:
            for cs, rs, ps in t.parts:
                table[index[pt], index[ps], rt + rs] += t.kappa * ct * cs * (-1) ** rt
    return table


def flux_table(terms, unknowns, label: str, s: int) -> np.ndarray:
    """Coefficients of the flux conjugate to ``D^s x_label`` at ``X = L``."""
    m = len(unknowns)
    K = 2 * max((t.order for t in terms), default=0)
    index = {p: k for k, p in enumerate(unknowns)}
    out = np.zeros((m, K + 1))
    for t in terms:
        for ct, rt, pt in t.parts:
            if pt != label or rt <= s:
                continue
            j = rt - 1 - s
            for cu, ru, pu in t.parts:
                out[index[pu], j + ru] += t.kappa * ct * (-1) ** j * cu
    return out


def _build(config, loads, bcs, name, unknowns, probe=True) -> LinearBVP:
    all_terms = T.quadratic_form(config)
    keep = set(unknowns)
    sub_terms = tuple(t for t in all_terms if t.fields <= keep)
    leaking = [t for t in all_terms if (t.fields & keep) and not t.fields <= keep]
    if leaking:
        raise ValueError(f"{name}: unknowns are coupled to fields outside the set")
    half = T.half_orders(config, sub_terms)
    half = {p: half[p] for p in unknowns}
    order = {p: 2 * half[p] for p in unknowns}
    tractions = {k: v for k, v in T.total_tractions(config, loads).items() if parse_dof(k[1])[0] in keep}
    rows = {"0": [], "L": []}
    for p in unknowns:
        for s in range(half[p]):
            dof = derivative_label(p, s)
            flux = flux_table(sub_terms, list(unknowns), p, s)
            for end in ("0", "L"):
                if bcs.is_anchored(end, dof):
                    rows[end].append(BoundaryRow(end, dof, "anchor", bcs.value(end, dof)))
                else:
                    rows[end].append(BoundaryRow(end, dof, "natural", tractions.get((end, dof), 0.0), flux))
    anchors = {(r.end, r.dof): r.value for e in rows for r in rows[e] if r.kind == "anchor"}
    stray = [k for k in bcs.anchors if parse_dof(k[1])[0] in keep and k not in anchors]
    if stray:
        raise ConfigError([f"anchor on {lab} at {end} has no boundary term" for end, lab in stray])
    bvp = LinearBVP(
        config=config,
        name=name,
        unknowns=tuple(unknowns),
        order=order,
        terms=sub_terms,
        bulk_coeffs=strong_form(sub_terms, list(unknowns)),
        loads=loads,
        bcs=bcs,
        boundary_rows=rows,
        tractions=tractions,
    )
    if probe:
        mode = null_mode_probe(list(unknowns), half, sub_terms, anchors, config.L)
        if mode is not None:
            raise IllPosedError(
                f"ill-posed anchoring: zero-energy mode remains in {', '.join(mode)}", mode
            )
    return bvp


def assemble_full(config: BeamConfig, loads: LoadSet, bcs: BoundarySpec, probe: bool = True) -> LinearBVP:
    """Complete coupled system of the configured regime (39, 12 or 3 unknowns)."""
    report = validate_config(config, bcs, loads)
    if not report.ok:
        raise ConfigError(report.violations)
    return _build(config, loads, bcs, "full", T.unknowns(config), probe)


def traction_fields(regime: Regime) -> list[str]:
    labels = [u_label(0)]
    if regime >= Regime.SemiHolonomic:
        labels.append(P_label(0, 0))
    if regime == Regime.NonHolonomic:
        labels.append(N_label(0, 0, 0))
    return labels


def bending_fields(regime: Regime, plane: int = 2) -> list[str]:
    if plane not in (2, 3):
        raise ValueError("plane must be 2 or 3")
    k = plane - 1
    labels = [u_label(k)]
    if regime >= Regime.SemiHolonomic:
        labels += [P_label(k, 0), P_label(0, k)]
    if regime == Regime.NonHolonomic:
        labels += [N_label(k, 0, 0), N_label(0, k, 0), N_label(0, 0, k)]
    return labels


def _check_support(config, loads, bcs, keep, name):
    X = np.linspace(0.0, config.L, 33)
    bulk = dict(zip(("f0", "f1", "f2"), loads.bulk(X)))
    bad = []
    for label, lname, comp in T.bulk_pairings(config):
        if label not in keep and np.any(bulk[lname][(slice(None),) + comp] != 0.0):
            bad.append(label)
    for end, dof, value in T.traction_entries(config, loads):
        if value != 0.0 and parse_dof(dof)[0] not in keep:
            bad.append(f"{dof}({end})")
    for (end, dof), value in bcs.anchors.items():
        if value != 0.0 and parse_dof(dof)[0] not in keep:
            bad.append(f"{dof}({end})")
    for (end, dof), value in T.intrinsic_tractions(config).items():
        if value != 0.0 and parse_dof(dof)[0] not in keep:
            bad.append(f"{dof}({end})")
    for label, value in T.intrinsic_bulk(config).items():
        if value != 0.0 and label not in keep:
            bad.append(label)
    if bad:
        raise LoadSupportError(f"{name}: loads excite DOFs outside the component: {sorted(set(bad))}")


def _subsystem(config, loads, bcs, keep, name, probe):
    report = validate_config(config, bcs, loads)
    if not report.ok:
        raise ConfigError(report.violations)
    _check_support(config, loads, bcs, set(keep), name)
    sub_bcs = bcs.without(lambda end, dof: parse_dof(dof)[0] not in keep)
    return _build(config, loads, sub_bcs, name, keep, probe)


def assemble_traction_subsystem(
    regime, config: BeamConfig, loads: LoadSet, bcs: BoundarySpec, probe: bool = True
) -> LinearBVP:
    """Pure macroscopic traction: (u^1, P^1_1, N^1_11), (u^1, P^1_1) or u^1."""
    config = config if config.regime == Regime.parse(regime) else config.replace(regime=regime)
    return _subsystem(config, loads, bcs, traction_fields(config.regime), "traction", probe)


def assemble_bending_subsystem(
    regime, config: BeamConfig, loads: LoadSet, bcs: BoundarySpec, plane: int = 2, probe: bool = True
) -> LinearBVP:
    """Pure planar bending in the (X^1, X^plane) plane."""
    config = config if config.regime == Regime.parse(regime) else config.replace(regime=regime)
    keep = bending_fields(config.regime, plane)
    return _subsystem(config, loads, bcs, keep, f"bending{plane}", probe)


def swap_plane_label(label: str) -> str:
    """Exchange transversal indices 2 and 3 in a label."""
    table = str.maketrans({"2": "3", "3": "2"})
    head, sep, tail = label.partition("_,")
    if sep:
        return head.translate(table) + sep + tail
    if "," in label:
        base, suffix = label.split(",")
        return base.translate(table) + "," + suffix
    return label.translate(table)
