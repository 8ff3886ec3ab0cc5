"""Linearised dislocation and disclination densities of a solved state.

Torsion ``T^i_{jk} = N^i_{jk} - N^i_{kj}`` measures dislocations; the
curvature slices ``R^i_{j alpha 1} = N^i_{j alpha, 1}`` measure
disclinations.  ``curl_P`` gives the Curl of ``P`` arranged so that
``T^i_{jk} = eps_{jkl} [Curl P]^i_l`` whenever ``N`` is the gradient of ``P``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .model import FieldState
from .stencils import NODE, grid_ops

# Levi-Civita symbol
EPS = np.zeros((3, 3, 3))
for _i, _j, _k in itertools.permutations(range(3)):
    EPS[_i, _j, _k] = np.linalg.det(np.eye(3)[[_i, _j, _k]])


def torsion(state: FieldState) -> np.ndarray:
    """Dislocation density, shape (n, 3, 3, 3), antisymmetric in the last two axes."""
    return state.N - np.swapaxes(state.N, 2, 3)


def curvature(state: FieldState) -> np.ndarray:
    """Disclination density ``R^i_{j alpha 1}``, shape (n, 3, 3, 2)."""
    g = grid_ops(state.n, state.L)
    return g.apply(1, NODE, state.N[:, :, :, 1:])


def gradient_P(state: FieldState) -> np.ndarray:
    """Reduced gradient of ``P``: axial part by finite differences, transversal part from ``N``."""
    g = grid_ops(state.n, state.L)
    out = np.array(state.N, dtype=float)
    out[:, :, :, 0] = g.apply(1, NODE, state.P)
    return out


def curl_P(state: FieldState) -> np.ndarray:
    """``[Curl P]^i_l = eps_{lmk} d_k P^i_m``, shape (n, 3, 3)."""
    return np.einsum("lmk,nimk->nil", EPS, gradient_P(state))


def torsion_from_curl(curl: np.ndarray) -> np.ndarray:
    return np.einsum("jkl,nil->nijk", EPS, curl)


@dataclass(frozen=True)
class DefectReport:
    torsion_linf: np.ndarray  # (3, 3, 3)
    torsion_l2: np.ndarray
    curvature_linf: np.ndarray  # (3, 3, 2)
    curvature_l2: np.ndarray

    @property
    def dislocation_norm(self) -> float:
        return float(self.torsion_linf.max())

    @property
    def disclination_norm(self) -> float:
        return float(self.curvature_linf.max())

    def lines(self) -> list[str]:
        out = [
            f"dislocation (torsion) max Linf = {self.dislocation_norm:.6e}",
            f"disclination (curvature) max Linf = {self.disclination_norm:.6e}",
        ]
        for i, j, k in itertools.product(range(3), range(3), range(3)):
            if j < k and self.torsion_linf[i, j, k] > 0:
                out.append(
                    f"  T^{i+1}_{j+1}{k+1}: Linf {self.torsion_linf[i, j, k]:.6e} L2 {self.torsion_l2[i, j, k]:.6e}"
                )
        for i, j, a in itertools.product(range(3), range(3), range(2)):
            if self.curvature_linf[i, j, a] > 0:
                out.append(
                    f"  R^{i+1}_{j+1}{a+2}1: Linf {self.curvature_linf[i, j, a]:.6e} L2 {self.curvature_l2[i, j, a]:.6e}"
                )
        return out


def defect_report(state: FieldState) -> DefectReport:
    g = grid_ops(state.n, state.L)
    T = torsion(state)
    R = curvature(state)
    l2 = lambda x: np.sqrt(g.integrate(x**2, NODE))
    return DefectReport(np.abs(T).max(axis=0), l2(T), np.abs(R).max(axis=0), l2(R))


def defect_columns(state: FieldState) -> tuple[list[str], np.ndarray]:
    """Header and data of the independent defect components along X."""
    T = torsion(state)
    R = curvature(state)
    header, cols = ["X"], [state.X]
    for i, j, k in itertools.product(range(3), range(3), range(3)):
        if j < k:
            header.append(f"T^{i+1}_{j+1}{k+1}")
            cols.append(T[:, i, j, k])
    for i, j, a in itertools.product(range(3), range(3), range(2)):
        header.append(f"R^{i+1}_{j+1}{a+2}1")
        cols.append(R[:, i, j, a])
    return header, np.column_stack(cols)


def write_defects_csv(state: FieldState, path: str) -> None:
    header, data = defect_columns(state)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in data:
            w.writerow([f"{v:.17g}" for v in row])
