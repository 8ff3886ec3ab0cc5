"""Shared helpers: configurations, random loads, admissible tests, manufactured solutions."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from gcbeam import terms as T
from gcbeam.energy import admissible_projection
from gcbeam.model import (
    BeamConfig,
    BoundarySpec,
    FieldState,
    LoadSet,
    Regime,
    derivative_label,
    field_index,
    parse_dof,
)

ZERO_N = np.zeros((3, 3, 2))
ZERO_SLOPE = np.zeros((3, 2))

ACCEPTANCE: dict = {}


def make_config(regime, **kw) -> BeamConfig:
    regime = Regime.parse(regime)
    base = dict(a=1.0, b=1.0, c=1.0, d=2.0, e=3.0, L=1.0, ell4_over_12=0.1)
    base.update(kw)
    if regime == Regime.SemiHolonomic:
        base.setdefault("frozen_N_jalpha", ZERO_N)
    if regime == Regime.Holonomic:
        base.setdefault("frozen_u_alpha_slope", ZERO_SLOPE)
    return BeamConfig(regime=regime, **base)


def random_state(rng, n=21, L=1.0) -> FieldState:
    return FieldState(
        np.linspace(0.0, L, n),
        rng.standard_normal((n, 3)),
        rng.standard_normal((n, 3, 3)),
        rng.standard_normal((n, 3, 3, 3)),
    )


def admissible_test(rng, config, bcs, n) -> FieldState:
    return admissible_projection(random_state(rng, n, config.L), config, bcs)


def restrict_tractions(config: BeamConfig, loads: LoadSet) -> LoadSet:
    """Zero every traction that has no boundary term in the regime."""
    allowed = set(T.boundary_dofs(config))
    values = {k: np.array(getattr(loads, k)) for k in loads.__dataclass_fields__ if k.startswith("T")}
    for label, order, comp in T.traction_pairings(config):
        if label not in allowed:
            for side in ("left", "right"):
                values[f"T{order}_{side}"][comp] = 0.0
    return LoadSet(loads.f0, loads.f1, loads.f2, **values)


def random_loads(rng, config: BeamConfig, fields=None, tractions=True) -> LoadSet:
    """Smooth random bulk loads and tip tractions, optionally supported on ``fields`` only."""
    A0, A1, A2 = rng.standard_normal(3), rng.standard_normal((3, 3)), rng.standard_normal((3, 3, 3))
    B0, B1, B2 = rng.standard_normal(3), rng.standard_normal((3, 3)), rng.standard_normal((3, 3, 3))
    w = rng.uniform(0.5, 3.0)
    R = {k: rng.standard_normal(s) for k, s in (("T0", (3,)), ("T1", (3, 3)), ("T2", (3, 3, 3)))}
    if fields is not None:
        keep = set(fields)
        mask = {name: np.zeros(s) for name, s in (("0", (3,)), ("1", (3, 3)), ("2", (3, 3, 3)))}
        for label in keep:
            kind, comp = field_index(label)
            mask[{"u": "0", "P": "1", "N": "2"}[kind]][comp] = 1.0
        A0, B0, R["T0"] = A0 * mask["0"], B0 * mask["0"], R["T0"] * mask["0"]
        A1, B1, R["T1"] = A1 * mask["1"], B1 * mask["1"], R["T1"] * mask["1"]
        A2, B2, R["T2"] = A2 * mask["2"], B2 * mask["2"], R["T2"] * mask["2"]
    loads = LoadSet(
        f0=lambda X: np.outer(np.cos(w * X), A0) + np.outer(X, B0),
        f1=lambda X: np.einsum("n,ij->nij", np.sin(w * X), A1) + np.einsum("n,ij->nij", X**2, B1),
        f2=lambda X: np.einsum("n,ijk->nijk", np.cos(X), A2) + np.einsum("n,ijk->nijk", X, B2),
        T0_right=R["T0"] if tractions else np.zeros(3),
        T1_right=R["T1"] if tractions else np.zeros((3, 3)),
        T2_right=R["T2"] if tractions else np.zeros((3, 3, 3)),
    )
    return restrict_tractions(config, loads)


# ---------------------------------------------------------------------------
# manufactured solutions from the strong form


def smooth_fields(unknowns, seed=0):
    """Per-unknown analytic functions ``g(X, k)`` (k-th derivative)."""
    rng = np.random.default_rng(seed)
    out = {}
    for p in unknowns:
        amp, w, ph, lin = rng.uniform(0.5, 1.5), rng.uniform(1.0, 2.5), rng.uniform(0, np.pi), rng.uniform(-1, 1)

        def g(X, k, amp=amp, w=w, ph=ph, lin=lin):
            X = np.asarray(X, dtype=float)
            val = amp * w**k * np.sin(w * X + ph + k * np.pi / 2)
            if k == 0:
                val = val + lin * X
            elif k == 1:
                val = val + lin
            return val

        out[p] = g
    return out


def manufactured_problem(bvp, fns, anchors_at=None):
    """Loads and anchors for which ``fns`` solves the strong form of ``bvp``.

    Bulk loads are the bulk operator applied to ``fns``; free boundary DOFs
    receive the flux as traction, anchored ones keep their exact value.
    """
    cfg = bvp.config
    unknowns = list(bvp.unknowns)
    K = bvp.bulk_coeffs.shape[2]

    def bulk(X):
        X = np.asarray(X, dtype=float)
        D = np.array([[fns[p](X, k) for k in range(K)] for p in unknowns])  # (m, K, n)
        return np.einsum("qpk,pkn->nq", bvp.bulk_coeffs, D)

    pair = {label: (name, comp) for label, name, comp in T.bulk_pairings(cfg)}
    shapes = {"f0": (3,), "f1": (3, 3), "f2": (3, 3, 3)}

    def sampler(name):
        def f(X):
            vals = bulk(X)
            out = np.zeros((len(X),) + shapes[name])
            for q, label in enumerate(unknowns):
                lname, comp = pair[label]
                if lname == name:
                    out[(slice(None),) + comp] = vals[:, q]
            return out

        return f

    tractions = {f"T{k}_{s}": np.zeros(shapes[f"f{k}"]) for k in range(3) for s in ("left", "right")}
    tpair = {label: (order, comp) for label, order, comp in T.traction_pairings(cfg)}
    anchors = {}
    for end in ("0", "L"):
        X = np.array([0.0 if end == "0" else cfg.L])
        for row in bvp.boundary_rows[end]:
            base, s = parse_dof(row.dof)
            if row.kind == "anchor":
                anchors[(end, row.dof)] = float(fns[base](X, s)[0])
            else:
                flux = sum(
                    row.flux[p, k] * fns[q](X, k)[0]
                    for p, q in enumerate(unknowns)
                    for k in range(row.flux.shape[1])
                )
                order, comp = tpair[row.dof]
                side = "left" if end == "0" else "right"
                tractions[f"T{order}_{side}"][comp] = flux if end == "L" else -flux
    loads = LoadSet(sampler("f0"), sampler("f1"), sampler("f2"), **tractions)
    return loads, BoundarySpec(anchors)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
