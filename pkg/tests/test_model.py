import numpy as np
import pytest

from gcbeam.model import (
    BeamConfig,
    BoundarySpec,
    FieldState,
    LoadSet,
    Regime,
    cantilever_bcs,
    derivative_label,
    field_index,
    parse_dof,
    reconstruct_3d,
    regime_fields,
    validate_config,
)

from conftest import ZERO_N, make_config, random_state


def test_regime_order():
    assert Regime.NonHolonomic > Regime.SemiHolonomic > Regime.Holonomic


@pytest.mark.parametrize(
    "text,expected",
    [("non-holonomic", Regime.NonHolonomic), ("SemiHolonomic", Regime.SemiHolonomic), ("holonomic", Regime.Holonomic)],
)
def test_regime_parse(text, expected):
    assert Regime.parse(text) is expected


def test_regime_parse_rejects_unknown():
    with pytest.raises(ValueError):
        Regime.parse("anholonomic")


@pytest.mark.parametrize("regime,count", [("holonomic", 3), ("semi-holonomic", 12), ("non-holonomic", 39)])
def test_regime_field_counts(regime, count):
    assert len(regime_fields(Regime.parse(regime))) == count


def test_default_setup_is_valid():
    cfg = BeamConfig(a=1, b=1, c=1, d=1, e=1, ell4_over_12=0.1)
    bcs = BoundarySpec.clamp("0", ["u^1", "u^2", "u^3"])
    assert validate_config(cfg, bcs).violations == ()


def test_missing_frozen_constants():
    cfg = BeamConfig(regime=Regime.SemiHolonomic)
    assert "missing frozen N constants" in validate_config(cfg, BoundarySpec()).violations


def test_degenerate_length():
    cfg = BeamConfig(L=0.0)
    assert "degenerate length" in validate_config(cfg, BoundarySpec()).violations


@pytest.mark.parametrize("name", list("abcde"))
def test_negative_modulus(name):
    cfg = BeamConfig(**{name: -1.0})
    assert any(v.startswith(f"negative modulus {name}") for v in validate_config(cfg, BoundarySpec()))


def test_frozen_constants_in_wrong_regime():
    cfg = BeamConfig(frozen_N_jalpha=ZERO_N)
    assert not validate_config(cfg, BoundarySpec()).ok


def test_anchor_without_boundary_term():
    # with c = 0 the semi-holonomic energy has no boundary term for P'
    cfg = make_config("semi-holonomic", c=0.0)
    report = validate_config(cfg, BoundarySpec({("L", "P^1_2,1"): 0.0}))
    assert len(report) == 1 and "P^1_2,1" in report.violations[0]


def test_traction_without_boundary_term():
    cfg = make_config("holonomic", b=0.0, c=0.0)
    loads = LoadSet(T1_right=np.eye(3))
    assert not validate_config(cfg, BoundarySpec(), loads).ok


def test_validate_is_pure():
    cfg = BeamConfig(L=-1.0, a=-2.0)
    bcs = BoundarySpec()
    assert validate_config(cfg, bcs) == validate_config(cfg, bcs)


@pytest.mark.parametrize("regime", ["holonomic", "semi-holonomic", "non-holonomic"])
def test_cantilever_bcs_are_valid(regime):
    cfg = make_config(regime)
    assert validate_config(cfg, cantilever_bcs(cfg)).ok


def test_config_is_immutable():
    cfg = BeamConfig()
    with pytest.raises(Exception):
        cfg.a = 2.0
    with pytest.raises(ValueError):
        make_config("semi-holonomic").frozen_N_jalpha[0, 0, 0] = 1.0


def test_fieldstate_needs_five_samples():
    with pytest.raises(ValueError):
        FieldState.zeros(4)


def test_fieldstate_rejects_nonfinite(rng):
    s = random_state(rng, 7)
    u = s.u.copy()
    u[3, 1] = np.nan
    with pytest.raises(ValueError):
        FieldState(s.X, u, s.P, s.N)


def test_fieldstate_rejects_nonuniform_grid():
    X = np.array([0.0, 0.1, 0.3, 0.6, 1.0])
    with pytest.raises(ValueError):
        FieldState(X, np.zeros((5, 3)), np.zeros((5, 3, 3)), np.zeros((5, 3, 3, 3)))


def test_loadset_constants_broadcast():
    loads = LoadSet(f0=[1.0, 2.0, 3.0])
    f0, f1, f2 = loads.bulk(np.linspace(0, 1, 4))
    assert f0.shape == (4, 3) and np.all(f0[:, 2] == 3.0)
    assert f1.shape == (4, 3, 3) and not f1.any()
    assert f2.shape == (4, 3, 3, 3)


def test_loadset_linear_combination():
    a = LoadSet(f0=[1.0, 0, 0], T0_right=[2.0, 0, 0])
    b = LoadSet(f0=lambda X: np.outer(X, [0, 1.0, 0]))
    c = a.scaled(2.0) + b
    f0, _, _ = c.bulk(np.array([0.5]))
    np.testing.assert_allclose(f0, [[2.0, 0.5, 0.0]])
    np.testing.assert_allclose(c.traction(0, "L"), [4.0, 0, 0])


def test_loadset_rejects_bad_shape():
    with pytest.raises(ValueError):
        LoadSet(f0=[1.0, 2.0])


@pytest.mark.parametrize(
    "label,order,expected",
    [("u^1", 1, "u^1_,1"), ("u^2", 2, "u^2_,11"), ("P^1_2", 1, "P^1_2,1"), ("N^1_11", 0, "N^1_11")],
)
def test_derivative_labels_roundtrip(label, order, expected):
    assert derivative_label(label, order) == expected
    assert parse_dof(expected) == (label, order)


def test_field_index():
    assert field_index("N^1_23") == ("N", (0, 1, 2))
    assert field_index("u^3") == ("u", (2,))


def test_boundary_spec_rejects_bad_endpoint():
    with pytest.raises(ValueError):
        BoundarySpec({("mid", "u^1"): 0.0})


def test_boundary_spec_helpers():
    bcs = BoundarySpec.clamp("0", ["u^1", "u^2"]).with_anchors({("L", "u^1"): 2.0})
    assert bcs.is_anchored("L", "u^1") and bcs.value("L", "u^1") == 2.0
    assert not bcs.without(lambda end, dof: end == "L").is_anchored("L", "u^1")


# reconstruct_3d ---------------------------------------------------------


def _state(n=5, u=None, P=None, N=None):
    s = FieldState.zeros(n)
    return s.replace(
        u=np.broadcast_to(u, s.u.shape) if u is not None else s.u,
        P=np.broadcast_to(P, s.P.shape) if P is not None else s.P,
        N=np.broadcast_to(N, s.N.shape) if N is not None else s.N,
    )


WIDE = BeamConfig(ell4_over_12=16.0 / 12)  # side 2, transversal half-width 1


@pytest.mark.parametrize("X2,X3", [(0.0, 0.0), (0.3, -0.5), (-1.0, 1.0)])
def test_reconstruct_rigid_translation(X2, X3):
    u3, P3 = reconstruct_3d(_state(u=[1.0, 0, 0]), WIDE, X2, X3, X1=0.5)
    np.testing.assert_array_equal(u3, [1.0, 0, 0])
    assert not P3.any()


def test_reconstruct_transversal_P():
    P = np.zeros((3, 3))
    P[0, 1] = 2.0
    u3, _ = reconstruct_3d(_state(P=P), WIDE, 0.5, 0.0, X1=0.0)
    np.testing.assert_allclose(u3, [1.0, 0, 0])


def test_reconstruct_transversal_N():
    N = np.zeros((3, 3, 3))
    N[0, 0, 1] = 3.0
    _, P3 = reconstruct_3d(_state(N=N), WIDE, 1.0, 0.0, X1=0.0)
    assert P3[0, 0] == 3.0


def test_reconstruct_origin_exact(rng):
    s = random_state(rng, 9)
    u3, P3 = reconstruct_3d(s, WIDE, 0.0, 0.0)
    np.testing.assert_array_equal(u3, s.u)
    np.testing.assert_array_equal(P3, s.P)


def test_reconstruct_linear(rng):
    s1, s2 = random_state(rng, 9), random_state(rng, 9)
    lhs = reconstruct_3d(s1.scaled(2.0) + s2.scaled(-3.0), WIDE, 0.4, -0.2)
    r1, r2 = reconstruct_3d(s1, WIDE, 0.4, -0.2), reconstruct_3d(s2, WIDE, 0.4, -0.2)
    for k in range(2):
        np.testing.assert_allclose(lhs[k], 2.0 * r1[k] - 3.0 * r2[k], atol=1e-12)


def test_reconstruct_nearest_node():
    s = FieldState.zeros(5)
    s = s.replace(u=np.outer(s.X, [1.0, 0, 0]))
    u3, _ = reconstruct_3d(s, WIDE, 0.0, 0.0, X1=0.6)
    assert u3[0] == 0.5


def test_reconstruct_out_of_range():
    with pytest.raises(ValueError):
        reconstruct_3d(FieldState.zeros(5), WIDE, 1.5, 0.0)
