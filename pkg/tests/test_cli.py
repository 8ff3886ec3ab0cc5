import csv
import json

import numpy as np
import pytest

from gcbeam import cli
from gcbeam.cli import SpecError, main, parse_spec
from gcbeam.solver import SolverError

TRACTION_SPEC = {
    "regime": "holonomic",
    "moduli": {"a": 2.0, "b": 0.0, "c": 0.0, "d": 0.0, "e": 0.0},
    "frozen_u_alpha_slope": [[0, 0], [0, 0], [0, 0]],
    "subsystem": "traction",
    "grid": 11,
    "anchors": [{"end": "0", "dof": "u^1", "value": 0.0}],
    "loads": {"T0_right": [4.0, 0, 0]},
    "outputs": ["fields", "energy"],
}

NONHOLO_SPEC = {
    "regime": "non-holonomic",
    "moduli": {"a": 1, "b": 1, "c": 1, "d": 2, "e": 3},
    "ell4_over_12": 0.1,
    "grid": 41,
    "clamp": ["0"],
    "loads": {"presets": [{"name": "cantilever-tip-force", "component": 2, "value": 1.0}]},
    "outputs": ["fields", "energy", "defects", "graph"],
}


def write_spec(tmp_path, data, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.reader(fh))


def column(rows, name):
    k = rows[0].index(name)
    return np.array([float(r[k]) for r in rows[1:]])


# examples ---------------------------------------------------------------


def test_traction_closed_form(tmp_path):
    out = tmp_path / "out"
    assert main(["--spec", write_spec(tmp_path, TRACTION_SPEC), "--out", str(out)]) == 0
    rows = read_csv(out / "fields.csv")
    assert rows[0] == ["X", "u^1"]
    np.testing.assert_allclose(column(rows, "u^1"), 2.0 * column(rows, "X"), atol=1e-12)
    energy = dict(r for r in read_csv(out / "energy.csv")[1:])
    # stored a u'^2 / 2 = 4 against work T u(1) = 8
    assert float(energy["sym_P_term"]) == pytest.approx(4.0)
    assert float(energy["external_term"]) == pytest.approx(-8.0)
    assert float(energy["total"]) == pytest.approx(-4.0)


def test_graph_output(tmp_path):
    out = tmp_path / "out"
    assert main(["--spec", write_spec(tmp_path, NONHOLO_SPEC), "--out", str(out)]) == 0
    report = (out / "report.txt").read_text(encoding="utf-8")
    assert "N^1_11, P^1_1, P^1_1,1, u^1, u^1_,1" in report
    assert "N^1_11\tP^1_1,1\te\t3" in (out / "graph.tsv").read_text(encoding="utf-8")


def test_index_note_reported(tmp_path):
    out = tmp_path / "out"
    main(["--spec", write_spec(tmp_path, NONHOLO_SPEC), "--out", str(out), "--emit", "fields"])
    assert "note: " + cli.A.INDEX_NOTE in (out / "report.txt").read_text(encoding="utf-8")


def test_emit_limits_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["--spec", write_spec(tmp_path, NONHOLO_SPEC), "--out", str(out), "--emit", "defects"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["defects.csv", "report.txt"]
    assert len(read_csv(out / "defects.csv")[0]) == 28


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "env_out"))
    assert main(["--spec", write_spec(tmp_path, TRACTION_SPEC)]) == 0
    assert (tmp_path / "env_out" / "fields.csv").exists()


def test_grid_override(tmp_path):
    out = tmp_path / "out"
    main(["--spec", write_spec(tmp_path, TRACTION_SPEC), "--out", str(out), "--grid", "21"])
    assert len(read_csv(out / "fields.csv")) == 22


def test_sweep_csv(tmp_path):
    spec = dict(NONHOLO_SPEC, loads={"f0": {"constant": [1.0, 0.5, 0.0]}})
    out = tmp_path / "out"
    code = main(["--spec", write_spec(tmp_path, spec), "--out", str(out), "--sweep", "e", "--values", "1e3,1e2,1e4"])
    assert code == 0
    rows = read_csv(out / "sweep_e.csv")
    assert rows[0] == ["e", "u", "P", "N_minus_gradP", "tip"]
    assert [float(r[0]) for r in rows[1:4]] == [1e2, 1e3, 1e4]
    assert np.all(np.diff([float(r[3]) for r in rows[1:4]]) < 0)
    assert sorted(p.name for p in out.iterdir()) == ["report.txt", "sweep_e.csv"]


@pytest.mark.parametrize(
    "load",
    [
        {"polynomial": [[0, 0, 0], [1.0, 0, 0]]},
        {"table": {"X": [0.0, 1.0], "values": [[0, 0, 0], [1.0, 0, 0]]}},
    ],
)
def test_bulk_load_forms_agree(load, tmp_path):
    # both describe f0 = (X, 0, 0)
    spec = dict(TRACTION_SPEC, loads={"f0": load}, grid=41)
    out = tmp_path / "out"
    assert main(["--spec", write_spec(tmp_path, spec), "--out", str(out)]) == 0
    X = column(read_csv(out / "fields.csv"), "X")
    u = column(read_csv(out / "fields.csv"), "u^1")
    exact = (X / 2 - X**3 / 6) / 2.0  # -2 u'' = X, u(0) = 0, u'(1) = 0
    np.testing.assert_allclose(u, exact, atol=1e-4)


def test_uniform_preset_matches_constant():
    a = parse_spec(dict(TRACTION_SPEC, loads={"presets": [{"name": "uniform-f0", "value": [1.0, 2.0, 3.0]}]}))
    b = parse_spec(dict(TRACTION_SPEC, loads={"f0": {"constant": [1.0, 2.0, 3.0]}}))
    X = np.linspace(0, 1, 5)
    np.testing.assert_array_equal(a.loads.bulk(X)[0], b.loads.bulk(X)[0])


# errors -----------------------------------------------------------------


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("moduli"),
        lambda d: d.update(regime="cosserat"),
        lambda d: d["moduli"].update(a=-1.0),
        lambda d: d.update(grid=3),
        lambda d: d.update(loads={"f0": {"constant": [1.0, 2.0]}}),
        lambda d: d.update(outputs=["sweep"]),
        lambda d: d.update(extra=1),
    ],
)
def test_invalid_spec_exit_one(mutate, tmp_path):
    data = json.loads(json.dumps(TRACTION_SPEC))
    mutate(data)
    out = tmp_path / "out"
    assert main(["--spec", write_spec(tmp_path, data), "--out", str(out)]) == 1
    assert not out.exists()


def test_unreadable_spec_exit_one(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert main(["--spec", str(path), "--out", str(tmp_path / "out")]) == 1
    assert main(["--spec", str(tmp_path / "missing.json"), "--out", str(tmp_path / "out")]) == 1


def test_unknown_emit_exit_one(tmp_path):
    assert main(["--spec", write_spec(tmp_path, TRACTION_SPEC), "--out", str(tmp_path / "o"), "--emit", "stress"]) == 1


def test_sweep_without_values_exit_one(tmp_path):
    assert main(["--spec", write_spec(tmp_path, NONHOLO_SPEC), "--out", str(tmp_path / "o"), "--sweep", "e"]) == 1


def test_illposed_exit_two(tmp_path, capsys):
    spec = dict(TRACTION_SPEC, anchors=[])
    out = tmp_path / "out"
    assert main(["--spec", write_spec(tmp_path, spec), "--out", str(out)]) == 2
    assert "u^1" in capsys.readouterr().err
    assert not out.exists()


def test_solver_failure_exit_three(tmp_path, monkeypatch):
    def boom(ds):
        raise SolverError("factorisation failed")

    monkeypatch.setattr(cli, "solve_vector", boom)
    out = tmp_path / "out"
    assert main(["--spec", write_spec(tmp_path, TRACTION_SPEC), "--out", str(out)]) == 3
    assert not out.exists()


def test_parse_spec_errors_are_spec_errors():
    with pytest.raises(SpecError):
        parse_spec({"regime": "holonomic"})


# properties -------------------------------------------------------------


def test_outputs_byte_identical(tmp_path):
    path = write_spec(tmp_path, NONHOLO_SPEC)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--spec", path, "--out", str(a)]) == 0
    assert main(["--spec", path, "--out", str(b)]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_fields_round_trip_precision(tmp_path):
    out = tmp_path / "out"
    main(["--spec", write_spec(tmp_path, TRACTION_SPEC), "--out", str(out)])
    spec = parse_spec(TRACTION_SPEC)
    from gcbeam.solver import discretize, solve

    state = solve(discretize(cli.build_bvp(spec), spec.n))
    np.testing.assert_array_equal(column(read_csv(out / "fields.csv"), "u^1"), state.u[:, 0])
