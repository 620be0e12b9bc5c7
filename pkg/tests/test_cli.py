import csv
import json
import math

import numpy as np
import pytest

from lortori.cli import main, read_field_csv
from lortori.metric import flat

BAD = {"family": "raw", "g11": [[0, 0, 1, 0]], "g12": [], "g22": [[0, 0, 1, 0]]}


def run(tmp_path, *args):
    code = main([*args, "--out", str(tmp_path)])
    return code


def load(path):
    return json.loads(path.read_text())


def field_rows(path):
    with open(path) as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def test_cone_flat(tmp_path):
    assert run(tmp_path, "cone", "--metric", "flat") == 0
    doc = load(tmp_path / "cone.json")
    r = math.sqrt(0.5)
    assert np.allclose(doc["m_minus"], (r, r)) and np.allclose(doc["m_plus"], (-r, r))


def test_cone_sheared_length_stable(tmp_path):
    out = []
    for L in ("100", "200"):
        assert run(tmp_path / L, "cone", "--metric", "sheared", "--length", L) == 0
        out.append(load(tmp_path / L / "cone.json"))
    assert np.allclose(out[0]["m_minus"], out[1]["m_minus"], atol=1e-3)


def test_bad_spec_exit_2(tmp_path, capsys):
    spec = tmp_path / "bad.json"
    spec.write_text(json.dumps(BAD))
    assert run(tmp_path, "cone", "--metric", str(spec)) == 2
    assert "signature_check" in capsys.readouterr().err


def test_bad_flag_value_exit_2(tmp_path):
    assert run(tmp_path, "distance", "--metric", "flat", "--x", "0,a", "--y", "1,2") == 2


def test_distance(tmp_path):
    assert run(tmp_path, "distance", "--metric", "flat", "--x", "0,0", "--y", "1,2",
               "--cross-check") == 0
    doc = load(tmp_path / "distance.json")
    assert doc["value"] == pytest.approx(1.7320508, abs=1e-7)
    assert "method_agreement" in doc and len(doc["maximizer"]) > 1


def test_distance_spacelike(tmp_path):
    assert run(tmp_path, "distance", "--metric", "flat", "--x", "0,0", "--y", "2,1") == 0
    doc = load(tmp_path / "distance.json")
    assert doc["value"] == 0 and doc["status"] == "not-causally-related"


def test_pole(tmp_path):
    assert run(tmp_path, "pole", "--metric", "flat", "--p", "0,0", "--horizon", "5",
               "--directions", "8") == 0
    assert load(tmp_path / "pole.json")["is_pole_up_to_horizon"]


@pytest.fixture(scope="module")
def flat_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("flat")
    assert main(["busemann", "--metric", "flat", "--alpha", "0,1", "--res", "17",
                 "--window=0,2,0,2", "--out", str(out)]) == 0
    return out


def test_busemann_flat_columns(flat_run):
    rows = [r for r in field_rows(flat_run / "field.csv") if r["valid"]]
    c = np.array([r["u"] + r["y"] for r in rows])
    assert c.max() - c.min() < 1e-4
    assert load(flat_run / "history.json")["converged"]
    assert load(flat_run / "periodicity.json")["per_shift"]["e2"] < 1e-8


def test_busemann_tilted_gradient_constant(tmp_path):
    a = f"{math.sin(0.3)},{math.cos(0.3)}"
    assert run(tmp_path, "busemann", "--metric", "flat", "--alpha", a, "--res", "17") == 0
    rows = [r for r in field_rows(tmp_path / "field.csv") if r["valid"]]
    for key in ("ux", "uy"):
        col = np.array([r[key] for r in rows])
        assert col.max() - col.min() < 1e-4


def test_busemann_deterministic(flat_run, tmp_path):
    assert run(tmp_path, "busemann", "--metric", "flat", "--alpha", "0,1", "--res", "17",
               "--window=0,2,0,2") == 0
    assert (tmp_path / "field.csv").read_bytes() == (flat_run / "field.csv").read_bytes()


def test_field_round_trip(flat_run):
    f = read_field_csv(flat_run / "field.csv", flat())
    rows = field_rows(flat_run / "field.csv")
    assert f.values.shape == (17, 17)
    u = np.array([r["u"] for r in rows]).reshape(17, 17)
    assert np.array_equal(np.where(f.valid, f.values, 0), np.where(f.valid, u, 0))


def test_foliate_from_field(flat_run, tmp_path):
    assert run(tmp_path, "foliate", "--metric", "flat", "--field",
               str(flat_run / "field.csv"), "--seeds", "0.3,0.2;0.6,0.2",
               "--horizon", "20") == 0
    with open(tmp_path / "leaves.csv") as fh:
        ids = {row["leaf_id"] for row in csv.DictReader(fh)}
    assert ids == {"0", "1"}
    assert load(tmp_path / "disjointness.json")["min_separation"] > 0


def test_missing_field_exit_2(tmp_path):
    assert run(tmp_path, "foliate", "--metric", "flat", "--field", str(tmp_path / "x.csv")) == 2


def test_numerical_failure_exit_1(tmp_path):
    # a tolerance below what the pole sequence can reach
    assert run(tmp_path, "busemann", "--metric", "flat", "--alpha", "0.3,1", "--res", "9",
               "--tol", "1e-12") == 1


def test_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"metric": "flat", "x": "0,0", "y": "0,3"}))
    assert run(tmp_path, "distance", "--config", str(cfg)) == 0
    assert load(tmp_path / "distance.json")["value"] == pytest.approx(3.0)
