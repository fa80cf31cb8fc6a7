import json
import math

import pytest

import bundleflow


def test_symmetric_eta():
    e = bundleflow.einstein_points((1, 1))
    y1, y2 = e["eta"]["location"]
    assert abs(y1 - (3 - math.sqrt(2)) / 14) < 1e-12
    assert y1 == y2
    assert e["eta"]["classification"] == "sink"


def test_fixed_point_order():
    kinds = [fp["kind"] for fp in bundleflow.fixed_points((2, 3))]
    assert kinds == ["origin", "v1", "v2", "v1_tilde", "v2_tilde", "xi", "eta"]


def test_field_vanishes_at_xi():
    xi = bundleflow.einstein_points((2, 5))["xi"]["location"]
    v = bundleflow.vector_field(xi, (2, 5))
    assert max(abs(c) for c in v) < 1e-12


def test_integrate_reaches_eta():
    run = bundleflow.integrate((0.2, 0.2), (1, 1))
    assert run["terminal_event"] == "reached_fixed_point:eta"
    assert len(run["tau"]) == len(run["u"])


def test_beta_closed_form():
    assert abs(bundleflow.beta(3, 1, "plus") - (9 + math.sqrt(21)) / 24) < 1e-14


def test_spectrum_counts():
    spec = bundleflow.spectrum_v2(4, 2, "plus")
    assert sum(1 for re, _ in spec if re > 0) == 4
    assert sum(1 for re, _ in spec if re < 0) == 3


def test_errors_map_to_python():
    with pytest.raises(bundleflow.ConfigError):
        bundleflow.einstein_points((0, 1))
    with pytest.raises(ValueError):
        bundleflow.beta(2, 1, "plus")


def test_verify_family():
    r = bundleflow.verify("eta-bounds")
    assert r["all_pass"]
    assert r["summary"]["eta-bounds"][0] == r["summary"]["eta-bounds"][1]


def test_run_command(tmp_path):
    code, err = bundleflow.run_command("einstein", json.dumps({"params": {"n": [1, 2]}}), str(tmp_path))
    assert code == 0, err
    doc = json.loads((tmp_path / "einstein.json").read_text())
    assert doc["params"]["n"] == [1, 2]
    code, err = bundleflow.run_command("flow", '{"nope": 1}', str(tmp_path / "bad"))
    assert code == 1
    assert "nope" in err
