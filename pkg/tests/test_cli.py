import csv
import json
import math
import subprocess
import sys

import pytest

from formlab.cli import (
    ARTIFACT_VERSION,
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_IO,
    EXIT_OK,
    ConfigError,
    check_expectations,
    format_catalog,
    main,
    observed_order,
    scenario_from_dict,
)

HARDY_TOML = """
name = "hardy_bound"
example = "hardy(n=3, c=0.16)"
operations = ["formbound"]

[mesh]
domain = [1e-12, 1e12]
elements = 4000

[expect.formbound]
lambda_upper = { value = 0.64, rtol = 0.02 }
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_run_hardy_formbound(tmp_path):
    cfg = write(tmp_path, "hardy.toml", HARDY_TOML)
    assert main(["--out", str(tmp_path), "run", str(cfg)]) == EXIT_OK
    rec = json.loads((tmp_path / "hardy_bound.json").read_text())
    assert rec["artifact_version"] == ARTIFACT_VERSION
    (op,) = rec["operations"]
    assert op["verdict"] == "pass"
    assert op["payload"]["lambda_upper"] == pytest.approx(0.64, rel=0.02)
    assert op["seconds"] >= 0


def test_empty_operations_exit_code(tmp_path):
    cfg = write(tmp_path, "empty.toml", 'example = "constant"\noperations = []\n')
    assert main(["--out", str(tmp_path), "run", str(cfg)]) == EXIT_CONFIG


@pytest.mark.parametrize(
    "text",
    [
        'example = "nosuch"\noperations = ["formbound"]\n',
        'example = "constant"\noperations = ["teleport"]\n',
        'example = "constant"\noperations = ["formbound"]\n[tolerances]\neigen = -1\n',
        'example = "constant"\noperations = ["formbound"\n',
        'example = "constant"\nbogus = 1\noperations = ["formbound"]\n',
        'potential = { kind = "atomic" }\noperations = ["formbound"]\n',
    ],
)
def test_config_errors(tmp_path, text):
    cfg = write(tmp_path, "bad.toml", text)
    assert main(["--out", str(tmp_path), "run", str(cfg)]) == EXIT_CONFIG


def test_missing_config_is_io_error(tmp_path):
    assert main(["--out", str(tmp_path), "run", str(tmp_path / "absent.toml")]) == EXIT_IO


def test_unwritable_output_is_io_error(tmp_path):
    cfg = write(tmp_path, "c.toml", 'example = "constant"\noperations = ["gauge"]\n[gauge]\nelements = 50\n')
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["--out", str(blocker), "run", str(cfg)]) == EXIT_IO


def test_operation_failure_exit_code(tmp_path):
    # the gauge problem lives on the unit interval, not on an annulus
    cfg = write(tmp_path, "g.toml", 'example = "hardy"\noperations = ["gauge"]\n')
    assert main(["--out", str(tmp_path), "run", str(cfg)]) == EXIT_FAIL
    rec = json.loads((tmp_path / "hardy.json").read_text())
    assert rec["operations"][0]["verdict"] == "fail"
    assert "error" in rec["operations"][0]["payload"]


def test_gauge_json_config(tmp_path):
    cfg = write(tmp_path, "gauge.json", json.dumps({
        "name": "gauge", "potential": {"kind": "constant", "value": math.pi**2 / 4},
        "operations": ["gauge"], "gauge": {"elements": 1000},
    }))
    assert main(["--out", str(tmp_path), "run", str(cfg)]) == EXIT_OK
    rec = json.loads((tmp_path / "gauge.json").read_text())
    assert rec["operations"][0]["payload"]["value_at_half"] == pytest.approx(1.41421, abs=1e-5)


def test_pipeline_solve_then_riccati(tmp_path):
    text = """
example = "constant"
operations = ["solve", "riccati", "diagnose"]
[exhaustion]
levels = 4
elements = 400
[diagnostics]
count = 8
[expect.riccati]
max_residual = { max = 1e-3 }
"""
    cfg = write(tmp_path, "chain.toml", text)
    assert main(["--out", str(tmp_path), "run", str(cfg)]) == EXIT_OK
    rec = json.loads((tmp_path / "constant.json").read_text())
    names = [o["name"] for o in rec["operations"]]
    assert names == ["solve", "riccati", "diagnose"]
    assert all(o["verdict"] == "pass" for o in rec["operations"])


def test_determinism(tmp_path):
    text = 'example = "oscillating_1d"\noperations = ["formbound", "riccati"]\n[mesh]\nelements = 500\n'
    cfg = write(tmp_path, "d.toml", text)
    recs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["--out", str(out), "run", str(cfg)]) == EXIT_OK
        rec = json.loads((out / "oscillating_1d.json").read_text())
        for op in rec["operations"]:
            op.pop("seconds")
        recs.append(json.dumps(rec, sort_keys=True))
    assert recs[0] == recs[1]


def test_expectation_rules():
    payload = {"a": 1.0, "b": {"c": [3, 4]}, "flag": True}
    checks = check_expectations("op", payload, {"op": {
        "a": {"value": 1.01, "rtol": 0.02}, "b.c.1": {"min": 4, "max": 4},
        "flag": {"equals": True}, "missing": {"min": 0},
    }})
    assert [c["ok"] for c in checks] == [True, True, True, False]


# -------------------------------------------------------------------- study


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_study_formbound_order_two(tmp_path):
    text = 'name = "c"\nexample = "constant(q=2.0)"\noperations = ["formbound"]\n[mesh]\nelements = 20\n'
    cfg = write(tmp_path, "s.toml", text)
    assert main(["--out", str(tmp_path), "study", str(cfg), "--refinements", "4"]) == EXIT_OK
    rows = read_csv(tmp_path / "c_study.csv")
    assert [int(r["elements"]) for r in rows] == [20, 40, 80, 160]
    assert float(rows[-1]["observed_order"]) == pytest.approx(2.0, abs=0.1)


def test_study_gauge_exact(tmp_path):
    text = 'name = "z"\npotential = { kind = "constant", value = 0.0 }\noperations = ["gauge"]\n[gauge]\nelements = 50\n'
    cfg = write(tmp_path, "z.toml", text)
    assert main(["--out", str(tmp_path), "study", str(cfg), "--refinements", "3"]) == EXIT_OK
    rows = read_csv(tmp_path / "z_study.csv")
    assert len({r["value"] for r in rows}) == 1
    assert rows[-1]["observed_order"] == "exact"


def test_study_riccati_hardy_monotone(tmp_path):
    text = """
name = "r"
example = "hardy(n=3, c=0.1875)"
operations = ["riccati"]
[mesh]
elements = 500
"""
    cfg = write(tmp_path, "r.toml", text)
    assert main(["--out", str(tmp_path), "study", str(cfg), "--refinements", "3"]) == EXIT_OK
    vals = [float(r["value"]) for r in read_csv(tmp_path / "r_study.csv")]
    assert vals[0] > vals[1] > vals[2]


def test_study_needs_two_refinements(tmp_path):
    cfg = write(tmp_path, "s.toml", 'example = "constant"\noperations = ["formbound"]\n')
    assert main(["--out", str(tmp_path), "study", str(cfg), "--refinements", "1"]) == EXIT_CONFIG


def test_study_failure_keeps_partial_table(tmp_path):
    # q = 10 > pi^2 loses coercivity only once the mesh resolves it
    text = 'name = "f"\nexample = "constant(q=10)"\noperations = ["gauge"]\n[gauge]\nelements = 2\n'
    cfg = write(tmp_path, "f.toml", text)
    code = main(["--out", str(tmp_path), "study", str(cfg), "--refinements", "4"])
    rows = read_csv(tmp_path / "f_study.csv")
    assert code == EXIT_FAIL
    assert 1 <= len(rows) < 4


@pytest.mark.parametrize(
    "values, want",
    [([1.0, 1.0, 1.0], [None, None, "exact"]), ([1.0, 0.5, 0.375], [None, None, 2.0])],
)
def test_observed_order(values, want):
    assert observed_order(values) == want


# ------------------------------------------------------------------ catalog


def test_catalog_listing():
    text = format_catalog()
    hardy = text[text.index("hardy(") :]
    assert "alpha+-" in hardy.splitlines()[2]
    assert "Gamma = sin r" in text


def test_catalog_exit_code(capsys):
    assert main(["catalog"]) == EXIT_OK
    assert "radial_oscillating" in capsys.readouterr().out
    assert main(["catalog", "--json"]) == EXIT_OK
    names = [d["name"] for d in json.loads(capsys.readouterr().out)]
    assert names[0] == "hardy"


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "formlab", "catalog"], capture_output=True, text=True)
    assert out.returncode == 0 and "hardy" in out.stdout


def test_scenario_validation_direct():
    with pytest.raises(ConfigError):
        scenario_from_dict({"example": "hardy(n=3, k=1)", "operations": ["formbound"]})
    sc = scenario_from_dict({"example": "hardy(n=4, c=0.5)", "operations": ["formbound"]})
    assert sc.params == {"n": 4, "c": 0.5}
