import io
import json
from importlib import resources

import numpy as np
import pytest
from numpy.testing import assert_allclose

from twoway_se.cli import EXIT_COLLINEAR, EXIT_IMBALANCE, EXIT_IO, EXIT_SCHEMA, main

TINY = str(resources.files("twoway_se").joinpath("data/tiny_panel.csv"))
SCHEMA_ARGS = ["--unit-col", "firm", "--time-col", "year", "--y-col", "y", "--x-cols", "x1,x2"]

# Pooled OLS with intercept on the bundled 3 x 4 panel. Variances are the
# diagonal of Q^-1 Omega Q^-1, with Omega from explicit pair enumeration.
GOLDEN_BETA = [0.7555269452708023, 1.1784383782263392, -0.05682093211326482]
GOLDEN_VAR = {
    "EHW": [0.02184035199285468, 0.012467999228447789, 0.024994505933448784],
    "CR_I": [0.0167520671022703, 0.0036462204687774304, 0.005036368001990892],
    "CR_T": [0.006978057308979819, 0.003996777642337265, 0.02959922725657946],
    "CGM": [0.0018897724183954145, -0.0048250011173331005, 0.009641089325121572],
    "THOMPSON": [-0.0029328562455337996, 0.00034063638871572964, -0.004398987802441962],
}


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def fit(*extra, path=TINY):
    return run(["fit", "--input", path, *SCHEMA_ARGS, *extra])


@pytest.mark.parametrize("name", sorted(GOLDEN_VAR))
def test_fit_golden(name):
    code, out, err = fit("--estimator", name)
    assert code == 0
    doc = json.loads(out)
    assert doc["coefficients"] == ["const", "x1", "x2"]
    assert_allclose(doc["beta"], GOLDEN_BETA, rtol=1e-10)
    v = np.diag(np.array(doc["covariance"]["v_hat"]))
    assert_allclose(v, GOLDEN_VAR[name], rtol=1e-10)
    expected_se = np.sqrt(np.clip(GOLDEN_VAR[name], 0, None))
    assert_allclose(doc["std_errors"], expected_se, rtol=1e-10)
    negative = [x < 0 for x in GOLDEN_VAR[name]]
    assert doc["covariance"]["negative_variance_flags"] == negative
    assert ("negative variance" in err) == any(negative)


def test_chs_without_lags_equals_cgm():
    _, cgm, _ = fit("--estimator", "CGM")
    _, chs, _ = fit("--estimator", "CHS", "--m", "0", "--no-evc")
    a, b = json.loads(cgm), json.loads(chs)
    assert_allclose(b["covariance"]["v_hat"], a["covariance"]["v_hat"], rtol=1e-12, atol=1e-15)
    assert b["estimator"] == "CHS[m=0,noevc]"


def test_default_is_chs_with_evc():
    code, out, _ = fit()
    doc = json.loads(out)
    assert code == 0
    assert doc["estimator"] == "CHS"
    assert doc["evc"]["applied"] is True
    assert doc["m_hat"] == pytest.approx(doc["covariance"]["bandwidth"]["m_value"])
    assert all(se >= 0 for se in doc["std_errors"])
    eig = np.linalg.eigvalsh(np.array(doc["covariance"]["v_hat"]))
    assert eig[0] >= -1e-15


def test_fit_is_byte_identical():
    assert fit()[1] == fit()[1]
    assert fit("--format", "csv")[1] == fit("--format", "csv")[1]


def test_fit_formats():
    code, out, _ = fit("--format", "csv", "--estimator", "EHW")
    assert code == 0 and out.splitlines()[0].startswith("name,estimate")
    code, out, _ = fit("--format", "table", "--estimator", "EHW", "--level", "0.9")
    assert code == 0 and "90%" in out


def test_dof_adjust():
    _, plain, _ = fit("--estimator", "EHW")
    _, adj, _ = fit("--estimator", "EHW", "--dof-adjust")
    ratio = np.array(json.loads(adj)["covariance"]["v_hat"]) / np.array(
        json.loads(plain)["covariance"]["v_hat"])
    assert_allclose(ratio, 12 / 9, rtol=1e-12)


def test_fixed_effects_and_no_intercept():
    code, out, _ = fit("--fixed-effects", "--estimator", "CR_I")
    doc = json.loads(out)
    assert code == 0 and doc["fixed_effects"] and doc["coefficients"] == ["x1", "x2"]
    code, out, _ = fit("--no-intercept", "--estimator", "EHW")
    assert json.loads(out)["coefficients"] == ["x1", "x2"]


def test_bandwidth_command():
    code, out, _ = run(["bandwidth", "--input", TINY, *SCHEMA_ARGS])
    doc = json.loads(out)
    assert code == 0
    assert doc["stock_watson"]["m_value"] == pytest.approx(0.75 * 4 ** (1 / 3))
    assert len(doc["rho_hats"]) == 3


def write(tmp_path, text):
    path = tmp_path / "panel.csv"
    path.write_text(text)
    return str(path)


def test_unbalanced_exit_code(tmp_path):
    path = write(tmp_path, "firm,year,y,x1,x2\nA,1,1,2,3\nA,2,1,3,3\nB,1,1,2,4\n")
    code, out, err = fit(path=path)
    assert code == EXIT_IMBALANCE == 3
    assert out == ""
    doc = json.loads(err.strip().splitlines()[-1])
    assert doc["exit_code"] == 3 and "(B, 2)" in doc["message"]


def test_schema_and_parse_exit_codes(tmp_path):
    code, _, err = run(["fit", "--input", TINY, "--unit-col", "firm", "--time-col", "year",
                        "--y-col", "y", "--x-cols", "x9"])
    assert code == EXIT_SCHEMA and "x9" in err
    path = write(tmp_path, "firm,year,y,x1,x2\nA,1,1,2,3\nA,1,1,2,3\n")
    assert fit(path=path)[0] == EXIT_SCHEMA
    path = write(tmp_path, "firm,year,y,x1,x2\nA,1,one,2,3\n")
    code, _, err = fit(path=path)
    assert code == EXIT_SCHEMA and "row 2" in err
    assert fit("--estimator", "nope")[0] == EXIT_SCHEMA


def test_collinear_exit_code(tmp_path):
    rows = ["firm,year,y,x1,x2"] + [f"{u},{t},{t * 0.3 + i},{t + i},{2 * (t + i)}"
                                    for i, u in enumerate("AB") for t in range(3)]
    code, _, err = fit(path=write(tmp_path, "\n".join(rows) + "\n"))
    assert code == EXIT_COLLINEAR and "collinear" in err


def test_missing_file_exit_code(tmp_path):
    code, _, err = fit(path=str(tmp_path / "absent.csv"))
    assert code == EXIT_IO
    assert json.loads(err)["exit_code"] == 5


def sim(*extra):
    return run(["simulate", "--reps", "12", "--n", "6", "--t", "8", "--rho", "0.5",
                "--weights", "0.25,0.5,0.25", "--seed", "3", *extra])


def test_simulate_byte_identical_across_runs_and_workers(tmp_path):
    paths = [tmp_path / f"r{j}.json" for j in range(3)]
    sim("--output", str(paths[0]))
    sim("--output", str(paths[1]))
    sim("--output", str(paths[2]), "--workers", "3")
    blobs = [p.read_bytes() for p in paths]
    assert blobs[0] == blobs[1] == blobs[2]
    doc = json.loads(blobs[0])
    assert doc["replications"] == 12 and doc["config"]["seed"] == 3
    assert sim()[1] == sim("--workers", "2")[1]


def test_simulate_csv_and_power(tmp_path):
    out = tmp_path / "cov.csv"
    assert sim("--output", str(out))[0] == 0
    assert out.read_text().splitlines()[0].startswith("estimator,coverage")
    power = tmp_path / "power.csv"
    code, text, _ = sim("--mode", "power", "--b-grid", "0.5:1.5:5", "--estimators", "CGM,CHS",
                        "--output", str(power))
    lines = power.read_text().splitlines()
    assert code == 0 and lines[0] == "b,CGM,CHS" and len(lines) == 6


def test_simulate_preset_row():
    code, out, err = run(["simulate", "--table1-row", "I", "--reps", "4",
                          "--estimators", "EHW,CHS"])
    assert code == 0
    assert "[table1:I]" in out and "published: EHW=0.947" in out
    assert "N=50 T=100" in out
    assert "elapsed" in err


def test_simulate_fixed_effect_design():
    code, out, _ = run(["simulate", "--design", "fixed-effect", "--n", "5", "--t", "6",
                        "--reps", "3", "--estimators", "CGM"])
    assert code == 0 and "FIXED_EFFECT" in out


def test_simulate_bad_design():
    code, _, err = run(["simulate", "--reps", "2", "--weights", "1,2"])
    assert code == EXIT_SCHEMA and "weights" in err
    code, _, _ = run(["simulate", "--reps", "2", "--table1-row", "I", "--table3-row", "I"])
    assert code == EXIT_SCHEMA
