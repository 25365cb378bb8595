import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from bregdecomp.cli import main
from bregdecomp.config import DGPConfig, LamGrid, ToyConfig, load_config, parse_config
from bregdecomp.empirical import read_samples_csv
from bregdecomp.errors import ConfigError
from bregdecomp.harness import dgp_targets, gaussian_curves, run_pipeline, simulate_2x2, write_report


def column(table, name):
    return np.array([row[table.columns.index(name)] for row in table.rows])


# -- toy curves ------------------------------------------------------------


def test_curve_columns_and_examples():
    t = gaussian_curves(ToyConfig())
    assert t.columns == ["lam", "g1", "total_eps_0.5", "total_eps_1.0"]
    lam = column(t, "lam")
    assert len(lam) == 200 and lam[0] == 0 and lam[-1] == 2
    assert column(t, "g1")[0] == 0
    assert column(t, "total_eps_0.5")[0] == pytest.approx(0.125, abs=1e-15)
    assert column(t, "g1")[-1] == pytest.approx(2.0, abs=1e-15)
    one = gaussian_curves(ToyConfig(lam_grid=LamGrid(0, 2, 3), eps_list=(1.0,)))
    assert column(one, "total_eps_1.0")[1] == pytest.approx(1.5, abs=1e-15)


def test_curves_match_closed_form_everywhere():
    t = gaussian_curves(ToyConfig())
    lam = np.linspace(0, 2, 200)
    assert np.max(np.abs(column(t, "g1") - lam**2 / 2)) <= 1e-12
    for eps in (0.5, 1.0):
        want = lam**2 / 2 + eps**2 / 2 + 0.5 * lam**2 * eps**2
        assert np.max(np.abs(column(t, f"total_eps_{eps!r}") - want)) <= 1e-12


def test_curves_scale_with_variance():
    t = gaussian_curves(ToyConfig(sigma2=2.0, eps_list=(1.0,)))
    lam = column(t, "lam")
    assert column(t, "g1") == pytest.approx(lam**2 / 4)


def test_curve_grid_validation():
    with pytest.raises(ValueError):
        gaussian_curves(ToyConfig(lam_grid=LamGrid(0, 2, 1)))


# -- simulation ------------------------------------------------------------


def test_ideal_regimes_have_zero_loss():
    f = simulate_2x2(DGPConfig(lam_noise=0, eps_shift=0, n=100, n_clusters=7), seed=1)
    assert np.all(f.y == 0)
    assert len(f) == 400 and f.n_clusters == 7


@pytest.mark.parametrize("lam, eps, corr", [(1.0, 0.0, 0.0), (0.0, 0.8, 0.0), (0.6, 0.5, 0.7)])
def test_regime_means_within_three_se(lam, eps, corr):
    dgp = DGPConfig(lam_noise=lam, eps_shift=eps, interaction_corr=corr, n=100_000)
    f = simulate_2x2(dgp, seed=5)
    t = dgp_targets(dgp)
    want = {"00": 0.0, "01": t["g2"], "10": t["g1"], "11": t["g1"] + t["g2"] + t["g12"]}
    for r, mean in want.items():
        y = f.regime_slice(r).y
        se = y.std(ddof=1) / math.sqrt(y.size)
        assert abs(y.mean() - mean) <= max(3 * se, 1e-12), r


def test_tau_delta_sets_lambda():
    assert DGPConfig(tau=3.0, Delta=2.0).lam == 1.5


def test_simulation_validation():
    with pytest.raises(ValueError):
        simulate_2x2(DGPConfig(sigma2=0.0), seed=0)
    with pytest.raises(ValueError):
        simulate_2x2(DGPConfig(interaction_corr=1.5), seed=0)


# -- config ----------------------------------------------------------------


@pytest.mark.parametrize(
    "raw, where",
    [
        ({"mode": "nope"}, "config.mode"),
        ({"mode": "gaussian-demo", "toy": {"rho_toy": 2}}, "config.toy.rho_toy"),
        ({"mode": "gaussian-demo", "bogus": 1}, "bogus"),
        ({"mode": "decompose"}, "config.potential"),
        ({"mode": "estimate"}, "config.samples_csv"),
        ({"mode": "simulate", "dgp": {"n": 0}}, "config.dgp.n"),
        ({"mode": "simulate", "estimation": {"convention": "x"}}, "config.estimation.convention"),
    ],
)
def test_config_errors_name_the_field(raw, where):
    with pytest.raises(ConfigError, match=where.replace(".", r"\.")):
        parse_config(raw)


def test_config_syntax_error_has_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "mode": "simulate",\n  "seed": ,\n}\n')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(p)


def test_relative_csv_paths_resolve_against_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"mode": "estimate", "samples_csv": "s.csv"}))
    assert load_config(p).samples_csv == str(tmp_path / "s.csv")


# -- pipeline and CLI ------------------------------------------------------

SMALL_SIM = {"mode": "simulate", "seed": 3, "dgp": {"n": 400, "n_clusters": 20, "lam_noise": 0.8, "eps_shift": 0.6},
             "estimation": {"convention": "sequential", "n_boot": 200, "min_ess": 50}}


def write_config(tmp_path, raw, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


def test_decompose_orthogonal_report():
    cfg = parse_config({
        "mode": "decompose", "potential": {"kind": "squared_euclidean", "dim": 2}, "p_star": [1, 1],
        "sets": {"eps": {"kind": "halfspace", "a": [1, 0], "b": 0}, "lam": {"kind": "halfspace", "a": [0, 1], "b": 0}},
        "verification": {"n_samples": 200},
    })
    doc = json.loads(run_pipeline(cfg).to_json())
    res = doc["results"]
    assert res["decomposition"]["g12"] <= 1e-8
    assert res["decomposition"]["orthogonal"] is True
    assert res["normal_alignment"] <= 1e-10
    assert res["master_check"]["violations"] == []
    assert res["lb_safe"] == pytest.approx(1.0)
    assert doc["schema_version"] == "1.0" and doc["seed"] == 0


def test_simulate_report_contents(tmp_path):
    doc = json.loads(run_pipeline(parse_config(SMALL_SIM)).to_json())
    res = doc["results"]
    for key in ("regime_table", "components", "bootstrap", "ess_guardrail", "lb_safe", "penalty_ratio", "verdict"):
        assert key in res
    diag = res["regime_table"]["diagnostics"]["10"]
    assert {"ess", "clipping_pct", "trunc_threshold", "untruncated_estimate"} <= set(diag)
    lo, hi = res["bootstrap"]["ci"]["g1"]
    assert lo <= res["components"]["g1_hat"] <= hi


def test_estimate_recovers_toy_components_within_ci(tmp_path):
    raw = {**SMALL_SIM, "dgp": {"n": 20_000, "n_clusters": 100, "lam_noise": 0.8, "eps_shift": 0.6}}
    out = tmp_path / "sim"
    assert main(["simulate", "--config", write_config(tmp_path, raw), "--out", str(out)]) == 0
    est_cfg = write_config(tmp_path, {"mode": "estimate", "seed": 1, "samples_csv": str(out / "samples.csv"),
                                      "estimation": {"convention": "baseline", "n_boot": 200}}, "e.json")
    doc = json.loads(run_pipeline(load_config(est_cfg)).to_json())
    ci = doc["results"]["bootstrap"]["ci"]
    # regime 01 is deterministic, so the g2 interval is a point up to rounding
    assert ci["g1"][0] - 1e-12 <= 0.8**2 / 2 <= ci["g1"][1] + 1e-12
    assert ci["g2"][0] - 1e-12 <= 0.6**2 / 2 <= ci["g2"][1] + 1e-12


def test_missing_convention_is_noted(capsys, tmp_path):
    raw = {k: v for k, v in SMALL_SIM.items() if k != "estimation"}
    raw["estimation"] = {"n_boot": 100}
    assert main(["simulate", "--config", write_config(tmp_path, raw)]) == 0
    captured = capsys.readouterr()
    assert "sequential" in captured.err
    doc = json.loads(captured.out)
    assert doc["results"]["components"]["convention"] == "sequential"
    assert any("no estimator convention" in w for w in doc["warnings"])


def test_gaussian_demo_csv_stdout(capsys):
    assert main(["gaussian-demo", "--format", "csv"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["lam", "g1", "total_eps_0.5", "total_eps_1.0"]
    assert len(rows) == 201
    lam = float(rows[-1][0])
    assert float(rows[-1][3]) == lam**2 / 2 + 0.5 + 0.5 * lam**2


def test_all_modes_write_outputs(tmp_path):
    graded = tmp_path / "g.csv"
    graded.write_text("lam,eps,loss,weight\n" + "".join(
        f"{l},{e},{l * l / 2 + e * e / 2 + 0.5 * l * l * e * e},1\n" for l in (0, 1, 2) for e in (0, 0.5, 1)))
    sim_dir = tmp_path / "sim"
    assert main(["simulate", "--config", write_config(tmp_path, SMALL_SIM), "--out", str(sim_dir)]) == 0
    runs = {
        "gaussian-demo": [],
        "calibrate": ["--graded", str(graded)],
        "estimate": ["--samples", str(sim_dir / "samples.csv"), "--convention", "baseline"],
        "decompose": ["--config", write_config(tmp_path, {
            "mode": "decompose", "potential": {"kind": "negative_entropy", "dim": 3}, "p_star": [0.5, 0.3, 0.2],
            "sets": {"eps": {"kind": "simplex_subset", "lo": [0.6, 0, 0], "hi": [1, 1, 1]},
                     "lam": {"kind": "halfspace", "a": [0, 1, -1], "b": 0}},
            "verification": {"n_samples": 100}}, "d.json")],
    }
    for mode, extra in runs.items():
        out = tmp_path / mode
        assert main([mode, *extra, "--out", str(out), "--format", "csv"]) == 0, mode
        doc = json.loads((out / "report.json").read_text())
        assert doc["mode"] == mode
        assert len(list(out.glob("*.csv"))) >= 1
    assert len(read_samples_csv(sim_dir / "samples.csv")) == 1600


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["decompose"]) == 2
    assert "potential" in capsys.readouterr().err
    assert main(["estimate", "--samples", str(tmp_path / "missing.csv"), "--convention", "baseline"]) == 1


def test_byte_identical_reruns(tmp_path):
    path = write_config(tmp_path, SMALL_SIM)
    for d in ("a", "b"):
        assert main(["simulate", "--config", path, "--out", str(tmp_path / d), "--format", "csv"]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name
    assert main(["simulate", "--config", path, "--seed", "4", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "report.json").read_bytes() != (tmp_path / "a" / "report.json").read_bytes()


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "bregdecomp", "gaussian-demo"], capture_output=True, text=True,
                         check=True)
    doc = json.loads(out.stdout)
    assert doc["mode"] == "gaussian-demo"
    assert len(doc["results"]["curves"]["lam"]) == 200


def test_write_report_json_only(tmp_path):
    rep = run_pipeline(parse_config({"mode": "gaussian-demo"}))
    paths = write_report(rep, tmp_path, "json")
    assert [p.name for p in paths] == ["report.json"]
