import json

import pytest

from epipolicy.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """ingest -> fit-gdp -> fit (simple) -> train (short) -> rollout, run once per module."""
    d = tmp_path_factory.mktemp("cli")
    with pytest.MonkeyPatch.context() as mp:
        mp.chdir(d)
        assert main(["ingest", "--out-dir", "a"]) == 0
        assert main(["fit-gdp", "--bundle", "a/bundle.json", "--out-dir", "g"]) == 0
        assert main(["fit", "--bundle", "a/bundle.json", "--model", "simple", "--out-dir", "f"]) == 0
        args = ["train", "--bundle", "a/bundle.json", "--gdp", "g/gdp_model.json", "--seed", "3", "--steps", "150"]
        assert main(args + ["--fit", "f/fit_simple.json", "--out-dir", "t"]) == 0
        assert main(["rollout", "--checkpoint", "t/checkpoint.json", "--env-config", "t/env_config.json",
                     "--filter", "7", "--out-dir", "r"]) == 0
    return d


def _json(path):
    return json.loads(path.read_text())


def test_ingest_outputs(workdir):
    b = _json(workdir / "a" / "bundle.json")
    m = _json(workdir / "a" / "manifest.json")
    assert m["subcommand"] == "ingest"
    assert set(m["inputs"]) == {"stringency_csv", "compartments_csv", "gdp_csv"}
    assert len(m["content_hash"]) == 64 and m["toolkit_version"]
    assert "manifest" in _json(workdir / "a" / "ingest_report.json")
    assert b["country"] == "IND"


def test_fit_simple_report(workdir):
    rep = _json(workdir / "f" / "fit_simple.json")
    assert {"beta", "gamma", "loss_sir", "loss_i"} <= set(rep["fit"])
    assert rep["manifest"]["config"]["model"] == "simple"


def test_gdp_model_file(workdir):
    rep = _json(workdir / "g" / "gdp_model.json")
    assert {"a", "b", "c", "d", "r", "r2", "p_value", "n_points"} <= set(rep["model"])
    assert rep["manifest"]["config"]["pairing"] == "quarterly"


def test_train_and_rollout_outputs(workdir):
    t = workdir / "t"
    for name in ("checkpoint.json", "env_config.json", "train_log.csv", "train_summary.json", "manifest.json"):
        assert (t / name).is_file()
    assert _json(t / "manifest.json")["seed"] == 3
    lines = (workdir / "r" / "rollout.csv").read_text().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    assert any(ln.startswith("# units:") for ln in comments)
    assert any("provenance: rl " in ln for ln in comments)
    assert any("provenance: rl_filtered" in ln for ln in comments)
    assert any(ln.startswith("# manifest:") for ln in comments)
    header = lines[len(comments)].split(",")
    for col in ("stringency", "i_prop", "norm_gdp", "r_eff", "reward", "cumulative_reward"):
        assert f"{col}_rl" in header and f"{col}_rl_filtered" in header
    summary = _json(workdir / "r" / "rollout_summary.json")
    assert summary["manifest"]["config"]["filter"] == 7


def test_window_search_table(workdir):
    with pytest.MonkeyPatch.context() as mp:
        mp.chdir(workdir)
        code = main(["window-search", "--bundle", "a/bundle.json", "--beta", "0.4", "--gamma", "0.1",
                     "--lengths", "10", "20", "--out-dir", "w"])
    assert code == 0
    rows = [ln for ln in (workdir / "w" / "window_search.csv").read_text().splitlines() if not ln.startswith("#")]
    assert rows[0] == "length,loss_sir,loss_i,chosen"
    assert [r.split(",")[0] for r in rows[1:]] == ["10", "20"]
    assert sum(int(r.split(",")[3]) for r in rows[1:]) == 1


def test_replay_baseline_and_plots(workdir):
    with pytest.MonkeyPatch.context() as mp:
        mp.chdir(workdir)
        assert main(["replay-baseline", "--env-config", "t/env_config.json", "--bundle", "a/bundle.json",
                     "--out-dir", "h"]) == 0
        assert main(["export-plots", "--bundle", "a/bundle.json", "--gdp", "g/gdp_model.json",
                     "--rollout", "r/rollout.csv", "--baseline", "h/baseline.csv", "--out-dir", "p"]) == 0
    index = _json(workdir / "p" / "plots_index.json")
    assert index["manifest"]["subcommand"] == "export-plots"
    csvs = sorted(p.name for p in (workdir / "p").glob("*.csv"))
    assert "gdp_fit.csv" in csvs and "policy_stringency.csv" in csvs
    for name in csvs:
        text = (workdir / "p" / name).read_text()
        assert "# units:" in text and "# provenance:" in text
        assert (workdir / "p" / name.replace(".csv", ".svg")).read_text().lstrip().startswith("<?xml")
    policy = (workdir / "p" / "policy_stringency.csv").read_text()
    assert "actual" in policy and "modelled" in policy and "rl" in policy


def test_exit_codes(workdir, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 2
    assert main(["fit", "--bundle", str(tmp_path / "missing.json"), "--out-dir", str(tmp_path / "o")]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["fit", "--bundle", str(bad), "--out-dir", str(tmp_path / "o")]) == 3
    cfg = tmp_path / "reward.json"
    cfg.write_text('{"no_such_field": 1}')
    env = str(workdir / "t" / "env_config.json")
    assert main(["train", "--env-config", env, "--reward-config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2
    assert main(["train", "--env-config", env, "--train-config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_rollout_rejects_even_filter(workdir):
    with pytest.raises(SystemExit) as exc:
        main(["rollout", "--checkpoint", "x", "--env-config", "y", "--filter", "4"])
    assert exc.value.code == 2


def test_data_dir_environment_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("EPIPOLICY_DATA_DIR", str(tmp_path))
    assert main(["ingest", "--out-dir", str(tmp_path / "o")]) == 3
