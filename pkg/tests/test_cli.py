"""End-to-end CLI flows over tiny synthetic communities."""
import json

import pandas as pd

from gridtwin.cli import main
from gridtwin.data import SyntheticCommunityConfig
from gridtwin.experiments import ExperimentConfig
from gridtwin.sac import SacHyperparams


def write_tiny_experiment_config(path, **overrides):
    cfg = ExperimentConfig(
        synthetic=SyntheticCommunityConfig(
            building_count=2, hours=4 * 24, seed=5, noise_level=0.2
        ),
        hyperparams=SacHyperparams(
            batch_size=16, buffer_capacity=512, exploration_steps=24,
            episodes=1, hidden_units=8,
        ),
        seeds=(0,),
        **overrides,
    )
    path.write_text(json.dumps(cfg.to_dict()))
    return cfg


def synth_args(out_dir, days=4):
    return ["synth", "--buildings", "2", "--days", str(days), "--seed", "5", "--out", str(out_dir)]


def test_synth_then_ingest(tmp_path, capsys):
    assert main(synth_args(tmp_path / "community")) == 0
    assert main(["ingest", str(tmp_path / "community" / "manifest.json")]) == 0
    out = capsys.readouterr().out
    assert "2 buildings" in out


def test_ingest_rejects_bad_data(tmp_path, capsys):
    assert main(synth_args(tmp_path / "c")) == 0
    csv = tmp_path / "c" / "b0.csv"
    csv.write_text(csv.read_text().replace("non_shiftable_kWh", "load"))
    assert main(["ingest", str(tmp_path / "c" / "manifest.json")]) == 1
    assert "error:" in capsys.readouterr().err


def test_simulate_none_then_kpi_self_normalizes_to_one(tmp_path, capsys):
    assert main(synth_args(tmp_path / "c")) == 0
    manifest = tmp_path / "c" / "manifest.json"
    run_dir = tmp_path / "run"
    assert main(["simulate", str(manifest), "--controller", "none", "--out", str(run_dir)]) == 0
    assert main(["kpi", str(run_dir), "--normalize", "self"]) == 0
    payload = json.loads((run_dir / "kpi.json").read_text())
    for kpis in payload["normalized"]["buildings"].values():
        for name, value in kpis.items():
            if [scope for scope, kpi in payload["normalized"]["undefined"] if kpi == name]:
                continue
            assert value == 1.0
    for name, value in payload["normalized"]["district"].items():
        if ["district", name] in payload["normalized"]["undefined"]:
            continue
        assert value == 1.0


def test_simulate_rbc_controller_with_trace(tmp_path):
    assert main(synth_args(tmp_path / "c")) == 0
    manifest = tmp_path / "c" / "manifest.json"
    run_dir = tmp_path / "rbc_run"
    code = main(
        [
            "simulate", str(manifest),
            "--controller", "rbc:tou_peak_reduction",
            "--trace", "--out", str(run_dir),
        ]
    )
    assert code == 0
    trace = pd.read_csv(run_dir / "trace.csv")
    assert set(trace.columns) == {"h", "building_id", "action", "battery_kWh", "soc", "net_kWh", "reward"}
    assert (trace["soc"] >= 0.25 - 1e-12).all()
    net = pd.read_csv(run_dir / "net.csv")
    assert list(net.columns) == ["h", "b0", "b1"]


def test_train_ds1_and_report_and_policy_simulate(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    write_tiny_experiment_config(cfg_path)
    out = tmp_path / "train_out"
    assert main(["train", "--strategy", "ds1", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "manifest.json").exists()
    assert main(["report", str(out)]) == 0
    assert (out / "summary.csv").exists()

    # the trained policies drive a deterministic simulate run
    community = tmp_path / "c"
    assert main(synth_args(community)) == 0
    run_dir = tmp_path / "policy_run"
    code = main(
        [
            "simulate", str(community / "manifest.json"),
            "--controller", f"policy:{out / 'policies'}",
            "--out", str(run_dir),
        ]
    )
    assert code == 0
    assert (run_dir / "net.csv").exists()


def test_train_is_idempotent_given_seed(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    write_tiny_experiment_config(cfg_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["train", "--strategy", "ds1", "--config", str(cfg_path), "--out", str(out)]) == 0
    kpi1 = (out1 / "kpis" / "sac_seed0.json").read_text()
    kpi2 = (out2 / "kpis" / "sac_seed0.json").read_text()
    assert kpi1 == kpi2


def test_grid_search_echoes_default_axes(capsys):
    assert main(["grid-search", "hyper", "--grid", "default", "--dry-run"]) == 0
    out = capsys.readouterr().out
    assert "[0.0005, 0.005, 0.05]" in out
    assert "[0.9, 0.95, 0.99]" in out
    assert "[5e-05, 0.0005, 0.005]" in out
    assert "[0.2, 0.5, 0.8]" in out


def test_grid_search_runs_tiny_reward_grid(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    write_tiny_experiment_config(cfg_path, grid_buildings=1)
    grid = {"axes": {"w1": [1.0]}, "repetitions": 1}
    grid_path = tmp_path / "grid.json"
    grid_path.write_text(json.dumps(grid))
    out = tmp_path / "grid_out"
    code = main(
        [
            "grid-search", "reward", "--grid", str(grid_path),
            "--config", str(cfg_path), "--out", str(out),
        ]
    )
    assert code == 0
    assert (out / "selected.json").exists()
    assert (out / "grid_results.csv").exists()


def test_unknown_subcommand_exits_2():
    assert main(["frobnicate"]) == 2


def test_unknown_flag_exits_2():
    assert main(["ingest", "--bogus"]) == 2


def test_missing_manifest_is_runtime_error(capsys):
    assert main(["ingest", "/nonexistent/manifest.json"]) == 1
    assert "error:" in capsys.readouterr().err


def test_gridtwin_out_env_var_sets_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("GRIDTWIN_OUT", str(tmp_path))
    assert main(["synth", "--buildings", "1", "--days", "2", "--out", "c"]) == 0
    assert (tmp_path / "c" / "manifest.json").exists()
