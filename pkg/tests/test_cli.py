import numpy as np
import pytest

from voltgrid import load_network
from voltgrid.cli import main
from voltgrid.config import ConfigError, load_config
from voltgrid.network import bundled_path


def write_config(tmp_path, name="exp.yaml", body=""):
    text = (
        f"network: {bundled_path('case5.yaml')}\n"
        f"profiles: {bundled_path('profiles_year.csv')}\n"
        + body
    )
    path = tmp_path / name
    path.write_text(text)
    return path


class TestConfig:
    def test_defaults_from_empty_file(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        config = load_config(path)
        assert config.solver.tolerance == 1e-8
        assert config.agent.gamma == 0.99
        assert config.reward.c == 200.0
        assert config.droop.v1 == 0.92
        assert config.training.episodes == 500
        assert config.evaluation.hours == 8760

    def test_section_overrides(self, tmp_path):
        path = write_config(
            tmp_path,
            body=(
                "seed: 7\n"
                "solver: {tolerance: 1.0e-6, max_iter: 25}\n"
                "agent: {gamma: 0.5, hidden: [32, 32], batch_size: 16}\n"
                "reward: {c: 100.0}\n"
                "droop: {v1: 0.9, v2: 0.97, v3: 1.03, v4: 1.1, q_max: 0.8}\n"
                "training: {episodes: 12, profile_fraction: 0.25}\n"
                "evaluation: {start_hour: 4200, hours: 500, workers: 2}\n"
            ),
        )
        config = load_config(path)
        assert config.seed == 7
        assert config.solver.tolerance == 1e-6
        assert config.agent.hidden == (32, 32)
        assert config.agent.gamma == 0.5
        assert config.reward.c == 100.0
        assert config.droop.q_max == 0.8
        assert config.training.profile_fraction == 0.25
        assert config.evaluation.start_hour == 4200

    def test_unknown_key_rejected(self, tmp_path):
        path = write_config(tmp_path, body="agent: {learning_rate: 1.0}\n")
        with pytest.raises(ConfigError):
            load_config(path)
        path2 = write_config(tmp_path, name="e2.yaml", body="solvr: {}\n")
        with pytest.raises(ConfigError):
            load_config(path2)

    def test_invalid_value_rejected(self, tmp_path):
        path = write_config(tmp_path, body="agent: {tau: 2.0}\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_relative_paths_resolve_against_config(self, tmp_path):
        import shutil

        shutil.copy(bundled_path("case5.yaml"), tmp_path / "net.yaml")
        path = tmp_path / "exp.yaml"
        path.write_text("network: net.yaml\n")
        config = load_config(path)
        assert load_network(config.network).name == "case5"

    def test_bundled_experiment_file_loads(self):
        config = load_config(bundled_path("experiment_case13.yaml"))
        assert load_network(config.network).name == "case13"
        assert config.agent.hidden == (64, 64)
        assert config.evaluation.hours == 500
        assert config.training.profile_fraction == 0.25
        assert config.training.envelope_fraction == 0.2


class TestCliPowerflow:
    def test_snapshot_exits_zero(self, tmp_path, capsys):
        config = write_config(tmp_path)
        code = main(["powerflow", "--config", str(config), "--load-scale", "0.5"])
        out = capsys.readouterr().out
        assert code == 0
        assert "converged: True" in out
        assert out.count("\n") >= 5 + 4  # per-bus rows plus summaries


class TestCliTrainEvaluate:
    def test_train_then_evaluate_and_compare(self, tmp_path, capsys):
        config = write_config(
            tmp_path,
            body=(
                "agent: {hidden: [16, 16], batch_size: 16, "
                "min_iters_before_check: 10, max_iters: 10}\n"
                "training: {episodes: 2, checkpoint_every: 5}\n"
                "evaluation: {start_hour: 4200, hours: 5}\n"
            ),
        )
        ckpt_dir = tmp_path / "ckpts"
        log_path = tmp_path / "train.jsonl"
        code = main([
            "train", "--config", str(config), "--seed", "3",
            "--checkpoint-dir", str(ckpt_dir), "--log", str(log_path),
        ])
        assert code == 0
        assert (ckpt_dir / "agent_final.npz").exists()
        assert len(log_path.read_text().splitlines()) == 2

        code = main([
            "evaluate", "--config", str(config), "--mode", "baseline",
            "--records", str(tmp_path / "base.csv"),
        ])
        assert code == 0
        assert (tmp_path / "base.csv").exists()

        table_path = tmp_path / "table.txt"
        code = main([
            "compare", "--config", str(config),
            "--checkpoint", str(ckpt_dir / "agent_final.npz"),
            "--table", str(table_path),
            "--records", str(tmp_path / "all.csv"),
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert "baseline" in out and "voltvar" in out and "ddpg" in out
        assert table_path.exists()
        # header + 5 hours x 3 cases
        assert len((tmp_path / "all.csv").read_text().splitlines()) == 16

    def test_ddpg_without_checkpoint_is_an_error(self, tmp_path, capsys):
        config = write_config(tmp_path)
        code = main(["evaluate", "--config", str(config), "--mode", "ddpg"])
        assert code == 2

    def test_nonconverged_exit_code(self, tmp_path, capsys):
        config = write_config(
            tmp_path,
            body=(
                "solver: {max_iter: 0}\n"
                "evaluation: {start_hour: 100, hours: 3}\n"
            ),
        )
        code = main(["evaluate", "--config", str(config), "--mode", "baseline"])
        assert code == 1
        code = main([
            "evaluate", "--config", str(config), "--mode", "baseline",
            "--allow-nonconverged",
        ])
        assert code == 0
