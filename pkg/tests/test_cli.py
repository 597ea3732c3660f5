import json
import os

from regretlab import cli
from regretlab.evaluation import read_metrics

TINY_ARGS = [
    "stages=2", "steps_per_stage=2", "trajectory_batch=2", "max_path_length=40",
    "model_dim=16", "batch_size=32", "agent_policy_training_steps=3",
    "rsg_training_steps=15", "rsg_value_samples=2", "dz_mc_samples=32",
    "value_mc_samples=4", "regret_refresh_samples=4", "entropy_mc_samples=256",
    "replay_capacity=5000",
]


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def train_tiny(capsys, tmp_path, *extra, seed=0):
    code, out, err = run_cli(
        capsys, "train", "--out", str(tmp_path), "--seed", str(seed), "--quiet",
        *TINY_ARGS, *extra)
    assert code == 0, err
    return out.strip().splitlines()[-1]


class TestPrintConfig:
    def test_outputs_resolved_defaults(self, capsys):
        code, out, _ = run_cli(capsys, "print-config")
        assert code == 0
        doc = json.loads(out)
        assert doc["steps_per_stage"] == 50
        assert doc["model_dim"] == 256

    def test_overrides_visible(self, capsys):
        code, out, _ = run_cli(capsys, "print-config", "alpha1=2.5")
        assert json.loads(out)["alpha1"] == 2.5

    def test_bad_override_exits_one(self, capsys):
        code, _, err = run_cli(capsys, "print-config", "gamma=1.5")
        assert code == 1
        assert "gamma" in err


class TestTrain:
    def test_run_directory_layout(self, capsys, tmp_path):
        run_dir = train_tiny(capsys, tmp_path)
        names = set(os.listdir(run_dir))
        assert {"manifest.json", "config.json", "metrics.csv", "eval"} <= names
        assert "ckpt-0001.json" in names
        manifest = json.loads(open(os.path.join(run_dir, "manifest.json")).read())
        assert manifest["seed"] == 0
        assert manifest["mode"] == "rsd"
        assert manifest["version"].startswith("regretlab-")
        rows = read_metrics(os.path.join(run_dir, "metrics.csv"))
        assert [r["stage"] for r in rows] == [0, 1]
        stage_report = json.loads(open(os.path.join(run_dir, "eval", "stage-0000.json")).read())
        assert stage_report["stage"] == 0
        assert 0.0 <= stage_report["ar"] <= 1.0
        assert stage_report["n_skills"] >= 81

    def test_reproducible_metrics_bitwise(self, capsys, tmp_path):
        d1 = train_tiny(capsys, tmp_path, seed=3)
        d2 = train_tiny(capsys, tmp_path, seed=3)
        csv1 = open(os.path.join(d1, "metrics.csv"), "rb").read()
        csv2 = open(os.path.join(d2, "metrics.csv"), "rb").read()
        assert csv1 == csv2

    def test_baseline_checkpoints_have_no_population(self, capsys, tmp_path):
        run_dir = train_tiny(capsys, tmp_path, "--mode", "uniform-baseline")
        doc = json.loads(open(os.path.join(run_dir, "ckpt-0001.json")).read())
        assert doc["population"] is None
        assert doc["mode"] == "uniform-baseline"

    def test_resume_continues_without_duplicates(self, capsys, tmp_path):
        args = TINY_ARGS + ["stages=4"]
        code, out, err = run_cli(capsys, "train", "--out", str(tmp_path), "--quiet",
                                 "--max-stages", "2", *args)
        assert code == 0, err
        run_dir = out.strip().splitlines()[-1]
        rows = read_metrics(os.path.join(run_dir, "metrics.csv"))
        assert [r["stage"] for r in rows] == [0, 1]
        code, _, err = run_cli(capsys, "train", "--resume", run_dir, "--quiet")
        assert code == 0, err
        rows = read_metrics(os.path.join(run_dir, "metrics.csv"))
        assert [r["stage"] for r in rows] == [0, 1, 2, 3]

    def test_resume_refuses_config_mismatch(self, capsys, tmp_path):
        run_dir = train_tiny(capsys, tmp_path)
        cfg_path = os.path.join(run_dir, "config.json")
        doc = json.loads(open(cfg_path).read())
        doc["alpha1"] = 99.0
        open(cfg_path, "w").write(json.dumps(doc))
        code, _, err = run_cli(capsys, "train", "--resume", run_dir, "--quiet")
        assert code == 1
        assert "config" in err.lower()

    def test_bad_config_path_exits_one(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "train", "--config", "/no/such.json",
                               "--out", str(tmp_path))
        assert code == 1


class TestEval:
    def test_eval_writes_reports(self, capsys, tmp_path):
        run_dir = train_tiny(capsys, tmp_path)
        ckpt = os.path.join(run_dir, "ckpt-0001.json")
        code, out, err = run_cli(capsys, "eval", "--ckpt", ckpt, "--what", "all",
                                 "--goal-mode", "rsd")
        assert code == 0, err
        doc = json.loads(out)
        assert "coverage" in doc and "zeroshot" in doc
        assert os.path.exists(doc["json_path"])
        assert os.path.exists(doc["csv_path"])

    def test_eval_deterministic(self, capsys, tmp_path):
        run_dir = train_tiny(capsys, tmp_path)
        ckpt = os.path.join(run_dir, "ckpt-0001.json")
        _, out1, _ = run_cli(capsys, "eval", "--ckpt", ckpt)
        _, out2, _ = run_cli(capsys, "eval", "--ckpt", ckpt)
        assert json.loads(out1)["coverage"] == json.loads(out2)["coverage"]
        assert json.loads(out1)["zeroshot"] == json.loads(out2)["zeroshot"]

    def test_goal_mode_flag_selects_convention(self, capsys, tmp_path):
        run_dir = train_tiny(capsys, tmp_path)
        ckpt = os.path.join(run_dir, "ckpt-0001.json")
        code, out, _ = run_cli(capsys, "eval", "--ckpt", ckpt, "--what", "zeroshot",
                               "--goal-mode", "metra-d")
        assert code == 0
        doc = json.loads(out)
        assert doc["zeroshot"]["mode"] == "metra-d"

    def test_coverage_skill_count_cross_check(self, capsys, tmp_path):
        run_dir = train_tiny(capsys, tmp_path)
        ckpt_path = os.path.join(run_dir, "ckpt-0001.json")
        _, out, _ = run_cli(capsys, "eval", "--ckpt", ckpt_path, "--what", "coverage")
        doc = json.loads(out)
        cfg = json.loads(open(os.path.join(run_dir, "config.json")).read())
        ckpt_doc = json.loads(open(ckpt_path).read())
        n_comp = len(ckpt_doc["population"]["components"])
        expected = cfg["eval_grid_res"] ** 2 + cfg["eval_component_draws"] * n_comp
        assert doc["coverage"]["n_skills"] == expected

    def test_missing_checkpoint_exits_one(self, capsys):
        code, _, err = run_cli(capsys, "eval", "--ckpt", "/no/such/ckpt.json")
        assert code == 1
