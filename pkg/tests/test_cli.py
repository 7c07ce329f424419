import csv
import hashlib
import json

import pytest

from ottd import config
from ottd.chain_analysis import risky_ring, risky_ring_snapshot
from ottd.cli import main
from ottd.errors import ConfigError

CLIFF_TOML = """
[env]
name = "cliffwalk"
scenario = "LU"

[experiment]
n_seeds = 2
n_episodes = 6
window = 3
agents = ["Sarsa", "QLearning", "OtSarsa"]
"""


@pytest.fixture
def cliff_cfg(tmp_path):
    path = tmp_path / "cliff_lu.toml"
    path.write_text(CLIFF_TOML)
    return path


def digest(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.iterdir()) if p.is_file()}


def test_run_writes_all_outputs(tmp_path, cliff_cfg):
    out = tmp_path / "out"
    assert main(["run", "--config", str(cliff_cfg), "--out", str(out), "--threads", "1"]) == 0
    names = set(digest(out))
    assert {"returns.csv", "summary.csv", "manifest.json"} <= names
    assert {f"visitation_{a}.csv" for a in ("Sarsa", "QLearning", "OtSarsa")} <= names
    rows = list(csv.DictReader(open(out / "returns.csv")))
    assert len(rows) == 3 * 2 * 6
    assert list(rows[0])[:4] == ["seed", "episode", "agent", "return"]
    summary = list(csv.DictReader(open(out / "summary.csv")))
    assert [r["agent"] for r in summary] == ["Sarsa", "QLearning", "OtSarsa"]
    grid = list(csv.reader(open(out / "visitation_Sarsa.csv")))
    assert len(grid) == 7 and len(grid[0]) == 10


def test_run_twice_gives_identical_files(tmp_path, cliff_cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    for out, threads in ((a, "1"), (b, "2")):
        assert main(["run", "--config", str(cliff_cfg), "--set", "agent.beta=0", "--out", str(out),
                     "--threads", threads]) == 0
    assert digest(a) == digest(b)


def test_manifest_replays_run(tmp_path, cliff_cfg):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cliff_cfg), "--out", str(a), "--set", "agent.beta=2", "--threads", "1"]) == 0
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["config"]["agent.beta"] == 2.0
    assert manifest["layout"]["name"] == "cliffwalk"
    assert main(["run", "--config", str(a / "manifest.json"), "--out", str(b), "--threads", "1"]) == 0
    assert digest(a) == digest(b)


def test_inputs_are_not_modified(tmp_path, cliff_cfg):
    before = cliff_cfg.read_bytes()
    main(["run", "--config", str(cliff_cfg), "--out", str(tmp_path / "o"), "--threads", "1"])
    assert cliff_cfg.read_bytes() == before


def test_seed_count_and_episodes_flags(tmp_path, cliff_cfg):
    out = tmp_path / "o"
    assert main(["run", "--config", str(cliff_cfg), "--out", str(out), "--seed-count", "1", "--episodes", "3",
                 "--set", "experiment.window=2", "--set", "experiment.agents=Sarsa", "--threads", "1"]) == 0
    assert len(list(csv.DictReader(open(out / "returns.csv")))) == 3


@pytest.mark.parametrize("argv", [
    ["run", "--out", "X", "--set", "agent.nope=1"],
    ["run", "--out", "X", "--set", "agent.beta=abc"],
    ["run", "--out", "X", "--set", "agent.beta"],
    ["run", "--out", "X", "--set", "agent.alpha=0"],
    ["run", "--out", "X", "--set", "env.scenario=XL"],
    ["run", "--out", "X", "--threads", "0"],
    ["run", "--out", "X", "--episodes", "5"],
    ["run", "--out", "X", "--set", "ot.normalization=softmax"],
    ["run"],
    ["frobnicate"],
    [],
])
def test_validation_errors_exit_one_without_output(tmp_path, argv):
    argv = [str(tmp_path / "out") if a == "X" else a for a in argv]
    assert main(argv) == 1
    assert not (tmp_path / "out").exists()


def test_unknown_key_in_file(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[agent]\nbeta = 1\nrho = 2\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    path.write_text("not = [valid")
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert main(["run", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path / "o")]) == 1


def test_sweep_beta(tmp_path, cliff_cfg):
    out = tmp_path / "sweep"
    assert main(["sweep-beta", "--config", str(cliff_cfg), "--out", str(out), "--set", "sweep.betas=0.1,2",
                 "--set", "experiment.agents=OtSarsa", "--threads", "1"]) == 0
    rows = list(csv.DictReader(open(out / "sweep.csv")))
    assert [float(r["beta"]) for r in rows] == [0.1, 2.0]
    assert (out / "beta_0.1" / "manifest.json").exists() and (out / "beta_2" / "returns.csv").exists()


def test_check_theorem1_files(tmp_path, capsys):
    risky_ring().save(tmp_path / "five_state.json")
    risky_ring_snapshot().save(tmp_path / "snap.json")
    assert main(["check-theorem1", "--mdp", str(tmp_path / "five_state.json"),
                 "--snapshot", str(tmp_path / "snap.json")]) == 0
    lines = dict(line.split("=") for line in capsys.readouterr().out.split())
    assert float(lines["c_hat"]) < 1
    assert float(lines["mass_ot"]) < float(lines["mass_base"])


def test_check_theorem1_beta_zero(capsys):
    assert main(["check-theorem1", "--beta", "0"]) == 0
    assert "c_hat=1.0" in capsys.readouterr().out


def test_check_theorem1_bad_snapshot(tmp_path):
    (tmp_path / "snap.json").write_text(json.dumps({"q": [[0, 1]], "u": [[0, 1]]}))
    assert main(["check-theorem1", "--snapshot", str(tmp_path / "snap.json")]) == 1


def test_export_layout(tmp_path):
    assert main(["export-layout", "--out", str(tmp_path), "--set", "env.name=rover", "--set", "env.scenario=HU"]) == 0
    doc = json.loads((tmp_path / "layout.json").read_text())
    assert doc["name"] == "rover" and len(doc["special"]["obstacle"]) == 10


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 6


def test_config_flattening_and_defaults(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('"agent.beta" = 2\n[ot]\nmode = "sinkhorn"\n')
    flat = config.resolve(path, ["agent.alpha=0.3"])
    assert flat["agent.beta"] == 2.0 and flat["ot.mode"] == "sinkhorn" and flat["agent.alpha"] == 0.3
    assert flat["experiment.n_episodes"] == 500
    exp = config.to_experiment(flat)
    assert config.from_experiment(exp, flat["sweep.betas"]) == flat


def test_config_type_errors():
    with pytest.raises(ConfigError):
        config.parse_override("experiment.n_seeds=2.5")
    with pytest.raises(ConfigError):
        config.parse_override("env.name=")
    assert config.parse_override("experiment.n_seeds=4") == ("experiment.n_seeds", 4)
