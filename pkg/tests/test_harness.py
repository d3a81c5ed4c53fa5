import subprocess
import sys

import numpy as np
import pytest

from tvtune.ddpg import load_policy
from tvtune.errors import ConfigError
from tvtune.harness import csvio, main, parse_config
from tvtune.harness.commands import parse_grid, parse_scenario

SMALL_GA = "ga.population_size = 4\nga.generations = 1\n"


def test_parse_config_sections():
    cfg = parse_config("""
        # comment
        run.seed = 7
        ddpg.gamma = 0.95
        ddpg.episodes = 3
        vehicle.mass = 1400
        tire.stiffness_factor = 9.5
        controller.w_e = 0.4, 0.02, 1500
        controller.incremental = false
        episode.mu_min = 0.45
        ga.generations = 2
    """)
    assert cfg.seed == 7
    assert cfg.build("ddpg").gamma == 0.95 and cfg.build("ddpg").episodes == 3
    assert cfg.build("vehicle").mass == 1400.0
    assert cfg.build("controller").w_e == (0.4, 0.02, 1500.0)
    assert cfg.build("controller").incremental is False
    assert cfg.episode("mu_min", None) == 0.45


@pytest.mark.parametrize("text", [
    "ddpg.gama = 0.9",
    "nosuch.key = 1",
    "seed = 3",
    "run.seed = abc",
    "ddpg.gamma = 2.0",
    "run.mode = fly",
    "run.seed = 1\nrun.seed = 2",
    "just text",
    "controller.incremental = maybe",
])
def test_parse_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_grid_and_scenario_parsing():
    g = parse_grid(["mu=0.4:0.1:0.7", "v0=70,90"])
    assert g["mu"] == [0.4, 0.5, 0.6, 0.7] and g["v0"] == [70.0, 90.0]
    assert parse_grid([]) == {"mu": [0.4], "v0": [100.0]}
    assert parse_scenario("mu=0.4,v0=100") == {"mu": 0.4, "v0": 100.0}
    for bad in (["x=1"], ["mu=0.7:0.1:0.4"], ["mu"], ["mu=a"]):
        with pytest.raises(ConfigError):
            parse_grid(bad)
    with pytest.raises(ConfigError):
        parse_scenario("mu=0.4")


def test_csv_round_trip_and_validation(tmp_path):
    rows = [(0, -1.5, -1.5), (1, 1e-300, 0.1 + 0.2)]
    back = csvio.write_csv(tmp_path / "r.csv", csvio.REWARDS, rows)
    assert back == rows
    text = (tmp_path / "r.csv").read_text(encoding="utf-8")
    assert text.splitlines()[0] == "# schema=reward_history/1"
    with pytest.raises(ConfigError):
        csvio.loads(csvio.SWEEP, text)
    with pytest.raises(ConfigError):
        csvio.loads(csvio.REWARDS, text.replace("episode,reward", "ep,reward"))
    with pytest.raises(ConfigError):
        csvio.loads(csvio.REWARDS, text + "2,abc,1\n")
    with pytest.raises(ValueError):
        csvio.dumps(csvio.REWARDS, [(1, 2.0)])


def test_nan_survives_round_trip(tmp_path):
    row = tuple([1.0] * (len(csvio.TRACE.columns) - 1) + [float("nan")])
    back = csvio.write_csv(tmp_path / "t.csv", csvio.TRACE, [row])
    assert np.isnan(back[0][-1])


def _train(tmp_path, name, seed=1, extra=""):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text("ddpg.episodes = 5\n" + extra, encoding="utf-8")
    out = tmp_path / name
    assert main(["train", "--config", str(cfg), "--seed", str(seed), "--out", str(out)]) == 0
    return out


def test_train_smoke_and_determinism(tmp_path):
    a = _train(tmp_path, "a")
    b = _train(tmp_path, "b")
    rows = csvio.read_csv(a / "rewards.csv", csvio.REWARDS)
    assert len(rows) == 5 and [r[0] for r in rows] == list(range(5))
    assert rows[4][2] == pytest.approx(np.mean([r[1] for r in rows]))
    pol = load_policy(a / "actor.txt")
    assert pol(np.zeros(9)).shape == (4,)
    for f in ("rewards.csv", "actor.txt"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_train_episodes_flag_overrides(tmp_path):
    out = tmp_path / "c"
    assert main(["train", "--episodes", "2", "--seed", "0", "--out", str(out)]) == 0
    assert len(csvio.read_csv(out / "rewards.csv", csvio.REWARDS)) == 2


def test_sweep_single_cell_manual(tmp_path):
    out = tmp_path / "s.csv"
    rc = main(["sweep", "--grid", "mu=0.5", "--grid", "v0=90", "--tuners", "manual",
               "--out", str(out)])
    assert rc == 0
    rows = csvio.read_csv(out, csvio.SWEEP)
    assert len(rows) == 1 and rows[0][:3] == (0.5, 90.0, "manual")
    assert rows[0][6:] == (100.0, 100.0, 100.0, 100.0)


def test_sweep_all_tuners_and_determinism(tmp_path):
    model = _train(tmp_path, "m") / "actor.txt"
    cfg = tmp_path / "ga.cfg"
    cfg.write_text(SMALL_GA, encoding="utf-8")
    outs = []
    for k in range(2):
        out = tmp_path / f"s{k}.csv"
        rc = main(["sweep", "--config", str(cfg), "--model", str(model), "--grid",
                   "mu=0.4,0.7", "--out", str(out)])
        assert rc == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    rows = csvio.loads(csvio.SWEEP, outs[0].decode())
    assert [r[2] for r in rows] == ["ddpg", "ga", "manual"] * 2
    assert all(np.isnan(r[6]) for r in rows if r[2] == "ddpg")


def test_sweep_needs_model_for_ddpg(tmp_path):
    assert main(["sweep", "--tuners", "ddpg", "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["sweep", "--tuners", "nobody"]) == 2


def test_generalize(tmp_path):
    model = _train(tmp_path, "g") / "actor.txt"
    cfg = tmp_path / "ga.cfg"
    cfg.write_text(SMALL_GA, encoding="utf-8")
    out = tmp_path / "gen"
    assert main(["generalize", "--config", str(cfg), "--model", str(model),
                 "--out", str(out)]) == 0
    rows = csvio.read_csv(out / "generalize_summary.csv", csvio.GENERALIZE)
    assert [r[0] for r in rows] == ["ddpg", "ga", "manual"]
    assert all(r[1] == 0.3 and r[2] == 80.0 for r in rows)
    for r in rows:
        tr = csvio.read_csv(out / f"trace_{r[0]}.csv", csvio.TRACE)
        assert tr[-1][0] == pytest.approx(r[7] - 1e-3, abs=1e-9)
        assert r[3] == (r[4] <= 8.0)


def test_ga_tune_command(tmp_path, capsys):
    cfg = tmp_path / "ga.cfg"
    cfg.write_text(SMALL_GA, encoding="utf-8")
    assert main(["ga-tune", "--config", str(cfg), "--scenario", "mu=0.4,v0=100"]) == 0
    rows = csvio.loads(csvio.GA_TRACE, capsys.readouterr().out)
    assert [r[0] for r in rows] == [0, 1]
    assert rows[1][1] <= rows[0][1]
    assert all(40 <= w <= 1000 for r in rows for w in r[2:])


def test_exit_status_on_errors(tmp_path):
    assert main(["train", "--config", str(tmp_path / "none.cfg"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("ddpg.nope = 1\n", encoding="utf-8")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["train"]) == 2          # no output directory
    assert main(["ga-tune", "--scenario", "mu=0.4"]) == 2
    with pytest.raises(SystemExit) as e:
        main(["fly"])
    assert e.value.code != 0


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "tvtune", "sweep", "--tuners", "manual"],
                       capture_output=True, text=True, env={"TVTUNE_LOG": "INFO", "PATH": ""})
    assert r.returncode == 0
    assert r.stdout.startswith("# schema=sweep/1")
    assert "manual" in r.stderr


def test_eval_command(tmp_path):
    out = tmp_path / "e.csv"
    assert main(["eval", "--tuner", "manual", "--scenario", "mu=0.5,v0=110",
                 "--out", str(out)]) == 0
    rows = csvio.read_csv(out, csvio.TRACE)
    assert len(rows) == 15000
    assert main(["eval", "--scenario", "mu=0.5,v0=110"]) == 2    # ddpg without a model
