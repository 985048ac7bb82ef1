import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holonet import cli
from holonet.errors import ConfigError, InvalidDimsError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


def _run(tmp_path, d, *extra, sub="out"):
    p = _write(tmp_path, d)
    code = cli.main([d["experiment"], "--config", str(p), "--out", str(tmp_path / sub), *extra])
    return code, tmp_path / sub


RANDOM_ENTROPY = {"experiment": "random-entropy", "master_seed": 3, "L": [6, 8, 10], "chi": [2], "realizations": 16}


def test_random_entropy_schema(tmp_path):
    code, out = _run(tmp_path, RANDOM_ENTROPY)
    assert code == 0
    rows = cli.read_csv(out / "results.csv")
    assert len(rows) == 48
    assert list(rows[0]) == ["task_seed", "L", "chi", "realization", "S2", "S2_oracle", "page_value"]
    for r in rows:
        assert abs(float(r["S2"]) - float(r["S2_oracle"])) < 1e-9
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok"
    assert len(man["tasks"]) == 48
    assert man["files"][0]["name"] == "results.csv"


def test_rerun_is_byte_identical(tmp_path):
    _, a = _run(tmp_path, RANDOM_ENTROPY, sub="a")
    _, b = _run(tmp_path, RANDOM_ENTROPY, sub="b")
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()


def test_jobs_do_not_change_results(tmp_path):
    d = dict(RANDOM_ENTROPY, L=[6], realizations=4)
    _, a = _run(tmp_path, d, sub="serial")
    _, b = _run(tmp_path, d, "--jobs", "2", sub="pool")
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()


def test_rows_traceable_to_seeds(tmp_path):
    _, out = _run(tmp_path, dict(RANDOM_ENTROPY, L=[6], realizations=3))
    seeds = {t["seed"] for t in json.loads((out / "manifest.json").read_text())["tasks"]}
    assert {r["task_seed"] for r in cli.read_csv(out / "results.csv")} == seeds


def test_fit_state_ghz(tmp_path):
    d = {"experiment": "fit-state", "L": [6], "chi": [2], "surface": "left", "target": "ghz", "restarts": 5}
    code, out = _run(tmp_path, d)
    assert code == 0
    assert float(cli.read_csv(out / "results.csv")[0]["final_error"]) < 1e-12


def test_tebd_bench_columns(tmp_path):
    d = {"experiment": "tebd-bench", "L": [6], "chi": [4], "dt": 0.25, "t_max": 0.25, "oracle_mode": "exact"}
    code, out = _run(tmp_path, d)
    assert code == 0
    rows = cli.read_csv(out / "results.csv")
    for col in ("t", "sx_tebd", "sx_oracle", "S2_tebd", "S2_oracle", "fidelity"):
        assert col in rows[0]
    assert [float(r["t"]) for r in rows] == [0.0, 0.25]
    assert float(rows[0]["sx_tebd"]) == pytest.approx(1.0)


def test_embed_check_all_exact():
    cfg = cli.ExperimentConfig("embed-check", L=[6])
    rows, _ = cli.run_config(cfg)
    assert len(rows) == len(cli.CONSTRUCTIONS)
    assert all(r["error"] < 1e-12 and r["violations"] == 0 for r in rows)


def test_rainbow_state_oracle():
    psi = cli._rainbow_state(4, cli.BELL)
    # sites (1,4) and (2,3) carry singlets: maximal entropy across the middle cut
    rho = psi.reshape(4, 4)
    assert np.isclose(-np.log(np.sum(np.linalg.svd(rho, compute_uv=False) ** 4)), 2 * np.log(2))


# --------------------------------------------------------------------------- config handling


@pytest.mark.parametrize(
    "bad",
    [
        {"experiment": "nope"},
        {"experiment": "random-entropy", "L": [1]},
        {"experiment": "random-entropy", "chi": [0]},
        {"experiment": "random-entropy", "surprise": 1},
        {"experiment": "fit-state", "target": "mystery"},
        {"experiment": "tebd-bench", "dt": -1},
        {"master_seed": 1},
    ],
)
def test_invalid_config_exit_2(tmp_path, bad):
    p = _write(tmp_path, bad)
    assert cli.main(["random-entropy", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_unreadable_config_exit_2(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert cli.main(["fit-state", "--config", str(p)]) == 2
    assert cli.main(["fit-state", "--config", str(tmp_path / "missing.json")]) == 2


def test_experiment_mismatch_exit_2(tmp_path):
    p = _write(tmp_path, RANDOM_ENTROPY)
    assert cli.main(["fit-state", "--config", str(p)]) == 2


def test_numeric_failure_exit_3_flushes_partial(tmp_path, monkeypatch):
    tasks, fn, cols = cli.REGISTRY["random-entropy"]

    def flaky(cfg, key, rng):
        if key[2] == 2:
            raise InvalidDimsError("boom")
        return fn(cfg, key, rng)

    monkeypatch.setitem(cli.REGISTRY, "random-entropy", (tasks, flaky, cols))
    code, out = _run(tmp_path, dict(RANDOM_ENTROPY, L=[6], realizations=4))
    assert code == 3
    assert len(cli.read_csv(out / "results.csv")) == 2
    assert json.loads((out / "manifest.json").read_text())["status"].startswith("failed")


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 2**31),
    st.lists(st.integers(2, 16), min_size=1, max_size=4),
    st.floats(0, 10, allow_nan=False),
    st.floats(0, 0.999, allow_nan=False),
)
def test_config_round_trip(seed, Ls, dt, tol):
    cfg = cli.ExperimentConfig("tebd-bench", master_seed=seed, L=Ls, dt=dt, tol=tol)
    back = cli.ExperimentConfig.from_dict(json.loads(cfg.to_json()))
    assert asdict(back) == asdict(cfg)
    assert cli.config_hash(back) == cli.config_hash(cfg)


def test_csv_reals_round_trip(tmp_path):
    vals = [np.pi, 1 / 3, 1e-300, -2.5e17]
    cli.write_csv(tmp_path / "x.csv", ["v"], [{"v": v, "task_seed": "0"} for v in vals])
    assert [float(r["v"]) for r in cli.read_csv(tmp_path / "x.csv")] == vals


def test_shipped_configs_one_per_criterion():
    files = sorted(CONFIGS.glob("acc*.json"))
    assert [f.stem for f in files] == [f"acc{k:02d}" for k in range(1, 12)]
    for f in files:
        cfg = cli.ExperimentConfig.load(f)
        assert cfg.experiment in cli.EXPERIMENTS
    with pytest.raises(ConfigError):
        cli.ExperimentConfig.from_dict({"experiment": "fit-state", "restarts": 0})
