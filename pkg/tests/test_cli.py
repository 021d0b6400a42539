import json
from pathlib import Path

import numpy as np
import pytest

from mass_staging.cli import main
from mass_staging.config import ConfigError, load_config
from mass_staging.ingest import save_edf, synth_dataset, to_recording, write_csv_recording
from mass_staging.spectral import load_features
from mass_staging.training import TrainConfig

ROOT = Path(__file__).resolve().parents[1]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_power_prints_table_value(capsys):
    code, out, _ = run(capsys, "power", "--amp", "ads1299-4", "--ra", "0.8", "--re", "0.5")
    assert code == 0
    assert "6.79 mW" in out
    code, out, _ = run(capsys, "power", "--integrity", "0.72")
    assert [line.split()[-2] for line in out.splitlines()] == ["17.27", "12.10", "8.39"]


def test_describe_default_count(capsys):
    code, out, _ = run(capsys, "describe")
    assert code == 0
    assert "3,578,246" in out.splitlines()[-1]


def test_synth_is_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(capsys, "synth", "--seed", 7, "--records", 2, "--epochs-per-record", 6, "--out", tmp_path / d)[0] == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if p.suffix != ".json")
    assert names == ["record_00.edf", "record_00.mpsd", "record_01.edf", "record_01.mpsd"]
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_mass_seed_fallback(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("MASS_SEED", "7")
    run(capsys, "synth", "--records", 1, "--epochs-per-record", 4, "--out", tmp_path / "env", "--no-edf")
    monkeypatch.delenv("MASS_SEED")
    run(capsys, "synth", "--seed", 7, "--records", 1, "--epochs-per-record", 4, "--out", tmp_path / "arg", "--no-edf")
    a = (tmp_path / "env" / "record_00.mpsd").read_bytes()
    assert a == (tmp_path / "arg" / "record_00.mpsd").read_bytes()
    assert json.loads((tmp_path / "env" / "synth_run.json").read_text())["seed"] == 7
    monkeypatch.setenv("MASS_SEED", "seven")
    code, _, err = run(capsys, "synth", "--out", tmp_path / "bad")
    assert code == 2 and "MASS_SEED" in err


@pytest.mark.parametrize(
    "override,key",
    [
        ("model.d_x=3", "model.d_x"),
        ("model.d_a=abc", "model.d_a"),
        ("train.mask_mode=sometimes", "train"),
        ("schedule.warmup_epochs=500", "schedule"),
        ("bogus.key=1", "bogus"),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, override, key):
    code, _, err = run(capsys, "train", "--data", tmp_path, "--out", tmp_path / "o", "--set", override)
    assert code == 2
    assert key in err


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[model]\nd_a = 16\nwidth = 3\n")
    with pytest.raises(ConfigError) as info:
        load_config(bad)
    assert info.value.key == "model.width"
    bad.write_text("seed = -1\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_shipped_configs_parse():
    default, seed = load_config(ROOT / "configs" / "default.toml")
    assert default == TrainConfig() and seed == 0
    tiny, _ = load_config(ROOT / "configs" / "tiny.toml")
    assert tiny.model.d_a == 16 and tiny.max_steps == 300
    load_config(ROOT / "configs" / "robust.toml")


def test_runtime_failure_exit_1(tmp_path, capsys):
    code, _, err = run(capsys, "eval", "--checkpoint", tmp_path / "missing", "--data", tmp_path, "--out", tmp_path / "o")
    assert code == 1 and "error" in err


def test_train_eval_sweep_roundtrip(tmp_path, capsys):
    data, run_dir = tmp_path / "data", tmp_path / "run"
    run(capsys, "synth", "--seed", 7, "--records", 2, "--epochs-per-record", 16, "--out", data, "--no-edf")
    argv = ["train", "--config", ROOT / "configs" / "tiny.toml", "--data", data, "--set", "train.max_steps=6", "--set", "schedule.total_epochs=2", "--set", "train.batch_size=2"]
    assert run(capsys, *argv, "--out", run_dir)[0] == 0
    assert run(capsys, *argv, "--out", tmp_path / "run2")[0] == 0
    curve = (run_dir / "loss_curve.csv").read_text()
    assert curve == (tmp_path / "run2" / "loss_curve.csv").read_text()
    assert len(curve.splitlines()) == 7
    resolved, seed = load_config(run_dir / "config.toml")
    assert resolved.max_steps == 6 and seed == 0

    ckpt = run_dir / "ckpt_epoch1"
    code, out, _ = run(capsys, "eval", "--checkpoint", ckpt, "--data", data, "--out", tmp_path / "ev", "--ra", 0.5, "--re", 0.2)
    assert code == 0 and "integrity 0.40" in out
    report = json.loads((tmp_path / "ev" / "report.json").read_text())
    assert report["integrity"] == 0.4 and report["eta_p"] > 0

    code, out, _ = run(
        capsys, "sweep", "--checkpoint", ckpt, "--data", data, "--out", tmp_path / "sw",
        "--grid-ra", "0,0.8", "--grid-re", "0,0.5", "--format", "paper", "--threads", 2,
    )
    assert code == 0 and out.startswith("ACC(%)")
    rows = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
    assert len(rows) == 5 and rows[0].startswith("r_a,r_e,integrity")


def test_ingest_edf_and_csv(tmp_path, capsys):
    sig = synth_dataset(3, 1, 5)[0]
    rec = to_recording(sig)
    save_edf(tmp_path / "night.edf", rec)
    write_csv_recording(rec, tmp_path / "night2.csv", tmp_path / "labels.csv", labels=sig.labels)
    code, out, _ = run(capsys, "ingest", tmp_path / "night.edf", "--out", tmp_path / "f")
    assert code == 0 and "5 epochs" in out
    code, _, _ = run(capsys, "ingest", tmp_path / "night2.csv", "--labels", tmp_path / "labels.csv", "--out", tmp_path / "f")
    assert code == 0
    a = load_features(tmp_path / "f" / "night.mpsd")
    b = load_features(tmp_path / "f" / "night2.mpsd")
    np.testing.assert_array_equal(a.labels, sig.labels)
    np.testing.assert_array_equal(b.labels, sig.labels)
    code, _, err = run(capsys, "ingest", tmp_path / "night.edf", "--channel", "EOG", "--out", tmp_path / "f")
    assert code == 1 and "EOG" in err
