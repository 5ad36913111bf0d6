import json
import subprocess
import sys
from pathlib import Path

import pytest

from pugnn.cli import MANIFEST, main
from pugnn.config import dump_config, from_mapping
from pugnn.training import TrainConfig

from conftest import TINY

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
DATA_FILES = ("players.txt", "edges.csv", "meta.json")


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "tiny.cfg").write_text(dump_config(TINY))
    assert main(["generate", "--config", str(CONFIGS / "small.cfg"), "--seed", "1", "--out", str(root / "d1")]) == 0
    return root


def test_generate_is_byte_identical(workspace):
    out = workspace / "d1b"
    assert main(["generate", "--config", str(CONFIGS / "small.cfg"), "--seed", "1", "--out", str(out)]) == 0
    for name in DATA_FILES:
        assert (workspace / "d1" / name).read_bytes() == (out / name).read_bytes()


def test_seed_flag_overrides_config(workspace):
    meta = json.loads((workspace / "d1" / "meta.json").read_text())
    assert meta["seed"] == 1


def test_pipeline_and_manifest(workspace, capsys):
    data, run = workspace / "d1", workspace / "r1"
    before = {n: (data / n).read_bytes() for n in DATA_FILES}
    assert main(["train", "--data", str(data), "--config", str(workspace / "tiny.cfg"), "--runs", "2", "--out", str(run)]) == 0
    assert {n: (data / n).read_bytes() for n in DATA_FILES} == before

    manifest = json.loads((run / MANIFEST).read_text())
    assert manifest["subcommand"] == "train" and manifest["seeds"] == [0, 1]
    assert manifest["config"]["hidden"] == TINY.hidden and manifest["duration_s"] >= 0
    assert set(manifest["version"]) == {"package", "dataset_format", "checkpoint_format"}
    for art in manifest["artifacts"]:
        assert (run / art).is_file()
    assert len(list(run.rglob("manifest*.json"))) == 1
    header = (run / "history.csv").read_text().splitlines()[0]
    assert header == "seed,epoch,train_loss,val_f1"

    capsys.readouterr()
    assert main(["evaluate", "--model", str(run / "checkpoints" / "seed_0.pt"), "--data", str(data)]) == 0
    report = json.loads(capsys.readouterr().out)
    trained = json.loads((run / "metrics.json").read_text())["runs"][0]
    assert report["test"] == trained["test"]
    assert report["validation"]["f1"] == trained["validation_f1"]


def test_manifest_round_trip(workspace):
    run = workspace / "r1"
    if not (run / MANIFEST).exists():
        pytest.skip("pipeline test did not run")
    manifest = json.loads((run / MANIFEST).read_text())
    cfg = from_mapping(TrainConfig, manifest["config"])
    (workspace / "again.cfg").write_text(dump_config(cfg))
    out = workspace / "r2"
    assert main(["train", "--data", str(workspace / "d1"), "--config", str(workspace / "again.cfg"), "--out", str(out)]) == 0
    first = json.loads((run / "metrics.json").read_text())["runs"]
    second = json.loads((out / "metrics.json").read_text())["runs"]
    assert first == second


def test_evaluate_writes_out(workspace, tmp_path, capsys):
    run = workspace / "r1"
    if not run.exists():
        pytest.skip("pipeline test did not run")
    assert main(["evaluate", "--model", str(run / "checkpoints" / "seed_1.pt"), "--data", str(workspace / "d1"), "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / MANIFEST).read_text())["subcommand"] == "evaluate"
    assert (tmp_path / "metrics.json").is_file()


def test_ablate_outputs(workspace):
    out = workspace / "abl"
    rc = main(["ablate", "--data", str(workspace / "d1"), "--config", str(workspace / "tiny.cfg"), "--runs", "1", "--out", str(out)])
    assert rc == 0
    assert (out / "ablation.csv").read_text().splitlines()[0].startswith("variant,f1_mean")
    assert (out / "ablation.png").stat().st_size > 0
    assert json.loads((out / MANIFEST).read_text())["subcommand"] == "ablate"


def test_missing_data_dir(tmp_path, capsys):
    missing = tmp_path / "no_such_dir"
    assert main(["train", "--data", str(missing), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err.strip()
    assert str(missing) in err and len(err.splitlines()) == 1


def test_bad_config_key(workspace, tmp_path, capsys):
    (tmp_path / "bad.cfg").write_text("hiddne = 3\n")
    rc = main(["train", "--data", str(workspace / "d1"), "--config", str(tmp_path / "bad.cfg"), "--out", str(tmp_path / "o")])
    assert rc == 1 and "hiddne" in capsys.readouterr().err


def test_missing_checkpoint(workspace, tmp_path, capsys):
    assert main(["evaluate", "--model", str(tmp_path / "x.pt"), "--data", str(workspace / "d1")]) == 1
    assert "x.pt" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["train", "--bogus"], ["generate", "--out", "x", "--colour", "red"], ["frobnicate"]])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_help_documents_flags(capsys):
    helps = {}
    for cmd in ("generate", "train", "evaluate", "ablate"):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        helps[cmd] = capsys.readouterr().out
    text = "\n".join(helps.values())
    for flag in ("--config", "--seed", "--out", "--data", "--model", "--runs"):
        assert flag in text
    assert "--model" in helps["evaluate"] and "--runs" in helps["ablate"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pugnn", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert all(cmd in proc.stdout for cmd in ("generate", "train", "evaluate", "ablate"))
