"""End-to-end CLI runs at tiny scale: exit codes, files, determinism."""

import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from toothfill.cli import main
from toothfill.model import load_checkpoint


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("clicorpus")
    code = run(["gen-data", "--shapes", 6, "--seed", 7, "--out", out,
                "--split", "4,1,1", "--subdivisions", 2])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def cli_run_dir(cli_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("clirun")
    code = run(["train", "--corpus", cli_corpus, "--out", out,
                "--epochs", 100, "--seed", 7, "--width", 32, "--code-dim", 16,
                "--batch", 256, "--partial-iters", 30, "--disc-epochs", 40])
    assert code == 0
    return out


def dir_tree_equal(a: Path, b: Path) -> bool:
    fa = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    fb = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    if fa != fb:
        return False
    return all(filecmp.cmp(a / p, b / p, shallow=False) for p in fa)


def test_gen_data_identical_trees(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert run(["gen-data", "--shapes", 4, "--seed", 3, "--out", out,
                    "--split", "2,1,1", "--subdivisions", 2]) == 0
    assert dir_tree_equal(a, b)


def test_train_outputs(cli_run_dir):
    ckpt = load_checkpoint(cli_run_dir / "ckpt.tinp")
    assert len(ckpt.codebook) == 4
    telemetry = (cli_run_dir / "telemetry.csv").read_text().strip().splitlines()
    assert len(telemetry) == 101  # header + 100 epochs
    assert (cli_run_dir / "config.json").exists()
    codes = np.load(cli_run_dir / "partial_codes.npy")
    assert codes.shape == (4, 16)


def test_complete_bundle(cli_corpus, cli_run_dir, tmp_path):
    out = tmp_path / "job"
    code = run(["complete", "--ckpt", cli_run_dir / "ckpt.tinp",
                "--corpus", cli_corpus, "--shape-id", "shape-005",
                "--out", out, "--resolution", 24, "--max-iters", 60,
                "--seed", 5])
    assert code == 0
    for name in ("completed.obj", "pre_deform.obj", "history.csv", "job.json", "config.json"):
        assert (out / name).exists()
    doc = json.loads((out / "job.json").read_text())
    assert doc["stop_reason"] in ("DiscriminatorConverged", "MaxIterations")


def test_complete_deterministic(cli_corpus, cli_run_dir, tmp_path):
    outs = []
    for name in ("j1", "j2"):
        out = tmp_path / name
        assert run(["complete", "--ckpt", cli_run_dir / "ckpt.tinp",
                    "--corpus", cli_corpus, "--shape-id", "shape-005",
                    "--out", out, "--resolution", 20, "--max-iters", 15,
                    "--seed", 9]) == 0
        outs.append(out)
    for name in ("completed.obj", "pre_deform.obj", "history.csv", "job.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_eval_pair(cli_corpus, tmp_path, capsys):
    gt = json.loads((cli_corpus / "manifest.json").read_text())
    full = cli_corpus / gt["shapes"][0]["paths"]["full"]
    out = tmp_path / "eval"
    code = run(["eval", "--pred", full, "--gt", full, "--out", out,
                "--metric-samples", 2000])
    assert code == 0
    printed = capsys.readouterr().out
    assert "cd=" in printed


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["train", "--nonsense"])
    assert exc.value.code == 2


def test_runtime_failure_exit_3(tmp_path, capsys):
    code = run(["complete", "--ckpt", tmp_path / "missing.tinp",
                "--out", tmp_path / "x", "--crown", tmp_path / "nope.obj"])
    assert code == 3
    err = capsys.readouterr().err
    doc = json.loads(err.strip().splitlines()[-1])
    assert "error" in doc
