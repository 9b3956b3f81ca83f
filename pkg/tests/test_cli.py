import json

import numpy as np
import pytest

from simusr.cli import main
from simusr.image import load_image, save_image
from simusr.pairs import verify_pairs
from simusr.resample import bicubic_upsample, resample
from conftest import synthetic_image


@pytest.fixture
def lr_dir(tmp_path):
    d = tmp_path / "lr"
    d.mkdir()
    for i in range(4):
        save_image(synthetic_image(48, 48, seed=40 + i), d / f"img{i}.png")
    return d


def run(args):
    return main([str(a) for a in args])


def manifest(path):
    return json.loads((path / "experiment.json").read_text())


def test_build_pairs_command(lr_dir, tmp_path, capsys):
    out = tmp_path / "pairs"
    assert run(["build-pairs", lr_dir, "--out", out, "--scale", 2]) == 0
    assert "built 4 pairs" in capsys.readouterr().out
    assert (out / "manifest").is_file()
    assert len(list(out.glob("*_son.png"))) == 4
    verify_pairs(out)
    m = manifest(out)
    assert m["deterministic"]["command"] == "build-pairs"
    assert len(m["deterministic"]["inputs"]) == 4


def test_build_pairs_manifest_hash_reproducible(lr_dir, tmp_path):
    out1, out2 = tmp_path / "p1", tmp_path / "p2"
    run(["build-pairs", lr_dir, "--out", out1, "--scale", 2, "--seed", 7])
    run(["build-pairs", lr_dir, "--out", out2, "--scale", 2, "--seed", 7])
    m1, m2 = manifest(out1), manifest(out2)
    assert m1["manifest_hash"] == m2["manifest_hash"]
    assert m1["deterministic"]["outputs"] == m2["deterministic"]["outputs"]


def test_build_pairs_missing_dir_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope"
    assert run(["build-pairs", missing, "--out", tmp_path / "o"]) == 2
    assert "nope" in capsys.readouterr().err


def test_bad_kernel_exit_2(lr_dir, tmp_path):
    assert run(["build-pairs", lr_dir, "--out", tmp_path / "o", "--kernel", "nearest"]) == 2


def full_pipeline(lr_dir, tmp_path, extra_train=()):
    pairs_dir = tmp_path / "pairs"
    run_dir = tmp_path / "run"
    assert run(["build-pairs", lr_dir, "--out", pairs_dir, "--scale", 2]) == 0
    args = ["train", "--pairs", pairs_dir, "--out", run_dir, "--steps", 12,
            "--batch", 2, "--lr-patch", 12, "--seed", 3, *extra_train]
    assert run(args) == 0
    return pairs_dir, run_dir


def test_train_outputs(lr_dir, tmp_path):
    _, run_dir = full_pipeline(lr_dir, tmp_path)
    assert (run_dir / "model.ckpt").is_file()
    log = (run_dir / "train_log.csv").read_text().splitlines()
    assert log[0] == "step,loss,elapsed_ms"
    assert len(log) == 13
    m = manifest(run_dir)
    assert "model.ckpt" in m["deterministic"]["outputs"]
    assert "train_log.csv" in m["timing_outputs"]


def test_train_checkpoint_deterministic(lr_dir, tmp_path):
    _, run1 = full_pipeline(lr_dir, tmp_path / "a")
    _, run2 = full_pipeline(lr_dir, tmp_path / "b")
    assert (run1 / "model.ckpt").read_bytes() == (run2 / "model.ckpt").read_bytes()


def test_infer_and_eval(lr_dir, tmp_path, capsys):
    _, run_dir = full_pipeline(lr_dir, tmp_path)
    sr_dir = tmp_path / "sr"
    assert run(["infer", lr_dir / "img0.png", lr_dir / "img1.png",
                "--ckpt", run_dir / "model.ckpt", "--out", sr_dir]) == 0
    assert (sr_dir / "img0_sr.png").is_file()
    out = load_image(sr_dir / "img0_sr.png")
    assert out.shape == (3, 96, 96)

    ref_dir = tmp_path / "ref"
    ref_dir.mkdir()
    for name in ("img0_sr.png", "img1_sr.png"):
        save_image(load_image(sr_dir / name), ref_dir / name)
    capsys.readouterr()
    assert run(["eval", sr_dir, ref_dir, "--mode", "y", "--shave", 2,
                "--out", tmp_path / "ev"]) == 0
    text = capsys.readouterr().out
    lines = text.strip().splitlines()
    assert lines[0] == "image,psnr_db,ssim,mode,shave"
    assert lines[-1].startswith("mean,")
    assert "inf" in lines[1]  # identical pair
    assert (tmp_path / "ev" / "eval.csv").read_text() == text


def test_infer_scale_conflict_exit_2(lr_dir, tmp_path, capsys):
    _, run_dir = full_pipeline(lr_dir, tmp_path)
    code = run(["infer", lr_dir / "img0.png", "--ckpt", run_dir / "model.ckpt",
                "--out", tmp_path / "s", "--scale", 4])
    assert code == 2
    assert "scale" in capsys.readouterr().err


def test_eval_missing_reference_exit_2(lr_dir, tmp_path):
    _, run_dir = full_pipeline(lr_dir, tmp_path)
    sr_dir = tmp_path / "sr"
    run(["infer", lr_dir / "img0.png", "--ckpt", run_dir / "model.ckpt", "--out", sr_dir])
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run(["eval", sr_dir, empty]) == 2


def test_zssr_command(lr_dir, tmp_path):
    out = tmp_path / "z"
    assert run(["zssr", lr_dir / "img0.png", "--out", out, "--scale", 2,
                "--steps", 10, "--lr-patch", 12, "--seed", 1]) == 0
    sr = load_image(out / "img0_sr.png")
    assert sr.shape == (3, 96, 96)
    assert (out / "zssr_log.csv").is_file()


def test_zssr_deterministic_outputs(lr_dir, tmp_path):
    for sub in ("z1", "z2"):
        assert run(["zssr", lr_dir / "img0.png", "--out", tmp_path / sub, "--scale", 2,
                    "--steps", 8, "--lr-patch", 12, "--seed", 5]) == 0
    a = (tmp_path / "z1" / "img0_sr.png").read_bytes()
    b = (tmp_path / "z2" / "img0_sr.png").read_bytes()
    assert a == b


def test_bench_command(lr_dir, tmp_path, capsys):
    _, run_dir = full_pipeline(lr_dir, tmp_path)
    out = tmp_path / "bench"
    capsys.readouterr()
    assert run(["bench", "--input", lr_dir / "img0.png", "--ckpt", run_dir / "model.ckpt",
                "--scale", 2, "--zssr-steps", 5, "--zssr-lr-patch", 12,
                "--repeats", 3, "--out", out]) == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report["jobs"]) == {"simusr_infer", "zssr_full"}
    assert report["jobs"]["simusr_infer"]["params_count"] > 30_000
    assert report["ratio_zssr_over_infer"] > 0
    assert json.loads((out / "bench.json").read_text()) == report


def test_config_file_and_flag_precedence(lr_dir, tmp_path):
    pairs_dir = tmp_path / "pairs"
    run(["build-pairs", lr_dir, "--out", pairs_dir, "--scale", 2])
    cfg = tmp_path / "train.cfg"
    cfg.write_text("steps=9\nbatch=2\nlr_patch=12\nseed=4\n")
    out1 = tmp_path / "r1"
    assert run(["train", "--pairs", pairs_dir, "--out", out1, "--config", cfg]) == 0
    assert len((out1 / "train_log.csv").read_text().splitlines()) == 10  # header + 9

    out2 = tmp_path / "r2"
    assert run(["train", "--pairs", pairs_dir, "--out", out2, "--config", cfg,
                "--steps", 5]) == 0
    assert len((out2 / "train_log.csv").read_text().splitlines()) == 6  # flag wins


def test_config_file_unknown_key(lr_dir, tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("warp=yes\n")
    assert run(["build-pairs", lr_dir, "--out", tmp_path / "o", "--config", cfg]) == 2
    assert "warp" in capsys.readouterr().err


def test_seed_env_default(lr_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("SIMUSR_SEED", "99")
    out = tmp_path / "p"
    run(["build-pairs", lr_dir, "--out", out, "--scale", 2])
    assert manifest(out)["deterministic"]["config"]["seed"] == 99


def test_denoised_pairs_roundtrip(lr_dir, tmp_path):
    out = tmp_path / "dn"
    assert run(["build-pairs", lr_dir, "--out", out, "--scale", 2,
                "--denoise", "sigma=0.05"]) == 0
    verify_pairs(out)
