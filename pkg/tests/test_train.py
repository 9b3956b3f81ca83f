import csv

import numpy as np
import pytest

from simusr import nn
from simusr.image import quantize
from simusr.pairs import AugmentPolicy, PairSetSpec, PseudoPair, build_pairs
from simusr.resample import bicubic_upsample
from simusr.train import (
    TrainConfig,
    ZssrConfig,
    infer,
    train_simusr,
    train_zssr,
    write_log_csv,
)
from conftest import synthetic_image


def small_pairs(n=3, size=48, seed=0, scale=2):
    images = [quantize(synthetic_image(size, size, seed=seed + i)) for i in range(n)]
    return build_pairs(PairSetSpec(count=n, scale=scale), images)


def quick_cfg(steps=25, **kw):
    defaults = dict(steps=steps, batch=2, lr_patch=12, seed=1, scale=2)
    defaults.update(kw)
    return TrainConfig(**defaults)


def test_train_rejects_zero_steps():
    with pytest.raises(ValueError):
        TrainConfig(steps=0)
    with pytest.raises(ValueError):
        ZssrConfig(steps=0)


def test_train_deterministic_checkpoints(tmp_path):
    pairs = small_pairs()
    ckpt1, log1 = train_simusr(pairs, quick_cfg())
    ckpt2, log2 = train_simusr(pairs, quick_cfg())
    nn.save_checkpoint(tmp_path / "a.ckpt", ckpt1)
    nn.save_checkpoint(tmp_path / "b.ckpt", ckpt2)
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
    assert [row[:2] for row in log1] == [row[:2] for row in log2]


def test_train_seed_changes_result():
    pairs = small_pairs()
    ckpt1, _ = train_simusr(pairs, quick_cfg(seed=1))
    ckpt2, _ = train_simusr(pairs, quick_cfg(seed=2))
    assert any(not np.array_equal(ckpt1.params[n], ckpt2.params[n]) for n in ckpt1.params)


def test_train_scale_mismatch_rejected():
    pairs = small_pairs(scale=2)
    with pytest.raises(ValueError, match="scale"):
        train_simusr(pairs, quick_cfg(scale=4))


def test_train_patch_too_large_rejected():
    pairs = small_pairs(size=20)  # sons are 10x10
    with pytest.raises(ValueError, match="lr_patch"):
        train_simusr(pairs, quick_cfg(lr_patch=16))


def test_train_empty_pairs_rejected():
    with pytest.raises(ValueError):
        train_simusr([], quick_cfg())


def test_train_aborts_on_nonfinite_with_pair_id():
    pairs = small_pairs(n=1)
    poisoned = PseudoPair(
        father=np.where(np.arange(48 * 48).reshape(1, 48, 48) == 0, np.nan, 0.5).repeat(3, 0).astype(np.float32),
        son=pairs[0].son,
        source_id="bad",
    )
    with pytest.raises(FloatingPointError, match="bad"):
        train_simusr([poisoned], quick_cfg(steps=5, lr_patch=24, batch=1, augment=AugmentPolicy.off()))


def test_log_rows_and_csv(tmp_path):
    pairs = small_pairs()
    _, log = train_simusr(pairs, quick_cfg(steps=7))
    assert [row[0] for row in log] == list(range(1, 8))
    assert all(np.isfinite(row[1]) for row in log)
    assert all(log[i][2] <= log[i + 1][2] for i in range(6))
    write_log_csv(tmp_path / "log.csv", log)
    with open(tmp_path / "log.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "loss", "elapsed_ms"]
    assert len(rows) == 8


def test_zssr_constant_image_stays_constant():
    const = np.full((3, 48, 48), 0.5, np.float32)
    result = train_zssr(const, ZssrConfig(steps=30, lr_patch=12, seed=0), scale=2)
    assert result.sr.shape == (3, 96, 96)
    assert np.max(np.abs(result.sr - 0.5)) < 2e-2


def test_zssr_deterministic():
    img = quantize(synthetic_image(48, 48, seed=9))
    cfg = ZssrConfig(steps=20, lr_patch=12, seed=4)
    a = train_zssr(img, cfg, scale=2)
    b = train_zssr(img, cfg, scale=2)
    assert np.array_equal(a.sr, b.sr)
    assert a.elapsed_ms > 0
    assert len(a.log) == 20


def test_zssr_too_small_for_patch():
    img = np.full((3, 24, 24), 0.5, np.float32)
    with pytest.raises(ValueError, match="lr_patch"):
        train_zssr(img, ZssrConfig(steps=5, lr_patch=48), scale=2)


def test_infer_zero_checkpoint_is_clipped_bicubic():
    cfg = nn.ModelConfig(scale=2)
    zeros = {n: np.zeros(s, np.float32) for n, s in nn.param_shapes(cfg)}
    ckpt = nn.Checkpoint(cfg=cfg, params=zeros)
    img = synthetic_image(16, 16, seed=2)
    out = infer(ckpt, img)
    assert np.array_equal(out, np.clip(bicubic_upsample(img, 2), 0, 1))
    assert out.shape == (3, 32, 32)


def test_infer_is_pure_and_backward_free():
    cfg = nn.ModelConfig(scale=2)
    ckpt = nn.Checkpoint(cfg=cfg, params=nn.init_params(cfg, 3))
    img = synthetic_image(16, 16, seed=3)
    nn.reset_counters()
    first = infer(ckpt, img)
    second = infer(ckpt, img)
    assert np.array_equal(first, second)
    assert nn.counters["backward"] == 0
    assert nn.counters["forward"] == 2
    assert first.min() >= 0 and first.max() <= 1


def test_infer_channel_mismatch():
    cfg = nn.ModelConfig(in_channels=3, scale=2)
    ckpt = nn.Checkpoint(cfg=cfg, params=nn.init_params(cfg, 0))
    with pytest.raises(ValueError, match="channel"):
        infer(ckpt, np.zeros((1, 16, 16), np.float32))


def test_training_beats_initial_loss():
    pairs = small_pairs(n=4, size=64, seed=20)
    _, log = train_simusr(pairs, quick_cfg(steps=120, batch=4, lr=3e-4))
    first = np.mean([row[1] for row in log[:20]])
    last = np.mean([row[1] for row in log[-20:]])
    assert last < first


def test_zssr_wall_time_scales_with_steps():
    img = quantize(synthetic_image(48, 48, seed=30))
    short = train_zssr(img, ZssrConfig(steps=5, lr_patch=12, seed=0), scale=2)
    longer = train_zssr(img, ZssrConfig(steps=40, lr_patch=12, seed=0), scale=2)
    assert longer.elapsed_ms > short.elapsed_ms
