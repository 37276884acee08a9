"""Auto-decoder wiring, output squashing, gradient checks, checkpoints."""

import numpy as np
import pytest

from toothfill.errors import CorruptCheckpoint, IncompatibleCheckpoint
from toothfill.model import (
    Checkpoint,
    ModelConfig,
    build_autodecoder,
    build_discriminator,
    decode,
    decode_backward,
    decode_batch,
    decode_grid,
    discriminate,
    load_checkpoint,
    save_checkpoint,
)

SMALL = ModelConfig(code_dim=16, hidden=24, disc_hidden=16)


@pytest.fixture
def small_model(rng):
    return build_autodecoder(SMALL, rng)


def test_layer_counts(small_model):
    assert len(small_model.backbone) == 7
    assert len(small_model.branch3d) == 7
    assert len(small_model.branch2d) == 5
    assert small_model.backbone[0].n_in == 16 + 3 + 2


def test_zeroed_final_layers_decode_to_zero(small_model, rng):
    for stack in (small_model.branch3d, small_model.branch2d):
        stack[-1].weights[:] = 0.0
        stack[-1].bias[:] = 0.0
    for _ in range(10):
        s3, s2 = decode(small_model, rng.standard_normal(16),
                        rng.standard_normal(3), rng.standard_normal(2))
        assert s3 == 0.0 and s2 == 0.0


def test_outputs_respect_clamp(small_model, rng):
    codes = rng.standard_normal((200, 16)) * 3.0
    p3 = rng.uniform(-1, 1, (200, 3))
    p2 = rng.uniform(-1, 1, (200, 2))
    s3, s2, _ = decode_batch(small_model, codes, p3, p2)
    assert np.abs(s3).max() <= SMALL.clamp
    assert np.abs(s2).max() <= SMALL.clamp


def test_decode_deterministic(small_model, rng):
    z = rng.standard_normal(16)
    a = decode(small_model, z, [0.1, 0.2, 0.3], [0.4, 0.5])
    b = decode(small_model, z, [0.1, 0.2, 0.3], [0.4, 0.5])
    assert a == b


def test_decode_gradient_full_model_finite_differences(rng):
    cfg = ModelConfig(code_dim=8, hidden=12)
    model = build_autodecoder(cfg, rng)
    z = rng.standard_normal((1, 8)) * 0.1
    p3 = rng.uniform(-1, 1, (1, 3))
    p2 = rng.uniform(-1, 1, (1, 2))

    def loss():
        s3, s2, _ = decode_batch(model, z, p3, p2)
        return float(s3[0] + 0.5 * s2[0])

    s3, s2, tape = decode_batch(model, z, p3, p2)
    grads, dx = decode_backward(model, tape, np.ones(1), 0.5 * np.ones(1))

    h = 1e-5
    # input gradient (the latent part drives code optimization)
    for j in range(8):
        z[0, j] += h
        up = loss()
        z[0, j] -= 2 * h
        dn = loss()
        z[0, j] += h
        num = (up - dn) / (2 * h)
        assert abs(num - dx[0, j]) < 1e-6 * max(1.0, abs(num))

    # parameter gradient spot check on every stack
    params = model.parameters()
    for pi in range(0, len(params), 7):
        flat = params[pi].ravel()
        j = flat.size // 2
        old = flat[j]
        flat[j] = old + h
        up = loss()
        flat[j] = old - h
        dn = loss()
        flat[j] = old
        num = (up - dn) / (2 * h)
        ana = grads[pi].ravel()[j]
        assert abs(num - ana) < 1e-6 * max(1.0, abs(num))


def test_frozen_backward_matches_full(small_model, rng):
    z = rng.standard_normal((4, 16)) * 0.1
    p3 = rng.uniform(-1, 1, (4, 3))
    p2 = rng.uniform(-1, 1, (4, 2))
    _, _, tape = decode_batch(small_model, z, p3, p2)
    ds3 = rng.standard_normal(4)
    ds2 = rng.standard_normal(4)
    _, dx_full = decode_backward(small_model, tape, ds3, ds2, need_params=True)
    none_grads, dx_frozen = decode_backward(small_model, tape, ds3, ds2, need_params=False)
    assert none_grads is None
    assert np.array_equal(dx_full, dx_frozen)


def test_decode_grid_matches_batch(small_model, rng):
    z = rng.standard_normal(16) * 0.1
    pts = rng.uniform(-1, 1, (50, 3))
    vals = decode_grid(small_model, z, pts, chunk=16)
    codes = np.broadcast_to(z, (50, 16))
    ref, _, _ = decode_batch(small_model, codes, pts, np.zeros((50, 2)), with_2d=False)
    assert np.array_equal(vals, ref)


def test_discriminator_zero_init_gives_half(rng):
    disc = build_discriminator(SMALL, rng)
    disc.stack[-1].weights[:] = 0.0
    disc.stack[-1].bias[:] = 0.0
    for _ in range(5):
        assert discriminate(disc, rng.standard_normal(16)) == 0.5


def test_discriminator_probability_range(rng):
    disc = build_discriminator(SMALL, rng)
    probs = discriminate(disc, rng.standard_normal((64, 16)) * 4.0)
    assert np.all(probs > 0.0) and np.all(probs < 1.0)


def checkpoint_fixture(rng):
    cfg = ModelConfig(code_dim=8, hidden=10, disc_hidden=8)
    model = build_autodecoder(cfg, rng)
    disc = build_discriminator(cfg, rng)
    codebook = {f"shape-{i}": rng.standard_normal(8) * 0.01 for i in range(3)}
    return Checkpoint(model=model, discriminator=disc, codebook=codebook,
                      config=cfg, train_config={"epochs": 5}, seed=42)


def test_checkpoint_round_trip_bitwise(tmp_path, rng):
    ckpt = checkpoint_fixture(rng)
    path = tmp_path / "m.tinp"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    for a, b in zip(ckpt.model.parameters(), back.model.parameters()):
        assert np.array_equal(a, b)
    for a, b in zip(ckpt.discriminator.parameters(), back.discriminator.parameters()):
        assert np.array_equal(a, b)
    for k in ckpt.codebook:
        assert np.array_equal(ckpt.codebook[k], back.codebook[k])
    assert back.seed == 42
    assert back.train_config == {"epochs": 5}
    # identical behavior
    z = rng.standard_normal(8)
    assert decode(ckpt.model, z, [0.1, 0, 0], [0, 0]) == decode(back.model, z, [0.1, 0, 0], [0, 0])


def test_checkpoint_save_is_deterministic(tmp_path, rng):
    ckpt = checkpoint_fixture(rng)
    save_checkpoint(ckpt, tmp_path / "a.tinp")
    save_checkpoint(ckpt, tmp_path / "b.tinp")
    assert (tmp_path / "a.tinp").read_bytes() == (tmp_path / "b.tinp").read_bytes()


def test_checkpoint_wrong_magic(tmp_path, rng):
    path = tmp_path / "bad.tinp"
    ckpt = checkpoint_fixture(rng)
    save_checkpoint(ckpt, path)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    path.write_bytes(bytes(blob))
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(path)


def test_checkpoint_bumped_version(tmp_path, rng):
    path = tmp_path / "v2.tinp"
    ckpt = checkpoint_fixture(rng)
    save_checkpoint(ckpt, path)
    blob = bytearray(path.read_bytes())
    blob[4:8] = np.array(2, dtype="<u4").tobytes()
    path.write_bytes(bytes(blob))
    with pytest.raises(IncompatibleCheckpoint):
        load_checkpoint(path)


def test_checkpoint_truncated(tmp_path, rng):
    path = tmp_path / "t.tinp"
    ckpt = checkpoint_fixture(rng)
    save_checkpoint(ckpt, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:len(blob) - 100])
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(path)


def test_latent_sensitivity_structure(small_model, rng):
    # two different codes induce different 3D fields even untrained
    z1 = rng.standard_normal(16)
    z2 = rng.standard_normal(16)
    pts = rng.uniform(-1, 1, (100, 3))
    f1 = decode_grid(small_model, z1, pts)
    f2 = decode_grid(small_model, z2, pts)
    assert np.abs(f1 - f2).mean() > 0.0
