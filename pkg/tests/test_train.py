import csv
import math

import numpy as np
import pytest

from fingerunet.checkpoint import MAGIC, Checkpoint, CheckpointError, checkpoint_load, checkpoint_save
from fingerunet.losses import LossWeights
from fingerunet.model import ModelConfig, build_model
from fingerunet.synth.dataset import generate_sample
from fingerunet.tensor import Tensor
from fingerunet.train import (Trainer, TrainConfig, TrainingDiverged, adam_init, adam_step, history_columns,
                              step_batch)

SMALL = dict(depth=2, base_channels=4, input_h=32, input_w=32)


@pytest.fixture(scope="module")
def samples():
    return [generate_sample(100 + i, 32, 32) for i in range(4)]


def small(**kw):
    return build_model(ModelConfig(**{**SMALL, **kw}))


# - Adam -----------------------------------------------------------------------

def _one_step(g, lr):
    p = Tensor(np.array([0.5]), requires_grad=True)
    st = adam_init(["p"], [p])
    adam_step(["p"], [p], [np.array([g])], st, lr)
    return p.data[0] - 0.5, st


def test_adam_first_step_closed_form():
    d, st = _one_step(1.0, 0.001)
    # m_hat = v_hat = 1 -> update = -lr / (1 + eps)
    assert d == pytest.approx(-0.001 / (1 + 1e-8), rel=1e-12)
    assert st.t == 1 and st.m["p"][0] == pytest.approx(0.1) and st.v["p"][0] == pytest.approx(0.001)
    assert _one_step(0.0, 0.001)[0] == 0.0
    assert _one_step(3.0, 0.002)[0] == pytest.approx(2 * _one_step(3.0, 0.001)[0], rel=1e-9)


def test_adam_matches_reference_loop():
    g = np.random.default_rng(0)
    grads = g.standard_normal((5, 3))
    p = Tensor(np.zeros(3), requires_grad=True)
    st = adam_init(["p"], [p])
    ref, m, v = np.zeros(3), np.zeros(3), np.zeros(3)
    for t, gr in enumerate(grads, 1):
        adam_step(["p"], [p], [gr], st, 0.01)
        m = 0.9 * m + 0.1 * gr
        v = 0.999 * v + 0.001 * gr ** 2
        ref -= 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert np.allclose(p.data, ref, rtol=1e-12)


def test_adam_shape_mismatch():
    p = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ValueError, match="'p'"):
        adam_step(["p"], [p], [np.zeros(4)], adam_init(["p"], [p]), 0.1)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(recon_loss="huber")


# - training loop ----------------------------------------------------------------

def test_degenerate_weights_total_equals_recon(samples):
    tr = Trainer(small(), TrainConfig(batch_size=2, weights=LossWeights(1, 0, 0)), samples)
    for row in tr.run(3):
        assert row.losses.l_total == pytest.approx(row.losses.l_r, rel=1e-6)


def test_history_deterministic(samples):
    cfg = TrainConfig(batch_size=2, eval_interval=2)
    a = [r.losses.as_dict() for r in Trainer(small(), cfg, samples).run(4)]
    b = [r.losses.as_dict() for r in Trainer(small(), cfg, samples).run(4)]
    assert a == b


def test_step_batches_seeded_by_step(samples):
    cfg = TrainConfig(batch_size=3, seed=5)
    a, b = step_batch(samples, cfg, 7), step_batch(samples, cfg, 7)
    assert np.array_equal(a.x.data, b.x.data) and np.array_equal(a.orientation, b.orientation)
    assert not np.array_equal(a.x.data, step_batch(samples, cfg, 8).x.data)
    assert a.x.shape == (3, 1, 32, 32) and a.orientation.shape == (3, 2, 32, 32) and a.mask.shape == (3, 1, 32, 32)


def test_grads_zero_at_step_start(samples):
    tr = Trainer(small(), TrainConfig(batch_size=2), samples)
    seen = []
    tr.grad_hooks.append(lambda ps: seen.append(all(p.grad is not None and not p.grad.any() for p in ps)))
    tr.run(3)
    assert seen == [True, True, True]


def test_divergence_aborts_with_step(samples):
    tr = Trainer(small(), TrainConfig(batch_size=2), samples)
    tr.run(2)
    for p in tr.params:
        p.data[...] = np.nan
    with pytest.raises(TrainingDiverged, match="step 3") as e:
        tr.train_step()
    assert e.value.step == 3 and math.isnan(e.value.breakdown.l_r)


def test_dataset_model_dims_must_agree(samples):
    with pytest.raises(ValueError):
        Trainer(build_model(ModelConfig(depth=2, base_channels=4, input_h=64, input_w=64)), TrainConfig(), samples)


def test_history_csv_columns(samples, tmp_path):
    assert history_columns(("enhancement",)) == ["step", "l_r", "l_total", "ssim", "psnr", "rmse"]
    path = tmp_path / "h.csv"
    cfg = TrainConfig(batch_size=2, eval_interval=2, history_path=str(path))
    Trainer(small(), cfg, samples).run(4)
    rows = list(csv.DictReader(path.open()))
    assert [r["step"] for r in rows] == ["1", "2", "3", "4"]
    assert rows[0]["ssim"] == "" and rows[1]["ssim"] != ""
    assert set(rows[0]) == {"step", "l_r", "l_m", "l_o", "l_total", "ssim", "psnr", "rmse"}
    path2 = tmp_path / "s.csv"
    Trainer(small(heads=("enhancement",)), TrainConfig(batch_size=2, history_path=str(path2)), samples).run(1)
    assert path2.read_text().splitlines()[0] == "step,l_r,l_total,ssim,psnr,rmse"


# - checkpoints -------------------------------------------------------------------

def test_round_trip_bitwise(samples, tmp_path):
    tr = Trainer(small(), TrainConfig(batch_size=2), samples)
    tr.run(2)
    checkpoint_save(tmp_path / "c.ckpt", tr.checkpoint())
    c = checkpoint_load(tmp_path / "c.ckpt")
    assert c.step == 2 and c.adam.t == 2 and c.model_config == tr.model.cfg
    m = c.build()
    for (n, p), (n2, q) in zip(tr.model.named_parameters(), m.named_parameters()):
        assert n == n2 and p.data.tobytes() == q.data.tobytes()
    for name, arr in tr.adam.m.items():
        assert np.array_equal(arr, c.adam.m[name]) and np.array_equal(tr.adam.v[name], c.adam.v[name])
    x = Tensor(samples[0].degraded[None, None].astype(np.float32))
    assert np.array_equal(tr.model.forward(x).enhanced.data, m.forward(x).enhanced.data)
    assert (tmp_path / "c.ckpt").read_bytes()[:4] == MAGIC


def test_load_errors(samples, tmp_path):
    m = small()
    p = tmp_path / "c.ckpt"
    checkpoint_save(p, Checkpoint.from_model(m))
    raw = p.read_bytes()
    bad = tmp_path / "bad"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        checkpoint_load(bad)
    bad.write_bytes(raw[:4] + (2).to_bytes(4, "little") + raw[8:])
    with pytest.raises(CheckpointError, match="version 2"):
        checkpoint_load(bad)
    bad.write_bytes(raw[:-10])
    with pytest.raises(CheckpointError, match="truncated"):
        checkpoint_load(bad)
    bad.write_bytes(raw + b"\x00")
    with pytest.raises(CheckpointError, match="trailing"):
        checkpoint_load(bad)


def test_shape_mismatch_names_parameter(tmp_path):
    m = small()
    c = Checkpoint.from_model(m)
    c.params["enc.0.0.conv.pointwise"] = np.zeros((5, 1, 1, 1), np.float32)
    checkpoint_save(tmp_path / "c.ckpt", c)
    with pytest.raises(CheckpointError, match="enc.0.0.conv.pointwise"):
        checkpoint_load(tmp_path / "c.ckpt")
    del c.params["enc.0.0.conv.pointwise"]
    with pytest.raises(CheckpointError, match="enc.0.0.conv.pointwise"):
        c.build()


def test_resume_continues_numbering_and_matches_straight_run(samples, tmp_path):
    cfg = TrainConfig(batch_size=2, checkpoint_path=str(tmp_path / "r.ckpt"))
    straight = Trainer(small(), TrainConfig(batch_size=2), samples).run(6)
    Trainer(small(), cfg, samples).run(3)
    c = checkpoint_load(tmp_path / "r.ckpt")
    resumed = Trainer(c.build(), TrainConfig(batch_size=2), samples, c.adam, c.step).run(6)
    assert [r.step for r in resumed] == [4, 5, 6]
    for a, b in zip(straight[3:], resumed):
        for k, v in a.losses.as_dict().items():
            assert b.losses.as_dict()[k] == pytest.approx(v, rel=1e-6)
