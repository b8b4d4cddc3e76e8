"""Adversarial pair: geometry, penalty math, training loop, checkpoints."""

import numpy as np
import pytest

import escaug.nn.layers as L
import escaug.nn.tensor as T
from escaug.nn.tensor import Tensor
from escaug.nn.checkpoint import CheckpointError
from escaug.gan import (
    DEFAULT_LADDER, ArchConfig, GanConfigError, GanTrainingError,
    build_generator, build_critic, GanTrainConfig, sample_latent,
    gradient_penalty, critic_loss, generator_loss, minimax_value_estimate,
    train_gan, generate, save_gan_checkpoint, load_gan_checkpoint,
)
from escaug.nn.optim import AdamConfig

DESK = ArchConfig(latent_dim=8, d=2, base_len=16, kernel=5,
                  ladder=((4, 2), (4, 1), (3, None)))


def test_arch_defaults_and_derived():
    a = ArchConfig()
    assert a.ladder == DEFAULT_LADDER
    assert a.init_width == 2 * 96 * 64        # 12288
    assert a.output_len == 16 * 4 ** 6 * 3    # 196608
    assert a.stage_channels() == [96 * 64, 48 * 64, 24 * 64, 12 * 64,
                                  6 * 64, 3 * 64, 1]


def test_arch_validation():
    with pytest.raises(GanConfigError):
        ArchConfig(ladder=((4, 2), (3, 1)))           # last width not None
    with pytest.raises(GanConfigError):
        ArchConfig(ladder=((4, None),), kernel=25, d=0)
    with pytest.raises(GanConfigError):
        ArchConfig(ladder=((4, 2), (3, None)), kernel=3)  # kernel < stride


def test_generator_layer_chain_small():
    gen = build_generator(DESK)
    names = [n for n, _ in gen.layers]
    assert names == ["dense", "reshape", "act0",
                     "up1", "act1", "up2", "act2", "up3", "act3"]
    assert isinstance(dict(gen.layers)["act3"], L.Tanh)
    assert gen.out_shape == (16 * 4 * 4 * 3, 1)


def test_critic_layer_chain_small():
    critic = build_critic(DESK)
    names = [n for n, _ in critic.layers]
    assert names == ["conv1", "lrelu1", "shuffle1",
                     "conv2", "lrelu2", "shuffle2",
                     "conv3", "lrelu3", "shuffle3",
                     "flatten", "score"]
    assert critic.out_shape == (1,)


def test_round_trip_shapes(rng):
    gen = build_generator(DESK).init(rng, np.float32)
    critic = build_critic(DESK).init(rng, np.float32)
    z = sample_latent(rng, 3, DESK.latent_dim)
    with T.no_grad():
        x = gen.forward(Tensor(z)).data
        s = critic.forward(Tensor(x), rng=rng).data
    assert x.shape == (3, DESK.output_len, 1)
    assert s.shape == (3, 1)
    assert np.abs(x).max() <= 1.0


def test_sample_latent_range(rng):
    z = sample_latent(rng, 1000, 16)
    assert z.shape == (1000, 16) and z.dtype == np.float32
    assert z.min() >= -1.0 and z.max() <= 1.0
    assert abs(z.mean()) < 0.05


def _slope_critic(slope: float, length: int):
    """Linear critic sum(slope * x): gradient norm is slope*sqrt(length)."""
    net = L.Network([("flatten", L.Flatten()),
                     ("score", L.Dense(length, 1))], in_shape=(length, 1))
    net.init(np.random.default_rng(0), np.float64)
    params = dict(net.params())
    params["score.w"].data[:] = slope
    params["score.b"].data[:] = 0.0
    return net


def test_gradient_penalty_unit_slope_is_zero(rng):
    net = _slope_critic(1.0, 1)
    gp = gradient_penalty(net, rng.uniform(-1, 1, (6, 1, 1)),
                          rng.uniform(-1, 1, (6, 1, 1)), rng)
    assert abs(float(gp.data)) < 1e-10


def test_gradient_penalty_zero_critic_is_one(rng):
    net = _slope_critic(0.0, 3)
    gp = gradient_penalty(net, rng.uniform(-1, 1, (4, 3, 1)),
                          rng.uniform(-1, 1, (4, 3, 1)), rng)
    assert abs(float(gp.data) - 1.0) < 1e-10


def test_gradient_penalty_slope_three_len_four(rng):
    # ||grad|| = 3*sqrt(4) = 6 everywhere -> (6-1)^2 = 25
    net = _slope_critic(3.0, 4)
    gp = gradient_penalty(net, rng.uniform(-1, 1, (5, 4, 1)),
                          rng.uniform(-1, 1, (5, 4, 1)), rng)
    assert abs(float(gp.data) - 25.0) < 1e-8


def test_critic_loss_decomposition(rng):
    net = _slope_critic(2.0, 2)
    real = rng.uniform(-1, 1, (8, 2, 1))
    fake = rng.uniform(-1, 1, (8, 2, 1))
    loss, w_est, gp = critic_loss(net, real, fake, rng, lambda_gp=10.0)
    d = lambda x: 2.0 * x.sum(axis=(1, 2))
    want_w = float(np.mean(d(real)) - np.mean(d(fake)))
    assert abs(w_est - want_w) < 1e-6
    # ||grad|| = 2*sqrt(2): gp = (2*sqrt(2)-1)^2
    assert abs(gp - (2 * np.sqrt(2) - 1) ** 2) < 1e-6
    assert abs(float(loss.data) - (-want_w + 10.0 * gp)) < 1e-5


def test_minimax_value_hand_case(rng):
    # critic outputs logit ln(9): sigmoid = 0.9
    net = _slope_critic(0.0, 2)
    dict(net.params())["score.b"].data[:] = np.log(9.0)
    gen = build_generator(DESK)  # unused scores; only shape matters

    class _IdGen:
        def forward(self, t, **kw):
            return t
    val = minimax_value_estimate(net, _IdGen(), np.zeros((4, 2, 1)),
                                 np.zeros((4, 2, 1)), rng)
    # log(0.9) + log(1-0.9)
    assert abs(val - (np.log(0.9) + np.log(0.1))) < 1e-5


def test_minimax_clamp_bounds(rng):
    net = _slope_critic(0.0, 2)
    dict(net.params())["score.b"].data[:] = 1000.0   # sigmoid saturates

    class _IdGen:
        def forward(self, t, **kw):
            return t
    val = minimax_value_estimate(net, _IdGen(), np.zeros((2, 2, 1)),
                                 np.zeros((2, 2, 1)), rng)
    assert val >= 2 * np.log(1e-7) - 1e-6            # clamp keeps it finite


def test_train_gan_update_counts(rng):
    # 6 clips, batch 4: 2 groups/epoch -> per epoch 2*n_critic critic steps
    clips = rng.uniform(-0.5, 0.5, (6, DESK.output_len, 1)).astype(np.float32)
    cfg = GanTrainConfig(epochs=2, batch_size=4, n_critic=3,
                         adam=AdamConfig(1e-4, 0.5, 0.9))
    steps = []
    gen, critic, log = train_gan(clips, DESK, cfg,
                                 np.random.default_rng(0),
                                 log_cb=lambda row: steps.append(row))
    assert len(log) == 2 and steps == log
    assert set(log[0]) == {"epoch", "critic_loss", "gen_loss", "wasserstein"}
    assert log[0]["epoch"] == 1 and log[1]["epoch"] == 2
    assert all(np.isfinite(list(r.values())).all() for r in log)


def test_train_gan_deterministic(rng):
    clips = rng.uniform(-0.5, 0.5, (5, DESK.output_len, 1)).astype(np.float32)
    cfg = GanTrainConfig(epochs=1, batch_size=5, n_critic=2)
    outs = []
    for _ in range(2):
        gen, critic, log = train_gan(clips, DESK, cfg, np.random.default_rng(7))
        outs.append((generate(gen, DESK, 3, np.random.default_rng(1)), log))
    assert np.array_equal(outs[0][0], outs[1][0])
    assert outs[0][1] == outs[1][1]


def test_train_gan_rejects_bad_clips(rng):
    cfg = GanTrainConfig(epochs=1, batch_size=2)
    bad_shape = np.zeros((3, DESK.output_len + 1, 1), dtype=np.float32)
    with pytest.raises(ValueError):
        train_gan(bad_shape, DESK, cfg, rng)
    nan = np.zeros((3, DESK.output_len, 1), dtype=np.float32)
    nan[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        train_gan(nan, DESK, cfg, rng)
    loud = np.full((3, DESK.output_len, 1), 1.5, dtype=np.float32)
    with pytest.raises(ValueError):
        train_gan(loud, DESK, cfg, rng)


def test_generate_batching_and_range(rng):
    gen = build_generator(DESK).init(rng, np.float32)
    out = generate(gen, DESK, 7, rng, batch=3)
    assert out.shape == (7, DESK.output_len, 1)
    assert np.abs(out).max() <= 1.0
    assert np.isfinite(out).all()


def test_checkpoint_round_trip(tmp_path, rng):
    gen = build_generator(DESK).init(rng, np.float32)
    critic = build_critic(DESK).init(rng, np.float32)
    p = tmp_path / "g.ckpt"
    save_gan_checkpoint(p, DESK, gen, critic)
    arch2, gen2, critic2 = load_gan_checkpoint(p)
    assert arch2 == DESK
    for (n1, t1), (n2, t2) in zip(gen.params(), gen2.params()):
        assert n1 == n2 and np.array_equal(t1.data, t2.data)
    z = sample_latent(np.random.default_rng(3), 2, DESK.latent_dim)
    with T.no_grad():
        a = gen.forward(Tensor(z)).data
        b = gen2.forward(Tensor(z)).data
    assert np.array_equal(a, b)
    # same save twice -> identical bytes
    p2 = tmp_path / "g2.ckpt"
    save_gan_checkpoint(p2, DESK, gen, critic)
    assert p.read_bytes() == p2.read_bytes()


def test_checkpoint_missing_entry(tmp_path, rng):
    from escaug.nn.checkpoint import load_tensors, save_tensors
    gen = build_generator(DESK).init(rng, np.float32)
    critic = build_critic(DESK).init(rng, np.float32)
    p = tmp_path / "g.ckpt"
    save_gan_checkpoint(p, DESK, gen, critic)
    entries = load_tensors(p)
    del entries["gen.dense.w"]
    save_tensors(p, entries)
    with pytest.raises(CheckpointError):
        load_gan_checkpoint(p)
