"""Adversarial raw-waveform synthesis.

A dense-plus-transposed-conv generator maps uniform latent vectors to
fixed-length waveforms; a strided-conv critic with phase shuffling
scores them.  Training follows the gradient-penalty Wasserstein recipe:
several critic updates per generator update, with the penalty computed
on random real/fake interpolates through an explicit input-gradient
expression so the critic update sees exact second-order terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nn import tensor as T
from .nn.tensor import Tensor
from .nn import layers as L
from .nn.optim import Adam, AdamConfig
from .nn.checkpoint import save_tensors, load_tensors, CheckpointError

DEFAULT_LADDER = ((4, 96), (4, 48), (4, 24), (4, 12), (4, 6), (4, 3), (3, None))


class GanConfigError(ValueError):
    pass


class GanTrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ArchConfig:
    """Geometry of the generator/critic pair.

    ``ladder`` lists (stride, width multiplier) per upsampling stage; the
    final stage's width must be None, meaning the output channel count.
    The critic mirrors the ladder in reverse.
    """
    latent_dim: int = 100
    d: int = 64
    c: int = 1
    base_len: int = 16
    kernel: int = 25
    ladder: tuple = DEFAULT_LADDER

    def __post_init__(self):
        if self.latent_dim < 1 or self.d < 1 or self.c < 1 or self.base_len < 1:
            raise GanConfigError("latent_dim, d, c, base_len must be positive")
        if len(self.ladder) < 1:
            raise GanConfigError("ladder must have at least one stage")
        for i, (s, wm) in enumerate(self.ladder):
            last = i == len(self.ladder) - 1
            if s < 1:
                raise GanConfigError(f"ladder stage {i}: stride must be positive")
            if last and wm is not None:
                raise GanConfigError("final ladder width must be None (output channels)")
            if not last and (wm is None or wm < 1):
                raise GanConfigError(f"ladder stage {i}: width multiplier must be positive")
        if self.kernel < max(s for s, _ in self.ladder):
            raise GanConfigError("kernel must be at least the largest stride")

    @property
    def init_width(self) -> int:
        return 2 * self.ladder[0][1] * self.d

    @property
    def output_len(self) -> int:
        n = self.base_len
        for s, _ in self.ladder:
            n *= s
        return n

    def stage_channels(self) -> list[int]:
        return [self.c if wm is None else wm * self.d for _, wm in self.ladder]


def build_generator(arch: ArchConfig) -> L.Network:
    layers: list[tuple[str, L.Layer]] = [
        ("dense", L.Dense(arch.latent_dim, arch.base_len * arch.init_width)),
        ("reshape", L.Reshape((arch.base_len, arch.init_width))),
        ("act0", L.Relu()),
    ]
    prev = arch.init_width
    chans = arch.stage_channels()
    for i, ((stride, _), ch) in enumerate(zip(arch.ladder, chans), start=1):
        layers.append((f"up{i}", L.TConv1d(prev, ch, arch.kernel, stride)))
        last = i == len(arch.ladder)
        layers.append((f"act{i}", L.Tanh() if last else L.Relu()))
        prev = ch
    net = L.Network(layers, in_shape=(arch.latent_dim,))
    assert net.out_shape == (arch.output_len, arch.c)
    return net


def build_critic(arch: ArchConfig, shuffle_n: int = 2) -> L.Network:
    layers: list[tuple[str, L.Layer]] = []
    chans = [arch.c] + arch.stage_channels()[:-1][::-1] + [arch.init_width]
    strides = [s for s, _ in arch.ladder][::-1]
    for j, stride in enumerate(strides, start=1):
        pad = L.same_stride_pad(arch.kernel, stride)
        layers.append((f"conv{j}", L.Conv1d(chans[j - 1], chans[j], arch.kernel, stride, pad)))
        layers.append((f"lrelu{j}", L.LeakyRelu(0.2)))
        layers.append((f"shuffle{j}", L.PhaseShuffle(shuffle_n)))
    layers.append(("flatten", L.Flatten()))
    layers.append(("score", L.Dense(arch.base_len * arch.init_width, 1)))
    net = L.Network(layers, in_shape=(arch.output_len, arch.c))
    assert net.out_shape == (1,)
    return net


@dataclass(frozen=True)
class GanTrainConfig:
    epochs: int = 2500
    batch_size: int = 64
    n_critic: int = 5
    lambda_gp: float = 10.0
    adam: AdamConfig = field(default_factory=lambda: AdamConfig(1e-4, 0.5, 0.9))

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.n_critic < 1:
            raise GanConfigError("epochs, batch_size, n_critic must be positive")
        if self.lambda_gp < 0:
            raise GanConfigError("lambda_gp must be nonnegative")


def sample_latent(rng: np.random.Generator, n: int, latent_dim: int, dtype=np.float32):
    return rng.uniform(-1.0, 1.0, size=(n, latent_dim)).astype(dtype)


def gradient_penalty(critic: L.Network, x_real: np.ndarray, x_fake: np.ndarray,
                     rng: np.random.Generator) -> Tensor:
    """Unscaled penalty mean((||d critic/d x_hat||_2 - 1)^2) on per-sample
    uniform interpolates.  The result participates in the graph, so
    backward() pushes the exact weight derivative into the critic."""
    if x_real.shape != x_fake.shape:
        raise ValueError(f"real {x_real.shape} and fake {x_fake.shape} batches differ")
    dtype = x_real.dtype
    b = x_real.shape[0]
    eps = rng.uniform(0.0, 1.0, size=(b, 1, 1)).astype(dtype)
    xhat = eps * x_real + (1.0 - eps) * x_fake
    g = critic.input_gradient(Tensor(xhat), rng=rng)
    sq = T.add(T.sum_(T.mul(g, g), axis=(1, 2)), Tensor(np.asarray(1e-24, dtype=dtype)))
    norm = T.sqrt(sq)
    dev = T.sub(norm, Tensor(np.asarray(1.0, dtype=dtype)))
    return T.mean_(T.mul(dev, dev))


def critic_loss(critic: L.Network, x_real: np.ndarray, x_fake: np.ndarray,
                rng: np.random.Generator, lambda_gp: float) -> tuple[Tensor, float, float]:
    """Loss tensor plus (wasserstein estimate, penalty value) diagnostics."""
    d_real = critic.forward(Tensor(x_real), rng=rng)
    d_fake = critic.forward(Tensor(x_fake), rng=rng)
    gp = gradient_penalty(critic, x_real, x_fake, rng)
    loss = T.add(T.sub(T.mean_(d_fake), T.mean_(d_real)),
                 T.mul(gp, Tensor(np.asarray(lambda_gp, dtype=x_real.dtype))))
    w_est = float(d_real.data.mean() - d_fake.data.mean())
    return loss, w_est, float(gp.data)


def generator_loss(critic: L.Network, fake: Tensor, rng: np.random.Generator) -> Tensor:
    return T.neg(T.mean_(critic.forward(fake, rng=rng)))


def minimax_value_estimate(critic: L.Network, generator: L.Network,
                           x_real: np.ndarray, z: np.ndarray,
                           rng: np.random.Generator, clamp: float = 1e-7) -> float:
    """Diagnostic original-GAN value: mean log sigmoid(D(x)) plus
    mean log(1 - sigmoid(D(G(z)))), probabilities clamped away from {0,1}."""
    with T.no_grad():
        fake = generator.forward(Tensor(z)).data
        s_real = critic.forward(Tensor(x_real), rng=rng).data
        s_fake = critic.forward(Tensor(fake), rng=rng).data
    p_real = np.clip(1.0 / (1.0 + np.exp(-s_real)), clamp, 1.0 - clamp)
    p_fake = np.clip(1.0 / (1.0 + np.exp(-s_fake)), clamp, 1.0 - clamp)
    return float(np.log(p_real).mean() + np.log(1.0 - p_fake).mean())


def _check_clips(clips: np.ndarray, arch: ArchConfig) -> np.ndarray:
    clips = np.asarray(clips, dtype=np.float32)
    if clips.ndim == 2:
        clips = clips[:, :, None]
    if clips.ndim != 3 or clips.shape[2] != arch.c:
        raise ValueError(f"clips must be (n, {arch.output_len}, {arch.c})")
    if clips.shape[1] != arch.output_len:
        raise ValueError(f"clips are {clips.shape[1]} samples, architecture emits {arch.output_len}")
    if not np.all(np.isfinite(clips)):
        raise ValueError("clips contain non-finite samples")
    if np.abs(clips).max() > 1.0 + 1e-6:
        raise ValueError("clip amplitudes exceed [-1, 1]")
    return clips


def train_gan(clips: np.ndarray, arch: ArchConfig, cfg: GanTrainConfig,
              rng: np.random.Generator, log_cb=None,
              ) -> tuple[L.Network, L.Network, list[dict]]:
    """Adversarial training on one class's clips.

    One epoch runs ceil(n/batch) groups of (n_critic critic updates, one
    generator update).  Batches draw with replacement only when the
    corpus is smaller than the batch.  Returns (generator, critic, log);
    a non-finite loss aborts with the failing step named.
    """
    clips = _check_clips(clips, arch)
    n = clips.shape[0]
    gen = build_generator(arch).init(rng, np.float32)
    critic = build_critic(arch).init(rng, np.float32)
    adam_g = Adam(gen.params(), cfg.adam)
    adam_c = Adam(critic.params(), cfg.adam)
    groups = math.ceil(n / cfg.batch_size)
    replace = n < cfg.batch_size
    log: list[dict] = []

    for epoch in range(1, cfg.epochs + 1):
        c_losses, g_losses, w_ests = [], [], []
        for group in range(groups):
            for step in range(cfg.n_critic):
                idx = rng.choice(n, size=cfg.batch_size, replace=replace)
                real = clips[idx]
                z = sample_latent(rng, cfg.batch_size, arch.latent_dim)
                with T.no_grad():
                    fake = gen.forward(Tensor(z)).data
                loss, w_est, _ = critic_loss(critic, real, fake, rng, cfg.lambda_gp)
                if not np.isfinite(loss.data):
                    raise GanTrainingError(
                        f"non-finite critic loss at epoch {epoch}, group {group + 1}, critic step {step + 1}")
                critic.zero_grad()
                loss.backward()
                adam_c.step()
                c_losses.append(float(loss.data))
                w_ests.append(w_est)
            z = sample_latent(rng, cfg.batch_size, arch.latent_dim)
            fake = gen.forward(Tensor(z))
            g_loss = generator_loss(critic, fake, rng)
            if not np.isfinite(g_loss.data):
                raise GanTrainingError(f"non-finite generator loss at epoch {epoch}, group {group + 1}")
            gen.zero_grad()
            critic.zero_grad()        # scores pass through critic params; discard their grads
            g_loss.backward()
            adam_g.step()
            g_losses.append(float(g_loss.data))
        row = {
            "epoch": epoch,
            "critic_loss": float(np.mean(c_losses)),
            "gen_loss": float(np.mean(g_losses)),
            "wasserstein": float(np.mean(w_ests)),
        }
        log.append(row)
        if log_cb is not None:
            log_cb(row)
    return gen, critic, log


def generate(gen: L.Network, arch: ArchConfig, n: int, rng: np.random.Generator,
             batch: int = 64) -> np.ndarray:
    """Sample n waveforms (n, output_len, c) in [-1, 1]."""
    outs = []
    remaining = n
    while remaining > 0:
        m = min(batch, remaining)
        z = sample_latent(rng, m, arch.latent_dim)
        with T.no_grad():
            outs.append(gen.forward(Tensor(z)).data)
        remaining -= m
    return np.concatenate(outs, axis=0)


# -- persistence -------------------------------------------------------

def save_gan_checkpoint(path, arch: ArchConfig, gen: L.Network, critic: L.Network):
    entries: dict[str, np.ndarray] = {
        "arch.latent_dim": np.array([arch.latent_dim], dtype=np.float32),
        "arch.d": np.array([arch.d], dtype=np.float32),
        "arch.c": np.array([arch.c], dtype=np.float32),
        "arch.base_len": np.array([arch.base_len], dtype=np.float32),
        "arch.kernel": np.array([arch.kernel], dtype=np.float32),
        "arch.strides": np.array([s for s, _ in arch.ladder], dtype=np.float32),
        "arch.widths": np.array([0 if wm is None else wm for _, wm in arch.ladder], dtype=np.float32),
    }
    for name, p in gen.params():
        entries[f"gen.{name}"] = p.data
    for name, p in critic.params():
        entries[f"critic.{name}"] = p.data
    save_tensors(path, entries)


def load_gan_checkpoint(path) -> tuple[ArchConfig, L.Network, L.Network]:
    entries = load_tensors(path)
    try:
        strides = entries["arch.strides"].astype(int)
        widths = entries["arch.widths"].astype(int)
        ladder = tuple((int(s), None if w == 0 else int(w)) for s, w in zip(strides, widths))
        arch = ArchConfig(
            latent_dim=int(entries["arch.latent_dim"][0]),
            d=int(entries["arch.d"][0]),
            c=int(entries["arch.c"][0]),
            base_len=int(entries["arch.base_len"][0]),
            kernel=int(entries["arch.kernel"][0]),
            ladder=ladder,
        )
    except KeyError as e:
        raise CheckpointError(f"checkpoint missing architecture entry {e.args[0]!r}") from None
    gen = build_generator(arch).init(np.random.default_rng(0), np.float32)
    critic = build_critic(arch).init(np.random.default_rng(0), np.float32)
    for prefix, net in (("gen", gen), ("critic", critic)):
        for name, p in net.params():
            key = f"{prefix}.{name}"
            if key not in entries:
                raise CheckpointError(f"checkpoint missing parameter {key!r}")
            arr = entries[key]
            if arr.shape != p.data.shape:
                raise CheckpointError(
                    f"parameter {key!r} has shape {arr.shape}, network expects {p.data.shape}")
            p.data = arr.astype(np.float32)
    return arch, gen, critic
