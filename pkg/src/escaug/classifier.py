"""Log-mel patch classifier.

Three 5x5 conv stages with (4,2) max pooling feed a dropout-regularized
dense head; training minimizes categorical cross-entropy with Adam and
projects the hidden dense columns onto a maxnorm ball after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nn import tensor as T
from .nn.tensor import Tensor
from .nn import layers as L
from .nn.optim import Adam, AdamConfig, maxnorm_project


class ClfConfigError(ValueError):
    pass


class ClfTrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class CnnSpec:
    in_h: int = 128
    in_w: int = 128
    in_c: int = 1
    conv_widths: tuple = (24, 48, 48)
    kernel: int = 5
    pool: tuple = (4, 2)
    dense_width: int = 64
    dropout: float = 0.5
    n_classes: int = 10
    maxnorm_c: float = 3.0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ClfConfigError("need at least 2 classes")
        if len(self.conv_widths) != 3 or any(w < 1 for w in self.conv_widths):
            raise ClfConfigError("conv_widths must be three positive ints")
        ph, pw = self.pool
        # two pooling stages must divide the input cleanly
        if self.in_h % (ph * ph) or self.in_w % (pw * pw):
            raise ClfConfigError(f"input {self.in_h}x{self.in_w} not divisible by pooling {self.pool} twice")
        if not 0.0 <= self.dropout < 1.0:
            raise ClfConfigError("dropout must be in [0, 1)")
        if self.maxnorm_c <= 0:
            raise ClfConfigError("maxnorm_c must be positive")

    @property
    def in_shape(self) -> tuple:
        return (self.in_h, self.in_w, self.in_c)

    @property
    def flat_dim(self) -> int:
        ph, pw = self.pool
        return (self.in_h // (ph * ph)) * (self.in_w // (pw * pw)) * self.conv_widths[2]


def build_cnn(spec: CnnSpec) -> L.Network:
    w1, w2, w3 = spec.conv_widths
    ph, pw = spec.pool
    net = L.Network([
        ("conv1", L.Conv2d(spec.in_c, w1, spec.kernel)),
        ("act1", L.Relu()),
        ("pool1", L.MaxPool2d(ph, pw)),
        ("conv2", L.Conv2d(w1, w2, spec.kernel)),
        ("act2", L.Relu()),
        ("pool2", L.MaxPool2d(ph, pw)),
        ("conv3", L.Conv2d(w2, w3, spec.kernel)),
        ("act3", L.Relu()),
        ("flatten", L.Flatten()),
        ("drop1", L.Dropout(spec.dropout)),
        ("hidden", L.Dense(spec.flat_dim, spec.dense_width)),
        ("act4", L.Relu()),
        ("drop2", L.Dropout(spec.dropout)),
        ("logits", L.Dense(spec.dense_width, spec.n_classes)),
        ("probs", L.Softmax()),
    ], in_shape=spec.in_shape)
    assert net.out_shape == (spec.n_classes,)
    return net


@dataclass(frozen=True)
class ClfTrainConfig:
    epochs: int = 150
    batch_size: int = 128
    adam: AdamConfig = field(default_factory=lambda: AdamConfig(1e-3, 0.9, 0.999))
    early_stop_train_acc: float | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ClfConfigError("epochs and batch_size must be positive")
        if self.early_stop_train_acc is not None and not 0 < self.early_stop_train_acc <= 1:
            raise ClfConfigError("early_stop_train_acc must be in (0, 1]")


def _check_patches(x: np.ndarray, spec: CnnSpec) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 4 or x.shape[1:] != spec.in_shape:
        raise ValueError(f"patches must be (n, {spec.in_h}, {spec.in_w}, {spec.in_c}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("patches contain non-finite values")
    return x


def _logits_forward(net: L.Network, x: Tensor, training: bool, rng) -> Tensor:
    h = x
    for name, layer in net.layers:
        if name == "probs":
            break
        h = layer.forward(h, training=training, rng=rng)
    return h


def train_classifier(x: np.ndarray, y: np.ndarray, cfg: ClfTrainConfig,
                     rng: np.random.Generator, spec: CnnSpec | None = None,
                     log_cb=None) -> tuple[L.Network, list[dict]]:
    """Train on (patches, integer labels); returns (network, per-epoch log).

    The loss is fused log-softmax cross-entropy on the logits; the trailing
    softmax layer is bypassed during training and only used at inference.
    """
    spec = spec or CnnSpec()
    x = _check_patches(x, spec)
    y = np.asarray(y)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    if y.shape != (n,):
        raise ValueError(f"labels must be ({n},), got {y.shape}")
    if y.min() < 0 or y.max() >= spec.n_classes:
        raise ValueError(f"labels must lie in [0, {spec.n_classes})")

    onehot = np.zeros((n, spec.n_classes), dtype=np.float32)
    onehot[np.arange(n), y] = 1.0

    net = build_cnn(spec).init(rng, np.float32)
    adam = Adam(net.params(), cfg.adam)
    hidden_w = dict(net.params())["hidden.w"]
    log: list[dict] = []

    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]
            logits = _logits_forward(net, Tensor(x[idx]), True, rng)
            loss = T.cross_entropy_logits(logits, onehot[idx])
            if not np.isfinite(loss.data):
                raise ClfTrainingError(f"non-finite loss at epoch {epoch}, sample offset {lo}")
            net.zero_grad()
            loss.backward()
            adam.step()
            maxnorm_project(hidden_w, spec.maxnorm_c)
            total_loss += float(loss.data) * len(idx)
            correct += int((logits.data.argmax(axis=1) == y[idx]).sum())
        row = {"epoch": epoch, "loss": total_loss / n, "accuracy": correct / n}
        log.append(row)
        if log_cb is not None:
            log_cb(row)
        if cfg.early_stop_train_acc is not None and row["accuracy"] >= cfg.early_stop_train_acc:
            break
    return net, log


def predict(net: L.Network, patches: np.ndarray, spec: CnnSpec | None = None) -> np.ndarray:
    """Class probabilities, dropout inactive.  Accepts one patch (H, W, C)
    or a batch (n, H, W, C); returns (n_classes,) or (n, n_classes)."""
    spec = spec or CnnSpec()
    single = patches.ndim == 3
    x = _check_patches(patches[None] if single else patches, spec)
    with T.no_grad():
        probs = net.forward(Tensor(x), training=False).data
    return probs[0] if single else probs


def cross_validate(patches: np.ndarray, labels: np.ndarray, folds: np.ndarray,
                   origins, cfg: ClfTrainConfig, seed: int,
                   spec: CnnSpec | None = None, fold_ids=None,
                   log_cb=None) -> tuple[list[dict], list[str]]:
    """Leave-one-fold-out evaluation.

    For fold i: train on every row outside fold i (originals plus any
    augmentation rows assigned to those folds), test on fold i's rows of
    origin "original" only.  Per-fold RNG is spawned from (seed, fold) so
    fold results do not depend on evaluation order.  Returns (fold results
    with confusion matrices, warnings).
    """
    from .metrics import confusion_matrix

    spec = spec or CnnSpec()
    patches = _check_patches(patches, spec)
    labels = np.asarray(labels)
    folds = np.asarray(folds)
    origins = np.asarray(origins)
    n = patches.shape[0]
    if not (labels.shape == folds.shape == origins.shape == (n,)):
        raise ValueError("labels, folds, origins must parallel patches")
    if fold_ids is None:
        fold_ids = sorted(int(f) for f in np.unique(folds))
    warnings: list[str] = []
    results: list[dict] = []

    for fold in fold_ids:
        test_mask = (folds == fold) & (origins == "original")
        train_mask = folds != fold
        if not test_mask.any():
            warnings.append(f"fold {fold}: no original clips to test on, skipped")
            continue
        if not train_mask.any():
            warnings.append(f"fold {fold}: empty training split, skipped")
            continue
        y_train = labels[train_mask]
        missing = sorted(set(range(spec.n_classes)) - set(int(v) for v in np.unique(y_train)))
        if missing:
            warnings.append(f"fold {fold}: classes {missing} absent from training folds")
        rng = np.random.default_rng(np.random.SeedSequence([seed, fold]))
        net, log = train_classifier(patches[train_mask], y_train, cfg, rng, spec=spec)
        probs = predict(net, patches[test_mask], spec=spec)
        y_pred = probs.argmax(axis=1)
        cm = confusion_matrix(labels[test_mask], y_pred, spec.n_classes)
        row = {"fold": fold, "confusion": cm, "n_train": int(train_mask.sum()),
               "n_test": int(test_mask.sum()), "train_log": log}
        results.append(row)
        if log_cb is not None:
            log_cb(row)
    return results, warnings
