"""Training loops: mini-batch Adam with plateau scheduling and best-epoch restore."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..data import SampleSet, SarSample
from ..features import derived_bands, normalize_incidence
from ..imageops import gaussian_smooth, gradient_magnitude, laplacian
from ..mathutil import PROB_CLAMP, binary_logloss
from .network import Network
from .optim import Adam, PlateauScheduler

DEFAULT_CHANNELS = ("hh", "hv", "diff")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr0: float = 0.001
    plateau_patience: int = 5
    plateau_factor: float = 0.1
    min_lr: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    channels: tuple[str, ...] = DEFAULT_CHANNELS
    normalize_angle: bool = True
    dtype: str = "float64"  # parameter/activation dtype for nets built from this config

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0.0 < self.plateau_factor < 1.0):
            raise ValueError("plateau_factor must lie in (0, 1)")
        if self.lr0 <= self.min_lr:
            raise ValueError("lr0 must exceed min_lr")
        if not self.channels:
            raise ValueError("channel recipe is empty")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be 'float32' or 'float64'")


@dataclass
class History:
    """Per-epoch training record; lr is the rate used during that epoch."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.val_loss)

    def best_epoch(self) -> int:
        return int(np.argmin(self.val_loss))


def write_history_csv(path, history: History) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_loss", "train_acc", "val_acc", "lr"])
        for i in range(len(history)):
            writer.writerow(
                [
                    i + 1,
                    repr(history.train_loss[i]),
                    repr(history.val_loss[i]),
                    repr(history.train_acc[i]),
                    repr(history.val_acc[i]),
                    repr(history.lr[i]),
                ]
            )


# ---------------------------------------------------------------------------
# Input assembly


def channel_planes(
    s: SarSample, channels: tuple[str, ...], normalize_angle: bool
) -> list[np.ndarray]:
    """Resolve a channel recipe to 2-D arrays for one sample.

    Incidence normalization (when enabled) is applied to the polarization
    planes before any derived channel is computed.
    """
    hh, hv = s.hh, s.hv
    if normalize_angle:
        if s.inc_angle is None:
            raise ValueError(
                f"sample {s.id!r} has no incidence angle; impute before training"
            )
        hh = normalize_incidence(hh, s.inc_angle)
        hv = normalize_incidence(hv, s.inc_angle)
    base = SarSample(
        id=s.id, hh=hh, hv=hv, inc_angle=s.inc_angle,
        angle_imputed=s.angle_imputed, label=s.label,
    )
    out = []
    for token in channels:
        if token == "hh":
            out.append(hh.data)
        elif token == "hv":
            out.append(hv.data)
        elif token in ("diff", "ratio"):
            diff, ratio = derived_bands(base)
            out.append(diff.data if token == "diff" else ratio.data)
        elif token in ("gradmag_hh", "gradmag_hv"):
            out.append(gradient_magnitude(hh if token.endswith("hh") else hv).data)
        elif token in ("laplacian_hh", "laplacian_hv"):
            out.append(laplacian(hh if token.endswith("hh") else hv).data)
        elif token in ("smooth_hh", "smooth_hv"):
            out.append(gaussian_smooth(hh if token.endswith("hh") else hv, 1.0).data)
        else:
            raise ValueError(f"unknown channel token {token!r}")
    return out


def input_tensor(
    sset: SampleSet, channels: tuple[str, ...], normalize_angle: bool
) -> np.ndarray:
    """Stack a sample set into an (N, C, H, W) float64 tensor."""
    if len(sset) == 0:
        raise ValueError("empty sample set")
    planes = [channel_planes(s, channels, normalize_angle) for s in sset]
    return np.stack([np.stack(p) for p in planes])


def label_vector(sset: SampleSet) -> np.ndarray:
    labels = sset.labels()
    if any(l is None for l in labels):
        raise ValueError("sample set contains unlabeled samples")
    return np.asarray(labels, dtype=np.float64)


def prepare_inputs(net: Network, sset: SampleSet) -> np.ndarray:
    """Inference-side input assembly using the stats stored in the model."""
    if net.channels is None or net.channel_mean is None:
        raise ValueError("network has no stored channel recipe/statistics; fit first")
    x = input_tensor(sset, net.channels, net.normalize_angle)
    x = (x - net.channel_mean[None, :, None, None]) / net.channel_std[
        None, :, None, None
    ]
    return x.astype(net.dtype, copy=False)


# ---------------------------------------------------------------------------
# Losses


def loss_logloss(p, y) -> float:
    """Mean binary cross-entropy with probabilities clamped to [1e-15, 1-1e-15]."""
    return binary_logloss(np.asarray(p).ravel(), np.asarray(y).ravel())


def _logloss_grad(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Clamp in float64: 1 - 1e-15 is not representable in float32.
    p_hat = np.clip(np.asarray(p, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return (p_hat - y) / (p_hat * (1.0 - p_hat)) / p_hat.size


def loss_mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return float(np.mean((pred - target) ** 2))


def _mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    return 2.0 * (pred - target) / pred.size


def _logloss_grad_shaped(pred: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient matching the raw (N, 1) network output shape."""
    return _logloss_grad(pred.ravel(), np.asarray(y).ravel()).reshape(pred.shape)


LOSSES = {
    "logloss": (loss_logloss, _logloss_grad_shaped),
    "mse": (loss_mse, _mse_grad),
}


def accuracy(p, y, threshold: float = 0.5) -> float:
    """Fraction correct at the threshold; p == threshold counts positive."""
    p = np.asarray(p, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    return float(np.mean((p >= threshold) == (y == 1.0)))


# ---------------------------------------------------------------------------
# Training loops


def _forward_batched(net: Network, x: np.ndarray, chunk: int = 256) -> np.ndarray:
    outs = [net.forward(x[i : i + chunk]) for i in range(0, x.shape[0], chunk)]
    return np.concatenate(outs, axis=0)


def fit(
    net: Network, train: SampleSet, val: SampleSet, cfg: TrainConfig
) -> tuple[Network, History]:
    """Train the classifier; returns the parameters of the best-val-loss epoch.

    Inputs are standardized per channel by training-set mean/sigma (stored on
    the network for inference). Mini-batches reshuffle every epoch from the
    seeded generator, which also drives the dropout masks, so a fixed seed
    reproduces the History bitwise.
    """
    if len(train) == 0 or len(val) == 0:
        raise ValueError("train and validation sets must be non-empty")
    x_train = input_tensor(train, cfg.channels, cfg.normalize_angle)
    y_train = label_vector(train)
    x_val = input_tensor(val, cfg.channels, cfg.normalize_angle)
    y_val = label_vector(val)

    mean = x_train.mean(axis=(0, 2, 3))
    std = x_train.std(axis=(0, 2, 3))
    std = np.where(std > 0, std, 1.0)
    net.channels = tuple(cfg.channels)
    net.normalize_angle = cfg.normalize_angle
    net.channel_mean = mean
    net.channel_std = std
    x_train = (x_train - mean[None, :, None, None]) / std[None, :, None, None]
    x_val = (x_val - mean[None, :, None, None]) / std[None, :, None, None]
    x_train = x_train.astype(net.dtype, copy=False)
    x_val = x_val.astype(net.dtype, copy=False)

    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(net, cfg.beta1, cfg.beta2, cfg.eps)
    scheduler = PlateauScheduler(
        cfg.lr0,
        patience=cfg.plateau_patience,
        factor=cfg.plateau_factor,
        min_lr=cfg.min_lr,
    )
    history = History()
    lr = cfg.lr0
    best_loss = np.inf
    best_state = net.get_state()

    n = x_train.shape[0]
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb = x_train[idx]
            yb = y_train[idx]
            p = net.forward(xb, training=True, rng=rng).ravel()
            dloss = _logloss_grad(p, yb).astype(net.dtype)
            net.backward(dloss.reshape(-1, 1))
            optimizer.step(lr)

        p_tr = _forward_batched(net, x_train).ravel()
        p_va = _forward_batched(net, x_val).ravel()
        val_loss = loss_logloss(p_va, y_val)
        history.train_loss.append(loss_logloss(p_tr, y_train))
        history.val_loss.append(val_loss)
        history.train_acc.append(accuracy(p_tr, y_train))
        history.val_acc.append(accuracy(p_va, y_val))
        history.lr.append(lr)

        if val_loss < best_loss:
            best_loss = val_loss
            best_state = net.get_state()
        lr = scheduler.update(val_loss)

    net.set_state(best_state)
    return net, history


def fit_autoencoder(
    net: Network, train: SampleSet, cfg: TrainConfig
) -> tuple[Network, list[float]]:
    """Train the autoencoder on reconstruction MSE of its standardized input.

    Returns the network (last epoch; reconstruction has no validation
    monitor) and the per-epoch MSE measured at each epoch's end.
    """
    if len(train) == 0:
        raise ValueError("training set must be non-empty")
    x = input_tensor(train, cfg.channels, cfg.normalize_angle)
    mean = x.mean(axis=(0, 2, 3))
    std = x.std(axis=(0, 2, 3))
    std = np.where(std > 0, std, 1.0)
    net.channels = tuple(cfg.channels)
    net.normalize_angle = cfg.normalize_angle
    net.channel_mean = mean
    net.channel_std = std
    x = ((x - mean[None, :, None, None]) / std[None, :, None, None]).astype(
        net.dtype, copy=False
    )

    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(net, cfg.beta1, cfg.beta2, cfg.eps)
    scheduler = PlateauScheduler(
        cfg.lr0,
        patience=cfg.plateau_patience,
        factor=cfg.plateau_factor,
        min_lr=cfg.min_lr,
    )
    losses: list[float] = []
    lr = cfg.lr0
    n = x.shape[0]
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb = x[idx]
            recon = net.forward(xb, training=True, rng=rng)
            net.backward(_mse_grad(recon, xb))
            optimizer.step(lr)
        recon = _forward_batched(net, x, chunk=64)
        epoch_mse = loss_mse(recon, x)
        losses.append(epoch_mse)
        lr = scheduler.update(epoch_mse)
    return net, losses


# ---------------------------------------------------------------------------
# Gradient checking


def gradient_check(
    net: Network,
    x: np.ndarray,
    y: np.ndarray,
    loss: str = "logloss",
    n_params: int = 200,
    h: float = 1e-3,
    seed: int = 0,
) -> float:
    """Max relative error between backprop and central finite differences.

    Probes n_params randomly chosen parameters (all, if the net is smaller).
    Runs in evaluation mode, so dropout must not be active anywhere.
    """
    loss_fn, grad_fn = LOSSES[loss]
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    pred = net.forward(x)
    net.backward(grad_fn(pred, y))
    analytic = net.gradients()

    entries = []
    for key, arr in net.parameters():
        for flat in range(arr.size):
            entries.append((key, flat))
    rng = np.random.default_rng(seed)
    if len(entries) > n_params:
        chosen = rng.choice(len(entries), size=n_params, replace=False)
        entries = [entries[i] for i in chosen]

    params = dict(net.parameters())
    worst = 0.0
    for key, flat in entries:
        arr = params[key]
        orig = arr.flat[flat]
        arr.flat[flat] = orig + h
        loss_plus = loss_fn(net.forward(x), y)
        arr.flat[flat] = orig - h
        loss_minus = loss_fn(net.forward(x), y)
        arr.flat[flat] = orig
        numeric = (loss_plus - loss_minus) / (2.0 * h)
        exact = analytic[key].flat[flat]
        rel = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
        worst = max(worst, rel)
    return worst
