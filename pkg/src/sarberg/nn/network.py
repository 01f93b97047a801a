"""Network container, the reference architectures, and checkpoint I/O."""

from __future__ import annotations

import copy
import io
import json
import zipfile

import numpy as np

from .layers import (
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2,
    PadTo,
    Relu,
    Sigmoid,
    Upsample2,
    layer_from_spec,
)

CHECKPOINT_FORMAT = "sarberg-net"
CHECKPOINT_VERSION = 1
# Fixed zip entry timestamp so checkpoints are byte-deterministic.
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


class Network:
    """An ordered layer stack with its input contract.

    channel_mean/channel_std are the per-channel standardization statistics
    computed on the training set; they travel with the model so inference
    applies the identical transform.
    """

    def __init__(
        self,
        layers: list[Layer],
        input_ch: int,
        input_hw: tuple[int, int],
        kind: str,
        dtype=np.float64,
    ):
        self.layers = layers
        self.input_ch = input_ch
        self.input_hw = tuple(input_hw)
        self.kind = kind  # "classifier" | "autoencoder"
        self.dtype = np.dtype(dtype)
        self.channels: tuple[str, ...] | None = None
        self.normalize_angle: bool = True
        self.channel_mean: np.ndarray | None = None
        self.channel_std: np.ndarray | None = None

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 4 or x.shape[1] != self.input_ch or x.shape[2:] != self.input_hw:
            raise ValueError(
                f"expected input (N, {self.input_ch}, {self.input_hw[0]}, "
                f"{self.input_hw[1]}), got {x.shape}"
            )
        for layer in self.layers:
            x = layer.forward(x, training, rng)
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                out.append((f"{i}.{name}", arr))
        return out

    def gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.grads.items():
                out[f"{i}.{name}"] = arr
        return out

    def param_count(self) -> int:
        return sum(arr.size for _, arr in self.parameters())

    def get_state(self) -> dict[str, np.ndarray]:
        return {key: arr.copy() for key, arr in self.parameters()}

    def set_state(self, state: dict[str, np.ndarray]) -> None:
        for key, arr in self.parameters():
            if key not in state:
                raise ValueError(f"state is missing parameter {key!r}")
            if state[key].shape != arr.shape:
                raise ValueError(
                    f"parameter {key!r}: shape {state[key].shape} != {arr.shape}"
                )
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                layer.params[name] = state[f"{i}.{name}"].copy()

    def clone(self) -> "Network":
        return copy.deepcopy(self)


def _trunk_layers(input_ch: int, widths, rng, dtype) -> list[Layer]:
    layers: list[Layer] = []
    prev = input_ch
    for width in widths:
        layers += [Conv2d(prev, width, rng, dtype=dtype), Relu(), MaxPool2()]
        prev = width
    return layers


def _pool_sizes(hw: tuple[int, int], n_pools: int) -> list[tuple[int, int]]:
    sizes = [tuple(hw)]
    for _ in range(n_pools):
        h, w = sizes[-1]
        sizes.append((h // 2, w // 2))
    return sizes


def build_classifier(
    input_ch: int,
    seed: int,
    input_hw: tuple[int, int] = (75, 75),
    conv_widths: tuple[int, ...] = (16, 32, 64),
    dense_width: int = 64,
    dropout_rate: float = 0.3,
    dtype=np.float64,
) -> Network:
    """The reference CNN: three conv/pool blocks and a small dense head.

    He-uniform weights, zero biases, deterministic per seed. The default
    shape targets 75x75 scenes; the tiny variants used by gradient checks
    shrink input_hw and conv_widths.
    """
    if input_ch < 1:
        raise ValueError("input_ch must be >= 1")
    rng = np.random.default_rng(seed)
    layers = _trunk_layers(input_ch, conv_widths, rng, dtype)
    h, w = _pool_sizes(input_hw, len(conv_widths))[-1]
    flat = conv_widths[-1] * h * w
    layers += [
        Flatten(),
        Dropout(dropout_rate),
        Dense(flat, dense_width, rng, dtype=dtype),
        Relu(),
        Dropout(dropout_rate),
        Dense(dense_width, 1, rng, dtype=dtype),
        Sigmoid(),
    ]
    return Network(layers, input_ch, input_hw, kind="classifier", dtype=dtype)


def build_autoencoder(
    input_ch: int,
    seed: int,
    input_hw: tuple[int, int] = (75, 75),
    conv_widths: tuple[int, ...] = (16, 32, 64),
    dtype=np.float64,
) -> Network:
    """Convolutional autoencoder whose encoder mirrors the classifier trunk.

    The decoder upsamples back through the recorded pre-pool sizes (padding
    odd sizes by edge replication) and ends in a linear conv that
    reconstructs the input channels.
    """
    if input_ch < 1:
        raise ValueError("input_ch must be >= 1")
    rng = np.random.default_rng(seed)
    layers = _trunk_layers(input_ch, conv_widths, rng, dtype)
    sizes = _pool_sizes(input_hw, len(conv_widths))

    prev = conv_widths[-1]
    decoder_widths = list(conv_widths[-2::-1]) + [input_ch]
    for i, width in enumerate(decoder_widths):
        target = sizes[len(conv_widths) - 1 - i]
        layers.append(Upsample2())
        layers.append(PadTo(*target))
        layers.append(Conv2d(prev, width, rng, dtype=dtype))
        if i < len(decoder_widths) - 1:
            layers.append(Relu())
        prev = width
    return Network(layers, input_ch, input_hw, kind="autoencoder", dtype=dtype)


def encoder_span(net: Network) -> int:
    """Number of leading layers forming the conv/pool trunk."""
    n = 0
    for layer in net.layers:
        if isinstance(layer, (Conv2d, Relu, MaxPool2)):
            n += 1
        else:
            break
    return n


def transfer_encoder(ae: Network, clf: Network) -> Network:
    """Copy the autoencoder's encoder weights into a classifier's trunk.

    Returns a new classifier; the input is left untouched. The dense head
    keeps its fresh initialization and optimizer state starts cold (the
    training loop builds Adam state per run).
    """
    span_ae = encoder_span(ae)
    span_clf = encoder_span(clf)
    ae_convs = [l for l in ae.layers[:span_ae] if isinstance(l, Conv2d)]
    clf_convs = [l for l in clf.layers[:span_clf] if isinstance(l, Conv2d)]
    if len(ae_convs) != len(clf_convs):
        raise ValueError(
            f"encoder depth mismatch: {len(ae_convs)} vs {len(clf_convs)} conv layers"
        )
    for a, c in zip(ae_convs, clf_convs):
        if a.params["W"].shape != c.params["W"].shape:
            raise ValueError(
                f"conv shape mismatch: {a.params['W'].shape} vs {c.params['W'].shape}"
            )
    out = clf.clone()
    out_convs = [l for l in out.layers[: encoder_span(out)] if isinstance(l, Conv2d)]
    for a, c in zip(ae_convs, out_convs):
        c.params["W"] = a.params["W"].copy()
        c.params["b"] = a.params["b"].copy()
    return out


# ---------------------------------------------------------------------------
# Checkpoints


def save_network(net: Network, path) -> None:
    """Write a deterministic zip: meta.json plus one .npy entry per parameter."""
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": net.kind,
        "input_ch": net.input_ch,
        "input_hw": list(net.input_hw),
        "dtype": net.dtype.name,
        "layers": [layer.spec() for layer in net.layers],
        "channels": list(net.channels) if net.channels is not None else None,
        "normalize_angle": net.normalize_angle,
        "channel_mean": (
            net.channel_mean.tolist() if net.channel_mean is not None else None
        ),
        "channel_std": (
            net.channel_std.tolist() if net.channel_std is not None else None
        ),
        "params": [key for key, _ in net.parameters()],
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr(
            zipfile.ZipInfo("meta.json", date_time=_ZIP_EPOCH),
            json.dumps(meta, separators=(",", ":")),
        )
        for key, arr in net.parameters():
            buf = io.BytesIO()
            np.save(buf, arr)
            zf.writestr(zipfile.ZipInfo(f"{key}.npy", date_time=_ZIP_EPOCH), buf.getvalue())


def load_network(path) -> Network:
    try:
        with zipfile.ZipFile(path, "r") as zf:
            meta = json.loads(zf.read("meta.json"))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ValueError("not a sarberg network checkpoint")
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ValueError(
                    f"unsupported checkpoint version {meta.get('version')!r}"
                )
            layers = [layer_from_spec(s) for s in meta["layers"]]
            net = Network(
                layers,
                input_ch=int(meta["input_ch"]),
                input_hw=tuple(meta["input_hw"]),
                kind=meta.get("kind", "classifier"),
                dtype=np.dtype(meta.get("dtype", "float64")),
            )
            state = {}
            for key in meta["params"]:
                state[key] = np.load(io.BytesIO(zf.read(f"{key}.npy")))
            net.set_state(state)
            if meta.get("channels") is not None:
                net.channels = tuple(meta["channels"])
            net.normalize_angle = bool(meta.get("normalize_angle", True))
            if meta.get("channel_mean") is not None:
                net.channel_mean = np.asarray(meta["channel_mean"], dtype=np.float64)
            if meta.get("channel_std") is not None:
                net.channel_std = np.asarray(meta["channel_std"], dtype=np.float64)
            return net
    except (zipfile.BadZipFile, KeyError) as e:
        raise ValueError(f"corrupt checkpoint: {e}") from e
