"""Layer implementations: forward caches what backward needs, nothing more.

Activations are float64 NCHW (or NF after flatten). Every parameterized layer
keeps parameters in `self.params` and writes gradients of the mean batch loss
into `self.grads` during backward.
"""

from __future__ import annotations

import numpy as np



def he_uniform(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype=np.float64
) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base layer; stateless layers only override forward/backward."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, training: bool, rng) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError


def _im2col(x: np.ndarray) -> np.ndarray:
    """3x3 same-padded windows as (N, C*9, H*W), tap-major within channel.

    The (n, c, i, j, H, W) copy order keeps rows contiguous, so the gather
    runs at memcpy speed instead of a strided shuffle.
    """
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
    return np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3)).reshape(
        n, c * 9, h * w
    )


class Conv2d(Layer):
    """3x3 convolution, stride 1, zero 'same' padding."""

    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        rng: np.random.Generator | None = None,
        dtype=np.float64,
    ):
        super().__init__()
        self.in_ch = in_ch
        self.out_ch = out_ch
        fan_in = in_ch * 9
        if rng is None:
            weights = np.zeros((out_ch, in_ch, 3, 3), dtype=dtype)
        else:
            weights = he_uniform(rng, (out_ch, in_ch, 3, 3), fan_in, dtype)
        self.params = {"W": weights, "b": np.zeros(out_ch, dtype=dtype)}
        self._cols: np.ndarray | None = None
        self._in_shape: tuple[int, ...] | None = None

    def forward(self, x, training, rng):
        n, c, h, w = x.shape
        if c != self.in_ch:
            raise ValueError(f"conv expects {self.in_ch} channels, got {c}")
        cols = _im2col(x)
        wm = self.params["W"].reshape(self.out_ch, -1)
        out = wm @ cols + self.params["b"][:, None]
        self._cols = cols
        self._in_shape = x.shape
        return out.reshape(n, self.out_ch, h, w)

    def backward(self, dout):
        n, c, h, w = self._in_shape
        dout_m = dout.reshape(n, self.out_ch, h * w)
        self.grads["W"] = (
            np.matmul(dout_m, self._cols.transpose(0, 2, 1))
            .sum(axis=0)
            .reshape(self.out_ch, self.in_ch, 3, 3)
        )
        self.grads["b"] = dout_m.sum(axis=(0, 2))
        # dx: push window gradients back through im2col by accumulating the
        # nine shifted slices into the padded image (stride-1 col2im).
        wm = self.params["W"].reshape(self.out_ch, -1)
        dout_flat = np.ascontiguousarray(dout_m.transpose(1, 0, 2)).reshape(
            self.out_ch, n * h * w
        )
        dcols = (wm.T @ dout_flat).reshape(self.in_ch, 3, 3, n, h, w)
        dxp = np.zeros((n, self.in_ch, h + 2, w + 2), dtype=dout.dtype)
        for i in range(3):
            for j in range(3):
                dxp[:, :, i : i + h, j : j + w] += dcols[:, i, j].transpose(1, 0, 2, 3)
        return dxp[:, :, 1 : h + 1, 1 : w + 1]

    def spec(self):
        return {"type": "conv2d", "in_ch": self.in_ch, "out_ch": self.out_ch}


class Relu(Layer):
    def forward(self, x, training, rng):
        out = np.maximum(x, 0.0)
        self._active = out > 0
        return out

    def backward(self, dout):
        return dout * self._active

    def spec(self):
        return {"type": "relu"}


class MaxPool2(Layer):
    """2x2 max pooling with stride 2; odd trailing rows/cols are dropped.

    Pooling runs as two strided comparisons (rows, then columns); ties route
    the gradient to the earlier position only.
    """

    def forward(self, x, training, rng):
        n, c, h, w = x.shape
        h2, w2 = h // 2, w // 2
        even_rows = x[:, :, 0 : 2 * h2 : 2, : 2 * w2]
        odd_rows = x[:, :, 1 : 2 * h2 : 2, : 2 * w2]
        self._row_sel = odd_rows > even_rows
        row_max = np.where(self._row_sel, odd_rows, even_rows)
        left = row_max[:, :, :, 0::2]
        right = row_max[:, :, :, 1::2]
        self._col_sel = right > left
        self._in_shape = x.shape
        return np.where(self._col_sel, right, left)

    def backward(self, dout):
        n, c, h, w = self._in_shape
        h2, w2 = h // 2, w // 2
        drow = np.zeros((n, c, h2, 2 * w2), dtype=dout.dtype)
        drow[:, :, :, 0::2] = np.where(self._col_sel, 0.0, dout)
        drow[:, :, :, 1::2] = np.where(self._col_sel, dout, 0.0)
        dx = np.zeros((n, c, h, w), dtype=dout.dtype)
        dx[:, :, 0 : 2 * h2 : 2, : 2 * w2] = np.where(self._row_sel, 0.0, drow)
        dx[:, :, 1 : 2 * h2 : 2, : 2 * w2] = np.where(self._row_sel, drow, 0.0)
        return dx

    def spec(self):
        return {"type": "maxpool2"}


class Dropout(Layer):
    """Inverted dropout: scaling at train time, identity at evaluation."""

    def __init__(self, rate: float):
        super().__init__()
        if not (0.0 <= rate < 1.0):
            raise ValueError("dropout rate must lie in [0, 1)")
        self.rate = rate
        self._mask: np.ndarray | None = None

    def forward(self, x, training, rng):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("dropout in training mode needs a random generator")
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) >= self.rate).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask

    def spec(self):
        return {"type": "dropout", "rate": self.rate}


class Flatten(Layer):
    def forward(self, x, training, rng):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._in_shape)

    def spec(self):
        return {"type": "flatten"}


class Dense(Layer):
    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator | None = None,
        dtype=np.float64,
    ):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        if rng is None:
            weights = np.zeros((in_features, out_features), dtype=dtype)
        else:
            weights = he_uniform(rng, (in_features, out_features), in_features, dtype)
        self.params = {"W": weights, "b": np.zeros(out_features, dtype=dtype)}

    def forward(self, x, training, rng):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ValueError(
                f"dense expects (N, {self.in_features}), got {x.shape}"
            )
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dout):
        self.grads["W"] = self._x.T @ dout
        self.grads["b"] = dout.sum(axis=0)
        return dout @ self.params["W"].T

    def spec(self):
        return {
            "type": "dense",
            "in_features": self.in_features,
            "out_features": self.out_features,
        }


class Sigmoid(Layer):
    def forward(self, x, training, rng):
        # Stable two-branch logistic, evaluated in the input's dtype.
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._out = out
        return out

    def backward(self, dout):
        return dout * self._out * (1.0 - self._out)

    def spec(self):
        return {"type": "sigmoid"}


class Upsample2(Layer):
    """Nearest-neighbor 2x upsampling."""

    def forward(self, x, training, rng):
        return x.repeat(2, axis=2).repeat(2, axis=3)

    def backward(self, dout):
        n, c, h, w = dout.shape
        return dout.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))

    def spec(self):
        return {"type": "upsample2"}


class PadTo(Layer):
    """Edge-replicate pad on the bottom/right up to a fixed spatial size.

    Restores odd pre-pool sizes in the decoder (e.g. 36 -> 37); a no-op when
    the input already matches the target.
    """

    def __init__(self, height: int, width: int):
        super().__init__()
        self.height = height
        self.width = width

    def forward(self, x, training, rng):
        n, c, h, w = x.shape
        if h > self.height or w > self.width:
            raise ValueError(
                f"pad_to cannot shrink {h}x{w} to {self.height}x{self.width}"
            )
        self._in_hw = (h, w)
        if (h, w) == (self.height, self.width):
            return x
        return np.pad(
            x, ((0, 0), (0, 0), (0, self.height - h), (0, self.width - w)), mode="edge"
        )

    def backward(self, dout):
        h, w = self._in_hw
        if (h, w) == (self.height, self.width):
            return dout
        dx = dout[:, :, :h, :w].copy()
        if self.height > h:
            dx[:, :, h - 1, :] += dout[:, :, h:, :w].sum(axis=2)
        if self.width > w:
            dx[:, :, :, w - 1] += dout[:, :, :h, w:].sum(axis=3)
        if self.height > h and self.width > w:
            dx[:, :, h - 1, w - 1] += dout[:, :, h:, w:].sum(axis=(2, 3))
        return dx

    def spec(self):
        return {"type": "pad_to", "height": self.height, "width": self.width}


LAYER_TYPES = {
    "conv2d": Conv2d,
    "relu": Relu,
    "maxpool2": MaxPool2,
    "dropout": Dropout,
    "flatten": Flatten,
    "dense": Dense,
    "sigmoid": Sigmoid,
    "upsample2": Upsample2,
    "pad_to": PadTo,
}


def layer_from_spec(spec: dict) -> Layer:
    kind = spec.get("type")
    if kind not in LAYER_TYPES:
        raise ValueError(f"unknown layer type {kind!r}")
    kwargs = {k: v for k, v in spec.items() if k != "type"}
    return LAYER_TYPES[kind](**kwargs)
