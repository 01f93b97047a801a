"""Deterministic image transforms and the stochastic augmentation policy.

All transforms preserve the plane's dimensions and use edge replication for
pixels that fall outside the source support: SAR backgrounds are noise, and a
zero fill would paint a fake bright/dark frame into every derived statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import ImagePlane, SampleSet, SarSample

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()
LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class AugmentationPolicy:
    """Ranges for the random per-sample transform draw."""

    width_shift_frac: float = 0.1
    height_shift_frac: float = 0.1
    rotation_max_deg: float = 15.0
    allow_horizontal_reflect: bool = True
    allow_vertical_reflect: bool = True

    def __post_init__(self):
        if not (0.0 <= self.width_shift_frac < 0.5):
            raise ValueError("width_shift_frac must lie in [0, 0.5)")
        if not (0.0 <= self.height_shift_frac < 0.5):
            raise ValueError("height_shift_frac must lie in [0, 0.5)")
        if not (0.0 <= self.rotation_max_deg <= 180.0):
            raise ValueError("rotation_max_deg must lie in [0, 180]")


def rotate(p: ImagePlane, degrees: float) -> ImagePlane:
    """Rotate counterclockwise about the image center.

    Exact multiples of 90 degrees are index permutations (bitwise exact, on
    square planes for 90/270); anything else is bilinear interpolation with
    source coordinates clamped to the image (edge replication).
    """
    if not math.isfinite(degrees):
        raise ValueError(f"rotation angle must be finite, got {degrees}")
    arr = p.data
    rem = degrees % 360.0
    if rem == 0.0:
        return ImagePlane(arr)
    if rem in (90.0, 180.0, 270.0) and (rem == 180.0 or arr.shape[0] == arr.shape[1]):
        return ImagePlane(np.rot90(arr, k=int(rem // 90)))

    h, w = arr.shape
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    theta = math.radians(degrees)
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    out_r, out_c = np.mgrid[0:h, 0:w].astype(np.float64)
    dy = out_r - cy
    dx = out_c - cx
    # Inverse map: rotate output coordinates by -theta back into the source.
    src_r = dy * cos_t + dx * sin_t + cy
    src_c = -dy * sin_t + dx * cos_t + cx

    src_r = np.clip(src_r, 0.0, h - 1.0)
    src_c = np.clip(src_c, 0.0, w - 1.0)
    r0 = np.floor(src_r).astype(np.intp)
    c0 = np.floor(src_c).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = src_r - r0
    fc = src_c - c0
    top = arr[r0, c0] * (1.0 - fc) + arr[r0, c1] * fc
    bot = arr[r1, c0] * (1.0 - fc) + arr[r1, c1] * fc
    return ImagePlane(top * (1.0 - fr) + bot * fr)


def reflect(p: ImagePlane, axis: str) -> ImagePlane:
    """Mirror the plane: 'horizontal' reverses columns, 'vertical' rows."""
    if axis == "horizontal":
        return ImagePlane(p.data[:, ::-1])
    if axis == "vertical":
        return ImagePlane(p.data[::-1, :])
    raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def shift(p: ImagePlane, dx: int, dy: int) -> ImagePlane:
    """Translate by whole pixels (dx right, dy down), edge-replicating vacated cells."""
    if int(dx) != dx or int(dy) != dy:
        raise ValueError("shift offsets must be integers")
    dx, dy = int(dx), int(dy)
    h, w = p.data.shape
    if abs(dx) >= w or abs(dy) >= h:
        raise ValueError(f"shift ({dx}, {dy}) out of range for {h}x{w} plane")
    src_r = np.clip(np.arange(h) - dy, 0, h - 1)
    src_c = np.clip(np.arange(w) - dx, 0, w - 1)
    return ImagePlane(p.data[np.ix_(src_r, src_c)])


def _correlate2d(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """2-D correlation with edge-replicate padding, output same size."""
    kh, kw = kernel.shape
    ry, rx = kh // 2, kw // 2
    padded = np.pad(arr, ((ry, ry), (rx, rx)), mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw))
    return np.einsum("ijkl,kl->ij", windows, kernel)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized Gaussian taps at integer offsets, radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def gaussian_smooth(p: ImagePlane, sigma: float) -> ImagePlane:
    """Separable Gaussian blur with edge-replicate padding."""
    k = gaussian_kernel_1d(sigma)
    radius = (len(k) - 1) // 2
    arr = np.pad(p.data, ((radius, radius), (0, 0)), mode="edge")
    cols = np.lib.stride_tricks.sliding_window_view(arr, len(k), axis=0)
    arr = cols @ k
    arr = np.pad(arr, ((0, 0), (radius, radius)), mode="edge")
    rows = np.lib.stride_tricks.sliding_window_view(arr, len(k), axis=1)
    return ImagePlane(rows @ k)


def sobel(p: ImagePlane, axis: str) -> ImagePlane:
    """3x3 Sobel derivative estimate along 'x' (columns) or 'y' (rows)."""
    if axis == "x":
        return ImagePlane(_correlate2d(p.data, SOBEL_X))
    if axis == "y":
        return ImagePlane(_correlate2d(p.data, SOBEL_Y))
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")


def gradient_magnitude(p: ImagePlane) -> ImagePlane:
    gx = _correlate2d(p.data, SOBEL_X)
    gy = _correlate2d(p.data, SOBEL_Y)
    return ImagePlane(np.sqrt(gx**2 + gy**2))


def laplacian(p: ImagePlane) -> ImagePlane:
    return ImagePlane(_correlate2d(p.data, LAPLACIAN))


# ---------------------------------------------------------------------------
# Stochastic augmentation


def _draw_transform(policy: AugmentationPolicy, shape, rng: np.random.Generator):
    h, w = shape
    max_dx = int(math.floor(policy.width_shift_frac * w))
    max_dy = int(math.floor(policy.height_shift_frac * h))
    dx = int(rng.integers(-max_dx, max_dx + 1)) if max_dx else 0
    dy = int(rng.integers(-max_dy, max_dy + 1)) if max_dy else 0
    angle = (
        float(rng.uniform(-policy.rotation_max_deg, policy.rotation_max_deg))
        if policy.rotation_max_deg > 0
        else 0.0
    )
    flip_h = policy.allow_horizontal_reflect and rng.random() < 0.5
    flip_v = policy.allow_vertical_reflect and rng.random() < 0.5
    return dx, dy, angle, flip_h, flip_v


def _apply_transform(p: ImagePlane, dx, dy, angle, flip_h, flip_v) -> ImagePlane:
    if angle != 0.0:
        p = rotate(p, angle)
    if dx or dy:
        p = shift(p, dx, dy)
    if flip_h:
        p = reflect(p, "horizontal")
    if flip_v:
        p = reflect(p, "vertical")
    return p


def sample_augmentation(
    s: SarSample,
    policy: AugmentationPolicy,
    rng: np.random.Generator,
    id_suffix: str = "#aug",
) -> SarSample:
    """Draw one geometric transform and apply it identically to both bands.

    Label, incidence angle, and imputation flag are preserved; the id gets a
    suffix so augmented variants stay unique within a set. Deterministic for
    a generator in a fixed state.
    """
    dx, dy, angle, flip_h, flip_v = _draw_transform(policy, s.hh.shape, rng)
    return replace(
        s,
        id=s.id + id_suffix,
        hh=_apply_transform(s.hh, dx, dy, angle, flip_h, flip_v),
        hv=_apply_transform(s.hv, dx, dy, angle, flip_h, flip_v),
    )


def augment_dataset(
    sset: SampleSet, policy: AugmentationPolicy, multiplier: int, seed: int
) -> SampleSet:
    """Each original sample plus (multiplier - 1) augmented variants.

    multiplier 1 returns the input set unchanged. Per-sample substreams are
    spawned from the seed, so the output is deterministic and independent of
    processing order.
    """
    if multiplier < 1:
        raise ValueError("multiplier must be >= 1")
    if multiplier == 1:
        return sset
    children = np.random.SeedSequence(seed).spawn(len(sset))
    out = []
    for s, child in zip(sset, children):
        out.append(s)
        rng = np.random.default_rng(child)
        for j in range(multiplier - 1):
            out.append(sample_augmentation(s, policy, rng, id_suffix=f"#aug{j}"))
    return SampleSet(tuple(out), provenance="augmented")


# ---------------------------------------------------------------------------
# Debug output


def write_pgm(p: ImagePlane, path) -> None:
    """Dump a plane as binary 8-bit PGM with linear min-max scaling."""
    arr = p.data
    lo = float(arr.min())
    hi = float(arr.max())
    if hi > lo:
        scaled = np.round((arr - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        scaled = np.zeros(arr.shape, dtype=np.uint8)
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(scaled.tobytes())
