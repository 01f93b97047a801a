"""Radiometric normalization, derived bands, and the per-band statistics features.

Each sample yields 30 scalars: seven order/moment statistics for each of the
HH, HV, difference, and ratio bands, plus the incidence angle and a flag
marking angles that were imputed rather than measured.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import ImagePlane, SampleSet, SarSample

STAT_NAMES = ("min", "max", "mean", "median", "q1", "q3", "std")
BAND_NAMES = ("hh", "hv", "diff", "ratio")

FEATURE_NAMES: tuple[str, ...] = tuple(
    f"{band}_{stat}" for band in BAND_NAMES for stat in STAT_NAMES
) + ("inc_angle", "angle_missing")


@dataclass(frozen=True)
class BandStats:
    """Order and moment statistics of one band, dB-domain scalars."""

    min: float
    max: float
    mean: float
    median: float
    q1: float
    q3: float
    std: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.min, self.max, self.mean, self.median, self.q1, self.q3, self.std)


def normalize_incidence(p: ImagePlane, theta: float) -> ImagePlane:
    """Standardize backscatter to a 0-degree incidence angle.

    Adds -10*log10(cos theta) to every dB pixel (gamma-naught convention);
    the correction vanishes as theta approaches 0.
    """
    if not (0.0 < theta < 90.0):
        raise ValueError(f"incidence angle must lie in (0, 90), got {theta}")
    correction = -10.0 * math.log10(math.cos(math.radians(theta)))
    return ImagePlane(p.data + correction)


def derived_bands(s: SarSample) -> tuple[ImagePlane, ImagePlane]:
    """Per-pixel difference (dB) and linear-power ratio of the two bands.

    The dB difference already is the log-ratio, so the ratio band is computed
    in linear power (10^(v/10)) to add distinct information. Linear power is
    strictly positive, so the ratio is always finite.
    """
    diff = s.hh.data - s.hv.data
    ratio = np.power(10.0, s.hh.data / 10.0) / np.power(10.0, s.hv.data / 10.0)
    return ImagePlane(diff), ImagePlane(ratio)


def band_stats(p: ImagePlane) -> BandStats:
    """Seven summary statistics of a plane.

    Quantiles interpolate linearly on the sorted sample (quantile q at
    position q*(n-1)); std uses the sample (n-1) denominator, defined as 0
    for a single pixel.
    """
    values = p.data.ravel()
    q1, median, q3 = np.quantile(values, (0.25, 0.5, 0.75))
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return BandStats(
        min=float(values.min()),
        max=float(values.max()),
        mean=float(values.mean()),
        median=float(median),
        q1=float(q1),
        q3=float(q3),
        std=std,
    )


def feature_vector(s: SarSample, mean_angle: float) -> np.ndarray:
    """The 30 features of one sample, ordered as FEATURE_NAMES.

    The angle slot holds the sample's angle, or mean_angle when absent; the
    final slot flags angles that are imputed (either upstream or here).
    """
    diff, ratio = derived_bands(s)
    parts: list[float] = []
    for plane in (s.hh, s.hv, diff, ratio):
        parts.extend(band_stats(plane).as_tuple())
    missing = s.angle_imputed or s.inc_angle is None
    angle = s.inc_angle if s.inc_angle is not None else mean_angle
    parts.append(float(angle))
    parts.append(1.0 if missing else 0.0)
    return np.array(parts, dtype=np.float64)


def feature_matrix(
    sset: SampleSet, mean_angle: float
) -> tuple[list[str], np.ndarray, np.ndarray | None]:
    """Stack feature vectors for a whole set.

    Returns (ids, X, y); y is None when any sample is unlabeled.
    """
    ids = sset.ids()
    X = np.stack([feature_vector(s, mean_angle) for s in sset])
    labels = sset.labels()
    y = None
    if all(l is not None for l in labels):
        y = np.array(labels, dtype=np.float64)
    return ids, X, y


def correlation_matrix(
    vectors: Sequence[np.ndarray] | np.ndarray, fields: Sequence[int] | None = None
) -> np.ndarray:
    """Pearson correlation over the selected feature columns.

    Symmetric with a unit diagonal, entries clipped to [-1, 1]. A selected
    field with zero variance is an error naming the field.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need at least 2 feature vectors")
    if fields is not None:
        X = X[:, list(fields)]
    sd = X.std(axis=0, ddof=1)
    for j, s in enumerate(sd):
        if s == 0.0:
            col = list(fields)[j] if fields is not None else j
            name = FEATURE_NAMES[col] if col < len(FEATURE_NAMES) else str(col)
            raise ValueError(f"field {name!r} has zero variance")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (X.shape[0] - 1)
    corr = cov / np.outer(sd, sd)
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


# ---------------------------------------------------------------------------
# CSV export


def write_features_csv(
    path, ids: Sequence[str], X: np.ndarray, y: np.ndarray | None = None
) -> None:
    """Feature table with the fixed header; label column only when y given."""
    header = ["id", *FEATURE_NAMES] + (["label"] if y is not None else [])
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i, sample_id in enumerate(ids):
            row = [sample_id] + [repr(float(v)) for v in X[i]]
            if y is not None:
                row.append(str(int(y[i])))
            writer.writerow(row)


def write_correlation_csv(path, names: Sequence[str], corr: np.ndarray) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["field", *names])
        for name, row in zip(names, corr):
            writer.writerow([name] + [repr(float(v)) for v in row])
