"""Domain types, Kaggle-format ingestion, splitting, and a synthetic scene generator.

A scene is a pair of 75x75 backscatter planes (HH and HV polarization, in dB)
with an incidence angle and, for training data, an iceberg/ship label. The
synthetic generator produces desk-scale datasets with the same physics cues the
real data carries: icebergs are large, roughly isotropic blobs whose HV return
sits close to HH (volume scattering); ships are elongated and strongly
cross-pol suppressed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

KAGGLE_BAND_PIXELS = 5625  # 75 x 75
SCENE_SIDE = 75

PROVENANCES = ("real", "synthetic", "augmented")

# Ocean clutter in cross-pol sits well below co-pol. The gap varies a little
# per scene, so scene-wide HH-HV averages are a noisy class cue and learners
# must also read the local target structure.
BACKGROUND_HH_DB = -22.0
BACKGROUND_CROSSPOL_GAP_DB = 8.0
BACKGROUND_GAP_JITTER_DB = 0.5


class ImagePlane:
    """A single-band backscatter image, row-major float64 dB values.

    Immutable: the wrapped array is copied on construction and marked
    read-only. Planes must be at least 3x3 and contain only finite values.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"image plane must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 3 or arr.shape[1] < 3:
            raise ValueError(f"image plane must be at least 3x3, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image plane contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("ImagePlane is immutable")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImagePlane):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(
            np.array_equal(self.data, other.data)
        )

    def __hash__(self):
        return hash((self.data.shape, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"ImagePlane({self.height}x{self.width})"


@dataclass(frozen=True)
class SarSample:
    """One scene: two co-registered polarization planes plus metadata.

    label: 0 = ship, 1 = iceberg, None = unlabeled.
    inc_angle: incidence angle in degrees, None when missing from the source.
    angle_imputed: True when inc_angle was filled in by `impute_incidence`.
    """

    id: str
    hh: ImagePlane
    hv: ImagePlane
    inc_angle: float | None = None
    angle_imputed: bool = False
    label: int | None = None

    def __post_init__(self):
        if self.hh.shape != self.hv.shape:
            raise ValueError(
                f"sample {self.id!r}: hh {self.hh.shape} and hv {self.hv.shape} "
                "dimensions differ"
            )
        if self.inc_angle is not None and not (0.0 < self.inc_angle < 90.0):
            raise ValueError(
                f"sample {self.id!r}: inc_angle {self.inc_angle} outside (0, 90)"
            )
        if self.label is not None and self.label not in (0, 1):
            raise ValueError(f"sample {self.id!r}: label must be 0 or 1")


@dataclass(frozen=True)
class SampleSet:
    """An ordered collection of samples with unique ids."""

    samples: tuple[SarSample, ...]
    provenance: str = "real"

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        seen = set()
        for s in self.samples:
            if s.id in seen:
                raise ValueError(f"duplicate sample id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[SarSample]:
        return iter(self.samples)

    def __getitem__(self, i) -> SarSample:
        return self.samples[i]

    def ids(self) -> list[str]:
        return [s.id for s in self.samples]

    def labels(self) -> list[int | None]:
        return [s.label for s in self.samples]


@dataclass(frozen=True)
class SynthConfig:
    """Configuration for the synthetic scene generator."""

    n_samples: int
    iceberg_fraction: float = 0.5
    speckle_looks: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if not (0.0 < self.iceberg_fraction < 1.0):
            raise ValueError("iceberg_fraction must lie strictly in (0, 1)")
        if int(self.speckle_looks) != self.speckle_looks or self.speckle_looks < 1:
            raise ValueError("speckle_looks must be a positive integer")


# ---------------------------------------------------------------------------
# Ingestion


def _record_error(index: int, rec_id, msg: str) -> ValueError:
    ident = f" (id {rec_id!r})" if rec_id is not None else ""
    return ValueError(f"record {index}{ident}: {msg}")


def _parse_band(raw_band, index: int, rec_id, name: str) -> ImagePlane:
    if not isinstance(raw_band, list):
        raise _record_error(index, rec_id, f"{name} must be a list of numbers")
    if len(raw_band) != KAGGLE_BAND_PIXELS:
        raise _record_error(
            index, rec_id,
            f"{name} has {len(raw_band)} values, expected {KAGGLE_BAND_PIXELS}",
        )
    arr = np.asarray(raw_band, dtype=np.float64).reshape(SCENE_SIDE, SCENE_SIDE)
    if not np.all(np.isfinite(arr)):
        raise _record_error(index, rec_id, f"{name} contains non-finite values")
    return ImagePlane(arr)


def parse_samples(raw: bytes | str, labeled: bool) -> SampleSet:
    """Parse the competition JSON layout into a SampleSet.

    Records carry id, band_1 (HH), band_2 (HV), inc_angle (number or "na"),
    and is_iceberg when `labeled`. Bands are 5625 values read row-major into
    75x75 planes.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        records = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ValueError(f"malformed JSON: {e}") from e
    if not isinstance(records, list):
        raise ValueError("top-level JSON value must be an array of records")

    samples = []
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise _record_error(i, None, "record is not a JSON object")
        rec_id = rec.get("id")
        if not isinstance(rec_id, str):
            raise _record_error(i, rec_id, "missing or non-string id")
        for key in ("band_1", "band_2", "inc_angle"):
            if key not in rec:
                raise _record_error(i, rec_id, f"missing field {key!r}")
        hh = _parse_band(rec["band_1"], i, rec_id, "band_1")
        hv = _parse_band(rec["band_2"], i, rec_id, "band_2")

        raw_angle = rec["inc_angle"]
        if raw_angle == "na":
            angle = None
        elif isinstance(raw_angle, (int, float)) and not isinstance(raw_angle, bool):
            angle = float(raw_angle)
        else:
            raise _record_error(
                i, rec_id, f"inc_angle must be a number or \"na\", got {raw_angle!r}"
            )

        label = None
        if labeled:
            if "is_iceberg" not in rec:
                raise _record_error(i, rec_id, "missing field 'is_iceberg'")
            raw_label = rec["is_iceberg"]
            if raw_label not in (0, 1) or isinstance(raw_label, bool):
                raise _record_error(
                    i, rec_id, f"is_iceberg must be 0 or 1, got {raw_label!r}"
                )
            label = int(raw_label)

        samples.append(
            SarSample(id=rec_id, hh=hh, hv=hv, inc_angle=angle, label=label)
        )
    return SampleSet(samples=tuple(samples), provenance="real")


def serialize_samples(sset: SampleSet) -> str:
    """Serialize a SampleSet back to the competition JSON layout.

    Missing angles become the string "na"; is_iceberg is emitted only for
    labeled samples. parse(serialize(s)) reproduces s field-by-field (up to
    provenance and imputation flags, which the wire format does not carry).
    """
    records = []
    for s in sset:
        rec = {
            "id": s.id,
            "band_1": s.hh.data.ravel().tolist(),
            "band_2": s.hv.data.ravel().tolist(),
            "inc_angle": "na" if s.inc_angle is None else s.inc_angle,
        }
        if s.label is not None:
            rec["is_iceberg"] = s.label
        records.append(rec)
    return json.dumps(records, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Splitting and imputation


def split_train_validation(
    sset: SampleSet, ratio_val: float, seed: int
) -> tuple[SampleSet, SampleSet]:
    """Stratified train/validation split.

    The validation set receives round(ratio_val * N) samples with per-class
    counts within one sample of exact proportion (largest-remainder
    apportionment). Deterministic for a fixed seed; outputs preserve the
    input ordering and partition the input.
    """
    if not (0.0 < ratio_val < 1.0):
        raise ValueError("ratio_val must lie strictly in (0, 1)")
    for s in sset:
        if s.label is None:
            raise ValueError(f"sample {s.id!r} is unlabeled; cannot stratify")

    by_class: dict[int, list[int]] = {0: [], 1: []}
    for i, s in enumerate(sset):
        by_class[s.label].append(i)
    for cls, idxs in by_class.items():
        if not idxs:
            raise ValueError(f"class {cls} has no members")

    n_val_total = int(round(ratio_val * len(sset)))
    exact = {c: ratio_val * len(idxs) for c, idxs in by_class.items()}
    take = {c: int(math.floor(x)) for c, x in exact.items()}
    leftover = n_val_total - sum(take.values())
    # Distribute remaining slots by largest fractional part, class id breaking ties.
    order = sorted(by_class, key=lambda c: (-(exact[c] - take[c]), c))
    for c in order[: max(leftover, 0)]:
        take[c] += 1

    rng = np.random.default_rng(seed)
    val_indices: set[int] = set()
    for c in sorted(by_class):
        idxs = np.array(by_class[c])
        rng.shuffle(idxs)
        val_indices.update(idxs[: take[c]].tolist())

    train = [s for i, s in enumerate(sset) if i not in val_indices]
    val = [s for i, s in enumerate(sset) if i in val_indices]
    return (
        SampleSet(tuple(train), provenance=sset.provenance),
        SampleSet(tuple(val), provenance=sset.provenance),
    )


def impute_incidence(sset: SampleSet) -> tuple[SampleSet, float]:
    """Replace missing incidence angles by the mean of the present ones.

    Returns the imputed set and the mean angle, so the same fill value can be
    reused on test data. Samples that were filled get angle_imputed=True.
    """
    present = [s.inc_angle for s in sset if s.inc_angle is not None]
    if not present:
        raise ValueError("cannot impute: every sample is missing inc_angle")
    mean_angle = float(np.mean(present))
    out = []
    for s in sset:
        if s.inc_angle is None:
            out.append(replace(s, inc_angle=mean_angle, angle_imputed=True))
        else:
            out.append(s)
    return SampleSet(tuple(out), provenance=sset.provenance), mean_angle


# ---------------------------------------------------------------------------
# Synthetic scenes


@dataclass(frozen=True)
class Scene:
    """One rendered synthetic scene plus its generator-side ground truth."""

    hh: ImagePlane
    hv: ImagePlane
    inc_angle: float
    label: int
    target_mask: np.ndarray = field(repr=False)  # bool, True on the target body


def _db_to_power(db):
    return np.power(10.0, np.asarray(db) / 10.0)


def _power_to_db(power):
    return 10.0 * np.log10(power)


def _blob(dy, dx, radius):
    return np.exp(-(((dy**2 + dx**2) / radius**2) ** 2))


def render_scene(rng: np.random.Generator, iceberg: bool, looks: int) -> Scene:
    """Render one scene in linear power, then convert to dB.

    Icebergs: wide super-Gaussian blob, HV within a few dB of HH.
    Ships: elongated (axis ratio >= 3) rotated blob, HV >= 6 dB below HH.
    A few clutter blobs (sea-state bright spots, background-like cross-pol
    gap) and a wide target-brightness range keep the task from collapsing to
    a single local cue. Multiplicative speckle is mean-1 gamma noise with
    shape `looks`; both bands dim with the cosine of the incidence angle.
    """
    side = SCENE_SIDE
    rows, cols = np.mgrid[0:side, 0:side].astype(np.float64)
    cy = rng.uniform(14.0, side - 15.0)
    cx = rng.uniform(14.0, side - 15.0)
    dy = rows - cy
    dx = cols - cx

    if iceberg:
        radius = rng.uniform(9.0, 13.0)
        envelope = _blob(dy, dx, radius)
        crosspol_gap_db = rng.uniform(0.5, 3.0)
    else:
        half_len = rng.uniform(6.0, 9.5)
        half_wid = half_len / rng.uniform(3.2, 4.5)
        phi = rng.uniform(0.0, np.pi)
        u = dy * np.cos(phi) + dx * np.sin(phi)
        v = -dy * np.sin(phi) + dx * np.cos(phi)
        envelope = np.exp(-(((u / half_len) ** 2 + (v / half_wid) ** 2) ** 2))
        crosspol_gap_db = rng.uniform(7.0, 12.0)

    bg_hh = _db_to_power(BACKGROUND_HH_DB + rng.uniform(-1.0, 1.0))
    bg_gap = BACKGROUND_CROSSPOL_GAP_DB + rng.uniform(
        -BACKGROUND_GAP_JITTER_DB, BACKGROUND_GAP_JITTER_DB
    )
    bg_hv = bg_hh * _db_to_power(-bg_gap)
    peak_hh = _db_to_power(rng.uniform(-12.0, -3.0))
    peak_hv = peak_hh * _db_to_power(-crosspol_gap_db)

    power_hh = bg_hh + envelope * peak_hh
    power_hv = bg_hv + envelope * peak_hv

    for _ in range(int(rng.poisson(2.0))):
        ky = rng.uniform(4.0, side - 5.0)
        kx = rng.uniform(4.0, side - 5.0)
        clutter = _blob(rows - ky, cols - kx, rng.uniform(1.5, 3.5))
        clutter_peak = _db_to_power(rng.uniform(-17.0, -9.0))
        power_hh = power_hh + clutter * clutter_peak
        power_hv = power_hv + clutter * clutter_peak * _db_to_power(-bg_gap)

    inc_angle = rng.uniform(20.0, 45.0)
    angle_factor = np.cos(np.deg2rad(inc_angle))
    power_hh = power_hh * angle_factor
    power_hv = power_hv * angle_factor

    speckle_hh = rng.gamma(shape=looks, scale=1.0 / looks, size=(side, side))
    speckle_hv = rng.gamma(shape=looks, scale=1.0 / looks, size=(side, side))
    power_hh = np.maximum(power_hh * speckle_hh, 1e-30)
    power_hv = np.maximum(power_hv * speckle_hv, 1e-30)

    return Scene(
        hh=ImagePlane(_power_to_db(power_hh)),
        hv=ImagePlane(_power_to_db(power_hv)),
        inc_angle=float(inc_angle),
        label=1 if iceberg else 0,
        target_mask=envelope >= 0.5,
    )


def synth_dataset(cfg: SynthConfig) -> SampleSet:
    """Generate a labeled synthetic SampleSet, deterministic per cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    n_ice = int(round(cfg.iceberg_fraction * cfg.n_samples))
    labels = np.zeros(cfg.n_samples, dtype=np.int64)
    labels[:n_ice] = 1
    rng.shuffle(labels)

    width = max(6, len(str(cfg.n_samples)))
    samples = []
    for i, label in enumerate(labels):
        scene = render_scene(rng, iceberg=bool(label), looks=int(cfg.speckle_looks))
        samples.append(
            SarSample(
                id=f"synth_{i:0{width}d}",
                hh=scene.hh,
                hv=scene.hv,
                inc_angle=scene.inc_angle,
                label=scene.label,
            )
        )
    return SampleSet(tuple(samples), provenance="synthetic")
