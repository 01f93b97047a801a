"""Shared fixtures: the heavy training runs are session-scoped so the unit
suite and the acceptance criteria reuse the same artifacts."""

import time
from dataclasses import replace

import numpy as np
import pytest

from sarberg.data import SampleSet, SynthConfig, split_train_validation, synth_dataset
from sarberg.nn import TrainConfig, build_autoencoder, build_classifier, fit, fit_autoencoder

BENCH_SEED = 42


@pytest.fixture(scope="session")
def bench_dataset():
    """The 1200-scene benchmark dataset (seed 42, balanced classes)."""
    return synth_dataset(
        SynthConfig(n_samples=1200, iceberg_fraction=0.5, seed=BENCH_SEED)
    )


@pytest.fixture(scope="session")
def bench_run(bench_dataset):
    """Reference CNN trained on the benchmark with a 4:1 split.

    Returns (net, history, val_set, wall_seconds).
    """
    train, val = split_train_validation(bench_dataset, 0.2, BENCH_SEED)
    cfg = TrainConfig(epochs=10, batch_size=32, seed=BENCH_SEED, dtype="float32")
    net = build_classifier(len(cfg.channels), BENCH_SEED, dtype=np.float32)
    start = time.monotonic()
    net, history = fit(net, train, val, cfg)
    elapsed = time.monotonic() - start
    return net, history, val, elapsed


@pytest.fixture(scope="session")
def ae_run():
    """Autoencoder pretrained for 30 epochs on 200 unlabeled synthetic scenes.

    Returns (ae, per-epoch reconstruction MSE).
    """
    labeled = synth_dataset(SynthConfig(n_samples=200, iceberg_fraction=0.5, seed=77))
    unlabeled = SampleSet(
        tuple(replace(s, label=None) for s in labeled), provenance="synthetic"
    )
    cfg = TrainConfig(epochs=30, batch_size=32, seed=77, dtype="float32")
    ae = build_autoencoder(len(cfg.channels), seed=77, dtype=np.float32)
    ae, losses = fit_autoencoder(ae, unlabeled, cfg)
    return ae, losses
