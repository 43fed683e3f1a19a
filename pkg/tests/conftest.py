"""Shared fixtures: a tiny on-disk synthetic dataset and pose helpers."""

import numpy as np
import pytest

from poselang import core, pipeline, synth


def make_sequence(rng, n_frames=24, jitter=5.0, frame_rate=24.0,
                  source_id="seq"):
    """A valid random pose sequence wobbling around the rest pose."""
    xy = np.tile(synth.REST_POSE, (n_frames, 1, 1))
    xy = xy + rng.normal(0.0, jitter, size=xy.shape)
    ones = np.ones((n_frames, core.N_JOINTS))
    return core.PoseSequence(xy=xy, confidence=ones,
                             valid=ones.astype(bool),
                             frame_rate=frame_rate, source_id=source_id)


@pytest.fixture(scope="session")
def config():
    return core.PipelineConfig()


@pytest.fixture(scope="session")
def tiny_root(tmp_path_factory, config):
    """A 4-clips-per-split noiseless dataset written in the ingest formats."""
    root = tmp_path_factory.mktemp("tiny_dataset")
    spec = synth.ScenarioSpec(clips_per_split=4, noise_std=0.0,
                              dropout_rate=0.0)
    synth.generate_dataset(spec, root, config)
    return root


@pytest.fixture(scope="session")
def tiny_ds(tiny_root, config):
    return pipeline.load_dataset(tiny_root / "manifest.csv", config)
