import numpy as np
import pytest

from roomprint.dsp import FrameConfig
from roomprint.gmm import extract_training_features, train_speech_model
from roomprint.synth import synth_speech

DESK_MIXTURES = 64
DESK_CORPUS_MINUTES = 30


@pytest.fixture(scope="session")
def frame_config():
    return FrameConfig()


@pytest.fixture(scope="session")
def tiny_model(frame_config):
    """Small, fast speech model for exactness and plumbing tests."""
    buffers = [synth_speech(30.0, seed=900 + i) for i in range(4)]
    cepstra, spectra = extract_training_features(buffers, frame_config)
    return train_speech_model(cepstra, spectra, 4, seed=3, frame_config=frame_config)


@pytest.fixture(scope="session")
def desk_model(frame_config):
    """Desk-scale model: 64 mixtures on 30 minutes of synthetic dry speech."""
    buffers = (synth_speech(60.0, seed=100 + i) for i in range(DESK_CORPUS_MINUTES))
    cepstra, spectra = extract_training_features(buffers, frame_config)
    assert cepstra.values.shape[0] >= 10 * DESK_MIXTURES
    return train_speech_model(
        cepstra, spectra, DESK_MIXTURES, seed=7, frame_config=frame_config
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240901)
