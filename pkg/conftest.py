"""
Shared fixtures for the test suite.
"""

import numpy as np
import pytest
from hypothesis import settings

from src.models.config import LossConfig, ModelConfig, SceneSpec
from src.providers.synthetic_scenes import synth_scene

settings.register_profile("camb", deadline=None, max_examples=100)
settings.load_profile("camb")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    """Two-stage float64 model small enough for finite differences."""
    return ModelConfig(stage_channels=(4, 8), reduction=4, dtype="float64")


@pytest.fixture
def loss_config():
    return LossConfig()


@pytest.fixture
def scene():
    return synth_scene(SceneSpec(seed=7, height=32, width=32, n_shapes=4))
