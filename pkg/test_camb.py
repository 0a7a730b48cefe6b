"""
CAMB attention block properties.
"""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.interfaces.errors import ConfigError, ShapeError
from src.services.camb import (
    SPATIAL_KERNEL_SIZE,
    CambParams,
    camb_forward,
    channel_attention,
    init_camb_params,
    spatial_attention,
)
from src.tensor import Tensor

seeds = st.integers(min_value=0, max_value=2**32 - 1)
widths = st.sampled_from([4, 8, 16])


def random_block(seed, channels, size=(6, 5), low=0.01, high=5.0):
    rng = np.random.default_rng(seed)
    params = init_camb_params(channels, rng, p=3.0, reduction=4, dtype="float64")
    features = Tensor(rng.uniform(low, high, size=(*size, channels)))
    return features, params


@given(seeds, widths)
def test_output_shape_matches_input(seed, channels):
    features, params = random_block(seed, channels)
    assert camb_forward(features, params).shape == features.shape


@given(seeds, widths)
def test_attention_maps_lie_in_open_unit_interval(seed, channels):
    features, params = random_block(seed, channels)
    ca = channel_attention(features, params).data
    sa = spatial_attention(features, params).data
    assert ca.shape == (1, 1, channels)
    assert sa.shape == (6, 5, 1)
    assert np.all((ca > 0) & (ca < 1))
    assert np.all((sa > 0) & (sa < 1))


@given(seeds, widths)
def test_zero_features_map_to_zero(seed, channels):
    _, params = random_block(seed, channels)
    out = camb_forward(Tensor(np.zeros((4, 4, channels))), params).data
    np.testing.assert_array_equal(out, np.zeros((4, 4, channels)))


@given(seeds, widths)
def test_output_between_input_and_twice_input(seed, channels):
    features, params = random_block(seed, channels)
    out = camb_forward(features, params).data
    assert np.all(out >= features.data)
    assert np.all(out < 2 * features.data)


def test_batched_features_match_per_image_results():
    rng = np.random.default_rng(3)
    params = init_camb_params(8, rng)
    batch = rng.uniform(0, 1, size=(2, 4, 4, 8))
    together = camb_forward(Tensor(batch), params).data
    for i in range(2):
        np.testing.assert_allclose(together[i], camb_forward(Tensor(batch[i]), params).data, rtol=1e-12, atol=1e-12)


def test_channel_mismatch_is_rejected():
    params = init_camb_params(8, np.random.default_rng(0))
    with pytest.raises(ShapeError):
        camb_forward(Tensor(np.ones((4, 4, 4))), params)


def test_reduction_must_divide_channels():
    with pytest.raises(ConfigError):
        init_camb_params(6, np.random.default_rng(0), reduction=4)


def test_parameter_shapes_and_zero_biases():
    params = init_camb_params(16, np.random.default_rng(0), reduction=4)
    assert params.mlp_w1.shape == (16, 4)
    assert params.mlp_w2.shape == (4, 4)
    assert params.mlp_w3.shape == (4, 16)
    assert params.spatial_kernel.shape == (SPATIAL_KERNEL_SIZE, SPATIAL_KERNEL_SIZE, 1, 1)
    for bias in (params.mlp_b1, params.mlp_b2, params.mlp_b3, params.spatial_bias):
        assert not bias.data.any()
    count = sum(t.size for _, t in params.named_tensors())
    assert count == 16 * 4 + 4 + 4 * 4 + 4 + 4 * 16 + 16 + 49 + 1


def test_initialization_is_seeded():
    a = init_camb_params(8, np.random.default_rng(5))
    b = init_camb_params(8, np.random.default_rng(5))
    for (_, x), (_, y) in zip(a.named_tensors(), b.named_tensors()):
        np.testing.assert_array_equal(x.data, y.data)


def constant_block(channels, hidden, value=0.0, p=3.0, reduction=4):
    """Every weight and bias set to ``value``."""
    k = SPATIAL_KERNEL_SIZE

    def full(*shape):
        return Tensor(np.full(shape, value))

    return CambParams(
        mlp_w1=full(channels, hidden),
        mlp_b1=full(hidden),
        mlp_w2=full(hidden, hidden),
        mlp_b2=full(hidden),
        mlp_w3=full(hidden, channels),
        mlp_b3=full(channels),
        spatial_kernel=full(k, k, 1, 1),
        spatial_bias=full(1),
        p=p,
        reduction=reduction,
    )


def test_zero_parameters_give_half_attention(rng):
    params = constant_block(8, 2)
    features = Tensor(rng.uniform(0, 3, size=(5, 6, 8)))
    np.testing.assert_array_equal(channel_attention(features, params).data, np.full((1, 1, 8), 0.5))
    np.testing.assert_array_equal(spatial_attention(features, params).data, np.full((5, 6, 1), 0.5))


def test_single_channel_chain_closed_form():
    # p = 1 sums the 4 x 4 ones to 16; unit weights pass it through every layer
    params = constant_block(1, 1, value=1.0, p=1.0, reduction=1)
    params = replace(params, mlp_b1=Tensor(np.zeros(1)), mlp_b2=Tensor(np.zeros(1)), mlp_b3=Tensor(np.zeros(1)))
    out = channel_attention(Tensor(np.ones((4, 4, 1))), params).data
    assert out.shape == (1, 1, 1)
    assert out.item() == pytest.approx(1.0 / (1.0 + np.exp(-16.0)), abs=1e-15)
    assert out.item() == pytest.approx(0.9999999, abs=1e-7)


def test_single_tap_spatial_attention():
    kernel = np.zeros((SPATIAL_KERNEL_SIZE, SPATIAL_KERNEL_SIZE, 1, 1))
    kernel[SPATIAL_KERNEL_SIZE // 2, SPATIAL_KERNEL_SIZE // 2, 0, 0] = 1.0
    params = replace(constant_block(1, 1, reduction=1), spatial_kernel=Tensor(kernel))
    value = 0.7
    out = spatial_attention(Tensor(np.full((1, 1, 1), value)), params).data
    assert out.shape == (1, 1, 1)
    assert out.item() == pytest.approx(1.0 / (1.0 + np.exp(-value)), abs=1e-12)
