"""
Synthetic scenes, flip augmentation, dataset directories and file formats.
"""

import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.interfaces.errors import CheckpointError, ConfigError, FormatError, ParameterError
from src.models.config import ModelConfig, SceneSpec
from src.models.sample import DepthSample
from src.models.training_state import AdamState
from src.providers.directory_dataset import DirectoryDepthSource
from src.providers.synthetic_scenes import SyntheticSceneSource, scene_rectangles, shade, synth_scene
from src.services.augmentation import augment_flip, flip_sample
from src.services.network import init_params
from src.services.trainer import params_from_checkpoint
from src.tensor import Tensor
from src.utils.checkpoint import (
    MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from src.utils.image_io import (
    decode_pfm,
    decode_ppm,
    encode_pfm,
    encode_ppm,
    read_pfm,
    read_ppm,
    write_pfm,
    write_ppm,
)

finite_floats = st.floats(-1e6, 1e6, width=32)


# 3 wide, 2 high; rows are stored bottom row first
PFM_ROWS = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]
PFM_LITTLE = b"Pf\n3 2\n-1.0\n" + struct.pack("<6f", 4.0, 5.0, 6.0, 1.0, 2.0, 3.0)
PFM_BIG = b"Pf\n3 2\n1.0\n" + struct.pack(">6f", 4.0, 5.0, 6.0, 1.0, 2.0, 3.0)


class TestPfm:
    @pytest.mark.parametrize("payload", [PFM_LITTLE, PFM_BIG], ids=["little", "big"])
    def test_decode_fixture(self, payload):
        depth = decode_pfm(payload)
        assert depth.dtype == np.float32
        np.testing.assert_array_equal(depth, PFM_ROWS)

    def test_encode_matches_fixture(self):
        rows = np.array(PFM_ROWS)
        assert encode_pfm(rows, little_endian=True) == PFM_LITTLE
        assert encode_pfm(rows, little_endian=False) == PFM_BIG

    @given(arrays(np.float32, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=finite_floats), st.booleans())
    def test_lossless_for_float32(self, depth, little_endian):
        np.testing.assert_array_equal(decode_pfm(encode_pfm(depth, little_endian)), depth)

    def test_files(self, tmp_path, rng):
        depth = rng.uniform(0.5, 10, size=(16, 16)).astype(np.float32)
        write_pfm(tmp_path / "d.pfm", depth[..., None])
        np.testing.assert_array_equal(read_pfm(tmp_path / "d.pfm").data, depth)

    @pytest.mark.parametrize(
        "payload,offset",
        [
            (b"PF\n3 2\n-1.0\n" + bytes(72), 0),
            (b"P6\n3 2\n-1.0\n", 0),
            (b"Pf\n3 x\n-1.0\n", 3),
            (b"Pf\n3 2\nscale\n", 7),
            (b"Pf\n3 2\n0\n" + bytes(24), 7),
            (PFM_LITTLE[:-4], len(PFM_LITTLE) - 4),
        ],
        ids=["color", "magic", "dims", "scale", "zero-scale", "truncated"],
    )
    def test_malformed_input_reports_offset(self, payload, offset):
        with pytest.raises(FormatError) as info:
            decode_pfm(payload)
        assert info.value.offset == offset


class TestPpm:
    def test_decode_with_comment(self):
        payload = b"P6\n# made by hand\n2 1\n255\n" + bytes([255, 0, 51, 0, 255, 102])
        image = decode_ppm(payload)
        assert image.shape == (1, 2, 3)
        np.testing.assert_allclose(image[0, 0], [1.0, 0.0, 0.2])
        np.testing.assert_allclose(image[0, 1], [0.0, 1.0, 0.4])

    @given(arrays(np.uint8, (3, 4, 3)))
    def test_lossless_at_eight_bits(self, raster):
        image = raster / 255.0
        np.testing.assert_array_equal(decode_ppm(encode_ppm(image)), image)

    def test_quantization_error_is_bounded(self, tmp_path, rng):
        image = rng.uniform(size=(8, 8, 3))
        write_ppm(tmp_path / "i.ppm", image)
        assert np.abs(read_ppm(tmp_path / "i.ppm").data - image).max() <= 0.5 / 255 + 1e-12

    def test_rejects_other_maxval(self):
        with pytest.raises(FormatError) as info:
            decode_ppm(b"P6\n1 1\n65535\n" + bytes(6))
        assert info.value.offset == 7

    def test_rejects_truncated_raster(self):
        with pytest.raises(FormatError):
            decode_ppm(b"P6\n2 2\n255\n" + bytes(5))


class TestCheckpoint:
    def test_round_trip_with_optimizer_state(self, tiny_config, tmp_path):
        params = init_params(tiny_config, seed=3)
        arrays_ = params.arrays()
        state = AdamState(
            m={n: np.full(a.shape, 0.5) for n, a in arrays_.items()},
            v={n: np.full(a.shape, 0.25) for n, a in arrays_.items()},
            step=7,
        )
        save_checkpoint(params, state, tmp_path / "m.ckpt")
        loaded = load_checkpoint(tmp_path / "m.ckpt")
        assert loaded.model == tiny_config
        assert loaded.parameter_names == params.names
        for name in params.names:
            np.testing.assert_array_equal(loaded.params[name], arrays_[name].astype(np.float32))
        assert loaded.adam_state.step == 7
        np.testing.assert_array_equal(loaded.adam_state.v["head.bias"], [0.25])

    def test_rebuilds_model_params(self, tmp_path):
        params = init_params(ModelConfig(stage_channels=(4, 8)), seed=1)
        save_checkpoint(params, None, tmp_path / "m.ckpt")
        checkpoint = load_checkpoint(tmp_path / "m.ckpt")
        assert checkpoint.adam_state is None
        rebuilt = params_from_checkpoint(checkpoint)
        assert rebuilt.names == params.names
        assert all(np.array_equal(rebuilt[n].data, params[n].data) for n in params.names)

    def test_parameter_mismatch(self):
        config = ModelConfig(stage_channels=(4, 8))
        arrays_ = init_params(config).arrays()
        arrays_.pop("head.bias")
        with pytest.raises(CheckpointError):
            params_from_checkpoint(decode_checkpoint(encode_checkpoint(config, arrays_)))

    def test_bad_magic_and_version(self, tiny_config):
        payload = encode_checkpoint(tiny_config, init_params(tiny_config).arrays())
        with pytest.raises(CheckpointError):
            decode_checkpoint(b"NOTACKPT" + payload[8:])
        with pytest.raises(CheckpointError) as info:
            decode_checkpoint(MAGIC + struct.pack("<I", 2) + payload[12:])
        assert "version" in str(info.value)

    def test_truncation_and_trailing_bytes(self, tiny_config):
        payload = encode_checkpoint(tiny_config, init_params(tiny_config).arrays())
        for cut in (4, 20, len(payload) // 2, len(payload) - 1):
            with pytest.raises(CheckpointError):
                decode_checkpoint(payload[:cut])
        with pytest.raises(CheckpointError):
            decode_checkpoint(payload + b"\0")

    def test_duplicate_names(self, tiny_config):
        payload = encode_checkpoint(tiny_config, {"aa": np.ones(2), "bb": np.ones(2)})
        with pytest.raises(CheckpointError):
            decode_checkpoint(payload.replace(b"bb", b"aa"))

    def test_error_is_an_io_class_error(self):
        assert CheckpointError("x").exit_class == "io"
        assert str(CheckpointError("bad", 12)) == "[checkpoint] bad (byte offset 12)"


class TestSyntheticScenes:
    def test_painter_oracle(self):
        spec = SceneSpec(seed=11, height=32, width=48, n_shapes=6, depth_max=10.0)
        sample = synth_scene(spec)
        expected = np.full((32, 48), 10.0)
        for rect in scene_rectangles(spec):
            for r in range(rect.top, rect.bottom):
                for c in range(rect.left, rect.right):
                    expected[r, c] = rect.depth
        np.testing.assert_array_equal(sample.depth.data, expected)

    def test_nearer_rectangles_are_painted_last(self):
        depths = [rect.depth for rect in scene_rectangles(SceneSpec(seed=5, n_shapes=8))]
        assert depths == sorted(depths, reverse=True)

    def test_shading_falls_with_depth(self):
        tint = np.ones(3)
        assert np.all(shade(1.0, 10.0, tint) > shade(9.0, 10.0, tint))
        np.testing.assert_allclose(shade(10.0, 10.0, tint), 0.2)

    def test_pixels_follow_their_region(self):
        spec = SceneSpec(seed=2, n_shapes=3)
        sample = synth_scene(spec)
        for rect in scene_rectangles(spec):
            covered = sample.depth.data[rect.top : rect.bottom, rect.left : rect.right] == rect.depth
            colour = shade(rect.depth, spec.depth_max, rect.tint)
            region = sample.image.data[rect.top : rect.bottom, rect.left : rect.right]
            np.testing.assert_allclose(region[covered], np.broadcast_to(colour, region[covered].shape))

    def test_value_ranges(self):
        for seed in range(20):
            sample = synth_scene(SceneSpec(seed=seed))
            assert sample.depth.data.min() > 1.0 - 1e-12
            assert sample.depth.data.max() <= 10.0
            assert 0.0 <= sample.image.data.min() and sample.image.data.max() <= 1.0

    def test_deterministic_and_seed_sensitive(self):
        a, b = synth_scene(SceneSpec(seed=3)), synth_scene(SceneSpec(seed=3))
        assert a.id == "scene_00000003"
        np.testing.assert_array_equal(a.image.data, b.image.data)
        assert not np.array_equal(a.depth.data, synth_scene(SceneSpec(seed=4)).depth.data)

    def test_uniform_scene_without_shapes(self):
        sample = synth_scene(SceneSpec(seed=0, n_shapes=0, depth_max=4.0))
        np.testing.assert_array_equal(sample.depth.data, np.full((32, 32), 4.0))

    def test_source_seeds_are_offsets(self):
        source = SyntheticSceneSource(SceneSpec(seed=100), 3)
        assert len(source) == 3
        assert source.ids == ["scene_00000100", "scene_00000101", "scene_00000102"]
        assert source.sample(2).id == "scene_00000102"
        with pytest.raises(IndexError):
            source.sample(3)

    def test_size_must_be_multiple_of_sixteen(self):
        with pytest.raises(ConfigError):
            SyntheticSceneSource(SceneSpec(height=24), 1)


class TestFlipAugmentation:
    def test_flip_rates(self):
        # distinct corner values identify which flips were applied
        corners = Tensor(np.arange(1.0, 17.0).reshape(4, 4))
        sample = DepthSample(image=Tensor(np.zeros((4, 4, 3))), depth=corners, id="grid")
        rng = np.random.default_rng(0)
        draws = 4000
        vertical = horizontal = 0
        for _ in range(draws):
            corner = augment_flip(sample, 0.3, 0.3, rng).depth.data[0, 0]
            vertical += corner in (13.0, 16.0)
            horizontal += corner in (4.0, 16.0)
        assert abs(vertical / draws - 0.3) < 0.04
        assert abs(horizontal / draws - 0.3) < 0.04

    def test_extreme_probabilities(self, scene):
        rng = np.random.default_rng(0)
        assert augment_flip(scene, 0.0, 0.0, rng) is scene
        both = augment_flip(scene, 1.0, 1.0, rng)
        np.testing.assert_array_equal(both.depth.data, scene.depth.data[::-1, ::-1])
        np.testing.assert_array_equal(both.image.data, scene.image.data[::-1, ::-1])

    def test_image_and_depth_move_together(self, scene):
        flipped = flip_sample(scene, vertical=False, horizontal=True)
        np.testing.assert_array_equal(flipped.image.data, scene.image.data[:, ::-1])
        np.testing.assert_array_equal(flipped.depth.data, scene.depth.data[:, ::-1])
        assert flipped.id == scene.id

    def test_invalid_probability(self, scene):
        with pytest.raises(ParameterError):
            augment_flip(scene, 1.5, 0.3, np.random.default_rng(0))


class TestDirectoryDataset:
    def _write(self, root, source):
        for sample in source:
            write_ppm(root / f"{sample.id}.ppm", sample.image)
            write_pfm(root / f"{sample.id}.pfm", sample.depth)

    def test_reads_pairs_in_sorted_order(self, tmp_path):
        source = SyntheticSceneSource(SceneSpec(seed=1), 3)
        self._write(tmp_path, source)
        dataset = DirectoryDepthSource(tmp_path)
        assert dataset.ids == source.ids
        sample = dataset.sample(1)
        np.testing.assert_array_equal(sample.depth.data, source.sample(1).depth.data.astype(np.float32))
        assert dataset.image(1).shape == (32, 32, 3)

    def test_manifest_order_wins(self, tmp_path):
        source = SyntheticSceneSource(SceneSpec(seed=1), 2)
        self._write(tmp_path, source)
        (tmp_path / "manifest.json").write_text(json.dumps({"ids": list(reversed(source.ids))}))
        assert DirectoryDepthSource(tmp_path).ids == list(reversed(source.ids))

    def test_missing_or_empty_root(self, tmp_path):
        with pytest.raises(ConfigError):
            DirectoryDepthSource(tmp_path / "absent")
        with pytest.raises(ConfigError):
            DirectoryDepthSource(tmp_path)

    def test_broken_manifest(self, tmp_path):
        (tmp_path / "manifest.json").write_text("{not json")
        with pytest.raises(FormatError):
            DirectoryDepthSource(tmp_path)
