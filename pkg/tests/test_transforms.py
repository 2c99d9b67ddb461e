import numpy as np
import pytest

from ecgssl.errors import ParameterError
from ecgssl.signal import synth_ecg
from ecgssl.transforms import (
    PretextSample,
    TransformId,
    TransformParams,
    add_noise,
    apply_transform,
    build_pretext_dataset,
    hflip,
    negate,
    permute,
    scale,
    time_warp,
)


@pytest.fixture(scope="module")
def ecg_segment():
    return synth_ecg(72.0, 256.0, 10.0, seed=5)


class TestAddNoise:
    def test_deterministic(self, ecg_segment):
        a = add_noise(ecg_segment, 0.1, seed=3)
        b = add_noise(ecg_segment, 0.1, seed=3)
        np.testing.assert_array_equal(a, b)

    def test_noise_std(self):
        rng = np.random.default_rng(0)
        seg = rng.normal(size=2560)
        seg /= seg.std()
        noise = add_noise(seg, 0.1, seed=1) - seg
        assert 0.08 <= noise.std() <= 0.12

    def test_noise_mean(self):
        seg = np.random.default_rng(0).normal(size=2560)
        seg /= seg.std()
        noise = add_noise(seg, 0.1, seed=1) - seg
        assert -0.01 <= noise.mean() <= 0.01

    def test_zero_variance_fallback(self):
        out = add_noise(np.zeros(2560), 0.1, seed=2)
        assert 0.05 <= out.std() <= 0.15

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ParameterError):
            add_noise(np.zeros(16), 0.0, seed=0)


class TestScale:
    def test_direct(self):
        np.testing.assert_allclose(scale(np.array([1.0, -0.5, 2.0]), 1.2),
                                   [1.2, -0.6, 2.4])

    def test_identity_factor(self):
        x = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(scale(x, 1.0), x)

    def test_preserves_argmax(self, ecg_segment):
        for factor in (0.8, 1.2, 3.7):
            assert np.argmax(np.abs(scale(ecg_segment, factor))) == np.argmax(np.abs(ecg_segment))

    def test_preserves_sign_pattern(self, ecg_segment):
        np.testing.assert_array_equal(np.sign(scale(ecg_segment, 1.2)), np.sign(ecg_segment))


class TestNegateHflip:
    def test_negate_values(self):
        np.testing.assert_array_equal(negate(np.array([1.0, -2.0, 3.0])), [-1.0, 2.0, -3.0])

    def test_negate_involution(self, ecg_segment):
        np.testing.assert_array_equal(negate(negate(ecg_segment)), ecg_segment)

    def test_negate_zero_fixed_point(self):
        np.testing.assert_array_equal(negate(np.zeros(8)), np.zeros(8))

    def test_hflip_values(self):
        np.testing.assert_array_equal(hflip(np.array([1.0, 2.0, 3.0, 4.0])), [4.0, 3.0, 2.0, 1.0])

    def test_hflip_involution(self, ecg_segment):
        np.testing.assert_array_equal(hflip(hflip(ecg_segment)), ecg_segment)

    def test_hflip_palindrome_fixed_point(self):
        x = np.array([1.0, 2.0, 3.0, 2.0, 1.0])
        np.testing.assert_array_equal(hflip(x), x)

    def test_negate_hflip_commute(self, ecg_segment):
        np.testing.assert_array_equal(negate(hflip(ecg_segment)), hflip(negate(ecg_segment)))


class TestPermute:
    def test_two_blocks_forced_swap(self):
        np.testing.assert_array_equal(permute(np.array([1.0, 2.0, 3.0, 4.0]), 2, seed=0),
                                      [3.0, 4.0, 1.0, 2.0])

    def test_multiset_preserved(self, ecg_segment):
        for seed in range(10):
            out = permute(ecg_segment, 10, seed=seed)
            np.testing.assert_array_equal(np.sort(out), np.sort(ecg_segment))

    def test_never_identity(self, ecg_segment):
        for seed in range(25):
            assert not np.array_equal(permute(ecg_segment, 10, seed=seed), ecg_segment)

    def test_rejects_non_divisible(self):
        with pytest.raises(ParameterError):
            permute(np.zeros(10), 3, seed=0)


class TestTimeWarp:
    def test_length_preserved(self, ecg_segment):
        for seed in range(5):
            assert time_warp(ecg_segment, 4, 1.25, seed=seed).size == ecg_segment.size

    def test_constant_preserved(self):
        out = time_warp(np.full(2560, 2.5), 4, 1.25, seed=1)
        np.testing.assert_allclose(out, 2.5, atol=1e-6)

    def test_monotone_ramp_stays_monotone(self):
        ramp = np.linspace(0.0, 1.0, 2560)
        out = time_warp(ramp, 4, 1.25, seed=3)
        assert np.all(np.diff(out) >= -1e-6)

    def test_rejects_odd_pieces(self):
        with pytest.raises(ParameterError):
            time_warp(np.zeros(2560), 5, 1.25, seed=0)

    def test_rejects_small_stretch(self):
        with pytest.raises(ParameterError):
            time_warp(np.zeros(2560), 4, 0.9, seed=0)


class TestBuildDataset:
    def test_cardinality_and_balance(self, ecg_segment):
        segs = [ecg_segment + i for i in range(10)]
        samples = build_pretext_dataset(segs, TransformParams(rng_seed=1))
        assert len(samples) == 70
        counts = np.bincount([int(s.task) for s in samples], minlength=7)
        np.testing.assert_array_equal(counts, np.full(7, 10))

    def test_original_bit_equal(self, ecg_segment):
        samples = build_pretext_dataset([ecg_segment], TransformParams(rng_seed=1))
        originals = [s for s in samples if s.task == TransformId.ORIGINAL]
        assert len(originals) == 1
        np.testing.assert_array_equal(originals[0].segment, ecg_segment)

    def test_deterministic(self, ecg_segment):
        segs = [ecg_segment, hflip(ecg_segment)]
        a = build_pretext_dataset(segs, TransformParams(rng_seed=9))
        b = build_pretext_dataset(segs, TransformParams(rng_seed=9))
        for sa, sb in zip(a, b):
            assert sa.task == sb.task
            np.testing.assert_array_equal(sa.segment, sb.segment)

    def test_transforms_differ_from_original(self, ecg_segment):
        params = TransformParams(rng_seed=2)
        samples = build_pretext_dataset([ecg_segment], params)
        for s in samples:
            if s.task != TransformId.ORIGINAL:
                assert not np.array_equal(s.segment, ecg_segment)

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            build_pretext_dataset([], TransformParams())


class TestParams:
    def test_validation(self):
        with pytest.raises(ParameterError):
            TransformParams(scale_factor=1.0)
        with pytest.raises(ParameterError):
            TransformParams(warp_pieces=3)
        with pytest.raises(ParameterError):
            TransformParams(noise_sigma_rel=-0.1)

    def test_apply_transform_covers_all_ids(self, ecg_segment):
        params = TransformParams(rng_seed=0)
        for task in TransformId:
            out = apply_transform(ecg_segment, task, params, seed=4)
            assert out.size == ecg_segment.size
