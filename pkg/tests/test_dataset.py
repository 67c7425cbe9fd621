import math

import numpy as np
import pytest

from sardespeckle import dataset
from sardespeckle.denoise_engines import TvDenoiser
from sardespeckle.errors import InputError, ParseError
from sardespeckle.image_core import Domain, RasterImage
from sardespeckle.speckle_stats import digamma, polygamma1, simulate_speckle

EULER_GAMMA = 0.5772156649015329


def _stack(n, value=50.0, size=128, L=1.0, seed=60):
    clean = RasterImage(np.full((size, size), value, dtype=np.float32))
    return dataset.TemporalStack(tuple(
        simulate_speckle(clean, L, seed + k) for k in range(n)))


class TestTemporalStack:
    def test_single_date_multilook_is_identity(self):
        stack = _stack(1)
        out = dataset.temporal_multilook(stack)
        np.testing.assert_array_equal(out.samples, stack.dates[0].samples)

    def test_two_date_mean(self):
        stack = _stack(2)
        out = dataset.temporal_multilook(stack)
        expected = (stack.dates[0].samples.astype(np.float64)
                    + stack.dates[1].samples) / 2
        np.testing.assert_allclose(out.samples, expected, rtol=1e-6)

    def test_multilook_raises_enl(self):
        from sardespeckle.metrics import enl
        stack = _stack(25, size=320)
        est = enl(dataset.temporal_multilook(stack), (0, 0, 320, 320))
        assert 22.0 <= est.enl <= 28.0

    def test_shape_mismatch(self):
        a = RasterImage(np.ones((8, 8), dtype=np.float32))
        b = RasterImage(np.ones((8, 9), dtype=np.float32))
        with pytest.raises(InputError):
            dataset.TemporalStack((a, b))

    def test_empty_stack(self):
        with pytest.raises((InputError, TypeError, IndexError)):
            dataset.TemporalStack(())


class TestGroundtruth:
    def test_short_stack_warns(self):
        stack = _stack(4, size=128)
        with pytest.warns(RuntimeWarning, match="dates"):
            out = dataset.generate_groundtruth(stack, TvDenoiser(),
                                               (0, 0, 64, 64))
        assert out.domain == Domain.INTENSITY

    def test_reduces_variance(self):
        stack = _stack(8, size=128)
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out = dataset.generate_groundtruth(stack, TvDenoiser(), (0, 0, 64, 64))
        averaged = dataset.temporal_multilook(stack)
        assert out.samples.var() < averaged.samples.var()
        assert out.samples.mean() == pytest.approx(50.0, rel=0.1)

    def test_region_too_small(self):
        stack = _stack(8)
        with pytest.raises(InputError):
            dataset.generate_groundtruth(stack, TvDenoiser(), (0, 0, 10, 10))


class TestPatchExtraction:
    def test_reference_patch_count(self):
        anchors = dataset.patch_anchors(1024, 1536, 40, 10)
        assert len(anchors) == 14850

    def test_counts(self):
        assert len(dataset.patch_anchors(40, 40, 40, 10)) == 1
        assert len(dataset.patch_anchors(40, 50, 40, 10)) == 2
        assert len(dataset.patch_anchors(41, 41, 40, 1)) == 4

    def test_matches_brute_force(self):
        rng = np.random.default_rng(61)
        for _ in range(50):
            h, w = rng.integers(40, 200, 2)
            size = int(rng.integers(5, 41))
            stride = int(rng.integers(1, 15))
            brute = [(r, c) for r in range(h - size + 1) for c in range(w - size + 1)
                     if r % stride == 0 and c % stride == 0]
            assert dataset.patch_anchors(h, w, size, stride) == brute

    def test_patch_size_exceeds_image(self):
        with pytest.raises(InputError):
            dataset.patch_anchors(30, 30, 40, 10)

    def test_extract_values(self):
        img = RasterImage(np.arange(100, dtype=np.float32).reshape(10, 10))
        patches = dataset.extract_patches(img, size=5, stride=5)
        assert len(patches) == 4
        assert patches[0][0, 0] == 0.0
        assert patches[3][0, 0] == 55.0


class TestAugment:
    def _patch(self):
        return np.arange(16, dtype=np.float64).reshape(4, 4)

    def test_eight_distinct_transforms(self):
        outs = dataset.augment(self._patch())
        assert len(outs) == 8
        keys = {a.tobytes() for a in outs}
        assert len(keys) == 8

    def test_fixed_order(self):
        p = self._patch()
        outs = dataset.augment(p)
        np.testing.assert_array_equal(outs[0], p)
        np.testing.assert_array_equal(outs[1], np.rot90(p))
        np.testing.assert_array_equal(outs[4], np.fliplr(p))
        np.testing.assert_array_equal(outs[6], p.T)

    def test_group_closure(self):
        # applying any transform to any transformed patch stays in the set
        p = self._patch()
        keys = {a.tobytes() for a in dataset.augment(p)}
        for a in dataset.augment(p):
            for b in dataset.augment(a):
                assert b.tobytes() in keys

    def test_requires_square(self):
        with pytest.raises(InputError):
            dataset.augment(np.zeros((3, 4)))


class TestSynthesizePairs:
    def test_pair_count_and_provenance(self):
        clean = RasterImage(np.full((60, 60), 2.0, dtype=np.float32))
        pairs = dataset.synthesize_pairs(clean, 1.0, seed=62, size=40, stride=10)
        assert len(pairs) == 9 * 8  # 3x3 anchors x 8 augmentations
        assert pairs[0].provenance == ("0", 0, 0, 0)
        assert pairs[7].provenance == ("0", 0, 0, 7)
        assert pairs[8].provenance == ("0", 0, 10, 0)
        assert pairs[-1].provenance == ("0", 20, 20, 7)

    def test_residual_moments_match_log_speckle(self):
        # noisy - clean in log space is pure log speckle: mean -gamma, var pi^2/6
        clean = RasterImage(np.full((256, 256), 1.0, dtype=np.float32))
        pairs = dataset.synthesize_pairs(clean, 1.0, seed=63)
        res = np.concatenate([(p.noisy - p.clean).ravel() for p in pairs])
        assert res.size > 1e4
        assert res.mean() == pytest.approx(digamma(1.0), abs=0.02)
        assert res.var() == pytest.approx(polygamma1(1.0), rel=0.03)

    def test_residual_moments_multilook(self):
        clean = RasterImage(np.full((256, 256), 5.0, dtype=np.float32))
        pairs = dataset.synthesize_pairs(clean, 4.0, seed=64, augmentations=False)
        res = np.concatenate([(p.noisy - p.clean).ravel() for p in pairs])
        assert res.mean() == pytest.approx(digamma(4.0) - math.log(4.0), abs=0.01)
        assert res.var() == pytest.approx(polygamma1(4.0), rel=0.03)

    def test_deterministic(self):
        clean = RasterImage(np.full((50, 50), 3.0, dtype=np.float32))
        a = dataset.synthesize_pairs(clean, 1.0, seed=65)
        b = dataset.synthesize_pairs(clean, 1.0, seed=65)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.noisy, pb.noisy)

    def test_rejects_zero_pixels(self):
        arr = np.full((50, 50), 1.0, dtype=np.float32)
        arr[3, 3] = 0.0
        with pytest.raises(InputError):
            dataset.synthesize_pairs(RasterImage(arr), 1.0, seed=0)


class TestSubsample2:
    def test_even_and_odd(self):
        img = RasterImage(np.arange(20, dtype=np.float32).reshape(4, 5))
        out = dataset.subsample2(img)
        assert out.shape == (2, 3)
        np.testing.assert_array_equal(out.samples,
                                      img.samples[::2, ::2])

    def test_preserves_domain(self):
        img = RasterImage(np.zeros((6, 6), dtype=np.float32), Domain.LOG_INTENSITY)
        assert dataset.subsample2(img).domain == Domain.LOG_INTENSITY

    def test_too_small(self):
        with pytest.raises(InputError):
            dataset.subsample2(RasterImage(np.ones((1, 5), dtype=np.float32)))


class TestPairArchive:
    def test_roundtrip(self, tmp_path):
        clean = RasterImage(np.full((50, 50), 4.0, dtype=np.float32))
        pairs = dataset.synthesize_pairs(clean, 1.0, seed=66, augmentations=False)
        manifest = dataset.write_pair_archive(pairs, tmp_path / "arch", 1.0, 66)
        assert manifest.name == dataset.MANIFEST_NAME
        header = manifest.read_text().splitlines()[0]
        assert tuple(header.split("\t")) == dataset.MANIFEST_COLUMNS
        back = dataset.read_pair_archive(manifest)
        assert len(back) == len(pairs)
        for pa, pb in zip(pairs, back):
            np.testing.assert_array_equal(pa.clean.astype(np.float32), pb.clean)
            np.testing.assert_array_equal(pa.noisy.astype(np.float32), pb.noisy)
            assert pa.provenance == pb.provenance

    def test_reads_from_directory(self, tmp_path):
        clean = RasterImage(np.full((40, 40), 4.0, dtype=np.float32))
        pairs = dataset.synthesize_pairs(clean, 1.0, seed=67, augmentations=False)
        dataset.write_pair_archive(pairs, tmp_path / "arch", 1.0, 67)
        assert len(dataset.read_pair_archive(tmp_path / "arch")) == len(pairs)

    def test_bad_header(self, tmp_path):
        d = tmp_path / "arch"
        d.mkdir()
        (d / dataset.MANIFEST_NAME).write_text("not\ta\tmanifest\n")
        with pytest.raises(ParseError, match="manifest"):
            dataset.read_pair_archive(d)

    def test_bad_column_count(self, tmp_path):
        clean = RasterImage(np.full((40, 40), 4.0, dtype=np.float32))
        pairs = dataset.synthesize_pairs(clean, 1.0, seed=68, augmentations=False)
        manifest = dataset.write_pair_archive(pairs, tmp_path / "arch", 1.0, 68)
        lines = manifest.read_text().splitlines()
        lines[1] = lines[1] + "\textra"
        manifest.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError, match="columns"):
            dataset.read_pair_archive(manifest)
