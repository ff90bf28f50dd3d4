import numpy as np
import pytest

from cellfuse import pathomics as pm
from cellfuse.pathomics.region import NucleusRegion

import oracles


FO_ORDER = (
    "10th percentile",
    "90th percentile",
    "energy",
    "entropy",
    "interquartile range",
    "kurtosis",
    "maximum",
    "mean absolute deviation",
    "mean",
    "median",
    "minimum",
    "range",
    "robust mean absolute deviation",
    "root mean squared",
    "skewness",
    "total energy",
    "uniformity",
    "variance",
)


def random_region(rng, n_px, bbox=20, constant=None):
    idx = rng.choice(bbox * bbox, size=n_px, replace=False)
    pixels = np.stack([idx // bbox, idx % bbox], axis=1)
    if constant is None:
        intensities = rng.integers(0, 256, n_px).astype(np.float64)
    else:
        intensities = np.full(n_px, float(constant))
    return NucleusRegion(pixels, intensities)


def oracle_vector(region, n_bins):
    """Full 94-entry reference vector assembled from the literal oracles."""
    levels = oracles.quantize_ref(list(region.intensities), n_bins)
    grid = oracles.grid_of([tuple(p) for p in region.pixels], levels)
    fo = oracles.first_order_ref(list(region.intensities))
    out = [region.pixels[:, 0].mean(), region.pixels[:, 1].mean()]
    out += [fo[k] for k in FO_ORDER]
    out += oracles.glcm_features_ref(grid, n_bins)
    out += oracles.gldm_features_ref(grid, n_bins)
    out += oracles.glrlm_features_ref(grid, n_bins, region.n_pixels)
    out += oracles.glszm_features_ref(grid, n_bins, region.n_pixels)
    out += oracles.ngtdm_features_ref(grid, n_bins)
    return np.array(out)


class TestRegionAndQuantize:
    def test_region_validation(self):
        with pytest.raises(ValueError):
            NucleusRegion(np.zeros((0, 2)), np.zeros(0))
        with pytest.raises(ValueError):
            NucleusRegion([[0, 0], [0, 0]], [1.0, 2.0])
        with pytest.raises(ValueError):
            NucleusRegion([[0, 0]], [300.0])

    def test_quantize_two_values_two_bins(self):
        r = NucleusRegion([[0, 0], [0, 1]], [0.0, 255.0])
        q = pm.quantize(r, 2)
        assert sorted(q.levels[q.levels > 0].tolist()) == [1, 2]

    def test_quantize_constant_region(self):
        r = random_region(np.random.default_rng(0), 30, constant=77)
        q = pm.quantize(r, 32)
        assert set(q.levels[q.levels > 0].tolist()) == {1}

    def test_quantize_uniform_256_into_32_bins(self):
        pixels = [[i, j] for i in range(16) for j in range(16)]
        r = NucleusRegion(pixels, np.arange(256, dtype=np.float64))
        q = pm.quantize(r, 32)
        levels = q.levels[q.levels > 0]
        counts = np.bincount(levels, minlength=33)[1:]
        np.testing.assert_array_equal(counts, 8)

    def test_quantize_needs_two_bins(self):
        r = NucleusRegion([[0, 0]], [1.0])
        with pytest.raises(ValueError):
            pm.quantize(r, 1)


class TestLocation:
    def test_square_centroid(self):
        r = NucleusRegion([[0, 0], [0, 1], [1, 0], [1, 1]], [1.0] * 4)
        np.testing.assert_allclose(pm.location_features(r), [0.5, 0.5])

    def test_single_pixel(self):
        r = NucleusRegion([[7, 3]], [9.0])
        np.testing.assert_allclose(pm.location_features(r), [7.0, 3.0])

    def test_matches_mean_oracle(self):
        r = random_region(np.random.default_rng(1), 40)
        np.testing.assert_array_equal(
            pm.location_features(r), r.pixels.mean(axis=0)
        )


class TestFirstOrder:
    def test_three_values(self):
        r = NucleusRegion([[0, 0], [0, 1], [0, 2]], [1.0, 2.0, 3.0])
        f = dict(zip(pm.FIRST_ORDER_NAMES, pm.first_order_features(r)))
        assert f["firstorder.mean"] == 2.0
        assert f["firstorder.range"] == 2.0
        np.testing.assert_allclose(f["firstorder.variance"], 2.0 / 3.0)

    def test_constant_degenerates(self):
        r = NucleusRegion([[0, 0], [0, 1]], [5.0, 5.0])
        f = dict(zip(pm.FIRST_ORDER_NAMES, pm.first_order_features(r)))
        assert f["firstorder.variance"] == 0.0
        assert f["firstorder.entropy"] == 0.0
        assert f["firstorder.uniformity"] == 1.0
        assert f["firstorder.skewness"] == 0.0
        assert f["firstorder.kurtosis"] == 0.0

    def test_random_region_matches_oracle(self):
        r = random_region(np.random.default_rng(2), 50)
        ref = oracles.first_order_ref(list(r.intensities))
        np.testing.assert_allclose(
            pm.first_order_features(r),
            [ref[k] for k in FO_ORDER],
            rtol=1e-9,
            atol=1e-12,
        )


class TestGlcm:
    def test_constant_region(self):
        r = random_region(np.random.default_rng(3), 25, constant=100)
        f = dict(zip(pm.GLCM_NAMES, pm.glcm_features(r)))
        assert f["glcm.contrast"] == 0.0
        assert f["glcm.joint_energy"] == 1.0
        assert f["glcm.joint_entropy"] == 0.0
        assert f["glcm.correlation"] == 0.0

    def test_two_pixel_contrast_one(self):
        # the only offset present pairs levels 1 and 2, so contrast is exactly 1
        horizontal = NucleusRegion([[0, 0], [0, 1]], [0.0, 255.0])
        vertical = NucleusRegion([[0, 0], [1, 0]], [0.0, 255.0])
        for region in (horizontal, vertical):
            f = dict(zip(pm.GLCM_NAMES, pm.glcm_features(region, 2)))
            assert f["glcm.contrast"] == 1.0

    def test_checkerboard_accumulated_contrast(self):
        # E and S offsets pair differing levels, the diagonals pair equal ones
        r = NucleusRegion(
            [[0, 0], [0, 1], [1, 0], [1, 1]], [0.0, 255.0, 255.0, 0.0]
        )
        f = dict(zip(pm.GLCM_NAMES, pm.glcm_features(r, 2)))
        np.testing.assert_allclose(f["glcm.contrast"], 8.0 / 12.0, rtol=1e-12)

    def test_single_pixel_takes_constant_values(self):
        single = NucleusRegion([[0, 0]], [200.0])
        constant = NucleusRegion([[0, 0], [0, 1]], [200.0, 200.0])
        np.testing.assert_array_equal(
            pm.glcm_features(single), pm.glcm_features(constant)
        )

    def test_random_matches_oracle(self):
        rng = np.random.default_rng(4)
        r = random_region(rng, 64, bbox=8)
        np.testing.assert_allclose(
            pm.glcm_features(r, 8),
            oracles.glcm_features_ref(
                oracles.grid_of(
                    [tuple(p) for p in r.pixels],
                    oracles.quantize_ref(list(r.intensities), 8),
                ),
                8,
            ),
            rtol=1e-9,
            atol=1e-12,
        )


class TestOtherFamilies:
    def test_constant_region_glszm_small_area(self):
        n = 16
        r = random_region(np.random.default_rng(5), n, bbox=4, constant=42)
        f = dict(zip(pm.GLSZM_NAMES, pm.glszm_features(r)))
        np.testing.assert_allclose(f["glszm.small_area_emphasis"], 1.0 / n**2)

    def test_constant_region_ngtdm_coarseness_cap(self):
        r = random_region(np.random.default_rng(6), 9, bbox=3, constant=10)
        f = dict(zip(pm.NGTDM_NAMES, pm.ngtdm_features(r)))
        assert f["ngtdm.coarseness"] == 1e6

    def test_isolated_pixel_all_finite(self):
        r = NucleusRegion([[0, 0]], [128.0])
        for fn in (pm.gldm_features, pm.glrlm_features, pm.glszm_features,
                   pm.ngtdm_features):
            vals = fn(r)
            assert np.all(np.isfinite(vals))


class TestFullVector:
    def test_length_and_names(self):
        assert pm.N_FEATURES == 94
        assert len(pm.FEATURE_NAMES) == 94
        assert len(set(pm.FEATURE_NAMES)) == 94
        fams = [n.split(".")[0] for n in pm.FEATURE_NAMES]
        counts = {f: fams.count(f) for f in dict.fromkeys(fams)}
        assert counts == {
            "location": 2,
            "firstorder": 18,
            "glcm": 23,
            "gldm": 14,
            "glrlm": 16,
            "glszm": 16,
            "ngtdm": 5,
        }

    def test_deterministic(self):
        r = random_region(np.random.default_rng(7), 60)
        np.testing.assert_array_equal(
            pm.extract_node_features(r), pm.extract_node_features(r)
        )

    def test_translation_moves_only_location(self):
        r = random_region(np.random.default_rng(8), 45)
        moved = r.translate(10, 10)
        a = pm.extract_node_features(r)
        b = pm.extract_node_features(moved)
        np.testing.assert_allclose(b[:2] - a[:2], [10.0, 10.0])
        np.testing.assert_array_equal(a[2:], b[2:])

    def test_pixel_order_permutation_invariance(self):
        rng = np.random.default_rng(9)
        r = random_region(rng, 30)
        perm = rng.permutation(30)
        shuffled = NucleusRegion(r.pixels[perm], r.intensities[perm])
        np.testing.assert_allclose(
            pm.extract_node_features(r),
            pm.extract_node_features(shuffled),
            rtol=1e-12,
            atol=1e-14,
        )

    @pytest.mark.parametrize("n_px", [1, 2, 5, 50, 200])
    def test_matches_oracle_across_sizes(self, n_px):
        rng = np.random.default_rng(100 + n_px)
        r = random_region(rng, n_px, bbox=20)
        np.testing.assert_allclose(
            pm.extract_node_features(r),
            oracle_vector(r, 32),
            rtol=1e-9,
            atol=1e-12,
        )

    def test_matches_oracle_randomized_sweep(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            n_px = int(rng.integers(1, 120))
            bbox = int(rng.integers(max(2, int(np.ceil(np.sqrt(n_px)))), 16))
            if bbox * bbox < n_px:
                bbox = int(np.ceil(np.sqrt(n_px)))
            n_bins = int(rng.choice([2, 4, 8, 32]))
            r = random_region(rng, n_px, bbox=bbox)
            np.testing.assert_allclose(
                pm.extract_node_features(r, n_bins),
                oracle_vector(r, n_bins),
                rtol=1e-9,
                atol=1e-12,
            )
