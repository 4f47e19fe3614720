"""Projection, grid pyramid and score->k mapping contracts."""

import math

import numpy as np
import pytest

from sensemim.datamodel import DataError
from sensemim.polysemy import (
    DEFAULT_CALIBRATION,
    DegenerateInputError,
    build_pyramid,
    clusters_from_score,
    polysemy_score,
    project,
)
from sensemim.synthbench import SynthSpec, generate


class TestProject:
    def test_low_rank_data_preserves_distances(self):
        rng = np.random.default_rng(0)
        base = rng.normal(size=(12, 3))
        lift = rng.normal(size=(3, 9))  # embed 3-dim data in 9 dims
        x = base @ lift
        p = project(x, 3)
        d_orig = np.linalg.norm(x[:, None] - x[None, :], axis=2)
        d_proj = np.linalg.norm(p[:, None] - p[None, :], axis=2)
        np.testing.assert_allclose(d_proj, d_orig, atol=1e-9)

    def test_duplicated_dataset_same_projection(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(10, 5))
        p1 = project(x, 3)
        p2 = project(np.vstack([x, x]), 3)
        np.testing.assert_allclose(p2[:10], p1, atol=1e-9)
        np.testing.assert_allclose(p2[10:], p1, atol=1e-9)

    def test_reconstruction_error_equals_trailing_eigenvalues(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(10, 8))
        centered = x - x.mean(axis=0)
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        p = project(x, 3)
        # rebuild in the original space from the 3 kept components
        comps = vt[:3]
        signs = np.array([1.0 if comps[r, np.argmax(np.abs(comps[r]))] > 0 else -1.0 for r in range(3)])
        recon = p @ (comps * signs[:, None])
        err = float(np.sum((centered - recon) ** 2))
        assert err == pytest.approx(float(np.sum(s[3:] ** 2)), abs=1e-9)

    def test_sign_convention_deterministic(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(15, 6))
        p1 = project(x, 3)
        p2 = project(x.copy(), 3)
        np.testing.assert_array_equal(p1, p2)

    def test_errors(self):
        with pytest.raises(DegenerateInputError):
            project(np.ones((5, 4)), 3)  # no second distinct point
        with pytest.raises(DegenerateInputError):
            project(np.ones((1, 4)), 3)
        with pytest.raises(DataError):
            project(np.random.default_rng(0).normal(size=(5, 2)), 3)  # m < D


class TestGridPyramid:
    def test_single_clump_one_cell_everywhere(self):
        p = np.zeros((7, 3))
        pyr = build_pyramid(p, 8)
        assert pyr.occupied == (1,) * 8

    def test_two_point_occupancy(self):
        p = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        pyr = build_pyramid(p, 4)
        assert pyr.occupied == (2, 2, 2, 2)

    def test_occupancy_non_decreasing(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = int(rng.integers(2, 60))
            p = rng.normal(size=(n, 3)) * rng.uniform(0.01, 100)
            occ = build_pyramid(p, 8).occupied
            assert all(b >= a for a, b in zip(occ, occ[1:]))
            assert all(1 <= v <= n for v in occ)

    def test_level_budget_guard(self):
        with pytest.raises(DataError):
            build_pyramid(np.zeros((3, 9)), 8)  # 72 bits of cell code


class TestPolysemyScore:
    def test_identical_points_score_zero(self):
        assert polysemy_score(np.ones((10, 5))) == 0.0

    def test_two_separated_clumps(self):
        # two zero-radius clumps: n_l = 2 at every level
        a = np.array([1.0, 0.2, -0.3, 0.8])
        b = np.array([-1.0, 0.1, 0.4, -0.2])
        x = np.stack([a] * 5 + [b] * 5)
        expect = math.log(2) * sum(2.0 ** -l for l in range(1, 9))
        assert polysemy_score(x) == pytest.approx(expect, abs=1e-9)
        assert expect == pytest.approx(0.6904, abs=5e-4)

    def test_tight_clumps_with_tiny_noise(self):
        rng = np.random.default_rng(6)
        centers = np.array([[1.0, 0.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0]])
        x = np.vstack([c + 1e-6 * rng.normal(size=(6, 4)) for c in centers])
        expect = math.log(2) * (1 - 2.0**-8)
        assert polysemy_score(x) == pytest.approx(expect, abs=1e-6)

    def test_translation_and_scale_invariance(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(25, 6))
        s0 = polysemy_score(x)
        assert polysemy_score(x + 3.7) == pytest.approx(s0, abs=1e-9)
        assert polysemy_score(x * 251.0) == pytest.approx(s0, abs=1e-9)

    def test_more_clumps_scores_higher_statistically(self):
        # The score is scale invariant, so clump count is only comparable
        # between datasets with the same within/between dispersion ratio.
        def score_for(senses, seed, tag):
            spec = SynthSpec(
                dim=16,
                senses=senses,
                instances_per_sense=30,
                cluster_spread=0.05,
                paraphrase_jitter=0.01,
                separation=0.8,
                seed=seed,
                lemma=tag,
                pos="n",
            )
            _, test, _ = generate(spec)
            return polysemy_score(test.xs())

        wins = 0
        for t in range(100):
            hi = score_for(6, 5000 + t, f"hi{t}")
            lo = score_for(2, 9000 + t, f"lo{t}")
            if hi > lo:
                wins += 1
        assert wins >= 95


class TestClustersFromScore:
    def test_clamped_ends(self):
        low, high = DEFAULT_CALIBRATION
        assert clusters_from_score(low - 5.0) == 2
        assert clusters_from_score(low) == 2
        assert clusters_from_score(high) == 10
        assert clusters_from_score(high + 5.0) == 10

    def test_midpoint(self):
        low, high = DEFAULT_CALIBRATION
        assert clusters_from_score((low + high) / 2) == 6  # round((2+10)/2)

    def test_round_half_up(self):
        # score placed so the affine image is exactly k + 0.5
        assert clusters_from_score(0.5, k_min=2, k_max=4, calibration=(0.0, 1.0)) == 3
        assert clusters_from_score(0.25, k_min=2, k_max=4, calibration=(0.0, 1.0)) == 3

    def test_monotone_in_score(self):
        prev = 0
        for s in np.linspace(-1, 5, 400):
            k = clusters_from_score(float(s))
            assert k >= prev
            prev = k

    def test_invalid_calibration(self):
        with pytest.raises(DataError):
            clusters_from_score(1.0, calibration=(2.0, 2.0))
        with pytest.raises(DataError):
            clusters_from_score(1.0, k_min=0)
        with pytest.raises(DataError):
            clusters_from_score(1.0, k_min=5, k_max=3)


class TestDynamicKRecovery:
    def test_mean_absolute_error_small_sample(self):
        # 14 words, two per true count; the full 50-word run lives in the
        # acceptance suite
        errors = []
        for i in range(14):
            k_true = 2 + (i % 7)
            spec = SynthSpec(
                dim=16,
                senses=k_true,
                instances_per_sense=30,
                cluster_spread=0.05,
                paraphrase_jitter=0.01,
                separation=0.8,
                seed=1000 + i,
                lemma=f"w{i}",
                pos="n",
            )
            _, test, _ = generate(spec)
            k_hat = clusters_from_score(polysemy_score(test.xs()))
            errors.append(abs(k_hat - k_true))
        assert float(np.mean(errors)) <= 1.0
