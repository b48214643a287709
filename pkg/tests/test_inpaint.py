import numpy as np
import pytest

from blockforge.errors import DimensionError, PredictorError, SupportViolationError
from blockforge.inpaint import (
    HintVolume,
    SamplerConfig,
    build_hint_volume,
    estimate_uncertainty,
    inpaint_image,
    reference_predictor,
    sample_training_hints,
    threshold_labels,
)
from blockforge.raster import VOID, ImageRaster, LabelMap, decompose_grid
from blockforge.selection import all_blocks, checkerboard, no_blocks, pseudo_checkerboard

from conftest import voronoi_scene
from _oracles import trial_stats_oracle


def gray_image(h, w, value=128):
    return ImageRaster(np.full((h, w, 3), value, dtype=np.uint8))


def constant_predictor(field):
    field = np.asarray(field, dtype=np.float64)

    def predict(image, hints, trial_seed):
        return field

    return predict


class TestBuildHintVolume:
    def test_all_void_is_all_zero(self):
        hv = build_hint_volume(LabelMap.full_void(4, 3), k=5)
        assert hv.values.shape == (3, 4, 5)
        assert not hv.values.any()

    def test_single_pixel_one_hot(self):
        a = np.full((2, 2), VOID, dtype=np.uint8)
        a[0, 1] = 1
        hv = build_hint_volume(LabelMap(a), k=3)
        assert hv.values[0, 1].tolist() == [0.0, 1.0, 0.0]
        assert hv.values.sum() == 1.0

    def test_support_equals_plan_mask(self):
        gt, _ = voronoi_scene(0)
        grid = decompose_grid(64, 64, 10, 10)
        plan = pseudo_checkerboard(grid, 0.5)
        partial = LabelMap(np.where(plan.mask(), gt.labels, VOID).astype(np.uint8))
        hv = build_hint_volume(partial, k=5)
        assert (hv.hinted_mask() == plan.mask()).all()

    def test_label_out_of_range(self):
        a = np.full((2, 2), 4, dtype=np.uint8)
        with pytest.raises(ValueError):
            build_hint_volume(LabelMap(a), k=3)

    def test_column_sums_zero_or_one(self):
        with pytest.raises(ValueError):
            HintVolume(np.full((2, 2, 3), 0.5))


class TestSampleTrainingHints:
    def test_half_of_fifty(self):
        blocks = {(r, c) for r in range(10) for c in range(5)}
        hints = sample_training_hints(blocks, seed=0)
        assert len(hints) == 25
        assert hints <= blocks

    def test_floor_on_single_block(self):
        assert sample_training_hints({(0, 0)}, seed=0) == frozenset()

    def test_deterministic(self):
        blocks = {(r, c) for r in range(4) for c in range(4)}
        assert sample_training_hints(blocks, seed=5) == sample_training_hints(blocks, seed=5)
        assert sample_training_hints(blocks, seed=5) != sample_training_hints(blocks, seed=6)

    def test_empty_input(self):
        with pytest.raises(ValueError):
            sample_training_hints(set(), seed=0)


class TestEstimateUncertainty:
    def test_deterministic_predictor_zero_uncertainty(self):
        field = np.zeros((2, 3, 2))
        field[..., 0] = 0.25
        field[..., 1] = 0.75
        res = estimate_uncertainty(
            gray_image(2, 3),
            HintVolume(np.zeros((2, 3, 2))),
            constant_predictor(field),
            SamplerConfig(g=5, seed=0, rho=1.0),
        )
        assert (res.u == 0).all()
        assert np.allclose(res.mu, field)
        assert (res.predicted.labels == 1).all()

    def test_hand_example(self):
        trials = iter(
            [np.array([[[0.6, 0.4]]]), np.array([[[0.8, 0.2]]])]
        )

        def predictor(image, hints, trial_seed):
            return next(trials)

        res = estimate_uncertainty(
            gray_image(1, 1),
            HintVolume(np.zeros((1, 1, 2))),
            predictor,
            SamplerConfig(g=2, seed=0, rho=0.5),
        )
        assert np.allclose(res.mu[0, 0], [0.7, 0.3], atol=1e-12)
        assert res.predicted.labels[0, 0] == 0
        assert res.u[0, 0] == pytest.approx(0.1414213562, abs=1e-9)

    def test_trial_order_invariance(self):
        rng = np.random.default_rng(0)
        fields = rng.dirichlet(np.ones(3), size=(4, 2, 2)).transpose(1, 2, 0, 3)
        # fields[t] is the t-th trial of shape (2, 2, 3)... build explicitly:
        fields = [np.ascontiguousarray(rng.dirichlet(np.ones(3), size=(2, 2))) for _ in range(4)]

        def make_predictor(order):
            trials = iter([fields[i] for i in order])
            return lambda image, hints, seed: next(trials)

        cfg = SamplerConfig(g=4, seed=0)
        img = gray_image(2, 2)
        hv = HintVolume(np.zeros((2, 2, 3)))
        a = estimate_uncertainty(img, hv, make_predictor([0, 1, 2, 3]), cfg)
        b = estimate_uncertainty(img, hv, make_predictor([3, 1, 0, 2]), cfg)
        assert np.allclose(a.mu, b.mu, atol=1e-12)
        assert np.allclose(a.u, b.u, atol=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            g = int(rng.integers(2, 7))
            k = int(rng.integers(2, 5))
            trial_list = [rng.dirichlet(np.ones(k), size=(1, 1)) for _ in range(g)]
            trials = iter(trial_list)
            res = estimate_uncertainty(
                gray_image(1, 1),
                HintVolume(np.zeros((1, 1, k))),
                lambda image, hints, seed: next(trials),
                SamplerConfig(g=g, seed=0),
            )
            mu_o, uvec_o, u_o = trial_stats_oracle([t[0, 0].tolist() for t in trial_list])
            assert np.allclose(res.mu[0, 0], mu_o, atol=1e-9)
            assert np.allclose(res.u_vec[0, 0], uvec_o, atol=1e-9)
            assert res.u[0, 0] == pytest.approx(u_o, abs=1e-9)

    def test_mu_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        trial_list = [rng.dirichlet(np.ones(4), size=(3, 5)) for _ in range(6)]
        trials = iter(trial_list)
        res = estimate_uncertainty(
            gray_image(3, 5),
            HintVolume(np.zeros((3, 5, 4))),
            lambda image, hints, seed: next(trials),
            SamplerConfig(g=6, seed=0),
        )
        assert np.allclose(res.mu.sum(axis=2), 1.0, atol=1e-6)

    def test_invalid_distribution_rejected(self):
        bad = np.full((1, 1, 2), 0.9)  # sums to 1.8

        with pytest.raises(PredictorError):
            estimate_uncertainty(
                gray_image(1, 1),
                HintVolume(np.zeros((1, 1, 2))),
                constant_predictor(bad),
                SamplerConfig(g=2, seed=0),
            )

    def test_g_below_two_rejected(self):
        with pytest.raises(ValueError):
            SamplerConfig(g=1, seed=0)


class TestThresholdLabels:
    def _result(self):
        # synthetic: 10% of pixels have u above 0.2 * max
        u = np.full((10, 10), 0.1)
        u[0, :] = 1.0  # 10 pixels of high uncertainty
        predicted = LabelMap(np.ones((10, 10), dtype=np.uint8))
        from blockforge.inpaint import UncertaintyResult

        mu = np.zeros((10, 10, 2))
        mu[..., 1] = 1.0
        return UncertaintyResult(mu=mu, u_vec=np.stack([u, u], axis=2), u=u, predicted=predicted)

    def test_threshold_one_keeps_all(self):
        out, cov = threshold_labels(self._result(), 1.0)
        assert cov == 1.0
        assert (out.labels != VOID).all()

    def test_zero_uncertainty_keeps_all(self):
        from blockforge.inpaint import UncertaintyResult

        res = UncertaintyResult(
            mu=np.ones((2, 2, 1)),
            u_vec=np.zeros((2, 2, 1)),
            u=np.zeros((2, 2)),
            predicted=LabelMap(np.zeros((2, 2), dtype=np.uint8)),
        )
        out, cov = threshold_labels(res, 0.2)
        assert cov == 1.0

    def test_ninety_percent_coverage_fixture(self):
        out, cov = threshold_labels(self._result(), 0.2)
        assert cov == 0.90
        assert (out.labels[0, :] == VOID).all()

    def test_coverage_monotone(self):
        res = self._result()
        covs = [threshold_labels(res, t)[1] for t in np.linspace(0, 1, 11)]
        assert all(a <= b for a, b in zip(covs, covs[1:]))


class TestInpaintImage:
    def test_full_partial_is_copied_verbatim(self):
        gt, img = voronoi_scene(1)
        grid = decompose_grid(64, 64, 10, 10)
        plan = all_blocks(grid)
        res = inpaint_image(
            img, gt, plan, reference_predictor(rho=0.5), SamplerConfig(g=2, seed=0), 0.5, k=5
        )
        assert (res.label_map.labels == gt.labels).all()
        assert res.coverage == 1.0

    def test_empty_partial_with_deterministic_predictor(self):
        field = np.zeros((8, 8, 3))
        field[..., 2] = 1.0
        grid = decompose_grid(8, 8, 2, 2)
        res = inpaint_image(
            gray_image(8, 8),
            LabelMap.full_void(8, 8),
            no_blocks(grid),
            constant_predictor(field),
            SamplerConfig(g=2, seed=0),
            0.2,
            k=3,
        )
        assert (res.label_map.labels == 2).all()
        assert res.coverage == 1.0

    def test_copy_paste_guarantee_50_fixtures(self):
        predictor = reference_predictor(k_neighbors=5, rho=0.5)
        for seed in range(50):
            gt, img = voronoi_scene(seed, size=32)
            grid = decompose_grid(32, 32, 4, 4)
            plan = pseudo_checkerboard(grid, 0.5, phase=seed % 3)
            partial = LabelMap(np.where(plan.mask(), gt.labels, VOID).astype(np.uint8))
            res = inpaint_image(
                img, partial, plan, predictor, SamplerConfig(g=2, seed=seed), 0.2, k=5
            )
            hinted = partial.labels != VOID
            assert (res.label_map.labels[hinted] == partial.labels[hinted]).all()

    def test_support_violation_rejected(self):
        gt, img = voronoi_scene(2)
        grid = decompose_grid(64, 64, 10, 10)
        plan = no_blocks(grid)
        with pytest.raises(SupportViolationError):
            inpaint_image(
                img, gt, plan, reference_predictor(), SamplerConfig(g=2, seed=0), 0.2, k=5
            )

    def test_dimension_mismatch(self):
        grid = decompose_grid(8, 8, 2, 2)
        with pytest.raises(DimensionError):
            inpaint_image(
                gray_image(4, 4),
                LabelMap.full_void(8, 8),
                no_blocks(grid),
                reference_predictor(),
                SamplerConfig(g=2, seed=0),
                0.2,
                k=3,
            )


class TestReferencePredictor:
    def test_hinted_pixel_concentrates_on_own_class(self):
        a = np.full((5, 5), VOID, dtype=np.uint8)
        a[2, 2] = 1
        a[0, 0] = 0
        hints = build_hint_volume(LabelMap(a), k=3)
        pred = reference_predictor(k_neighbors=2, rho=1.0)
        field = pred(gray_image(5, 5), hints, trial_seed=0)
        assert field[2, 2].argmax() == 1
        assert field[2, 2, 1] > 0.99

    def test_two_equidistant_hints_split_evenly(self):
        a = np.full((1, 3), VOID, dtype=np.uint8)
        a[0, 0] = 0
        a[0, 2] = 1
        hints = build_hint_volume(LabelMap(a), k=2)
        pred = reference_predictor(k_neighbors=2, rho=1.0)
        field = pred(gray_image(1, 3), hints, trial_seed=0)
        assert field[0, 1].tolist() == pytest.approx([0.5, 0.5], abs=1e-9)

    def test_rho_one_is_deterministic(self):
        gt, img = voronoi_scene(3, size=32)
        grid = decompose_grid(32, 32, 4, 4)
        plan = checkerboard(grid, 0)
        partial = LabelMap(np.where(plan.mask(), gt.labels, VOID).astype(np.uint8))
        hints = build_hint_volume(partial, k=5)
        pred = reference_predictor(rho=1.0)
        res = estimate_uncertainty(img, hints, pred, SamplerConfig(g=3, seed=0, rho=1.0))
        assert (res.u == 0).all()

    def test_no_hints_uniform(self):
        hints = build_hint_volume(LabelMap.full_void(4, 4), k=4)
        field = reference_predictor()(gray_image(4, 4), hints, trial_seed=1)
        assert np.allclose(field, 0.25)

    def test_same_trial_seed_same_output(self):
        gt, img = voronoi_scene(4, size=32)
        grid = decompose_grid(32, 32, 4, 4)
        partial = LabelMap(np.where(checkerboard(grid, 0).mask(), gt.labels, VOID).astype(np.uint8))
        hints = build_hint_volume(partial, k=5)
        pred = reference_predictor(rho=0.5)
        a = pred(img, hints, trial_seed=7)
        b = pred(img, hints, trial_seed=7)
        c = pred(img, hints, trial_seed=8)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
