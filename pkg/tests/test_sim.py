import math

import numpy as np
import pytest

from herit_ridge.errors import NoCausalVariants, UserInputError
from herit_ridge.geno import StandardizationParams, apply_standardization
from herit_ridge.sim import (
    HERITABILITY_COLUMNS,
    PREDICTION_COLUMNS,
    HeritabilityExperimentConfig,
    PredictionExperimentConfig,
    desk_p_list,
    effective_ratio_observations,
    n_causal,
    prediction_metrics,
    rng_for,
    rows_csv_text,
    run_heritability_experiment,
    run_prediction_experiment,
    simulate_genotypes,
    simulate_phenotype,
    summarize_heritability,
    true_standardized,
)
from herit_ridge.theory import theoretical_corr2, theoretical_test_mse


class TestGenotypes:
    def test_support_and_frequencies(self):
        M = simulate_genotypes(50, 30, seed=1)
        assert set(np.unique(M.values)) <= {0, 1, 2}
        assert np.all((M.true_freqs >= 0.05) & (M.true_freqs <= 0.5))

    def test_law_of_large_numbers(self):
        M = simulate_genotypes(10000, 20, seed=2)
        emp = M.values.mean(axis=0) / 2
        assert np.max(np.abs(emp - M.true_freqs)) < 0.02

    def test_determinism(self):
        a, b = simulate_genotypes(20, 10, seed=3), simulate_genotypes(20, 10, seed=3)
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, simulate_genotypes(20, 10, seed=4).values)

    def test_streams_are_labelled(self):
        x = rng_for(7, "training", 3).random(4)
        np.testing.assert_array_equal(x, rng_for(7, "training", 3).random(4))
        assert not np.array_equal(x, rng_for(7, "training", 4).random(4))
        assert not np.array_equal(x, rng_for(7, "test", 3).random(4))

    def test_true_standardization(self):
        M = simulate_genotypes(30, 5, seed=1)
        expect = (M.values - 2 * M.true_freqs) / np.sqrt(2 * M.true_freqs * (1 - M.true_freqs))
        np.testing.assert_allclose(true_standardized(M), expect)


class TestPhenotype:
    def _z(self, n=300, p=200, seed=0):
        M = simulate_genotypes(n, p, seed=seed)
        return apply_standardization(M, StandardizationParams.from_frequencies(M.true_freqs))

    def test_causal_count(self):
        assert n_causal(10000, 0.1) == 1000
        assert n_causal(100, 0.29) == 29
        ph = simulate_phenotype(self._z(p=200), 0.5, 0.1, seed=3)
        assert ph.causal_index_set.size == 20
        assert np.count_nonzero(ph.u_true) == 20
        assert np.all(ph.u_true[np.setdiff1d(np.arange(200), ph.causal_index_set)] == 0)

    def test_null_genetics(self):
        ph = simulate_phenotype(self._z(), 0.0, 1.0, seed=3)
        np.testing.assert_array_equal(ph.y, ph.e)

    def test_no_causal(self):
        with pytest.raises(NoCausalVariants):
            simulate_phenotype(self._z(p=5), 0.5, 0.1)

    def test_unit_variance(self):
        # var(y | u) = |u|^2 + 1 - h2 fluctuates per draw, so average over replicates
        Z = self._z(n=10000, p=100, seed=5)
        v = [np.var(simulate_phenotype(Z, 0.6, 1.0, seed=s).y) for s in range(20)]
        assert np.mean(v) == pytest.approx(1.0, abs=0.05)


class TestHeritabilityExperiment:
    CFG = dict(
        cells=[(60, 150), (40, 100)],
        h2_sims=[0.5],
        f_cs=[1.0],
        replicates=2,
        seed=11,
        methods=["gcv-projection", "gcv-twoset", "reml", "gcv-naive", "cv10"],
        standardization_set_size=40,
    )

    def test_shape_and_determinism(self):
        rows = run_heritability_experiment(HeritabilityExperimentConfig(**self.CFG))
        assert len(rows) == 2 * 2 * 5
        again = run_heritability_experiment(HeritabilityExperimentConfig(**self.CFG))
        assert rows == again
        for r in rows:
            assert r.bias == pytest.approx(r.h2_est - r.h2_sim)
            assert 0 < r.h2_est < 1

    def test_replicates_reproducible_independently(self):
        full = run_heritability_experiment(HeritabilityExperimentConfig(**self.CFG))
        first = run_heritability_experiment(HeritabilityExperimentConfig(**{**self.CFG, "replicates": 1}))
        assert first == [r for r in full if r.replicate == 0]

    def test_summary(self):
        rows = run_heritability_experiment(HeritabilityExperimentConfig(**self.CFG))
        summary = summarize_heritability(rows)
        assert len(summary) == 2 * 5
        s = next(s for s in summary if s["n"] == 60 and s["method"] == "reml")
        biases = [r.bias for r in rows if r.n == 60 and r.method == "reml"]
        assert s["mean_bias"] == pytest.approx(np.mean(biases))
        assert s["replicates"] == 2

    def test_validation(self):
        with pytest.raises(UserInputError):
            HeritabilityExperimentConfig(methods=["bogus"])
        with pytest.raises(UserInputError):
            HeritabilityExperimentConfig(cells=[(20, 5)], f_cs=[0.1])
        with pytest.raises(UserInputError):
            HeritabilityExperimentConfig(replicates=0)


class TestPredictionMetrics:
    def test_hand_example(self):
        y = np.array([1.0, 2.0])
        g = np.array([1.0, 1.0])
        preds = np.array([[0.0, 2.0], [2.0, 2.0]])
        m = prediction_metrics(y, g, preds)
        assert m["err_p"] == pytest.approx(0.5)
        assert m["bias2_p"] == pytest.approx(0.5)
        assert m["var_p"] == pytest.approx(0.5)
        assert m["corr2_p"] == pytest.approx(0.5)
        assert m["corr2_degenerate_count"] == 1
        assert m["sd_over_training_sets"] == pytest.approx(0.0)
        assert m["sd_over_test_individuals"] == pytest.approx(math.sqrt(0.5))

    def test_decomposition_identity(self, rng):
        g = rng.normal(size=40)
        e = rng.normal(size=40)
        preds = g[None, :] * 0.5 + rng.normal(size=(7, 40))
        m = prediction_metrics(g + e, g, preds)
        cross = 2 * np.mean(e * (g - preds.mean(axis=0)))
        assert m["err_p"] == pytest.approx(np.mean(e**2) + m["bias2_p"] + m["var_p"] + cross, rel=1e-12)


class TestPredictionExperiment:
    CFG = dict(n=40, n_test=60, training_sets=4, h2=0.6, p_list=[20, 80], seed=5)

    def test_rows(self):
        rep = run_prediction_experiment(PredictionExperimentConfig(**self.CFG))
        assert [r.p for r in rep.rows] == [80, 20]
        r = rep.row_for(80)
        assert r.log_n_over_p == pytest.approx(math.log(0.5))
        assert r.theory_test_mse == pytest.approx(theoretical_test_mse(40, 80, 0.6))
        assert r.theory_corr2 == pytest.approx(theoretical_corr2(40, 80, 0.6))
        for row in rep.rows:
            assert min(row.err_p, row.bias2_p, row.var_p, row.corr2_p) >= 0

    def test_determinism(self):
        a = run_prediction_experiment(PredictionExperimentConfig(**self.CFG))
        b = run_prediction_experiment(PredictionExperimentConfig(**self.CFG))
        assert rows_csv_text(PREDICTION_COLUMNS, a.rows) == rows_csv_text(PREDICTION_COLUMNS, b.rows)

    def test_validation(self):
        with pytest.raises(UserInputError):
            PredictionExperimentConfig(h2=1.0)
        with pytest.raises(UserInputError):
            PredictionExperimentConfig(training_sets=1)

    def test_desk_p_list(self):
        assert desk_p_list(500) == [10043, 4262, 1809, 768, 326, 138, 59, 25]


class TestEffectiveRatio:
    def test_duplicate_needs_even_p(self):
        with pytest.raises(UserInputError):
            effective_ratio_observations(20, [41], 0.6, 1, n_test=20, duplicate_columns=True)

    def test_observations(self):
        obs = effective_ratio_observations(20, [40, 80], 0.6, 2, n_test=30)
        assert [(n, p) for n, p, _ in obs] == [(20, 40), (20, 80)] * 2
        assert all(v > 0 for *_, v in obs)


class TestCsvText:
    def test_fixed_order_and_repr(self):
        text = rows_csv_text(("b", "a"), [{"a": 0.1, "b": 1}, {"a": 1 / 3, "b": 2}])
        assert text == "b,a\n1,0.1\n2,0.3333333333333333\n"

    def test_heritability_columns(self):
        assert HERITABILITY_COLUMNS[-1] == "bias"
