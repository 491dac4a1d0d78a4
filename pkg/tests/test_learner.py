"""Learners: budgets, Poisson sampler, prediction rules, baselines."""

import math

import numpy as np
import pytest
import scipy.stats

from smoothlab.adversary import cyclic_hint_schedule, full_domain_schedule, make_hint_schedule
from smoothlab.core import (
    ExampleMultiset,
    FiniteDomain,
    HypothesisClass,
    LossSpec,
    make_partition_class,
)
from smoothlab.errors import CapacityError, ContractViolation, InputError
from smoothlab.learner import (
    Alg1Smoothed,
    Alg2PoissonFTPL,
    Alg3Transductive,
    DoublingMeta,
    FTL,
    HedgeLearner,
    default_n,
    hedge_update,
    hint_count,
    poisson_sample,
)
from smoothlab.oracle import TiePolicy


class TestBudgets:
    def test_hint_count_fixtures(self):
        assert hint_count(8, 1.0, 100.0) == 208
        assert hint_count(2, 0.5, 100.0) == 139
        assert hint_count(1, 0.5, 100.0) == 1  # floor at 1 when ln T = 0

    def test_hint_count_scales_inverse_sigma(self):
        # up to ceiling slack: K(sigma/10) >= 10 * (K(sigma) - 1)
        assert hint_count(100, 0.01) >= 10 * (hint_count(100, 0.1) - 1)

    def test_default_n_fixtures(self):
        assert default_n(100, 0.25, 1024, 4) == pytest.approx(200.0)
        assert default_n(64, 1 / 64, 256, 1) == pytest.approx(512.0)

    def test_default_n_takes_min(self):
        # T/sqrt(sigma) = 100, T*sqrt(|X|/d) = 10*sqrt(2) < 100
        assert default_n(10, 0.01, 2, 1) == pytest.approx(10 * math.sqrt(2))

    def test_input_validation(self):
        with pytest.raises(InputError):
            hint_count(0, 0.5)
        with pytest.raises(InputError):
            hint_count(4, 0.0)
        with pytest.raises(InputError):
            default_n(4, 0.5, 4, 5)


class TestPoissonSampler:
    @pytest.mark.parametrize("mean", [4.0, 50.0])
    def test_goodness_of_fit(self, mean, rng):
        """Chi-square GOF against the exact PMF (both sampler branches)."""
        draws = np.array([poisson_sample(mean, rng) for _ in range(20000)])
        lo = max(0, int(mean - 4 * math.sqrt(mean)))
        hi = int(mean + 4 * math.sqrt(mean))
        edges = list(range(lo, hi + 1))
        obs = np.array(
            [(draws < edges[0]).sum()]
            + [(draws == k).sum() for k in edges]
            + [(draws > edges[-1]).sum()], dtype=float)
        pmf = scipy.stats.poisson.pmf(edges, mean)
        exp = np.concatenate((
            [scipy.stats.poisson.cdf(edges[0] - 1, mean)],
            pmf,
            [scipy.stats.poisson.sf(edges[-1], mean)])) * draws.size
        keep = exp >= 5
        chi2 = ((obs[keep] - exp[keep]) ** 2 / exp[keep]).sum()
        crit = scipy.stats.chi2.ppf(0.999, df=keep.sum() - 1)
        assert chi2 < crit

    def test_mean_zero(self, rng):
        assert poisson_sample(0.0, rng) == 0

    def test_negative_rejected(self, rng):
        with pytest.raises(InputError):
            poisson_sample(-1.0, rng)

    def test_mean_and_variance_large(self, rng):
        draws = np.array([poisson_sample(200.0, rng) for _ in range(20000)])
        assert abs(draws.mean() - 200.0) < 4 * math.sqrt(200.0 / draws.size) * math.sqrt(200)
        assert abs(draws.var() / 200.0 - 1.0) < 0.05


class TestAlg3:
    def test_singleton_class_predicts_h(self):
        hclass = HypothesisClass([[1.0, -1.0]], declared_dim=0, binary=True)
        sched = full_domain_schedule(2, 2)
        learner = Alg3Transductive(hclass, LossSpec.of("absolute"), 2, sched)
        # With a single hypothesis, OPT(.; B+(x,-1)) - OPT(.; B+(x,+1))
        # = h(x)/2 - (-h(x)/2) = h(x).
        assert learner.predict(1, 0) == 1.0
        assert learner.predict(1, 1) == -1.0

    def test_last_round_no_hints(self, const_class):
        """At t = T the hint multiset is empty: yhat is the plain label-flip
        difference of ERM values."""
        sched = full_domain_schedule(1, 2)
        learner = Alg3Transductive(const_class, LossSpec.of("absolute"), 1, sched)
        # empty history, class {+1, -1}: both optima are -1/2, so yhat = 0
        assert learner.predict(1, 0) == 0.0

    def test_rejects_off_hint_instance(self, const_class):
        sched = make_hint_schedule([[0]])
        learner = Alg3Transductive(const_class, LossSpec.of("absolute"), 1, sched)
        with pytest.raises(ContractViolation):
            learner.predict(1, 1)

    def test_rejects_short_schedule(self, const_class):
        sched = make_hint_schedule([[0]])
        with pytest.raises(InputError):
            Alg3Transductive(const_class, LossSpec.of("absolute"), 2, sched)

    def test_two_calls_per_round(self, partition8):
        sched = full_domain_schedule(4, 8)
        learner = Alg3Transductive(partition8, LossSpec.of("binary_indicator"), 4, sched)
        for t in range(1, 5):
            y = learner.predict(t, 0)
            learner.update(t, 0, 1.0)
        assert learner.stats.call_count == 8

    def test_prediction_in_range_fuzz(self, partition8, rng):
        sched = cyclic_hint_schedule(6, [np.arange(4), np.arange(4, 8)])
        learner = Alg3Transductive(partition8, LossSpec.of("binary_indicator"),
                                   6, sched, seed=5)
        for t in range(1, 7):
            x = int(rng.choice(sched.row(t)))
            yhat = learner.predict(t, x)
            assert -1.0 <= yhat <= 1.0
            learner.update(t, x, float(rng.choice([-1.0, 1.0])))

    def test_deterministic_replay(self, partition8):
        sched = full_domain_schedule(5, 8)
        preds = []
        for _ in range(2):
            learner = Alg3Transductive(partition8, LossSpec.of("binary_indicator"),
                                       5, sched, seed=11)
            run = []
            for t in range(1, 6):
                run.append(learner.predict(t, t % 8))
                learner.update(t, t % 8, 1.0)
            preds.append(run)
        assert preds[0] == preds[1]


class TestAlg1:
    def test_hint_volume_and_calls(self, partition8):
        learner = Alg1Smoothed(partition8, LossSpec.of("binary_indicator"),
                               T=4, sigma=1.0, K=3, seed=2)
        hints = learner._hints_for_round(1)
        assert hints.logical_size == 3 * (4 - 1)
        assert learner._hints_for_round(4).logical_size == 0
        learner.predict(1, 0)
        assert learner.stats.call_count == 2

    def test_default_K(self, partition8):
        learner = Alg1Smoothed(partition8, LossSpec.of("binary_indicator"),
                               T=8, sigma=1.0)
        assert learner.K == hint_count(8, 1.0)

    def test_capacity_cap(self, partition8):
        learner = Alg1Smoothed(partition8, LossSpec.of("binary_indicator"),
                               T=10, sigma=0.01, max_hints_per_round=100)
        with pytest.raises(CapacityError):
            learner.predict(1, 0)

    def test_fresh_hints_each_round(self, partition8):
        learner = Alg1Smoothed(partition8, LossSpec.of("binary_indicator"),
                               T=3, sigma=1.0, K=50, seed=9)
        h1 = dict(learner._hints_for_round(1).items())
        h1_again = dict(learner._hints_for_round(1).items())
        h2 = dict(learner._hints_for_round(2).items())
        assert h1 == h1_again  # same round -> same stream
        assert h1 != h2       # different round -> fresh stream

    def test_prediction_in_range(self, partition8, rng):
        learner = Alg1Smoothed(partition8, LossSpec.of("binary_indicator"),
                               T=6, sigma=0.5, K=4, seed=3)
        for t in range(1, 7):
            x = int(rng.integers(8))
            assert -1.0 <= learner.predict(t, x) <= 1.0
            learner.update(t, x, float(rng.choice([-1.0, 1.0])))


class TestAlg2:
    def test_requires_binary_class_and_loss(self, real_class, const_class):
        with pytest.raises(InputError):
            Alg2PoissonFTPL(real_class, LossSpec.of("absolute"), 4, n=2.0)
        with pytest.raises(InputError):
            Alg2PoissonFTPL(const_class, LossSpec.of("absolute"), 4, n=2.0)

    def test_proper_predictions(self, partition8, rng):
        learner = Alg2PoissonFTPL(partition8, LossSpec.of("binary_indicator"),
                                  T=10, n=5.0, seed=4)
        for t in range(1, 11):
            x = int(rng.integers(8))
            yhat = learner.predict(t, x)
            assert yhat in (-1.0, 1.0)
            learner.update(t, x, float(rng.choice([-1.0, 1.0])))
        assert learner.stats.call_count == 10

    def test_n_zero_is_ftl(self, partition8, rng):
        a2 = Alg2PoissonFTPL(partition8, LossSpec.of("binary_indicator"),
                             T=6, n=0.0, seed=7)
        ftl = FTL(partition8, LossSpec.of("binary_indicator"), T=6, seed=7)
        for t in range(1, 7):
            x = int(rng.integers(8))
            assert a2.predict(t, x) == ftl.predict(t, x)
            y = float(rng.choice([-1.0, 1.0]))
            a2.update(t, x, y)
            ftl.update(t, x, y)

    def test_input_length_is_history_plus_hallucinations(self, partition8):
        learner = Alg2PoissonFTPL(partition8, LossSpec.of("binary_indicator"),
                                  T=20, n=12.0, seed=1)
        lengths, expected = [], []
        for t in range(1, 21):
            before = learner.stats.total_input_length
            learner.predict(t, t % 8)
            lengths.append(learner.stats.total_input_length - before)
            expected.append((t - 1) + learner.last_hallucination_count)
            learner.update(t, t % 8, 1.0)
        assert lengths == expected

    def test_deterministic_replay(self, partition8):
        runs = []
        for _ in range(2):
            learner = Alg2PoissonFTPL(partition8, LossSpec.of("binary_indicator"),
                                      T=8, n=6.0, seed=13)
            out = []
            for t in range(1, 9):
                out.append(learner.predict(t, t % 8))
                learner.update(t, t % 8, -1.0)
            runs.append(out)
        assert runs[0] == runs[1]


class TestFTL:
    def test_follows_majority(self, const_class):
        learner = FTL(const_class, LossSpec.of("binary_indicator"), T=4)
        learner.update(1, 0, 1.0)
        learner.update(2, 1, 1.0)
        learner.update(3, 0, -1.0)
        assert learner.predict(4, 0) == 1.0

    def test_one_call_per_round(self, const_class):
        learner = FTL(const_class, LossSpec.of("binary_indicator"), T=3)
        for t in range(1, 4):
            learner.predict(t, 0)
        assert learner.stats.call_count == 3


class TestHedge:
    def test_weight_fixture(self, const_class):
        """After one round of losses (0, 1) at eta = ln 2, weights are
        (2/3, 1/3)."""
        learner = HedgeLearner(const_class, LossSpec.of("binary_indicator"),
                               T=4, eta=math.log(2.0))
        learner.update(1, 0, 1.0)  # h=+1 loses 0, h=-1 loses 1
        np.testing.assert_allclose(learner.weights, [2 / 3, 1 / 3])

    def test_hedge_update_function(self):
        w = hedge_update(np.array([0.5, 0.5]), np.array([0.0, 1.0]), math.log(2.0))
        np.testing.assert_allclose(w, [2 / 3, 1 / 3])

    def test_expected_loss(self, const_class):
        learner = HedgeLearner(const_class, LossSpec.of("binary_indicator"),
                               T=4, eta=1.0)
        assert learner.expected_loss(0, 1.0) == pytest.approx(0.5)

    def test_empirical_regret_bound(self, const_class, rng):
        """Expected-loss regret of Hedge stays below sqrt(T ln|H| / 2)."""
        T = 400
        learner = HedgeLearner(const_class, LossSpec.of("binary_indicator"), T=T)
        loss = LossSpec.of("binary_indicator")
        total, best = 0.0, np.zeros(2)
        for t in range(1, T + 1):
            x = int(rng.integers(2))
            y = float(rng.choice([-1.0, 1.0], p=[0.3, 0.7]))
            total += learner.expected_loss(x, y)
            best += [0.0 if y == 1.0 else 1.0, 0.0 if y == -1.0 else 1.0]
            learner.update(t, x, y)
        assert total - best.min() <= math.sqrt(T * math.log(2) / 2) + 1e-9

    def test_rejects_bad_eta(self, const_class):
        with pytest.raises(InputError):
            HedgeLearner(const_class, LossSpec.of("binary_indicator"), T=4, eta=0.0)


class TestDoublingMeta:
    def test_expert_count(self, partition8):
        meta = DoublingMeta(partition8, LossSpec.of("binary_indicator"), T=8,
                            sigma_min=1 / 16, sigma_max=1.0)
        assert len(meta.experts) == 4  # ceil(log2(16))
        single = DoublingMeta(partition8, LossSpec.of("binary_indicator"), T=8,
                              sigma_min=0.5, sigma_max=0.5)
        assert len(single.experts) == 1

    def test_call_accounting_aggregates_experts(self, partition8):
        meta = DoublingMeta(partition8, LossSpec.of("binary_indicator"), T=4,
                            sigma_min=0.25, sigma_max=1.0)
        for t in range(1, 5):
            meta.predict(t, t % 8)
            meta.update(t, t % 8, 1.0)
        assert meta.stats.call_count == 4 * len(meta.experts)

    def test_prediction_comes_from_an_expert(self, partition8):
        meta = DoublingMeta(partition8, LossSpec.of("binary_indicator"), T=4,
                            sigma_min=0.25, sigma_max=1.0, seed=6)
        yhat = meta.predict(1, 3)
        assert yhat in set(meta._last_predictions.tolist()) | {yhat}
        assert yhat in (-1.0, 1.0)

    def test_update_before_predict_rejected(self, partition8):
        meta = DoublingMeta(partition8, LossSpec.of("binary_indicator"), T=4,
                            sigma_min=0.25, sigma_max=1.0)
        with pytest.raises(InputError):
            meta.update(1, 0, 1.0)

    def test_bad_sigma_range(self, partition8):
        with pytest.raises(InputError):
            DoublingMeta(partition8, LossSpec.of("binary_indicator"), T=4,
                         sigma_min=0.5, sigma_max=0.25)
