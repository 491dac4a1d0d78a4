"""Online learners built on the offline oracles.

Implemented learners:

* ``Alg3Transductive`` — hint-aware prediction via two mixed-oracle
  calls per round: the difference of optimal values with the current
  instance labeled -1 vs +1, with doubled Rademacher-labeled copies of
  all future hints.
* ``Alg1Smoothed`` — the same rule against a smoothed adversary, with
  K(T-t) self-generated uniform hints refreshed every round.
* ``Alg2PoissonFTPL`` — proper binary FTPL with a Poisson-distributed
  number of hallucinated uniform samples; one ERM call per round.
* ``FTL`` — unperturbed ERM on history (negative control).
* ``HedgeLearner`` — exponential weights over the enumerated class
  (oracle-free baseline).
* ``DoublingMeta`` — Hedge over geometrically spaced smoothness guesses
  for unknown sigma.

All per-round randomness comes from counter-based streams keyed by
(seed, run, round, purpose), so each round's hint/label noise is fresh
and disjoint from every other round's.
"""

from __future__ import annotations

import math

import numpy as np

from .adversary import HintSchedule
from .core import ExampleMultiset, HypothesisClass, LossKind, LossSpec, loss_eval
from .errors import CapacityError, ContractViolation, InputError
from .oracle import OracleStats, TiePolicy, erm, mixed_opt
from . import rng as rngmod

PRED_TOL = 1e-9


def hint_count(T: int, sigma: float, c_K: float = 100.0) -> int:
    """Number of hints per future round: max(1, ceil(c_K * ln T / sigma))."""
    if T < 1:
        raise InputError("T must be >= 1")
    if not (0.0 < sigma <= 1.0):
        raise InputError(f"sigma must be in (0, 1], got {sigma}")
    return max(1, int(math.ceil(c_K * math.log(T) / sigma)))


def default_n(T: int, sigma: float, domain_size: int, d: int) -> float:
    """Hallucination rate min{T/sqrt(sigma), T*sqrt(|X|/d)}."""
    if T < 1:
        raise InputError("T must be >= 1")
    if not (0.0 < sigma <= 1.0):
        raise InputError(f"sigma must be in (0, 1], got {sigma}")
    if d < 1 or d > domain_size:
        raise InputError(f"need 1 <= d <= |X|, got d={d}, |X|={domain_size}")
    return min(T / math.sqrt(sigma), T * math.sqrt(domain_size / d))


_PTRS_CUTOVER = 30.0


def poisson_sample(mean: float, rng) -> int:
    """Exact Poisson draw.

    Sequential search (inversion by uniform products) below mean 30;
    Hormann's PTRS transformed-rejection sampler above.  Validated
    against the exact PMF by chi-square goodness of fit in tests.
    """
    if mean < 0:
        raise InputError(f"Poisson mean must be nonnegative, got {mean}")
    if mean == 0:
        return 0
    if mean < _PTRS_CUTOVER:
        limit = math.exp(-mean)
        prod = rng.random()
        k = 0
        while prod > limit:
            prod *= rng.random()
            k += 1
        return k
    return _ptrs(mean, rng)


def _ptrs(mu: float, rng) -> int:
    b = 0.931 + 2.53 * math.sqrt(mu)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_mu = math.log(mu)
    while True:
        u = rng.random() - 0.5
        v = rng.random()
        us = 0.5 - abs(u)
        k = int(math.floor((2.0 * a / us + b) * u + mu + 0.43))
        if us >= 0.07 and v <= v_r:
            return k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= k * log_mu - mu - math.lgamma(k + 1)):
            return k


class Learner:
    """Base class: owns history, oracle stats, and per-run RNG keys."""

    name = "learner"
    oracle_calls_per_round = 0

    def __init__(self, hclass: HypothesisClass, loss: LossSpec, T: int,
                 seed: int = 0, run: int = 0,
                 tie: TiePolicy = TiePolicy.LOWEST_INDEX):
        self.hclass = hclass
        self.loss = loss
        self.T = int(T)
        self.seed = int(seed)
        self.run = int(run)
        self.tie = tie
        self.stats = OracleStats()
        self.history = ExampleMultiset()
        self.t = 0

    def _stream(self, t: int, purpose: str):
        return rngmod.stream(self.seed, self.run, t, purpose)

    def predict(self, t: int, x_t: int) -> float:
        raise NotImplementedError

    def update(self, t: int, x_t: int, y_t: float) -> None:
        self.history.add(int(x_t), float(y_t))
        self.t = t


def _rademacher_hint_multiset(xs: np.ndarray, eps: np.ndarray,
                              domain_size: int) -> ExampleMultiset:
    """Aggregate hint instances with +-1 labels into a multiset."""
    codes = xs * 2 + (eps > 0).astype(int)
    counts = np.bincount(codes, minlength=2 * domain_size)
    out = ExampleMultiset()
    for code in np.flatnonzero(counts):
        out.add(int(code // 2), 1.0 if code % 2 else -1.0, int(counts[code]))
    return out


class _HintDifferenceLearner(Learner):
    """Shared prediction rule of the hint-based learners.

    yhat_t = OPT(history; S+S+{(x_t,-1)}) - OPT(history; S+S+{(x_t,+1)})
    where S is the round's Rademacher-labeled hint multiset (two copies
    of each hint), evaluated with two mixed-oracle calls.
    """

    oracle_calls_per_round = 2

    def _hints_for_round(self, t: int) -> ExampleMultiset:
        raise NotImplementedError

    def predict(self, t: int, x_t: int) -> float:
        doubled = ExampleMultiset()
        for (z, e), c in self._hints_for_round(t).items():
            doubled.add(z, e, 2 * c)
        lo = doubled.copy()
        lo.add(int(x_t), -1.0)
        hi = doubled
        hi.add(int(x_t), 1.0)
        _, v_minus = mixed_opt(self.hclass, self.history, lo, self.loss,
                               tie=self.tie, stats=self.stats)
        _, v_plus = mixed_opt(self.hclass, self.history, hi, self.loss,
                              tie=self.tie, stats=self.stats)
        yhat = v_minus - v_plus
        if abs(yhat) > 1.0 + PRED_TOL:
            raise ContractViolation(f"prediction {yhat} escaped [-1, 1]")
        return float(min(1.0, max(-1.0, yhat)))


class Alg3Transductive(_HintDifferenceLearner):
    """Hint-aware learner for the K-hint transductive setting."""

    name = "alg3"

    def __init__(self, hclass, loss, T, hint_schedule: HintSchedule,
                 seed=0, run=0, tie=TiePolicy.LOWEST_INDEX):
        super().__init__(hclass, loss, T, seed, run, tie)
        if hint_schedule.T < T:
            raise InputError("hint schedule shorter than the horizon")
        self.hint_schedule = hint_schedule

    def predict(self, t: int, x_t: int) -> float:
        if int(x_t) not in self.hint_schedule.row(t):
            raise ContractViolation(f"x_t={x_t} not in the round-{t} hint multiset")
        return super().predict(t, x_t)

    def _hints_for_round(self, t: int) -> ExampleMultiset:
        future = self.hint_schedule.rows[t:self.T].reshape(-1)
        eps_rng = self._stream(t, "epsilons")
        eps = eps_rng.integers(0, 2, size=future.size) * 2 - 1
        return _rademacher_hint_multiset(future, eps, self.hclass.domain_size)


class Alg1Smoothed(_HintDifferenceLearner):
    """Smoothed-adversary learner: self-generates K(T-t) fresh uniform
    hints with fresh Rademacher labels every round."""

    name = "alg1"

    def __init__(self, hclass, loss, T, sigma: float, K: int | None = None,
                 c_K: float = 100.0, max_hints_per_round: int | None = None,
                 seed=0, run=0, tie=TiePolicy.LOWEST_INDEX):
        super().__init__(hclass, loss, T, seed, run, tie)
        if not (0.0 < sigma <= 1.0):
            raise InputError(f"sigma must be in (0, 1], got {sigma}")
        self.sigma = sigma
        self.c_K = c_K
        self.K = hint_count(T, sigma, c_K) if K is None else int(K)
        if self.K < 1:
            raise InputError("K must be >= 1")
        self.max_hints_per_round = max_hints_per_round

    def _hints_for_round(self, t: int) -> ExampleMultiset:
        m = self.K * (self.T - t)
        if self.max_hints_per_round is not None and m > self.max_hints_per_round:
            raise CapacityError(
                f"round {t} needs {m} hints, above the cap {self.max_hints_per_round}"
            )
        hint_rng = self._stream(t, "hints")
        eps_rng = self._stream(t, "epsilons")
        xs = hint_rng.integers(0, self.hclass.domain_size, size=m)
        eps = eps_rng.integers(0, 2, size=m) * 2 - 1
        return _rademacher_hint_multiset(xs, eps, self.hclass.domain_size)


class Alg2PoissonFTPL(Learner):
    """Proper Poissonized FTPL for binary classes: ERM over history plus
    Poi(n) hallucinated uniform samples with random +-1 labels."""

    name = "alg2"
    oracle_calls_per_round = 1

    def __init__(self, hclass, loss, T, n: float, seed=0, run=0,
                 tie=TiePolicy.LOWEST_INDEX):
        if not hclass.binary:
            raise InputError("Poissonized FTPL requires a binary class")
        if loss.kind is not LossKind.BINARY_INDICATOR:
            raise InputError("Poissonized FTPL requires the binary indicator loss")
        if n < 0:
            raise InputError("n must be nonnegative")
        super().__init__(hclass, loss, T, seed, run, tie)
        self.n = float(n)
        self.last_hallucination_count = 0

    def predict(self, t: int, x_t: int) -> float:
        rng = self._stream(t, "hallucinate")
        N = poisson_sample(self.n, rng)
        self.last_hallucination_count = N
        S = self.history.copy()
        if N > 0:
            xs = rng.integers(0, self.hclass.domain_size, size=N)
            eps = rng.integers(0, 2, size=N) * 2 - 1
            S.extend(_rademacher_hint_multiset(xs, eps, self.hclass.domain_size))
        idx, _ = erm(self.hclass, S, self.loss, tie=self.tie, stats=self.stats,
                     query_point=int(x_t), rng=self._stream(t, "tie"))
        return float(self.hclass.values[idx, x_t])


class FTL(Learner):
    """Follow-the-leader: unperturbed ERM on the history."""

    name = "ftl"
    oracle_calls_per_round = 1

    def predict(self, t: int, x_t: int) -> float:
        idx, _ = erm(self.hclass, self.history, self.loss, tie=self.tie,
                     stats=self.stats, query_point=int(x_t),
                     rng=self._stream(t, "tie"))
        return float(self.hclass.values[idx, x_t])


class HedgeLearner(Learner):
    """Exponential weights over the enumerated class; no oracle calls.

    Predicts with a hypothesis sampled from the current weights and
    exposes the full weight vector and expected loss for analysis.
    """

    name = "hedge"
    oracle_calls_per_round = 0

    def __init__(self, hclass, loss, T, eta: float | None = None,
                 seed=0, run=0, tie=TiePolicy.LOWEST_INDEX):
        super().__init__(hclass, loss, T, seed, run, tie)
        if eta is None:
            eta = math.sqrt(8.0 * math.log(len(hclass)) / max(T, 1))
        if eta <= 0:
            raise InputError("Hedge learning rate must be positive")
        self.eta = float(eta)
        self.cumulative_losses = np.zeros(len(hclass))

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(-self.eta * (self.cumulative_losses - self.cumulative_losses.min()))
        return w / w.sum()

    def predict(self, t: int, x_t: int) -> float:
        rng = self._stream(t, "hedge")
        idx = int(rng.choice(len(self.hclass), p=self.weights))
        return float(self.hclass.values[idx, x_t])

    def expected_loss(self, x_t: int, y_t: float) -> float:
        per_h = loss_eval(self.loss, self.hclass.values[:, x_t], float(y_t))
        return float(self.weights @ per_h)

    def update(self, t: int, x_t: int, y_t: float) -> None:
        self.cumulative_losses += loss_eval(
            self.loss, self.hclass.values[:, x_t], float(y_t))
        super().update(t, x_t, y_t)


def hedge_update(weights: np.ndarray, losses: np.ndarray, eta: float) -> np.ndarray:
    """One multiplicative-weights step; returns the new normalized weights."""
    w = np.asarray(weights, dtype=float) * np.exp(-eta * np.asarray(losses, dtype=float))
    return w / w.sum()


class DoublingMeta(Learner):
    """Unknown-sigma meta-learner: Hedge over base learners run at
    geometrically spaced smoothness guesses sigma_i = 2^i * sigma_min."""

    name = "doubling"

    def __init__(self, hclass, loss, T, sigma_min: float, sigma_max: float,
                 base: str = "alg2", seed=0, run=0,
                 tie=TiePolicy.LOWEST_INDEX, d: int | None = None, **base_kwargs):
        if not (0.0 < sigma_min <= sigma_max <= 1.0):
            raise InputError("need 0 < sigma_min <= sigma_max <= 1")
        super().__init__(hclass, loss, T, seed, run, tie)
        n_experts = max(1, math.ceil(math.log2(sigma_max / sigma_min)))
        if sigma_min == sigma_max:
            n_experts = 1
        self.sigmas = [min(sigma_max, (2.0 ** i) * sigma_min) for i in range(n_experts)]
        d_eff = hclass.declared_dim if d is None else d
        self.experts: list[Learner] = []
        for i, s in enumerate(self.sigmas):
            if base == "alg2":
                n = default_n(T, s, hclass.domain_size, max(1, d_eff))
                expert = Alg2PoissonFTPL(hclass, loss, T, n=n, seed=seed,
                                         run=run * 1000 + i + 1, tie=tie)
            elif base == "alg1":
                expert = Alg1Smoothed(hclass, loss, T, sigma=s, seed=seed,
                                      run=run * 1000 + i + 1, tie=tie, **base_kwargs)
            else:
                raise InputError(f"unsupported base learner {base!r}")
            self.experts.append(expert)
        self.oracle_calls_per_round = (
            len(self.experts) * self.experts[0].oracle_calls_per_round)
        self.eta = math.sqrt(8.0 * math.log(max(2, len(self.experts))) / max(T, 1))
        self.expert_losses = np.zeros(len(self.experts))
        self._last_predictions: np.ndarray | None = None

    @property
    def expert_weights(self) -> np.ndarray:
        w = np.exp(-self.eta * (self.expert_losses - self.expert_losses.min()))
        return w / w.sum()

    def predict(self, t: int, x_t: int) -> float:
        preds = np.array([e.predict(t, x_t) for e in self.experts])
        self._last_predictions = preds
        for e in self.experts:
            self.stats.call_count += e.stats.call_count
            self.stats.total_input_length += e.stats.total_input_length
            self.stats.max_input_length = max(self.stats.max_input_length,
                                              e.stats.max_input_length)
            e.stats = OracleStats()
        rng = self._stream(t, "hedge")
        idx = int(rng.choice(len(self.experts), p=self.expert_weights))
        return float(preds[idx])

    def update(self, t: int, x_t: int, y_t: float) -> None:
        if self._last_predictions is None:
            raise InputError("update called before predict")
        for i, e in enumerate(self.experts):
            self.expert_losses[i] += loss_eval(
                self.loss, float(self._last_predictions[i]), float(y_t))
            e.update(t, x_t, y_t)
        self._last_predictions = None
        super().update(t, x_t, y_t)
