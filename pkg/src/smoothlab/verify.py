"""Executable numerical checks of the supporting lemmas.

Covers:

* the coupling procedure that extracts, from m draws of a base
  distribution Q, one sample whose conditional law is exactly a target
  P with bounded likelihood ratio dP/dQ <= 1/sigma;
* exact total-variation and chi-square computations for the
  product-Poisson hallucination model and its single-shift mixtures;
* regularized Rademacher complexity, its monotonicity in the dataset,
  and the relaxation values used by the learners;
* exact admissibility checks of the hint-difference prediction rule on
  tiny enumerable instances (with follow-the-leader as the negative
  control);
* the eta/beta budget formulas and a Monte Carlo generalization-gap
  estimate.

Exact-mode results carry a rigorous truncation error bound instead of
a statistical tolerance.
"""

from __future__ import annotations

import itertools
import json
import math
from fractions import Fraction
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import stats as spstats

from .core import (
    ExampleMultiset,
    HypothesisClass,
    LossSpec,
    SmoothDistribution,
    loss_eval,
)
from .errors import CapacityError, InputError
from .oracle import TiePolicy, erm, mixed_opt
from .learner import poisson_sample

TRUNC_TAIL = 1e-12
EXACT_RADEMACHER_CAP = 16
ADMISSIBILITY_CAPS = {"domain": 4, "T": 3, "K": 2, "class": 8}


@dataclass
class VerificationReport:
    """Outcome of one lemma check."""

    name: str
    mode: str  # "exact" or "monte_carlo"
    measured: dict
    bound: float | None
    tolerance: float
    trials: int | None
    passed: bool
    details: str = ""

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "monte_carlo"):
            raise InputError(f"unknown report mode {self.mode!r}")
        if self.mode == "exact" and self.trials is not None:
            raise InputError("exact reports carry no trial count")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "measured": {k: float(v) for k, v in self.measured.items()},
            "bound": None if self.bound is None else float(self.bound),
            "tolerance": float(self.tolerance),
            "trials": self.trials,
            "passed": bool(self.passed),
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class RelaxationMode(Enum):
    TRANSDUCTIVE = "transductive"
    SMOOTHED_REAL = "smoothed_real"
    FTPL = "ftpl"


@dataclass(frozen=True)
class RelaxationParams:
    mode: RelaxationMode
    G: float
    T: int
    t: int
    K: int = 0
    n: float = 0.0
    sigma: float = 1.0
    c: float = 1.0
    d: int = 1

    def __post_init__(self) -> None:
        if not (0 <= self.t <= self.T):
            raise InputError("need 0 <= t <= T")
        if self.mode is RelaxationMode.SMOOTHED_REAL and self.K < 1:
            raise InputError("smoothed_real mode needs K >= 1")
        if self.mode is RelaxationMode.FTPL and self.n < 0:
            raise InputError("ftpl mode needs n >= 0")


# ---------------------------------------------------------------------------
# Coupling (bounded likelihood ratio -> exact conditional law)
# ---------------------------------------------------------------------------

def _check_ratio(P: np.ndarray, Q: np.ndarray, sigma: float) -> None:
    if not (0.0 < sigma <= 1.0):
        raise InputError(f"sigma must be in (0, 1], got {sigma}")
    bad = (P > 0) & (sigma * P > Q + 1e-12)
    if np.any(bad):
        raise InputError("likelihood ratio dP/dQ exceeds 1/sigma on the support")


def coupling_select(samples, P, Q, sigma: float, rng):
    """One run of the selection procedure.

    Each sample X_i drawn from Q is accepted independently with
    probability sigma*dP/dQ(X_i); on the success event E (at least one
    acceptance) the returned index I is uniform over the accepted set,
    and X_I | E, X_\\I is distributed as P.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    _check_ratio(P, Q, sigma)
    samples = np.asarray(samples, dtype=int)
    p_accept = sigma * P[samples] / Q[samples]
    accepted = np.flatnonzero(rng.random(samples.size) < p_accept)
    if accepted.size == 0:
        return False, None
    return True, int(rng.choice(accepted))


def coupling_montecarlo(P, Q, sigma: float, m: int, trials: int, rng,
                        tv_tol: float = 0.02) -> VerificationReport:
    """Estimate Pr[E^c] and the conditional law of X_I given E.

    Passes when the empirical failure rate sits inside the 4-sigma
    binomial band around (1-sigma)^m and the TV distance between the
    empirical conditional law of X_I and P is at most `tv_tol`.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    _check_ratio(P, Q, sigma)
    xs = rng.choice(P.size, size=(trials, m), p=Q)
    accept = rng.random((trials, m)) < sigma * P[xs] / Q[xs]
    success = accept.any(axis=1)
    # uniform pick among accepted entries per row: argmax of uniforms
    # masked to the accepted set
    keys = np.where(accept, rng.random((trials, m)), -1.0)
    picked = xs[np.arange(trials), np.argmax(keys, axis=1)]
    selected = picked[success]

    fail_rate = 1.0 - success.mean()
    fail_exact = (1.0 - sigma) ** m
    band = 4.0 * math.sqrt(max(fail_exact * (1 - fail_exact), 1e-300) / trials)
    emp = np.bincount(selected, minlength=P.size) / max(selected.size, 1)
    tv = 0.5 * np.abs(emp - P).sum()

    passed = (abs(fail_rate - fail_exact) <= band) and (tv <= tv_tol)
    return VerificationReport(
        name="coupling_montecarlo",
        mode="monte_carlo",
        measured={
            "fail_rate": fail_rate,
            "fail_exact": fail_exact,
            "fail_band": band,
            "conditional_tv": tv,
        },
        bound=tv_tol,
        tolerance=tv_tol,
        trials=trials,
        passed=bool(passed),
        details=f"m={m}, sigma={sigma}",
    )


# ---------------------------------------------------------------------------
# Regularized Rademacher complexity and monotonicity
# ---------------------------------------------------------------------------

def _sign_matrix(m: int, start: int, stop: int) -> np.ndarray:
    """Rows `start:stop` of the 2^m x m matrix of +-1 assignments."""
    codes = np.arange(start, stop, dtype=np.int64)[:, None]
    return 1.0 - 2.0 * ((codes >> np.arange(m)) & 1)


def rademacher_estimate(hclass: HypothesisClass, Z, phi, mode: str = "exact",
                        trials: int = 10_000, rng=None) -> float:
    """E_eps[ sup_h { sum_i eps_i h(z_i) + phi(h) } ].

    Exact mode enumerates all 2^|Z| sign assignments (|Z| <= 16);
    Monte Carlo mode averages over sampled assignments.
    """
    Z = np.asarray(Z, dtype=int)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (len(hclass),):
        raise InputError("phi must assign one real to each hypothesis")
    vals = hclass.values[:, Z]  # (H, m)
    m = Z.size
    if m == 0:
        return float(phi.max())
    if mode == "exact":
        if m > EXACT_RADEMACHER_CAP:
            raise CapacityError(f"|Z|={m} exceeds the exact enumeration cap")
        total = 0.0
        chunk = 1 << 12
        for start in range(0, 1 << m, chunk):
            stop = min(start + chunk, 1 << m)
            signs = _sign_matrix(m, start, stop)  # (B, m)
            sups = (signs @ vals.T + phi).max(axis=1)
            total += sups.sum()
        return total / (1 << m)
    if mode == "mc":
        if rng is None:
            raise InputError("Monte Carlo mode needs an rng")
        signs = rng.integers(0, 2, size=(trials, m)) * 2.0 - 1.0
        return float((signs @ vals.T + phi).max(axis=1).mean())
    raise InputError(f"unknown mode {mode!r}")


def _rademacher_exact_rational(vals, phi, Z) -> Fraction:
    """2^|Z| enumeration of E_eps[sup_h{sum eps h(z) + phi(h)}] in exact
    rational arithmetic (floats are exact rationals, so no rounding)."""
    m = len(Z)
    table = [[Fraction(vals[h, z]) for z in Z] for h in range(vals.shape[0])]
    phi_f = [Fraction(p) for p in phi]
    total = Fraction(0)
    for code in range(1 << m):
        signs = [1 if (code >> i) & 1 else -1 for i in range(m)]
        total += max(
            sum((s * row[i] for i, s in enumerate(signs)), start=phi_f[h])
            for h, row in enumerate(table))
    return total / (1 << m)


def monotonicity_check(hclass: HypothesisClass, Z, phi, x: int) -> VerificationReport:
    """Exact check that the regularized complexity grows when one point
    is appended to Z.  Evaluated in exact rational arithmetic so the
    zero-tolerance comparison is free of float rounding."""
    Z = np.asarray(Z, dtype=int)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (len(hclass),):
        raise InputError("phi must assign one real to each hypothesis")
    if Z.size + 1 > EXACT_RADEMACHER_CAP:
        raise CapacityError(f"|Z|+1={Z.size + 1} exceeds the exact enumeration cap")
    before = _rademacher_exact_rational(hclass.values, phi, Z.tolist())
    after = _rademacher_exact_rational(hclass.values, phi, Z.tolist() + [int(x)])
    return VerificationReport(
        name="rademacher_monotonicity",
        mode="exact",
        measured={"before": float(before), "after": float(after)},
        bound=None,
        tolerance=0.0,
        trials=None,
        passed=bool(before <= after),
        details=f"|Z|={len(Z)}, x={x}",
    )


# ---------------------------------------------------------------------------
# Relaxation values
# ---------------------------------------------------------------------------

def _history_loss_table(hclass: HypothesisClass, history: ExampleMultiset,
                        loss: LossSpec) -> np.ndarray:
    """Cumulative loss of each hypothesis on the history."""
    out = np.zeros(len(hclass))
    for (x, y), c in history.items():
        out += c * loss_eval(loss, hclass.values[:, x], y)
    return out


def _centered_history_table(hclass: HypothesisClass,
                            history: ExampleMultiset) -> np.ndarray:
    """Sum of -y*h(x)/2 over the history, per hypothesis."""
    out = np.zeros(len(hclass))
    for (x, y), c in history.items():
        out += c * (-y * hclass.values[:, x] / 2.0)
    return out


def relaxation_value(params: RelaxationParams, hclass: HypothesisClass,
                     history: ExampleMultiset, loss: LossSpec,
                     hints=None, trials: int = 2000, rng=None) -> float:
    """Value of the relaxation potential after history s_{1:t}.

    transductive:  2G * E_eps sup_h { sum eps h(z) - L^r(h, history) }
                   over the supplied future hints (exact when small).
    smoothed_real: the same with K(T-t) fresh uniform hints, estimated
                   by Monte Carlo, plus 2G*beta*(T-t).
    ftpl:          E over Poisson hallucinations of
                   sup_h(-sum Lt(h) - L(h, history)) + eta*(T-t),
                   with the centered binary loss L(h,(x,y)) = -y h(x)/2.
    """
    G = params.G
    hist_loss = _history_loss_table(hclass, history, loss)

    if params.mode is RelaxationMode.TRANSDUCTIVE:
        Z = np.asarray([] if hints is None else hints, dtype=int)
        phi = -hist_loss / (2.0 * G)
        if Z.size <= EXACT_RADEMACHER_CAP:
            return 2.0 * G * rademacher_estimate(hclass, Z, phi, mode="exact")
        return 2.0 * G * rademacher_estimate(hclass, Z, phi, mode="mc",
                                             trials=trials, rng=rng)

    if params.mode is RelaxationMode.SMOOTHED_REAL:
        m = params.K * (params.T - params.t)
        phi = -hist_loss / (2.0 * G)
        beta = beta_budget(params.T, params.K, params.sigma)
        if m == 0:
            return 2.0 * G * float(phi.max())
        if rng is None:
            raise InputError("smoothed_real mode needs an rng")
        acc = 0.0
        for _ in range(trials):
            V = rng.integers(0, hclass.domain_size, size=m)
            eps = rng.integers(0, 2, size=m) * 2.0 - 1.0
            acc += ((eps @ hclass.values[:, V].T) + phi).max()
        return 2.0 * G * acc / trials + 2.0 * G * beta * (params.T - params.t)

    if params.mode is RelaxationMode.FTPL:
        phi = -_centered_history_table(hclass, history)
        eta = eta_budget(params.n, params.sigma, params.d, params.T,
                         params.c) if params.n > 0 else 0.0
        slack = eta * (params.T - params.t)
        if params.n == 0:
            return float(phi.max()) + slack
        if rng is None:
            raise InputError("ftpl mode needs an rng")
        acc = 0.0
        for _ in range(trials):
            N = poisson_sample(params.n, rng)
            if N == 0:
                acc += phi.max()
                continue
            xs = rng.integers(0, hclass.domain_size, size=N)
            ys = rng.integers(0, 2, size=N) * 2.0 - 1.0
            # -sum L(h, s~) = sum y h(x)/2
            halluc = (ys / 2.0) @ hclass.values[:, xs].T
            acc += (halluc + phi).max()
        return acc / trials + slack

    raise InputError(f"unknown relaxation mode {params.mode!r}")


# ---------------------------------------------------------------------------
# Admissibility on tiny enumerable instances
# ---------------------------------------------------------------------------

def smooth_polytope_vertices(domain_size: int, sigma: float) -> list[np.ndarray]:
    """Extreme points of {D : D(x) <= 1/(sigma*|X|) for all x}.

    For integral sigma*|X| = k these are the uniform distributions over
    k-subsets; otherwise each vertex puts the cap on floor(sigma*|X|)
    atoms and the remainder on one more.
    """
    if domain_size > 12:
        raise CapacityError("vertex enumeration capped at |X| <= 12")
    if not (0.0 < sigma <= 1.0):
        raise InputError(f"sigma must be in (0, 1], got {sigma}")
    cap = 1.0 / (sigma * domain_size)
    k = sigma * domain_size
    out = []
    if abs(k - round(k)) < 1e-9:
        k = int(round(k))
        for subset in itertools.combinations(range(domain_size), k):
            v = np.zeros(domain_size)
            v[list(subset)] = cap
            out.append(v)
        return out
    m = int(math.floor(k))
    rem = 1.0 - m * cap
    for subset in itertools.combinations(range(domain_size), m):
        for b in range(domain_size):
            if b in subset:
                continue
            v = np.zeros(domain_size)
            v[list(subset)] = cap
            v[b] = rem
            out.append(v)
    return out


def _transductive_rel(hclass, history: ExampleMultiset, loss: LossSpec,
                      Z: np.ndarray) -> float:
    """Eq-form relaxation: E_eps sup_h {2G sum eps h(z) - sum l(h(x),y)}."""
    G = loss.lipschitz_G
    phi = -_history_loss_table(hclass, history, loss) / (2.0 * G)
    return 2.0 * G * rademacher_estimate(hclass, Z, phi, mode="exact")


def _alg3_prediction_given_eps(hclass, history, loss, future_hints, eps, x_t,
                               tie: TiePolicy) -> float:
    """The hint-difference rule for one fixed Rademacher assignment."""
    doubled = ExampleMultiset()
    for z, e in zip(future_hints, eps):
        doubled.add(int(z), float(e), 2)
    lo = doubled.copy()
    lo.add(int(x_t), -1.0)
    hi = doubled.copy()
    hi.add(int(x_t), 1.0)
    _, v_minus = mixed_opt(hclass, history, lo, loss, tie=tie)
    _, v_plus = mixed_opt(hclass, history, hi, loss, tie=tie)
    return float(min(1.0, max(-1.0, v_minus - v_plus)))


def admissibility_check(learner_kind: str, hclass: HypothesisClass,
                        loss: LossSpec, hint_schedule,
                        tie: TiePolicy = TiePolicy.PREFER_NEGATIVE,
                        tol: float = 1e-12) -> VerificationReport:
    """Exact per-round admissibility of a learner against the
    hint-based (transductive) relaxation.

    Enumerates every prefix (instances from the hint rows, labels in
    {-1,+1}), the full Rademacher assignment of the learner's internal
    randomness, and the point masses of the hint support, and reports
    the minimum slack

        Rel(s_{1:t-1}) - max_{x in Z_t} max_{y in {-1,+1}}
            { E_{yhat ~ Q_t} l(yhat, y) + Rel(s_{1:t-1} + (x,y)) }

    together with the final-round identity Rel(s_{1:T}) = -inf_h L.
    """
    T = hint_schedule.T
    K = hint_schedule.K
    if (hclass.domain_size > ADMISSIBILITY_CAPS["domain"]
            or T > ADMISSIBILITY_CAPS["T"] or K > ADMISSIBILITY_CAPS["K"]
            or len(hclass) > ADMISSIBILITY_CAPS["class"]):
        raise CapacityError("instance exceeds the exact-enumeration caps")
    if not hclass.binary:
        raise CapacityError("exact admissibility check requires a binary class")
    if learner_kind not in ("alg3", "ftl"):
        raise InputError(f"unsupported learner kind {learner_kind!r}")

    min_slack = math.inf
    worst = ""
    for t in range(1, T + 1):
        xs_choices = [np.unique(hint_schedule.row(i)) for i in range(1, t)]
        future = hint_schedule.rows[t:T].reshape(-1)
        for xs in itertools.product(*xs_choices):
            for ys in itertools.product((-1.0, 1.0), repeat=t - 1):
                history = ExampleMultiset(zip(map(int, xs), ys))
                rel_prev = _transductive_rel(
                    hclass, history, loss, hint_schedule.rows[t - 1:T].reshape(-1))
                lhs = -math.inf
                for x_t in np.unique(hint_schedule.row(t)):
                    preds = _learner_action_distribution(
                        learner_kind, hclass, history, loss, future, int(x_t), tie)
                    for y_t in (-1.0, 1.0):
                        exp_loss = sum(p * loss_eval(loss, yhat, y_t)
                                       for yhat, p in preds)
                        hist_next = history.copy()
                        hist_next.add(int(x_t), y_t)
                        rel_next = _transductive_rel(hclass, hist_next, loss, future)
                        lhs = max(lhs, exp_loss + rel_next)
                slack = rel_prev - lhs
                if slack < min_slack:
                    min_slack = slack
                    worst = f"t={t}, xs={xs}, ys={ys}"

    cond2_gap = _condition2_gap(hclass, loss, hint_schedule)
    passed = (min_slack >= -tol) and (abs(cond2_gap) <= tol)
    return VerificationReport(
        name=f"admissibility_{learner_kind}",
        mode="exact",
        measured={"min_slack": min_slack, "condition2_gap": cond2_gap},
        bound=0.0,
        tolerance=tol,
        trials=None,
        passed=bool(passed),
        details=worst,
    )


def _learner_action_distribution(kind, hclass, history, loss, future_hints,
                                 x_t, tie):
    """Exact law of yhat_t as (value, probability) pairs."""
    if kind == "ftl":
        idx, _ = erm(hclass, history, loss, tie=tie, query_point=x_t)
        return [(float(hclass.values[idx, x_t]), 1.0)]
    m = len(future_hints)
    if m == 0:
        yhat = _alg3_prediction_given_eps(hclass, history, loss, future_hints,
                                          [], x_t, tie)
        return [(yhat, 1.0)]
    preds = []
    for eps in itertools.product((-1.0, 1.0), repeat=m):
        preds.append(_alg3_prediction_given_eps(
            hclass, history, loss, future_hints, eps, x_t, tie))
    p = 1.0 / len(preds)
    return [(yhat, p) for yhat in preds]


def _condition2_gap(hclass, loss, hint_schedule) -> float:
    """max over full sequences of |Rel(s_{1:T}) + inf_h L(h, s_{1:T})|."""
    T = hint_schedule.T
    gap = 0.0
    xs_choices = [np.unique(hint_schedule.row(i)) for i in range(1, T + 1)]
    for xs in itertools.product(*xs_choices):
        for ys in itertools.product((-1.0, 1.0), repeat=T):
            seq = ExampleMultiset(zip(map(int, xs), ys))
            rel = _transductive_rel(hclass, seq, loss, np.array([], dtype=int))
            best = _history_loss_table(hclass, seq, loss).min()
            gap = max(gap, abs(rel + best))
    return gap


# ---------------------------------------------------------------------------
# Poisson TV / chi-square machinery
# ---------------------------------------------------------------------------

class ExactValue(NamedTuple):
    """An exactly computed quantity with a rigorous truncation bound."""

    value: float
    error_bound: float


def _poisson_support(lam: float, tail: float = TRUNC_TAIL) -> tuple[np.ndarray, np.ndarray]:
    """Values 0..M covering all but `tail` of Poi(lam), with their pmf."""
    if lam == 0:
        return np.array([0]), np.array([1.0])
    M = int(spstats.poisson.ppf(1.0 - tail / 4.0, lam)) + 2
    ks = np.arange(M + 1)
    return ks, spstats.poisson.pmf(ks, lam)


def tv_exact_poisson(n: float, domain_size: int, D: SmoothDistribution,
                     labeling=None) -> ExactValue:
    """Exact TV between the product-Poisson hallucination law P and the
    mixture E_{x* ~ D}[Q_{x*}] that shifts coordinate (x*, y(x*)) by one.

    Coordinates are i.i.d. Poi(n/2|X|); only the |X| coordinates matched
    by the labeling enter the likelihood ratio, so

        TV = (1/2) E_P | sum_x D(x) * (2|X| n_{y(x)}(x) / n) - 1 |

    evaluated by enumerating the relevant coordinates with per-
    coordinate tails below 1e-12.  The returned error bound covers the
    truncated mass of both P and Q.
    """
    if domain_size > 4:
        raise CapacityError("exact Poisson TV capped at |X| <= 4")
    if len(D.probs) != domain_size:
        raise InputError("distribution size disagrees with the domain")
    if labeling is not None and len(labeling) != domain_size:
        raise InputError("labeling must cover the domain")
    if n <= 0:
        # Poi(0) is the point mass at zero; its unit shift is disjoint.
        return ExactValue(1.0, 0.0)

    lam = n / (2.0 * domain_size)
    weights = np.asarray(D.probs, dtype=float)
    atoms = np.flatnonzero(weights > 0)
    coeffs = weights[atoms] * (2.0 * domain_size / n)

    ks, pmf = _poisson_support(lam)
    covered_P = pmf.sum() ** atoms.size
    # Under Q the shifted coordinate needs one more unit of support.
    covered_Q_shift = spstats.poisson.pmf(np.arange(ks.size), lam)[:-1].sum()
    covered_Q = covered_Q_shift * pmf.sum() ** (atoms.size - 1)
    err = 0.5 * ((1.0 - covered_P) + (1.0 - covered_Q))

    # accumulate the partial sums over all but the last coordinate
    sums = np.zeros(1)
    probs = np.ones(1)
    for c in coeffs[:-1]:
        sums = (sums[:, None] + c * ks[None, :]).reshape(-1)
        probs = (probs[:, None] * pmf[None, :]).reshape(-1)
    total = 0.0
    c_last = coeffs[-1]
    for k, p in zip(ks, pmf):
        total += p * float(probs @ np.abs(sums + c_last * k - 1.0))
    return ExactValue(0.5 * total, float(err))


def chi2_mixture(n: float, domain_size: int, D: SmoothDistribution) -> float:
    """Closed-form chi-square divergence chi^2(E_{x*~D}[Q_{x*}], P)
    = (2|X|/n) * sum_x D(x)^2 for the product-Poisson model."""
    if n <= 0:
        raise InputError("n must be positive")
    p = np.asarray(D.probs, dtype=float)
    return float((2.0 * domain_size / n) * (p @ p))


def chi2_mixture_direct(n: float, domain_size: int, D: SmoothDistribution) -> float:
    """The same divergence via truncated numerical evaluation of the
    mixture identity E_{x1,x2 ~ D}[E_P(Q_{x1} Q_{x2} / P^2)] - 1."""
    if n <= 0:
        raise InputError("n must be positive")
    lam = n / (2.0 * domain_size)
    c = 2.0 * domain_size / n
    ks, pmf = _poisson_support(lam, tail=1e-14)
    first = float(pmf @ (c * ks))           # E[c N]
    second = float(pmf @ (c * ks) ** 2)     # E[(c N)^2]
    p = np.asarray(D.probs, dtype=float)
    collision = float(p @ p)
    return collision * second + (1.0 - collision) * first ** 2 - 1.0


def shifted_poisson_tv(lam: float) -> float:
    """Exact TV between Poi(lam) and its unit right-shift."""
    if lam < 0:
        raise InputError("lambda must be nonnegative")
    if lam == 0:
        return 1.0
    # TV(P, shift(P)) = sum_k max(P(k) - P(k-1), 0); the pmf ratio
    # P(k)/P(k-1) = lam/k crosses 1 at k = lam, so the positive part
    # telescopes to P(floor(lam)) and the truncated sum is exact up to
    # the enumeration tail.
    ks, pmf = _poisson_support(lam, tail=1e-14)
    shifted = np.concatenate([[0.0], pmf[:-1]])
    return float(np.clip(pmf - shifted, 0.0, None).sum())


# ---------------------------------------------------------------------------
# Budget formulas
# ---------------------------------------------------------------------------

def eta_budget(n: float, sigma: float, d: int, T: int, c: float = 1.0) -> float:
    """Per-round stability budget
    1/sqrt(n*sigma) + c*sqrt(d ln T/(n*sigma)) + n*sigma/(4T^2 ln T) + e^{-n/8}."""
    if n <= 0:
        raise InputError("n must be positive")
    if T < 2:
        raise InputError("T must be >= 2")
    if not (0.0 < sigma <= 1.0):
        raise InputError(f"sigma must be in (0, 1], got {sigma}")
    ns = n * sigma
    lnT = math.log(T)
    return (1.0 / math.sqrt(ns) + c * math.sqrt(d * lnT / ns)
            + ns / (4.0 * T * T * lnT) + math.exp(-n / 8.0))


def beta_budget(T: int, K: int, sigma: float) -> float:
    """Coupling failure budget 10*T*K*(1-sigma)^K."""
    if T < 1 or K < 1:
        raise InputError("T and K must be >= 1")
    if not (0.0 < sigma <= 1.0):
        raise InputError(f"sigma must be in (0, 1], got {sigma}")
    return 10.0 * T * K * (1.0 - sigma) ** K


# ---------------------------------------------------------------------------
# Generalization gap (Monte Carlo)
# ---------------------------------------------------------------------------

def generalization_gap_mc(hclass: HypothesisClass, D: SmoothDistribution,
                          label_table, history: ExampleMultiset, n: float,
                          trials: int, rng, T: int = 2, c: float = 1.0,
                          tie: TiePolicy = TiePolicy.LOWEST_INDEX) -> VerificationReport:
    """Monte Carlo estimate of the modified generalization error
    E[L(h', s') - L(h', s)] with h' the ERM trained on
    history + hallucination + {s}, against the stated budget."""
    if not hclass.binary:
        raise InputError("generalization check requires a binary class")
    label_table = np.asarray(label_table, dtype=float)
    probs = D.array
    loss = LossSpec.of("binary_indicator")
    gaps = np.zeros(trials)
    for i in range(trials):
        S = history.copy()
        N = poisson_sample(n, rng)
        if N > 0:
            xs = rng.integers(0, hclass.domain_size, size=N)
            ys = rng.integers(0, 2, size=N) * 2 - 1
            for x, y in zip(xs.tolist(), ys.tolist()):
                S.add(int(x), float(y))
        x_t = int(rng.choice(hclass.domain_size, p=probs))
        x_p = int(rng.choice(hclass.domain_size, p=probs))
        y_t, y_p = float(label_table[x_t]), float(label_table[x_p])
        S.add(x_t, y_t)
        idx, _ = erm(hclass, S, loss, tie=tie)
        h = hclass.values[idx]
        # centered loss L(h,(x,y)) = -y h(x)/2
        gaps[i] = (-y_p * h[x_p] / 2.0) - (-y_t * h[x_t] / 2.0)
    mean = float(gaps.mean())
    stderr = float(gaps.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    lnT = math.log(max(T, 2))
    budget = (c * math.sqrt(hclass.declared_dim * lnT / (n * D.sigma))
              + n * D.sigma / (4.0 * T * T * lnT) + math.exp(-n / 8.0))
    passed = mean <= budget + 3.0 * stderr
    return VerificationReport(
        name="generalization_gap",
        mode="monte_carlo",
        measured={"gap": mean, "stderr": stderr},
        bound=budget,
        tolerance=3.0 * stderr,
        trials=trials,
        passed=bool(passed),
        details=f"n={n}, sigma={D.sigma}, d={hclass.declared_dim}",
    )
