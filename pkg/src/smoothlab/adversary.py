"""Adaptive adversaries: smoothed and hint-constrained constructions.

An adversary commits, at the top of each round, to a distribution over
instances together with a full label table over the domain.  The label
for the realized instance is read off that table only after the learner
has predicted, which enforces simultaneity: the adversary can adapt to
everything up to round t-1 but not to the current prediction.

Smooth kinds carry a smoothness certificate sigma checked every round;
hint-constrained kinds instead certify that their distribution is
supported inside the promised hint multiset Z_t.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import HypothesisClass, validate_smooth
from .errors import ContractViolation, InputError
from . import rng as rngmod


class AdversaryKind(Enum):
    REALIZABLE_SMOOTH = "realizable_smooth"
    SUPPORT_ALTERNATING = "support_alternating"
    WORST_CASE_SMALL_DOMAIN = "worst_case_small_domain"
    TRANSDUCTIVE_CYCLIC = "transductive_cyclic"
    TRANSDUCTIVE_SPECIAL_POINT = "transductive_special_point"
    CUSTOM_TABLE = "custom_table"


@dataclass(frozen=True)
class HintSchedule:
    """T multisets of size K, one per round, each promised to contain x_t."""

    rows: np.ndarray  # (T, K) integer array

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=int)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise InputError("hint schedule must be a T x K matrix with T,K >= 1")
        object.__setattr__(self, "rows", rows)

    @property
    def T(self) -> int:
        return self.rows.shape[0]

    @property
    def K(self) -> int:
        return self.rows.shape[1]

    def row(self, t: int) -> np.ndarray:
        """Hints for round t (1-based)."""
        return self.rows[t - 1]

    def future_rows(self, t: int) -> np.ndarray:
        """Flattened hints for rounds t+1..T."""
        return self.rows[t:].reshape(-1)


def make_hint_schedule(rows) -> HintSchedule:
    return HintSchedule(np.asarray(rows, dtype=int))


def known_sequence_schedule(xs) -> HintSchedule:
    """K=1 schedule equal to the true sequence: classical transduction."""
    xs = np.asarray(xs, dtype=int)
    return HintSchedule(xs.reshape(-1, 1))


def cyclic_hint_schedule(T: int, blocks) -> HintSchedule:
    """Round t's hints are block (t-1) mod len(blocks); all blocks must
    share one size K."""
    blocks = [np.asarray(b, dtype=int) for b in blocks]
    if not blocks:
        raise InputError("need at least one block")
    K = blocks[0].size
    if any(b.size != K for b in blocks):
        raise InputError("all hint blocks must have equal size")
    rows = np.stack([blocks[t % len(blocks)] for t in range(T)])
    return HintSchedule(rows)


def full_domain_schedule(T: int, domain_size: int) -> HintSchedule:
    """Vacuous hints: every row is the whole domain (K = |X|)."""
    return HintSchedule(np.tile(np.arange(domain_size), (T, 1)))


@dataclass(frozen=True)
class AdversarySpec:
    kind: AdversaryKind
    sigma: float = 1.0
    d: int = 1
    delta: float = 0.5
    hint_schedule: HintSchedule | None = None
    xs: tuple[int, ...] | None = None  # custom_table fixed sequence
    ys: tuple[float, ...] | None = None  # custom_table fixed labels

    @classmethod
    def of(cls, kind: str, **kwargs) -> "AdversarySpec":
        return cls(kind=AdversaryKind(kind), **kwargs)


@dataclass(frozen=True)
class RoundCommitment:
    """What the adversary fixes before seeing the prediction."""

    probs: np.ndarray  # distribution of x_t over the domain
    sigma: float | None  # smoothness certificate (None if hint-certified)
    hint_row: np.ndarray | None  # support certificate (None if smooth)
    label_table: np.ndarray  # committed label for every x

    def check_contract(self) -> None:
        if self.sigma is not None:
            if not validate_smooth(self.probs, self.sigma):
                raise ContractViolation(
                    f"committed distribution violates its {self.sigma}-smoothness certificate"
                )
        if self.hint_row is not None:
            support = np.flatnonzero(self.probs > 0)
            if not np.all(np.isin(support, self.hint_row)):
                raise ContractViolation(
                    "committed distribution escapes the promised hint multiset"
                )
        if np.any(np.abs(self.label_table) > 1.0):
            raise ContractViolation("committed labels leave [-1, 1]")


def biased_label_rule(h_star_values, delta: float, rng) -> np.ndarray:
    """Label table agreeing with h* independently w.p. 1/2 + delta."""
    if not (0.0 <= delta <= 0.5):
        raise InputError(f"delta must lie in [0, 1/2], got {delta}")
    h = np.asarray(h_star_values, dtype=float)
    agree = rng.random(h.size) < 0.5 + delta
    return np.where(agree, h, -h)


class Adversary:
    """Stateful adversary for one game run.

    `commit(t, history)` fixes the round-t distribution and label table;
    `observe(t, x_t, yhat_t, y_t)` feeds back the realized round so
    adaptive constructions can update their counters.
    """

    def __init__(self, spec: AdversarySpec, hclass: HypothesisClass, T: int,
                 seed: int, run: int = 0):
        self.spec = spec
        self.hclass = hclass
        self.T = int(T)
        self.seed = int(seed)
        self.run = int(run)
        self.domain_size = hclass.domain_size
        self.h_star_index: int | None = None
        self._visits: np.ndarray | None = None
        self._support: np.ndarray | None = None
        self._blocks: list[np.ndarray] | None = None
        self._setup()

    # -- construction ------------------------------------------------

    def _rng(self, t: int):
        return rngmod.stream(self.seed, self.run, t, "adversary")

    def _setup(self) -> None:
        spec = self.spec
        kind = spec.kind
        if kind in (AdversaryKind.REALIZABLE_SMOOTH, AdversaryKind.TRANSDUCTIVE_CYCLIC):
            init = self._rng(0)
            self.h_star_index = int(init.integers(len(self.hclass)))
        if kind in (AdversaryKind.SUPPORT_ALTERNATING,
                    AdversaryKind.TRANSDUCTIVE_SPECIAL_POINT):
            if kind is AdversaryKind.SUPPORT_ALTERNATING:
                raw = spec.sigma * self.domain_size
                size = int(np.ceil(raw))
                if abs(raw - round(raw)) > 1e-9:
                    warnings.warn(
                        f"sigma*|X| = {raw} is non-integral; using support size {size}",
                        stacklevel=3,
                    )
                self._support = np.arange(size)
            else:
                if spec.hint_schedule is None:
                    raise InputError("transductive_special_point needs a hint schedule")
                self._support = np.unique(spec.hint_schedule.rows)
            d = spec.d
            if self._support.size % d != 0:
                raise InputError(
                    f"support size {self._support.size} not divisible by d={d}"
                )
            L = self._support.size // d
            self._blocks = [self._support[j * L:(j + 1) * L] for j in range(d)]
            self._visits = np.zeros(d, dtype=int)
        if kind is AdversaryKind.CUSTOM_TABLE:
            if spec.xs is None or spec.ys is None:
                raise InputError("custom_table needs xs and ys")
            if len(spec.xs) < self.T or len(spec.ys) < self.T:
                raise InputError("custom_table xs/ys shorter than T")

    # -- per-round protocol -------------------------------------------

    def commit(self, t: int, history) -> RoundCommitment:
        """Fix round t's distribution and label table (before prediction)."""
        spec = self.spec
        kind = spec.kind
        n = self.domain_size
        rng = self._rng(t)

        if kind is AdversaryKind.REALIZABLE_SMOOTH:
            h_star = self.hclass.values[self.h_star_index]
            if spec.delta == 0.5:
                labels = h_star.copy()
            else:
                labels = biased_label_rule(h_star, spec.delta, rng)
            if spec.hint_schedule is not None:
                return self._hint_commit(t, labels)
            probs = np.full(n, 1.0 / n)
            return RoundCommitment(probs, 1.0, None, labels)

        if kind is AdversaryKind.TRANSDUCTIVE_CYCLIC:
            if spec.hint_schedule is None:
                raise InputError("transductive_cyclic needs a hint schedule")
            h_star = self.hclass.values[self.h_star_index]
            return self._hint_commit(t, h_star.copy())

        if kind in (AdversaryKind.SUPPORT_ALTERNATING,
                    AdversaryKind.TRANSDUCTIVE_SPECIAL_POINT):
            labels = np.ones(n)
            for j, block in enumerate(self._blocks):
                labels[block] = 1.0 if self._visits[j] % 2 == 0 else -1.0
            if kind is AdversaryKind.TRANSDUCTIVE_SPECIAL_POINT:
                return self._hint_commit(t, labels)
            probs = np.zeros(n)
            probs[self._support] = 1.0 / self._support.size
            return RoundCommitment(probs, spec.sigma, None, labels)

        if kind is AdversaryKind.WORST_CASE_SMALL_DOMAIN:
            probs = np.full(n, 1.0 / n)
            labels = np.full(n, 1.0 if t % 2 == 1 else -1.0)
            return RoundCommitment(probs, 1.0, None, labels)

        if kind is AdversaryKind.CUSTOM_TABLE:
            x = int(spec.xs[t - 1])
            probs = np.zeros(n)
            probs[x] = 1.0
            labels = np.full(n, float(spec.ys[t - 1]))
            hint_row = (spec.hint_schedule.row(t)
                        if spec.hint_schedule is not None else np.array([x]))
            return RoundCommitment(probs, None, hint_row, labels)

        raise InputError(f"unknown adversary kind {kind!r}")

    def _hint_commit(self, t: int, labels: np.ndarray) -> RoundCommitment:
        row = self.spec.hint_schedule.row(t)
        probs = np.zeros(self.domain_size)
        uniq, counts = np.unique(row, return_counts=True)
        probs[uniq] = counts / row.size
        return RoundCommitment(probs, None, row, labels)

    def observe(self, t: int, x_t: int, yhat_t: float, y_t: float) -> None:
        if self._blocks is not None:
            for j, block in enumerate(self._blocks):
                if x_t in block:
                    self._visits[j] += 1
                    break


def next_round(adv: Adversary, t: int, history, rng):
    """One protocol step: commit, sample x_t, return the label rule.

    Returns (commitment, x_t, label_rule) where label_rule(x) reads the
    committed table — it is fixed before any prediction is made.
    """
    commitment = adv.commit(t, history)
    commitment.check_contract()
    x_t = int(rng.choice(adv.domain_size, p=commitment.probs))
    return commitment, x_t, lambda x: float(commitment.label_table[x])
