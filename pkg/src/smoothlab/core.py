"""Finite domains, hypothesis classes, losses, smooth distributions,
and labeled-example multisets.

Conventions used everywhere:

* the instance space is ``{0, ..., size-1}``;
* hypothesis values and labels live in ``[-1, 1]``, binary classes use
  exactly ``{-1.0, +1.0}``;
* a distribution is sigma-smooth iff every atom has mass at most
  ``1 / (sigma * size)`` (the subset condition reduces to singletons on
  a finite domain).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import CapacityError, InputError

PROB_TOL = 1e-12

# exhaustive-search bounds for compute_vc_dimension
VC_MAX_DOMAIN = 16
VC_MAX_CLASS = 1024


@dataclass(frozen=True)
class FiniteDomain:
    """Instance space {0, ..., size-1}."""

    size: int

    def __post_init__(self) -> None:
        if self.size < 1:
            raise InputError(f"domain size must be >= 1, got {self.size}")


@dataclass(frozen=True)
class Hypothesis:
    """A value table over the domain, entries in [-1, 1]."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise InputError("hypothesis values must be a nonempty 1-D table")
        if np.any(np.abs(arr) > 1.0):
            raise InputError("hypothesis values must lie in [-1, 1]")

    def __call__(self, x: int) -> float:
        return self.values[x]


class HypothesisClass:
    """An ordered finite set of hypotheses over a common domain.

    The value tables are held as a read-only (n_hypotheses, domain_size)
    float array so oracle objectives vectorize over the whole class.
    """

    def __init__(self, values, declared_dim: int, binary: bool = False):
        vals = np.array(values, dtype=float)
        if vals.ndim != 2 or vals.shape[0] == 0:
            raise InputError("need a nonempty 2-D (hypothesis, domain) value table")
        if np.any(np.abs(vals) > 1.0):
            raise InputError("hypothesis values must lie in [-1, 1]")
        if binary and not np.all(np.abs(vals) == 1.0):
            raise InputError("binary class requires values in {-1, +1} exactly")
        if declared_dim < 0:
            raise InputError("declared_dim must be nonnegative")
        vals.setflags(write=False)
        self.values = vals
        self.declared_dim = int(declared_dim)
        self.binary = bool(binary)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def domain_size(self) -> int:
        return self.values.shape[1]

    @property
    def domain(self) -> FiniteDomain:
        return FiniteDomain(self.domain_size)

    def hypothesis(self, i: int) -> Hypothesis:
        return Hypothesis(tuple(self.values[i]))

    def to_json(self) -> str:
        return json.dumps(
            {
                "domain_size": self.domain_size,
                "hypotheses": self.values.tolist(),
                "declared_dim": self.declared_dim,
                "binary": self.binary,
            }
        )

    @classmethod
    def from_json(cls, doc: str) -> "HypothesisClass":
        obj = json.loads(doc)
        vals = np.array(obj["hypotheses"], dtype=float)
        if vals.shape[1] != obj["domain_size"]:
            raise InputError("hypothesis table width disagrees with domain_size")
        return cls(vals, obj["declared_dim"], obj["binary"])


class LossKind(Enum):
    BINARY_INDICATOR = "binary_indicator"
    CENTERED_BINARY = "centered_binary"
    ABSOLUTE = "absolute"
    SQUARED = "squared"


_DEFAULT_G = {
    LossKind.BINARY_INDICATOR: 0.5,
    LossKind.CENTERED_BINARY: 0.5,
    LossKind.ABSOLUTE: 0.5,
    LossKind.SQUARED: 1.0,
}

_BINARY_KINDS = {LossKind.BINARY_INDICATOR}


@dataclass(frozen=True)
class LossSpec:
    kind: LossKind
    lipschitz_G: float = 0.0

    def __post_init__(self) -> None:
        if self.lipschitz_G == 0.0:
            object.__setattr__(self, "lipschitz_G", _DEFAULT_G[self.kind])
        if self.lipschitz_G <= 0:
            raise InputError("lipschitz_G must be positive")

    @property
    def binary_only(self) -> bool:
        return self.kind in _BINARY_KINDS

    @classmethod
    def of(cls, name: str) -> "LossSpec":
        return cls(LossKind(name))


def _check_range(v, name: str) -> None:
    if np.any(np.abs(np.asarray(v, dtype=float)) > 1.0):
        raise InputError(f"{name} must lie in [-1, 1]")


def _check_pm1(v, name: str) -> None:
    if np.any(np.abs(np.asarray(v, dtype=float)) != 1.0):
        raise InputError(f"{name} must be exactly -1 or +1")


def loss_eval(loss: LossSpec, yhat, y):
    """Evaluate the loss; vectorizes over `yhat` for a scalar label `y`."""
    yhat = np.asarray(yhat, dtype=float)
    _check_range(yhat, "prediction")
    _check_range(y, "label")
    if loss.kind is LossKind.BINARY_INDICATOR:
        _check_pm1(yhat, "prediction")
        _check_pm1(y, "label")
        out = (1.0 - y * yhat) / 2.0
    elif loss.kind is LossKind.CENTERED_BINARY:
        _check_pm1(y, "label")
        out = -y * yhat / 2.0
    elif loss.kind is LossKind.ABSOLUTE:
        out = np.abs(yhat - y) / 2.0
    else:  # squared
        out = (yhat - y) ** 2 / 4.0
    return float(out) if out.ndim == 0 else out


def validate_smooth(probs, sigma: float, tol: float = PROB_TOL) -> bool:
    """True iff `probs` is a probability vector whose atoms obey the
    sigma-smooth singleton bound max_x p(x) <= 1/(sigma*|X|) + tol."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InputError("probs must be a nonempty vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise InputError("probs must be nonnegative and sum to 1")
    if not (0.0 < sigma <= 1.0):
        raise InputError(f"sigma must be in (0, 1], got {sigma}")
    return bool(p.max() <= 1.0 / (sigma * p.size) + tol)


@dataclass(frozen=True)
class SmoothDistribution:
    """A probability vector with a smoothness certificate sigma."""

    probs: tuple[float, ...]
    sigma: float

    def __post_init__(self) -> None:
        if not validate_smooth(self.probs, self.sigma):
            raise InputError(
                f"distribution is not {self.sigma}-smooth on {len(self.probs)} atoms"
            )

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    @classmethod
    def uniform(cls, size: int) -> "SmoothDistribution":
        return cls(tuple([1.0 / size] * size), 1.0)


@dataclass(frozen=True)
class LabeledExample:
    x: int
    y: float

    def __post_init__(self) -> None:
        _check_range(self.y, "label")


class ExampleMultiset:
    """Multiset of (instance, label) pairs; the currency of oracle calls.

    Stored as aggregated (x, y) -> count so oracle objectives cost
    O(distinct pairs) while logical size (what oracle input-length
    accounting uses) is the sum of counts.
    """

    __slots__ = ("_counts", "_arrays")

    def __init__(self, pairs=()):
        self._counts: dict[tuple[int, float], int] = {}
        self._arrays = None
        for item in pairs:
            if len(item) == 3:
                x, y, c = item
            else:
                x, y = item
                c = 1
            self.add(int(x), float(y), int(c))

    def add(self, x: int, y: float, count: int = 1) -> None:
        if count < 1:
            raise InputError("multiset counts must be >= 1")
        _check_range(y, "label")
        key = (int(x), float(y))
        self._counts[key] = self._counts.get(key, 0) + count
        self._arrays = None

    def extend(self, other: "ExampleMultiset") -> None:
        for (x, y), c in other._counts.items():
            self.add(x, y, c)

    def copy(self) -> "ExampleMultiset":
        out = ExampleMultiset()
        out._counts = dict(self._counts)
        return out

    def union(self, other: "ExampleMultiset") -> "ExampleMultiset":
        out = self.copy()
        out.extend(other)
        return out

    @classmethod
    def from_arrays(cls, xs, ys, counts=None) -> "ExampleMultiset":
        xs = np.asarray(xs, dtype=int)
        ys = np.asarray(ys, dtype=float)
        if counts is None:
            counts = np.ones(xs.shape, dtype=int)
        out = cls()
        for x, y, c in zip(xs.tolist(), ys.tolist(), np.asarray(counts).tolist()):
            out.add(x, y, int(c))
        return out

    @property
    def logical_size(self) -> int:
        return sum(self._counts.values())

    def __len__(self) -> int:
        return self.logical_size

    def items(self):
        return self._counts.items()

    def arrays(self):
        """(xs, ys, counts) arrays over the distinct pairs."""
        if self._arrays is None:
            if self._counts:
                keys = sorted(self._counts)
                xs = np.array([k[0] for k in keys], dtype=int)
                ys = np.array([k[1] for k in keys], dtype=float)
                cs = np.array([self._counts[k] for k in keys], dtype=float)
            else:
                xs = np.zeros(0, dtype=int)
                ys = np.zeros(0, dtype=float)
                cs = np.zeros(0, dtype=float)
            self._arrays = (xs, ys, cs)
        return self._arrays


def make_partition_class(domain: FiniteDomain, d: int) -> HypothesisClass:
    """All 2^d sign assignments that are constant on each of d equal
    contiguous blocks of the domain."""
    if d < 1:
        raise InputError("d must be >= 1")
    if domain.size % d != 0:
        raise InputError(f"domain size {domain.size} not divisible by d={d}")
    block = domain.size // d
    rows = []
    for pattern in itertools.product((1.0, -1.0), repeat=d):
        rows.append(np.repeat(pattern, block))
    return HypothesisClass(np.array(rows), declared_dim=d, binary=True)


def make_shatter_class(domain: FiniteDomain, special) -> HypothesisClass:
    """All 2^d sign patterns on the given special points, +1 elsewhere."""
    special = [int(s) for s in special]
    if len(set(special)) != len(special):
        raise InputError("special indices must be distinct")
    if any(s < 0 or s >= domain.size for s in special):
        raise InputError("special index out of range")
    d = len(special)
    rows = []
    for pattern in itertools.product((1.0, -1.0), repeat=d):
        row = np.ones(domain.size)
        row[special] = pattern
        rows.append(row)
    return HypothesisClass(np.array(rows), declared_dim=d, binary=True)


def make_support_partition_class(
    domain: FiniteDomain, support_size: int, d: int
) -> HypothesisClass:
    """All 2^d sign assignments constant on each of d equal contiguous
    blocks of the first `support_size` indices, +1 off the support."""
    if not (1 <= support_size <= domain.size):
        raise InputError("support_size out of range")
    if support_size % d != 0:
        raise InputError(f"support size {support_size} not divisible by d={d}")
    block = support_size // d
    rows = []
    for pattern in itertools.product((1.0, -1.0), repeat=d):
        row = np.ones(domain.size)
        row[:support_size] = np.repeat(pattern, block)
        rows.append(row)
    return HypothesisClass(np.array(rows), declared_dim=d, binary=True)


def compute_vc_dimension(hclass: HypothesisClass) -> int:
    """Brute-force VC dimension of the sign patterns of the class.

    Exhaustive over all subsets of the domain; capped at |X| <= 16 and
    |H| <= 1024.
    """
    n = hclass.domain_size
    if n > VC_MAX_DOMAIN or len(hclass) > VC_MAX_CLASS:
        raise CapacityError(
            f"instance too large for exhaustive search: |X|={n}, |H|={len(hclass)}"
        )
    signs = np.where(hclass.values >= 0, 1, -1)
    max_d = min(n, int(np.log2(len(hclass))) + 1)
    best = 0
    for m in range(1, max_d + 1):
        shattered = False
        for subset in itertools.combinations(range(n), m):
            patterns = {tuple(row) for row in signs[:, subset]}
            if len(patterns) == 2**m:
                shattered = True
                break
        if shattered:
            best = m
        else:
            break
    return best
