"""The fault model: a hidden total order and a noisy comparison oracle.

Element ids are integers 0..n-1; ``GroundTruth.rank_of`` maps each id to its
true rank in 1..n.  Dummy elements (negative ids) order below every real
element, are always answered correctly, and cost nothing — they are
algorithm-internal bookkeeping, not physical comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import CounterRng

SMALL = "small"
RELEVANT = "relevant"
LARGE = "large"


@dataclass
class GroundTruth:
    """A hidden permutation plus the (k, eps) rank classification.

    Instances with k > n/2 are mirrored at construction (rank r -> n+1-r,
    k -> n-k), and odd n is padded with one largest element, so algorithms
    always see an even universe with k <= n/2.
    """

    n: int
    k: int
    eps: float
    rank_of: np.ndarray  # rank_of[id] = true rank, a bijection onto 1..n
    mirrored: bool = False
    padded: bool = False

    @property
    def window_low(self) -> float:
        return self.k - self.n * self.eps

    @property
    def window_high(self) -> float:
        return self.k + self.n * self.eps

    def classify(self, rank: int) -> str:
        if rank <= self.window_low:
            return SMALL
        if rank <= self.window_high:
            return RELEVANT
        return LARGE

    def is_relevant(self, rank) -> np.ndarray | bool:
        return (rank > self.window_low) & (rank <= self.window_high)

    def rank_of_id(self, element: int) -> int:
        """True rank of an element; dummies report rank 0."""
        if element < 0:
            return 0
        return int(self.rank_of[element])

    def ranks_of(self, ids: np.ndarray) -> np.ndarray:
        """Vectorized rank lookup; dummy (negative) ids map to rank 0."""
        ids = np.asarray(ids)
        safe = np.maximum(ids, 0)
        return np.where(ids < 0, 0, self.rank_of[safe])

    def ids_of_ranks(self, ranks: np.ndarray) -> np.ndarray:
        """Inverse lookup: the element id holding each given rank."""
        inverse = getattr(self, "_inverse", None)
        if inverse is None:
            inverse = np.empty(self.n + 1, dtype=np.int64)
            inverse[self.rank_of] = np.arange(self.n, dtype=np.int64)
            object.__setattr__(self, "_inverse", inverse)
        return inverse[np.asarray(ranks, dtype=np.int64)]


def new_universe(n: int, k: int, eps: float, seed: int) -> GroundTruth:
    """A uniformly shuffled universe, deterministic in the seed.

    Rejects k outside 1..n and eps outside (0, 1/2).  Odd n gains one pad
    element with the largest rank; k > n/2 is mirrored.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    padded = bool(n % 2)
    mirrored = k > n / 2
    if mirrored:
        k = n - k
    rng = CounterRng(seed).derive(0)
    perm = rng.permutation(n)  # perm[id] = rank - 1
    rank_of = perm + 1
    if padded:
        n += 1
        rank_of = np.concatenate([rank_of, [n]])
    return GroundTruth(n=n, k=k, eps=eps, rank_of=rank_of,
                       mirrored=mirrored, padded=padded)


@dataclass
class NoisyOracle:
    """Comparison oracle whose answers are independently wrong w.p. p.

    Single-threaded: run one oracle per trial.  ``calls`` counts charged
    comparisons exactly; queries touching a dummy are answered internally
    (correctly) at zero cost.
    """

    truth: GroundTruth
    p: float
    rng: CounterRng
    calls: int = 0
    dummy_floor: int = 0
    charge_dummies: bool = False  # sensitivity knob, see approx_kselect
    _vote_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.p < 0.5:
            raise ValueError(f"p must lie in [0, 1/2), got {self.p}")

    @classmethod
    def create(cls, truth: GroundTruth, p: float, seed: int) -> "NoisyOracle":
        return cls(truth=truth, p=p, rng=CounterRng(seed).derive(1))

    def calls_used(self) -> int:
        return self.calls

    def is_dummy(self, element: int) -> bool:
        return element < 0

    def add_dummies(self, count: int) -> np.ndarray:
        """Register ``count`` synthetic smallest elements; returns their ids
        (-1 .. -count), which order below all real elements, among
        themselves by id."""
        self.dummy_floor = count
        return -np.arange(1, count + 1, dtype=np.int64)

    def true_less(self, x: int, y: int) -> bool:
        """The hidden order; dummies sort below real elements and among
        themselves by id (the consistent tie order among copies)."""
        rx = self.truth.rank_of_id(x)
        ry = self.truth.rank_of_id(y)
        if rx != ry:
            return rx < ry
        return x < y

    def compare(self, x: int, y: int) -> bool:
        """One raw comparison: True means "x precedes y".  Wrong with
        probability p, independently per call; +1 charged call unless a
        dummy is involved."""
        if x == y:
            raise ValueError("compare requires distinct ids")
        lt = self.true_less(x, y)
        if self.is_dummy(x) or self.is_dummy(y):
            if self.charge_dummies:
                self.calls += 1
            return lt
        self.calls += 1
        if self.rng.uniform() < self.p:
            return not lt
        return lt

    def repeat_compare(self, x: int, y: int, count: int) -> int:
        """Query the same pair ``count`` times; returns how many answers
        said "x precedes y".  Each answer is an independent draw."""
        lt = self.true_less(x, y)
        if self.is_dummy(x) or self.is_dummy(y):
            if self.charge_dummies:
                self.calls += count
            return count if lt else 0
        self.calls += count
        wrong = int(self.rng.bernoulli(self.p, count).sum())
        return (count - wrong) if lt else wrong

    # -- vote-level sampling (exact in distribution; see primitives) -------

    def vote_failure(self, t: int) -> float:
        """Cached exact failure probability of a level-t majority vote."""
        g = self._vote_cache.get(t)
        if g is None:
            from .primitives import vote_failure_exact
            g = vote_failure_exact(self.p, t)
            self._vote_cache[t] = g
        return g

    def charge(self, count: int):
        self.calls += count
