"""EMX learning on finite-support distributions.

Exact evaluation enumerates every sample tuple with ``Fraction`` weights;
Monte Carlo evaluation draws samples by inverse CDF from numpy's PCG64
generator (``numpy.random.default_rng``), seeded per block of trials with
``[seed, block]`` so results do not depend on how blocks are scheduled.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from emxkit.errors import (
    BudgetExceeded,
    EmptySample,
    InvalidDistribution,
    NoCompressingSubset,
    OutOfGround,
)
from emxkit.ground import FinSet, OrderedGround, fraction_str, parse_fraction
from emxkit.schemes import CompressionScheme

DEFAULT_BUDGET = 10**6
MC_BLOCK = 10_000
THIRD = Fraction(1, 3)


@dataclass(frozen=True)
class FiniteSupportDistribution:
    atoms: tuple  # ((rank, Fraction), ...) sorted by rank

    def __post_init__(self):
        atoms = tuple(sorted((int(r), Fraction(p)) for r, p in self.atoms))
        if not atoms:
            raise InvalidDistribution("a distribution needs at least one atom")
        ranks = [r for r, _ in atoms]
        if len(set(ranks)) != len(ranks):
            raise InvalidDistribution("atom ranks must be distinct")
        if any(r < 0 for r in ranks):
            raise InvalidDistribution("atom ranks must be non-negative")
        if any(p <= 0 for _, p in atoms):
            raise InvalidDistribution("atom probabilities must be positive")
        total = sum(p for _, p in atoms)
        if total != 1:
            raise InvalidDistribution(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def support(self) -> tuple:
        return tuple(r for r, _ in self.atoms)

    @property
    def probabilities(self) -> tuple:
        return tuple(p for _, p in self.atoms)

    @classmethod
    def uniform(cls, ranks: Iterable[int]) -> "FiniteSupportDistribution":
        ranks = list(ranks)
        return cls(tuple((r, Fraction(1, len(ranks))) for r in ranks))

    @classmethod
    def from_weights(cls, ranks: Sequence[int], weights: Sequence[int]) -> "FiniteSupportDistribution":
        total = sum(weights)
        return cls(tuple((r, Fraction(w, total)) for r, w in zip(ranks, weights)))

    @classmethod
    def from_dict(cls, doc: dict) -> "FiniteSupportDistribution":
        try:
            atoms = tuple((int(a["rank"]), parse_fraction(a["p"])) for a in doc["atoms"])
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"malformed distribution: {exc}") from exc
        return cls(atoms)

    def to_dict(self) -> dict:
        return {"atoms": [{"rank": r, "p": fraction_str(p)} for r, p in self.atoms]}


def random_distribution(
    rng: np.random.Generator, max_support: int = 8, ground_n: int = 20, max_weight: int = 20
) -> FiniteSupportDistribution:
    """Random support of size 1..max_support with integer weights, exact probabilities."""
    size = int(rng.integers(1, max_support + 1))
    ranks = sorted(rng.choice(ground_n, size=size, replace=False).tolist())
    weights = rng.integers(1, max_weight + 1, size=size).tolist()
    return FiniteSupportDistribution.from_weights(ranks, weights)


def measure(P: FiniteSupportDistribution, F: Iterable[int]) -> Fraction:
    F = set(F)
    return sum((p for r, p in P.atoms if r in F), Fraction(0))


def opt(P: FiniteSupportDistribution) -> Fraction:
    # the support itself is a finite set, so the supremum over Fin(X) is attained
    return Fraction(1)


# --- learners --------------------------------------------------------------


@dataclass(frozen=True)
class Learner:
    rule: Callable[[tuple], FinSet]
    name: str
    params: dict = field(default_factory=dict, hash=False, compare=False)

    def __call__(self, sample) -> FinSet:
        return self.rule(tuple(sample))


def _rank_rule(sample: tuple) -> FinSet:
    if not sample:
        raise EmptySample("the rank learner needs at least one sample point")
    return tuple(range(max(sample) + 1))


def _empty_rule(sample: tuple) -> FinSet:
    return ()


def rank_learner() -> Learner:
    """G(S) = every ground element whose rank is at most the largest sampled rank."""
    return Learner(_rank_rule, "rank")


def empty_learner() -> Learner:
    return Learner(_empty_rule, "empty")


LEARNERS = {"rank": rank_learner, "empty": empty_learner}


# --- evaluation --------------------------------------------------------------


@dataclass
class EMXReport:
    epsilon: Fraction
    delta: Fraction
    d: int
    mode: str
    failure_probability: object  # Fraction (exact) or float estimate (mc)
    satisfied: bool
    learner: str = ""
    half_width: Optional[float] = None
    ci: Optional[tuple] = None
    trials: Optional[int] = None
    seed: Optional[int] = None
    seed_schedule: Optional[list] = None

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "learner": self.learner,
            "d": self.d,
            "epsilon": fraction_str(self.epsilon),
            "delta": fraction_str(self.delta),
            "satisfied": self.satisfied,
        }
        if self.mode == "exact":
            out["failure_probability"] = fraction_str(self.failure_probability)
        else:
            out.update(
                failure_probability=self.failure_probability,
                half_width=self.half_width,
                ci=list(self.ci),
                trials=self.trials,
                seed=self.seed,
                seed_schedule=self.seed_schedule,
            )
        return out


def _fails(learner: Learner, P: FiniteSupportDistribution, sample: tuple, threshold: Fraction) -> bool:
    return measure(P, learner(sample)) <= threshold


def _exact_partial(args) -> Fraction:
    learner, P, d, threshold, first = args
    atoms = P.atoms
    r0, p0 = atoms[first]
    total = Fraction(0)
    for rest in itertools.product(atoms, repeat=d - 1):
        sample = (r0,) + tuple(r for r, _ in rest)
        if _fails(learner, P, sample, threshold):
            prob = p0
            for _, p in rest:
                prob *= p
            total += prob
    return total


def eval_exact(
    learner: Learner,
    P: FiniteSupportDistribution,
    d: int,
    epsilon,
    delta=THIRD,
    budget: int = DEFAULT_BUDGET,
    jobs: int = 1,
) -> EMXReport:
    """Pr over S ~ P^d of [ P(G(S)) <= Opt(P) - epsilon ], by full enumeration.

    The sum is split by the first sample coordinate; partial sums are exact,
    so the result is independent of ``jobs``.
    """
    if d < 1:
        raise ValueError("sample size d must be at least 1")
    epsilon, delta = Fraction(epsilon), Fraction(delta)
    count = len(P.atoms) ** d
    if count > budget:
        raise BudgetExceeded(
            f"{count} sample tuples exceed the enumeration budget {budget}; use Monte Carlo mode",
            witness=[count, budget],
        )
    threshold = opt(P) - epsilon
    parts = [(learner, P, d, threshold, i) for i in range(len(P.atoms))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            partials = list(pool.map(_exact_partial, parts))
    else:
        partials = [_exact_partial(a) for a in parts]
    failure = sum(partials, Fraction(0))
    return EMXReport(epsilon, delta, d, "exact", failure, failure <= delta, learner.name)


def clopper_pearson(failures: int, trials: int, level: float = 0.95) -> tuple:
    ci = binomtest(failures, trials).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def eval_mc(
    learner: Learner,
    P: FiniteSupportDistribution,
    d: int,
    epsilon,
    trials: int,
    seed: int,
    delta=THIRD,
) -> EMXReport:
    """Seeded Monte Carlo estimate of the failure probability.

    Trials run in blocks of ``MC_BLOCK``; block b draws from
    ``default_rng([seed, b])``. The interval is the exact (Clopper-Pearson)
    95% binomial interval and ``half_width`` is its larger side around the
    estimate.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    epsilon, delta = Fraction(epsilon), Fraction(delta)
    threshold = opt(P) - epsilon
    ranks = np.asarray(P.support)
    cdf = np.cumsum([float(p) for p in P.probabilities])
    cdf[-1] = 1.0

    verdicts: dict = {}
    failures = 0
    schedule = []
    for block in range(math.ceil(trials / MC_BLOCK)):
        size = min(MC_BLOCK, trials - block * MC_BLOCK)
        rng = np.random.default_rng([seed, block])
        schedule.append([seed, block])
        idx = np.searchsorted(cdf, rng.random((size, d)), side="right")
        idx = np.minimum(idx, len(ranks) - 1)
        rows, counts = np.unique(idx, axis=0, return_counts=True)
        for row, c in zip(rows, counts):
            key = tuple(row.tolist())
            if key not in verdicts:
                verdicts[key] = _fails(learner, P, tuple(ranks[list(key)].tolist()), threshold)
            if verdicts[key]:
                failures += int(c)

    estimate = failures / trials
    lo, hi = clopper_pearson(failures, trials)
    return EMXReport(
        epsilon,
        delta,
        d,
        "mc",
        estimate,
        estimate <= float(delta),
        learner.name,
        half_width=max(estimate - lo, hi - estimate),
        ci=(lo, hi),
        trials=trials,
        seed=seed,
        seed_schedule=schedule,
    )


def sweep(learner: Learner, dists: Sequence, d: int, epsilon, delta=THIRD, budget=DEFAULT_BUDGET) -> list:
    """CSV rows (dist_id, d, epsilon, failure_prob, satisfied), exact mode."""
    rows = [("dist_id", "d", "epsilon", "failure_prob", "satisfied")]
    for dist_id, P in dists:
        rep = eval_exact(learner, P, d, epsilon, delta, budget)
        rows.append((dist_id, d, fraction_str(epsilon), fraction_str(rep.failure_probability), rep.satisfied))
    return rows


# --- learner <-> scheme ------------------------------------------------------


def compression_size(d: int) -> int:
    """m = ceil(3d / 2)."""
    return (3 * d + 1) // 2


class _LearnerEta:
    """eta(B) = union of G(T) over the d-subsets T of B, memoized."""

    def __init__(self, learner: Learner, d: int):
        self.learner = learner
        self.d = d
        self._outputs: dict = {}
        self._cache: dict = {}
        self._interned: dict = {}

    def __getstate__(self):
        return {"learner": self.learner, "d": self.d}

    def __setstate__(self, state):
        self.__init__(state["learner"], state["d"])

    def cover(self, B: FinSet) -> frozenset:
        B = tuple(B)
        hit = self._cache.get(B)
        if hit is None:
            acc = set()
            for T in itertools.combinations(B, self.d):
                out = self._outputs.get(T)
                if out is None:
                    out = self._outputs[T] = frozenset(self.learner(T))
                acc |= out
            acc = frozenset(acc)
            hit = self._cache[B] = self._interned.setdefault(acc, acc)
        return hit

    def __call__(self, B: FinSet) -> FinSet:
        return tuple(sorted(self.cover(B)))


class _LearnerSigma:
    """Lexicographically least m-subset B of A with A inside eta(B)."""

    def __init__(self, eta: _LearnerEta, m: int):
        self.eta = eta
        self.m = m

    def __call__(self, A: FinSet) -> FinSet:
        need = set(A)
        for B in itertools.combinations(A, self.m):
            if need <= self.eta.cover(B):
                return B
        raise NoCompressingSubset(f"no {self.m}-subset of {list(A)} covers it", witness=list(A))


def scheme_from_learner(learner: Learner, d: int) -> CompressionScheme:
    """The (m+1) -> m scheme with m = ceil(3d/2) extracted from a learner."""
    m = compression_size(d)
    eta = _LearnerEta(learner, d)
    return CompressionScheme(m + 1, m, _LearnerSigma(eta, m), eta, name=f"from-learner({learner.name},d={d})")


class _SchemeLearner:
    def __init__(self, scheme: CompressionScheme, ground_n: Optional[int]):
        self.scheme = scheme
        self.ground_n = ground_n

    def __call__(self, sample: tuple) -> FinSet:
        keep = self.scheme.d
        A = sorted(set(sample))
        if not A:
            raise EmptySample("cannot compress an empty sample")
        while len(A) > keep:
            head = tuple(A[: keep + 1])
            A = sorted(set(self.scheme.sigma(head)) | set(A[keep + 1:]))
        pad = 0
        while len(A) < keep:
            if self.ground_n is not None and pad >= self.ground_n:
                raise OutOfGround("ground too small to pad the compressed sample", witness=A)
            if pad not in A:
                A.append(pad)
                A.sort()
            pad += 1
        return tuple(sorted(self.scheme.eta(tuple(A))))


def learner_from_scheme(scheme: CompressionScheme, ground: Optional[OrderedGround] = None) -> Learner:
    """Compress the distinct sample points down to m by repeatedly applying sigma
    to the lexicographically least (m+1)-subset, pad with the smallest unused
    ranks if fewer than m remain, and output eta of the result."""
    if scheme.eta is None:
        raise ValueError("learner_from_scheme needs a scheme with eta")
    if scheme.m != scheme.d + 1:
        raise ValueError("learner_from_scheme needs an (m+1) -> m scheme")
    n = ground.size if ground is not None else None
    return Learner(_SchemeLearner(scheme, n), f"from-scheme({scheme.name})")
