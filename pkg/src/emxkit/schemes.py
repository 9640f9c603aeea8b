"""Monotone compression schemes over finite grounds.

A scheme is a pair (sigma, eta): sigma sends every m-set x to a d-subset of
itself, eta sends d-sets to finite sets, and every x must be covered by
eta(sigma(x)). Schemes are either named rules (plain callables) or explicit
tables loaded from JSON. The verifier never trusts the producer: it
re-enumerates the whole domain.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from emxkit.errors import (
    CoverFailure,
    DeltaNotSelected,
    GroundExhausted,
    NotInDomain,
    NotMonotone,
)
from emxkit.ground import FinSet, OrderedGround, k_subsets

SigmaFn = Callable[[FinSet], FinSet]
EtaFn = Callable[[FinSet], FinSet]


@dataclass(frozen=True)
class CompressionScheme:
    """An m -> d monotone compression scheme.

    ``sigma`` and ``eta`` are callables on strictly increasing tuples. ``eta``
    may be ``None``; the cover property is then the one of the derived eta
    (see :func:`eta_from_sigma`), which holds by construction.
    """

    m: int
    d: int
    sigma: SigmaFn
    eta: Optional[EtaFn] = None
    name: str = "custom"

    def __post_init__(self):
        if not self.m > self.d >= 0:
            raise ValueError(f"need m > d >= 0, got m={self.m}, d={self.d}")

    def with_eta(self, eta: EtaFn) -> "CompressionScheme":
        return CompressionScheme(self.m, self.d, self.sigma, eta, self.name)


# --- the 2 -> 1 scheme on the naturals ------------------------------------


def _max_sigma(x: FinSet) -> FinSet:
    return (max(x),)


def _initial_segment(y: FinSet) -> FinSet:
    return tuple(range(y[0] + 1))


def max_scheme() -> CompressionScheme:
    """sigma({a, b}) = {max(a, b)}, eta({n}) = {0, ..., n}."""
    return CompressionScheme(2, 1, _max_sigma, _initial_segment, name="max")


# --- tables ----------------------------------------------------------------


class TableMap:
    """Picklable dict-backed mapping used for tabulated sigma/eta."""

    def __init__(self, table: dict, default=None, label: str = "sigma"):
        self.table = table
        self.default = default
        self.label = label

    def __call__(self, x: FinSet) -> FinSet:
        try:
            return self.table[tuple(x)]
        except KeyError:
            if self.default is not None:
                return self.default
            raise NotInDomain(f"{self.label} is not defined at {list(x)}", witness=list(x)) from None


def tabulate(scheme: CompressionScheme, ground: OrderedGround, include_eta: bool = True) -> dict:
    """Scheme table document: ``{"m", "d", "ground_n", "sigma", "eta"?}``."""
    sigma_rows = []
    image = set()
    for x in k_subsets(ground, scheme.m):
        y = tuple(scheme.sigma(x))
        sigma_rows.append([list(x), list(y)])
        image.add(y)
    doc = {"m": scheme.m, "d": scheme.d, "ground_n": ground.size, "sigma": sigma_rows}
    if include_eta and scheme.eta is not None:
        doc["eta"] = [[list(y), list(scheme.eta(y))] for y in sorted(image)]
    return doc


def scheme_from_table(doc: dict, name: str = "table") -> CompressionScheme:
    """Load a scheme table document. Raises ``ValueError`` on malformed input."""
    doc = doc.get("result", doc) if isinstance(doc, dict) else doc
    try:
        m, d = int(doc["m"]), int(doc["d"])
        sigma = {}
        for x, y in doc["sigma"]:
            sigma[tuple(int(v) for v in x)] = tuple(int(v) for v in y)
        eta = None
        if doc.get("eta") is not None:
            eta_table = {tuple(int(v) for v in y): tuple(int(v) for v in s) for y, s in doc["eta"]}
            eta = TableMap(eta_table, default=(), label="eta")
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed scheme table: {exc}") from exc
    return CompressionScheme(m, d, TableMap(sigma), eta, name=name)


# --- eta from sigma ----------------------------------------------------------


def eta_from_sigma(scheme: CompressionScheme, ground: OrderedGround) -> CompressionScheme:
    """Attach eta(y) = union of the fiber of sigma over y (empty if no fiber)."""
    unions: dict[FinSet, set] = {}
    for x in k_subsets(ground, scheme.m):
        unions.setdefault(tuple(scheme.sigma(x)), set()).update(x)
    table = {y: tuple(sorted(s)) for y, s in unions.items()}
    return scheme.with_eta(TableMap(table, default=(), label="eta"))


# --- verification -------------------------------------------------------------


@dataclass
class SchemeReport:
    monotone_ok: bool
    cover_ok: bool
    max_fiber: int
    fiber_histogram: dict
    finite_to_one: bool
    m: int = 0
    d: int = 0
    ground_n: int = 0
    eta_derived: bool = False
    witness: Optional[list] = None
    fibers: dict = field(default_factory=dict, repr=False)

    def to_dict(self, with_fibers: bool = False) -> dict:
        out = {
            "m": self.m,
            "d": self.d,
            "ground_n": self.ground_n,
            "monotone_ok": self.monotone_ok,
            "cover_ok": self.cover_ok,
            "max_fiber": self.max_fiber,
            "fiber_histogram": {str(k): v for k, v in sorted(self.fiber_histogram.items())},
            "finite_to_one": self.finite_to_one,
            "eta_derived": self.eta_derived,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if with_fibers:
            out["fibers"] = [[list(y), c] for y, c in sorted(self.fibers.items())]
        return out

    def histogram_csv_rows(self) -> list:
        return [("fiber_size", "count")] + sorted(self.fiber_histogram.items())


def _check_partition(args) -> tuple:
    """Check all x in the domain whose first element is ``first``.

    Returns (fiber Counter, first NotMonotone witness, first CoverFailure witness).
    """
    scheme, n, first = args
    fibers: Counter = Counter()
    bad_mono = bad_cover = None
    m, d = scheme.m, scheme.d
    eta = scheme.eta
    domain = ((first,) + rest for rest in itertools.combinations(range(first + 1, n), m - 1))
    for x in domain:
        y = tuple(scheme.sigma(x))
        if len(y) != d or any(a >= b for a, b in zip(y, y[1:])) or not set(y) <= set(x):
            if bad_mono is None:
                bad_mono = [list(x), list(y)]
            continue
        fibers[y] += 1
        if eta is not None and bad_cover is None:
            cover = eta(y)
            if not set(x) <= set(cover):
                bad_cover = [list(x), list(y), list(cover)]
    return fibers, bad_mono, bad_cover


def fiber_sizes(scheme: CompressionScheme, ground: OrderedGround, jobs: int = 1) -> dict:
    """Counter y -> |sigma^{-1}(y)| over [ground]^m (non-empty fibers only)."""
    return verify_scheme(scheme, ground, jobs=jobs, raise_on_failure=False).fibers


def verify_scheme(
    scheme: CompressionScheme,
    ground: OrderedGround,
    jobs: int = 1,
    raise_on_failure: bool = True,
) -> SchemeReport:
    """Exhaustively check a scheme on ``[ground]^m``.

    Checks sigma(x) is a d-subset of x, that x lies in eta(sigma(x)), and
    builds the fiber histogram. The domain is split by least element; the
    partial histograms are summed, so ``jobs`` never changes the result.
    ``jobs > 1`` needs picklable sigma/eta.
    """
    n = ground.size
    k_subsets(ground, scheme.m)  # raises KTooLarge when m > n
    parts = [(scheme, n, first) for first in range(n - scheme.m + 1)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_check_partition, parts))
    else:
        results = [_check_partition(p) for p in parts]

    fibers: Counter = Counter()
    bad_mono = bad_cover = None
    for part_fibers, mono, cover in results:
        fibers.update(part_fibers)
        bad_mono = bad_mono or mono
        bad_cover = bad_cover or cover

    if raise_on_failure and bad_mono is not None:
        raise NotMonotone(f"sigma({bad_mono[0]}) = {bad_mono[1]} is not a {scheme.d}-subset", witness=bad_mono)
    if raise_on_failure and bad_cover is not None:
        raise CoverFailure(f"{bad_cover[0]} is not covered by eta({bad_cover[1]})", witness=bad_cover)

    histogram = Counter(fibers.values())
    if scheme.eta is not None:
        bound_ok = all(c <= math.comb(len(scheme.eta(y)), scheme.m) for y, c in fibers.items())
    else:
        bound_ok = True  # derived eta: each fiber lies inside its own union
    return SchemeReport(
        monotone_ok=bad_mono is None,
        cover_ok=bad_cover is None,
        max_fiber=max(histogram) if histogram else 0,
        fiber_histogram=dict(histogram),
        finite_to_one=bound_ok,
        m=scheme.m,
        d=scheme.d,
        ground_n=n,
        eta_derived=scheme.eta is None,
        witness=bad_mono or bad_cover,
        fibers=dict(fibers),
    )


# --- the reduction lemma ---------------------------------------------------


class _Reduced:
    """varsigma(x) = sigma(x + {delta}) minus {delta}."""

    def __init__(self, sigma: SigmaFn, delta: int):
        self.sigma = sigma
        self.delta = delta

    def __call__(self, x: FinSet) -> FinSet:
        y = tuple(self.sigma(tuple(x) + (self.delta,)))
        if self.delta not in y:
            raise DeltaNotSelected(
                f"sigma({list(x) + [self.delta]}) = {list(y)} omits {self.delta}", witness=list(x)
            )
        return tuple(v for v in y if v != self.delta)


@dataclass(frozen=True)
class Reduction:
    scheme: CompressionScheme
    ground: OrderedGround
    chain: tuple

    @property
    def delta(self) -> int:
        return self.chain[-1]


def reduce_scheme(scheme: CompressionScheme, ground_n: int, delta0: int) -> Reduction:
    """Drop one dimension from an (m+1) -> (l+1) scheme on ``range(ground_n)``.

    Runs the chain delta_{n+1} = least bound such that every x with
    sigma(x) inside [0, delta_n) lies inside [0, delta_{n+1}), up to its
    fixpoint delta, and returns the m -> l scheme x -> sigma(x + {delta}) - {delta}
    on the ground ``range(delta)``. The map is evaluated eagerly on the whole
    new domain so truncation failures surface here.
    """
    if not 0 <= delta0 < ground_n:
        raise ValueError(f"delta0 must lie in [0, {ground_n}), got {delta0}")
    if scheme.d < 1:
        raise ValueError("reduction needs a target arity of at least 1")
    # reach[t] = least bound containing every x whose image has max < t
    reach = [0] * (ground_n + 1)
    for x in k_subsets(ground_n, scheme.m):
        y = scheme.sigma(x)
        top = max(y) + 1
        reach[top] = max(reach[top], x[-1] + 1)
    for t in range(1, ground_n + 1):
        reach[t] = max(reach[t], reach[t - 1])

    chain = [delta0]
    while True:
        nxt = max(chain[-1], reach[chain[-1]])
        if nxt > ground_n - 1:
            raise GroundExhausted(
                f"chain {chain + [nxt]} leaves the ground of size {ground_n}", witness=chain + [nxt]
            )
        if nxt == chain[-1]:
            break
        chain.append(nxt)

    delta = chain[-1]
    reduced = CompressionScheme(
        scheme.m - 1, scheme.d - 1, _Reduced(scheme.sigma, delta), name=f"reduced({scheme.name}, {delta})"
    )
    for x in k_subsets(delta, reduced.m):
        reduced.sigma(x)
    return Reduction(reduced, OrderedGround.naturals(delta), tuple(chain))


# --- fiber growth audit --------------------------------------------------------


@dataclass
class AuditRow:
    n: int
    max_fiber: int
    truncation_stable: Optional[bool]


def fiber_growth_audit(
    family: Callable[[int], tuple[CompressionScheme, OrderedGround]],
    sizes: Sequence[int],
) -> list[AuditRow]:
    """Verify ``family(n)`` for each n and tabulate the largest fiber.

    A row is truncation-stable when every fiber seen at the previous size
    kept its size. Unbounded growth of ``max_fiber`` across rows is the
    finite-scale trace of a scheme that cannot be finite-to-one.
    """
    if any(a >= b for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing")
    rows = []
    previous = None
    for n in sizes:
        scheme, ground = family(n)
        report = verify_scheme(scheme, ground)
        stable = None
        if previous is not None:
            stable = all(report.fibers.get(y) == c for y, c in previous.items())
        rows.append(AuditRow(n, report.max_fiber, stable))
        previous = report.fibers
    return rows


def unbounded_growth(rows: Sequence[AuditRow]) -> bool:
    """True when max fibers strictly increase and no row is stable."""
    return len(rows) > 1 and all(
        b.max_fiber > a.max_fiber and b.truncation_stable is False for a, b in zip(rows, rows[1:])
    )


def max_family(n: int) -> tuple[CompressionScheme, OrderedGround]:
    return max_scheme(), OrderedGround.naturals(n)


def reduced_max_family(n: int) -> tuple[CompressionScheme, OrderedGround]:
    """The 1 -> 0 map left after reducing the max scheme with delta = n."""
    red = reduce_scheme(max_scheme(), n + 1, n)
    return red.scheme, red.ground
