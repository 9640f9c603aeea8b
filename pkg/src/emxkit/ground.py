"""Ordered ground sets and finite subsets stored as monotone enumerations.

Downstream code only ever sees *ranks*: non-negative integers standing for
the position of an element in the ground order. A finite set is a strictly
increasing tuple of ranks (a ``FinSet``). Rational values are reconstructed
from ranks only for display.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Union

from emxkit.errors import DuplicateElement, KTooLarge, NotReduced, OutOfGround

FinSet = tuple  # strictly increasing tuple of ranks

NATURALS = "naturals"
RATIONALS = "rationals"


def monotone_enum(raw: Iterable[int]) -> FinSet:
    """Return the strictly increasing enumeration of ``raw``.

    Duplicates are rejected, not merged: a member of [X]^m has m distinct
    elements.
    """
    items = sorted(int(r) for r in raw)
    if not items:
        raise ValueError("monotone_enum needs at least one element")
    for a, b in zip(items, items[1:]):
        if a == b:
            raise DuplicateElement(f"element {a} occurs twice", witness=a)
    return tuple(items)


def is_finset(x) -> bool:
    return all(a < b for a, b in zip(x, x[1:]))


# --- rationals in [0, 1], ranked by denominator then numerator -------------


class _Totients:
    """Growing table of Euler's phi, plus cumulative fraction counts."""

    def __init__(self):
        self.limit = 0
        self.before: list[int] = [0, 0]  # before[q] = #fractions with denominator < q

    def ensure(self, q: int) -> None:
        if q <= self.limit:
            return
        limit = max(q, 2 * self.limit, 64)
        phi = list(range(limit + 1))
        for p in range(2, limit + 1):
            if phi[p] == p:
                for j in range(p, limit + 1, p):
                    phi[j] -= phi[j] // p
        # denominator 1 contributes 0/1 and 1/1
        before = [0, 0, 2]
        for j in range(2, limit):
            before.append(before[-1] + phi[j])
        self.before = before
        self.limit = limit

    def denominator_of(self, rank: int) -> int:
        while self.before[-1] <= rank:
            self.ensure(2 * self.limit + 1)
        return bisect.bisect_right(self.before, rank) - 1


_TOTIENTS = _Totients()


def _split(q: Union[Fraction, tuple, int]) -> tuple[int, int]:
    if isinstance(q, Fraction):
        return q.numerator, q.denominator
    if isinstance(q, int):
        return q, 1
    num, den = q
    return int(num), int(den)


def rank_rational(q: Union[Fraction, tuple, int]) -> int:
    """Rank of a rational in [0, 1] in the order 0/1, 1/1, 1/2, 1/3, 2/3, 1/4, ...

    ``q`` may be a ``Fraction`` or a ``(num, den)`` pair; a pair that is not in
    lowest terms raises ``NotReduced``.
    """
    p, d = _split(q)
    if d <= 0:
        raise NotReduced(f"denominator must be positive, got {p}/{d}", witness=(p, d))
    if math.gcd(p, d) != 1:
        raise NotReduced(f"{p}/{d} is not in lowest terms", witness=(p, d))
    if not 0 <= p <= d:
        raise OutOfGround(f"{p}/{d} lies outside [0, 1]", witness=(p, d))
    if d == 1:
        return p
    _TOTIENTS.ensure(d)
    below = sum(1 for a in range(1, p) if math.gcd(a, d) == 1)
    return _TOTIENTS.before[d] + below


def unrank_rational(r: int) -> Fraction:
    if r < 0:
        raise OutOfGround(f"rank must be non-negative, got {r}", witness=r)
    if r < 2:
        return Fraction(r, 1)
    d = _TOTIENTS.denominator_of(r)
    offset = r - _TOTIENTS.before[d]
    for a in range(1, d):
        if math.gcd(a, d) == 1:
            if offset == 0:
                return Fraction(a, d)
            offset -= 1
    raise AssertionError("totient table inconsistent")  # pragma: no cover


# --- ground sets -----------------------------------------------------------


@dataclass(frozen=True)
class OrderedGround:
    """A finite initial segment of a linearly ordered set.

    ``size`` elements with ranks ``0..size-1``. For ``kind == "rationals"``
    rank r stands for ``unrank_rational(r)``.
    """

    kind: str = NATURALS
    size: int = 0

    def __post_init__(self):
        if self.kind not in (NATURALS, RATIONALS):
            raise ValueError(f"unknown ground kind {self.kind!r}")
        if self.size < 0:
            raise ValueError("ground size must be non-negative")

    @classmethod
    def naturals(cls, n: int) -> "OrderedGround":
        return cls(NATURALS, n)

    @classmethod
    def rationals(cls, n: int) -> "OrderedGround":
        return cls(RATIONALS, n)

    @classmethod
    def from_config(cls, cfg: dict) -> "OrderedGround":
        return cls(cfg.get("kind", NATURALS), int(cfg["n"]))

    def to_config(self) -> dict:
        return {"kind": self.kind, "n": self.size}

    def __contains__(self, rank) -> bool:
        return isinstance(rank, int) and 0 <= rank < self.size

    def check(self, s: Iterable[int]) -> None:
        for r in s:
            if r not in self:
                raise OutOfGround(f"rank {r} outside ground of size {self.size}", witness=r)

    def value(self, rank: int):
        if rank not in self:
            raise OutOfGround(f"rank {rank} outside ground of size {self.size}", witness=rank)
        return rank if self.kind == NATURALS else unrank_rational(rank)

    def values(self, s: FinSet) -> list:
        return [self.value(r) for r in s]


def k_subsets(ground: Union[OrderedGround, int], k: int) -> Iterator[FinSet]:
    """All k-element subsets of the ground, in lexicographic order."""
    n = ground.size if isinstance(ground, OrderedGround) else int(ground)
    if k < 0:
        raise ValueError("k must be non-negative")
    if k > n:
        raise KTooLarge(f"cannot choose {k} elements from a ground of size {n}", witness=[k, n])
    return itertools.combinations(range(n), k)


def fraction_str(q) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def parse_fraction(text) -> Fraction:
    """Parse ``"num/den"`` (or an integer) into an exact ``Fraction``.

    Decimal strings are refused so nothing inexact crosses a file boundary.
    """
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, Fraction):
        return text
    s = str(text).strip()
    if "." in s or "e" in s.lower():
        raise ValueError(f"rationals must be written as num/den, got {text!r}")
    return Fraction(s)
