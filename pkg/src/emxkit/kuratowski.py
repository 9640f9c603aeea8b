"""Kuratowski-type decompositions of finite powers.

A level-k decomposition splits ``n^(k+2)`` into k+2 parts; part i is finite
in the direction of axis i (fixing every other coordinate leaves only
finitely many points of part i). Level 0 is the diagonal split of the square,
and level k is obtained from level k-1 by looking at the largest coordinate
alpha and decomposing the remaining coordinates with a level-(k-1)
decomposition of ``(alpha+1)^(k+1)`` transported along a chosen ordering of
``alpha + 1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from emxkit.errors import ChooserMissing, NotPartition
from emxkit.ground import FinSet, OrderedGround
from emxkit.schemes import CompressionScheme, eta_from_sigma


@dataclass(frozen=True)
class OrderPolicy:
    """How each finite ordinal alpha+1 is re-ordered before use as a chooser.

    ``identity`` keeps the natural order; ``seeded`` uses a PCG64 permutation
    seeded by ``(seed, alpha)``.
    """

    kind: str = "identity"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("identity", "seeded"):
            raise ValueError(f"unknown order policy {self.kind!r}")

    def permutation(self, alpha: int) -> np.ndarray:
        if self.kind == "identity":
            return np.arange(alpha + 1)
        return np.random.default_rng([self.seed, alpha]).permutation(alpha + 1)

    def to_dict(self) -> dict:
        if self.kind == "identity":
            return {"kind": "identity"}
        return {"kind": "seeded", "seed": self.seed}

    @classmethod
    def from_dict(cls, doc: dict) -> "OrderPolicy":
        return cls(doc.get("kind", "identity"), int(doc.get("seed", 0)))


IDENTITY = OrderPolicy()


def random_order_policy(seed: int) -> OrderPolicy:
    return OrderPolicy("seeded", int(seed))


@dataclass(frozen=True, eq=False)
class Decomposition:
    k: int
    n: int
    assign: np.ndarray  # shape (n,) * (k + 2), entries in 0..k+1
    policy: OrderPolicy = IDENTITY

    @property
    def parts(self) -> int:
        return self.k + 2

    def part_of(self, point) -> int:
        return int(self.assign[tuple(point)])

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "policy": self.policy.to_dict(),
            "assign": self.assign.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Decomposition":
        """Accepts the bare document or a CLI payload wrapping it in ``result``."""
        doc = doc.get("result", doc) if isinstance(doc, dict) else doc
        try:
            k, n = int(doc["k"]), int(doc["n"])
            flat = np.asarray(doc["assign"], dtype=np.int64)
            policy = OrderPolicy.from_dict(doc.get("policy") or {})
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed decomposition: {exc}") from exc
        if k < 0 or n < 1 or flat.size != n ** (k + 2):
            raise ValueError(f"assign has {flat.size} entries, expected {n}^{k + 2}")
        return cls(k, n, flat.reshape((n,) * (k + 2)), policy)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def base_decomposition(n: int) -> Decomposition:
    """Part 0 = {(a, b): a <= b}, part 1 = {(a, b): a > b}."""
    if n < 1:
        raise ValueError("n must be at least 1")
    a, b = np.indices((n, n))
    return Decomposition(0, n, _freeze((a > b).astype(np.int8)))


def complement_enumeration(j: int, parts: int) -> list[int]:
    """Increasing enumeration of {0, ..., parts-1} minus {j}."""
    return [i for i in range(parts) if i != j]


def largest_position(x) -> int:
    """Position of the largest coordinate; ties go to the last maximizer."""
    top = max(x)
    return max(i for i, v in enumerate(x) if v == top)


def step_decomposition(
    chooser: Callable[[int], Optional[np.ndarray]], n: int, k: int, policy: OrderPolicy = IDENTITY
) -> Decomposition:
    """Build the level-k decomposition of ``n^(k+2)`` from level-(k-1) choosers.

    ``chooser(alpha)`` must return the part array of a level-(k-1)
    decomposition of ``(alpha+1)^(k+1)``. A point x with largest coordinate
    at position j (alpha = x_j) goes to part phi_j(p), where p is the part of
    x-without-x_j under ``chooser(alpha)`` and phi_j enumerates the positions
    other than j in increasing order.
    """
    if k < 1:
        raise ValueError("step_decomposition builds levels k >= 1")
    dims = k + 2
    grid = np.indices((n,) * dims).reshape(dims, -1).T
    # last maximizer: argmax over the reversed coordinates
    j = dims - 1 - np.argmax(grid[:, ::-1], axis=1)
    alpha = grid[np.arange(len(grid)), j]
    keep = np.ones_like(grid, dtype=bool)
    keep[np.arange(len(grid)), j] = False
    rest = grid[keep].reshape(len(grid), dims - 1)

    p = np.empty(len(grid), dtype=np.int64)
    for a in range(n):
        rows = np.nonzero(alpha == a)[0]
        if rows.size == 0:
            continue
        table = chooser(a)
        if table is None:
            raise ChooserMissing(f"no decomposition chosen for alpha={a}", witness=a)
        if table.shape != (a + 1,) * (dims - 1):
            raise ValueError(f"chooser({a}) has shape {table.shape}, expected {(a + 1,) * (dims - 1)}")
        p[rows] = table[tuple(rest[rows].T)]
    part = p + (p >= j)
    return Decomposition(k, n, _freeze(part.astype(np.int8).reshape((n,) * dims)), policy)


def transported_chooser(lower: Decomposition, policy: OrderPolicy) -> Callable[[int], np.ndarray]:
    """Chooser that reads ``lower`` through ``policy.permutation(alpha)``.

    Because a point's part depends only on the point, the level-(k-1)
    decomposition of (alpha+1)^(k+1) is the corner of ``lower``.
    """

    def chooser(alpha: int) -> Optional[np.ndarray]:
        if alpha >= lower.n:
            return None
        corner = lower.assign[(slice(0, alpha + 1),) * (lower.k + 2)]
        perm = policy.permutation(alpha)
        return corner[np.ix_(*[perm] * (lower.k + 2))]

    return chooser


@lru_cache(maxsize=64)
def build_decomposition(k: int, n: int, policy: OrderPolicy = IDENTITY) -> Decomposition:
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return base_decomposition(n)
    lower = build_decomposition(k - 1, n, policy)
    return step_decomposition(transported_chooser(lower, policy), n, k, policy)


def decomposition_from_parts(k: int, n: int, parts) -> Decomposition:
    """Assemble a decomposition from explicit point sets, one per part."""
    if len(parts) != k + 2:
        raise ValueError(f"level {k} needs {k + 2} parts, got {len(parts)}")
    assign = np.full((n,) * (k + 2), -1, dtype=np.int8)
    for i, pts in enumerate(parts):
        for pt in pts:
            pt = tuple(pt)
            if assign[pt] != -1:
                raise NotPartition(f"{list(pt)} lies in parts {assign[pt]} and {i}", witness=list(pt))
            assign[pt] = i
    missing = np.argwhere(assign == -1)
    if len(missing):
        raise NotPartition(f"{missing[0].tolist()} lies in no part", witness=missing[0].tolist())
    return Decomposition(k, n, _freeze(assign))


# --- checking -----------------------------------------------------------------


@dataclass
class DecompositionReport:
    k: int
    n: int
    partition_ok: bool
    part_sizes: list
    max_direction_fiber: list
    truncation_stable: Optional[bool] = None
    compared_n: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "partition_ok": self.partition_ok,
            "part_sizes": self.part_sizes,
            "max_direction_fiber": self.max_direction_fiber,
            "truncation_stable": self.truncation_stable,
            "compared_n": self.compared_n,
        }


def direction_fibers(D: Decomposition, i: int) -> np.ndarray:
    """Sizes of part i along axis i, indexed by the other coordinates."""
    return (D.assign == i).sum(axis=i)


def check_decomposition(D: Decomposition, against=None) -> DecompositionReport:
    """Exhaustively verify the partition and the direction fibers of D.

    ``against`` (a larger decomposition, or a side length to rebuild at with
    D's policy) enables the truncation-stability comparison.
    """
    dims = D.k + 2
    if D.assign.shape != (D.n,) * dims:
        raise NotPartition(f"assign has shape {D.assign.shape}, expected {(D.n,) * dims}")
    bad = np.argwhere((D.assign < 0) | (D.assign >= dims))
    if len(bad):
        pt = bad[0].tolist()
        raise NotPartition(f"{pt} has part index {D.part_of(pt)}", witness=pt)
    sizes = np.bincount(D.assign.ravel().astype(np.int64), minlength=dims).tolist()
    fibers = [direction_fibers(D, i) for i in range(dims)]
    report = DecompositionReport(
        k=D.k,
        n=D.n,
        partition_ok=sum(sizes) == D.n**dims,
        part_sizes=sizes,
        max_direction_fiber=[int(f.max()) for f in fibers],
    )
    if against is not None:
        big = against if isinstance(against, Decomposition) else build_decomposition(D.k, int(against), D.policy)
        if big.k != D.k or big.n < D.n:
            raise ValueError("comparison decomposition must have the same level and a side >= n")
        corner = (slice(0, D.n),) * dims
        stable = bool(np.array_equal(big.assign[corner], D.assign))
        for i in range(dims):
            big_f = direction_fibers(big, i)[(slice(0, D.n),) * (dims - 1)]
            stable = stable and bool(np.array_equal(big_f, fibers[i]))
        report.truncation_stable = stable
        report.compared_n = big.n
    return report


def fiber_table(D: Decomposition) -> list:
    """CSV rows (part, direction, fixed_coords, fiber_size) for part i along axis i."""
    rows = [("part", "direction", "fixed_coords", "fiber_size")]
    dims = D.k + 2
    for i in range(dims):
        f = direction_fibers(D, i)
        for fixed in itertools.product(range(D.n), repeat=dims - 1):
            rows.append((i, i, ";".join(map(str, fixed)), int(f[fixed])))
    return rows


# --- schemes from decompositions --------------------------------------------


class _DropPart:
    """sigma(x) = x without its coordinate x_i, where x lies in part i."""

    def __init__(self, assign: np.ndarray):
        self.assign = assign

    def __call__(self, x: FinSet) -> FinSet:
        i = int(self.assign[tuple(x)])
        return tuple(x[:i]) + tuple(x[i + 1:])


def scheme_from_decomposition(D: Decomposition) -> CompressionScheme:
    """The (k+2) -> (k+1) scheme on ``range(n)`` induced by D, eta derived from sigma."""
    scheme = CompressionScheme(D.k + 2, D.k + 1, _DropPart(D.assign), name=f"kuratowski(k={D.k},n={D.n})")
    return eta_from_sigma(scheme, OrderedGround.naturals(D.n))
