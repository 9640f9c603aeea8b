"""Numeric probes for selectors sigma: [I]^(m+1) -> [I]^m with sigma(x) inside x.

A continuous selector must drop the same coordinate on a whole neighbourhood
of every point, hence everywhere, and then every fiber contains a segment.
The probes here sample that behaviour: local constancy of the dropped index
in small balls, and explicit families of distinct points sharing one image.

Selector rules are vectorized: they map an array of shape (N, m+1) with
strictly increasing rows to an array of shape (N, m).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from emxkit.errors import AmbiguousDrop, DegenerateGap, ImageDrift, NotSubtuple

TAU = 1e-9


@dataclass(frozen=True)
class Selector:
    name: str
    m: int
    rule: Callable[[np.ndarray], np.ndarray]
    claimed_continuous: bool = True

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.rule(x[None, :])[0]
        return self.rule(x)

    @classmethod
    def from_pointwise(cls, name: str, m: int, fn, claimed_continuous: bool = True) -> "Selector":
        """Wrap a function on single points (sequences of m+1 floats)."""

        def rule(X):
            return np.array([np.asarray(fn(tuple(row)), dtype=float) for row in X]).reshape(len(X), m)

        return cls(name, m, rule, claimed_continuous)


def _drop_column(X: np.ndarray, cols: np.ndarray) -> np.ndarray:
    keep = np.ones(X.shape, dtype=bool)
    keep[np.arange(len(X)), cols] = False
    return X[keep].reshape(len(X), X.shape[1] - 1)


def drop_last(m: int) -> Selector:
    return Selector("drop-last", m, lambda X: X[:, :-1])


def drop_first(m: int) -> Selector:
    return Selector("drop-first", m, lambda X: X[:, 1:])


def drop_middle(m: int) -> Selector:
    mid = (m + 1) // 2
    return Selector("drop-middle", m, lambda X: np.delete(X, mid, axis=1))


def parity(m: int) -> Selector:
    """Drop the first coordinate when floor(10 * sum(x)) is even, else the last."""

    def rule(X):
        odd = np.floor(10 * X.sum(axis=1)).astype(np.int64) % 2
        return _drop_column(X, np.where(odd == 0, 0, X.shape[1] - 1))

    return Selector("parity", m, rule, claimed_continuous=False)


GALLERY = {"drop-last": drop_last, "drop-first": drop_first, "drop-middle": drop_middle, "parity": parity}


def gallery(m: int) -> list[Selector]:
    return [make(m) for make in GALLERY.values()]


# --- primitives -------------------------------------------------------------


def epsilon_gap(x) -> float:
    """One third of the smallest gap between consecutive coordinates."""
    x = np.asarray(x, dtype=float)
    gaps = np.diff(x)
    if len(gaps) == 0:
        raise DegenerateGap("need at least two coordinates")
    if gaps.min() <= TAU:
        raise DegenerateGap(f"coordinates of {x.tolist()} are not separated", witness=x.tolist())
    return float(gaps.min()) / 3


def _drop_indices(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise missing index of Y inside X; raises on the first bad row."""
    match = np.abs(Y[:, :, None] - X[:, None, :]) <= TAU  # (N, m, m+1)
    per_entry = match.sum(axis=2)
    if (per_entry > 1).any():
        r = int(np.argwhere(per_entry > 1)[0, 0])
        raise AmbiguousDrop(f"{X[r].tolist()} has coordinates closer than tau", witness=X[r].tolist())
    used = match.sum(axis=1)  # (N, m+1)
    bad = (per_entry == 0).any(axis=1) | (used > 1).any(axis=1)
    if bad.any():
        r = int(np.argmax(bad))
        raise NotSubtuple(f"{Y[r].tolist()} is not a sub-tuple of {X[r].tolist()}", witness=X[r].tolist())
    return np.argmin(used, axis=1)


def drop_index(sel: Selector, x) -> int:
    """Index of the coordinate of x that sel(x) leaves out."""
    x = np.asarray(x, dtype=float)[None, :]
    return int(_drop_indices(x, sel.rule(x))[0])


def _sample_ball(x: np.ndarray, radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Points in the sup-norm ball of radius around x, kept inside [0, 1]^(m+1)."""
    lo = np.maximum(x - radius, 0.0)
    hi = np.minimum(x + radius, 1.0)
    return lo + (hi - lo) * rng.random((count, len(x)))


def local_constancy_probe(sel: Selector, x, radius: float, trials: int, seed: int) -> bool:
    """True iff sel drops the same index at ``trials`` random points near x.

    ``radius`` must not exceed epsilon_gap(x), which keeps every sample
    strictly increasing with its coordinates in the same order.
    """
    return _first_disagreement(sel, x, radius, trials, seed) is None


def _first_disagreement(sel, x, radius, trials, seed) -> Optional[list]:
    x = np.asarray(x, dtype=float)
    gap = epsilon_gap(x)
    if radius > gap:
        raise ValueError(f"radius {radius} exceeds the epsilon gap {gap}")
    if trials == 0:
        return None
    i = drop_index(sel, x)
    Y = _sample_ball(x, radius, trials, np.random.default_rng(seed))
    idx = _drop_indices(Y, sel.rule(Y))
    off = np.nonzero(idx != i)[0]
    return None if off.size == 0 else Y[off[0]].tolist()


def fiber_sampler(sel: Selector, x, K: int) -> np.ndarray:
    """K distinct points with the same image as x under sel.

    The dropped coordinate i is moved across the whole open interval between
    its neighbours (or the ends of [0, 1]), keeping 3*tau clear of them;
    every point is checked to map to sel(x).
    """
    x = np.asarray(x, dtype=float)
    i = drop_index(sel, x)
    lo = x[i - 1] + 3 * TAU if i > 0 else 0.0
    hi = x[i + 1] - 3 * TAU if i < len(x) - 1 else 1.0
    ts = np.linspace(lo, hi, K + 2)[1:-1]
    if K > 1 and ts[1] - ts[0] <= TAU:
        raise ValueError("interval too short for that many distinct witnesses")
    pts = np.repeat(x[None, :], K, axis=0)
    pts[:, i] = ts
    target = sel.rule(x[None, :])[0]
    images = sel.rule(pts)
    if images.shape != (K, sel.m):
        raise NotSubtuple(f"selector returned shape {images.shape}")
    drift = np.abs(images - target).max(axis=1) > TAU
    if drift.any():
        r = int(np.argmax(drift))
        raise ImageDrift(
            f"{pts[r].tolist()} maps to {images[r].tolist()}, not {target.tolist()}", witness=pts[r].tolist()
        )
    return pts


# --- probe points ------------------------------------------------------------


def random_increasing(m: int, count: int, rng: np.random.Generator, min_gap: float = 1e-3) -> np.ndarray:
    """Random strictly increasing points of [0, 1]^(m+1) with gaps >= min_gap."""
    out = np.empty((0, m + 1))
    while len(out) < count:
        X = np.sort(rng.random((2 * count, m + 1)), axis=1)
        ok = np.diff(X, axis=1).min(axis=1) >= min_gap
        out = np.vstack([out, X[ok]])
    return out[:count]


def parity_boundary_point(m: int, seed: int = 0, offset: float = 1e-7) -> np.ndarray:
    """A point whose coordinate sum sits ``offset`` below a multiple of 0.1.

    Any ball around it of radius much larger than ``offset`` straddles a
    parity flip of the parity selector.
    """
    rng = np.random.default_rng(seed)
    x = random_increasing(m, 1, rng, min_gap=0.1 / (m + 1))[0] * 0.8 + 0.1
    s = x.sum()
    target = np.ceil(10 * s) / 10 - offset
    return x + (target - s) / (m + 1)


@dataclass
class ProbeReport:
    selector: str
    m: int
    x: list
    epsilon_gap: float
    drop_index: int
    locally_constant: bool
    witnesses_count: int
    seed: int
    drift: Optional[list] = None
    fiber_witnesses: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        out = {
            "selector": self.selector,
            "m": self.m,
            "x": self.x,
            "epsilon_gap": self.epsilon_gap,
            "drop_index": self.drop_index,
            "locally_constant": self.locally_constant,
            "witnesses_count": self.witnesses_count,
            "seed": self.seed,
        }
        if self.drift is not None:
            out["drift"] = self.drift
        return out


def probe(sel: Selector, x, trials: int, seed: int, K: int = 1000) -> ProbeReport:
    """Local constancy at radius epsilon_gap/2 plus a K-point fiber witness.

    ImageDrift from the sampler is recorded in the report, not raised.
    """
    x = np.asarray(x, dtype=float)
    gap = epsilon_gap(x)
    disagreement = _first_disagreement(sel, x, gap / 2, trials, seed)
    drift = disagreement
    witnesses = np.empty((0, len(x)))
    try:
        witnesses = fiber_sampler(sel, x, K)
    except ImageDrift as exc:
        drift = drift or exc.witness
    return ProbeReport(
        selector=sel.name,
        m=sel.m,
        x=x.tolist(),
        epsilon_gap=gap,
        drop_index=drop_index(sel, x),
        locally_constant=disagreement is None,
        witnesses_count=len(witnesses),
        seed=seed,
        drift=drift,
        fiber_witnesses=witnesses.tolist(),
    )
