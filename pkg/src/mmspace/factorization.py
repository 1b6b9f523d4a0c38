"""Prime factorization of finite metric measure spaces under ``boxplus``.

Splitting works on the betweenness graph: two points are adjacent when no
third point lies metrically between them.  For ``X = Y boxplus Z`` this graph
is the Cartesian product of the graphs of ``Y`` and ``Z``, and two edges taken
from different factors always satisfy ``d(a,c) + d(b,e) = d(a,e) + d(b,c)``.
Edges violating that identity are therefore grouped together; every split
of ``X`` is a bipartition of these edge classes, which is checked directly
for additivity of the metric and for the product measure.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import (
    DEFAULT_SIZE_BUDGET,
    QUANTUM,
    FiniteMMSpace,
    boxplus_all,
    boxplus_pow,
    canonical_form,
    canonical_key,
    new_space,
    space_from_dict,
    space_to_dict,
    trivial,
)
from .errors import AmbiguousFactorization, NotDivisible, ParseError, TooLarge

MAX_SPLIT_POINTS = 64
MAX_EDGE_CLASSES = 18
AMBIGUITY_BAND = 1e3


def _betweenness_edges(d: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    n = d.shape[0]
    through = d[:, :, None] + d[None, :, :]  # [a, w, b] = d(a,w) + d(w,b)
    between = through <= d[:, None, :] + tol
    idx = np.arange(n)
    between[idx, idx, :] = False
    between[:, idx, idx] = False
    adjacent = ~between.any(axis=1)
    a, b = np.nonzero(np.triu(adjacent, 1))
    return a, b


def _edge_classes(d: np.ndarray, a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    gap = d[np.ix_(a, a)] + d[np.ix_(b, b)] - d[np.ix_(a, b)] - d[np.ix_(b, a)]
    related = np.abs(gap) > tol
    return connected_components(csr_matrix(related), directed=False)[1]


def _components(n: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    g = csr_matrix((np.ones(a.size), (a, b)), shape=(n, n))
    return connected_components(g, directed=False)[1]


def _try_split(X: FiniteMMSpace, ya, yb, za, zb, tol):
    """Check one edge bipartition; returns (residual, Y, Z) or None."""
    n = X.n
    along_y = _components(n, ya, yb)  # fibres Y x {z}
    along_z = _components(n, za, zb)  # fibres {y} x Z
    q = along_y.max() + 1
    p = along_z.max() + 1
    if p < 2 or q < 2 or p * q != n:
        return None
    grid = np.full((p, q), -1)
    grid[along_z, along_y] = np.arange(n)
    if np.any(grid < 0):
        return None
    ry = X.dist[np.ix_(grid[:, 0], grid[:, 0])]
    rz = X.dist[np.ix_(grid[0, :], grid[0, :])]
    perm = grid.ravel()
    expect = (ry[:, None, :, None] + rz[None, :, None, :]).reshape(n, n)
    metric_res = float(np.max(np.abs(X.dist[np.ix_(perm, perm)] - expect)))
    w = X.weights[grid]
    wy, wz = w.sum(axis=1), w.sum(axis=0)
    measure_res = float(np.max(np.abs(w - np.outer(wy, wz))))
    res = max(metric_res / max(tol / QUANTUM, 1.0), measure_res)
    return res, (ry, wy / wy.sum()), (rz, wz / wz.sum())


def find_factor_split(X: FiniteMMSpace, max_points: int = MAX_SPLIT_POINTS):
    """Return ``(Y, Z)`` with ``X`` isomorphic to ``Y boxplus Z``, both nontrivial, or None."""
    n = X.n
    if n > max_points:
        raise TooLarge(f"factor search limited to {max_points} points, got {n}")
    if n < 4 or all(n % p for p in range(2, math.isqrt(n) + 1)):
        return None
    tol = QUANTUM * max(1.0, float(X.dist.max()))
    a, b = _betweenness_edges(X.dist, tol)
    cls = _edge_classes(X.dist, a, b, tol)
    k = int(cls.max()) + 1
    if k < 2:
        return None
    if k > MAX_EDGE_CLASSES:
        raise TooLarge(f"{k} edge classes; bipartition search capped at {MAX_EDGE_CLASSES}")
    ambiguous = None
    for mask in range((1 << (k - 1)) - 1):
        in_y = ((mask << 1 | 1) >> cls) & 1 == 1  # class 0 always on the Y side
        if in_y.all():
            continue
        found = _try_split(X, a[in_y], b[in_y], a[~in_y], b[~in_y], tol)
        if found is None:
            continue
        res, (ry, wy), (rz, wz) = found
        if res <= QUANTUM:
            return new_space(ry, wy), new_space(rz, wz)
        if res <= AMBIGUITY_BAND * QUANTUM and ambiguous is None:
            ambiguous = res
    if ambiguous is not None:
        raise AmbiguousFactorization(
            f"a split matches only to within {ambiguous:.3g}; refusing to guess"
        )
    return None


def is_irreducible(X: FiniteMMSpace, max_points: int = MAX_SPLIT_POINTS) -> bool:
    return X.n > 1 and find_factor_split(X, max_points) is None


@dataclass(frozen=True)
class Factorization:
    """Multiset of irreducible factors in canonical labeling, sorted by key."""

    factors: tuple[tuple[FiniteMMSpace, int], ...] = ()

    @classmethod
    def from_counts(cls, spaces: dict[bytes, FiniteMMSpace], counts) -> "Factorization":
        items = sorted((k, m) for k, m in counts.items() if m > 0)
        return cls(tuple((spaces[k], int(m)) for k, m in items))

    @property
    def keys(self) -> tuple[bytes, ...]:
        return tuple(canonical_key(s) for s, _ in self.factors)

    def counts(self) -> Counter:
        return Counter({canonical_key(s): m for s, m in self.factors})

    def spaces(self) -> dict[bytes, FiniteMMSpace]:
        return {canonical_key(s): s for s, _ in self.factors}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Factorization):
            return NotImplemented
        return self.counts() == other.counts()

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.counts().items())))

    def __len__(self) -> int:
        return sum(m for _, m in self.factors)

    @property
    def size(self) -> int:
        """Point count of the product."""
        return math.prod(s.n**m for s, m in self.factors)

    def _combine(self, other: "Factorization", op) -> "Factorization":
        spaces = {**self.spaces(), **other.spaces()}
        a, b = self.counts(), other.counts()
        return Factorization.from_counts(spaces, {k: op(a[k], b[k]) for k in spaces})

    def __add__(self, other: "Factorization") -> "Factorization":
        return self._combine(other, lambda x, y: x + y)

    def issubset(self, other: "Factorization") -> bool:
        theirs = other.counts()
        return all(theirs[k] >= m for k, m in self.counts().items())

    def to_dict(self) -> dict:
        return {"factors": [{"space": space_to_dict(s), "mult": m} for s, m in self.factors]}

    @classmethod
    def from_dict(cls, doc) -> "Factorization":
        try:
            rows = doc["factors"]
            pairs = [(canonical_form(space_from_dict(r["space"])), int(r["mult"])) for r in rows]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad factorization document: {exc}") from None
        spaces, counts = {}, Counter()
        for s, m in pairs:
            if m < 1:
                raise ParseError("multiplicities must be positive")
            k = canonical_key(s)
            spaces[k] = s
            counts[k] += m
        return cls.from_counts(spaces, counts)


def factorize(X: FiniteMMSpace, max_points: int = MAX_SPLIT_POINTS) -> Factorization:
    """Split recursively until every factor is irreducible, then merge copies."""
    if X.n > max_points:
        raise TooLarge(f"factor search limited to {max_points} points, got {X.n}")
    spaces: dict[bytes, FiniteMMSpace] = {}
    counts: Counter = Counter()
    stack = [X]
    while stack:
        S = stack.pop()
        if S.n == 1:
            continue
        split = find_factor_split(S, max_points)
        if split is None:
            c = canonical_form(S)
            k = canonical_key(c)
            spaces.setdefault(k, c)
            counts[k] += 1
        else:
            stack.extend(split)
    return Factorization.from_counts(spaces, counts)


psi = factorize


def sigma(F: Factorization, budget: int = DEFAULT_SIZE_BUDGET) -> FiniteMMSpace:
    """Product of the factors with their multiplicities."""
    if not F.factors:
        return trivial()
    parts = [boxplus_pow(s, m, budget) for s, m in F.factors]
    return boxplus_all(parts, budget)


def divides(Y: FiniteMMSpace, X: FiniteMMSpace, max_points: int = MAX_SPLIT_POINTS) -> bool:
    """True when ``X`` is isomorphic to ``Y boxplus Z`` for some ``Z``."""
    if X.n % Y.n:
        return False
    return factorize(Y, max_points).issubset(factorize(X, max_points))


def quotient(X: FiniteMMSpace, Y: FiniteMMSpace, max_points: int = MAX_SPLIT_POINTS) -> FiniteMMSpace:
    """The unique ``Z`` with ``X`` isomorphic to ``Y boxplus Z``."""
    fx, fy = factorize(X, max_points), factorize(Y, max_points)
    if not fy.issubset(fx):
        raise NotDivisible("second space does not divide the first")
    return sigma(fx._combine(fy, lambda a, b: a - b))


def meet(X: FiniteMMSpace, Y: FiniteMMSpace, max_points: int = MAX_SPLIT_POINTS) -> FiniteMMSpace:
    return sigma(factorize(X, max_points)._combine(factorize(Y, max_points), min))


def join(X: FiniteMMSpace, Y: FiniteMMSpace, max_points: int = MAX_SPLIT_POINTS, budget: int = DEFAULT_SIZE_BUDGET) -> FiniteMMSpace:
    return sigma(factorize(X, max_points)._combine(factorize(Y, max_points), max), budget)


def nth_root(X: FiniteMMSpace, k: int, max_points: int = MAX_SPLIT_POINTS) -> FiniteMMSpace | None:
    """``W`` with ``W^k`` isomorphic to ``X``, or None if no such space exists."""
    if k < 2:
        raise ValueError("root order must be at least 2")
    F = factorize(X, max_points)
    if any(m % k for _, m in F.factors):
        return None
    return sigma(Factorization(tuple((s, m // k) for s, m in F.factors)))

