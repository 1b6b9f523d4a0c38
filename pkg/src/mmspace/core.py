"""Finite metric measure spaces and the ``boxplus`` semigroup operation.

A :class:`FiniteMMSpace` is an immutable pair ``(dist, weights)``.  The
product ``X boxplus Y`` lives on the Cartesian product with the sum metric
and the product measure; point ``(i, j)`` gets index ``i * nY + j``.

Large products that never need to be written out point by point are kept
in factored form as a :class:`BoxSum`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    BadScale,
    BadWeights,
    DuplicatePoints,
    NotAMetric,
    ParseError,
    SizeOverflow,
    TooLarge,
)

QUANTUM = 1e-9
DEFAULT_SIZE_BUDGET = 4096
WEIGHT_SUM_TOL = 1e-12
MAX_CANONICAL_LEAVES = 20000


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class FiniteMMSpace:
    """Finite point set with a distance matrix and full-support weights.

    Instances are immutable.  Use :func:`new_space` to build a validated
    space from raw data.
    """

    __slots__ = ("dist", "weights", "_cache")

    def __init__(self, dist, weights):
        self.dist = _readonly(dist)
        self.weights = _readonly(weights)
        self._cache = {}

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"FiniteMMSpace(n={self.n}, diam={diam(self):.6g})"

    def is_trivial(self) -> bool:
        return self.n == 1


Space = FiniteMMSpace
Seed = Union[int, np.random.Generator, None]


def rng_from(seed: Seed, *stream: int) -> np.random.Generator:
    """Generator for ``seed`` and an optional sub-stream index."""
    if isinstance(seed, np.random.Generator):
        return seed
    base = 0 if seed is None else int(seed)
    return np.random.default_rng([base, *map(int, stream)])


def metric_tolerance(dist: np.ndarray) -> float:
    scale_ = float(np.max(np.abs(dist))) if dist.size else 0.0
    return QUANTUM * max(1.0, scale_)


def new_space(dist, weights) -> FiniteMMSpace:
    """Validate ``dist`` and ``weights`` and wrap them as a space."""
    try:
        d = np.array(dist, dtype=float)
        w = np.array(weights, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"non-numeric space data: {exc}") from None
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
        raise NotAMetric(f"distance matrix must be square and non-empty, got shape {d.shape}")
    if w.ndim != 1 or w.shape[0] != d.shape[0]:
        raise BadWeights(f"expected {d.shape[0]} weights, got shape {w.shape}")
    if not np.all(np.isfinite(d)):
        raise NotAMetric("distances must be finite")
    if not np.all(np.isfinite(w)):
        raise BadWeights("weights must be finite")

    n = d.shape[0]
    tol = metric_tolerance(d)
    if np.any(w <= 0):
        raise BadWeights("weights must be strictly positive (full support)")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise BadWeights(f"weights sum to {float(w.sum())!r}, not 1")
    if np.any(np.diag(d) != 0):
        raise NotAMetric("distance matrix has a nonzero diagonal")
    if np.any(np.abs(d - d.T) > tol):
        raise NotAMetric("distance matrix is not symmetric")
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] < 0):
        raise NotAMetric("negative distance")
    if np.any(d[off] == 0):
        raise DuplicatePoints("distinct points at distance 0")
    for j in range(n):
        if np.any(d > d[:, j : j + 1] + d[j : j + 1, :] + tol):
            raise NotAMetric("triangle inequality violated")
    d = 0.5 * (d + d.T)
    return FiniteMMSpace(d, w)


def trivial() -> FiniteMMSpace:
    """The one-point space, neutral element of ``boxplus``."""
    return FiniteMMSpace([[0.0]], [1.0])


def two_point(p: float, d: float) -> FiniteMMSpace:
    """Two points at distance ``d`` with weights ``(1 - p, p)``."""
    return new_space([[0.0, d], [d, 0.0]], [1.0 - p, p])


def _check_size(n: int, budget: int) -> None:
    if n > budget:
        raise SizeOverflow(f"product has {n} points, budget is {budget}")


def boxplus(X, Y, budget: int = DEFAULT_SIZE_BUDGET):
    """Product space with summed metrics and product measure.

    If either argument is a :class:`BoxSum` the result stays factored.
    """
    if isinstance(X, BoxSum) or isinstance(Y, BoxSum):
        return BoxSum.of(X) + BoxSum.of(Y)
    nx_, ny = X.n, Y.n
    _check_size(nx_ * ny, budget)
    d = (X.dist[:, None, :, None] + Y.dist[None, :, None, :]).reshape(nx_ * ny, nx_ * ny)
    w = np.outer(X.weights, Y.weights).ravel()
    return FiniteMMSpace(d, w)


def boxplus_all(spaces: Iterable[FiniteMMSpace], budget: int = DEFAULT_SIZE_BUDGET) -> FiniteMMSpace:
    spaces = list(spaces)
    _check_size(math.prod(s.n for s in spaces), budget)
    out = trivial()
    for s in spaces:
        out = boxplus(out, s, budget)
    return out


def boxplus_pow(X: FiniteMMSpace, k: int, budget: int = DEFAULT_SIZE_BUDGET) -> FiniteMMSpace:
    if k < 0:
        raise ValueError("power must be nonnegative")
    _check_size(X.n**k, budget)
    return boxplus_all([X] * k, budget)


def scale(a: float, X):
    """Multiply all distances by ``a > 0``."""
    a = float(a)
    if not (math.isfinite(a) and a > 0):
        raise BadScale(f"scale factor must be positive and finite, got {a!r}")
    if isinstance(X, BoxSum):
        return X.scaled(a)
    return FiniteMMSpace(a * X.dist, X.weights)


def diam(X) -> float:
    if isinstance(X, BoxSum):
        return X.diam()
    return float(X.dist.max())


# --------------------------------------------------------------------------
# isomorphism


def _profiles(X: FiniteMMSpace) -> np.ndarray:
    return np.sort(X.dist, axis=1)


def is_isomorphic(X: FiniteMMSpace, Y: FiniteMMSpace, tol: float = QUANTUM) -> bool:
    """Search for a bijection preserving distances and weights within ``tol``."""
    if X.n != Y.n:
        return False
    n = X.n
    if not np.allclose(np.sort(X.weights), np.sort(Y.weights), rtol=0, atol=tol):
        return False
    tol_d = tol * max(1.0, diam(X))
    if not np.allclose(np.sort(X.dist, axis=None), np.sort(Y.dist, axis=None), rtol=0, atol=tol_d):
        return False
    px, py = _profiles(X), _profiles(Y)
    compat = np.abs(X.weights[:, None] - Y.weights[None, :]) <= tol
    for i in range(n):
        rows = compat[i]
        if rows.any():
            close = np.all(np.abs(py[rows] - px[i]) <= tol_d, axis=1)
            rows[np.flatnonzero(rows)[~close]] = False
        if not rows.any():
            return False

    # most constrained points first
    order = [int(i) for i in np.lexsort((np.arange(n), compat.sum(axis=1)))]

    assign = np.full(n, -1)
    used = np.zeros(n, dtype=bool)
    stack: list[list] = []

    def candidates(depth: int) -> list:
        x = order[depth]
        ok = compat[x] & ~used
        if depth:
            xs = np.array(order[:depth])
            ys = assign[xs]
            ok &= np.all(np.abs(Y.dist[:, ys] - X.dist[x, xs]) <= tol_d, axis=1)
        return list(np.flatnonzero(ok)[::-1])

    depth = 0
    stack.append(candidates(0))
    while stack:
        cands = stack[-1]
        x = order[depth]
        if assign[x] >= 0:
            used[assign[x]] = False
            assign[x] = -1
        if not cands:
            stack.pop()
            depth -= 1
            continue
        y = cands.pop()
        assign[x] = y
        used[y] = True
        if depth == n - 1:
            return True
        depth += 1
        stack.append(candidates(depth))
    return False


# --------------------------------------------------------------------------
# canonical labeling


def _rank(values: np.ndarray) -> np.ndarray:
    return np.unique(values, return_inverse=True)[1].reshape(values.shape)


def _refine(colors: np.ndarray, drank: np.ndarray) -> np.ndarray:
    m = int(drank.max()) + 1
    while True:
        rows = np.sort(colors[None, :].astype(np.int64) * m + drank, axis=1)
        full = np.column_stack([colors, rows])
        new = np.unique(full, axis=0, return_inverse=True)[1].ravel()
        if new.max() == colors.max():
            return new
        colors = new


def _canonical(X: FiniteMMSpace, quantum: float) -> tuple[bytes, np.ndarray]:
    cached = X._cache.get(("canon", quantum))
    if cached is not None:
        return cached
    n = X.n
    dq = np.rint(X.dist / quantum).astype(np.int64)
    wq = np.rint(X.weights / quantum).astype(np.int64)
    drank = _rank(dq)
    iu = np.triu_indices(n, 1)

    best: tuple | None = None
    leaves = 0
    stack = [_refine(_rank(wq), drank)]
    while stack:
        colors = stack.pop()
        if colors.max() == n - 1:
            leaves += 1
            if leaves > MAX_CANONICAL_LEAVES:
                raise TooLarge("canonical labeling search exceeded its leaf budget")
            perm = np.argsort(colors)
            ser = np.concatenate([wq[perm], dq[np.ix_(perm, perm)][iu]])
            t = tuple(ser.tolist())
            if best is None or t < best[0]:
                best = (t, ser, perm)
            continue
        counts = np.bincount(colors)
        target = int(np.flatnonzero(counts > 1)[0])
        for v in np.flatnonzero(colors == target)[::-1]:
            c = colors * 2
            c[v] -= 1
            stack.append(_refine(_rank(c), drank))

    header = np.array([n], dtype=">i8").tobytes()
    key = b"MMS1" + header + best[1].astype(">i8").tobytes()
    X._cache[("canon", quantum)] = (key, best[2])
    return key, best[2]


def canonical_key(X: FiniteMMSpace, quantum: float = QUANTUM) -> bytes:
    """Permutation-invariant byte key; equal keys iff isomorphic at ``quantum``.

    Points are ordered by individualization-refinement on the quantized data
    and the lexicographically smallest serialization among the leaves wins.
    """
    return _canonical(X, quantum)[0]


def canonical_form(X: FiniteMMSpace, quantum: float = QUANTUM) -> FiniteMMSpace:
    """Relabel ``X`` in the order its canonical key was serialized."""
    key, perm = _canonical(X, quantum)
    out = FiniteMMSpace(X.dist[np.ix_(perm, perm)], X.weights[perm])
    out._cache[("canon", quantum)] = (key, np.arange(X.n))
    return out


# --------------------------------------------------------------------------
# sampling


def sample_distance_matrix(X, m: int, seed: Seed = 0) -> np.ndarray:
    """Pairwise distances of ``m`` i.i.d. points drawn from the weights."""
    if m < 1:
        raise ValueError("m must be at least 1")
    rng = rng_from(seed)
    if isinstance(X, BoxSum):
        out = np.zeros((m, m))
        for c, s in X.terms:
            out += c * sample_distance_matrix(s, m, rng)
        return out
    idx = rng.choice(X.n, size=m, p=X.weights)
    return X.dist[np.ix_(idx, idx)].copy()


# --------------------------------------------------------------------------
# factored products


@dataclass(frozen=True)
class BoxSum:
    """Formal product ``scale(c_1, S_1) boxplus ... boxplus scale(c_k, S_k)``.

    Only the factors are stored, so products with astronomically many
    points (long LePage sums, n-fold averages) stay cheap.  Functionals that
    are additive or multiplicative under ``boxplus`` are evaluated term by
    term; :meth:`materialize` builds the explicit space when it fits.
    """

    terms: tuple[tuple[float, FiniteMMSpace], ...] = ()

    @classmethod
    def of(cls, X) -> "BoxSum":
        if isinstance(X, BoxSum):
            return X
        return cls(((1.0, X),))

    @classmethod
    def from_scaled(cls, coefs: Sequence[float], spaces: Sequence[FiniteMMSpace]) -> "BoxSum":
        return cls(tuple((float(c), s) for c, s in zip(coefs, spaces)))

    def __add__(self, other: "BoxSum") -> "BoxSum":
        return BoxSum(self.terms + BoxSum.of(other).terms)

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def n(self) -> int:
        return math.prod(s.n for _, s in self.terms)

    def scaled(self, a: float) -> "BoxSum":
        return BoxSum(tuple((a * c, s) for c, s in self.terms))

    def diam(self) -> float:
        return float(sum(c * float(s.dist.max()) for c, s in self.terms))

    def nontrivial_terms(self) -> "BoxSum":
        return BoxSum(tuple((c, s) for c, s in self.terms if s.n > 1))

    def materialize(self, budget: int = DEFAULT_SIZE_BUDGET) -> FiniteMMSpace:
        terms = self.nontrivial_terms().terms
        _check_size(math.prod(s.n for _, s in terms), budget)
        return boxplus_all((scale(c, s) for c, s in terms), budget)

    def grouped(self) -> dict[int, tuple[FiniteMMSpace, np.ndarray]]:
        """Coefficients grouped by the identity of the underlying space."""
        groups: dict[int, tuple[FiniteMMSpace, list]] = {}
        for c, s in self.terms:
            groups.setdefault(id(s), (s, []))[1].append(c)
        return {k: (s, np.asarray(cs, dtype=float)) for k, (s, cs) in groups.items()}


def as_space(X, budget: int = DEFAULT_SIZE_BUDGET) -> FiniteMMSpace:
    return X.materialize(budget) if isinstance(X, BoxSum) else X


# --------------------------------------------------------------------------
# JSON


def space_to_dict(X) -> dict:
    X = as_space(X)
    return {
        "n": X.n,
        "dist": [[float(v) for v in row] for row in X.dist],
        "weights": [float(v) for v in X.weights],
    }


def space_from_dict(doc) -> FiniteMMSpace:
    if not isinstance(doc, dict):
        raise ParseError("space must be a JSON object")
    try:
        n = doc["n"]
        dist = doc["dist"]
        weights = doc["weights"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ParseError("'n' must be a positive integer")
    if not isinstance(dist, list) or len(dist) != n:
        raise ParseError(f"'dist' must have {n} rows")
    for row in dist:
        if not isinstance(row, list) or len(row) != n:
            raise ParseError("ragged distance matrix")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in row):
            raise ParseError("non-numeric distance entry")
    if not isinstance(weights, list) or len(weights) != n:
        raise ParseError(f"'weights' must have {n} entries")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in weights):
        raise ParseError("non-numeric weight")
    return new_space(dist, weights)
