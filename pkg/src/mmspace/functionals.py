"""Semicharacters and the scalar gauges D, D_A and Delta.

For an array ``A = (a_ij)`` of order ``n`` the semicharacter is

    chi_A(X) = E exp(-sum_{i<j} a_ij r(x_i, x_j)),   x_1..x_n iid ~ mu_X.

It is multiplicative under ``boxplus``, so ``D_A = -log chi_A`` is additive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BoxSum, FiniteMMSpace, Seed, as_space, rng_from
from .errors import BudgetExceeded, ParseError
from .factorization import Factorization

DEFAULT_CHI_BUDGET = 10**7
MC_BLOCK = 4096

# Constants of the two-sided comparison between Delta and D ^ 1.
KAPPA_DELTA = 0.5
KAPPA_LOWER = (1.0 - math.exp(-1.0)) * KAPPA_DELTA
KAPPA_UPPER = 1.0 / (1.0 - math.exp(-1.0))


@dataclass(frozen=True)
class SemicharacterSpec:
    """Nonnegative array ``a_ij`` (0-based ``i < j``) of order ``n``.

    ``n == 0`` is the empty spec, whose semicharacter is identically 1.
    """

    n: int
    entries: tuple[tuple[int, int, float], ...] = field(default=())

    def __post_init__(self):
        if self.n == 0:
            if self.entries:
                raise ValueError("the empty spec has no entries")
            return
        if self.n < 2:
            raise ValueError("order must be at least 2")
        seen = set()
        for i, j, a in self.entries:
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad index pair ({i}, {j}) for order {self.n}")
            if (i, j) in seen:
                raise ValueError(f"duplicate entry ({i}, {j})")
            seen.add((i, j))
            if not (math.isfinite(a) and a >= 0):
                raise ValueError("entries must be finite and nonnegative")
        if not any(a > 0 for _, _, a in self.entries):
            raise ValueError("a nonempty spec needs a positive entry")

    @classmethod
    def empty(cls) -> "SemicharacterSpec":
        return cls(0)

    @classmethod
    def pair(cls, a: float = 1.0) -> "SemicharacterSpec":
        """Order-2 spec ``{a_12 = a}``; ``pair(1)`` gives chi_1."""
        return cls(2, ((0, 1, float(a)),))

    @classmethod
    def from_matrix(cls, a) -> "SemicharacterSpec":
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        iu = zip(*np.triu_indices(n, 1))
        return cls(n, tuple((int(i), int(j), float(a[i, j])) for i, j in iu if a[i, j] > 0))

    @property
    def is_empty(self) -> bool:
        return self.n == 0

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.n, self.n))
        for i, j, a in self.entries:
            m[i, j] = m[j, i] = a
        return m

    def active(self) -> tuple[list[int], list[tuple[int, int, float]]]:
        """Indices touched by a positive entry, and entries relabeled onto them."""
        used = sorted({k for i, j, a in self.entries if a > 0 for k in (i, j)})
        pos = {k: r for r, k in enumerate(used)}
        ents = [(pos[i], pos[j], a) for i, j, a in self.entries if a > 0]
        return used, ents

    def to_dict(self) -> dict:
        return {"n": self.n, "a": [[i + 1, j + 1, a] for i, j, a in self.entries]}

    @classmethod
    def from_dict(cls, doc) -> "SemicharacterSpec":
        try:
            n = doc["n"]
            rows = doc["a"]
            entries = tuple((int(i) - 1, int(j) - 1, float(v)) for i, j, v in rows)
            return cls(int(n), entries)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad semicharacter spec: {exc}") from None


@dataclass(frozen=True)
class LaplaceEstimate:
    mean: float
    stderr: float
    nsamples: int

    def z_score(self, target: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == target else math.copysign(math.inf, self.mean - target)
        return (self.mean - target) / self.stderr

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "nsamples": self.nsamples}

    @classmethod
    def from_values(cls, values) -> "LaplaceEstimate":
        v = np.asarray(values, dtype=float)
        if v.size < 2:
            raise ValueError("need at least two samples for a standard error")
        mean = float(np.mean(v))
        se = float(np.std(v, ddof=1) / math.sqrt(v.size))
        return cls(mean, se, int(v.size))


# --------------------------------------------------------------------------
# exact evaluation


def statistic_law(A: SemicharacterSpec, X: FiniteMMSpace, budget: int = DEFAULT_CHI_BUDGET):
    """Distribution of ``S = sum a_ij r(x_i, x_j)`` under the product measure.

    Returns ``(values, probs)`` with distinct values.  ``chi_A(scale(t, X))``
    is then ``sum(probs * exp(-t * values))`` for every ``t > 0``.
    """
    key = ("law", A)
    cached = X._cache.get(key)
    if cached is not None:
        return cached
    if A.is_empty or X.n == 1:
        out = (np.zeros(1), np.ones(1))
        X._cache[key] = out
        return out
    used, ents = A.active()
    k = len(used)
    N = X.n
    if N**k > budget:
        raise BudgetExceeded(f"exact chi needs {N}^{k} terms, budget is {budget}")
    shape = (N,) * k
    S = np.zeros(shape)
    W = np.ones(shape)
    for axis in range(k):
        sh = [1] * k
        sh[axis] = N
        W = W * X.weights.reshape(sh)
    for i, j, a in ents:
        sh = [1] * k
        sh[i] = N
        sh[j] = N
        S = S + a * X.dist.reshape(sh)
    vals, inv = np.unique(S.ravel(), return_inverse=True)
    probs = np.bincount(inv.ravel(), weights=W.ravel(), minlength=vals.size)
    out = (vals, probs)
    X._cache[key] = out
    return out


def log_chi(A: SemicharacterSpec, X, budget: int = DEFAULT_CHI_BUDGET) -> float:
    if A.is_empty:
        return 0.0
    if isinstance(X, Factorization):
        return float(sum(m * log_chi(A, s, budget) for s, m in X.factors))
    if isinstance(X, BoxSum):
        total = 0.0
        for space, coefs in X.grouped().values():
            vals, probs = statistic_law(A, space, budget)
            total += float(np.sum(np.log(np.exp(-np.outer(coefs, vals)) @ probs)))
        return total
    vals, probs = statistic_law(A, X, budget)
    return math.log(float(np.dot(probs, np.exp(-vals))))


def chi(A: SemicharacterSpec, X, budget: int = DEFAULT_CHI_BUDGET) -> float:
    """Exact semicharacter by enumeration of ``X^n``.

    Raises :class:`BudgetExceeded` instead of falling back to sampling; use
    :func:`chi_monte_carlo` for large inputs.
    """
    if A.is_empty:
        return 1.0
    if isinstance(X, (BoxSum, Factorization)):
        return math.exp(log_chi(A, X, budget))
    vals, probs = statistic_law(A, X, budget)
    return float(np.dot(probs, np.exp(-vals)))


CHI_1 = SemicharacterSpec.pair(1.0)


def chi1(X, budget: int = DEFAULT_CHI_BUDGET) -> float:
    return chi(CHI_1, X, budget)


def bigD(X, budget: int = DEFAULT_CHI_BUDGET) -> float:
    return max(0.0, -log_chi(CHI_1, X, budget))


def bigDA(A: SemicharacterSpec, X, budget: int = DEFAULT_CHI_BUDGET) -> float:
    return max(0.0, -log_chi(A, X, budget))


def delta(X) -> float:
    """Expected pairwise distance truncated at 1."""
    X = as_space(X)
    w = X.weights
    return float(w @ np.minimum(X.dist, 1.0) @ w)


# --------------------------------------------------------------------------
# Monte Carlo


def _draw_statistic(A: SemicharacterSpec, X, size: int, rng: np.random.Generator) -> np.ndarray:
    used, ents = A.active()
    k = len(used)
    groups = X.grouped().values() if isinstance(X, BoxSum) else [(X, np.ones(1))]
    S = np.zeros(size)
    for space, coefs in groups:
        if space.n == 1:
            continue
        idx = rng.choice(space.n, size=(size, coefs.size, k), p=space.weights)
        for i, j, a in ents:
            S += a * (space.dist[idx[..., i], idx[..., j]] @ coefs)
    return S


def chi_monte_carlo(A: SemicharacterSpec, X, nsamples: int, seed: Seed = 0) -> LaplaceEstimate:
    """Unbiased estimate of ``chi_A(X)`` from i.i.d. point tuples.

    Samples are drawn in fixed blocks, block ``b`` using stream ``(seed, b)``.
    """
    if nsamples < 2:
        raise ValueError("nsamples must be at least 2")
    if A.is_empty:
        return LaplaceEstimate(1.0, 0.0, nsamples)
    out = np.empty(nsamples)
    for b, start in enumerate(range(0, nsamples, MC_BLOCK)):
        size = min(MC_BLOCK, nsamples - start)
        out[start : start + size] = np.exp(-_draw_statistic(A, X, size, rng_from(seed, b)))
    return LaplaceEstimate.from_values(out)


# --------------------------------------------------------------------------
# inequalities


def chi_exponent_bounds(A: SemicharacterSpec) -> tuple[float, float]:
    """Exponents ``(hi, lo)`` with ``chi_1^hi <= chi_A <= chi_1^lo``.

    ``lo = min(max a_ij, 1)``; ``hi = max(c, 1) * (n - 1)`` where ``c`` is the
    largest row sum of the symmetrized array.
    """
    if A.is_empty:
        raise ValueError("exponent bounds need a nonempty spec")
    m = A.matrix()
    c = float(m.sum(axis=1).max())
    lo = min(float(m.max()), 1.0)
    hi = max(c, 1.0) * (A.n - 1)
    return hi, lo


@dataclass(frozen=True)
class KappaReport:
    bigD: float
    delta: float
    lower: float
    upper: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "D": self.bigD,
            "delta": self.delta,
            "lower": self.lower,
            "upper": self.upper,
            "kappa_lower": KAPPA_LOWER,
            "kappa_upper": KAPPA_UPPER,
            "passed": self.passed,
        }


def check_kappa_chain(X, slack: float = 1e-12) -> KappaReport:
    """Check ``k' (D ^ 1) <= Delta <= k'' (D ^ 1)`` for one space."""
    d = bigD(X)
    dl = delta(X)
    m = min(d, 1.0)
    lower, upper = KAPPA_LOWER * m, KAPPA_UPPER * m
    ok = lower <= dl + slack and dl <= upper + slack
    return KappaReport(d, dl, lower, upper, ok)
