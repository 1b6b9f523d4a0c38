"""Random metric measure spaces: Levy, stable, thinned and discrete stable laws.

Samplers return :class:`~mmspace.core.BoxSum` values, the factored form of a
product, because stable samples routinely have hundreds of factors.  Call
``.materialize()`` when an explicit space is needed and fits the budget.

Every batch routine derives the generator of sample ``i`` from
``(seed, i)``; results do not depend on the number of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .core import (
    BoxSum,
    FiniteMMSpace,
    Seed,
    as_space,
    canonical_form,
    diam,
    rng_from,
    scale,
    space_from_dict,
    space_to_dict,
)
from .errors import NotIrreducible, ParseError, SizeOverflow
from .factorization import Factorization, factorize, is_irreducible, sigma
from .functionals import (
    LaplaceEstimate,
    SemicharacterSpec,
    _draw_statistic,
    chi,
    statistic_law,
)

DEFAULT_Z = 4.0
MAX_TERMS = 10**7
POISSON_NORMAL_ABOVE = 1e15


@dataclass(frozen=True)
class DiscreteDistributionOnM:
    """Finitely many spaces with probabilities."""

    atoms: tuple[tuple[FiniteMMSpace, float], ...]
    allow_trivial: bool = False

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("a distribution needs at least one atom")
        ps = np.array([p for _, p in self.atoms], dtype=float)
        if np.any(ps <= 0) or abs(ps.sum() - 1.0) > 1e-12:
            raise ValueError("probabilities must be positive and sum to 1")
        if not self.allow_trivial and any(s.n == 1 for s, _ in self.atoms):
            raise ValueError("trivial atoms are not allowed here")

    @classmethod
    def point_mass(cls, X: FiniteMMSpace) -> "DiscreteDistributionOnM":
        return cls(((X, 1.0),))

    @property
    def spaces(self) -> list[FiniteMMSpace]:
        return [s for s, _ in self.atoms]

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms], dtype=float)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if len(self.atoms) == 1:
            return np.zeros(size, dtype=int)
        return rng.choice(len(self.atoms), size=size, p=self.probs)

    def to_dict(self) -> dict:
        return {"atoms": [{"space": space_to_dict(s), "p": p} for s, p in self.atoms]}

    @classmethod
    def from_dict(cls, doc) -> "DiscreteDistributionOnM":
        try:
            return cls(tuple((space_from_dict(a["space"]), float(a["p"])) for a in doc["atoms"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad distribution: {exc}") from None


@dataclass(frozen=True)
class FiniteLevyMeasure:
    """Finite measure on nontrivial spaces: the jump intensity of a Levy law."""

    atoms: tuple[tuple[FiniteMMSpace, float], ...]

    def __post_init__(self):
        for s, m in self.atoms:
            if s.n == 1:
                raise ValueError("a Levy measure cannot charge the trivial space")
            if not (math.isfinite(m) and m > 0):
                raise ValueError("masses must be positive and finite")

    @property
    def total_mass(self) -> float:
        return float(sum(m for _, m in self.atoms))

    def to_dict(self) -> dict:
        return {"atoms": [{"space": space_to_dict(s), "mass": m} for s, m in self.atoms]}

    @classmethod
    def from_dict(cls, doc) -> "FiniteLevyMeasure":
        try:
            return cls(tuple((space_from_dict(a["space"]), float(a["mass"])) for a in doc["atoms"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad Levy measure: {exc}") from None


@dataclass(frozen=True)
class StableSpec:
    """Index ``alpha`` in (0, 1), base law of the LePage atoms, truncation level."""

    alpha: float
    base: DiscreteDistributionOnM
    tail_tol: float = 1e-3

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("stable index must lie strictly between 0 and 1")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")

    @property
    def mean_diam(self) -> float:
        return float(sum(p * diam(s) for s, p in self.base.atoms))

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "base": self.base.to_dict(), "tail_tol": self.tail_tol}

    @classmethod
    def from_dict(cls, doc) -> "StableSpec":
        try:
            return cls(float(doc["alpha"]), DiscreteDistributionOnM.from_dict(doc["base"]), float(doc.get("tail_tol", 1e-3)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad stable spec: {exc}") from None


# --------------------------------------------------------------------------
# batch machinery


def _run_streams(fn: Callable, seed: tuple, indices: range) -> np.ndarray:
    return np.array([fn(rng_from(*seed, i)) for i in indices], dtype=float).reshape(len(indices), -1)


def map_streams(fn: Callable[[np.random.Generator], object], nsamples: int, seed: int | tuple = 0, workers: int = 1) -> np.ndarray:
    """Evaluate ``fn`` on the generators ``(*seed, 0) .. (*seed, nsamples - 1)``.

    ``seed`` is an integer or a tuple of integers naming the stream family.
    Returns an array with one row per sample.  With ``workers > 1``
    contiguous index chunks run in separate processes; ``fn`` must be
    picklable then (a module-level function or a ``functools.partial``).
    """
    seed = tuple(seed) if isinstance(seed, (tuple, list)) else (seed,)
    if workers <= 1 or nsamples < 2 * workers:
        return _run_streams(fn, seed, range(nsamples))
    bounds = np.linspace(0, nsamples, workers + 1).astype(int)
    chunks = [range(bounds[k], bounds[k + 1]) for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(partial(_run_streams, fn, seed), chunks))
    return np.concatenate(parts, axis=0)


def _panel_row(sampler: Callable, panel: tuple, rng) -> list[float]:
    Y = sampler(rng)
    return [chi(A, Y) for A in panel]


def panel_values(
    sampler: Callable[[np.random.Generator], object],
    panel: Sequence[SemicharacterSpec],
    nsamples: int,
    seed: int | tuple = 0,
    workers: int = 1,
) -> np.ndarray:
    """``chi_A`` of ``nsamples`` draws (rows) for every ``A`` in ``panel`` (columns)."""
    return map_streams(partial(_panel_row, sampler, tuple(panel)), nsamples, seed, workers)


def draw_samples(sampler: Callable, nsamples: int, seed: int = 0) -> list:
    return [sampler(rng_from(seed, i)) for i in range(nsamples)]


# --------------------------------------------------------------------------
# infinitely divisible laws


def levy_draw(nu: FiniteLevyMeasure, t: float, rng: np.random.Generator, max_terms: int = MAX_TERMS) -> BoxSum:
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0:
        return BoxSum()
    lam = t * nu.total_mass
    count = int(rng.poisson(lam))
    if count > max_terms:
        raise SizeOverflow(f"{count} jumps exceed the cap of {max_terms}")
    if count == 0:
        return BoxSum()
    masses = np.array([m for _, m in nu.atoms])
    idx = rng.choice(len(nu.atoms), size=count, p=masses / masses.sum()) if len(nu.atoms) > 1 else np.zeros(count, int)
    return BoxSum(tuple((1.0, nu.atoms[k][0]) for k in idx))


def sample_levy(nu: FiniteLevyMeasure, t: float, seed: Seed = 0, max_terms: int = MAX_TERMS) -> BoxSum:
    """Marginal at time ``t`` of the Levy process with jump measure ``nu``.

    Jumps arrive as a Poisson process with intensity ``t |nu|`` and are
    combined with ``boxplus``; no jumps gives the trivial space.
    """
    return levy_draw(nu, t, rng_from(seed), max_terms)


def levy_laplace_exact(A: SemicharacterSpec, nu: FiniteLevyMeasure, t: float) -> float:
    """``exp(-t * sum_k mass_k (1 - chi_A(Y_k)))``."""
    if A.is_empty or t == 0:
        return 1.0
    return math.exp(-t * sum(m * (1.0 - chi(A, s)) for s, m in nu.atoms))


# --------------------------------------------------------------------------
# stable laws


def lepage_draw(spec: StableSpec, rng: np.random.Generator, max_terms: int = MAX_TERMS) -> BoxSum:
    a = spec.alpha
    lead = spec.mean_diam * a / (1.0 - a)
    if lead == 0:
        return BoxSum()
    # residual bound lead * G^((a-1)/a) <= tail_tol  <=>  G >= target
    target = (lead / spec.tail_tol) ** (a / (1.0 - a))
    chunk = int(min(max(64, 1.1 * target + 10 * math.sqrt(target)), max_terms))
    gammas = np.empty(0)
    total = 0.0
    while True:
        g = total + np.cumsum(rng.exponential(size=chunk))
        hit = np.flatnonzero(g >= target)
        if hit.size:
            gammas = np.concatenate([gammas, g[: hit[0] + 1]])
            break
        gammas = np.concatenate([gammas, g])
        total = float(g[-1])
        if gammas.size > max_terms:
            raise SizeOverflow(f"LePage sum needs more than {max_terms} terms; raise tail_tol")
    coefs = gammas ** (-1.0 / a)
    atoms = spec.base.draw(rng, coefs.size)
    spaces = spec.base.spaces
    return BoxSum(tuple((float(c), spaces[k]) for c, k in zip(coefs, atoms)))


def sample_lepage(spec: StableSpec, seed: Seed = 0, max_terms: int = MAX_TERMS) -> BoxSum:
    """Truncated LePage series ``boxplus_n Gamma_n^(-1/alpha) Z_n``.

    ``Gamma_n`` are arrival times of a unit Poisson process and ``Z_n`` are
    i.i.d. from the base law.  Summation stops at the first ``N`` whose
    expected residual diameter ``E diam(Z) * alpha/(1-alpha) * Gamma_N^((alpha-1)/alpha)``
    is at most ``tail_tol``.
    """
    return lepage_draw(spec, rng_from(seed), max_terms)


def lepage_residual(spec: StableSpec, sample: BoxSum) -> float:
    """Expected diameter of the discarded tail, read off the last coefficient."""
    if not sample.terms:
        return 0.0
    a = spec.alpha
    gamma_last = sample.terms[-1][0] ** (-a)
    return spec.mean_diam * a / (1.0 - a) * gamma_last ** ((a - 1.0) / a)


def stable_laplace_quadrature(A: SemicharacterSpec, alpha: float, base: DiscreteDistributionOnM) -> float:
    """``E chi_A`` of the stable law, by quadrature over the Levy measure.

    Integrates ``sum_k p_k (1 - chi_A(t Z_k)) alpha t^(-alpha-1)`` over
    ``(0, inf)``.  Near zero the factor ``t^-alpha`` is handled as an
    algebraic weight.
    """
    if A.is_empty:
        return 1.0
    laws = [(p, *statistic_law(A, s)) for s, p in base.atoms]

    def deficit(t):
        return sum(p * float(np.dot(q, -np.expm1(-t * v))) for p, v, q in laws)

    def near(t):
        if t == 0.0:
            return alpha * sum(p * float(np.dot(q, v)) for p, v, q in laws)
        return alpha * deficit(t) / t

    head, _ = integrate.quad(near, 0.0, 1.0, weight="alg", wvar=(-alpha, 0.0), epsabs=0, epsrel=1e-10, limit=200)
    tail, _ = integrate.quad(lambda t: deficit(t) * alpha * t ** (-alpha - 1.0), 1.0, math.inf, epsabs=0, epsrel=1e-10, limit=200)
    return math.exp(-(head + tail))


# --------------------------------------------------------------------------
# thinning


def thin_factorization(F: Factorization, p: float, rng: np.random.Generator) -> Factorization:
    kept = tuple((s, int(rng.binomial(m, p))) for s, m in F.factors)
    return Factorization(tuple((s, m) for s, m in kept if m > 0))


def thin(X, p: float, seed: Seed = 0):
    """Keep each prime factor (with multiplicity) independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("retention probability must lie in [0, 1]")
    rng = rng_from(seed)
    if isinstance(X, BoxSum):
        terms = []
        for c, s in X.terms:
            for f, m in thin_factorization(factorize(s), p, rng).factors:
                terms.extend([(c, f)] * m)
        return BoxSum(tuple(terms))
    return sigma(thin_factorization(factorize(X), p, rng))


def thin_draw(F: Factorization, probs: tuple[float, ...], rng: np.random.Generator) -> FiniteMMSpace:
    for p in probs:
        F = thin_factorization(F, p, rng)
    return sigma(F)


def thinning_laplace_exact(A: SemicharacterSpec, X: FiniteMMSpace, p: float) -> float:
    """``prod_k (1 - p + p chi_A(Y_k))^m_k`` over the factorization of ``X``."""
    out = 1.0
    for s, m in factorize(as_space(X)).factors:
        out *= (1.0 - p + p * chi(A, s)) ** m
    return out


# --------------------------------------------------------------------------
# discrete stable laws


def positive_stable(alpha: float, rng: np.random.Generator, size=None):
    """Kanter's representation of the positive stable law with ``E e^{-lS} = e^{-l^alpha}``."""
    u = rng.uniform(size=size) * math.pi
    e = rng.exponential(size=size)
    a = alpha
    return (np.sin(a * u) / np.sin(u) ** (1.0 / a)) * (np.sin((1.0 - a) * u) / e) ** ((1.0 - a) / a)


def _discrete_stable_count(alpha: float, c: float, rng: np.random.Generator) -> int:
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    if c < 0:
        raise ValueError("c must be nonnegative")
    if c == 0:
        return 0
    lam = c ** (1.0 / alpha) * float(positive_stable(alpha, rng))
    if lam > POISSON_NORMAL_ABOVE:
        # numpy's Poisson sampler is limited; the relative error here is below 1e-7
        return int(round(lam + math.sqrt(lam) * rng.standard_normal()))
    return int(rng.poisson(lam))


def sample_discrete_stable_count(alpha: float, c: float, seed: Seed = 0) -> int:
    """Integer with generating function ``E s^N = exp(-c (1 - s)^alpha)``.

    A Poisson variable whose mean is ``c^(1/alpha)`` times a positive stable variate.
    """
    return _discrete_stable_count(alpha, c, rng_from(seed))


def discrete_stable_draw(alpha: float, c: float, Y: FiniteMMSpace, rng: np.random.Generator) -> Factorization:
    """``Y^N`` as the factorization ``[(Y, N)]``; ``Y`` is taken to be irreducible and canonical."""
    count = _discrete_stable_count(alpha, c, rng)
    return Factorization(((Y, count),) if count else ())


def discrete_stable_space(alpha: float, c: float, Y: FiniteMMSpace, seed: Seed = 0) -> Factorization:
    """``Y^N`` with ``N`` discrete stable; ``Y`` must be irreducible.

    The count is heavy tailed (infinite mean), so the power is returned in
    factored form.  ``sigma`` builds the explicit space when it fits.
    """
    if not is_irreducible(Y):
        raise NotIrreducible("discrete stable spaces are powers of an irreducible space")
    return discrete_stable_draw(alpha, c, canonical_form(Y), rng_from(seed))


def discrete_stable_laplace(A: SemicharacterSpec, alpha: float, c: float, Y: FiniteMMSpace) -> float:
    return math.exp(-c * (1.0 - chi(A, Y)) ** alpha)


# --------------------------------------------------------------------------
# tests on Laplace transforms


def empirical_laplace(A: SemicharacterSpec, samples: Sequence) -> LaplaceEstimate:
    return LaplaceEstimate.from_values([chi(A, s) for s in samples])


@dataclass(frozen=True)
class EqualityReport:
    statistics: tuple[dict, ...]
    z: float
    reject: bool

    def to_dict(self) -> dict:
        return {"z_threshold": self.z, "reject": self.reject, "statistics": list(self.statistics)}


def _two_sample_z(x: LaplaceEstimate, y: LaplaceEstimate) -> float:
    se = math.hypot(x.stderr, y.stderr)
    diff = x.mean - y.mean
    if se == 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / se


def _equality_report(estimates, panel, z: float) -> EqualityReport:
    stats = []
    for (ex, ey), A in zip(estimates, panel):
        stats.append({"A": A.to_dict(), "x": ex.to_dict(), "y": ey.to_dict(), "z": _two_sample_z(ex, ey)})
    reject = any(abs(s["z"]) > z for s in stats)
    return EqualityReport(tuple(stats), z, reject)


def equality_test_values(vx: np.ndarray, vy: np.ndarray, panel: Sequence[SemicharacterSpec], z: float = DEFAULT_Z) -> EqualityReport:
    """Two-sample z-tests on columns of precomputed ``chi`` values (as from :func:`panel_values`)."""
    if not panel:
        raise ValueError("panel must be nonempty")
    vx, vy = np.atleast_2d(vx), np.atleast_2d(vy)
    est = [(LaplaceEstimate.from_values(vx[:, c]), LaplaceEstimate.from_values(vy[:, c])) for c in range(len(panel))]
    return _equality_report(est, panel, z)


def equality_test(samplesX: Sequence, samplesY: Sequence, panel: Sequence[SemicharacterSpec], z: float = DEFAULT_Z) -> EqualityReport:
    """Reject equality in law if any panel semicharacter mean differs by more than ``z`` s.e."""
    if not panel:
        raise ValueError("panel must be nonempty")
    est = [(empirical_laplace(A, samplesX), empirical_laplace(A, samplesY)) for A in panel]
    return _equality_report(est, panel, z)


def _stable_lhs(spec: StableSpec, a: float, b: float, rng):
    return scale((a + b) ** (1.0 / spec.alpha), lepage_draw(spec, rng))


def _stable_rhs(spec: StableSpec, a: float, b: float, rng):
    inv = 1.0 / spec.alpha
    return scale(a**inv, lepage_draw(spec, rng)) + scale(b**inv, lepage_draw(spec, rng))


def stability_check(
    spec: StableSpec,
    a: float,
    b: float,
    panel: Sequence[SemicharacterSpec],
    nsamples: int,
    seed: int = 0,
    z: float = DEFAULT_Z,
    other: StableSpec | None = None,
    workers: int = 1,
) -> EqualityReport:
    """Compare ``(a+b)^(1/alpha) Y`` with ``a^(1/alpha) Y' boxplus b^(1/alpha) Y''``.

    ``other`` replaces the law of ``Y'`` and ``Y''`` (and its index the
    exponents), which turns the check into a power test.
    """
    rhs_spec = other or spec
    vx = panel_values(partial(_stable_lhs, spec, a, b), panel, nsamples, (seed, 0), workers)
    vy = panel_values(partial(_stable_rhs, rhs_spec, a, b), panel, nsamples, (seed, 1), workers)
    return equality_test_values(vx, vy, panel, z)


# --------------------------------------------------------------------------
# averages


def lln_limit_exact(A: SemicharacterSpec, dist: DiscreteDistributionOnM) -> float:
    """Limit of ``E chi_A((1/n) boxplus of n i.i.d. draws)``: ``exp(-sum a_ij E mean distance)``."""
    if A.is_empty:
        return 1.0
    mean_pair = sum(p * float(s.weights @ s.dist @ s.weights) for s, p in dist.atoms)
    return math.exp(-sum(a for _, _, a in A.entries) * mean_pair)


def _lln_draw(A: SemicharacterSpec, dist: DiscreteDistributionOnM, n: int, rng) -> float:
    idx = dist.draw(rng, n)
    spaces = dist.spaces
    avg = BoxSum(tuple((1.0 / n, spaces[k]) for k in idx))
    return float(np.exp(-_draw_statistic(A, avg, 1, rng))[0])


def lln_empirical(
    A: SemicharacterSpec, dist: DiscreteDistributionOnM, n: int, nsamples: int, seed: int = 0, workers: int = 1
) -> LaplaceEstimate:
    """Monte Carlo estimate of ``E chi_A((1/n) boxplus_{k<n} X_k)``.

    Each outer sample draws the ``n`` spaces and then one tuple of points
    from their product, so the estimate averages over both sources of
    randomness and its standard error stays honest when ``dist`` is a
    point mass.
    """
    if A.is_empty:
        return LaplaceEstimate(1.0, 0.0, nsamples)
    if n < 1:
        raise ValueError("n must be positive")
    vals = map_streams(partial(_lln_draw, A, dist, n), nsamples, seed, workers)
    return LaplaceEstimate.from_values(vals[:, 0])
