"""Prohorov and Gromov-Prohorov distances on finite spaces.

``prohorov`` uses Strassen's coupling form: for each threshold the least
mass a coupling must put on far pairs is one minus a maximum flow through
the bipartite graph of close pairs.  ``prohorov_oracle`` enumerates closed
sets instead and is kept independent of the flow code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .core import FiniteMMSpace, Seed, as_space, diam, rng_from
from .errors import DimensionMismatch, TooLarge

FLOW_EPS = 1e-15
MARGINAL_TOL = 1e-10
ORACLE_MAX_POINTS = 12


def _max_flow(mu1: np.ndarray, mu2: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    """Maximal sub-coupling supported on ``allowed`` (augmenting paths)."""
    n, m = allowed.shape
    flow = np.zeros((n, m))
    supply = mu1.astype(float).copy()
    demand = mu2.astype(float).copy()
    for i, j in zip(*np.nonzero(allowed)):
        f = min(supply[i], demand[j])
        if f > 0:
            flow[i, j] += f
            supply[i] -= f
            demand[j] -= f

    while True:
        src = supply > FLOW_EPS
        if not src.any() or not (demand > FLOW_EPS).any():
            break
        parent_col = np.full(m, -1)  # row that reached column j
        parent_row = np.full(n, -1)  # column that reached row i (-2 for sources)
        parent_row[src] = -2
        frontier = list(np.flatnonzero(src))
        seen_row = src.copy()
        seen_col = np.zeros(m, dtype=bool)
        end = -1
        while frontier and end < 0:
            nxt = []
            for i in frontier:
                cols = np.flatnonzero(allowed[i] & ~seen_col)
                if cols.size == 0:
                    continue
                seen_col[cols] = True
                parent_col[cols] = i
                sinks = cols[demand[cols] > FLOW_EPS]
                if sinks.size:
                    end = int(sinks[0])
                    break
                for j in cols:
                    rows = np.flatnonzero((flow[:, j] > FLOW_EPS) & ~seen_row)
                    seen_row[rows] = True
                    parent_row[rows] = j
                    nxt.extend(rows.tolist())
            frontier = nxt
        if end < 0:
            break
        path = []
        j = end
        while True:
            i = parent_col[j]
            path.append((i, j))
            pj = parent_row[i]
            if pj == -2:
                break
            path.append((i, pj))  # reverse edge: reduce flow[i, pj]
            j = pj
        start = path[-1][0]
        bottleneck = min(supply[start], demand[end])
        for k, (i, j) in enumerate(path):
            if k % 2 == 1:
                bottleneck = min(bottleneck, flow[i, j])
        for k, (i, j) in enumerate(path):
            flow[i, j] += -bottleneck if k % 2 else bottleneck
        supply[start] -= bottleneck
        demand[end] -= bottleneck
    return flow


def _complete_coupling(mu1, mu2, flow) -> np.ndarray:
    r1 = np.clip(mu1 - flow.sum(axis=1), 0, None)
    r2 = np.clip(mu2 - flow.sum(axis=0), 0, None)
    rest = r1.sum()
    if rest > 0 and r2.sum() > 0:
        return flow + np.outer(r1, r2) / r2.sum()
    return flow


def _breakpoints(cost: np.ndarray) -> np.ndarray:
    return np.unique(np.concatenate([[0.0], cost.ravel()]))


def strassen(mu1, mu2, cost) -> tuple[float, np.ndarray]:
    """Least ``eps`` with a coupling ``pi`` of ``mu1, mu2``, ``pi{cost >= eps} <= eps``.

    ``cost`` may be rectangular.  Returns ``eps`` and a coupling that attains
    the bound as a limit from the right (``pi{cost > eps} <= eps``).
    """
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (mu1.size, mu2.size):
        raise DimensionMismatch(f"cost {cost.shape} vs measures {mu1.size}, {mu2.size}")
    d = _breakpoints(cost)
    upper = np.append(d[1:], math.inf)
    flows: dict[int, np.ndarray] = {}

    def far_mass(k: int) -> float:
        if k not in flows:
            flows[k] = _max_flow(mu1, mu2, cost <= d[k])
        return max(0.0, 1.0 - float(flows[k].sum()))

    lo, hi = 0, d.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if far_mass(mid) <= upper[mid]:
            hi = mid
        else:
            lo = mid + 1
    g = far_mass(lo)
    return max(g, float(d[lo])), _complete_coupling(mu1, mu2, flows[lo])


def _check_measures(mu1, mu2, dist):
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if dist.shape != (n, n) or mu1.shape != (n,) or mu2.shape != (n,):
        raise DimensionMismatch("measures and distance matrix must share one support")
    for mu in (mu1, mu2):
        if np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-9:
            raise ValueError("measures must be nonnegative and sum to 1")
    return mu1, mu2, dist


def prohorov(mu1, mu2, dist) -> float:
    """Exact Prohorov distance between two measures on one finite space."""
    mu1, mu2, dist = _check_measures(mu1, mu2, dist)
    return strassen(mu1, mu2, dist)[0]


def prohorov_oracle(mu1, mu2, dist) -> float:
    """Prohorov distance from the closed-set definition, by enumeration.

    ``F^eps`` is the open thickening ``{z : r(z, F) < eps}``.
    """
    mu1, mu2, dist = _check_measures(mu1, mu2, dist)
    n = dist.shape[0]
    if n > ORACLE_MAX_POINTS:
        raise TooLarge(f"oracle enumerates 2^n sets; n={n} exceeds {ORACLE_MAX_POINTS}")
    full = 1 << n
    m1 = np.zeros(full)
    m2 = np.zeros(full)
    for b in range(n):
        lo, hi = 1 << b, 1 << (b + 1)
        m1[lo:hi] = m1[: hi - lo] + mu1[b]
        m2[lo:hi] = m2[: hi - lo] + mu2[b]
    d = _breakpoints(dist)
    for k, dk in enumerate(d):
        # eps in (d_k, d_{k+1}]: r < eps  <=>  r <= d_k
        nb = [sum(1 << j for j in range(n) if dist[i, j] <= dk) for i in range(n)]
        thick = np.zeros(full, dtype=np.int64)
        for b in range(n):
            lo, hi = 1 << b, 1 << (b + 1)
            thick[lo:hi] = thick[: hi - lo] | nb[b]
        worst = max(0.0, float(np.max(m1 - m2[thick])))
        nxt = d[k + 1] if k + 1 < d.size else math.inf
        if worst <= nxt:
            return max(worst, float(dk))
    raise AssertionError("unreachable: the last interval always qualifies")


def dgpr_to_trivial(X) -> float:
    """Centred distance to the one-point space.

    For each centre ``x`` the tail ``eps -> mu{y : r(x, y) >= eps}`` is a step
    function; the first interval on which it drops below ``eps`` gives the
    centre's value, and the best centre wins.  This places the one-point
    space on a point of ``X``; it is an upper bound for the Gromov-Prohorov
    distance, which :func:`dgpr_to_trivial_exact` computes.
    """
    X = as_space(X)
    best = math.inf
    for x in range(X.n):
        row = X.dist[x]
        d = _breakpoints(row)
        # mass strictly beyond each breakpoint
        order = np.argsort(row)
        suffix = np.append(np.cumsum(X.weights[order][::-1])[::-1], 0.0)
        tail = suffix[np.searchsorted(row[order], d, side="right")]
        upper = np.append(d[1:], math.inf)
        k = int(np.flatnonzero(tail <= upper)[0])
        best = min(best, max(float(tail[k]), float(d[k])))
    return best


def _max_weight_clique(adj: np.ndarray, w: np.ndarray) -> float:
    """Largest total weight of a set of pairwise adjacent vertices (branch and bound)."""
    order = np.argsort(-w)
    adj = adj[np.ix_(order, order)]
    w = w[order]
    best = 0.0

    def grow(cand: np.ndarray, weight: float) -> None:
        nonlocal best
        if weight > best:
            best = weight
        while cand.size:
            if weight + w[cand].sum() <= best:
                return
            v, cand = cand[0], cand[1:]
            grow(cand[adj[v, cand]], weight + w[v])

    grow(np.arange(w.size), 0.0)
    return best


def dgpr_to_trivial_exact(X, max_points: int = 64) -> float:
    """Gromov-Prohorov distance from ``X`` to the one-point space.

    The extra point may sit anywhere in a metric extension, at distances
    ``r`` from the points of ``X``.  The points with ``r < eps`` have diameter
    below ``2 eps``, and conversely every set ``S`` admits a point within
    ``diam(S) / 2`` of all its members, so the distance equals
    ``min_S max(diam(S) / 2, 1 - mu(S))``.
    """
    X = as_space(X)
    if X.n > max_points:
        raise TooLarge(f"exact distance to a point limited to {max_points} points")
    if X.n == 1:
        return 0.0
    best = 1.0 - float(X.weights.max())
    for delta in np.unique(X.dist[np.triu_indices(X.n, 1)]):
        if delta / 2 >= best:
            break
        heavy = _max_weight_clique(X.dist <= delta, X.weights)
        best = min(best, max(delta / 2, 1.0 - heavy))
    return max(best, 0.0)


def dgpr_lower(X, Y) -> float:
    """Triangle-inequality lower bound through the trivial space."""
    return abs(dgpr_to_trivial_exact(X) - dgpr_to_trivial_exact(Y))


# --------------------------------------------------------------------------
# certified upper bounds


@dataclass(frozen=True)
class Certificate:
    """Cross distances on the disjoint union plus a coupling.

    Witnesses ``dGPr(X, Y) <= epsilon``: the union is a (pseudo)metric space
    containing isometric copies of both spaces and ``pi{d > epsilon} <= epsilon``.
    """

    epsilon: float
    cross_dist: np.ndarray
    coupling: np.ndarray

    def to_dict(self) -> dict:
        return {
            "epsilon": float(self.epsilon),
            "cross_dist": self.cross_dist.tolist(),
            "coupling": self.coupling.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Certificate":
        return cls(float(doc["epsilon"]), np.asarray(doc["cross_dist"], float), np.asarray(doc["coupling"], float))


def union_matrix(X: FiniteMMSpace, Y: FiniteMMSpace, cross: np.ndarray) -> np.ndarray:
    n, m = X.n, Y.n
    U = np.zeros((n + m, n + m))
    U[:n, :n] = X.dist
    U[n:, n:] = Y.dist
    U[:n, n:] = cross
    U[n:, :n] = cross.T
    return U


def verify_certificate(X, Y, cert: Certificate, tol: float = 1e-9) -> bool:
    """Re-check a certificate from scratch."""
    X, Y = as_space(X), as_space(Y)
    cross, pi = np.asarray(cert.cross_dist), np.asarray(cert.coupling)
    if cross.shape != (X.n, Y.n) or pi.shape != (X.n, Y.n):
        return False
    if np.any(cross < -tol) or np.any(pi < -MARGINAL_TOL):
        return False
    U = union_matrix(X, Y, cross)
    scale_tol = tol * max(1.0, float(U.max()))
    for j in range(U.shape[0]):
        if np.any(U > U[:, j : j + 1] + U[j : j + 1, :] + scale_tol):
            return False
    if np.max(np.abs(pi.sum(axis=1) - X.weights)) > MARGINAL_TOL:
        return False
    if np.max(np.abs(pi.sum(axis=0) - Y.weights)) > MARGINAL_TOL:
        return False
    eps = cert.epsilon
    return float(pi[cross > eps + tol].sum()) <= eps + tol


def _gluing(X: FiniteMMSpace, Y: FiniteMMSpace, rel: list[tuple[int, int]]) -> np.ndarray:
    """Cross distances gluing along a relation with half its distortion as offset."""
    ii = np.array([p[0] for p in rel])
    jj = np.array([p[1] for p in rel])
    dis = float(np.max(np.abs(X.dist[np.ix_(ii, ii)] - Y.dist[np.ix_(jj, jj)])))
    c = 0.5 * dis
    # d(x, y) = min over (i, j) in rel of dX(x, i) + c + dY(j, y)
    return np.min(X.dist[:, ii][:, :, None] + c + Y.dist[jj, :][None, :, :], axis=1)


def _closure(U: np.ndarray) -> np.ndarray:
    U = U.copy()
    for k in range(U.shape[0]):
        np.minimum(U, U[:, k : k + 1] + U[k : k + 1, :], out=U)
    return U


def _repair(X: FiniteMMSpace, Y: FiniteMMSpace, cross: np.ndarray, margin: float) -> np.ndarray | None:
    n = X.n
    U = _closure(union_matrix(X, Y, np.clip(cross, 0, None) + margin))
    tol = 1e-12 * max(1.0, float(U.max()))
    if np.max(np.abs(U[:n, :n] - X.dist)) > tol or np.max(np.abs(U[n:, n:] - Y.dist)) > tol:
        return None
    return U[:n, n:]


def _lp_tighten(X: FiniteMMSpace, Y: FiniteMMSpace, close: np.ndarray) -> np.ndarray | None:
    """Metric extension minimizing the largest cross distance over ``close`` pairs."""
    n, m = X.n, Y.n
    nv = n * m + 1
    t = n * m
    rows, cols, vals, rhs = [], [], [], []
    r = 0

    def var(i, j):
        return i * m + j

    for j in range(m):
        for i, k in combinations(range(n), 2):
            a, b, dx = var(i, j), var(k, j), X.dist[i, k]
            rows += [r, r, r + 1, r + 1, r + 2, r + 2]
            cols += [a, b, a, b, a, b]
            vals += [1, -1, -1, 1, -1, -1]
            rhs += [dx, dx, -dx]
            r += 3
    for i in range(n):
        for j, k in combinations(range(m), 2):
            a, b, dy = var(i, j), var(i, k), Y.dist[j, k]
            rows += [r, r, r + 1, r + 1, r + 2, r + 2]
            cols += [a, b, a, b, a, b]
            vals += [1, -1, -1, 1, -1, -1]
            rhs += [dy, dy, -dy]
            r += 3
    for i, j in zip(*np.nonzero(close)):
        rows += [r, r]
        cols += [var(i, j), t]
        vals += [1, -1]
        rhs.append(0.0)
        r += 1
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(r, nv))
    c = np.zeros(nv)
    c[t] = 1.0
    res = linprog(c, A_ub=A, b_ub=np.array(rhs), bounds=[(0, None)] * nv, method="highs")
    if res.status != 0:
        return None
    return res.x[:t].reshape(n, m)


def _relations(X: FiniteMMSpace, Y: FiniteMMSpace, seed_pair, rng, tol: float):
    """Grow relations from a seed pair, yielding each distortion stage."""
    n, m = X.n, Y.n
    rel = [seed_pair]
    in_rel = np.zeros((n, m), dtype=bool)
    in_rel[seed_pair] = True
    # distortion each candidate pair would add against the current relation
    added = np.abs(X.dist[:, [seed_pair[0]]] - Y.dist[[seed_pair[1]], :])
    level = 0.0
    mass = np.outer(X.weights, Y.weights)
    jitter = rng.random((n, m)) * 1e-12
    while True:
        cand = np.where(in_rel, np.inf, np.maximum(added, level))
        best = cand.min()
        if not math.isfinite(best):
            yield list(rel)
            return
        if best > level + tol:
            yield list(rel)
            level = float(best)
        ties = np.flatnonzero((cand <= level + tol).ravel())
        pick = ties[np.argmax((mass + jitter).ravel()[ties])]
        i, j = divmod(int(pick), m)
        rel.append((i, j))
        in_rel[i, j] = True
        added = np.maximum(added, np.abs(X.dist[:, [i]] - Y.dist[[j], :]))


def dgpr_upper(
    X, Y, budget: int = 256, seed: Seed = 0, stages: int = 2, lp_rounds: int = 3
) -> tuple[float, Certificate]:
    """Certified upper bound on the Gromov-Prohorov distance.

    Candidate metric extensions come from gluing along low-distortion
    relations grown from seed pairs; the best ones are then tightened by
    linear programming over the pairs their optimal coupling keeps close.
    ``budget`` caps the number of seed pairs (restarts); each restart
    evaluates its first ``stages`` distortion levels.
    """
    X, Y = as_space(X), as_space(Y)
    rng = rng_from(seed)
    n, m = X.n, Y.n
    tol = 1e-9 * max(1.0, diam(X), diam(Y))
    wx, wy = X.weights, Y.weights

    def evaluate(cross):
        eps, pi = strassen(wx, wy, cross)
        return eps, Certificate(eps, cross, pi)

    # fallback: every cross distance equal to half the larger diameter
    const = np.full((n, m), 0.5 * max(diam(X), diam(Y)))
    best_eps, best = evaluate(const)

    mass = np.outer(wx, wy).ravel()
    order = np.lexsort((rng.random(n * m), -mass))
    seen: set[frozenset] = set()
    found: list[tuple[float, Certificate]] = []
    for flat in order[:budget]:
        i0, j0 = divmod(int(flat), m)
        for _, rel in zip(range(stages), _relations(X, Y, (i0, j0), rng, tol)):
            key = frozenset(rel)
            if key in seen:
                continue
            seen.add(key)
            found.append(evaluate(_gluing(X, Y, rel)))
    found.sort(key=lambda fc: fc[0])
    for eps, cert in found[:1]:
        if eps < best_eps:
            best_eps, best = eps, cert

    margin = 10 * tol
    for _ in range(lp_rounds):
        if best_eps <= tol:
            break
        close = (best.coupling > MARGINAL_TOL) & (best.cross_dist <= best_eps + tol)
        if not close.any():
            break
        cross = _lp_tighten(X, Y, close)
        if cross is None:
            break
        cross = _repair(X, Y, cross, margin)
        if cross is None:
            break
        eps, cert = evaluate(cross)
        if eps >= best_eps - tol:
            break
        best_eps, best = eps, cert
    return best_eps, best
