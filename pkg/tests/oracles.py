"""Slow, direct re-implementations used as test oracles.

Nothing here imports the package's algorithms; inputs are plain arrays.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog


def product(d1, w1, d2, w2):
    """Explicit product by loops, index i * n2 + j."""
    n1, n2 = len(w1), len(w2)
    d = np.zeros((n1 * n2, n1 * n2))
    w = np.zeros(n1 * n2)
    for i, j in itertools.product(range(n1), range(n2)):
        w[i * n2 + j] = w1[i] * w2[j]
        for k, l in itertools.product(range(n1), range(n2)):
            d[i * n2 + j, k * n2 + l] = d1[i][k] + d2[j][l]
    return d, w


def semicharacter(entries, order, d, w):
    """Sum over every order-tuple of points; entries are 0-based (i, j, a)."""
    total = 0.0
    for tup in itertools.product(range(len(w)), repeat=order):
        prob = math.prod(w[t] for t in tup)
        expo = sum(a * d[tup[i]][tup[j]] for i, j, a in entries)
        total += prob * math.exp(-expo)
    return total


def isomorphic(d1, w1, d2, w2, tol=1e-9):
    n = len(w1)
    if n != len(w2):
        return False
    d1, d2, w1, w2 = map(np.asarray, (d1, d2, w1, w2))
    for perm in itertools.permutations(range(n)):
        p = list(perm)
        if np.all(np.abs(w1 - w2[p]) <= tol) and np.all(np.abs(d1 - d2[np.ix_(p, p)]) <= tol):
            return True
    return False


def distance_to_point(d, w):
    """inf over centres x of inf{eps > 0 : mu{y : r(x, y) >= eps} <= eps}, from the definition."""
    d, w = np.asarray(d), np.asarray(w)
    best = math.inf
    for x in range(len(w)):
        r = d[x]
        cands = set(r.tolist()) | {float(w[r >= t].sum()) for t in r}
        for eps in sorted(c for c in cands if c > 0):
            # eps itself, or eps approached from the right when it is a distance
            if w[r >= eps].sum() <= eps + 1e-15 or w[r > eps].sum() <= eps + 1e-15:
                best = min(best, eps)
                break
        if np.all(r[w > 0] == 0):
            best = 0.0
    return best


def min_far_mass(mu1, mu2, far):
    """min over couplings of the mass on ``far`` pairs, by linear programming."""
    n, m = len(mu1), len(mu2)
    c = far.astype(float).ravel()
    A = np.zeros((n + m, n * m))
    for i in range(n):
        A[i, i * m : (i + 1) * m] = 1
    for j in range(m):
        A[n + j, j::m] = 1
    res = linprog(c, A_eq=A, b_eq=np.concatenate([mu1, mu2]), bounds=(0, None), method="highs")
    return float(res.fun)


def prohorov_lp(mu1, mu2, d):
    """inf{eps : min_pi pi{r >= eps} <= eps} scanning the breakpoints with an LP per level."""
    mu1, mu2, d = map(np.asarray, (mu1, mu2, d))
    levels = np.unique(np.concatenate([[0.0], d.ravel()]))
    best = levels[-1]
    for lo, hi in zip(levels[:-1], levels[1:]):
        g = min_far_mass(mu1, mu2, d >= hi)  # constant on (lo, hi]
        if g <= hi:
            best = min(best, max(g, lo))
            break
    return float(best)


def is_metric(U, tol=1e-9):
    U = np.asarray(U)
    if np.any(np.abs(U - U.T) > tol) or np.any(np.abs(np.diag(U)) > tol) or np.any(U < -tol):
        return False
    return bool(np.all(U[:, None, :] <= U[:, :, None] + U[None, :, :] + tol))


def certificate_ok(dX, wX, dY, wY, cross, coupling, eps, tol=1e-9):
    """Re-check a Gromov-Prohorov certificate from scratch."""
    dX, dY, cross, coupling = map(np.asarray, (dX, dY, cross, coupling))
    n, m = len(wX), len(wY)
    U = np.zeros((n + m, n + m))
    U[:n, :n], U[n:, n:] = dX, dY
    U[:n, n:], U[n:, :n] = cross, cross.T
    if not is_metric(U, tol):
        return False
    if np.any(coupling < -tol):
        return False
    if np.max(np.abs(coupling.sum(axis=1) - wX)) > 1e-8 or np.max(np.abs(coupling.sum(axis=0) - wY)) > 1e-8:
        return False
    return float(coupling[cross > eps + tol].sum()) <= eps + tol


def distance_to_point_exact(d, w):
    """min over nonempty subsets S of max(diam(S) / 2, 1 - mu(S)), by enumeration."""
    d, w = np.asarray(d), np.asarray(w)
    best = math.inf
    for k in range(1, len(w) + 1):
        for S in itertools.combinations(range(len(w)), k):
            S = list(S)
            best = min(best, max(d[np.ix_(S, S)].max() / 2, 1.0 - w[S].sum()))
    return max(best, 0.0)
