"""Random instance generators shared by the test modules."""

from __future__ import annotations

import numpy as np

from mmspace import boxplus, new_space, two_point
from mmspace.functionals import SemicharacterSpec


def random_weights(rng, n):
    w = rng.uniform(0.2, 1.0, n)
    w = w / w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return w


def random_space(rng, n, max_dist=5.0):
    """Generic Euclidean configuration rescaled so the diameter is at most ``max_dist``."""
    if n == 1:
        return new_space([[0.0]], [1.0])
    pts = rng.normal(size=(n, 3))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    d *= rng.uniform(0.05, 1.0) * max_dist / d.max()
    d = (d + d.T) / 2
    return new_space(d, random_weights(rng, n))


def random_graph_space(rng, n, max_dist=5.0):
    """Shortest-path metric of a random weighted complete graph; has many ties and betweenness."""
    if n == 1:
        return new_space([[0.0]], [1.0])
    w = rng.integers(1, 4, size=(n, n)).astype(float)
    d = np.triu(w, 1)
    d = d + d.T
    for k in range(n):
        d = np.minimum(d, d[:, [k]] + d[[k], :])
    d *= max_dist / (3.0 * n)
    return new_space(d, random_weights(rng, n))


def random_spec(rng, order):
    entries = []
    for i in range(order):
        for j in range(i + 1, order):
            if rng.uniform() < 0.7:
                entries.append((i, j, float(rng.uniform(0.1, 2.0))))
    if not entries:
        entries.append((0, 1, float(rng.uniform(0.1, 2.0))))
    return SemicharacterSpec(order, tuple(entries))


def shuffled(X, rng):
    p = rng.permutation(X.n)
    return new_space(X.dist[np.ix_(p, p)], X.weights[p])


def T(p=0.5, d=1.0):
    return two_point(p, d)


def product_of(spaces):
    out = spaces[0]
    for s in spaces[1:]:
        out = boxplus(out, s)
    return out
