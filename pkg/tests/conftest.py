"""Shared network builders and oracles for the test suite.

Everything here is deterministic given the caller's RNG; tests freeze
seeds so failures reproduce exactly.
"""
import itertools

import numpy as np

from cyclecert import Network, eval_g


def worked_example(weights=None, p=None):
    """4-bus, 5-branch meshed example; edge order is part of the fixture."""
    edges = [(2, 1), (2, 4), (3, 2), (1, 4), (3, 4)]
    return Network.from_edges(edges, weights=weights, p=p)


def two_bus(p=1.0, w=5.0):
    return Network.from_edges([(1, 2)], weights=[w], p={1: p, 2: -p})


def triangle(scale=1.0):
    return Network.from_edges(
        [(1, 2), (2, 3), (1, 3)],
        weights=[2.0, 3.0, 4.0],
        p={1: 1.0 * scale, 2: 0.3 * scale, 3: -1.3 * scale},
    )


def random_connected_network(rng, n_max=12, tree=False, p_scale=1.0):
    """Random connected graph: spanning tree plus (unless tree) chords.

    Weights are uniform in [0.5, 5]; injections are balanced gaussians
    scaled by p_scale.
    """
    lo = 2 if n_max < 4 else 4
    n = int(rng.integers(lo, n_max + 1))
    edges = []
    have = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.append((u, v))
        have.add((u, v))
    if not tree:
        want = int(rng.integers(1, n))
        for _ in range(20 * want):
            if want == 0:
                break
            u, v = sorted(int(x) for x in rng.integers(0, n, size=2))
            if u == v or (u, v) in have:
                continue
            have.add((u, v))
            edges.append((u, v))
            want -= 1
    weights = rng.uniform(0.5, 5.0, size=len(edges))
    p = rng.normal(size=n) * p_scale
    p -= p.mean()
    return Network.from_edges(
        [(u + 1, v + 1) for u, v in edges], weights=weights,
        p={i + 1: p[i] for i in range(n)},
    )


def exhaustive_face_extremes(fp, basis, box):
    """Oracle: extreme of g_i over every corner of each face."""
    q = fp.q
    lower = np.zeros(q)
    upper = np.zeros(q)
    for i in range(q):
        rest = [j for j in range(q) if j != i]
        lo_vals, hi_vals = [], []
        for bits in itertools.product((0, 1), repeat=len(rest)):
            corner = np.empty(q)
            corner[i] = box.lo[i]
            for j, b in zip(rest, bits):
                corner[j] = box.hi[j] if b else box.lo[j]
            lo_vals.append(eval_g(fp, basis, corner)[i])
            corner[i] = box.hi[i]
            hi_vals.append(eval_g(fp, basis, corner)[i])
        lower[i] = max(lo_vals)  # worst case for the <= 0 requirement
        upper[i] = min(hi_vals)  # worst case for the >= 0 requirement
    return lower, upper


def brute_force_bridges(n, branches):
    """Oracle: edge e is a bridge iff removing it splits its component."""
    def reachable(skip):
        adj = [[] for _ in range(n)]
        for e, (u, v) in enumerate(branches):
            if e == skip:
                continue
            adj[u].append(v)
            adj[v].append(u)
        comp = -np.ones(n, dtype=int)
        label = 0
        for s in range(n):
            if comp[s] >= 0:
                continue
            stack = [s]
            comp[s] = label
            while stack:
                x = stack.pop()
                for y in adj[x]:
                    if comp[y] < 0:
                        comp[y] = label
                        stack.append(y)
            label += 1
        return comp

    base = reachable(skip=-1)
    bridges = []
    for e, (u, v) in enumerate(branches):
        comp = reachable(skip=e)
        joined = comp[u] == comp[v]
        if base[u] == base[v] and not joined:
            bridges.append(e)
    return bridges
