"""Independent reference implementations for the test suite.

Everything here is written the slow, obvious way (explicit path
enumeration, dictionary recursions, breadth-first search, literal
definition checks) so the fast engines have something honest to disagree
with.  Nothing imports the array kernels.
"""

import math
from collections import deque

from polymerlab.environment import log_mgf
from polymerlab.lattice import (LatticeBox, edge_between, edge_endpoints, l1,
                                linf, neighbors)


# ------------------------------------------------------- path enumeration

def enumerate_paths(kernel, start, n):
    """All n-step kernel paths as (site tuple, probability)."""
    start = tuple(start)
    out = []

    def rec(x, t, prob, acc):
        if t == n:
            out.append((tuple(acc), prob))
            return
        for y, p in kernel.step_distribution(x):
            acc.append(y)
            rec(y, t + 1, prob * p, acc)
            acc.pop()

    rec(start, 0, 1.0, [start])
    return out


def partition_oracle(kernel, env, beta, n, start):
    """log W by brute-force path enumeration."""
    lam = log_mgf(env.spec, beta)
    total = 0.0
    for sites, prob in enumerate_paths(kernel, start, n):
        s = sum(env.value(i, sites[i]) for i in range(1, n + 1))
        total += prob * math.exp(beta * s - n * lam)
    return math.log(total) if total > 0.0 else -math.inf


def point_to_point_oracle(kernel, env, beta, start, constraints):
    """log of the constrained sum: paths through every (t, y) pin."""
    pins = [(int(t), tuple(y)) for t, y in constraints]
    n = pins[-1][0]
    lam = log_mgf(env.spec, beta)
    total = 0.0
    for sites, prob in enumerate_paths(kernel, start, n):
        if any(sites[t] != y for t, y in pins):
            continue
        s = sum(env.value(i, sites[i]) for i in range(1, n + 1))
        total += prob * math.exp(beta * s - n * lam)
    return math.log(total) if total > 0.0 else -math.inf


def restricted_oracle(kernel, env, beta, n, centers, rb, start):
    """log V: paths at a center at time isqrt(n), confined there through n."""
    t_star = math.isqrt(n)
    centers = {tuple(c) for c in centers}
    lam = log_mgf(env.spec, beta)
    total = 0.0
    for sites, prob in enumerate_paths(kernel, start, n):
        c = sites[t_star]
        if c not in centers:
            continue
        if any(linf(sites[t], c) > rb for t in range(t_star, n + 1)):
            continue
        s = sum(env.value(i, sites[i]) for i in range(1, n + 1))
        total += prob * math.exp(beta * s - n * lam)
    return math.log(total) if total > 0.0 else -math.inf


def dict_dp_log_w(kernel, env, beta, n, start):
    """log W by a plain dictionary recursion (site -> weight)."""
    lam = log_mgf(env.spec, beta)
    layer = {tuple(start): 1.0}
    scale = 0.0
    for i in range(1, n + 1):
        new = {}
        for x, w in layer.items():
            for y, p in kernel.step_distribution(x):
                new[y] = new.get(y, 0.0) + w * p * math.exp(
                    beta * env.value(i, y) - lam)
        big = max(new.values())
        scale += math.log(big)
        layer = {y: w / big for y, w in new.items()}
    return scale + math.log(sum(sorted(layer.values())))


# ----------------------------------------------------- percolation oracle

def bfs_components(cfg):
    """site -> component id over open edges with both endpoints in the box."""
    box = LatticeBox((0,) * cfg.d, cfg.box_radius)
    comp = {}
    cid = 0
    for s in map(tuple, box.sites()):
        if s in comp:
            continue
        comp[s] = cid
        dq = deque([s])
        while dq:
            x = dq.popleft()
            for y in neighbors(x):
                if y in comp or not box.contains(y):
                    continue
                if cfg.is_open(edge_between(x, y)):
                    comp[y] = cid
                    dq.append(y)
        cid += 1
    return comp


def giant_sites(cfg):
    comp = bfs_components(cfg)
    sizes = {}
    for s, c in comp.items():
        sizes[c] = sizes.get(c, 0) + 1
    best = max(sizes.items(), key=lambda kv: (kv[1], -kv[0]))[0]
    return {s for s, c in comp.items() if c == best}, comp, sizes


# ------------------------------------------------- structure definitions

def _ball_sites(center, radius, d):
    sites = [()]
    for a in range(d):
        sites = [s + (c,) for s in sites
                 for c in range(center[a] - radius, center[a] + radius + 1)]
    return [tuple(s) for s in sites]


def edges_touching_ball(center, radius, d):
    """Every lattice edge with at least one endpoint in B(center, radius)."""
    out = set()
    for s in _ball_sites(center, radius, d):
        for y in neighbors(s):
            out.add(edge_between(s, y))
    return out


def brute_is_good_block(cfg, x, L):
    m = int(math.floor(L))
    return all(cfg.is_open(e) for e in edges_touching_ball(tuple(x), m,
                                                           cfg.d))


def brute_is_good_tube(cfg, x, L):
    """Literal definition check: spine open, other vertex-touching edges
    closed (except those incident to the base and the far extension edge),
    and every edge at l1 distance exactly 1 from the non-base vertices open.
    Returns None for an empty tube (floor(L) = 0)."""
    m = int(math.floor(L))
    if m < 1:
        return None
    d = cfg.d
    x = tuple(x)
    verts = [tuple(x[a] + (k if a == 0 else 0) for a in range(d))
             for k in range(m + 1)]
    vset = set(verts)
    inner = vset - {x}
    far = edge_between(verts[m],
                       tuple(verts[m][a] + (1 if a == 0 else 0)
                             for a in range(d)))
    spine = {edge_between(verts[k], verts[k + 1]) for k in range(m)}

    cand = set()
    for v in verts:
        for s in _ball_sites(v, 2, d):
            for y in neighbors(s):
                cand.add(edge_between(s, y))

    for e in sorted(cand):
        u, v = edge_endpoints(e)
        touches = u in vset or v in vset
        dist = min(l1(w, z) for w in (u, v) for z in inner)
        if e in spine:
            if not cfg.is_open(e):
                return False
        elif touches and x not in (u, v) and e != far:
            if cfg.is_open(e):
                return False
        elif dist == 1:
            if not cfg.is_open(e):
                return False
    return True
