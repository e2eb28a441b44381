"""Z^d lattice primitives: sites, parity, boxes, nearest-neighbor edges.

Sites are tuples of Python ints.  An undirected edge is stored canonically as
(base, axis) meaning {base, base + e_axis}; the base is always the endpoint
with the smaller coordinate along the axis, so every edge has exactly one
representation.
"""

from dataclasses import dataclass

import numpy as np

Site = tuple
Edge = tuple  # (Site, axis)


def parity(site):
    """Bipartite class of a site: 'even' when the coordinate sum is even."""
    return "even" if sum(site) % 2 == 0 else "odd"


def linf(x, y=None):
    if y is None:
        return max(abs(c) for c in x)
    return max(abs(a - b) for a, b in zip(x, y))


def l1(x, y=None):
    if y is None:
        return sum(abs(c) for c in x)
    return sum(abs(a - b) for a, b in zip(x, y))


def neighbors(site):
    """The 2d nearest neighbors, in axis-major then -/+ order."""
    out = []
    for a in range(len(site)):
        for s in (-1, +1):
            out.append(tuple(c + (s if j == a else 0) for j, c in enumerate(site)))
    return out


def translate(site, delta):
    return tuple(a + b for a, b in zip(site, delta))


def edge_endpoints(edge):
    base, axis = edge
    other = tuple(c + (1 if j == axis else 0) for j, c in enumerate(base))
    return base, other


def edge_between(x, y):
    """Canonical edge joining two adjacent sites; raises if not adjacent."""
    diff = [b - a for a, b in zip(x, y)]
    nz = [j for j, v in enumerate(diff) if v != 0]
    if len(nz) != 1 or abs(diff[nz[0]]) != 1:
        raise ValueError(f"sites {x} and {y} are not nearest neighbors")
    axis = nz[0]
    base = x if diff[axis] == 1 else y
    return (base, axis)


def incident_edges(site):
    """All 2d edges incident to a site, canonical form."""
    d = len(site)
    out = []
    for a in range(d):
        lower = tuple(c - (1 if j == a else 0) for j, c in enumerate(site))
        out.append((lower, a))
        out.append((site, a))
    return out


@dataclass(frozen=True)
class LatticeBox:
    """Closed l-infinity ball B(center, radius) on Z^d."""

    center: tuple
    radius: int

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("box radius must be >= 0")
        if len(self.center) < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def d(self):
        return len(self.center)

    @property
    def side(self):
        return 2 * self.radius + 1

    def site_count(self):
        return self.side ** self.d

    def contains(self, site):
        return linf(site, self.center) <= self.radius

    def sites(self):
        """All sites as an (N, d) int64 array in canonical C-order."""
        axes = [np.arange(c - self.radius, c + self.radius + 1, dtype=np.int64)
                for c in self.center]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def parity_sites(self, which):
        """Sites of one bipartite class ('even' or 'odd')."""
        if which not in ("even", "odd"):
            raise ValueError("parity must be 'even' or 'odd'")
        allsites = self.sites()
        want = 0 if which == "even" else 1
        mask = (allsites.sum(axis=1) % 2) == want
        return allsites[mask]

    def site_index(self, site):
        """Flat C-order index of a site inside the box."""
        idx = 0
        for c, ctr in zip(site, self.center):
            rel = c - ctr + self.radius
            if rel < 0 or rel >= self.side:
                raise KeyError(f"site {site} outside {self}")
            idx = idx * self.side + rel
        return idx


def edges_touching(box):
    """E(A): every edge with at least one endpoint in the box.

    Canonical enumeration order: axis-major, then C-order over base sites.
    An edge (base, a) touches the box iff base or base + e_a lies inside, so
    base ranges over the box extended by one step on the negative side of a
    plus the positive face.
    """
    out = []
    d = box.d
    for a in range(d):
        lo = [c - box.radius for c in box.center]
        hi = [c + box.radius for c in box.center]
        lo[a] -= 1
        axes = [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(lo, hi)]
        grids = np.meshgrid(*axes, indexing="ij")
        bases = np.stack([g.ravel() for g in grids], axis=1)
        for b in bases:
            out.append((tuple(int(v) for v in b), a))
    return out


def edge_touches(edge, box):
    u, v = edge_endpoints(edge)
    return box.contains(u) or box.contains(v)
