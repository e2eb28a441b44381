"""Random-walk kernels on Z^d and on bond-percolation clusters.

Cluster rule: from a site with at least one open incident in-box edge, the
walk steps uniformly over those edges; an isolated site self-loops with
probability 1.  The box restriction is part of the cluster model here: the
walk never uses edges with an endpoint outside the configuration box.

Killed heat kernels and confinement probabilities are exact (dense layer
sweeps, two buffers); path simulation uses the counter PRF so batches are
reproducible and independent of scheduling.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import prf
from .lattice import LatticeBox, neighbors
from ._kernels import walk_batch


@dataclass(frozen=True)
class WalkKernel:
    """mode 'lattice' (homogeneous, nearest-neighbor, prob 1/2d) or
    'cluster' (uniform over open in-box edges, lazy at isolated sites)."""

    mode: str
    d: int
    cfg: object = None

    @classmethod
    def full_lattice(cls, d):
        if d < 1:
            raise ValueError("dimension must be >= 1")
        return cls("lattice", d, None)

    @classmethod
    def cluster(cls, cfg):
        return cls("cluster", cfg.spec.d, cfg)

    @property
    def is_cluster(self):
        return self.mode == "cluster"

    @cached_property
    def _cluster_data(self):
        """(side, org, open_axis (d,N) uint8, deg (N,) int64, invdeg (N,))."""
        cfg = self.cfg
        d = self.d
        r = cfg.spec.box_radius
        side = 2 * r + 1
        shape = (side,) * d
        masks = np.stack([cfg.axis_open_in_box(a) for a in range(d)])
        deg = np.zeros(shape, dtype=np.int64)
        for a in range(d):
            m = masks[a]
            deg += m
            sl_hi = tuple(slice(1, None) if j == a else slice(None)
                          for j in range(d))
            sl_lo = tuple(slice(None, -1) if j == a else slice(None)
                          for j in range(d))
            deg[sl_hi] += m[sl_lo]
        deg = deg.reshape(-1)
        with np.errstate(divide="ignore"):
            invdeg = np.where(deg > 0, 1.0 / deg, 0.0)
        org = np.full(d, -r, dtype=np.int64)
        open_axis = np.ascontiguousarray(
            masks.reshape(d, -1).astype(np.uint8))
        return side, org, open_axis, deg, invdeg

    def contains(self, x):
        if not self.is_cluster:
            return len(x) == self.d
        return len(x) == self.d and all(
            abs(c) <= self.cfg.spec.box_radius for c in x)

    def degree(self, x):
        """Number of open in-box edges at x (cluster mode)."""
        side, org, _open_axis, deg, _inv = self._cluster_data
        f = 0
        for a in range(self.d):
            f = f * side + (x[a] - org[a])
        return int(deg[f])

    def step_distribution(self, x):
        """List of (site, probability), canonical order: axis-major, the
        minus direction before the plus direction."""
        x = tuple(int(c) for c in x)
        if not self.contains(x):
            raise ValueError(f"site {x} outside the kernel domain")
        if not self.is_cluster:
            p = 1.0 / (2 * self.d)
            return [(y, p) for y in neighbors(x)]
        cfg = self.cfg
        r = cfg.spec.box_radius
        targets = []
        for a in range(self.d):
            lo = list(x)
            lo[a] -= 1
            lo = tuple(lo)
            if abs(lo[a]) <= r and cfg.is_open((lo, a)):
                targets.append(lo)
            hi = list(x)
            hi[a] += 1
            hi = tuple(hi)
            if abs(hi[a]) <= r and cfg.is_open((x, a)):
                targets.append(hi)
        if not targets:
            return [(x, 1.0)]
        p = 1.0 / len(targets)
        return [(y, p) for y in targets]


@dataclass(frozen=True)
class PathSample:
    """A simulated trajectory; sites has shape (n+1, d), absolute coords."""

    sites: np.ndarray
    seed: int
    path_index: int = 0

    def __len__(self):
        return self.sites.shape[0]

    @property
    def n_steps(self):
        return self.sites.shape[0] - 1

    def site(self, t):
        return tuple(int(c) for c in self.sites[t])


def simulate_path(kernel, x0, n, rng_seed, path_index=0):
    """One path of the walk, reproducible: step t draws
    u = u01(chain(seed, TAG_WALK, (path_index, t))) and picks uniformly
    among the allowed moves in step_distribution order."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x0 = tuple(int(c) for c in x0)
    if not kernel.contains(x0):
        raise ValueError(f"start {x0} outside the kernel domain")
    d = kernel.d
    out = np.empty((n + 1, d), dtype=np.int64)
    out[0] = x0
    x = x0
    h_path = prf.chain(rng_seed, prf.TAG_WALK, (path_index,))
    for t in range(1, n + 1):
        u = prf.u01(prf.absorb(h_path, t))
        dist = kernel.step_distribution(x)
        if not (len(dist) == 1 and dist[0][0] == x):
            # u is drawn even at isolated sites, matching the batch twin
            k = min(int(u * len(dist)), len(dist) - 1)
            x = dist[k][0]
        out[t] = x
    return PathSample(out, rng_seed, path_index)


def simulate_batch(kernel, x0, n, n_paths, rng_seed, region=None,
                   stop_on_exit=False):
    """Vectorized twin of simulate_path over path_index = 0..n_paths-1.

    region: optional LatticeBox; returns per-path first exit step from it
    (n+1 when the path never leaves within the horizon).
    Returns (exit_steps (n_paths,), finals (n_paths, d) absolute coords).
    """
    x0 = tuple(int(c) for c in x0)
    if not kernel.contains(x0):
        raise ValueError(f"start {x0} outside the kernel domain")
    d = kernel.d
    if kernel.is_cluster:
        side, org, open_axis, _deg, _inv = kernel._cluster_data
        use_masks = True
    else:
        # box coords = absolute coords; side only sizes unused strides
        side = 2 * n + 3
        org = np.zeros(d, dtype=np.int64)
        open_axis = np.zeros((1, 1), dtype=np.uint8)
        use_masks = False
    start_box = np.array([x0[a] - org[a] for a in range(d)], dtype=np.int64)
    if region is None:
        rlo = np.full(d, np.iinfo(np.int64).min // 2, dtype=np.int64)
        rhi = np.full(d, np.iinfo(np.int64).max // 2, dtype=np.int64)
    else:
        rlo = np.array([region.center[a] - region.radius - org[a]
                        for a in range(d)], dtype=np.int64)
        rhi = np.array([region.center[a] + region.radius - org[a]
                        for a in range(d)], dtype=np.int64)
    exit_steps, finals = walk_batch(
        n_paths, n, d, side, use_masks, open_axis, start_box, rlo, rhi,
        np.uint64(rng_seed & prf.MASK64), np.uint8(1 if stop_on_exit else 0))
    return exit_steps, finals + org[None, :]


def exit_time(path, region):
    """First index leaving the region.

    region: LatticeBox -> first t with X_t outside the box; integer r ->
    first t with |X_t - X_0|_inf >= r.  None if no exit within the sample.
    """
    sites = path.sites
    if isinstance(region, LatticeBox):
        for t in range(sites.shape[0]):
            if not region.contains(tuple(sites[t])):
                return t
        return None
    r = int(region)
    x0 = sites[0]
    for t in range(sites.shape[0]):
        if int(np.max(np.abs(sites[t] - x0))) >= r:
            return t
    return None


# ---------------------------------------------------- killed kernels (exact)


def _region_arrays(kernel, region):
    """Per-axis transfer masks, invdeg and selfloop arrays over the region.

    masks[a][x] is True when the walk may move x -> x+e_a withOUT leaving
    the region: in cluster mode the edge must be open with both endpoints in
    the configuration box and both in the region; in lattice mode only the
    region matters.  invdeg is the walk's own 1/deg (cluster: in-box degree;
    lattice: 1/(2d) everywhere); mass moved along no mask is killed.
    """
    d = kernel.d
    side = 2 * region.radius + 1
    shape = (side,) * d
    if not kernel.is_cluster:
        masks = []
        for a in range(d):
            m = np.ones(shape, dtype=bool)
            sl = tuple(slice(-1, None) if j == a else slice(None)
                       for j in range(d))
            m[sl] = False
            masks.append(m)
        invdeg = np.full(shape, 1.0 / (2 * d))
        selfloop = np.zeros(shape, dtype=bool)
        return masks, invdeg, selfloop
    cfg = kernel.cfg
    rbox = cfg.spec.box_radius
    lo = [region.center[a] - region.radius for a in range(d)]
    hi = [region.center[a] + region.radius for a in range(d)]
    if any(lo[a] < -rbox or hi[a] > rbox for a in range(d)):
        raise ValueError("region extends beyond the configuration box")
    cside, org, _open_axis, deg, invdeg_full = kernel._cluster_data
    sub = tuple(slice(lo[a] - org[a], hi[a] - org[a] + 1) for a in range(d))
    masks = []
    for a in range(d):
        m = cfg.axis_open_in_box(a)[sub].copy()
        sl = tuple(slice(-1, None) if j == a else slice(None)
                   for j in range(d))
        m[sl] = False
        masks.append(m)
    deg_sub = deg.reshape((cside,) * d)[sub]
    invdeg = invdeg_full.reshape((cside,) * d)[sub]
    selfloop = deg_sub == 0
    return masks, np.ascontiguousarray(invdeg), selfloop


def _killed_step(old, masks, invdeg, selfloop):
    """One killed-transfer sweep; identical arithmetic for both modes."""
    d = old.ndim
    flow = old * invdeg
    new = old * selfloop
    for a in range(d):
        m = masks[a]
        sl_lo = tuple(slice(None, -1) if j == a else slice(None)
                      for j in range(d))
        sl_hi = tuple(slice(1, None) if j == a else slice(None)
                      for j in range(d))
        contrib = flow * m
        new[sl_hi] = new[sl_hi] + contrib[sl_lo]
        new[sl_lo] = new[sl_lo] + flow[sl_hi] * m[sl_lo]
    return new


def killed_heat_kernel(kernel, region, x, n):
    """Exact law of (X_n, walk stayed in region through step n); the mass
    deficit 1 - total is the probability of exiting by time n."""
    x = tuple(int(c) for c in x)
    if not region.contains(x):
        raise ValueError("start must lie in the region")
    if kernel.is_cluster and not kernel.contains(x):
        raise ValueError("start outside the configuration box")
    d = kernel.d
    masks, invdeg, selfloop = _region_arrays(kernel, region)
    side = 2 * region.radius + 1
    old = np.zeros((side,) * d)
    start_idx = tuple(x[a] - (region.center[a] - region.radius)
                      for a in range(d))
    old[start_idx] = 1.0
    for _ in range(n):
        old = _killed_step(old, masks, invdeg, selfloop)
    out = {}
    lo = [region.center[a] - region.radius for a in range(d)]
    for idx in np.argwhere(old > 0.0):
        site = tuple(int(idx[a] + lo[a]) for a in range(d))
        out[site] = float(old[tuple(idx)])
    return out


def killed_mass_curve(kernel, region, x, n):
    """Total killed-kernel mass after each sweep: array m of length n+1 with
    m[k] = P_x[T_region > k]; exact and non-increasing."""
    x = tuple(int(c) for c in x)
    if not region.contains(x):
        raise ValueError("start must lie in the region")
    d = kernel.d
    masks, invdeg, selfloop = _region_arrays(kernel, region)
    side = 2 * region.radius + 1
    old = np.zeros((side,) * d)
    start_idx = tuple(x[a] - (region.center[a] - region.radius)
                      for a in range(d))
    old[start_idx] = 1.0
    out = np.empty(n + 1)
    out[0] = 1.0
    for k in range(1, n + 1):
        old = _killed_step(old, masks, invdeg, selfloop)
        out[k] = float(old.sum())
    return out


def confinement_probability(d, R, n):
    """Exact P_0[T_{B(0,R)} >= n] for the homogeneous walk: the walk stays
    inside the ball through step n-1.  Equals 1 when n <= R+1 (leaving an
    l-inf ball of radius R takes more than R steps)."""
    if R < 1:
        raise ValueError("R must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    if n <= R + 1:
        return 1.0
    kernel = WalkKernel.full_lattice(d)
    region = LatticeBox((0,) * d, R)
    curve = killed_mass_curve(kernel, region, (0,) * d, n - 1)
    return float(curve[n - 1])


def confinement_curve(d, R, ns):
    """Exact P_0[T_{B(0,R)} >= n] for each n in ns (one shared sweep)."""
    ns = [int(n) for n in ns]
    if any(n < 0 for n in ns):
        raise ValueError("n must be >= 0")
    n_max = max(ns)
    kernel = WalkKernel.full_lattice(d)
    region = LatticeBox((0,) * d, R)
    curve = killed_mass_curve(kernel, region, (0,) * d, max(n_max - 1, 0))
    return np.array([1.0 if n <= R + 1 else float(curve[n - 1])
                     for n in ns])
