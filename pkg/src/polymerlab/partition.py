"""Normalized, point-to-point and restricted partition functions.

All quantities are exact forward dynamic programs over one spatial layer at
a time, in linear scale with an explicit running log-shift (values per layer
are renormalized whenever they leave a safe floating range).  The engine is
the numba kernel dp_run; this module prepares its inputs, enforces the
horizon guard, and adds a slow dictionary-based reference recursion
(PolymerLayer / transfer_layer) used by the tests as an independent oracle.

Windowed runs truncate each layer to |x - start|_inf <= window radius and
report the dropped transition mass as log_leak; truncation is never silent.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import prf
from ._kernels import dp_run, dp_many
from .environment import DisorderSpec, EnvField, log_mgf
from .errors import BoxTooSmallError, ResourceError
from .lattice import LatticeBox, linf
from .walk import WalkKernel, _killed_step, _region_arrays

POINT_TO_POINT_SITE_BUDGET = 4_000_000


# ------------------------------------------------------------ window layouts

def window_schedule(n, sigma=None, margin=2):
    """Per-step window radii r_0..r_n.

    sigma=None: exact support, r_i = i.  Otherwise r_i tracks
    ceil(sigma*sqrt(i)) + margin, clamped to grow at most 1 per step (the
    walk's own speed limit), so layer supports are always nested.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if sigma is None:
        return np.arange(n + 1, dtype=np.int64)
    if sigma <= 0:
        raise ValueError("window_sigma must be positive")
    out = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        raw = min(i, math.ceil(sigma * math.sqrt(i)) + margin)
        out[i] = min(raw, out[i - 1] + 1)
    return out


def block_radius_for(n, eps, d):
    """Block radius floor((eps * log n)^(1/d)), clamped to at least 1."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if eps <= 0:
        raise ValueError("eps must be positive")
    return max(1, int(math.floor((eps * math.log(n)) ** (1.0 / d))))


# --------------------------------------------------------- dp_run data setup

_DUMMY_MASKS = np.zeros((1, 1), dtype=np.uint8)
_DUMMY_INV = np.zeros(1, dtype=np.float64)


# hard cap on dense layer cells; two float64 buffers of this size ~ 2.6 GB
DENSE_LAYER_BUDGET = 160_000_000


def _lattice_data(d, start, alloc_radius):
    side = 2 * alloc_radius + 1
    if side ** d > DENSE_LAYER_BUDGET:
        raise ResourceError(
            f"transfer layers would need {side}^{d} = {side ** d:,} cells "
            f"(budget {DENSE_LAYER_BUDGET:,}); pass window_sigma to bound "
            "the support")
    org = np.array([start[a] - alloc_radius for a in range(d)], dtype=np.int64)
    start_box = np.full(d, alloc_radius, dtype=np.int64)
    return side, org, start_box, False, _DUMMY_MASKS, _DUMMY_INV


def _cluster_data(kernel, start):
    side, org, open_axis, _deg, invdeg = kernel._cluster_data
    start_box = np.array([start[a] - org[a] for a in range(kernel.d)],
                         dtype=np.int64)
    return side, org, start_box, True, open_axis, invdeg


def _padded_block_data(kernel, center, rb):
    """Cluster-walk data on the cubic block B(center, rb), zero-padded where
    the block sticks out of the configuration box.  Padded slots carry no
    open edge and degree 0, so they can never receive mass; degrees of real
    sites remain the full in-box degrees (the walk's own law)."""
    d = kernel.d
    cside, org, open_axis, deg, invdeg = kernel._cluster_data
    side = 2 * rb + 1
    shape = (side,) * d
    sub_masks = np.zeros((d,) + shape, dtype=np.uint8)
    sub_inv = np.zeros(shape, dtype=np.float64)
    src = []
    dst = []
    for a in range(d):
        lo = center[a] - rb - org[a]
        hi = lo + side  # exclusive
        s0 = max(lo, 0)
        s1 = min(hi, cside)
        if s0 >= s1:
            return side, sub_masks.reshape(d, -1), sub_inv.reshape(-1)
        src.append(slice(s0, s1))
        dst.append(slice(s0 - lo, s1 - lo))
    src = tuple(src)
    dst = tuple(dst)
    full_shape = (cside,) * d
    for a in range(d):
        sub_masks[(a,) + dst] = open_axis[a].reshape(full_shape)[src]
    sub_inv[dst] = invdeg.reshape(full_shape)[src]
    return side, np.ascontiguousarray(sub_masks.reshape(d, -1)), \
        sub_inv.reshape(-1)


def _check_horizon(kernel, start, n, allow_boundary):
    if not kernel.is_cluster:
        return False
    r = kernel.cfg.spec.box_radius
    if all(abs(start[a]) + n <= r for a in range(kernel.d)):
        return False
    if not allow_boundary:
        raise BoxTooSmallError(
            f"box radius {r} cannot contain B({tuple(start)}, {n}); "
            "pass allow_boundary=True for box-restricted semantics")
    return True


def _family_args(spec, beta):
    lam = log_mgf(spec, beta)
    rate = float(spec.rate)
    return spec.code, lam, rate, math.sqrt(rate)


# ------------------------------------------------------------------- results

@dataclass(frozen=True)
class PartitionResult:
    log_w: float
    n: int
    beta: float
    start: tuple
    mode: str
    family: str
    env_seed: int
    time_offset: int
    log_leak: float
    window_sigma: object = None
    boundary_restricted: bool = False
    log_w_path: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class RestrictedResult:
    log_v: float
    n: int
    t_star: int
    block_radius: int
    beta: float
    mode: str
    empty_centers: bool
    center_table: tuple = field(default=(), repr=False)  # (center, logA, logVc)


def _zero_beta_result(kernel, n, start, env):
    return PartitionResult(
        log_w=0.0, n=n, beta=0.0, start=tuple(start), mode=kernel.mode,
        family=env.spec.family, env_seed=env.seed,
        time_offset=env.time_offset, log_leak=-np.inf,
        log_w_path=np.zeros(n + 1))


def _run(kernel, env, beta, n, start, windows, sigma, restricted_flag):
    d = kernel.d
    if kernel.is_cluster:
        side, org, start_box, use_masks, masks, invdeg = \
            _cluster_data(kernel, start)
    else:
        side, org, start_box, use_masks, masks, invdeg = \
            _lattice_data(d, start, int(windows[-1]))
    family, lam, rate, sq = _family_args(env.spec, beta)
    log_w, log_leak, _fin, _shift = dp_run(
        d, side, org, start_box, n, use_masks, masks, invdeg, windows,
        family, float(beta), lam, rate, sq,
        np.uint64(env.seed & prf.MASK64), env.time_offset)
    return PartitionResult(
        log_w=float(log_w[n]), n=n, beta=float(beta), start=tuple(start),
        mode=kernel.mode, family=env.spec.family, env_seed=env.seed,
        time_offset=env.time_offset, log_leak=float(log_leak),
        window_sigma=sigma, boundary_restricted=restricted_flag,
        log_w_path=log_w)


def partition_exact(kernel, env, beta, n, start=None, allow_boundary=False):
    """log W_n from the full forward recursion (no truncation).

    Cluster mode requires the configuration box to contain B(start, n);
    with allow_boundary=True the box-restricted walk is computed instead
    and the result is flagged.  beta=0 returns log W = 0 exactly.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    start = tuple(start) if start is not None else (0,) * kernel.d
    if not kernel.contains(start):
        raise ValueError(f"start {start} outside the kernel domain")
    restricted = _check_horizon(kernel, start, n, allow_boundary)
    if beta == 0.0:
        return _zero_beta_result(kernel, n, start, env)
    return _run(kernel, env, beta, n, start, window_schedule(n), None,
                restricted)


def partition_windowed(kernel, env, beta, n, start=None, window_sigma=2.25,
                       margin=2):
    """log W_n with layers truncated to radius ~ window_sigma * sqrt(i).

    The dropped transition mass is returned as log_leak (its expected
    contribution to W under the remaining mean-one weights); compare it to
    log_w to judge the truncation.  beta=0 returns 0 exactly (the untruncated
    value, by the normalization identity).
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    start = tuple(start) if start is not None else (0,) * kernel.d
    if not kernel.contains(start):
        raise ValueError(f"start {start} outside the kernel domain")
    if beta == 0.0:
        return _zero_beta_result(kernel, n, start, env)
    windows = window_schedule(n, window_sigma, margin)
    return _run(kernel, env, beta, n, start, windows, window_sigma, False)


# -------------------------------------------------- point-to-point (numpy DP)

def point_to_point(kernel, env, beta, start, constraints,
                   allow_boundary=False):
    """log of the contribution to W from paths meeting every (time, site)
    constraint; the last constraint time is the horizon.

    Exact dense recursion in numpy, independent of the numba engine; sized
    for oracle-scale instances (site budget guard).
    """
    start = tuple(start)
    if not kernel.contains(start):
        raise ValueError(f"start {start} outside the kernel domain")
    if not constraints:
        raise ValueError("constraints must be non-empty")
    times = [int(t) for t, _s in constraints]
    if any(t < 1 for t in times):
        raise ValueError("constraint times must be >= 1")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("constraint times must be strictly increasing")
    n = times[-1]
    _check_horizon(kernel, start, n, allow_boundary)
    d = kernel.d
    if kernel.is_cluster:
        region = kernel.cfg.spec.box
    else:
        region = LatticeBox(start, n)
    if region.site_count() > POINT_TO_POINT_SITE_BUDGET:
        raise ResourceError(
            f"point_to_point region has {region.site_count()} sites; "
            f"budget is {POINT_TO_POINT_SITE_BUDGET}")
    masks, invdeg, selfloop = _region_arrays(kernel, region)
    side = 2 * region.radius + 1
    lo = [region.center[a] - region.radius for a in range(d)]
    layer = np.zeros((side,) * d)
    layer[tuple(start[a] - lo[a] for a in range(d))] = 1.0

    lam = log_mgf(env.spec, beta)
    coords = region.sites()
    shift = 0.0
    by_time = {int(t): tuple(int(c) for c in s) for t, s in constraints}
    for i in range(1, n + 1):
        layer = _killed_step(layer, masks, invdeg, selfloop)
        if beta != 0.0:
            w = np.exp(beta * env.layer(i, coords) - lam)
            layer = layer * w.reshape(layer.shape)
        elif lam != 0.0:
            layer = layer * math.exp(-lam)
        if i in by_time:
            site = by_time[i]
            keep = tuple(site[a] - lo[a] for a in range(d))
            if any(not (0 <= keep[a] < side) for a in range(d)):
                return -np.inf
            val = layer[keep]
            layer = np.zeros_like(layer)
            layer[keep] = val
        m = layer.max()
        if m == 0.0:
            return -np.inf
        if m > 1e250 or m < 1e-250:
            layer /= m
            shift += math.log(m)
    return float(shift + np.log(layer.sum()))


# ------------------------------------------------------- restricted partition

def _stage1_arrivals(kernel, env, beta, t_star, start, centers):
    """Log arrival weights at the centers after t_star free steps (weights
    included); returns dict center -> log_A for reachable centers."""
    d = kernel.d
    if kernel.is_cluster:
        side, org, start_box, use_masks, masks, invdeg = \
            _cluster_data(kernel, start)
    else:
        side, org, start_box, use_masks, masks, invdeg = \
            _lattice_data(d, start, t_star)
    if beta == 0.0:
        family, lam, rate, sq = 0, 0.0, 1.0, 1.0
    else:
        family, lam, rate, sq = _family_args(env.spec, beta)
    _lw, _leak, final, shift = dp_run(
        d, side, org, start_box, t_star, use_masks, masks, invdeg,
        window_schedule(t_star), family, float(beta), lam, rate, sq,
        np.uint64(env.seed & prf.MASK64), env.time_offset)
    out = {}
    final = final.reshape((side,) * d)
    for c in centers:
        # the final buffer is only valid inside the last window; outside it
        # the arrival mass is structurally zero anyway
        if linf(c, start) > t_star:
            continue
        idx = tuple(c[a] - org[a] for a in range(d))
        if any(not (0 <= idx[a] < side) for a in range(d)):
            continue
        v = final[idx]
        if v > 0.0:
            out[c] = shift + math.log(v)
    return out


def _confined_log_w(kernel, env, beta, center, rb, n2, t_star):
    """Stage 2: log of the confined partition value over n2 steps started
    at the center, walk killed on leaving B(center, rb)."""
    d = kernel.d
    if kernel.is_cluster:
        side, sub_masks, sub_inv = _padded_block_data(kernel, center, rb)
        use_masks = True
    else:
        side = 2 * rb + 1
        sub_masks, sub_inv = _DUMMY_MASKS, _DUMMY_INV
        use_masks = False
    org = np.array([center[a] - rb for a in range(d)], dtype=np.int64)
    start_box = np.full(d, rb, dtype=np.int64)
    windows = np.minimum(np.arange(n2 + 1, dtype=np.int64), rb)
    if beta == 0.0:
        family, lam, rate, sq = 0, 0.0, 1.0, 1.0
    else:
        family, lam, rate, sq = _family_args(env.spec, beta)
    log_w, _leak, _fin, _shift = dp_run(
        d, side, org, start_box, n2, use_masks, sub_masks, sub_inv, windows,
        family, float(beta), lam, rate, sq,
        np.uint64(env.seed & prf.MASK64), env.time_offset + t_star)
    return float(log_w[n2])


def restricted_partition(kernel, env, beta, n, block_centers,
                         eps_block_radius, start=None, allow_boundary=False):
    """log V: the partition restricted to paths that sit at a block center
    at time floor(sqrt(n)) and stay in that center's block through time n.

    Factorizes exactly: V = sum_c A(c) * V_c with A(c) the weighted arrival
    mass at c and V_c the confined partition of the remaining n - t* steps
    (environment times shifted by t*).  V <= W always.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rb = int(eps_block_radius)
    if rb < 0:
        raise ValueError("block radius must be >= 0")
    start = tuple(start) if start is not None else (0,) * kernel.d
    if not kernel.contains(start):
        raise ValueError(f"start {start} outside the kernel domain")
    centers = sorted({tuple(int(c) for c in s) for s in block_centers})
    t_star = math.isqrt(n)
    if not centers:
        return RestrictedResult(-np.inf, n, t_star, rb, float(beta),
                                kernel.mode, empty_centers=True)
    for c in centers:
        if not kernel.contains(c):
            raise ValueError(f"block center {c} outside the kernel domain")
    _check_horizon(kernel, start, t_star, allow_boundary)
    arrivals = _stage1_arrivals(kernel, env, beta, t_star, start, centers)
    n2 = n - t_star
    table = []
    terms = []
    for c in centers:
        if c not in arrivals:
            continue
        log_vc = _confined_log_w(kernel, env, beta, c, rb, n2, t_star)
        table.append((c, arrivals[c], log_vc))
        terms.append(arrivals[c] + log_vc)
    log_v = float(logsumexp(terms)) if terms else -np.inf
    return RestrictedResult(log_v, n, t_star, rb, float(beta), kernel.mode,
                            empty_centers=False, center_table=tuple(table))


def event_probabilities(kernel, n, block_centers, eps_block_radius,
                        start=None, allow_boundary=False):
    """(P[at a center at time t*], P[... and confined to its block to n]).

    Exact: the free walk layer at t* = floor(sqrt(n)) gives the arrival
    probabilities; per-center confinement factors come from the numpy
    killed-transfer sweep (an independent path from the numba engine).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rb = int(eps_block_radius)
    start = tuple(start) if start is not None else (0,) * kernel.d
    centers = sorted({tuple(int(c) for c in s) for s in block_centers})
    t_star = math.isqrt(n)
    if not centers:
        return 0.0, 0.0
    _check_horizon(kernel, start, t_star, allow_boundary)
    # dummy env: family-0 runs never evaluate the field
    env0 = EnvField(DisorderSpec("standard_gaussian"), 0)
    arrivals = _stage1_arrivals(kernel, env0, 0.0, t_star, start, centers)
    n2 = n - t_star
    d = kernel.d
    p_h = 0.0
    p_g = 0.0
    for c in centers:
        if c not in arrivals:
            continue
        a = math.exp(arrivals[c])
        p_h += a
        region = LatticeBox(c, rb)
        if kernel.is_cluster:
            masks, invdeg, selfloop = _padded_region_arrays(kernel, region)
        else:
            masks, invdeg, selfloop = _region_arrays(kernel, region)
        side = 2 * rb + 1
        layer = np.zeros((side,) * d)
        layer[(rb,) * d] = 1.0
        for _ in range(n2):
            layer = _killed_step(layer, masks, invdeg, selfloop)
        p_g += a * float(layer.sum())
    return p_h, p_g


def _padded_region_arrays(kernel, region):
    """Like walk._region_arrays for cluster mode, but blocks may stick out
    of the configuration box: outside slots get no edges and degree 0."""
    d = kernel.d
    rb = region.radius
    side, sub_masks_flat, sub_inv_flat = _padded_block_data(
        kernel, region.center, rb)
    shape = (2 * rb + 1,) * d
    masks = []
    for a in range(d):
        m = sub_masks_flat[a].reshape(shape).astype(bool)
        sl = tuple(slice(-1, None) if j == a else slice(None)
                   for j in range(d))
        m = m.copy()
        m[sl] = False
        masks.append(m)
    invdeg = sub_inv_flat.reshape(shape)
    selfloop = invdeg == 0.0
    return masks, invdeg, selfloop


# ------------------------------------------------ replica-level MC estimates

@dataclass(frozen=True)
class FreeEnergyResult:
    mean: float
    se: float
    n: int
    beta: float
    replicas: int
    mode: str
    log_ws: np.ndarray = field(repr=False)   # (replicas, n+1)
    log_leaks: np.ndarray = field(repr=False)


def replica_seeds(master_seed, count, label="env"):
    return np.array([prf.derive_seed(master_seed, label, r) & prf.MASK64
                     for r in range(count)], dtype=np.uint64)


def _run_many(kernel, spec, beta, n, start, windows, env_seeds, time_offset):
    d = kernel.d
    if kernel.is_cluster:
        side, org, start_box, use_masks, masks, invdeg = \
            _cluster_data(kernel, start)
    else:
        side, org, start_box, use_masks, masks, invdeg = \
            _lattice_data(d, start, int(windows[-1]))
    family, lam, rate, sq = _family_args(spec, beta)
    return dp_many(d, side, org, start_box, n, use_masks, masks, invdeg,
                   windows, family, float(beta), lam, rate, sq,
                   env_seeds, time_offset)


def free_energy_estimate(kernel, spec, beta, n, replicas, seed, start=None,
                         window_sigma=None, allow_boundary=False):
    """Sample mean and standard error of (1/n) log W over i.i.d. environment
    replicas (exact DP each; optional window truncation for large n)."""
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    start = tuple(start) if start is not None else (0,) * kernel.d
    if not kernel.contains(start):
        raise ValueError(f"start {start} outside the kernel domain")
    if beta == 0.0:
        zeros = np.zeros((replicas, n + 1))
        return FreeEnergyResult(0.0, 0.0, n, 0.0, replicas, kernel.mode,
                                zeros, np.full(replicas, -np.inf))
    if window_sigma is None:
        _check_horizon(kernel, start, n, allow_boundary)
        windows = window_schedule(n)
    else:
        windows = window_schedule(n, window_sigma)
    seeds = replica_seeds(seed, replicas)
    log_ws, leaks = _run_many(kernel, spec, beta, n, start, windows, seeds,
                              0)
    fe = log_ws[:, n] / n
    mean = float(fe.mean())
    se = float(fe.std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0
    return FreeEnergyResult(mean, se, n, float(beta), replicas, kernel.mode,
                            log_ws, leaks)


@dataclass(frozen=True)
class FractionalMomentResult:
    ns: tuple
    starts: tuple
    sup_means: np.ndarray          # per n: max over starts of mean sqrt(W)
    means: np.ndarray = field(repr=False)   # (starts, ns)
    ses: np.ndarray = field(repr=False)


def fractional_moment_estimate(kernel, spec, beta, ns, starts, replicas,
                               seed, window_sigma=2.25):
    """Monte Carlo E[sqrt(W_n(y))] per start y and horizon n; returns the
    per-n sup over starts with per-(start, n) standard errors.  Environment
    seeds are shared across starts and across the n grid (one DP per
    (start, replica) pair covers every n on the way)."""
    ns = sorted({int(n) for n in ns})
    if not ns or ns[0] < 1:
        raise ValueError("ns must be non-empty with n >= 1")
    starts = [tuple(int(c) for c in s) for s in starts]
    if not starts:
        raise ValueError("starts must be non-empty")
    for y in starts:
        if not kernel.contains(y):
            raise ValueError(f"start {y} outside the kernel domain")
    n_max = ns[-1]
    seeds = replica_seeds(seed, replicas)
    windows = window_schedule(n_max, window_sigma)
    means = np.empty((len(starts), len(ns)))
    ses = np.empty_like(means)
    for si, y in enumerate(starts):
        if beta == 0.0:
            means[si] = 1.0
            ses[si] = 0.0
            continue
        log_ws, _leaks = _run_many(kernel, spec, beta, n_max, y, windows,
                                   seeds, 0)
        for ni, n in enumerate(ns):
            sq = np.exp(0.5 * log_ws[:, n])
            means[si, ni] = float(sq.mean())
            ses[si, ni] = float(sq.std(ddof=1) / math.sqrt(replicas)) \
                if replicas > 1 else 0.0
    return FractionalMomentResult(tuple(ns), tuple(starts),
                                  means.max(axis=0), means, ses)


def decay_diagnostic(series, kappa):
    """Map (n, log W_n) pairs to (n, log(n)^kappa / n * log W_n)."""
    pairs = [(int(n), float(lw)) for n, lw in series]
    if len(pairs) < 2:
        raise ValueError("series needs at least 2 entries")
    if any(n < 2 for n, _ in pairs):
        raise ValueError("series entries need n >= 2")
    return [(n, (math.log(n) ** kappa) / n * lw) for n, lw in pairs]


# ------------------------------------------- dictionary reference recursion

@dataclass(frozen=True)
class PolymerLayer:
    """One time slice of the recursion: site -> log weight.  Reference
    implementation (slow, dictionary-based); the tests iterate it against
    the array engine."""

    time: int
    weights: dict

    def log_total(self):
        if not self.weights:
            return -np.inf
        return float(logsumexp(np.array(sorted(self.weights.values()))))


def initial_layer(start):
    return PolymerLayer(0, {tuple(start): 0.0})


def transfer_layer(kernel, env, beta, layer):
    """One forward step: spread by the walk kernel, then weight by
    exp(beta * omega(i, y) - lambda(beta)) at the arrival sites."""
    lam = log_mgf(env.spec, beta)
    i = layer.time + 1
    gather = {}
    for x in sorted(layer.weights):
        lw = layer.weights[x]
        for y, q in kernel.step_distribution(x):
            gather.setdefault(y, []).append(lw + math.log(q))
    new = {}
    for y in sorted(gather):
        w = float(logsumexp(np.array(gather[y])))
        if beta != 0.0:
            w += beta * env.value(i, y) - lam
        new[y] = w
    return PolymerLayer(i, new)
