"""Good blocks and good open tubes in percolation configurations.

A good block around x is a fully open neighborhood: every edge with an
endpoint in B(x, floor(L)) is open.  A good open tube is a straight open
spine along e_1 whose non-base vertices are sealed sideways (perpendicular
edges closed) while the outer edge shell around those vertices is fully
open; edges incident to the base and the spine-extension edge past the far
end are exempt from the sealing rule.  An empty tube (floor(L) = 0) has no
goodness verdict.

Single-point predicates walk the edge pattern through BondConfig.is_open;
scans evaluate the same patterns for every center of a box at once via
shifted slices of the per-axis open-bit arrays.  The two paths share no
code and are cross-checked by the tests.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import prf
from .errors import BoxTooSmallError, EmptyTubeError
from .lattice import LatticeBox, edges_touching
from .percolation import ClusterView, PercolationSpec, sample_bonds

_PARITIES = ("even", "odd", "both")


def _validate_parity(parity):
    if parity not in _PARITIES:
        raise ValueError("parity must be 'even', 'odd' or 'both'")


# -------------------------------------------------------------------- blocks

def is_good_block(cfg, x, L):
    """True iff every edge with an endpoint in B(x, floor(L)) is open.

    Requires B(x, ceil(L)+1) inside the configuration box, which keeps all
    tested edges stored; missing edges are never treated as open.
    """
    x = tuple(int(c) for c in x)
    if len(x) != cfg.d:
        raise ValueError("center dimension mismatch")
    if L < 0:
        raise ValueError("L must be >= 0")
    m = int(math.floor(L))
    guard = int(math.ceil(L)) + 1
    r = cfg.box_radius
    if any(abs(c) + guard > r for c in x):
        raise BoxTooSmallError(
            f"B({x}, {guard}) does not fit in the box of radius {r}")
    for e in edges_touching(LatticeBox(x, m)):
        if not cfg.is_open(e):
            return False
    return True


# --------------------------------------------------------------------- tubes

@dataclass(frozen=True)
class TubeSpec:
    """A straight tube in direction e_1: spine vertices base + k*e_1 for
    k = 0..floor(length)."""

    base: tuple
    length: float

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("tube length must be >= 0")

    @property
    def floor_length(self):
        return int(math.floor(self.length))

    @property
    def is_empty(self):
        return self.floor_length == 0


@lru_cache(maxsize=None)
def _tube_requirements(d, m):
    """Edge pattern of a good open tube of floor length m >= 1 on Z^d.

    Returns (requirements, lo, hi): requirements is a tuple of
    (base_offset, axis, want_open) triples with offsets relative to the
    tube base, lo/hi the per-axis coordinate reach over all tested edge
    endpoints.  The pattern: spine edges open; perpendicular edges at the
    non-base spine vertices closed (edges incident to the base and the
    spine-extension edge past the far end exempt); every edge at l1
    distance exactly one from the non-base vertices open.
    """
    if d < 2:
        raise ValueError("tubes need d >= 2")
    if m < 1:
        raise ValueError("floor length must be >= 1")

    def vertex(k):
        return (k,) + (0,) * (d - 1)

    def shifted(v, a, step):
        return tuple(c + (step if j == a else 0) for j, c in enumerate(v))

    core = {vertex(k) for k in range(1, m + 1)}      # V(T) minus the base
    spine = tuple((vertex(k), 0, True) for k in range(m))
    closed = []
    for k in range(1, m + 1):
        v = vertex(k)
        for a in range(1, d):
            closed.append((v, a, False))
            closed.append((shifted(v, a, -1), a, False))
    shell = set()
    for v in core:
        for a in range(d):
            shell.add(shifted(v, a, 1))
            shell.add(shifted(v, a, -1))
    shell -= core
    outer = set()
    for w in shell:
        for a in range(d):
            for base in (shifted(w, a, -1), w):
                if base in core or shifted(base, a, 1) in core:
                    continue
                outer.add((base, a))
    closed_edges = {(b, a) for b, a, _ in closed}
    spine_edges = {(b, a) for b, a, _ in spine}
    assert len(closed_edges) == len(closed)
    assert not (outer & closed_edges) and not (outer & spine_edges)
    reqs = spine + tuple(closed) + tuple(
        (b, a, True) for b, a in sorted(outer))
    ends = []
    for b, a, _ in reqs:
        ends.append(b)
        ends.append(shifted(b, a, 1))
    arr = np.array(ends, dtype=np.int64)
    return reqs, tuple(int(v) for v in arr.min(axis=0)), \
        tuple(int(v) for v in arr.max(axis=0))


def is_good_open_tube(cfg, tube):
    """Goodness verdict for the full tube pattern at tube.base.

    Raises EmptyTubeError when floor(L) = 0 (the empty tube is a flag, not
    a verdict) and BoxTooSmallError when any tested edge leaves the box.
    """
    x = tuple(int(c) for c in tube.base)
    if len(x) != cfg.d:
        raise ValueError("tube base dimension mismatch")
    if tube.is_empty:
        raise EmptyTubeError(
            "floor(L) = 0: the tube is empty by convention")
    reqs, lo, hi = _tube_requirements(cfg.d, tube.floor_length)
    r = cfg.box_radius
    for j in range(cfg.d):
        if x[j] + lo[j] < -r or x[j] + hi[j] > r:
            raise BoxTooSmallError(
                f"tube pattern at {x} (floor length {tube.floor_length}) "
                f"reaches outside the box of radius {r}")
    for off, a, want in reqs:
        e = (tuple(x[j] + off[j] for j in range(cfg.d)), a)
        if cfg.is_open(e) != want:
            return False
    return True


# --------------------------------------------------------- vectorized scans

def _axis_open_full(cfg, a):
    # open bits of all axis-a slots on the extended base grid; index =
    # coordinate + box_radius + 1 along every axis
    return cfg.open_[..., a] != 0


def _slide_width(arr, axis, width):
    """AND of `width` consecutive cells along an axis (window anchored at
    the low end); the result is shorter by width - 1."""
    n = arr.shape[axis]

    def sl(j):
        s = [slice(None)] * arr.ndim
        s[axis] = slice(j, n - width + 1 + j)
        return tuple(s)

    out = arr[sl(0)].copy()
    for j in range(1, width):
        out &= arr[sl(j)]
    return out


def _good_block_mask(cfg, scan_radius, L, center):
    """Good-block predicate over every x in B(center, scan_radius), via a
    separable sliding-AND per axis: the block needs the axis-a window
    [-m-1, m] x [-m, m]^(d-1) of axis-a edges fully open."""
    d = cfg.d
    s = int(scan_radius)
    m = int(math.floor(L))
    guard = int(math.ceil(L)) + 1
    r = cfg.box_radius
    if any(abs(center[j]) + s + guard > r for j in range(d)):
        raise BoxTooSmallError(
            f"scan box B({tuple(center)}, {s}) plus block margin {guard} "
            f"does not fit in the box of radius {r}")
    base = r + 1
    good = None
    for a in range(d):
        arr = _axis_open_full(cfg, a)
        sl = tuple(slice(center[j] - s - m - (1 if j == a else 0) + base,
                         center[j] + s + m + base + 1)
                   for j in range(d))
        arr = arr[sl]
        for j in range(d):
            arr = _slide_width(arr, j, 2 * m + 1 + (1 if j == a else 0))
        good = arr if good is None else (good & arr)
    return good


def _good_tube_mask(cfg, scan_radius, m, center):
    """Good-tube predicate over every base in B(center, scan_radius): one
    shifted-slice AND per required edge of the pattern."""
    d = cfg.d
    s = int(scan_radius)
    reqs, lo, hi = _tube_requirements(d, m)
    r = cfg.box_radius
    for j in range(d):
        if center[j] - s + lo[j] < -r or center[j] + s + hi[j] > r:
            raise BoxTooSmallError(
                f"scan box B({tuple(center)}, {s}) plus the tube pattern "
                f"(floor length {m}) does not fit in the box of radius {r}")
    bits = [_axis_open_full(cfg, a) for a in range(d)]
    base = r + 1
    mask = np.ones((2 * s + 1,) * d, dtype=bool)
    for off, a, want in reqs:
        sl = tuple(slice(center[j] - s + off[j] + base,
                         center[j] + s + off[j] + base + 1)
                   for j in range(d))
        piece = bits[a][sl]
        mask &= piece if want else ~piece
    return mask


def _parity_field(center, s, d):
    """(sum of coordinates) mod 2 over B(center, s) as a uint8 grid."""
    total = np.zeros((1,) * d, dtype=np.uint8)
    for j in range(d):
        shape = [1] * d
        shape[j] = 2 * s + 1
        ax = (np.arange(center[j] - s, center[j] + s + 1) & 1).astype(np.uint8)
        total = total ^ ax.reshape(shape)
    return total


def _giant_slice(view, center, s):
    r = view.cfg.box_radius
    sl = tuple(slice(center[j] - s + r, center[j] + s + r + 1)
               for j in range(view.cfg.d))
    return view.giant_mask()[sl]


def _mask_sites(mask, center, s):
    idx = np.argwhere(mask)
    idx += np.asarray(center, dtype=np.int64) - s
    return tuple(tuple(int(v) for v in row) for row in idx)


@dataclass(frozen=True)
class BlockScanResult:
    scan_radius: int
    length: float
    parity: str
    center: tuple
    centers_even: tuple
    centers_odd: tuple
    eps: object = None     # the L(n)-rule parameter when the caller has one

    def count(self, which):
        _validate_parity(which)
        if which == "even":
            return len(self.centers_even)
        if which == "odd":
            return len(self.centers_odd)
        return len(self.centers_even) + len(self.centers_odd)


def scan_good_blocks(cfg, view, scan_radius, L, parity="both", center=None,
                     eps=None):
    """Good-block centers of the requested parity inside B(center,
    scan_radius) that lie in the giant component of the configuration."""
    _validate_parity(parity)
    if scan_radius < 0:
        raise ValueError("scan_radius must be >= 0")
    center = tuple(int(c) for c in center) if center is not None \
        else (0,) * cfg.d
    mask = _good_block_mask(cfg, scan_radius, L, center)
    mask &= _giant_slice(view, center, scan_radius)
    par = _parity_field(center, scan_radius, cfg.d)
    even = _mask_sites(mask & (par == 0), center, scan_radius) \
        if parity in ("even", "both") else ()
    odd = _mask_sites(mask & (par == 1), center, scan_radius) \
        if parity in ("odd", "both") else ()
    return BlockScanResult(int(scan_radius), float(L), parity, center,
                           even, odd, eps)


def scan_good_tubes(cfg, view, scan_radius, L, parity="both", center=None):
    """Base points of good open tubes T_{x,L} inside B(center, scan_radius),
    filtered to the giant component and the requested parity."""
    _validate_parity(parity)
    if scan_radius < 0:
        raise ValueError("scan_radius must be >= 0")
    center = tuple(int(c) for c in center) if center is not None \
        else (0,) * cfg.d
    probe = TubeSpec(center, float(L))
    if probe.is_empty:
        raise EmptyTubeError(
            "floor(L) = 0: the tube is empty by convention")
    mask = _good_tube_mask(cfg, scan_radius, probe.floor_length, center)
    mask &= _giant_slice(view, center, scan_radius)
    if parity != "both":
        par = _parity_field(center, scan_radius, cfg.d)
        mask = mask & (par == (0 if parity == "even" else 1))
    return _mask_sites(mask, center, scan_radius)


# -------------------------------------------------------- density experiment

@dataclass(frozen=True)
class DensityResult:
    kind: str
    parity: str
    ns: tuple
    slope: float
    slope_se: float
    lengths: tuple
    scan_radii: tuple
    counts: np.ndarray          # (replicas, len(ns)) int64
    mean_counts: np.ndarray


def _loglog_slope(ns, means):
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.log(np.asarray(means, dtype=np.float64))
    xm = x - x.mean()
    sxx = float((xm ** 2).sum())
    slope = float((xm * y).sum() / sxx)
    resid = y - (y.mean() + slope * xm)
    k = len(x)
    se = math.sqrt(float((resid ** 2).sum()) / (k - 2) / sxx) if k > 2 else 0.0
    return slope, se


def density_experiment(d, p, ns, length_rule, seed, kind="blocks",
                       parity="odd", replicas=1, scan_rule=None):
    """Counts of good structures against the scan size n, with the fitted
    log-log slope of the mean count.

    length_rule maps n to L(n); scan_rule maps n to the scan radius
    (default: n itself for blocks, floor(n^(1/4)) for tubes, the regimes
    in which the counts are expected to grow polynomially).  One sampled
    configuration per replica serves every n (nested scans).
    """
    ns = sorted({int(n) for n in ns})
    if len(ns) < 3:
        raise ValueError("need at least 3 scan sizes")
    _validate_parity(parity)
    if kind not in ("blocks", "tubes"):
        raise ValueError("kind must be 'blocks' or 'tubes'")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if scan_rule is None:
        scan_rule = (lambda n: n) if kind == "blocks" \
            else (lambda n: max(1, int(n ** 0.25)))
    lengths = [float(length_rule(n)) for n in ns]
    radii = [int(scan_rule(n)) for n in ns]
    need = 0
    for n, L, s in zip(ns, lengths, radii):
        if s < 0:
            raise ValueError(f"scan rule gives radius {s} < 0 at n = {n}")
        if kind == "blocks":
            reach = int(math.ceil(L)) + 1
        else:
            m = int(math.floor(L))
            if m < 1:
                raise EmptyTubeError(
                    f"length rule gives floor(L) = 0 at n = {n}")
            _reqs, lo, hi = _tube_requirements(d, m)
            reach = max(-min(lo), max(hi))
        need = max(need, s + reach)
    origin = (0,) * d
    counts = np.zeros((replicas, len(ns)), dtype=np.int64)
    for rep in range(replicas):
        rep_seed = prf.derive_seed(seed, "density-cfg", rep)
        cfg = sample_bonds(PercolationSpec(d, need, p, rep_seed))
        view = ClusterView(cfg)
        for i, (n, L, s) in enumerate(zip(ns, lengths, radii)):
            if kind == "blocks":
                mask = _good_block_mask(cfg, s, L, origin)
            else:
                mask = _good_tube_mask(cfg, s, int(math.floor(L)), origin)
            mask &= _giant_slice(view, origin, s)
            if parity == "both":
                counts[rep, i] = int(mask.sum())
            else:
                par = _parity_field(origin, s, d)
                want = 0 if parity == "even" else 1
                counts[rep, i] = int((mask & (par == want)).sum())
        del cfg, view
    mean = counts.mean(axis=0)
    if np.any(mean <= 0):
        bad = ns[int(np.argmin(mean))]
        raise ValueError(
            f"zero mean count at n = {bad}; cannot fit a log-log slope")
    slope, se = _loglog_slope(ns, mean)
    return DensityResult(kind, parity, tuple(ns), slope, se, tuple(lengths),
                         tuple(radii), counts, mean)
