"""Numba kernels: hashing twins, union-find labeling, DP engines, path MC.

Everything here mirrors the pure-python/numpy reference implementations in
prf.py and the module-level numpy code; tests assert bit-identical agreement.
Kernels are single-pass, allocation-light, and deterministic: reductions with
order sensitivity (layer sums) happen outside in fixed canonical order.
"""

import numpy as np
from numba import njit, prange

from .prf import GOLDEN, MASK64, MIX_A, MIX_B, SALT, U01_SCALE

_U = np.uint64


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> _U(30))) * _U(MIX_A)
    z = (z ^ (z >> _U(27))) * _U(MIX_B)
    return z ^ (z >> _U(31))


@njit(inline="always")
def _absorb(h, v):
    return _mix64(h ^ (_U(v) * _U(GOLDEN) + _U(SALT)))


@njit(inline="always")
def _seed_tag(seed, tag):
    return _mix64(_U(seed) ^ _U(tag))


@njit(inline="always")
def _u01(h):
    return (np.float64(h >> _U(11)) + 0.5) * U01_SCALE


# ---------------------------------------------------------------- inverse CDF

@njit(inline="always")
def _ndtri(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@njit(inline="always")
def _poisson_inv(u, rate):
    c = np.exp(-rate)
    f = c
    k = 0
    while u > f:
        k += 1
        c *= rate / k
        f += c
    return k


@njit(cache=True)
def hash_check(seed, tag, values):
    """Chain hash of int64 values, for cross-testing against prf.chain."""
    h = _seed_tag(seed, tag)
    for j in range(values.shape[0]):
        h = _absorb(h, values[j])
    return h


# ------------------------------------------------------------------ union-find

@njit(inline="always")
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:  # path compression
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def label_components(open_flat, d, side):
    """Connected components of the open subgraph inside the box.

    open_flat: uint8 array over extended-grid edges, C-order over base sites
    of side (side + 2), innermost index = axis.  Box sites map to extended
    coordinates shifted by +1.  Only edges with both endpoints in the box
    join components.  Returns int64 root labels per box site (C-order).
    """
    n = side ** d
    ext = side + 2
    # strides for box (C-order) and extended grid
    stride = np.empty(d, dtype=np.int64)
    stride_ext = np.empty(d, dtype=np.int64)
    s = 1
    t = 1
    for a in range(d - 1, -1, -1):
        stride[a] = s
        s *= side
        stride_ext[a] = t
        t *= ext
    parent = np.arange(n, dtype=np.int64)
    coords = np.zeros(d, dtype=np.int64)
    for i in range(n):
        # decode box coords of i
        rem = i
        ext_base = 0
        for a in range(d):
            c = rem // stride[a]
            rem -= c * stride[a]
            coords[a] = c
            ext_base += (c + 1) * stride_ext[a]
        for a in range(d):
            if coords[a] + 1 < side:
                if open_flat[ext_base * d + a] != 0:
                    ra = _find(parent, i)
                    rb = _find(parent, i + stride[a])
                    if ra != rb:
                        if ra < rb:
                            parent[rb] = ra
                        else:
                            parent[ra] = rb
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        labels[i] = _find(parent, i)
    return labels


# -------------------------------------------------------------- environment

TAG_ENV_U = _U(0x1A93C5D2E8F00001)
TAG_WALK_U = _U(0x3C17F9B0A2D00003)


@njit(inline="always")
def _omega(h, family, rate, sqrt_rate):
    """Disorder value from a finished site hash; twins EnvField.value."""
    u = _u01(h)
    if family == 1:
        return _ndtri(u)
    k = _poisson_inv(u, rate)
    return (np.float64(k) - rate) / sqrt_rate


# --------------------------------------------------------------- DP engine

BIG = 1e100
SMALL = 1e-100


@njit(cache=True)
def dp_run(d, side, org, start_box, n_steps, use_masks, open_axis, invdeg,
           window_radii, family, beta, lam, rate, sqrt_rate,
           env_seed, time_offset):
    """Forward transfer recursion for one environment replica.

    Layers live on a flat C-order box of side^d sites.  Per layer i the
    support is clipped to the window |x - start|_inf <= window_radii[i]
    (monotone, growing at most 1 per step); transition mass that would land
    outside the window is dropped and accumulated into the leak total.

    use_masks=False: homogeneous lattice walk, probability 1/(2d) per move;
    moves beyond the box wall are dropped (counted as leak).
    use_masks=True: cluster walk; open_axis[a, y] says the edge (y, y+e_a)
    is open with both endpoints in the box, invdeg[y] = 1/deg(y).  Walls
    leak nothing because degrees only count in-box open edges.

    family 0 applies no weight (pure probability transfer); 1/2 weight each
    visited site by exp(beta*omega(i, x) - lam) with omega from the counter
    PRF (bit-identical to EnvField.value).

    Returns (log_w, log_leak, final_layer, final_shift): log_w[i] = log of
    the layer-i total; the final layer is valid only inside the last window
    and stores value*exp(-final_shift).
    """
    n_sites = 1
    for _ in range(d):
        n_sites *= side
    stride = np.empty(d, dtype=np.int64)
    s = 1
    for a in range(d - 1, -1, -1):
        stride[a] = s
        s *= side
    buf_a = np.zeros(n_sites, dtype=np.float64)
    buf_b = np.zeros(n_sites, dtype=np.float64)
    log_w = np.zeros(n_steps + 1, dtype=np.float64)

    start_flat = 0
    start_sum = 0
    for a in range(d):
        start_flat += start_box[a] * stride[a]
        start_sum += start_box[a]

    inv2d = 1.0 / (2.0 * d)
    h_tag = _seed_tag(env_seed, TAG_ENV_U)

    # isolated start: the walk self-loops forever
    if use_masks and invdeg[start_flat] == 0.0:
        acc = 0.0
        for i in range(1, n_steps + 1):
            if family > 0:
                h = _absorb(h_tag, i + time_offset)
                for a in range(d):
                    h = _absorb(h, start_box[a] + org[a])
                acc += beta * _omega(h, family, rate, sqrt_rate) - lam
            log_w[i] = acc
        buf_a[start_flat] = 1.0
        return log_w, -np.inf, buf_a, acc

    buf_a[start_flat] = 1.0
    shift = 0.0
    leak_acc = 0.0
    s_prev = 1.0
    dead = False

    lo = np.empty(d, dtype=np.int64)
    hi = np.empty(d, dtype=np.int64)
    cc = np.empty(d, dtype=np.int64)
    xc = np.empty(d, dtype=np.int64)
    last = d - 1

    for i in range(1, n_steps + 1):
        if dead:
            log_w[i] = -np.inf
            continue
        old = buf_a if (i & 1) == 1 else buf_b
        new = buf_b if (i & 1) == 1 else buf_a
        r = window_radii[i]
        for a in range(d):
            lo[a] = max(start_box[a] - r, 0)
            hi[a] = min(start_box[a] + r, side - 1)
        par = (start_sum + i) & 1
        if family > 0:
            h_i = _absorb(h_tag, i + time_offset)
        else:
            h_i = h_tag

        s_pre = 0.0
        s_post = 0.0
        m_max = 0.0
        # odometer over the leading d-1 axes
        for a in range(last):
            cc[a] = lo[a]
        while True:
            base = 0
            rowsum = 0
            for a in range(last):
                base += cc[a] * stride[a]
                rowsum += cc[a]
                xc[a] = cc[a]
            if family > 0:
                h_row = h_i
                for a in range(last):
                    h_row = _absorb(h_row, cc[a] + org[a])
            else:
                h_row = h_i
            c0 = lo[last] + ((par - rowsum - lo[last]) & 1)
            for cl in range(c0, hi[last] + 1, 2):
                f = base + cl
                xc[last] = cl
                acc = 0.0
                if use_masks:
                    for a in range(d):
                        st = stride[a]
                        if xc[a] > 0 and open_axis[a, f - st] != 0:
                            acc += old[f - st] * invdeg[f - st]
                        if xc[a] < side - 1 and open_axis[a, f] != 0:
                            acc += old[f + st] * invdeg[f + st]
                else:
                    for a in range(d):
                        st = stride[a]
                        if xc[a] > 0:
                            acc += old[f - st]
                        if xc[a] < side - 1:
                            acc += old[f + st]
                    acc *= inv2d
                s_pre += acc
                if acc != 0.0 and family > 0:
                    h = _absorb(h_row, cl + org[last])
                    val = acc * np.exp(
                        beta * _omega(h, family, rate, sqrt_rate) - lam)
                else:
                    val = acc
                new[f] = val
                s_post += val
                if val > m_max:
                    m_max = val
            # advance odometer
            if last == 0:
                break
            a = last - 1
            while a >= 0:
                cc[a] += 1
                if cc[a] <= hi[a]:
                    break
                cc[a] = lo[a]
                a -= 1
            if a < 0:
                break

        # a window that grows by a full step cannot truncate (the walk's own
        # speed limit), so skip leak accounting there: any s_prev - s_pre
        # residue on those layers is summation rounding, not dropped mass
        if window_radii[i] <= window_radii[i - 1]:
            lk = s_prev - s_pre
            if lk > 0.0:
                leak_acc += lk
        if s_post <= 0.0:
            log_w[i] = -np.inf
            dead = True
            s_prev = 0.0
            continue
        log_w[i] = shift + np.log(s_post)

        if m_max > BIG or m_max < SMALL:
            # rescale the layer so values stay in a safe range
            mlog = np.log(m_max)
            for a in range(last):
                cc[a] = lo[a]
            while True:
                base = 0
                rowsum = 0
                for a in range(last):
                    base += cc[a] * stride[a]
                    rowsum += cc[a]
                c0 = lo[last] + ((par - rowsum - lo[last]) & 1)
                for cl in range(c0, hi[last] + 1, 2):
                    new[base + cl] /= m_max
                if last == 0:
                    break
                a = last - 1
                while a >= 0:
                    cc[a] += 1
                    if cc[a] <= hi[a]:
                        break
                    cc[a] = lo[a]
                    a -= 1
                if a < 0:
                    break
            shift += mlog
            s_post /= m_max
            leak_acc /= m_max

        s_prev = s_post

        # zero the ring just outside the window: the next layer gathers from
        # radius r+2 at most, and these cells hold stale two-layers-old data
        if i < n_steps:
            r_out = r + 2
            for a in range(d):
                lo2 = max(start_box[a] - r_out, 0)
                hi2 = min(start_box[a] + r_out, side - 1)
                cc[a] = lo2
                xc[a] = hi2  # reuse xc as hi2 storage
            while True:
                inside = True
                base = 0
                for a in range(last):
                    base += cc[a] * stride[a]
                    if cc[a] < lo[a] or cc[a] > hi[a]:
                        inside = False
                lo2l = max(start_box[last] - r_out, 0)
                hi2l = min(start_box[last] + r_out, side - 1)
                if inside:
                    for cl in range(lo2l, lo[last]):
                        new[base + cl] = 0.0
                    for cl in range(hi[last] + 1, hi2l + 1):
                        new[base + cl] = 0.0
                else:
                    for cl in range(lo2l, hi2l + 1):
                        new[base + cl] = 0.0
                if last == 0:
                    break
                a = last - 1
                while a >= 0:
                    cc[a] += 1
                    if cc[a] <= xc[a]:
                        break
                    cc[a] = max(start_box[a] - r_out, 0)
                    a -= 1
                if a < 0:
                    break

    final = buf_a if (n_steps & 1) == 0 else buf_b
    if dead:
        final[:] = 0.0
    if leak_acc > 0.0:
        log_leak = shift + np.log(leak_acc)
    else:
        log_leak = -np.inf
    return log_w, log_leak, final, shift


@njit(cache=True, parallel=True)
def dp_many(d, side, org, start_box, n_steps, use_masks, open_axis, invdeg,
            window_radii, family, beta, lam, rate, sqrt_rate,
            env_seeds, time_offset):
    """dp_run over many environment replicas; rows ordered by replica."""
    n_rep = env_seeds.shape[0]
    # NaN-filled so an aborted parallel region can never pass for data
    log_ws = np.full((n_rep, n_steps + 1), np.nan, dtype=np.float64)
    leaks = np.full(n_rep, np.nan, dtype=np.float64)
    for j in prange(n_rep):
        lw, lk, _fin, _sh = dp_run(d, side, org, start_box, n_steps,
                                   use_masks, open_axis, invdeg,
                                   window_radii, family, beta, lam, rate,
                                   sqrt_rate, env_seeds[j], time_offset)
        log_ws[j] = lw
        leaks[j] = lk
    return log_ws, leaks


# ----------------------------------------------------------------- path MC

@njit(cache=True, parallel=True)
def walk_batch(n_paths, n_steps, d, side, use_masks, open_axis,
               start_box, rlo, rhi, seed, stop_on_exit):
    """Simulate paths of the lattice/cluster walk; twins walk.simulate_path.

    Step t of path j draws u = u01(chain(seed, TAG_WALK, (j, t))) and picks
    uniformly among allowed moves enumerated axis-major, minus before plus.
    exit_steps[j] = first t with X_t outside [rlo, rhi] (n_steps+1 if none).
    finals holds X_{n_steps} in box coords; rows that exited early hold the
    exit position when stop_on_exit is set.
    """
    stride = np.empty(d, dtype=np.int64)
    s = 1
    for a in range(d - 1, -1, -1):
        stride[a] = s
        s *= side
    exit_steps = np.full(n_paths, n_steps + 1, dtype=np.int64)
    finals = np.empty((n_paths, d), dtype=np.int64)
    h_tag = _seed_tag(seed, TAG_WALK_U)
    for j in prange(n_paths):
        xc = np.empty(d, dtype=np.int64)
        f = 0
        outside = False
        for a in range(d):
            xc[a] = start_box[a]
            f += xc[a] * stride[a]
            if xc[a] < rlo[a] or xc[a] > rhi[a]:
                outside = True
        if outside:
            exit_steps[j] = 0
        h_path = _absorb(h_tag, j)
        exited = outside
        for t in range(1, n_steps + 1):
            if exited and stop_on_exit:
                break
            u = _u01(_absorb(h_path, t))
            if use_masks:
                deg = 0
                for a in range(d):
                    st = stride[a]
                    if xc[a] > 0 and open_axis[a, f - st] != 0:
                        deg += 1
                    if xc[a] < side - 1 and open_axis[a, f] != 0:
                        deg += 1
                if deg > 0:
                    pick = np.int64(u * deg)
                    if pick >= deg:
                        pick = deg - 1
                    k = 0
                    for a in range(d):
                        st = stride[a]
                        if xc[a] > 0 and open_axis[a, f - st] != 0:
                            if k == pick:
                                xc[a] -= 1
                                f -= st
                                break
                            k += 1
                        if xc[a] < side - 1 and open_axis[a, f] != 0:
                            if k == pick:
                                xc[a] += 1
                                f += st
                                break
                            k += 1
            else:
                pick = np.int64(u * (2 * d))
                if pick >= 2 * d:
                    pick = 2 * d - 1
                a = pick >> 1
                if (pick & 1) == 0:
                    xc[a] -= 1
                    f -= stride[a]
                else:
                    xc[a] += 1
                    f += stride[a]
            if not exited:
                for a in range(d):
                    if xc[a] < rlo[a] or xc[a] > rhi[a]:
                        exit_steps[j] = t
                        exited = True
                        break
        for a in range(d):
            finals[j, a] = xc[a]
    return exit_steps, finals
