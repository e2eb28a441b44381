"""Counter-based pseudo-randomness.

Every random quantity in the package (edge states, environment values, walk
steps, derived seeds) is a pure function of a seed and integer coordinates,
computed by a splitmix64-style mixing chain.  This gives reproducibility,
lazy evaluation of unbounded fields, and monotone coupling across p for
percolation (the same uniform decides an edge at every p).

Two implementations are kept in lockstep: a scalar reference on Python ints
(exact, no overflow warnings) and a vectorized numpy path.  The numba twins
live in _kernels.py.  Tests assert bit-identical output across all paths.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
SALT = 0xD1B54A32D192ED03
MIX_A = 0xBF58476D1CE4E5B9
MIX_B = 0x94D049BB133111EB

# domain separation tags, one per consumer
TAG_ENV = 0x1A93C5D2E8F00001
TAG_EDGE = 0x2B5DE7A1C4900002
TAG_WALK = 0x3C17F9B0A2D00003
TAG_DERIVE = 0x4D89AB1E60F00004

U01_SCALE = 2.0 ** -53


def mix64(z):
    """splitmix64 finalizer on a Python int (reference path)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * MIX_B) & MASK64
    return z ^ (z >> 31)


def absorb(h, v):
    """Fold one signed integer into the running hash."""
    return mix64(h ^ ((((v & MASK64) * GOLDEN) + SALT) & MASK64))


def chain(seed, tag, values):
    """Hash a seed, a domain tag and a sequence of signed ints."""
    h = mix64((seed & MASK64) ^ tag)
    for v in values:
        h = absorb(h, v)
    return h


def u01(h):
    """Map a 64-bit hash to a uniform in the open interval (0, 1)."""
    return ((h >> 11) + 0.5) * U01_SCALE


# ---------------------------------------------------------------- vectorized

_U64 = np.uint64


def mix64_vec(z):
    # wrapping is the point; numpy warns on 0-d overflow, arrays wrap silently
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _U64(MIX_A)
        z = (z ^ (z >> _U64(27))) * _U64(MIX_B)
    return z ^ (z >> _U64(31))


def absorb_vec(h, v):
    v = np.asarray(v).astype(np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        x = h ^ (v * _U64(GOLDEN) + _U64(SALT))
    return mix64_vec(x)


def chain_vec(seed, tag, value_arrays):
    """Vectorized chain: value_arrays is a sequence of broadcastable int arrays."""
    h = mix64((seed & MASK64) ^ tag)
    out = None
    for v in value_arrays:
        out = absorb_vec(_U64(h) if out is None else out, v)
        h = None
    if out is None:
        return _U64(mix64((seed & MASK64) ^ tag))
    return out


def u01_vec(h):
    return ((h >> _U64(11)).astype(np.float64) + 0.5) * U01_SCALE


# ------------------------------------------------------ inverse normal (AS241)

# Wichura's PPND16 rational approximations; coefficients shared with the
# numba twin and verified against scipy.special.ndtri to ~1e-15.
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
      5.3941960214247511077e3, 2.1213794301586595867e4, 3.9307895800092710610e4,
      2.8729085735721942674e4, 5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
      6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
      1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15)


def _poly(coef, r):
    acc = coef[7]
    for c in (coef[6], coef[5], coef[4], coef[3], coef[2], coef[1], coef[0]):
        acc = acc * r + c
    return acc


def inv_normal_cdf(p):
    """Standard normal quantile of p in (0,1), scalar reference."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_A, r) / _poly(_B, r)
    r = p if q < 0.0 else 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        val = _poly(_E, r) / _poly(_F, r)
    return -val if q < 0.0 else val


def inv_normal_cdf_vec(p):
    p = np.asarray(p, dtype=np.float64)
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    r = 0.180625 - q[central] * q[central]
    out[central] = q[central] * _poly(_A, r) / _poly(_B, r)
    tail = ~central
    qt = q[tail]
    r = np.where(qt < 0.0, p[tail], 1.0 - p[tail])
    r = np.sqrt(-np.log(r))
    near = r <= 5.0
    val = np.empty_like(r)
    rn = r[near] - 1.6
    val[near] = _poly(_C, rn) / _poly(_D, rn)
    rf = r[~near] - 5.0
    val[~near] = _poly(_E, rf) / _poly(_F, rf)
    out[tail] = np.where(qt < 0.0, -val, val)
    return out


# --------------------------------------------------------- Poisson inversion

def poisson_inverse(u, rate):
    """Smallest k with CDF(k) >= u, by forward summation (scalar)."""
    c = np.exp(-rate)
    f = c
    k = 0
    while u > f:
        k += 1
        c *= rate / k
        f += c
        if k > 100000:  # unreachable for u in (0,1), guards NaN misuse
            raise ValueError("poisson inversion failed to converge")
    return k


def poisson_inverse_vec(u, rate):
    u = np.asarray(u, dtype=np.float64)
    c = np.full_like(u, np.exp(-rate))
    f = c.copy()
    k = np.zeros(u.shape, dtype=np.int64)
    active = u > f
    j = 0
    while active.any():
        j += 1
        if j > 100000:
            raise ValueError("poisson inversion failed to converge")
        c[active] *= rate / j
        f[active] += c[active]
        k[active] = j
        active = active & (u > f)
    return k


# ------------------------------------------------------------ derived seeds

def _fold_label(label):
    h = 0xCBF29CE484222325  # FNV-1a 64 offset basis
    for b in label.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h


def derive_seed(master, label, index=0):
    """Deterministic child seed for a named stream and index."""
    return chain(master, TAG_DERIVE, (_fold_label(label), index))
