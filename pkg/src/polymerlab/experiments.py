"""Experiment harness: validated configs, seeded replicas, CSV emission.

Every experiment is described by a JSON-friendly ExperimentConfig.  run()
dispatches on the kind, writes byte-deterministic CSV files plus a JSON
manifest (config hash, library version, wall clock), and returns the rows
in memory.  All randomness flows from the master seed through the counter
PRF, replicas are reduced in index order, and every stochastic estimate is
emitted next to its standard error.

Verdicts are deliberately directional ("consistent with ...") because the
underlying statements are asymptotic; the harness never claims a limit.
Significance policy for slopes and sign checks is 4 standard errors.
"""

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, prf
from .environment import FAMILIES, DisorderSpec
from .errors import ConfigError
from .l2 import beta_l2, collision_series_sum, green_function_quadrature
from .partition import free_energy_estimate
from .percolation import ClusterView, PercolationSpec, \
    condition_origin_in_giant, sample_bonds
from .structures import density_experiment
from .walk import WalkKernel

KINDS = ("percolate", "scan-blocks", "scan-tubes", "partition", "free-energy",
         "l2-threshold", "concentration", "regime-scan", "decay")
MODES = ("lattice", "cluster")
RULE_KINDS = ("power_log", "mult_log", "const", "power", "identity")
SIGNIFICANCE = 4.0


# ------------------------------------------------------------ configuration

@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    d: int = 3
    mode: str = "lattice"
    p: float = None
    box_radius: int = None
    family: str = "standard_gaussian"
    rate: float = 1.0
    beta: float = None
    beta_grid: tuple = None
    n_grid: tuple = None
    replicas: int = 1
    eps_grid: tuple = None
    kappa_grid: tuple = None
    eps: float = None
    delta: float = None
    xi: float = 0.5
    length_rule: dict = None
    scan_rule: dict = None
    parity: str = "odd"
    k_max: int = None
    method: str = "convolution"
    engine: str = "windowed"
    window_sigma: float = 2.25
    trend: dict = None
    assert_band: bool = True
    out_dir: str = "runs"

    def disorder(self):
        return DisorderSpec(self.family, self.rate)

    def canonical(self):
        raw = asdict(self)
        return json.loads(json.dumps(raw))

    def sha256(self):
        blob = json.dumps(self.canonical(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _want(value, name, types, pred=None, what=""):
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"config field '{name}' must be {what}, got a bool")
    if not isinstance(value, types):
        raise ConfigError(
            f"config field '{name}' must be {what}, got {value!r}")
    if pred is not None and not pred(value):
        raise ConfigError(f"config field '{name}' must be {what}, got {value!r}")
    return value


def _want_grid(value, name, minlen=1, numeric=(int, float)):
    if not isinstance(value, (list, tuple)) or len(value) < minlen:
        raise ConfigError(
            f"config field '{name}' must be a list with at least "
            f"{minlen} entries, got {value!r}")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, numeric) \
                or not math.isfinite(float(v)):
            raise ConfigError(
                f"config field '{name}[{i}]' must be a finite number, "
                f"got {v!r}")
        out.append(v)
    return tuple(out)


def _want_rule(rule, name):
    if not isinstance(rule, dict):
        raise ConfigError(f"config field '{name}' must be an object, got {rule!r}")
    kind = rule.get("kind")
    if kind not in RULE_KINDS:
        raise ConfigError(
            f"config field '{name}.kind' must be one of {RULE_KINDS}, "
            f"got {kind!r}")
    need = {"power_log": ("coeff", "power"), "mult_log": ("coeff",),
            "const": ("value",), "power": ("coeff", "power"),
            "identity": ()}[kind]
    for key in need:
        v = rule.get(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)) \
                or not math.isfinite(float(v)):
            raise ConfigError(
                f"config field '{name}.{key}' must be a finite number, "
                f"got {v!r}")
    extra = set(rule) - {"kind", *need}
    if extra:
        raise ConfigError(
            f"config field '{name}' has unknown keys {sorted(extra)}")
    return dict(rule)


def compile_rule(rule):
    """Turn a rule object into n -> value.  No code is evaluated; the
    shapes are fixed: (coeff*log n)^power, coeff*log n, const, coeff*n^power,
    or n itself."""
    kind = rule["kind"]
    if kind == "power_log":
        c, q = float(rule["coeff"]), float(rule["power"])
        return lambda n: (c * math.log(n)) ** q
    if kind == "mult_log":
        c = float(rule["coeff"])
        return lambda n: c * math.log(n)
    if kind == "const":
        v = float(rule["value"])
        return lambda n: v
    if kind == "power":
        c, q = float(rule["coeff"]), float(rule["power"])
        return lambda n: c * float(n) ** q
    return lambda n: n


_REQUIRED = {
    "percolate": ("p", "box_radius"),
    "scan-blocks": ("p", "n_grid", "length_rule"),
    "scan-tubes": ("p", "n_grid", "length_rule"),
    "partition": ("beta_grid", "n_grid"),
    "free-energy": ("beta_grid", "n_grid"),
    "l2-threshold": (),
    "concentration": ("beta", "n_grid", "eps_grid"),
    "regime-scan": ("p", "box_radius", "beta_grid", "n_grid"),
    "decay": ("p", "box_radius", "beta", "n_grid"),
}


def config_from_dict(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}")
    if "kind" not in raw:
        raise ConfigError("config field 'kind' is required")
    kind = raw["kind"]
    if kind not in KINDS:
        raise ConfigError(
            f"config field 'kind' must be one of {KINDS}, got {kind!r}")
    if "seed" not in raw:
        raise ConfigError("config field 'seed' is required")
    _want(raw["seed"], "seed", (int,), what="an integer")

    merged = {f: ExperimentConfig.__dataclass_fields__[f].default
              for f in known if f not in ("beta_grid", "n_grid", "eps_grid",
                                          "kappa_grid")}
    merged.update({k: v for k, v in raw.items()})

    for name in _REQUIRED[kind]:
        if merged.get(name) is None:
            raise ConfigError(
                f"config field '{name}' is required for kind {kind!r}")

    _want(merged["d"], "d", (int,), lambda v: v >= 1, "an integer >= 1")
    if merged["mode"] not in MODES:
        raise ConfigError(
            f"config field 'mode' must be one of {MODES}, got "
            f"{merged['mode']!r}")
    if merged["family"] not in FAMILIES:
        raise ConfigError(
            f"config field 'family' must be one of {FAMILIES}, got "
            f"{merged['family']!r}")
    _want(merged["rate"], "rate", (int, float), lambda v: v > 0,
          "a positive number")
    if merged["p"] is not None:
        _want(merged["p"], "p", (int, float), lambda v: 0.0 <= v <= 1.0,
              "a probability in [0, 1]")
    if merged["box_radius"] is not None:
        _want(merged["box_radius"], "box_radius", (int,), lambda v: v >= 1,
              "an integer >= 1")
    _want(merged["replicas"], "replicas", (int,), lambda v: v >= 1,
          "an integer >= 1")
    if merged["beta"] is not None:
        _want(merged["beta"], "beta", (int, float),
              lambda v: math.isfinite(float(v)) and v >= 0,
              "a finite number >= 0")
    for grid, minlen in (("beta_grid", 1), ("n_grid", 1), ("eps_grid", 1),
                         ("kappa_grid", 1)):
        if merged.get(grid) is not None:
            merged[grid] = _want_grid(merged[grid], grid, minlen)
    if merged["length_rule"] is not None:
        merged["length_rule"] = _want_rule(merged["length_rule"],
                                           "length_rule")
    if merged["scan_rule"] is not None:
        merged["scan_rule"] = _want_rule(merged["scan_rule"], "scan_rule")
    if merged["parity"] not in ("even", "odd", "both"):
        raise ConfigError(
            f"config field 'parity' must be even/odd/both, got "
            f"{merged['parity']!r}")
    if merged["k_max"] is not None:
        _want(merged["k_max"], "k_max", (int,), lambda v: v >= 10,
              "an integer >= 10")
    if merged["method"] not in ("convolution", "fourier"):
        raise ConfigError(
            f"config field 'method' must be convolution or fourier, got "
            f"{merged['method']!r}")
    if merged["engine"] not in ("windowed", "exact"):
        raise ConfigError(
            f"config field 'engine' must be windowed or exact, got "
            f"{merged['engine']!r}")
    _want(merged["window_sigma"], "window_sigma", (int, float),
          lambda v: v > 0, "a positive number")
    _want(merged["out_dir"], "out_dir", (str,), what="a string path")
    _want(merged["assert_band"], "assert_band", (bool,), what="a boolean")
    if merged["trend"] is not None and not isinstance(merged["trend"], dict):
        raise ConfigError("config field 'trend' must be an object")

    if kind in ("scan-blocks", "scan-tubes") and len(merged["n_grid"]) < 3:
        raise ConfigError(
            "config field 'n_grid' needs at least 3 entries for density scans")
    if kind == "concentration":
        if merged["replicas"] < 100:
            raise ConfigError(
                "config field 'replicas' must be >= 100 for concentration")
        if len(merged["n_grid"]) < 2:
            raise ConfigError(
                "config field 'n_grid' needs at least 2 entries for "
                "concentration")
    if kind in ("regime-scan", "decay") and len(merged["n_grid"]) < 2:
        raise ConfigError(
            f"config field 'n_grid' needs at least 2 entries for {kind}")
    if kind == "regime-scan" and len(merged["beta_grid"]) < 2:
        raise ConfigError(
            "config field 'beta_grid' needs at least 2 entries for "
            "regime-scan")
    if kind == "partition" or kind == "free-energy":
        if merged["mode"] == "cluster":
            for name in ("p", "box_radius"):
                if merged.get(name) is None:
                    raise ConfigError(
                        f"config field '{name}' is required for cluster mode")
    if kind == "decay" and merged.get("kappa_grid") is None:
        merged["kappa_grid"] = (1.0,)
    return ExperimentConfig(**merged)


def load_config(path):
    try:
        with open(path) as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    return config_from_dict(raw)


# ------------------------------------------------------------------ records

@dataclass(frozen=True)
class RunRecord:
    kind: str
    config_hash: str
    version: str
    wall_seconds: float
    run_dir: str
    csv_paths: dict
    row_counts: dict
    verdicts: dict
    tables: dict = field(repr=False)


def _fmt_cell(v):
    if v is None:
        return ""
    if isinstance(v, (np.floating, float)):
        return repr(float(v))
    if isinstance(v, (np.integer, int)):
        return str(int(v))
    return str(v)


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(fieldnames)
        for row in rows:
            w.writerow([_fmt_cell(row.get(k)) for k in fieldnames])


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


# ----------------------------------------------------------------- fitting

def _ols_slope(x, y):
    """(slope, se) of y against x; se from the residual variance with
    len-2 degrees of freedom (0 when the fit is exact or underdetermined)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xbar = x.mean()
    den = float(((x - xbar) ** 2).sum())
    if den == 0.0:
        return math.nan, math.nan
    slope = float(((x - xbar) * (y - y.mean())).sum() / den)
    if len(x) <= 2:
        return slope, 0.0
    resid = y - y.mean() - slope * (x - xbar)
    var = float((resid ** 2).sum()) / (len(x) - 2)
    return slope, math.sqrt(var / den)


def _slope_over_replicas(x, ys):
    """Per-replica OLS slopes of ys[r] vs x; returns (mean, se)."""
    x = np.asarray(x, dtype=np.float64)
    xbar = x.mean()
    den = float(((x - xbar) ** 2).sum())
    slopes = ((x - xbar) * (ys - ys.mean(axis=1, keepdims=True))).sum(axis=1) \
        / den
    mean = float(slopes.mean())
    se = float(slopes.std(ddof=1) / math.sqrt(len(slopes))) \
        if len(slopes) > 1 else 0.0
    return mean, se


# ----------------------------------------------------------- cluster setup

def _conditioned_cluster(config):
    spec = PercolationSpec(config.d, int(config.box_radius), float(config.p),
                           prf.derive_seed(config.seed, "percolation", 0))
    cfg, view, attempts = condition_origin_in_giant(spec)
    return cfg, view, attempts


def _build_kernel(config):
    if config.mode == "cluster":
        cfg, _view, attempts = _conditioned_cluster(config)
        return WalkKernel.cluster(cfg), attempts
    return WalkKernel.full_lattice(config.d), 0


# ------------------------------------------------------- experiment bodies

def _exp_percolate(config):
    rows = []
    giant_shares = []
    origin_hits = []
    for rep in range(config.replicas):
        seed = prf.derive_seed(config.seed, "percolate", rep)
        spec = PercolationSpec(config.d, int(config.box_radius),
                               float(config.p), seed)
        cfg = sample_bonds(spec)
        view = ClusterView(cfg)
        giant = int(np.count_nonzero(view.giant_mask()))
        total = view.giant_mask().size
        origin = bool(view.in_giant((0,) * config.d))
        rows.append({"replica": rep, "seed": seed,
                     "open_fraction": cfg.open_fraction(),
                     "n_components": view.n_components(),
                     "giant_sites": giant, "box_sites": total,
                     "giant_share": giant / total,
                     "origin_in_giant": int(origin)})
        giant_shares.append(giant / total)
        origin_hits.append(1.0 if origin else 0.0)
    shares = np.array(giant_shares)
    hits = np.array(origin_hits)
    r = len(rows)
    verdicts = {
        "giant_share_mean": float(shares.mean()),
        "giant_share_se": float(shares.std(ddof=1) / math.sqrt(r))
        if r > 1 else 0.0,
        "origin_in_giant_frac": float(hits.mean()),
        "origin_in_giant_se": float(hits.std(ddof=1) / math.sqrt(r))
        if r > 1 else 0.0,
    }
    fields = ["replica", "seed", "open_fraction", "n_components",
              "giant_sites", "box_sites", "giant_share", "origin_in_giant"]
    return {"results": (fields, rows)}, verdicts


def _exp_scan(config, kind):
    length_rule = compile_rule(config.length_rule)
    scan_rule = compile_rule(config.scan_rule) if config.scan_rule else None
    result = density_experiment(config.d, float(config.p),
                                [int(n) for n in config.n_grid],
                                length_rule, config.seed,
                                kind=kind, parity=config.parity,
                                replicas=config.replicas,
                                scan_rule=scan_rule)
    rows = []
    for ni, n in enumerate(result.ns):
        for rep in range(config.replicas):
            rows.append({"n": n, "length": result.lengths[ni],
                         "scan_radius": result.scan_radii[ni],
                         "replica": rep,
                         "count": int(result.counts[rep, ni])})
    mean_rows = []
    for ni, n in enumerate(result.ns):
        col = result.counts[:, ni].astype(np.float64)
        se = float(col.std(ddof=1) / math.sqrt(len(col))) \
            if len(col) > 1 else 0.0
        mean_rows.append({"n": n, "length": result.lengths[ni],
                          "scan_radius": result.scan_radii[ni],
                          "mean_count": float(col.mean()),
                          "mean_count_se": se})
    verdicts = {"parity": result.parity, "slope": result.slope,
                "slope_se": result.slope_se}
    return {"results": (["n", "length", "scan_radius", "replica", "count"],
                        rows),
            "summary": (["n", "length", "scan_radius", "mean_count",
                         "mean_count_se"], mean_rows)}, verdicts


def _partition_sweep(config):
    """One free-energy sweep per beta at n_max; every n in the grid is read
    off the same runs (common random numbers across the whole grid)."""
    kernel, attempts = _build_kernel(config)
    spec = config.disorder()
    ns = sorted({int(n) for n in config.n_grid})
    if ns[0] < 1:
        raise ConfigError("config field 'n_grid' entries must be >= 1")
    sigma = None if config.engine == "exact" else float(config.window_sigma)
    sweeps = {}
    for beta in sorted({float(b) for b in config.beta_grid}):
        sweeps[beta] = free_energy_estimate(kernel, spec, beta, ns[-1],
                                            config.replicas, config.seed,
                                            window_sigma=sigma)
    return kernel, attempts, ns, sweeps


def _exp_partition(config):
    _kernel, attempts, ns, sweeps = _partition_sweep(config)
    rows = []
    summary = []
    for beta, fe in sweeps.items():
        for n in ns:
            col = fe.log_ws[:, n]
            for rep in range(config.replicas):
                rows.append({"beta": beta, "n": n, "replica": rep,
                             "log_w": float(col[rep]),
                             "log_leak_at_nmax": float(fe.log_leaks[rep])})
            se = float(col.std(ddof=1) / math.sqrt(len(col))) \
                if len(col) > 1 else 0.0
            summary.append({"beta": beta, "n": n, "replicas": config.replicas,
                            "mean_log_w": float(col.mean()),
                            "se_log_w": se,
                            "median_log_w": float(np.median(col))})
    verdicts = {"mode": config.mode, "engine": config.engine,
                "condition_attempts": attempts}
    return {"results": (["beta", "n", "replica", "log_w",
                         "log_leak_at_nmax"], rows),
            "summary": (["beta", "n", "replicas", "mean_log_w", "se_log_w",
                         "median_log_w"], summary)}, verdicts


def _exp_free_energy(config):
    _kernel, attempts, ns, sweeps = _partition_sweep(config)
    rows = []
    for beta, fe in sweeps.items():
        for n in ns:
            f = fe.log_ws[:, n] / n
            se = float(f.std(ddof=1) / math.sqrt(len(f))) \
                if len(f) > 1 else 0.0
            rows.append({"beta": beta, "n": n, "replicas": config.replicas,
                         "mean_f": float(f.mean()), "se_f": se,
                         "median_f": float(np.median(f))})
    verdicts = {"mode": config.mode, "condition_attempts": attempts}
    return {"results": (["beta", "n", "replicas", "mean_f", "se_f",
                         "median_f"], rows)}, verdicts


def _exp_l2(config):
    k_max = config.k_max
    series = collision_series_sum(config.d, k_max, config.method) \
        if k_max is not None else None
    res = beta_l2(config.disorder(), config.d, k_max=k_max, series=series)
    g, gerr = green_function_quadrature(config.d)
    row = {"d": config.d, "family": config.family, "k_max": res.series.k_max,
           "method": res.series.method,
           "s_lower": res.series.lower, "s_upper": res.series.upper,
           "s_width": res.series.tail_bound,
           "green_g": g, "green_abserr": gerr,
           "beta_l2": res.beta, "beta_lower": res.lower,
           "beta_upper": res.upper, "residual": res.residual,
           "infinite": int(res.infinite)}
    verdicts = {"beta_l2": res.beta, "beta_interval": [res.lower, res.upper],
                "s_interval": [res.series.lower, res.series.upper],
                "residual": res.residual, "infinite": res.infinite}
    fields = list(row)
    return {"results": (fields, [row])}, verdicts


# --------------------------------------------------- diagnostic operations

@dataclass(frozen=True)
class ConcentrationResult:
    beta: float
    ns: tuple
    eps_grid: tuple
    moments: list
    tails: list
    std_exponent: float
    exponent_se: float
    in_band: object
    band: tuple


def concentration_check(kernel, spec, beta, ns, replicas, eps_grid, seed,
                        window_sigma=2.25, band=(-0.65, -0.35),
                        assert_band=True):
    """Empirical concentration of (1/n) log W.

    For each (n, eps): the tail probability P[|log W / n - mean| >= eps]
    with a binomial standard error, and the implied rate constant
    -log(tail) / (n eps^2).  Also fits the decay exponent of
    std[(1/n) log W] against n and (optionally) asserts it lies in band.
    """
    ns = sorted({int(n) for n in ns})
    if len(ns) < 2 or ns[0] < 1:
        raise ValueError("ns must have >= 2 entries, all >= 1")
    if replicas < 100:
        raise ValueError("replicas must be >= 100")
    eps_grid = sorted({float(e) for e in eps_grid})
    if not eps_grid or eps_grid[0] <= 0:
        raise ValueError("eps_grid must be non-empty and positive")
    fe = free_energy_estimate(kernel, spec, beta, ns[-1], replicas, seed,
                              window_sigma=window_sigma)
    moments = []
    tails = []
    stds = []
    for n in ns:
        f = fe.log_ws[:, n] / n
        mean = float(f.mean())
        std = float(f.std(ddof=1))
        stds.append(std)
        # normal-theory standard error of a sample standard deviation
        moments.append({"n": n, "mean_f": mean, "std_f": std,
                        "std_se": std / math.sqrt(2.0 * (replicas - 1))})
        dev = np.abs(f - mean)
        for eps in eps_grid:
            p_tail = float((dev >= eps).mean())
            se = math.sqrt(p_tail * (1.0 - p_tail) / replicas)
            c_fit = -math.log(p_tail) / (n * eps * eps) if p_tail > 0 \
                else math.inf
            tails.append({"n": n, "eps": eps, "tail_prob": p_tail,
                          "tail_se": se, "c_fit": c_fit})
    if all(s > 0 for s in stds):
        exponent, exp_se = _ols_slope(np.log(ns), np.log(stds))
        in_band = bool(band[0] <= exponent <= band[1])
    else:
        exponent, exp_se, in_band = math.nan, math.nan, None
    if assert_band and in_band is False:
        raise AssertionError(
            f"std decay exponent {exponent:.4f} outside band {band}")
    return ConcentrationResult(float(beta), tuple(ns), tuple(eps_grid),
                               moments, tails, exponent, exp_se, in_band,
                               tuple(band))


def _exp_concentration(config):
    kernel, attempts = _build_kernel(config)
    res = concentration_check(kernel, config.disorder(), float(config.beta),
                              [int(n) for n in config.n_grid],
                              config.replicas,
                              config.eps_grid, config.seed,
                              window_sigma=float(config.window_sigma),
                              assert_band=config.assert_band)
    verdicts = {"std_exponent": res.std_exponent,
                "std_exponent_se": res.exponent_se,
                "in_band": res.in_band, "band": list(res.band),
                "condition_attempts": attempts}
    return {"results": (["n", "eps", "tail_prob", "tail_se", "c_fit"],
                        res.tails),
            "moments": (["n", "mean_f", "std_f", "std_se"], res.moments)}, \
        verdicts


@dataclass(frozen=True)
class RegimeScanResult:
    threshold: float
    betas: tuple
    ns: tuple
    rows: list
    fits: dict
    verdicts: dict


def regime_scan(cfg, spec, beta_grid, ns, replicas, seed, threshold=None,
                window_sigma=2.25, significance=SIGNIFICANCE):
    """Directional disorder-regime diagnostics on a conditioned cluster.

    For each beta: per-n mean (1/n) log W with SE, a linear-in-n fit of
    log W per replica, and the same fit against n/(log n)^(2/d).  Verdict
    labels are directional only; the policy is: significantly negative
    free-energy density at every n with |mean f| decreasing over the top
    half of the grid reads "consistent with sub-exponential decay", the
    same negativity with a significantly negative linear slope and
    non-shrinking |mean f| reads "consistent with exponential decay",
    anything else "inconclusive".
    """
    kernel = WalkKernel.cluster(cfg)
    d = cfg.d
    betas = sorted({float(b) for b in beta_grid})
    ns = sorted({int(n) for n in ns})
    if len(ns) < 2 or ns[0] < 2:
        raise ValueError("ns must have >= 2 entries, all >= 2")
    if replicas < 2:
        raise ValueError("replicas must be >= 2")
    if threshold is None:
        threshold = beta_l2(spec, d).beta
    if not (betas[0] < threshold < betas[-1]):
        raise ConfigError(
            f"beta grid [{betas[0]}, {betas[-1]}] does not span the "
            f"threshold {threshold:.6f}")
    narr = np.array(ns, dtype=np.float64)
    corrected = narr / np.log(narr) ** (2.0 / d)
    rows = []
    fits = {}
    verdicts = {}
    for beta in betas:
        fe = free_energy_estimate(kernel, spec, beta, ns[-1], replicas, seed,
                                  window_sigma=window_sigma)
        logw = fe.log_ws[:, ns]
        f = logw / narr
        mean_f = f.mean(axis=0)
        se_f = f.std(axis=0, ddof=1) / math.sqrt(replicas)
        for ni, n in enumerate(ns):
            col = logw[:, ni]
            rows.append({"beta": beta, "n": n,
                         "mean_f": float(mean_f[ni]),
                         "se_f": float(se_f[ni]),
                         "mean_log_w": float(col.mean()),
                         "se_log_w": float(col.std(ddof=1)
                                           / math.sqrt(replicas)),
                         "median_log_w": float(np.median(col))})
        slope, slope_se = _slope_over_replicas(narr, logw)
        cslope, cslope_se = _slope_over_replicas(corrected, logw)
        fits[beta] = {"slope": slope, "slope_se": slope_se,
                      "corrected_slope": cslope,
                      "corrected_slope_se": cslope_se}
        neg = bool(np.all(mean_f < -significance * se_f))
        top = len(ns) // 2
        absf = np.abs(mean_f)
        shrinking = bool(np.all(np.diff(absf[top:]) < 0.0)) if top < len(ns) - 1 \
            else bool(absf[-1] < absf[0])
        if neg and shrinking:
            verdicts[beta] = "consistent with sub-exponential decay"
        elif neg and slope < -significance * slope_se:
            verdicts[beta] = "consistent with exponential decay"
        else:
            verdicts[beta] = "inconclusive"
    return RegimeScanResult(float(threshold), tuple(betas), tuple(ns), rows,
                            fits, verdicts)


def _exp_regime_scan(config):
    cfg, _view, attempts = _conditioned_cluster(config)
    res = regime_scan(cfg, config.disorder(), config.beta_grid,
                      [int(n) for n in config.n_grid], config.replicas,
                      config.seed, window_sigma=float(config.window_sigma))
    fit_rows = []
    for beta in res.betas:
        fit = res.fits[beta]
        fit_rows.append({"beta": beta, **fit, "verdict": res.verdicts[beta]})
    verdicts = {"threshold": res.threshold,
                "condition_attempts": attempts,
                "labels": {str(b): v for b, v in res.verdicts.items()}}
    return {"results": (["beta", "n", "mean_f", "se_f", "mean_log_w",
                         "se_log_w", "median_log_w"], res.rows),
            "fits": (["beta", "slope", "slope_se", "corrected_slope",
                      "corrected_slope_se", "verdict"], fit_rows)}, verdicts


@dataclass(frozen=True)
class DecaySuiteResult:
    beta: float
    ns: tuple
    kappas: tuple
    rows: list
    trend: object
    trend_ok: object


def decay_suite(cfg, spec, beta, ns, kappa_grid, replicas, seed,
                window_sigma=2.25, trend=None):
    """Mean (log n)^kappa / n * log W per (kappa, n) on a conditioned
    cluster.  trend, when given, is {"kappa": value, "direction":
    "decreasing"|"increasing", "half": "top"|"all", "strict": bool} and is
    checked on the mean sequence; strict violations raise."""
    kernel = WalkKernel.cluster(cfg)
    ns = sorted({int(n) for n in ns})
    if len(ns) < 2 or ns[0] < 2:
        raise ValueError("ns must have >= 2 entries, all >= 2")
    kappas = sorted({float(k) for k in kappa_grid})
    if not kappas:
        raise ValueError("kappa_grid must be non-empty")
    fe = free_energy_estimate(kernel, spec, beta, ns[-1], replicas, seed,
                              window_sigma=window_sigma)
    narr = np.array(ns, dtype=np.float64)
    logw = fe.log_ws[:, ns]
    rows = []
    means = {}
    for kappa in kappas:
        scale = np.log(narr) ** kappa / narr
        diag = logw * scale
        m = diag.mean(axis=0)
        se = diag.std(axis=0, ddof=1) / math.sqrt(replicas) \
            if replicas > 1 else np.zeros_like(m)
        means[kappa] = m
        for ni, n in enumerate(ns):
            rows.append({"kappa": kappa, "n": n,
                         "mean_diagnostic": float(m[ni]),
                         "se_diagnostic": float(se[ni])})
    trend_ok = None
    if trend is not None:
        kappa = float(trend.get("kappa", kappas[0]))
        if kappa not in means:
            raise ConfigError(f"trend.kappa {kappa} not in the kappa grid")
        seq = means[kappa]
        if trend.get("half", "top") == "top":
            seq = seq[len(ns) // 2:]
        diffs = np.diff(seq)
        direction = trend.get("direction", "decreasing")
        if direction == "decreasing":
            trend_ok = bool(np.all(diffs < 0.0))
        elif direction == "increasing":
            trend_ok = bool(np.all(diffs > 0.0))
        else:
            raise ConfigError(
                f"trend.direction must be decreasing/increasing, got "
                f"{direction!r}")
        if trend.get("strict", True) and not trend_ok:
            raise AssertionError(
                f"decay diagnostic not {direction} (kappa={kappa}): "
                f"{[float(v) for v in seq]}")
    return DecaySuiteResult(float(beta), tuple(ns), tuple(kappas), rows,
                            trend, trend_ok)


def _exp_decay(config):
    cfg, _view, attempts = _conditioned_cluster(config)
    res = decay_suite(cfg, config.disorder(), float(config.beta),
                      [int(n) for n in config.n_grid], config.kappa_grid,
                      config.replicas, config.seed,
                      window_sigma=float(config.window_sigma),
                      trend=config.trend)
    verdicts = {"trend_ok": res.trend_ok, "condition_attempts": attempts}
    return {"results": (["kappa", "n", "mean_diagnostic", "se_diagnostic"],
                        res.rows)}, verdicts


_DISPATCH = {
    "percolate": _exp_percolate,
    "scan-blocks": lambda c: _exp_scan(c, "blocks"),
    "scan-tubes": lambda c: _exp_scan(c, "tubes"),
    "partition": _exp_partition,
    "free-energy": _exp_free_energy,
    "l2-threshold": _exp_l2,
    "concentration": _exp_concentration,
    "regime-scan": _exp_regime_scan,
    "decay": _exp_decay,
}


def run(config):
    """Dispatch the experiment, write CSVs plus manifest, return the record.

    CSV bytes are a pure function of the config; the manifest additionally
    carries the wall clock."""
    if config.kind not in _DISPATCH:
        raise ConfigError(f"unknown experiment kind {config.kind!r}")
    t0 = time.monotonic()
    tables, verdicts = _DISPATCH[config.kind](config)
    wall = time.monotonic() - t0
    h = config.sha256()
    run_dir = Path(config.out_dir) / f"{config.kind}-{h[:10]}"
    run_dir.mkdir(parents=True, exist_ok=True)
    csv_paths = {}
    row_counts = {}
    for name, (fields, rows) in tables.items():
        path = run_dir / f"{name}.csv"
        _write_csv(path, fields, rows)
        csv_paths[name] = str(path)
        row_counts[name] = len(rows)
    manifest = {
        "kind": config.kind,
        "config": config.canonical(),
        "config_sha256": h,
        "version": __version__,
        "wall_seconds": wall,
        "csv_files": {k: Path(v).name for k, v in csv_paths.items()},
        "row_counts": row_counts,
        "verdicts": _jsonable(verdicts),
    }
    with open(run_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return RunRecord(config.kind, h, __version__, wall, str(run_dir),
                     csv_paths, row_counts, _jsonable(verdicts), tables)
