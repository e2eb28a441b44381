"""Walk kernels: step laws, simulation twins, exact killed kernels."""

import itertools
import math

import numpy as np
import pytest

from oracles import enumerate_paths
from polymerlab.lattice import LatticeBox, edge_between, l1, neighbors
from polymerlab.percolation import BondConfig, PercolationSpec, sample_bonds
from polymerlab.walk import (WalkKernel, confinement_curve,
                             confinement_probability, exit_time,
                             killed_heat_kernel, killed_mass_curve,
                             simulate_batch, simulate_path)


def cluster_kernel(p=0.6, seed=13, r=4, d=2):
    return WalkKernel.cluster(sample_bonds(PercolationSpec(d, r, p, seed)))


def test_lattice_step_distribution():
    k = WalkKernel.full_lattice(3)
    dist = k.step_distribution((1, 0, -2))
    assert [y for y, _ in dist] == neighbors((1, 0, -2))
    assert all(p == 1.0 / 6.0 for _, p in dist)
    with pytest.raises(ValueError):
        WalkKernel.full_lattice(0)


def test_cluster_step_distribution_hand_built():
    spec = PercolationSpec(2, 3, 0.5, 0)
    cfg = BondConfig.all_closed(spec)
    cfg.set_edge(edge_between((0, 0), (1, 0)), True)
    cfg.set_edge(edge_between((0, 0), (0, -1)), True)
    k = WalkKernel.cluster(cfg)
    # canonical order: axis-major, minus before plus
    assert k.step_distribution((0, 0)) == [((1, 0), 0.5), ((0, -1), 0.5)]
    assert k.step_distribution((2, 2)) == [((2, 2), 1.0)]  # isolated: lazy
    assert k.degree((0, 0)) == 2
    assert k.degree((2, 2)) == 0


def test_cluster_walk_ignores_out_of_box_edges():
    spec = PercolationSpec(2, 2, 0.5, 0)
    cfg = BondConfig.all_open(spec)
    k = WalkKernel.cluster(cfg)
    dist = k.step_distribution((2, 0))
    targets = [y for y, _ in dist]
    assert (3, 0) not in targets
    assert set(targets) == {(1, 0), (2, -1), (2, 1)}
    with pytest.raises(ValueError):
        k.step_distribution((3, 0))


def test_cluster_degree_matches_brute_force():
    k = cluster_kernel(seed=41)
    cfg = k.cfg
    box = LatticeBox((0, 0), cfg.spec.box_radius)
    for s in map(tuple, box.sites()):
        want = sum(1 for y in neighbors(s)
                   if box.contains(y) and cfg.is_open(edge_between(s, y)))
        assert k.degree(s) == want
        dist = k.step_distribution(s)
        if want == 0:
            assert dist == [(s, 1.0)]
        else:
            assert len(dist) == want
            assert all(p == 1.0 / want for _, p in dist)
            assert math.fsum(p for _, p in dist) == pytest.approx(1.0)


def test_all_open_cluster_equals_lattice_in_interior():
    spec = PercolationSpec(3, 3, 1.0, 5)
    k = WalkKernel.cluster(BondConfig.all_open(spec))
    lat = WalkKernel.full_lattice(3)
    assert k.step_distribution((0, 1, -1)) == lat.step_distribution((0, 1, -1))


def test_simulate_path_reproducible_and_valid():
    k = cluster_kernel(seed=77)
    a = simulate_path(k, (0, 0), 60, rng_seed=900)
    b = simulate_path(k, (0, 0), 60, rng_seed=900)
    c = simulate_path(k, (0, 0), 60, rng_seed=900, path_index=1)
    np.testing.assert_array_equal(a.sites, b.sites)
    assert not np.array_equal(a.sites, c.sites)
    assert a.n_steps == 60 and len(a) == 61
    for t in range(1, 61):
        x, y = a.site(t - 1), a.site(t)
        allowed = [z for z, _ in k.step_distribution(x)]
        assert y in allowed
    with pytest.raises(ValueError):
        simulate_path(k, (99, 0), 5, rng_seed=1)


def test_simulate_batch_matches_scalar_path():
    region = LatticeBox((0, 0), 3)
    for k in (WalkKernel.full_lattice(2), cluster_kernel(seed=19, r=5)):
        exits, finals = simulate_batch(k, (0, 0), 40, 12, rng_seed=321,
                                       region=region)
        for i in range(12):
            path = simulate_path(k, (0, 0), 40, rng_seed=321, path_index=i)
            np.testing.assert_array_equal(finals[i], path.sites[-1])
            t = exit_time(path, region)
            assert exits[i] == (41 if t is None else t)


def test_simulate_batch_stop_on_exit():
    k = WalkKernel.full_lattice(1)
    region = LatticeBox((0,), 2)
    exits, finals = simulate_batch(k, (0,), 200, 50, rng_seed=7,
                                   region=region, stop_on_exit=True)
    assert (exits <= 200).all()  # d=1 leaves radius 2 fast
    assert (np.abs(finals[:, 0]) == 3).all()


def test_exit_time_radius_form():
    k = WalkKernel.full_lattice(2)
    path = simulate_path(k, (0, 0), 300, rng_seed=15)
    t = exit_time(path, 4)
    assert t is not None
    assert all(np.abs(path.sites[s]).max() < 4 for s in range(t))
    assert np.abs(path.sites[t]).max() >= 4


def test_lattice_walk_moments():
    n, m = 400, 3000
    _, finals = simulate_batch(WalkKernel.full_lattice(2), (0, 0), n, m,
                               rng_seed=2)
    mean = finals.mean(axis=0)
    var = finals.var(axis=0)
    # per-axis variance of the walk is n/d
    assert np.abs(mean).max() < 6 * math.sqrt(n / 2 / m)
    assert np.abs(var - n / 2).max() < 0.1 * n


def test_killed_heat_kernel_lattice_vs_enumeration():
    k = WalkKernel.full_lattice(2)
    region = LatticeBox((0, 0), 2)
    for n in (1, 2, 4, 5):
        law = {}
        for sites, prob in enumerate_paths(k, (0, 0), n):
            if all(region.contains(s) for s in sites):
                law[sites[-1]] = law.get(sites[-1], 0.0) + prob
        got = killed_heat_kernel(k, region, (0, 0), n)
        assert set(got) == set(law)
        for s, v in law.items():
            assert got[s] == pytest.approx(v, abs=1e-14)


def test_killed_heat_kernel_cluster_vs_enumeration():
    k = cluster_kernel(p=0.7, seed=23, r=4)
    region = LatticeBox((0, 0), 2)
    n = 5
    law = {}
    for sites, prob in enumerate_paths(k, (0, 0), n):
        if all(region.contains(s) for s in sites):
            law[sites[-1]] = law.get(sites[-1], 0.0) + prob
    got = killed_heat_kernel(k, region, (0, 0), n)
    assert set(got) == set(law)
    for s, v in law.items():
        assert got[s] == pytest.approx(v, rel=1e-12, abs=1e-15)


def test_killed_mass_curve_properties():
    k = cluster_kernel(p=0.65, seed=3, r=5)
    region = LatticeBox((0, 0), 3)
    curve = killed_mass_curve(k, region, (0, 0), 30)
    assert curve[0] == 1.0
    assert all(curve[i + 1] <= curve[i] + 1e-15 for i in range(30))
    hk = killed_heat_kernel(k, region, (0, 0), 30)
    assert sum(hk.values()) == pytest.approx(curve[30], abs=1e-12)


def test_region_beyond_box_rejected():
    k = cluster_kernel(r=3)
    with pytest.raises(ValueError):
        killed_heat_kernel(k, LatticeBox((0, 0), 4), (0, 0), 2)
    with pytest.raises(ValueError):
        killed_heat_kernel(k, LatticeBox((2, 2), 2), (2, 2), 2)


def test_confinement_probability_small_n_exact_one():
    for d, R in ((1, 1), (2, 3), (3, 2)):
        for n in range(0, R + 2):
            assert confinement_probability(d, R, n) == 1.0


def test_confinement_probability_vs_enumeration():
    k = WalkKernel.full_lattice(1)
    box = LatticeBox((0,), 1)
    for n in (3, 4, 5, 6):
        brute = sum(prob for sites, prob in enumerate_paths(k, (0,), n - 1)
                    if all(box.contains(s) for s in sites))
        assert confinement_probability(1, 1, n) == pytest.approx(brute,
                                                                 abs=1e-14)
    k2 = WalkKernel.full_lattice(2)
    box2 = LatticeBox((0, 0), 2)
    brute = sum(prob for sites, prob in enumerate_paths(k2, (0, 0), 5)
                if all(box2.contains(s) for s in sites))
    assert confinement_probability(2, 2, 6) == pytest.approx(brute, abs=1e-14)


def test_confinement_curve_matches_pointwise():
    ns = [0, 2, 5, 9, 14]
    curve = confinement_curve(2, 2, ns)
    for n, v in zip(ns, curve):
        assert v == confinement_probability(2, 2, n)
    with pytest.raises(ValueError):
        confinement_probability(2, 0, 5)
