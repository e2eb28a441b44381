"""Lattice primitives: canonical edges, boxes, enumeration orders."""

import itertools

import numpy as np
import pytest

from polymerlab.lattice import (LatticeBox, edge_between, edge_endpoints,
                                edge_touches, edges_touching, incident_edges,
                                l1, linf, neighbors, parity, translate)


def test_parity():
    assert parity((0, 0, 0)) == "even"
    assert parity((1, 0, 2)) == "odd"
    assert parity((-1, 1)) == "even"


def test_norms():
    assert linf((3, -4, 1)) == 4
    assert l1((3, -4, 1)) == 8
    assert linf((1, 2), (4, 0)) == 3
    assert l1((1, 2), (4, 0)) == 5


def test_neighbors_order_and_distance():
    x = (2, -1, 5)
    nb = neighbors(x)
    assert nb == [(1, -1, 5), (3, -1, 5), (2, -2, 5), (2, 0, 5),
                  (2, -1, 4), (2, -1, 6)]
    assert all(l1(x, y) == 1 for y in nb)


def test_edge_between_is_canonical():
    assert edge_between((0, 0), (1, 0)) == ((0, 0), 0)
    assert edge_between((1, 0), (0, 0)) == ((0, 0), 0)
    assert edge_between((2, 3), (2, 2)) == ((2, 2), 1)
    with pytest.raises(ValueError):
        edge_between((0, 0), (1, 1))
    with pytest.raises(ValueError):
        edge_between((0, 0), (0, 0))


def test_edge_endpoints_roundtrip():
    for x in itertools.product(range(-2, 3), repeat=2):
        for y in neighbors(x):
            e = edge_between(x, y)
            assert set(edge_endpoints(e)) == {tuple(x), tuple(y)}


def test_incident_edges():
    edges = incident_edges((0, 0, 0))
    assert len(edges) == 6
    assert len(set(edges)) == 6
    for e in edges:
        assert (0, 0, 0) in edge_endpoints(e)


def test_box_basics():
    box = LatticeBox((1, -2), 3)
    assert box.d == 2 and box.side == 7
    assert box.site_count() == 49
    assert box.contains((4, 1)) and not box.contains((5, -2))
    sites = box.sites()
    assert sites.shape == (49, 2)
    # canonical C-order: last axis fastest
    assert tuple(sites[0]) == (-2, -5) and tuple(sites[1]) == (-2, -4)
    assert {tuple(s) for s in sites} == {
        (a, b) for a in range(-2, 5) for b in range(-5, 2)}


def test_box_site_index_matches_enumeration():
    box = LatticeBox((0, 0, 0), 2)
    for i, s in enumerate(box.sites()):
        assert box.site_index(tuple(s)) == i
    with pytest.raises(KeyError):
        box.site_index((3, 0, 0))


def test_parity_sites_partition_box():
    box = LatticeBox((0, 0), 2)
    ev = {tuple(s) for s in box.parity_sites("even")}
    od = {tuple(s) for s in box.parity_sites("odd")}
    assert ev | od == {tuple(s) for s in box.sites()}
    assert not ev & od
    assert all(sum(s) % 2 == 0 for s in ev)
    with pytest.raises(ValueError):
        box.parity_sites("both")


def test_edges_touching_matches_definition():
    box = LatticeBox((0, 0), 2)
    listed = edges_touching(box)
    assert len(listed) == len(set(listed))
    brute = set()
    for s in itertools.product(range(-4, 5), repeat=2):
        for y in neighbors(s):
            e = edge_between(s, y)
            u, v = edge_endpoints(e)
            if box.contains(u) or box.contains(v):
                brute.add(e)
    assert set(listed) == brute
    # count: per axis, a (side+1) x side slab of bases
    assert len(listed) == 2 * 6 * 5
    assert all(edge_touches(e, box) for e in listed)
    assert not edge_touches(((5, 5), 0), box)


def test_translate():
    assert translate((1, 2, 3), (-1, 0, 4)) == (0, 2, 7)


def test_box_validation():
    with pytest.raises(ValueError):
        LatticeBox((0, 0), -1)
    with pytest.raises(ValueError):
        LatticeBox((), 1)
