"""Shared fixtures and random-instance builders."""

import numpy as np
import pytest

from distopt import DiGraph, Problem, QuadraticObjective, augment, bundled_spec, load_spec


@pytest.fixture(scope="session")
def graph_a():
    return load_spec(bundled_spec("graph_a"))


@pytest.fixture(scope="session")
def graph_b():
    return load_spec(bundled_spec("graph_b"))


def random_graph(rng, n, extra=0.3):
    """Directed cycle (guaranteed strong connectivity) plus random extra edges."""
    edges = {(i, i % n + 1) for i in range(1, n + 1)}
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j and rng.random() < extra:
                edges.add((i, j))
    return DiGraph(n, frozenset(edges))


def random_problem(rng, n, integer_rows=True):
    """Random separable quadratic problem with integer constraint rows.

    Every emitted row has a nonzero own-variable entry so augmentation holds.
    """
    objs = tuple(QuadraticObjective(float(rng.uniform(0.5, 3.0)),
                                    float(rng.uniform(-5.0, 5.0)))
                 for _ in range(n))
    def row(agent):
        r = np.zeros(n)
        vals = rng.integers(-3, 4, size=n) if integer_rows else rng.normal(size=n)
        keep = rng.random(n) < 0.5
        r[keep] = vals[keep]
        r[agent - 1] = vals[agent - 1] if vals[agent - 1] != 0 else 1
        return r, float(rng.integers(-5, 6))
    eq = {int(i): row(int(i)) for i in rng.permutation(np.arange(1, n + 1))[:rng.integers(0, n)]}
    ineq = {int(i): row(int(i)) for i in rng.permutation(np.arange(1, n + 1))[:rng.integers(0, n)]}
    p = Problem(n, objs, eq, ineq)
    return p, augment(p, K=float(rng.uniform(0.5, 5.0)))
