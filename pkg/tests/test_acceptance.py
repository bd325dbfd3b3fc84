"""End-to-end acceptance battery: one test (and one PASS/FAIL line) per criterion."""

import time

import numpy as np
import pytest

from distopt import (DiGraph, FormalBracket, NotConnectedError, Path,
                     admissible_fields, build_phall, central_rhs,
                     check_distributed, check_independent,
                     check_minimally_canceling, choose_frequencies,
                     distributed_rhs, equivalence_class, eta_coefficients,
                     eval_bracket, explicit_low_degree, integrate,
                     integrate_distributed, is_phall_element, rec_bracket,
                     rec_bracket_phall, rewrite_dynamics, saddle_rhs,
                     shortest_path, solve_kkt_oracle, sup_error, synthesize,
                     Trajectory)
from distopt.synthesis import BracketClass, assemble_inputs
from conftest import random_graph, random_problem

leaf = FormalBracket.leaf
node = FormalBracket.node


def report(num, name, ok, detail=""):
    line = f"criterion {num:02d} ({name}): {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


def osc_rhs(inputs, sigma, dim):
    """Pure oscillatory linear rhs: sum_k U_k^sigma(t) (E_k z)."""
    src = np.array([a.gen[0] - 1 for a in inputs.atoms])
    dst = np.array([a.gen[1] - 1 for a in inputs.atoms])
    amp_cos = np.array([2.0 * sigma ** a.exponent * a.eta.real
                        for a in inputs.atoms])
    amp_sin = np.array([-2.0 * sigma ** a.exponent * a.eta.imag
                        for a in inputs.atoms])
    som = np.array([sigma * a.omega for a in inputs.atoms])

    def rhs(t, z):
        vals = amp_cos * np.cos(som * t) + amp_sin * np.sin(som * t)
        return np.bincount(dst, weights=vals * z[src], minlength=dim)

    return rhs


def test_criterion_01_published_optimum(graph_a):
    t0 = time.time()
    _, ap, _ = graph_a
    sp = solve_kkt_oracle(ap)
    expected = np.array([-8.2, 1.8, 0.8, -3.8, 8.8])
    err = float(np.max(np.abs(sp.x_star - expected)))
    elapsed = time.time() - t0
    report(1, "published optimum", err <= 1e-9 and elapsed < 1.0,
           f"err={err:.2e}, {elapsed:.2f}s")


def test_criterion_02_centralized_convergence(graph_a):
    t0 = time.time()
    _, ap, _ = graph_a
    sp = solve_kkt_oracle(ap)
    rhs = central_rhs(ap)
    z = np.ones(15)
    t = 0.0
    hit = None
    mu_ok = True
    while t < 500.0 and hit is None:
        traj = integrate(rhs, z, t + 50.0, 1e-3, store_stride=100, t0=t)
        mu_ok = mu_ok and bool(np.all(traj.states[:, 10:] > 0.0))
        errs = np.max(np.abs(traj.states[:, :5] - sp.x_star), axis=1)
        idx = np.nonzero(errs <= 1e-2)[0]
        if idx.size:
            hit = float(traj.times[idx[0]])
        z, t = traj.final, float(traj.times[-1])
    elapsed = time.time() - t0
    report(2, "centralized convergence",
           hit is not None and hit <= 500.0 and mu_ok and elapsed < 30.0,
           f"T={hit}, mu>0={mu_ok}, {elapsed:.1f}s")


def test_criterion_03_bracket_identity():
    t0 = time.time()
    rng = np.random.default_rng(12345)
    done = 0
    while done < 200:
        n = int(rng.integers(3, 8))
        g = random_graph(rng, n, extra=0.25)
        i, j = rng.permutation(np.arange(1, n + 1))[:2]
        try:
            p = shortest_path(g, int(i), int(j))
        except NotConnectedError:
            continue
        k1 = int((p.tail, n + p.tail, 2 * n + p.tail)[rng.integers(3)])
        k2 = int((p.head, n + p.head, 2 * n + p.head)[rng.integers(3)])
        if k1 == k2:
            continue
        b = rec_bracket(p, k1, k2, n)
        assert np.array_equal(eval_bracket(b, 3 * n),
                              eval_bracket(leaf((k1, k2)), 3 * n))
        done += 1
    elapsed = time.time() - t0
    report(3, "bracket identity", elapsed < 5.0, f"200 cases, {elapsed:.1f}s")


def test_criterion_04_phall_conformance():
    t0 = time.time()
    rng = np.random.default_rng(777)
    for length in range(1, 9):
        for _ in range(2):
            n = length + 1
            nodes = tuple(int(v) for v in
                          rng.permutation(np.arange(1, n + 1))[:length + 1])
            p = Path(nodes)
            k1 = int((p.tail, n + p.tail, 2 * n + p.tail)[rng.integers(3)])
            k2 = int((p.head, n + p.head, 2 * n + p.head)[rng.integers(3)])
            if k1 == k2:
                k2 = n + p.head if k1 != n + p.head else p.head
            raw = rec_bracket(p, k1, k2, n)
            gens = set(raw.leaves())
            basis = build_phall(gens, length, multidegree_filter=gens)
            rep = rec_bracket_phall(p, k1, k2, n, basis)
            assert rep
            total = np.zeros((3 * n, 3 * n), dtype=np.int64)
            for c, e in rep:
                assert is_phall_element(e, basis.generators)
                assert e.degree == p.length
                total += c * eval_bracket(e, 3 * n)
            assert np.array_equal(total, eval_bracket(raw, 3 * n))
    elapsed = time.time() - t0
    report(4, "P. Hall conformance", elapsed < 5.0,
           f"lengths 1-8, {elapsed:.1f}s")


def test_criterion_05_class_size_table():
    t0 = time.time()
    sizes = []
    for d in range(2, 9):
        n = d + 1
        p = Path(tuple(range(1, d + 2)))
        k1, k2 = n + p.tail, p.head
        raw = rec_bracket(p, k1, k2, n)
        gens = set(raw.leaves())
        basis = build_phall(gens, d, multidegree_filter=gens)
        e = rec_bracket_phall(p, k1, k2, n, basis)[0][1]
        sizes.append(len(equivalence_class(e, basis, 3 * n)))
    elapsed = time.time() - t0
    report(5, "class-size table",
           sizes == [1, 1, 2, 3, 5, 9, 16] and elapsed < 60.0,
           f"sizes={sizes}, {elapsed:.1f}s")


def test_criterion_06_frequency_verifiers(graph_b):
    t0 = time.time()
    ok = not check_minimally_canceling([1, 2, -3])
    ok = ok and check_minimally_canceling([1, 5, -6])
    _, ap, g = graph_b
    from distopt import build_classes
    classes = build_classes(rewrite_dynamics(ap, g))
    for seed in range(3):
        fa = choose_frequencies(classes, seed=seed)
        for s in fa.certificates["minimally_canceling"]:
            ok = ok and check_minimally_canceling(s)
        ok = ok and check_independent(
            fa.collection(), budget=fa.certificates["independence_budget"])
    elapsed = time.time() - t0
    report(6, "frequency verifiers", ok and elapsed < 5.0, f"{elapsed:.1f}s")


def test_criterion_07_degree_two_generation():
    t0 = time.time()
    v = 1.0
    b = node(leaf((1, 2)), leaf((2, 3)))
    cls = BracketClass(((1, 2), (2, 3)), (b,), (v,), 2)
    fa = choose_frequencies([cls], seed=0, freq_range=(2, 10))
    inputs = assemble_inputs(None, fa, [eta_coefficients(cls, fa)])
    z0 = np.array([1.0, 0.5, 0.25])
    target = z0[2] + v * z0[0] * 1.0  # closed form: z3(1), z1 constant
    errs = {}
    for sigma in (100, 500, 1000):
        traj = integrate_distributed(osc_rhs(inputs, sigma, 3), z0, 1.0,
                                     sigma, inputs.omega_max())
        errs[sigma] = abs(float(traj.final[2]) - target)
    elapsed = time.time() - t0
    ok = errs[500] <= 0.05 and errs[1000] < errs[100] and elapsed < 30.0
    detail = ", ".join(f"sigma={k}: {e:.4f}" for k, e in errs.items())
    report(7, "degree-2 generation", ok, f"{detail}, {elapsed:.1f}s")


def test_criterion_08_degree_three_generation():
    t0 = time.time()
    v = 1.5
    # Hall representative of [phi3, [phi1, phi2]]; evaluates to -h_{1,4},
    # so carrying weight -v generates +v h_{1,4}
    bh = node(leaf((3, 4)), node(leaf((1, 2)), leaf((2, 3))))
    cls = BracketClass(((1, 2), (2, 3), (3, 4)), (bh,), (-v,), 3)
    fa = choose_frequencies([cls], seed=0, freq_range=(30, 70))
    z0 = np.array([1.0, 0.4, -0.2, 0.1])

    def reference(times):
        states = np.tile(z0, (len(times), 1))
        states[:, 3] = z0[3] + v * z0[0] * times
        return Trajectory(np.asarray(times), states)

    results = {}
    for label, inputs in (
            ("general", assemble_inputs(None, fa, [eta_coefficients(cls, fa)])),
            ("explicit", explicit_low_degree(cls, fa))):
        errs = {}
        for sigma in (200, 2000):
            traj = integrate_distributed(osc_rhs(inputs, sigma, 4), z0, 1.0,
                                         sigma, inputs.omega_max())
            errs[sigma] = sup_error(traj, reference(traj.times))
        results[label] = errs
    elapsed = time.time() - t0
    ok = all(e[2000] <= 0.1 and e[2000] < e[200] for e in results.values())
    ok = ok and elapsed < 120.0
    detail = ", ".join(f"{k}: {e[200]:.3f}->{e[2000]:.3f}"
                       for k, e in results.items())
    report(8, "degree-3 generation", ok, f"{detail}, {elapsed:.1f}s")


def test_criterion_09_full_example(graph_b):
    t0 = time.time()
    _, ap, g = graph_b
    extended = rewrite_dynamics(ap, g)
    classes, fa, inputs = synthesize(extended, seed=0)
    gens = admissible_fields(g, ap.n)
    z0 = np.ones(15)
    T = 2.0
    central = integrate(central_rhs(ap), z0, T, 1e-3)
    errs = {}
    x_diff = {}
    for sigma in (300, 1000, 1500):
        rhs = distributed_rhs(extended.split, gens, inputs, sigma)
        dist = integrate_distributed(rhs, z0, T, sigma, inputs.omega_max())
        errs[sigma] = sup_error(central, dist)
        x_diff[sigma] = float(np.max(np.abs(central.final[:5] - dist.final[:5])))
    elapsed = time.time() - t0
    ok = errs[300] > errs[1000] > errs[1500]
    ok = ok and x_diff[1000] <= 1.0 and elapsed < 600.0
    detail = ", ".join(f"sigma={k}: {e:.3f}" for k, e in errs.items())
    report(9, "full bundled example", ok,
           f"sup errors {detail}, x_diff@1000={x_diff[1000]:.3f}, {elapsed:.0f}s")


def test_criterion_10_distributedness_probe(graph_b):
    t0 = time.time()
    _, ap, g = graph_b
    extended = rewrite_dynamics(ap, g)
    classes, fa, inputs = synthesize(extended, seed=0)
    gens = admissible_fields(g, ap.n)
    rhs = distributed_rhs(extended.split, gens, inputs, 1000.0)
    closed = check_distributed(rhs, g, ap.n)
    raw = check_distributed(central_rhs(ap), g, ap.n)
    elapsed = time.time() - t0
    ok = closed.ok and not raw.ok and raw.witness is not None and elapsed < 10.0
    report(10, "distributedness probe", ok,
           f"witness={raw.witness}, {elapsed:.1f}s")


def test_criterion_11_split_rewrite_exactness(graph_a, graph_b):
    t0 = time.time()
    rng = np.random.default_rng(99)
    cases = [graph_a[1:], graph_b[1:]]
    built = 0
    while built < 50:
        n = int(rng.integers(3, 7))
        _, ap = random_problem(rng, n)
        g = random_graph(rng, n)
        try:
            ext = rewrite_dynamics(ap, g)
        except Exception:
            continue
        cases.append((ap, g))
        built += 1
    worst = 0.0
    for ap, g in [(a, b) for a, b in cases]:
        ext = rewrite_dynamics(ap, g)
        n = ap.n
        rest = np.zeros((3 * n, 3 * n))
        rest[:n, n:2 * n] = -ext.split.G_rest
        rest[:n, 2 * n:] = -ext.split.A_rest
        rest[n:2 * n, :n] = ext.split.Gdual_rest
        assert np.array_equal(ext.bracket_matrix(), rest)
        for _ in range(3):
            z = rng.normal(size=3 * n)
            resid = saddle_rhs(ap, z) - (ext.split.f_adm(z)
                                         + ext.bracket_matrix() @ z)
            worst = max(worst, float(np.max(np.abs(resid))))
    elapsed = time.time() - t0
    report(11, "split + rewrite exactness", worst <= 1e-9 and elapsed < 10.0,
           f"52 instances, residual={worst:.2e}, {elapsed:.1f}s")
