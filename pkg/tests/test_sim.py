import math

import numpy as np
import pytest

from distopt import (BlowUpError, FormalBracket, ResolutionError, Trajectory,
                     admissible_fields, admissible_split, central_rhs,
                     check_distributed, choose_frequencies, default_timestep,
                     distributed_rhs, eta_coefficients, eval_bracket,
                     integrate, integrate_distributed, rewrite_dynamics,
                     saddle_rhs, sup_error, synthesize)
from distopt.problem import Objective, Problem, augment
from distopt.synthesis import BracketClass, assemble_inputs

leaf = FormalBracket.leaf
node = FormalBracket.node


class TestIntegrate:
    def test_rk4_order_four(self):
        # halving dt must shrink the error by roughly 2^4
        rhs = lambda t, z: -z
        exact = math.exp(-1.0)
        errs = []
        for dt in (0.1, 0.05):
            traj = integrate(rhs, [1.0], 1.0, dt)
            errs.append(abs(traj.final[0] - exact))
        ratio = errs[0] / errs[1]
        assert 12.0 <= ratio <= 20.0

    def test_lands_on_horizon(self):
        traj = integrate(lambda t, z: np.zeros(1), [0.0], 1.0, 0.3)
        assert traj.times[-1] == 1.0

    def test_store_stride(self):
        traj = integrate(lambda t, z: np.ones(1), [0.0], 1.0, 0.01,
                         store_stride=10)
        assert np.allclose(np.diff(traj.times), 0.1)
        assert traj.final[0] == pytest.approx(1.0)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            integrate(lambda t, z: z, [1.0], 1.0, 0.0)

    def test_blow_up_detected(self):
        # z' = z^2 from z0 = 3 escapes at t = 1/3
        with pytest.raises(BlowUpError) as exc, np.errstate(over="ignore"):
            integrate(lambda t, z: z ** 2, [3.0], 2.0, 1e-3)
        assert 0.0 < exc.value.t <= 2.0

    def test_meta_records_dt(self):
        traj = integrate(lambda t, z: z, [1.0], 0.1, 0.01, meta={"tag": 1})
        assert traj.meta["dt"] == 0.01 and traj.meta["tag"] == 1


class TestTrajectory:
    def test_sample_and_final(self):
        traj = Trajectory(np.array([0.0, 0.5, 1.0]),
                          np.array([[0.0], [5.0], [9.0]]))
        assert traj.sample(0.49)[0] == 5.0
        assert traj.final[0] == 9.0


class TestCentralRhs:
    def test_matches_saddle_rhs(self, graph_a, graph_b):
        rng = np.random.default_rng(0)
        for _, ap, _ in (graph_a, graph_b):
            rhs = central_rhs(ap)
            for _ in range(5):
                z = rng.normal(size=3 * ap.n)
                assert np.allclose(rhs(0.0, z), saddle_rhs(ap, z), atol=1e-12)

    def test_non_quadratic_fallback(self):
        objs = (Objective(lambda x: x ** 4, lambda x: 4 * x ** 3),
                Objective(lambda x: x ** 2, lambda x: 2 * x))
        ap = augment(Problem(2, objs, {}, {}))
        rhs = central_rhs(ap)
        z = np.array([1.0, -2.0, 0.3, 0.4, 0.5, 0.6])
        assert np.allclose(rhs(0.0, z), saddle_rhs(ap, z))


class TestDistributedRhs:
    @staticmethod
    def _inputs(seed=0):
        b = node(leaf((1, 2)), leaf((2, 3)))
        cls = BracketClass(((1, 2), (2, 3)), (b,), (1.0,), 2)
        fa = choose_frequencies([cls], seed=seed, freq_range=(2, 10))
        return assemble_inputs(None, fa, [eta_coefficients(cls, fa)])

    def test_rejects_unknown_generator(self, graph_a):
        _, ap, g = graph_a
        split = admissible_split(ap, g)
        with pytest.raises(ValueError, match="unknown generator"):
            distributed_rhs(split, [(9, 9)], self._inputs(), 100.0)

    def test_no_atoms_equals_drift(self, graph_a):
        _, ap, g = graph_a
        split = admissible_split(ap, g)
        from distopt.synthesis import InputSynthesis
        rhs = distributed_rhs(split, [], InputSynthesis(()), 100.0)
        z = np.random.default_rng(1).normal(size=3 * ap.n)
        assert np.allclose(rhs(0.3, z), split.f_adm(z), atol=1e-12)

    def test_matches_manual_sum(self, graph_a):
        _, ap, g = graph_a
        ext = rewrite_dynamics(ap, g)
        classes, fa, inputs = synthesize(ext, seed=0)
        gens = admissible_fields(g, ap.n)
        sigma = 200.0
        rhs = distributed_rhs(ext.split, gens, inputs, sigma)
        rng = np.random.default_rng(2)
        dim = 3 * ap.n
        for t in (0.0, 0.123, 0.7):
            z = rng.normal(size=dim)
            manual = ext.split.f_adm(z).astype(float)
            for gen in inputs.generators():
                m = eval_bracket(leaf(gen), dim)
                manual += inputs.value(gen, sigma, t) * (m @ z)
            assert np.allclose(rhs(t, z), manual, atol=1e-9)


class TestIntegrateDistributed:
    def test_resolution_guard(self):
        with pytest.raises(ResolutionError):
            integrate_distributed(lambda t, z: -z, [1.0], 1.0, sigma=100.0,
                                  omega_max=10.0, dt=0.1)

    def test_default_timestep(self):
        dt = default_timestep(1000.0, 50.0, oversample=40)
        assert dt == pytest.approx(2.0 * math.pi / (1000.0 * 50.0 * 40))

    def test_store_spacing(self):
        traj = integrate_distributed(lambda t, z: -z, [1.0], 0.1, sigma=100.0,
                                     omega_max=5.0, store_spacing=1e-2)
        # storage stride rounds to whole steps: spacing within 25% of requested
        spacing = np.diff(traj.times)
        assert np.all(spacing <= 1.25e-2) and np.all(spacing >= 0.75e-2)
        assert traj.meta["sigma"] == 100.0

    def test_requires_positive_omega(self):
        with pytest.raises(ValueError):
            integrate_distributed(lambda t, z: -z, [1.0], 1.0, sigma=10.0,
                                  omega_max=0.0)


class TestProbe:
    def test_admissible_drift_passes(self, graph_a):
        _, ap, g = graph_a
        split = admissible_split(ap, g)
        probe = check_distributed(lambda t, z: split.f_adm(z), g, ap.n)
        assert probe.ok and bool(probe)

    def test_central_rhs_fails_with_witness(self, graph_a):
        _, ap, g = graph_a
        probe = check_distributed(central_rhs(ap), g, ap.n)
        assert not probe.ok
        i, j, idx, diff = probe.witness
        assert j not in g.neighbors(i) | {i}
        assert diff > 1e-12


class TestSupError:
    def test_zero_for_identical(self):
        times = np.linspace(0.0, 1.0, 11)
        states = np.random.default_rng(0).normal(size=(11, 3))
        traj = Trajectory(times, states)
        assert sup_error(traj, traj) == 0.0

    def test_known_offset(self):
        times = np.linspace(0.0, 1.0, 11)
        a = Trajectory(times, np.zeros((11, 2)))
        b = Trajectory(times, np.full((11, 2), 3.0))
        assert sup_error(a, b) == pytest.approx(3.0 * math.sqrt(2.0))

    def test_coarse_grid_alignment(self):
        fine = Trajectory(np.linspace(0.0, 1.0, 101),
                          np.linspace(0.0, 1.0, 101)[:, None])
        coarse = Trajectory(np.linspace(0.0, 1.0, 11),
                            np.linspace(0.0, 1.0, 11)[:, None])
        assert sup_error(coarse, fine) <= 1e-12

    def test_incompatible_horizons(self):
        a = Trajectory(np.linspace(0.0, 1.0, 11), np.zeros((11, 1)))
        b = Trajectory(np.linspace(0.0, 2.0, 11), np.zeros((11, 1)))
        with pytest.raises(ValueError, match="horizons"):
            sup_error(a, b)

    def test_unalignable_grids(self):
        coarse = Trajectory(np.linspace(0.0, 1.0, 11), np.zeros((11, 1)))
        # denser grid that leaves a large gap in the middle
        times = np.concatenate([np.linspace(0.0, 0.4, 17), [1.0]])
        fine = Trajectory(times, np.zeros((len(times), 1)))
        with pytest.raises(ValueError, match="aligned"):
            sup_error(coarse, fine)
