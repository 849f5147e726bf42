import unittest
import sys
import os

import numpy as np

# Add parent directory to path to import modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from diag import diagonalize
from dynamics import (ConvergenceError, IntegrationError, SolverConfig, Trajectory,
                      detect_convergence, energy_series, integrate, numerical_jacobian,
                      refine_fixed_point)
from model import ModelParams, ParameterError, SemiclassicalState, energy, sr_minimum
from semiclassical import (ShiftedHOParams, bare_fixed_points, make_rhs, shifted_ho_fixed_point,
                           shifted_ho_rhs, shifted_ho_solution)

BASE = ModelParams(omega=1.0, e_z=0.2, g=0.46, eps=-1.0, s=1.0, kappa1=0.02, kappa2=0.02)
LONG_RUN = SolverConfig(method="rk45", t_end=2500.0, record_stride=100)


def perturbed_minimum(params, size=1e-3, seed=0):
    rng = np.random.default_rng(seed)
    return sr_minimum(params).state.as_array() + rng.normal(0.0, size, size=5)


class TestSolverConfig(unittest.TestCase):
    def test_defaults(self):
        solver = SolverConfig()
        self.assertEqual(solver.method, "rk45")
        self.assertEqual(solver.rtol, 1e-9)
        self.assertEqual(solver.atol, 1e-12)

    def test_validation(self):
        for bad in ({"method": "euler"}, {"dt": 0.0}, {"rtol": -1.0}, {"t_end": 0.0},
                    {"record_stride": 0}):
            with self.subTest(bad=bad):
                with self.assertRaises(ParameterError):
                    SolverConfig(**bad)

    def test_from_dict(self):
        solver = SolverConfig.from_dict({"method": "RK4", "dt": "0.05", "t_end": 3})
        self.assertEqual(solver.method, "rk4")
        self.assertEqual(solver.dt, 0.05)
        self.assertEqual(SolverConfig.from_dict(solver.to_dict()), solver)
        with self.assertRaises(ParameterError):
            SolverConfig.from_dict({"dt": "fast"})


class TestTrajectory(unittest.TestCase):
    def test_invariants(self):
        with self.assertRaises(ValueError):
            Trajectory([0.0, 1.0], np.zeros((3, 5)))
        with self.assertRaises(ValueError):
            Trajectory([0.0, 1.0, 1.0], np.zeros((3, 5)))

    def test_values_are_read_only(self):
        traj = Trajectory([0.0, 1.0], np.zeros((2, 5)))
        with self.assertRaises(ValueError):
            traj.states[0, 0] = 1.0

    def test_frame_columns(self):
        traj = Trajectory([0.0, 1.0], [[0, 0, 0, 0, 1.0], [0, 0, 0, 0, 1.0]])
        frame = traj.to_frame(BASE)
        self.assertEqual(list(frame.columns), ["t", "q", "p", "sx", "sy", "sz", "energy"])
        self.assertAlmostEqual(frame["energy"].iloc[0], -0.2)
        ho = Trajectory([0.0], [[1.0, 2.0]])
        self.assertEqual(list(ho.to_frame().columns), ["t", "q", "p"])


class TestIntegrate(unittest.TestCase):
    def test_minimum_is_stationary(self):
        params = BASE.with_changes(kappa1=0.0, kappa2=0.0)
        start = sr_minimum(params).state
        traj = integrate(make_rhs("none", params), start,
                         SolverConfig(t_end=1000.0, record_stride=1000))
        drift = np.max(np.abs(traj.states - start.as_array()))
        self.assertLess(drift, 1e-8)
        self.assertAlmostEqual(traj.times[-1], 1000.0)
        self.assertEqual(detect_convergence(traj, start, 1e-6), 0.0)

    def test_unitary_rk4_conserves_energy(self):
        y0 = perturbed_minimum(BASE, size=1e-2, seed=4)
        traj = integrate(make_rhs("none", BASE), y0,
                         SolverConfig(method="rk4", dt=0.01, t_end=100.0, record_stride=100))
        series = energy_series(traj, BASE)
        self.assertEqual(list(series.columns), ["t", "energy"])
        self.assertLess(series["energy"].max() - series["energy"].min(), 1e-7)
        norms = np.linalg.norm(traj.states[:, 2:], axis=1)
        self.assertLess(norms.max() - norms.min(), 1e-7)

    def test_unitary_rk4_long_run(self):
        y0 = perturbed_minimum(BASE, size=1e-2, seed=4)
        traj = integrate(make_rhs("none", BASE), y0,
                         SolverConfig(method="rk4", dt=1e-3, t_end=1000.0, record_stride=10000))
        self.assertAlmostEqual(traj.times[-1], 1000.0)
        energies = energy_series(traj, BASE)["energy"]
        self.assertLess(energies.max() - energies.min(), 1e-7)
        norms = np.linalg.norm(traj.states[:, 2:], axis=1)
        self.assertLess(norms.max() - norms.min(), 1e-7)

    def test_non_finite_initial_state(self):
        with self.assertRaises(IntegrationError):
            integrate(make_rhs("none", BASE), [np.nan, 0, 0, 0, 1], SolverConfig(t_end=1.0))

    def test_blow_up_aborts(self):
        explode = lambda t, y: y ** 2
        with self.assertRaises(IntegrationError):
            integrate(explode, [1.0, 1.0], SolverConfig(method="rk4", dt=0.1, t_end=50.0))
        with self.assertRaises(IntegrationError):
            integrate(explode, [1.0, 1.0], SolverConfig(t_end=50.0))

    def test_shifted_oscillator_fixed_points(self):
        for shifted in (False, True):
            hop = ShiftedHOParams(omega=1.0, p0=1.0, kappa=0.1, shifted_dissipator=shifted)
            traj = integrate(lambda t, y: shifted_ho_rhs(y, hop), [0.5, 0.0],
                             SolverConfig(t_end=20.0 / hop.kappa, record_stride=1000))
            np.testing.assert_allclose(traj.final_state, shifted_ho_fixed_point(hop), atol=1e-8)

    def test_rk4_is_fourth_order(self):
        hop = ShiftedHOParams(omega=1.0, p0=1.0, kappa=0.1)
        x0 = np.array([0.5, 0.0])
        exact = shifted_ho_solution(x0, hop, 10.0)
        errors = []
        for dt in (0.2, 0.1):
            traj = integrate(lambda t, y: shifted_ho_rhs(y, hop), x0,
                             SolverConfig(method="rk4", dt=dt, t_end=10.0, record_stride=1))
            errors.append(np.max(np.abs(traj.final_state - exact)))
        ratio = errors[0] / errors[1]
        self.assertGreater(ratio, 16.0 * 0.8)
        self.assertLess(ratio, 16.0 * 1.2)

    def test_rk4_and_rk45_agree(self):
        y0 = perturbed_minimum(BASE, seed=9)
        rhs = make_rhs("bare", BASE)
        fixed = integrate(rhs, y0, SolverConfig(method="rk4", dt=0.01, t_end=20.0, record_stride=100))
        adaptive = integrate(rhs, y0, SolverConfig(method="rk45", dt=0.01, t_end=20.0, record_stride=100))
        np.testing.assert_allclose(fixed.times, adaptive.times, atol=1e-12)
        np.testing.assert_allclose(fixed.states, adaptive.states, atol=1e-7)


class TestRelaxation(unittest.TestCase):
    def test_bare_dissipator_pumps_energy(self):
        traj = integrate(make_rhs("bare", BASE), perturbed_minimum(BASE), LONG_RUN)
        _, plus, _ = bare_fixed_points(BASE)
        self.assertLess(np.max(np.abs(traj.final_state - plus.as_array())), 1e-4)
        series = energy_series(traj, BASE)
        final = series["energy"].iloc[-1]
        self.assertAlmostEqual(final, -0.2, delta=1e-5)
        self.assertGreater(final, sr_minimum(BASE).energy)
        self.assertIsNotNone(detect_convergence(traj, plus, 1e-4))
        self.assertIsNone(detect_convergence(traj, sr_minimum(BASE).state, 1e-4))

    def test_adhoc_and_dressed_relax_to_minimum(self):
        sr = sr_minimum(BASE)
        diag = diagonalize(BASE)
        for kind in ("adhoc", "dressed"):
            with self.subTest(kind=kind):
                rhs = make_rhs(kind, BASE, diag=diag)
                self.assertLess(np.max(np.abs(rhs(0.0, sr.state.as_array()))), 1e-10)
                traj = integrate(rhs, perturbed_minimum(BASE), LONG_RUN)
                self.assertAlmostEqual(energy(traj.final_state, BASE), sr.energy, delta=1e-6)
                series = energy_series(traj, BASE)["energy"].to_numpy()
                self.assertLess(np.max(np.diff(series[len(series) // 10:])), 1e-10)
                self.assertIsNotNone(detect_convergence(traj, sr.state, 1e-4))


class TestFixedPointRefinement(unittest.TestCase):
    def setUp(self):
        self.rhs = make_rhs("bare", BASE)
        self.points = bare_fixed_points(BASE)

    def test_exact_guess_is_returned(self):
        refined = refine_fixed_point(self.rhs, self.points[1], tol=1e-12)
        self.assertIsInstance(refined, SemiclassicalState)
        np.testing.assert_allclose(refined.as_array(), self.points[1].as_array(), atol=1e-14)

    def test_noisy_guess_recovers_point(self):
        rng = np.random.default_rng(1)
        for point in self.points[1:]:
            guess = point.as_array() + rng.normal(0.0, 1e-2, size=5)
            refined = refine_fixed_point(self.rhs, guess)
            np.testing.assert_allclose(refined.as_array(), point.as_array(), atol=1e-10)

    def test_trivial_point(self):
        refined = refine_fixed_point(self.rhs, [0.0, 0.0, 0.0, 0.0, 1.0])
        self.assertEqual(refined, self.points[0])

    def test_singular_jacobian(self):
        flat = lambda t, y: np.array([y[0] ** 2 + 1.0, 0.0])
        with self.assertRaises(ConvergenceError):
            refine_fixed_point(flat, [0.0, 0.0])

    def test_no_convergence(self):
        no_root = lambda t, y: np.array([y[0] ** 2 + 1.0])
        with self.assertRaises(ConvergenceError):
            refine_fixed_point(no_root, [0.3], max_iter=20)

    def test_numerical_jacobian_of_linear_map(self):
        matrix = np.array([[1.0, 2.0], [3.0, 4.0]])
        jac = numerical_jacobian(lambda x: matrix @ x, np.array([0.5, -1.0]))
        np.testing.assert_allclose(jac, matrix, atol=1e-8)


if __name__ == '__main__':
    unittest.main()
