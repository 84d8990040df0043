import math

import numpy as np
import pytest

from dwelltime import sde_sim as sim
from dwelltime.benchmarks import example_constant, example_feedback
from dwelltime.model import ImpulsiveSystem
from dwelltime.synthesis import ControllerGains


def scalar(a, j, e_c=0.0, e_d=0.0):
    return ImpulsiveSystem.build([[a]], [[j]], E_c=[[e_c]], E_d=[[e_d]])


class TestSchedules:
    def test_constant_times(self):
        s = sim.generate_schedule(sim.constant(0.5), 2.0, sim.stream(0, 0))
        np.testing.assert_allclose(s.times, [0.5, 1.0, 1.5, 2.0])

    def test_degenerate_uniform_is_constant(self):
        a = sim.generate_schedule(sim.uniform(1.0, 1.0), 5.0, sim.stream(3, 0))
        b = sim.generate_schedule(sim.constant(1.0), 5.0, sim.stream(3, 0))
        np.testing.assert_allclose(a.times, b.times)

    def test_uniform_gaps_in_range(self):
        s = sim.generate_schedule(sim.uniform(0.2, 0.7), 50.0, sim.stream(1, 0))
        assert s.gaps.min() >= 0.2 and s.gaps.max() <= 0.7

    def test_min_dt_gaps(self):
        s = sim.generate_schedule(sim.min_dt(0.3), 50.0, sim.stream(2, 0))
        assert s.gaps.min() >= 0.3 and s.gaps.max() > 0.4

    def test_same_seed_same_schedule(self):
        a = sim.generate_schedule(sim.min_dt(0.3), 20.0, sim.stream(7, 0))
        b = sim.generate_schedule(sim.min_dt(0.3), 20.0, sim.stream(7, 0))
        np.testing.assert_array_equal(a.times, b.times)

    @pytest.mark.parametrize("args", [("constant", 0.0), ("uniform", 1.0, 0.5), ("poisson", 1.0)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            sim.ScheduleKind(*args)


class TestExactAgreement:
    def test_trivial_system_is_constant(self):
        spec = sim.SimSpec(scalar(0.0, 1.0), sim.constant(0.5), [2.0], 2.0, paths=50)
        res = sim.simulate(spec)
        np.testing.assert_allclose(res.mean_sq, 4.0)
        assert sim.moment_check(spec, res).max_abs_z == 0.0

    def test_deterministic_matches_exact(self):
        s = ImpulsiveSystem.build([[-0.5, 1.0], [0.0, -0.3]], [[0.9, 0.1], [0.0, 0.8]])
        spec = sim.SimSpec(s, sim.constant(0.4), [1.0, -1.0], 2.0, paths=4, h=1e-4)
        res = sim.simulate(spec)
        rep = sim.moment_check(spec, res)
        np.testing.assert_allclose(res.mean_sq, rep.exact, rtol=1e-3)

    def test_scalar_oracle(self):
        a, e_c, j, e_d, T = -0.5, 0.6, 0.9, 0.3, 0.5
        spec = sim.SimSpec(scalar(a, j, e_c, e_d), sim.constant(T), [1.0], 2.0,
                           grid=[0.25, 0.75, 1.75], paths=20000, h=1e-3, seed=4)
        res = sim.simulate(spec)
        lam, q = 2 * a + e_c ** 2, j * j + e_d * e_d
        for t, m, se in zip(res.grid, res.mean_sq, res.std_err):
            k = math.floor(t / T)  # grid points lie strictly between impulses
            exact = q ** k * math.exp(lam * t)
            assert abs(m - exact) < 3 * se + 3e-3 * exact

    def test_unstable_post_jump_growth(self):
        # at T = 0.5 the benchmark is not mean-square stable; post-jump
        # second moments grow roughly geometrically at rate rho(M(T))
        spec = sim.SimSpec(example_constant(), sim.constant(0.5), [1.0, 1.0], 10.0, paths=4000, h=1e-3)
        res = sim.simulate(spec)
        rep = sim.moment_check(spec, res)
        assert rep.rho > 1
        growth = (rep.post_jump_exact[-1] / rep.post_jump_exact[-11]) ** (1 / 10)
        assert growth == pytest.approx(rep.rho, rel=0.1)
        sim_growth = (rep.post_jump_sim[-1] / rep.post_jump_sim[-11]) ** (1 / 10)
        assert sim_growth == pytest.approx(rep.rho, rel=0.1)

    def test_closed_loop_gains(self):
        s = ImpulsiveSystem.build([[0.0, 1.0], [-1.0, 0.2]], 0.9 * np.eye(2), E_c=0.3 * np.eye(2),
                                  B_c1=[[0.0], [1.0]], B_c2=[[0.0], [0.2]], B_d1=[[1.0], [0.0]])
        gains = ControllerGains.constant([[-1.0, -1.0]], [[-0.2, 0.0]], 1.0)
        spec = sim.SimSpec(s, sim.constant(0.5), [1.0, 0.5], 2.0, paths=20000, gains=gains, h=1e-3, seed=11)
        rep = sim.moment_check(spec, sim.simulate(spec))
        assert rep.max_abs_z < 4.5
        assert rep.exact[-1] < rep.exact[0]

    def test_noise_free_segment_is_not_a_z_score(self):
        # before the first impulse every path is identical, so the only
        # discrepancy there is discretization error
        spec = sim.SimSpec(example_constant(0.0, 0.6), sim.uniform(1.0, 2.0), [1.0, 1.0], 3.0,
                           paths=20000, seed=0, h=1e-3)
        rep = sim.moment_check(spec, sim.simulate(spec))
        first = spec.realized_schedule().times[0]
        before = spec.output_grid() < first
        assert np.all(np.isnan(rep.z_scores[before])) and not np.any(np.isnan(rep.z_scores[~before]))
        assert 0 < rep.deterministic_rel_err < 2e-3
        assert rep.max_abs_z < 4.5

    def test_halving_h_changes_little(self):
        base = dict(system=example_constant(0.3, 0.6), schedule=sim.constant(0.5), x0=[1.0, 1.0],
                    horizon=2.0, grid=[1.25, 2.0], paths=20000, seed=9)
        r1 = sim.simulate(sim.SimSpec(h=0.004, **base))
        r2 = sim.simulate(sim.SimSpec(h=0.002, **base))
        assert np.all(np.abs(r1.mean_sq - r2.mean_sq) < 1.5 * (r1.std_err + r2.std_err))


class TestReproducibility:
    def test_threads_identical(self):
        base = dict(system=example_constant(0.3, 0.6), schedule=sim.min_dt(0.4), x0=[1.0, 0.0],
                    horizon=2.0, paths=1700, seed=5)
        a = sim.simulate(sim.SimSpec(threads=1, **base))
        b = sim.simulate(sim.SimSpec(threads=4, **base))
        np.testing.assert_array_equal(a.mean_sq, b.mean_sq)
        np.testing.assert_array_equal(a.std_err, b.std_err)

    def test_seed_changes_result(self):
        base = dict(system=example_constant(0.3, 0.6), schedule=sim.constant(0.5), x0=[1.0, 0.0],
                    horizon=1.0, paths=500)
        a = sim.simulate(sim.SimSpec(seed=1, **base))
        b = sim.simulate(sim.SimSpec(seed=2, **base))
        assert not np.array_equal(a.mean_sq, b.mean_sq)

    def test_rademacher_noise(self):
        spec = sim.SimSpec(scalar(-0.5, 0.9, 0.6, 0.3), sim.constant(0.5), [1.0], 1.0,
                           paths=20000, h=1e-3, noise="rademacher", seed=3)
        rep = sim.moment_check(spec, sim.simulate(spec))
        assert rep.max_abs_z < 4.5


class TestOutput:
    def test_csv_columns(self, tmp_path):
        spec = sim.SimSpec(example_constant(), sim.constant(0.5), [1.0, 1.0], 1.0, paths=100)
        res = sim.simulate(spec)
        path = tmp_path / "series.csv"
        sim.to_csv(res, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "time,mean_sq,std_err"
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert data.shape == (res.grid.size, 3)
        np.testing.assert_allclose(data[:, 1], res.mean_sq)

    def test_grid_records_pre_jump_value(self):
        spec = sim.SimSpec(scalar(0.0, 0.5), sim.constant(1.0), [1.0], 2.0, grid=[1.0, 2.0], paths=3)
        res = sim.simulate(spec)
        np.testing.assert_allclose(res.mean_sq, [1.0, 0.25])
        np.testing.assert_allclose(res.post_jump_mean_sq, [0.25, 0.0625])

    def test_keep_terminal(self):
        spec = sim.SimSpec(example_constant(), sim.constant(0.5), [1.0, 1.0], 1.0, paths=20, keep_terminal=True)
        assert sim.simulate(spec).terminal_norms.shape == (20,)
