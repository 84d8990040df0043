import math

import numpy as np
import pytest

from dwelltime import dtsearch as ds
from dwelltime.benchmarks import DELTA_T1, KAPPA_T1, TABLE2, example_constant, example_ranged
from dwelltime.matalg import spectral_radius
from dwelltime.model import ImpulsiveSystem
from dwelltime.moments import monodromy


def scalar(a, j, e_c=0.0, e_d=0.0):
    return ImpulsiveSystem.build([[a]], [[j]], E_c=[[e_c]], E_d=[[e_d]])


class TestConstant:
    def test_scalar_closed_form(self):
        # exp(-2T) * 4 < 1  <=>  T > ln(4) / 2
        r = ds.smallest_constant_dt(scalar(-1.0, 2.0), T_range=(0.01, 5.0), tol=1e-8)
        assert r.threshold == pytest.approx(math.log(4) / 2, abs=1e-6)

    def test_scalar_with_noise(self):
        # exp((2a + e_c^2) T) (j^2 + e_d^2) = 1
        a, e_c, j, e_d = -1.0, 0.5, 1.5, 0.5
        r = ds.smallest_constant_dt(scalar(a, j, e_c, e_d), T_range=(0.01, 5.0), tol=1e-8)
        assert r.threshold == pytest.approx(math.log(j * j + e_d * e_d) / -(2 * a + e_c ** 2), abs=1e-6)

    @pytest.mark.parametrize("i,j", [(0, 0), (2, 3), (4, 4), (3, 1)])
    def test_reference_grid(self, i, j):
        r = ds.smallest_constant_dt(example_constant(KAPPA_T1[i], DELTA_T1[j]))
        assert r.threshold == pytest.approx(TABLE2[i, j], abs=5e-3)

    def test_spectral_radius_crosses_one(self):
        s = example_constant(0.6, 1.2)
        r = ds.smallest_constant_dt(s, tol=1e-7)
        a, b = r.bracket
        assert spectral_radius(monodromy(s, a)) >= 1.0 > spectral_radius(monodromy(s, b))
        assert abs(spectral_radius(monodromy(s, r.threshold)) - 1.0) < 1e-4

    def test_stable_everywhere_is_an_error(self):
        with pytest.raises(ds.SearchError) as ei:
            ds.smallest_constant_dt(scalar(-1.0, 0.5))
        assert ei.value.reason == "no threshold in range"

    def test_unstable_everywhere_is_an_error(self):
        with pytest.raises(ds.SearchError):
            ds.smallest_constant_dt(scalar(1.0, 2.0))

    def test_stable_intervals_reported(self):
        r = ds.smallest_constant_dt(example_constant(), T_range=(0.1, 5.0))
        assert r.stable_intervals and r.stable_intervals[0][0] >= r.threshold - 0.05

    def test_threads_do_not_change_result(self):
        s = example_constant(0.3, 0.6)
        assert ds.smallest_constant_dt(s, threads=1).to_dict() == ds.smallest_constant_dt(s, threads=4).to_dict()

    def test_bad_range(self):
        with pytest.raises(ValueError):
            ds.smallest_constant_dt(example_constant(), T_range=(2.0, 1.0))


class TestMinimum:
    def test_matches_constant_at_benchmark_origin(self):
        r = ds.smallest_minimum_dt(example_constant(), T_range=(0.5, 10.0), tol=1e-4)
        assert r.threshold == pytest.approx(1.1406, abs=2e-3)

    def test_not_below_constant_threshold(self):
        s = example_constant(0.3, 1.8)
        c = ds.smallest_constant_dt(s, tol=1e-4).threshold
        m = ds.smallest_minimum_dt(s, T_range=(0.5, 10.0), tol=1e-4).threshold
        assert m >= c - 2e-4

    def test_flow_not_stable_short_circuit(self):
        with pytest.raises(ds.SearchError) as ei:
            ds.smallest_minimum_dt(example_ranged(), T_range=(0.01, 1.0))
        assert ei.value.reason == "flow not MS-stable"

    def test_pwl_upper_bounds_exact_and_converges(self):
        s = example_constant(0.9, 1.8)
        exact = ds.smallest_minimum_dt(s, T_range=(0.5, 10.0), tol=1e-3).threshold
        pwl = [ds.smallest_minimum_dt(s, T_range=(0.5, 10.0), tol=1e-3, mode="pwl", N=N).threshold
               for N in (25, 50, 100)]
        assert all(p >= exact - 2e-3 for p in pwl)
        assert pwl[0] >= pwl[1] - 2e-3 >= pwl[2] - 4e-3
        assert pwl[2] - exact < 0.6 * (pwl[0] - exact) + 2e-3

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            ds.smallest_minimum_dt(example_constant(), mode="sos")


class TestRanged:
    def test_lifted_origin(self):
        r = ds.largest_ranged_tmax(example_ranged(), 0.01, T_range=(0.01, 1.0), tol=1e-4)
        assert r.threshold == pytest.approx(0.4620, abs=1e-3)

    def test_lifted_interior_cell(self):
        r = ds.largest_ranged_tmax(example_ranged(3.0, 0.6), 0.01, T_range=(0.01, 1.0), tol=1e-4)
        assert r.threshold == pytest.approx(0.0411, abs=1e-3)

    def test_pwl_origin(self):
        r = ds.largest_ranged_tmax(example_ranged(), 0.01, T_range=(0.01, 1.0), tol=1e-3, mode="pwl", N=100)
        assert r.threshold == pytest.approx(0.4620, abs=5e-3)

    def test_empty_interval(self):
        # rho(M(0.01)) > 1 for this cell, so no interval starting at 0.01 works
        r = ds.largest_ranged_tmax(example_ranged(3.0, 0.8), 0.01, T_range=(0.01, 1.0))
        assert r.threshold is None and r.stable_intervals == []

    def test_threshold_below_constant_instability(self):
        # every constant dwell-time in the certified range must be stable
        s = example_ranged(1.5, 0.4)
        r = ds.largest_ranged_tmax(s, 0.01, T_range=(0.01, 1.0), tol=1e-3)
        for T in np.linspace(0.01, r.bracket[0], 7):
            assert spectral_radius(monodromy(s, T)) < 1.0


class TestDecayRate:
    def test_scalar(self):
        # rho = exp(-2T), so E||x||^2 decays like exp(-2t) and x like exp(-t)
        assert ds.decay_rate(scalar(-1.0, 1.0), 0.7) == pytest.approx(1.0, rel=1e-9)

    def test_zero_at_boundary(self):
        assert ds.decay_rate(scalar(-1.0, 2.0), math.log(4) / 2) == pytest.approx(0.0, abs=1e-9)

    def test_unstable_raises(self):
        with pytest.raises(ds.SearchError):
            ds.decay_rate(scalar(-1.0, 2.0), 0.5)

    def test_slope_over_periods(self):
        s, T = example_constant(0.3, 0.6), 2.0
        rate = ds.decay_rate(s, T)
        M = monodromy(s, T)
        z = np.eye(2).reshape(-1, 1, order="F")
        traces = []
        for _ in range(30):
            z = M @ z
            traces.append(np.trace(z.reshape(2, 2, order="F")))
        slope = -(math.log(traces[-1]) - math.log(traces[-11])) / (2 * 10 * T)
        assert slope == pytest.approx(rate, rel=0.05)


class TestPwlConstant:
    def test_above_spectral_threshold(self):
        r = ds.smallest_pwl_constant_dt(example_constant(), N=50, tol=1e-3)
        assert 1.1406 <= r.threshold < 1.1406 + 0.05
