import math

import numpy as np
import pytest

from dwelltime.benchmarks import example_constant, example_feedback
from dwelltime.matalg import LinAlgError, expm, kron_sum, min_eig_sym, spectral_radius, unvec, vec
from dwelltime.model import ImpulsiveSystem
from dwelltime.moments import (
    closed_loop_flow,
    closed_loop_jump,
    closed_loop_monodromy,
    constant_dt_stable,
    lift,
    monodromy,
    propagate_xi,
)
from dwelltime.synthesis import ControllerGains, min_dt_sf


def scalar(a, e_c, j, e_d):
    return ImpulsiveSystem.build([[a]], [[j]], E_c=[[e_c]], E_d=[[e_d]])


class TestLift:
    def test_scalar(self):
        lp = lift(scalar(-1.0, 0.5, 2.0, 0.3))
        assert lp.gen.tolist() == [[-2.0 + 0.25]]
        assert lp.jump[0, 0] == pytest.approx(4.09)

    def test_deterministic_reduction(self):
        s = example_constant()
        lp = lift(s)
        assert np.array_equal(lp.gen, kron_sum(s.A, s.A))
        assert np.array_equal(lp.jump, np.kron(s.J, s.J))

    def test_isotropic_noise_shift(self):
        s0, s = example_constant(), example_constant(0.3, 0.0)
        assert np.allclose(lift(s).gen, lift(s0).gen + 0.09 * np.eye(4))


class TestMonodromy:
    def test_identity_jump(self):
        s = ImpulsiveSystem.build([[-1.0, 2.0], [0.0, -3.0]], np.eye(2), E_c=0.2 * np.eye(2))
        assert np.allclose(monodromy(s, 0.7), expm(lift(s).gen * 0.7))

    def test_scalar_boundary(self):
        M = monodromy(scalar(-1.0, 0.0, 2.0, 0.0), math.log(4) / 2)
        assert M[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_benchmark_threshold(self):
        assert abs(spectral_radius(monodromy(example_constant(), 1.1406)) - 1) < 5e-4

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            monodromy(example_constant(), 0.0)

    def test_verdicts(self):
        assert constant_dt_stable(example_constant(), 1.2).stable
        assert not constant_dt_stable(example_constant(), 1.0).stable
        assert constant_dt_stable(scalar(0.0, 0.0, 0.5, 0.5), 3.0).stable


class TestPropagateXi:
    def setup_method(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(2, 2))
        self.Z = X @ X.T
        self.sys = example_constant(0.6, 0.3)

    def test_zero_time(self):
        assert np.array_equal(propagate_xi(self.sys, self.Z, 0.0), self.Z)

    def test_deterministic(self):
        s = example_constant()
        t = 0.8
        assert np.allclose(propagate_xi(s, self.Z, t), expm(s.A.T * t) @ self.Z @ expm(s.A * t))

    def test_scalar(self):
        s = scalar(-0.7, 0.4, 1.0, 0.0)
        assert propagate_xi(s, [[2.0]], 1.5)[0, 0] == pytest.approx(2.0 * math.exp((-1.4 + 0.16) * 1.5))

    def test_semigroup(self):
        a = propagate_xi(self.sys, self.Z, 0.9)
        b = propagate_xi(self.sys, propagate_xi(self.sys, self.Z, 0.4), 0.5)
        assert np.linalg.norm(a - b) <= 1e-9 * np.linalg.norm(a)

    def test_positivity(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            v = rng.normal(size=(2, 1))
            R = propagate_xi(self.sys, v @ v.T, rng.uniform(0, 3))
            assert min_eig_sym(R) >= -1e-9 * np.linalg.norm(R)

    def test_matches_expectation_definition(self):
        # E[x^T Z x] along the flow equals x0^T propagate_xi(Z) x0
        x0 = np.array([1.0, -0.5])
        t = 0.6
        P = unvec(expm(lift(self.sys).gen * t) @ vec(np.outer(x0, x0)), 2)
        assert np.trace(self.Z @ P) == pytest.approx(x0 @ propagate_xi(self.sys, self.Z, t) @ x0)

    def test_asymmetric_rejected(self):
        with pytest.raises(LinAlgError):
            propagate_xi(self.sys, [[1.0, 2.0], [0.0, 1.0]], 1.0)


@pytest.fixture(scope="module")
def synthesized():
    s = example_feedback()
    return s, min_dt_sf(s, 0.1, N=10)


class TestClosedLoop:
    def test_zero_gains_open_loop(self):
        s = example_feedback()
        g = ControllerGains.constant(np.zeros((1, 2)), np.zeros((1, 2)), 0.5)
        flow = closed_loop_flow(s, g, 0.3)
        assert np.allclose(flow.map, expm(lift(s).gen.T * 0.3), atol=1e-10)
        assert np.allclose(closed_loop_monodromy(s, g, 0.3), monodromy(s, 0.3), atol=1e-10)

    def test_constant_gain_matches_lifted_closed_loop(self):
        s = example_feedback()
        K, Kd = np.array([[-1.0, -0.5]]), np.array([[-2.0, -1.0]])
        closed = ImpulsiveSystem.build(s.A + s.B_c1 @ K, s.J + s.B_d1 @ Kd,
                                       E_c=list(s.E_c) + [s.B_c2 @ K], E_d=s.E_d)
        g = ControllerGains.constant(K, Kd, horizon=0.05)
        M = closed_loop_monodromy(s, g, 0.4)
        ref = expm(lift(closed).gen * 0.4) @ (lift(closed).jump + np.kron(s.B_d2 @ Kd, s.B_d2 @ Kd))
        assert np.allclose(M, ref, atol=1e-7)

    def test_jump_reduction(self):
        s = example_constant()
        assert np.array_equal(closed_loop_jump(s, np.zeros((0, 2))), np.kron(s.J, s.J))

    def test_rk4_self_convergence(self, synthesized):
        s, res = synthesized
        a = closed_loop_flow(s, res.gains, 0.1, steps=200).map
        b = closed_loop_flow(s, res.gains, 0.1, steps=400).map
        assert np.linalg.norm(a - b) <= 1e-8 * np.linalg.norm(b)

    def test_synthesized_loop_contracts(self, synthesized):
        s, res = synthesized
        assert spectral_radius(closed_loop_monodromy(s, res.gains, 0.1)) < 1
