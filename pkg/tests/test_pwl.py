import numpy as np
import pytest

from dwelltime.pwl import PwlMatrixFunction, aligned_knots, uniform_knots


def test_uniform_knots():
    assert np.allclose(uniform_knots(2.0, 4), [0, 0.5, 1.0, 1.5, 2.0])


def test_aligned_knots_contain_both_ends():
    for T_min, T_max in [(0.01, 0.46), (0.3, 1.0), (0.123, 0.5)]:
        k = aligned_knots(T_min, T_max, 20)
        assert np.isclose(k[-1], T_max) and np.min(np.abs(k - T_min)) < 1e-12
        assert np.all(np.diff(k) > 0)


class TestPwl:
    def setup_method(self):
        rng = np.random.default_rng(3)
        self.f = PwlMatrixFunction(uniform_knots(1.0, 4), rng.normal(size=(5, 2, 2)))

    def test_nodes_exact(self):
        for i, t in enumerate(self.f.knots):
            assert np.array_equal(self.f(t), self.f.nodes[i])

    def test_linear_interpolation(self):
        t = 0.3
        i = 1
        h = 0.25
        expected = (self.f.nodes[i + 1] - self.f.nodes[i]) / h * (t - i * h) + self.f.nodes[i]
        assert np.allclose(self.f(t), expected)

    def test_clamped(self):
        assert np.array_equal(self.f(5.0), self.f.nodes[-1])
        assert np.array_equal(self.f(-1.0), self.f.nodes[0])

    def test_refine_preserves_values(self):
        g = self.f.refine(3)
        assert g.N == 12
        for t in np.linspace(0, 1, 37):
            assert np.allclose(g(t), self.f(t))

    def test_constant(self):
        c = PwlMatrixFunction.constant(np.eye(2), 2.0)
        assert np.array_equal(c(1.3), np.eye(2)) and c.horizon == 2.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            PwlMatrixFunction(uniform_knots(1.0, 3), np.zeros((2, 2, 2)))
