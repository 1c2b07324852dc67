import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drsplit.prox import (
    ProxIllPosedError,
    penalty_phi,
    prox_grid_oracle,
    prox_phi_elementwise,
    prox_phi_scalar,
    prox_phi_spectral,
    prox_psd,
    prox_quadratic_tracking,
)
from drsplit.stacks import Point


def rand_symmetric(rng, p):
    m = rng.standard_normal((p, p))
    return Point.symmetric((m + m.T) / 2)


class TestQuadraticTracking:
    def test_midpoint_shrink(self):
        out = prox_quadratic_tracking(Point.vector([2.0]), Point.vector([0.0]), 1.0)
        assert out.data[0] == pytest.approx(1.0)

    def test_target_fixed_point(self):
        rng = np.random.default_rng(0)
        t = rand_symmetric(rng, 3)
        for gamma in (0.1, 1.0, 10.0):
            assert prox_quadratic_tracking(t, t, gamma).allclose(t, tol=1e-12)

    def test_matches_grid_oracle_on_scalars(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            x, t = rng.uniform(-2, 2, 2)
            gamma = rng.uniform(0.2, 2.0)
            out = prox_quadratic_tracking(Point.vector([x]), Point.vector([t]), gamma)
            grid = prox_grid_oracle(lambda w: 0.5 * (w - t) ** 2, x, gamma,
                                    radius=5.0, step=1e-4)
            assert out.data[0] == pytest.approx(grid, abs=2e-4)


class TestProxPsd:
    def test_eigenvalue_clamp(self):
        x = Point.symmetric(np.diag([1.0, -1.0]))
        out = prox_psd(x)
        assert np.allclose(out.data, np.diag([1.0, 0.0]))

    def test_psd_input_unchanged(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((3, 3))
        x = Point.symmetric(a @ a.T)
        assert prox_psd(x).allclose(x, tol=1e-10)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        x = rand_symmetric(rng, 4)
        once = prox_psd(x)
        assert prox_psd(once).allclose(once, tol=1e-12)

    def test_beats_sampled_psd_candidates(self):
        rng = np.random.default_rng(4)
        x = rand_symmetric(rng, 2)
        proj = prox_psd(x)
        d_proj = (x - proj).norm()
        for _ in range(10_000):
            a = rng.standard_normal((2, 2))
            cand = Point.symmetric(a @ a.T * rng.uniform(0.0, 2.0))
            assert d_proj <= (x - cand).norm() + 1e-12

    def test_rejects_vectors(self):
        with pytest.raises(Exception):
            prox_psd(Point.vector([1.0, -1.0]))


class TestProxPhiScalar:
    def test_zero_input(self):
        for omega, kappa in [(0.0, 0.3), (1.0, 0.5), (2.0, 0.4)]:
            assert prox_phi_scalar(0.0, omega, kappa) == 0.0

    def test_soft_threshold_limit(self):
        assert prox_phi_scalar(2.0, 0.0, 0.5) == pytest.approx(1.5)
        assert prox_phi_scalar(-2.0, 0.0, 0.5) == pytest.approx(-1.5)
        assert prox_phi_scalar(0.3, 0.0, 0.5) == 0.0

    def test_refuses_ill_posed(self):
        with pytest.raises(ProxIllPosedError):
            prox_phi_scalar(1.0, 2.0, 0.5)  # kappa*omega = 1

    @pytest.mark.parametrize("t", [0.2, 1.0, 5.0])
    def test_matches_grid_oracle_reference_points(self, t):
        omega, kappa = 1.0, 0.3
        p = prox_phi_scalar(t, omega, kappa)
        g = prox_grid_oracle(lambda w: kappa * penalty_phi(w, omega), t, 1.0)
        assert p == pytest.approx(g, abs=1e-5)

    def test_firm_shrinkage_and_sign(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            t = float(rng.uniform(-4, 4))
            omega = float(rng.uniform(0.0, 2.0))
            kappa = float(rng.uniform(0.0, 0.95 / max(omega, 1e-9)))
            kappa = min(kappa, 3.0)
            p = prox_phi_scalar(t, omega, kappa)
            assert abs(p) <= abs(t) + 1e-14
            assert p * t >= 0.0

    def test_stationarity_residual(self):
        # t - p = kappa * phi'(p) at interior solutions
        rng = np.random.default_rng(6)
        for _ in range(100):
            t = float(rng.uniform(0.5, 5.0))
            omega = float(rng.uniform(0.1, 2.0))
            kappa = float(rng.uniform(0.01, min(0.9 / omega, 2.0)))
            p = prox_phi_scalar(t, omega, kappa)
            if p > 0:
                grad = kappa / (1.0 + 0.5 * omega * p) ** 2
                assert abs(t - p - grad) <= 1e-8


@settings(max_examples=150, deadline=None)
@given(t=st.floats(-5.0, 5.0), omega=st.floats(0.0, 3.0),
       frac=st.floats(0.0, 0.99))
def test_firm_shrinkage_property(t, omega, frac):
    kappa = frac * min(5.0, 1.0 / max(omega, 1e-9))  # keeps kappa*omega < 1
    p = prox_phi_scalar(t, omega, kappa)
    assert abs(p) <= abs(t) + 1e-12
    assert p * t >= 0.0
    if p != 0.0:
        # interior stationarity: t - p = kappa * phi'(p)
        grad = np.sign(p) * kappa / (1.0 + 0.5 * omega * abs(p)) ** 2
        assert t - p == pytest.approx(grad, abs=1e-8)
    else:
        assert abs(t) <= kappa + 1e-12


class TestProxPhiElementwise:
    def test_zero_matrix(self):
        z = Point.symmetric(np.zeros((3, 3)))
        assert prox_phi_elementwise(z, 1.0, 0.1, 1.0).allclose(z)

    def test_soft_threshold_limit(self):
        x = Point.symmetric(np.array([[2.0, -0.1], [-0.1, 0.5]]))
        out = prox_phi_elementwise(x, 0.0, 0.3, 1.0)
        expected = np.sign(x.data) * np.maximum(np.abs(x.data) - 0.3, 0.0)
        assert np.allclose(out.data, expected)

    def test_entrywise_grid_oracle(self):
        rng = np.random.default_rng(7)
        x = rand_symmetric(rng, 3)
        omega, tau, gamma = 1.0, 0.2, 0.8
        out = prox_phi_elementwise(x, omega, tau, gamma)
        kappa = gamma * tau
        for i in range(3):
            for j in range(3):
                g = prox_grid_oracle(
                    lambda w: kappa * penalty_phi(w, omega),
                    float(x.data[i, j]), 1.0,
                    radius=abs(float(x.data[i, j])) + 0.01)
                assert out.data[i, j] == pytest.approx(g, abs=1e-5)

    def test_commutes_with_entry_permutation(self):
        rng = np.random.default_rng(8)
        x = Point.vector(rng.standard_normal(6))
        perm = rng.permutation(6)
        out = prox_phi_elementwise(x, 1.0, 0.3, 0.5)
        out_perm = prox_phi_elementwise(Point.vector(x.data[perm]), 1.0, 0.3, 0.5)
        assert np.allclose(out.data[perm], out_perm.data)


class TestProxPhiSpectral:
    def test_zero_matrix(self):
        z = Point.symmetric(np.zeros((3, 3)))
        assert prox_phi_spectral(z, 1.0, 0.1, 1.0).allclose(z)

    def test_singular_value_soft_threshold_limit(self):
        rng = np.random.default_rng(9)
        x = rand_symmetric(rng, 4)
        tau, gamma = 0.3, 1.0
        out = prox_phi_spectral(x, 0.0, tau, gamma)
        vals, vecs = np.linalg.eigh(x.data)
        shrunk = np.sign(vals) * np.maximum(np.abs(vals) - gamma * tau, 0.0)
        assert np.allclose(out.data, (vecs * shrunk) @ vecs.T, atol=1e-10)

    def test_rank_one_reduction(self):
        rng = np.random.default_rng(10)
        v = rng.standard_normal(4)
        s = float(v @ v)
        x = Point.symmetric(np.outer(v, v))
        omega, tau, gamma = 1.0, 0.2, 0.7
        out = prox_phi_spectral(x, omega, tau, gamma)
        shrunk = prox_phi_scalar(s, omega, gamma * tau)
        assert np.allclose(out.data, (shrunk / s) * np.outer(v, v), atol=1e-10)

    def test_commutes_with_orthogonal_conjugation(self):
        rng = np.random.default_rng(11)
        x = rand_symmetric(rng, 4)
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        omega, tau, gamma = 1.0, 0.25, 0.6
        direct = prox_phi_spectral(Point.symmetric(q @ x.data @ q.T), omega, tau, gamma)
        conj = prox_phi_spectral(x, omega, tau, gamma)
        assert np.allclose(direct.data, q @ conj.data @ q.T, atol=1e-9)


class TestGridOracle:
    def test_zero_function_returns_nearest_point(self):
        out = prox_grid_oracle(lambda w: 0.0 * w, 1.2345, 1.0, radius=1.0, step=0.1)
        assert out == pytest.approx(1.2345, abs=0.05)

    def test_absolute_value_soft_threshold(self):
        out = prox_grid_oracle(np.abs, 2.0, 1.0, radius=3.0, step=1e-4)
        assert out == pytest.approx(1.0, abs=2e-4)

    def test_cross_check_quadratic_tracking(self):
        target, gamma, x = 0.7, 0.9, 2.0
        expected = (x + gamma * target) / (1.0 + gamma)
        out = prox_grid_oracle(lambda w: 0.5 * (w - target) ** 2, x, gamma,
                               radius=3.0, step=1e-5)
        assert out == pytest.approx(expected, abs=2e-5)

    def test_tie_breaks_toward_smaller_magnitude(self):
        # two exactly tied minimizers equidistant from t; the one with the
        # smaller magnitude wins even though the other comes first on the grid
        def f(w):
            return np.where((w == -0.75) | (w == 0.25), -1.0, 0.0)

        out = prox_grid_oracle(f, -0.25, 1.0, radius=1.0, step=0.5)
        assert out == 0.25

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            prox_grid_oracle(np.abs, 1.0, 1.0, step=0.0)
