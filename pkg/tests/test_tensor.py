import numpy as np
import pytest

from morphosim import tensor
from morphosim.errors import SingularMatrix


def random_gl2(rng, n, spread=0.4, min_det=0.5, max_det=2.0):
    """Random 2x2 matrices with determinant inside [min_det, max_det]."""
    out = np.empty((n, 2, 2))
    k = 0
    while k < n:
        batch = np.eye(2) + rng.uniform(-spread, spread, size=(2 * n, 2, 2))
        d = np.linalg.det(batch)
        good = batch[(d >= min_det) & (d <= max_det)][: n - k]
        out[k:k + len(good)] = good
        k += len(good)
    return out


def dist_by_rotation_scan(F):
    """Brute-force distance to SO(2): dense scan over angles plus a local
    refinement, independent of the polar decomposition."""
    thetas = np.linspace(0.0, 2.0 * np.pi, 20001)
    R = tensor.rotation(thetas)
    d = np.sqrt(np.sum((F[None] - R) ** 2, axis=(1, 2)))
    k = int(np.argmin(d))
    lo, hi = thetas[max(k - 1, 0)], thetas[min(k + 1, len(thetas) - 1)]
    for _ in range(60):  # bisection on the smooth 1d objective
        mids = np.linspace(lo, hi, 5)
        dm = np.sqrt(np.sum((F[None] - tensor.rotation(mids)) ** 2,
                            axis=(1, 2)))
        j = int(np.argmin(dm))
        lo, hi = mids[max(j - 1, 0)], mids[min(j + 1, 4)]
    return float(np.min(dm))


class TestPolarRotation:
    def test_identity_fixed_point(self):
        assert np.allclose(tensor.polar_rotation(np.eye(2)), np.eye(2),
                           atol=1e-14)
        assert np.allclose(tensor.polar_rotation(np.eye(3)), np.eye(3),
                           atol=1e-14)

    def test_rotations_are_fixed_points(self):
        for theta in (0.1, 1.0, 2.5, -0.7):
            Q = tensor.rotation(theta)
            assert np.allclose(tensor.polar_rotation(Q), Q, atol=1e-13)

    def test_spd_factor_has_identity_rotation(self):
        assert np.allclose(tensor.polar_rotation(np.diag([2.0, 1.0])),
                           np.eye(2), atol=1e-14)

    def test_rotated_stretch(self):
        Q = tensor.rotation(np.pi / 4)
        F = Q @ np.diag([2.0, 1.0])
        R = tensor.polar_rotation(F)
        # oracle: R = U V^T from the SVD
        U, _, Vt = np.linalg.svd(F)
        assert np.allclose(R, U @ Vt, atol=1e-13)
        assert np.allclose(R, Q, atol=1e-13)

    def test_orthogonality_and_determinant_bulk(self):
        rng = np.random.default_rng(42)
        F = random_gl2(rng, 1000)
        R = tensor.polar_rotation(F)
        assert np.max(np.abs(tensor.transpose(R) @ R - np.eye(2))) <= 1e-12
        assert np.max(np.abs(np.linalg.det(R) - 1.0)) <= 1e-12

    def test_three_dimensional_bulk(self):
        rng = np.random.default_rng(3)
        F = np.eye(3) + 0.3 * rng.standard_normal((200, 3, 3))
        F = F[np.linalg.det(F) > 0.3]
        R = tensor.polar_rotation(F)
        assert np.max(np.abs(tensor.transpose(R) @ R - np.eye(3))) <= 1e-12
        assert np.max(np.abs(np.linalg.det(R) - 1.0)) <= 1e-12

    def test_singular_raises(self):
        with pytest.raises(SingularMatrix):
            tensor.polar_rotation(np.array([[1.0, 0.0], [0.0, 0.0]]))
        with pytest.raises(SingularMatrix):
            tensor.polar_rotation(np.diag([1.0, -1.0]))  # det > 0 required


class TestDistSO:
    def test_identity(self):
        assert tensor.dist_so(np.eye(2)) == 0.0

    def test_diag_stretch(self):
        # singular values (2, 1): distance is the l2 gap to (1, 1)
        assert abs(tensor.dist_so(np.diag([2.0, 1.0])) - 1.0) <= 1e-14
        oracle = dist_by_rotation_scan(np.diag([2.0, 1.0]))
        assert abs(tensor.dist_so(np.diag([2.0, 1.0])) - oracle) <= 1e-9

    def test_small_stretch_after_rotation(self):
        eps = 1e-3
        F = tensor.rotation(0.8) @ np.diag([1.0 + eps, 1.0])
        assert abs(tensor.dist_so(F) - eps) <= 1e-12

    def test_left_rotation_invariance(self):
        rng = np.random.default_rng(7)
        F = random_gl2(rng, 300)
        Q = tensor.rotation(rng.uniform(0, 2 * np.pi, size=300))
        assert np.max(np.abs(tensor.dist_so(Q @ F) - tensor.dist_so(F))) <= 1e-12

    def test_singular_value_oracle(self):
        rng = np.random.default_rng(11)
        F = random_gl2(rng, 500)
        sv = np.linalg.svd(F, compute_uv=False)
        oracle = np.sum((sv - 1.0) ** 2, axis=1)
        assert np.max(np.abs(tensor.dist_so(F) ** 2 - oracle)) <= 1e-10

    def test_scan_oracle_random(self):
        rng = np.random.default_rng(13)
        for F in random_gl2(rng, 5):
            assert abs(tensor.dist_so(F) - dist_by_rotation_scan(F)) <= 1e-8


class TestCofactor:
    def test_identity(self):
        assert np.array_equal(tensor.det_derivative(np.eye(2)), np.eye(2))

    def test_diag(self):
        assert np.allclose(tensor.det_derivative(np.diag([3.0, 5.0])),
                           np.diag([5.0, 3.0]))

    @pytest.mark.parametrize("d", [2, 3])
    def test_finite_difference(self, d):
        rng = np.random.default_rng(d)
        F = rng.standard_normal((100, d, d))
        C = tensor.det_derivative(F)
        h = 1e-6
        for k in range(d):
            for l in range(d):
                E = np.zeros((d, d))
                E[k, l] = 1.0
                fd = (np.linalg.det(F + h * E) - np.linalg.det(F - h * E)) / (2 * h)
                scale = np.maximum(np.abs(fd), 1.0)
                assert np.max(np.abs(C[:, k, l] - fd) / scale) <= 1e-7

    def test_matches_det_times_inverse_transpose(self):
        rng = np.random.default_rng(5)
        F = random_gl2(rng, 50)
        expected = np.linalg.det(F)[:, None, None] * tensor.transpose(
            np.linalg.inv(F))
        assert np.allclose(tensor.cofactor(F), expected, atol=1e-12)

    @pytest.mark.parametrize("d", [2, 3])
    def test_cofactor_derivative_fd(self, d):
        rng = np.random.default_rng(17 + d)
        F = np.eye(d) + 0.4 * rng.standard_normal((20, d, d))
        DC = tensor.cofactor_derivative(F)
        h = 1e-6
        for k in range(d):
            for l in range(d):
                E = np.zeros((d, d))
                E[k, l] = 1.0
                fd = (tensor.cofactor(F + h * E)
                      - tensor.cofactor(F - h * E)) / (2 * h)
                assert np.max(np.abs(DC[..., k, l] - fd)) <= 1e-8


class TestInvert:
    def test_identity(self):
        assert np.allclose(tensor.invert(np.eye(2)), np.eye(2))

    def test_diagonal(self):
        assert np.allclose(tensor.invert(np.diag([2.0, 4.0])),
                           np.diag([0.5, 0.25]))

    def test_residual(self):
        rng = np.random.default_rng(23)
        F = random_gl2(rng, 200)
        resid = np.max(np.abs(F @ tensor.invert(F) - np.eye(2)))
        assert resid <= 1e-12

    def test_singular(self):
        with pytest.raises(SingularMatrix):
            tensor.invert(np.array([[1.0, 2.0], [2.0, 4.0]]))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            tensor.invert(np.array([[np.nan, 0.0], [0.0, 1.0]]))


class TestPolarDerivative:
    @pytest.mark.parametrize("d", [2, 3])
    def test_finite_difference(self, d):
        rng = np.random.default_rng(31 + d)
        F = np.eye(d) + 0.3 * rng.standard_normal((30, d, d))
        F = F[np.linalg.det(F) > 0.4]
        DR = tensor.polar_rotation_derivative(F)
        h = 1e-6
        for k in range(d):
            for l in range(d):
                E = np.zeros((d, d))
                E[k, l] = 1.0
                fd = (tensor.polar_rotation(F + h * E)
                      - tensor.polar_rotation(F - h * E)) / (2 * h)
                assert np.max(np.abs(DR[..., k, l] - fd)) <= 2e-8


def test_basic_algebra_helpers():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((4, 2, 2))
    B = rng.standard_normal((4, 2, 2))
    assert np.allclose(tensor.matmul(A, B), A @ B)
    assert np.allclose(tensor.transpose(A)[..., 0, 1], A[..., 1, 0])
    assert np.allclose(tensor.trace(A), A[..., 0, 0] + A[..., 1, 1])
    assert np.allclose(tensor.frobenius_norm(A),
                       np.sqrt(np.sum(A * A, axis=(1, 2))))
    assert tensor.max_abs(np.array([[1.0, -3.0], [2.0, 0.5]])) == 3.0
