import numpy as np
import pytest

from morphosim import tensor
from morphosim.errors import OutsideAdmissibleBall, SingularMatrix
from morphosim.materials import (ConstantNutrientModel, DetRatioNutrientModel,
                                 EnergyModel, PolarWellEnergy,
                                 ProductGrowthLaw, StressModulatedGrowthLaw,
                                 ZeroGrowthLaw, check_coercivity,
                                 check_frame_indifference,
                                 check_nutrient_assumptions,
                                 check_nutrient_frame_indifference,
                                 piola_kirchhoff)

X0 = np.zeros(2)


def sample_admissible(rng, n, radius=0.3, d=2):
    out = np.empty((n, d, d))
    k = 0
    while k < n:
        batch = np.eye(d) + rng.uniform(-radius, radius, size=(2 * n, d, d))
        good = batch[np.linalg.det(batch) > 0.3][: n - k]
        out[k:k + len(good)] = good
        k += len(good)
    return out


class TestEnergyValues:
    def test_reference_is_unstressed(self):
        e = PolarWellEnergy(dim=2)
        assert e.evaluate(X0, np.eye(2)) == 0.0
        assert np.allclose(e.first_derivative(X0, np.eye(2)), 0.0, atol=1e-14)

    def test_rotations_cost_nothing(self):
        e = PolarWellEnergy(dim=2)
        for theta in (0.2, 1.1, -0.4):
            assert abs(e.evaluate(X0, tensor.rotation(theta))) <= 1e-14

    def test_diag_stretch_value(self):
        # dist^2 = 1, det = 2: 1 + 1/4 + 4 - 2
        e = PolarWellEnergy(dim=2)
        assert abs(e.evaluate(X0, np.diag([2.0, 1.0])) - 3.25) <= 1e-14

    def test_nonnegative_on_samples(self):
        rng = np.random.default_rng(0)
        e = PolarWellEnergy(dim=2)
        F = sample_admissible(rng, 500)
        assert np.min(e.evaluate(np.zeros((len(F), 2)), F)) >= 0.0

    def test_volume_exponent_parameter(self):
        e3 = PolarWellEnergy(dim=2, p=3)
        F = np.diag([2.0, 1.0])
        assert abs(e3.evaluate(X0, F) - (1.0 + 8.0 + 1.0 / 8.0 - 2.0)) <= 1e-14

    def test_singular_argument(self):
        e = PolarWellEnergy(dim=2)
        with pytest.raises(SingularMatrix):
            e.evaluate(X0, np.array([[1.0, 0.0], [0.0, 0.0]]))


class TestEnergyDerivatives:
    @pytest.mark.parametrize("dim,p", [(2, 2), (2, 3), (3, 2)])
    def test_first_derivative_finite_difference(self, dim, p):
        rng = np.random.default_rng(dim * 10 + p)
        e = PolarWellEnergy(dim=dim, p=p)
        n = 200 if dim == 2 else 60
        F = sample_admissible(rng, n, radius=0.3, d=dim)
        x = np.zeros((n, dim))
        D = e.first_derivative(x, F)
        h = 1e-5
        for k in range(dim):
            for l in range(dim):
                E = np.zeros((dim, dim))
                E[k, l] = 1.0
                fd = (e.evaluate(x, F + h * E) - e.evaluate(x, F - h * E)) / (2 * h)
                scale = np.maximum(np.abs(fd), 1.0)
                assert np.max(np.abs(D[:, k, l] - fd) / scale) <= 1e-6

    @pytest.mark.parametrize("dim", [2, 3])
    def test_second_derivative_finite_difference(self, dim):
        rng = np.random.default_rng(dim)
        e = PolarWellEnergy(dim=dim)
        n = 200 if dim == 2 else 40
        F = sample_admissible(rng, n, radius=0.3, d=dim)
        x = np.zeros((n, dim))
        H = e.second_derivative(x, F)
        h = 1e-5
        for k in range(dim):
            for l in range(dim):
                E = np.zeros((dim, dim))
                E[k, l] = 1.0
                fd = (e.first_derivative(x, F + h * E)
                      - e.first_derivative(x, F - h * E)) / (2 * h)
                scale = np.maximum(np.abs(fd), 1.0)
                assert np.max(np.abs(H[..., :, :, k, l] - fd) / scale) <= 1e-6

    def test_hessian_quadratic_form_at_identity(self):
        # analytic form on directions B: |B + B^T|^2 / 2 + 8 (tr B)^2
        e = PolarWellEnergy(dim=2)
        H = e.second_derivative(X0, np.eye(2))
        rng = np.random.default_rng(4)
        for _ in range(20):
            B = rng.standard_normal((2, 2))
            quad = np.einsum("ijkl,ij,kl->", H, B, B)
            expected = 0.5 * np.sum((B + B.T) ** 2) + 8.0 * np.trace(B) ** 2
            assert abs(quad - expected) <= 1e-10 * (1 + abs(expected))
        ones = np.einsum("ijkl,ij,kl->", H, np.eye(2), np.eye(2))
        assert abs(ones - 36.0) <= 1e-10

    def test_major_symmetry(self):
        rng = np.random.default_rng(9)
        e = PolarWellEnergy(dim=2)
        F = sample_admissible(rng, 100)
        H = e.second_derivative(np.zeros((100, 2)), F)
        assert tensor.major_symmetry_error(H) <= 1e-12


class TestPiolaKirchhoff:
    def test_reference_state(self):
        e = PolarWellEnergy(dim=2)
        P = piola_kirchhoff(e, X0, np.eye(2), np.eye(2))
        assert np.allclose(P, 0.0, atol=1e-14)

    def test_compatible_states_are_stress_free(self):
        rng = np.random.default_rng(21)
        e = PolarWellEnergy(dim=2)
        G = sample_admissible(rng, 100, radius=0.2)
        P = piola_kirchhoff(e, np.zeros((100, 2)), G, G)
        assert np.max(np.abs(P)) <= 1e-12

    def test_energy_gradient_oracle(self):
        # P is the derivative of F -> det(G) W(x, F G^-1) at F = Y
        rng = np.random.default_rng(34)
        e = PolarWellEnergy(dim=2)
        G = sample_admissible(rng, 50, radius=0.15)
        Y = G @ sample_admissible(rng, 50, radius=0.15)
        P = piola_kirchhoff(e, np.zeros((50, 2)), G, Y)
        detG = np.linalg.det(G)
        Ginv = np.linalg.inv(G)
        h = 1e-6
        x = np.zeros((50, 2))
        for k in range(2):
            for l in range(2):
                E = np.zeros((2, 2))
                E[k, l] = 1.0
                fd = detG * (e.evaluate(x, (Y + h * E) @ Ginv)
                             - e.evaluate(x, (Y - h * E) @ Ginv)) / (2 * h)
                scale = np.maximum(np.abs(fd), 1.0)
                assert np.max(np.abs(P[:, k, l] - fd) / scale) <= 1e-6

    def test_outside_ball(self):
        e = PolarWellEnergy(dim=2)
        with pytest.raises(OutsideAdmissibleBall):
            piola_kirchhoff(e, X0, np.eye(2), 1.8 * np.eye(2))

    def test_singular_growth(self):
        e = PolarWellEnergy(dim=2)
        with pytest.raises(SingularMatrix):
            piola_kirchhoff(e, X0, np.zeros((2, 2)), np.eye(2))


class _NotFrameIndifferent(EnergyModel):
    dim = 2
    admissible_radius = 0.5

    def evaluate(self, x, F):
        F = np.asarray(F)
        return F[..., 0, 0] ** 2

    def first_derivative(self, x, F):
        F = np.asarray(F)
        D = np.zeros_like(F)
        D[..., 0, 0] = 2.0 * F[..., 0, 0]
        return D

    def second_derivative(self, x, F):
        F = np.asarray(F)
        H = np.zeros(F.shape + (2, 2))
        H[..., 0, 0, 0, 0] = 2.0
        return H


class _ZeroEnergy(EnergyModel):
    dim = 2

    def evaluate(self, x, F):
        return np.zeros(np.asarray(F).shape[:-2])

    def first_derivative(self, x, F):
        return np.zeros_like(np.asarray(F))

    def second_derivative(self, x, F):
        F = np.asarray(F)
        return np.zeros(F.shape + (2, 2))


class TestCheckers:
    def test_frame_indifference_passes(self):
        report = check_frame_indifference(PolarWellEnergy(dim=2), samples=1000)
        assert report.passed
        assert report.details["max_abs_diff"] <= 1e-10

    def test_frame_indifference_fails_for_bad_model(self):
        report = check_frame_indifference(_NotFrameIndifferent(), samples=200)
        assert not report.passed

    def test_identity_rotation_trivially_passes(self):
        report = check_frame_indifference(_NotFrameIndifferent(), samples=100,
                                          rotations=[np.eye(2)])
        assert report.passed

    def test_coercivity_passes_with_unit_constant(self):
        report = check_coercivity(PolarWellEnergy(dim=2), samples=1000)
        assert report.passed
        assert report.details["c_hat"] >= 1.0

    def test_coercivity_fails_for_zero_energy(self):
        report = check_coercivity(_ZeroEnergy(), samples=200)
        assert not report.passed

    def test_nutrient_assumptions_pass(self):
        model = DetRatioNutrientModel(d0=1.0, beta0=0.5)
        report = check_nutrient_assumptions(model, samples=500)
        assert report.passed
        assert report.details["min_eigenvalue"] >= model.ellipticity_nu

    def test_nutrient_eigenvalues_without_compression(self):
        model = DetRatioNutrientModel(d0=np.diag([2.0, 3.0]), beta0=0.0)
        G = np.eye(2)[None]
        D = model.diffusion(G, G, np.zeros((1, 2)))
        assert np.allclose(np.linalg.eigvalsh(D[0]), [2.0, 3.0])
        assert model.absorption(G, G, np.zeros((1, 2)))[0] == 0.0

    def test_nutrient_frame_indifference(self):
        report = check_nutrient_frame_indifference(
            DetRatioNutrientModel(d0=np.diag([1.0, 2.0]), beta0=0.3),
            samples=500)
        assert report.passed


class TestGrowthLaws:
    def test_zero_law(self):
        law = ZeroGrowthLaw()
        G = np.eye(2)[None]
        assert np.array_equal(law.evaluate(G, G, np.zeros(1), np.zeros((1, 2))),
                              np.zeros((1, 2, 2)))

    def test_product_law_identity(self):
        law = ProductGrowthLaw()
        G = np.eye(2)[None]
        assert np.allclose(law.evaluate(G, G, np.zeros(1), np.zeros((1, 2))),
                           np.eye(2))

    def test_product_law_is_matrix_product(self):
        rng = np.random.default_rng(2)
        law = ProductGrowthLaw()
        G = sample_admissible(rng, 10)
        Y = sample_admissible(rng, 10)
        assert np.allclose(law.evaluate(G, Y, np.zeros(10), np.zeros((10, 2))),
                           G @ Y)

    def test_stress_modulated_zero_nutrient(self):
        law = StressModulatedGrowthLaw(PolarWellEnergy(dim=2), eta="linear")
        G = 1.1 * np.eye(2)[None]
        rate = law.evaluate(G, G, np.zeros(1), np.zeros((1, 2)))
        assert np.allclose(rate, 0.0)

    def test_stress_modulated_degenerate_exponential(self):
        # constant response and stress-blind factor: rate reduces to G
        law = StressModulatedGrowthLaw(PolarWellEnergy(dim=2), gamma=1.0,
                                       eta="constant", mu="identity")
        rng = np.random.default_rng(8)
        G = sample_admissible(rng, 20, radius=0.2)
        rate = law.evaluate(G, G, np.ones(20), np.zeros((20, 2)))
        assert np.allclose(rate, G)

    def test_stress_modulated_uses_stress(self):
        law = StressModulatedGrowthLaw(PolarWellEnergy(dim=2), eta="constant",
                                       mu="linear_stress", mu_coeff=0.5)
        G = np.eye(2)[None]
        Y = 1.1 * np.eye(2)[None]
        rate = law.evaluate(G, Y, np.ones(1), np.zeros((1, 2)))
        P = piola_kirchhoff(PolarWellEnergy(dim=2), np.zeros((1, 2)), G, Y)
        assert np.allclose(rate, (np.eye(2) + 0.5 * P[0]) @ G[0])

    def test_saturating_response(self):
        law = StressModulatedGrowthLaw(PolarWellEnergy(dim=2),
                                       eta="saturating")
        G = np.eye(2)[None]
        rate = law.evaluate(G, G, np.array([1.0]), np.zeros((1, 2)))
        assert np.allclose(rate, 0.5 * np.eye(2))

    def test_negative_nutrient_rejected(self):
        law = StressModulatedGrowthLaw(PolarWellEnergy(dim=2))
        G = np.eye(2)[None]
        with pytest.raises(ValueError):
            law.evaluate(G, G, np.array([-1.0]), np.zeros((1, 2)))


class TestNutrientModels:
    def test_det_ratio_reduction_on_compatible_states(self):
        rng = np.random.default_rng(6)
        model = DetRatioNutrientModel(d0=np.diag([1.5, 0.5]), beta0=2.0)
        G = sample_admissible(rng, 30, radius=0.2)
        x = np.zeros((30, 2))
        assert np.allclose(model.diffusion(G, G, x), np.diag([1.5, 0.5]))
        assert np.allclose(model.absorption(G, G, x), 2.0)

    def test_det_ratio_compression_scaling(self):
        # doubling the deformation gradient in d = 2 quarters D, quadruples beta
        model = DetRatioNutrientModel(d0=1.0, beta0=1.0)
        G = np.eye(2)[None]
        x = np.zeros((1, 2))
        assert np.allclose(model.diffusion(G, 2.0 * G, x), 0.25 * np.eye(2))
        assert np.allclose(model.absorption(G, 2.0 * G, x), 4.0)

    def test_det_ratio_scaling_identity(self):
        # scaling Y by s multiplies D by s^-d and beta by s^d, exactly
        rng = np.random.default_rng(12)
        model = DetRatioNutrientModel(d0=np.diag([2.0, 1.0]), beta0=0.7)
        G = sample_admissible(rng, 20, radius=0.2)
        Y = sample_admissible(rng, 20, radius=0.2)
        x = np.zeros((20, 2))
        s = 1.37
        assert np.allclose(model.diffusion(G, s * Y, x),
                           s ** -2 * model.diffusion(G, Y, x), rtol=1e-13)
        assert np.allclose(model.absorption(G, s * Y, x),
                           s ** 2 * model.absorption(G, Y, x), rtol=1e-13)

    def test_constant_model(self):
        model = ConstantNutrientModel(d0=np.diag([1.0, 3.0]), beta0=0.2)
        G = 1.3 * np.eye(2)[None]
        x = np.zeros((1, 2))
        assert np.allclose(model.diffusion(G, 2 * G, x), np.diag([1.0, 3.0]))
        assert np.allclose(model.absorption(G, 2 * G, x), 0.2)

    def test_spatial_fields(self):
        model = DetRatioNutrientModel(
            d0=lambda x: np.einsum("...i,ij->...ij",
                                   np.ones(np.asarray(x).shape[:-1] + (2,)),
                                   np.eye(2)) * (1 + x[..., :1, None]),
            beta0=lambda x: x[..., 0])
        G = np.broadcast_to(np.eye(2), (3, 2, 2))
        x = np.array([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])
        beta = model.absorption(G, G, x)
        assert np.allclose(beta, [0.0, 0.5, 1.0])
