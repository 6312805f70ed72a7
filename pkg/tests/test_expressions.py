import numpy as np
import pytest

from morphosim import expressions as ex
from morphosim.errors import ParseError


def ev(text, **env):
    return ex.evaluate(ex.parse(text), env)


class TestParseEvaluate:
    def test_numbers_and_precedence(self):
        assert ev("1 + 2 * 3 ^ 2") == 19.0
        assert ev("2 ^ 3 ^ 2") == 512.0  # right associative
        assert ev("(1 + 2) * 3") == 9.0
        assert ev("-2 ^ 2") == -4.0
        assert ev("6 / 3 / 2") == 1.0

    def test_scientific_notation(self):
        assert ev("1e-3 + 2.5E2") == pytest.approx(250.001)

    def test_variables_and_pi(self):
        assert ev("x + 2*y", x=1.0, y=2.0) == 5.0
        assert ev("sin(pi)") == pytest.approx(0.0, abs=1e-15)
        assert ev("cos(0) + exp(0)") == 2.0

    def test_vectorized(self):
        x = np.linspace(0, 1, 5)
        assert np.allclose(ev("x^2 + 1", x=x), x ** 2 + 1)

    def test_double_star_power(self):
        assert ev("3 ** 2") == 9.0

    def test_time_inflation(self):
        assert ev("x / (1 - t)", x=1.0, t=0.5) == 2.0

    def test_unknown_name(self):
        with pytest.raises(ParseError):
            ex.parse("foo + 1")

    def test_trailing_garbage(self):
        with pytest.raises(ParseError):
            ex.parse("1 + 2 )")

    def test_unbalanced_parens(self):
        with pytest.raises(ParseError):
            ex.parse("sin(x")

    def test_missing_variable_at_evaluation(self):
        with pytest.raises(ParseError):
            ev("x + 1")


class TestVectors:
    def test_split_components(self):
        assert ex.split_components("x, y") == ["x", "y"]
        assert ex.split_components("sin(x), (y + 1) / 2") \
            == ["sin(x)", "(y + 1) / 2"]

    def test_wrong_component_count(self):
        with pytest.raises(ParseError):
            ex.parse_vector("x", 2)

    def test_vector_evaluator(self):
        call = ex.vector_evaluator(ex.parse_vector("x / (1 - t), 2 * y", 2))
        pts = np.array([[1.0, 0.5], [0.5, 0.25]])
        out = call(0.5, pts)
        assert np.allclose(out, [[2.0, 1.0], [1.0, 0.5]])

    def test_normals_in_traction(self):
        call = ex.vector_evaluator(ex.parse_vector("0.01 * nx, 0.01 * ny", 2))
        pts = np.zeros((3, 2))
        normals = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        assert np.allclose(call(0.0, pts, normals), 0.01 * normals)

    def test_constant_expressions_broadcast(self):
        call = ex.vector_evaluator(ex.parse_vector("0, 1", 2))
        out = call(0.0, np.zeros((4, 2)))
        assert out.shape == (4, 2)
        assert np.allclose(out[:, 1], 1.0)


class TestDerivative:
    CASES = [
        "x^2 + y^2",
        "sin(pi*x) * sin(pi*y)",
        "exp(x - y) / (1 + x^2)",
        "cos(x) * x - y",
        "(x + y)^3",
    ]

    @pytest.mark.parametrize("text", CASES)
    @pytest.mark.parametrize("var", ["x", "y"])
    def test_against_finite_differences(self, text, var):
        node = ex.parse(text)
        dnode = ex.derivative(node, var)
        rng = np.random.default_rng(1)
        pts = rng.uniform(0.1, 0.9, size=(50, 2))
        env = {"x": pts[:, 0], "y": pts[:, 1]}
        h = 1e-6
        env_p = dict(env)
        env_m = dict(env)
        env_p[var] = env[var] + h
        env_m[var] = env[var] - h
        fd = (ex.evaluate(node, env_p) - ex.evaluate(node, env_m)) / (2 * h)
        assert np.max(np.abs(ex.evaluate(dnode, env) - fd)) <= 1e-7

    def test_nonconstant_exponent_rejected(self):
        with pytest.raises(ParseError):
            ex.derivative(ex.parse("x ^ y"), "x")

    def test_gradient_evaluator(self):
        grad = ex.gradient_evaluator(ex.parse_vector("x*y, x + 2*y", 2))
        pts = np.array([[2.0, 3.0]])
        out = grad(0.0, pts)
        assert np.allclose(out[0], [[3.0, 2.0], [1.0, 2.0]])

    def test_uses_variable(self):
        assert ex.uses_variable(ex.parse("x / (1 - t)"), "t")
        assert not ex.uses_variable(ex.parse("x + y"), "t")
