"""Numeric core: primitives, gradient tape and finite-difference agreement"""

import math

import numpy as np
import pytest

from app.core import autograd as ag
from app.core.autograd import GradientTape, Tensor
from app.core.exceptions import (
    DegenerateVectorError,
    DomainError,
    NonFiniteError,
    ShapeError,
    UnreachableParameterError,
)
from app.services.gradcheck import central_difference, relative_error


def _fd_error(build, arrays, h=1e-5):
    """Relative error between tape gradients and central differences of build(*tensors)"""
    tape = GradientTape()
    leaves = [tape.watch(a) for a in arrays]
    analytic = tape.gradient(build(*leaves), arrays)
    numeric = [
        central_difference(lambda: build(*[Tensor(a) for a in arrays]).item(), a, h)
        for a in arrays
    ]
    return relative_error(analytic, numeric)


def _scalarize(out: Tensor, rng: np.random.Generator) -> Tensor:
    weights = rng.normal(size=out.shape)
    return ag.sum(out * weights)


class TestTensor:

    def test_value_is_read_only_copy(self):
        source = np.array([[1.0, 2.0]])
        t = Tensor(source)
        source[0, 0] = 5.0
        assert t.value[0, 0] == 1.0
        with pytest.raises(ValueError):
            t.value[0, 0] = 3.0

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteError):
            Tensor([1.0, np.nan])
        with pytest.raises(NonFiniteError):
            Tensor([np.inf])

    def test_as_matrix_names_bad_rows(self):
        with pytest.raises(NonFiniteError, match=r"\[1\]"):
            ag.as_matrix([[1.0, 2.0], [np.nan, 0.0]])
        with pytest.raises(ShapeError):
            ag.as_matrix([1.0, 2.0])


class TestMatmul:

    def test_identity(self):
        out = ag.matmul(Tensor(np.eye(2)), Tensor([[3.0], [4.0]]))
        np.testing.assert_array_equal(out.value, [[3.0], [4.0]])

    def test_row_by_column(self):
        out = ag.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
        np.testing.assert_array_equal(out.value, [[11.0]])

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n, k, m = rng.integers(1, 17, size=3)
            a = rng.normal(size=(n, k))
            b = rng.normal(size=(k, m))
            expected = np.zeros((n, m))
            for i in range(n):
                for j in range(m):
                    for p in range(k):
                        expected[i, j] += a[i, p] * b[p, j]
            np.testing.assert_allclose((Tensor(a) @ Tensor(b)).value, expected, rtol=0, atol=1e-12)

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            ag.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 2))))


class TestSoftmax:

    def test_symmetric_input(self):
        np.testing.assert_allclose(ag.softmax(Tensor([0.0, 0.0])).value, [0.5, 0.5], atol=1e-15)

    def test_large_gap(self):
        out = ag.softmax(Tensor([10.0, 0.0])).value
        expected = np.array([1.0, math.exp(-10.0)]) / (1.0 + math.exp(-10.0))
        np.testing.assert_allclose(out, expected, rtol=0, atol=1e-15)
        np.testing.assert_allclose(out, [0.9999546, 4.54e-5], atol=1e-7)

    @pytest.mark.parametrize("c", [-1e3, 0.0, 7.5, 1e3])
    def test_constant_vector_is_uniform(self, c):
        np.testing.assert_allclose(ag.softmax(Tensor([c, c, c])).value, [1 / 3] * 3, atol=1e-15)

    def test_sums_to_one_and_shift_invariant(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            v = rng.normal(size=rng.integers(1, 12)) * 5.0
            c = rng.uniform(-50, 50)
            p = ag.softmax(Tensor(v)).value
            assert abs(p.sum() - 1.0) <= 1e-12
            assert np.all(p > 0)
            np.testing.assert_allclose(ag.softmax(Tensor(v + c)).value, p, rtol=0, atol=1e-12)

    def test_empty_input(self):
        with pytest.raises(DomainError):
            ag.softmax(Tensor(np.zeros(0)))


class TestL2Normalize:

    def test_three_four_five(self):
        np.testing.assert_allclose(ag.l2_normalize(Tensor([3.0, 4.0])).value, [0.6, 0.8], atol=1e-15)

    def test_unit_vector_unchanged(self):
        v = np.array([0.0, 1.0, 0.0])
        np.testing.assert_allclose(ag.l2_normalize(Tensor(v)).value, v, atol=1e-15)

    def test_zero_vector(self):
        with pytest.raises(DegenerateVectorError):
            ag.l2_normalize(Tensor([0.0, 0.0]))

    def test_fallback_replaces_zero_rows(self):
        rows = np.array([[0.0, 0.0], [3.0, 4.0]])
        tape = GradientTape()
        out = ag.l2_normalize(tape.watch(rows), fallback=np.array([0.0, 1.0]))
        np.testing.assert_allclose(out.value, [[0.0, 1.0], [0.6, 0.8]], atol=1e-15)
        (grad,) = tape.gradient(ag.sum(out * np.array([[1.0, 2.0], [1.0, 2.0]])), [rows])
        np.testing.assert_array_equal(grad[0], [0.0, 0.0])
        # d/dx of (x + 2y)/|x| at (3, 4)
        np.testing.assert_allclose(grad[1], [(1.0 - 0.6 * 2.2) / 5.0, (2.0 - 0.8 * 2.2) / 5.0], atol=1e-15)

    def test_rows_have_unit_norm(self):
        rng = np.random.default_rng(2)
        out = ag.l2_normalize(Tensor(rng.normal(size=(50, 7)) * 100)).value
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)


class TestEntropy:

    def test_one_hot(self):
        assert ag.entropy([0.0, 1.0, 0.0]) == 0.0

    def test_uniform_over_ten(self):
        assert ag.entropy(np.full(10, 0.1)) == pytest.approx(math.log(10), abs=1e-12)
        assert ag.entropy(np.full(10, 0.1)) == pytest.approx(2.302585, abs=1e-6)

    def test_coin(self):
        assert ag.entropy([0.5, 0.5]) == pytest.approx(0.693147, abs=1e-6)

    @pytest.mark.parametrize("p", [[0.5, 0.6], [-0.1, 1.1], [0.3, 0.3]])
    def test_invalid_distribution(self, p):
        with pytest.raises(DomainError):
            ag.entropy(p)

    def test_uniform_is_maximal(self):
        rng = np.random.default_rng(3)
        for k in (2, 3, 10):
            probs = rng.dirichlet(np.ones(k), size=200)
            assert np.all(ag.row_entropies(probs) <= math.log(k) + 1e-12)
            assert np.all(ag.row_entropies(probs) >= 0)


class TestGradientTape:

    def test_sum_gives_ones(self):
        w = np.random.default_rng(4).normal(size=(3, 2))
        tape = GradientTape()
        out = ag.sum(tape.watch(w))
        (g,) = tape.gradient(out, [w])
        np.testing.assert_array_equal(g, np.ones((3, 2)))

    def test_squared_norm(self):
        w = np.array([1.0, 2.0])
        tape = GradientTape()
        out = ag.sum(ag.square(tape.watch(w)))
        (g,) = ag.grad(out, [w])
        np.testing.assert_allclose(g, [2.0, 4.0], atol=0)

    def test_watch_is_idempotent(self):
        w = np.ones((2, 2))
        tape = GradientTape()
        assert tape.watch(w) is tape.watch(w)

    def test_unwatched_parameter(self):
        w, other = np.ones(2), np.ones(2)
        tape = GradientTape()
        out = ag.sum(tape.watch(w))
        with pytest.raises(UnreachableParameterError):
            tape.gradient(out, [other])

    def test_constant_output_has_zero_gradient(self):
        w = np.ones((2, 3))
        tape = GradientTape()
        tape.watch(w)
        (g,) = tape.gradient(Tensor(4.0), [w])
        np.testing.assert_array_equal(g, np.zeros((2, 3)))

    def test_non_scalar_output(self):
        w = np.ones((2, 2))
        tape = GradientTape()
        with pytest.raises(ShapeError):
            tape.gradient(tape.watch(w) * 2.0, [w])

    def test_records_in_order(self):
        w = np.ones((2, 2))
        tape = GradientTape()
        ag.sum(ag.exp(tape.watch(w)))
        assert tape.ops == ["exp", "sum"]

    def test_shared_leaf_accumulates(self):
        w = np.array([[1.0, -2.0]])
        tape = GradientTape()
        out = ag.sum(tape.watch(w) * 3.0) + ag.sum(tape.watch(w))
        (g,) = tape.gradient(out, [w])
        np.testing.assert_allclose(g, [[4.0, 4.0]])

    def test_composite_matches_finite_differences(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 5))
            weights = rng.normal(size=(3, 5))

            def build(ta, tb):
                return ag.sum(ag.log(ag.softmax(ta @ tb, axis=-1)) * weights)

            assert _fd_error(build, [a, b]) < 1e-6


UNARY_OPS = {
    "exp": lambda t: ag.exp(t),
    "square": lambda t: ag.square(t),
    "tanh": lambda t: ag.tanh(t),
    "relu": lambda t: ag.relu(t),
    "transpose": lambda t: ag.transpose(t),
    "sum_axis0": lambda t: ag.sum(t, axis=0),
    "sum_axis1_keepdims": lambda t: ag.sum(t, axis=1, keepdims=True),
    "mean": lambda t: ag.mean(t, axis=1),
    "take_rows": lambda t: ag.take_rows(t, [0, 2, 2, 1]),
    "softmax": lambda t: ag.softmax(t, axis=-1),
    "l2_normalize": lambda t: ag.l2_normalize(t),
    "logsumexp": lambda t: ag.logsumexp(t),
    "logsumexp_masked": lambda t: ag.logsumexp(t, mask=~np.eye(3, 4, dtype=bool)),
}


class TestPrimitiveGradients:

    @pytest.mark.parametrize("name", sorted(UNARY_OPS))
    def test_unary(self, name):
        op = UNARY_OPS[name]
        for seed in range(50):
            rng = np.random.default_rng(seed)
            x = rng.normal(size=(3, 4))
            if name == "relu":
                # keep entries away from the kink
                x = np.where(np.abs(x) < 0.1, 0.5, x)
            weights = rng.normal(size=op(Tensor(x)).shape)
            assert _fd_error(lambda t: ag.sum(op(t) * weights), [x]) < 1e-6, f"seed {seed}"

    def test_log(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            x = rng.uniform(0.5, 3.0, size=(2, 3))
            assert _fd_error(lambda t: _scalarize(ag.log(t), np.random.default_rng(seed)), [x]) < 1e-6

    @pytest.mark.parametrize("op", [ag.add, ag.sub, ag.mul, ag.divide])
    def test_binary_with_broadcast(self, op):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            a = rng.normal(size=(3, 4))
            b = rng.uniform(0.5, 2.0, size=(1, 4))
            assert _fd_error(lambda ta, tb: _scalarize(op(ta, tb), np.random.default_rng(seed)), [a, b]) < 1e-6

    def test_matmul(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
            assert _fd_error(lambda ta, tb: _scalarize(ta @ tb, np.random.default_rng(seed)), [a, b]) < 1e-6

    def test_concat_rows(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            a, b = rng.normal(size=(2, 3)), rng.normal(size=(4, 3))
            assert _fd_error(
                lambda ta, tb: _scalarize(ag.concat_rows([ta, tb]), np.random.default_rng(seed)), [a, b]
            ) < 1e-6

    def test_pairwise_sq_dists(self):
        for seed in range(50):
            rng = np.random.default_rng(seed)
            a, b = rng.normal(size=(3, 2)), rng.normal(size=(5, 2))
            assert _fd_error(
                lambda ta, tb: _scalarize(ag.pairwise_sq_dists(ta, tb), np.random.default_rng(seed)), [a, b]
            ) < 1e-6

    def test_pairwise_sq_dists_values(self):
        out = ag.pairwise_sq_dists(Tensor([[0.0, 0.0], [1.0, 1.0]]), Tensor([[3.0, 4.0]])).value
        np.testing.assert_allclose(out, [[25.0], [13.0]])

    def test_logsumexp_mask_excludes_entries(self):
        x = np.array([[1.0, 100.0, 2.0]])
        out = ag.logsumexp(Tensor(x), mask=np.array([[True, False, True]])).value
        assert out[0, 0] == pytest.approx(math.log(math.e + math.e ** 2), abs=1e-12)
        with pytest.raises(DomainError):
            ag.logsumexp(Tensor(x), mask=np.zeros((1, 3), dtype=bool))

    def test_log_of_non_positive(self):
        with pytest.raises(DomainError):
            ag.log(Tensor([1.0, 0.0]))
