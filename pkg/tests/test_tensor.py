import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from depfuse import tensor as T
from depfuse.errors import DimensionError, NumericalError, UsageError
from depfuse.tensor import Tensor, tensor

H = 1e-5
TOL = 1e-4


def fd_gradient_check(make_loss, params):
    """Central finite differences against the recorded backward pass."""
    loss = make_loss()
    loss.backward()
    for p in params:
        assert p.grad is not None
        flat = p.data.reshape(-1)
        grad = p.grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + H
            up = make_loss().item()
            flat[i] = orig - H
            down = make_loss().item()
            flat[i] = orig
            numeric = (up - down) / (2 * H)
            err = abs(numeric - grad[i]) / max(abs(numeric), abs(grad[i]), 1e-4)
            assert err <= TOL, f"{make_loss.__name__}[{i}]: {grad[i]} vs fd {numeric}"


def leaf(rng, rows, cols, avoid_zero=False):
    data = rng.uniform(-1.0, 1.0, size=(rows, cols))
    if avoid_zero:
        data = np.sign(data) * (0.1 + np.abs(data))
    return Tensor(data, requires_grad=True)


def spender(rng, shape):
    """Fixed random linear functional of the output so every entry matters
    and repeated loss evaluations agree."""
    weights = Tensor(rng.uniform(0.5, 1.5, size=shape))
    return lambda out: T.sum_all(T.mul(out, weights))


class TestForwardExamples:
    def test_softmax_symmetry(self):
        out = T.softmax_rows(tensor([[0.0, 0.0]]))
        np.testing.assert_allclose(out.data, [[0.5, 0.5]], atol=1e-15)

    def test_matmul_identity(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(3, 3))
        out = T.matmul(tensor(a), tensor(np.eye(3)))
        np.testing.assert_allclose(out.data, a)

    def test_relu_clamps_negative(self):
        out = T.relu(tensor([[-1.0, 2.0]]))
        np.testing.assert_allclose(out.data, [[0.0, 2.0]])

    def test_mean_rows_identity_on_single_row(self):
        row = tensor([[3.0, -1.0, 2.5]])
        np.testing.assert_allclose(T.mean_rows(row).data, row.data)

    def test_scale_and_concat(self):
        a = tensor([[1.0, 2.0]])
        b = tensor([[3.0]])
        np.testing.assert_allclose(T.scale(a, -2.0).data, [[-2.0, -4.0]])
        np.testing.assert_allclose(T.concat_cols(a, b).data, [[1.0, 2.0, 3.0]])


class TestBackwardExamples:
    def test_square_sum_gradient(self):
        x = Tensor([[3.0]], requires_grad=True)
        loss = T.sum_all(T.mul(x, x))
        loss.backward()
        np.testing.assert_allclose(x.grad, [[6.0]])

    def test_matmul_row_sum_pattern(self):
        rng = np.random.default_rng(1)
        x = leaf(rng, 2, 3)
        w = Tensor(rng.normal(size=(3, 4)))

        def make_loss():
            return T.sum_all(T.matmul(x, w))

        fd_gradient_check(make_loss, [x])
        expected = np.tile(w.data.sum(axis=1), (2, 1))
        np.testing.assert_allclose(x.grad, expected, atol=1e-12)

    def test_untracked_tensor_gets_no_grad(self):
        x = Tensor([[3.0]], requires_grad=True)
        c = tensor([[2.0]])
        loss = T.sum_all(T.mul(x, c))
        loss.backward()
        assert c.grad is None
        assert x.grad is not None


class TestUsageErrors:
    def test_backward_twice(self):
        x = Tensor([[1.0]], requires_grad=True)
        loss = T.sum_all(T.mul(x, x))
        loss.backward()
        with pytest.raises(UsageError, match="already ran"):
            loss.backward()

    def test_backward_non_scalar(self):
        x = Tensor([[1.0, 2.0]], requires_grad=True)
        with pytest.raises(UsageError, match="1x1"):
            T.relu(x).backward()

    def test_backward_without_graph(self):
        with pytest.raises(UsageError):
            tensor([[1.0]]).backward()

    def test_shape_mismatch_reports_both_shapes(self):
        a = tensor(np.zeros((2, 3)))
        b = tensor(np.zeros((4, 2)))
        with pytest.raises(DimensionError) as err:
            T.matmul(a, b)
        assert "(2, 3)" in str(err.value) and "(4, 2)" in str(err.value)
        with pytest.raises(DimensionError) as err:
            T.add(a, b)
        assert "(2, 3)" in str(err.value) and "(4, 2)" in str(err.value)

    def test_non_2d_rejected(self):
        with pytest.raises(DimensionError):
            tensor([1.0, 2.0])

    def test_gather_out_of_range(self):
        table = tensor(np.zeros((4, 2)))
        with pytest.raises(UsageError, match="out of range"):
            T.gather_rows(table, [0, 4])

    def test_nan_detected(self):
        with pytest.raises(NumericalError):
            T.scale(tensor([[1.0]]), float("inf"))
        big = tensor([[1e308]])
        with np.errstate(over="ignore"), pytest.raises(NumericalError):
            T.mul(big, big)


def op_cases(rng):
    """(name, params, make_loss) triples covering every differentiable op."""
    cases = []

    def case(name, params, out_shape, build):
        pay = spender(rng, out_shape)
        cases.append((name, params, lambda: pay(build())))

    a = leaf(rng, 4, 3)
    b = leaf(rng, 3, 5)
    case("matmul", [a, b], (4, 5), lambda: T.matmul(a, b))

    c = leaf(rng, 4, 3)
    d = leaf(rng, 4, 3)
    case("add", [c, d], (4, 3), lambda: T.add(c, d))

    e = leaf(rng, 5, 3)
    row = leaf(rng, 1, 3)
    case("add_broadcast", [e, row], (5, 3), lambda: T.add(e, row))

    f = leaf(rng, 4, 4)
    g = leaf(rng, 4, 4)
    case("mul", [f, g], (4, 4), lambda: T.mul(f, g))

    m = leaf(rng, 4, 3)
    colv = leaf(rng, 4, 1)
    case("mul_colvec", [m, colv], (4, 3), lambda: T.mul(m, colv))

    r = leaf(rng, 4, 4, avoid_zero=True)
    case("relu", [r], (4, 4), lambda: T.relu(r))

    s = leaf(rng, 3, 5)
    case("softmax_rows", [s], (3, 5), lambda: T.softmax_rows(s))

    sc = leaf(rng, 3, 3)
    case("scale", [sc], (3, 3), lambda: T.scale(sc, -1.7))

    sr = leaf(rng, 4, 3)
    factors = rng.uniform(0.5, 2.0, size=4)
    case("scale_rows", [sr], (4, 3), lambda: T.scale_rows(sr, factors))

    mr = leaf(rng, 5, 4)
    case("mean_rows", [mr], (1, 4), lambda: T.mean_rows(mr))

    sa = leaf(rng, 3, 4)
    cases.append(("sum_all", [sa], lambda: T.sum_all(sa)))

    cc1 = leaf(rng, 3, 2)
    cc2 = leaf(rng, 3, 4)
    case("concat_cols", [cc1, cc2], (3, 6), lambda: T.concat_cols(cc1, cc2))

    st1 = leaf(rng, 2, 3)
    st2 = leaf(rng, 4, 3)
    case("stack_rows", [st1, st2], (6, 3), lambda: T.stack_rows([st1, st2]))

    tr = leaf(rng, 3, 5)
    case("transpose", [tr], (5, 3), lambda: T.transpose(tr))

    slr = leaf(rng, 6, 3)
    case("slice_rows", [slr], (3, 3), lambda: T.slice_rows(slr, 1, 4))

    slc = leaf(rng, 3, 6)
    case("slice_cols", [slc], (3, 3), lambda: T.slice_cols(slc, 2, 5))

    gt = leaf(rng, 6, 4)
    ids = [0, 3, 3, 5]
    case("gather_rows", [gt], (4, 4), lambda: T.gather_rows(gt, ids))

    fl = leaf(rng, 3, 4)
    case("flatten_row", [fl], (1, 12), lambda: T.flatten_row(fl))

    ln = leaf(rng, 4, 6)
    gain = leaf(rng, 1, 6, avoid_zero=True)
    bias = leaf(rng, 1, 6)
    case("layernorm_rows", [ln, gain, bias], (4, 6), lambda: T.layernorm_rows(ln, gain, bias))

    return cases


@pytest.mark.parametrize("seed", range(20))
def test_every_op_matches_finite_differences(seed):
    rng = np.random.default_rng(1000 + seed)
    for name, params, make_loss in op_cases(rng):
        make_loss.__name__ = name
        fd_gradient_check(make_loss, params)


class TestSharedAndRepeatedUse:
    def test_tensor_used_twice_accumulates(self):
        rng = np.random.default_rng(7)
        x = leaf(rng, 3, 3)

        def make_loss():
            return T.sum_all(T.add(T.mul(x, x), x))

        fd_gradient_check(make_loss, [x])
        np.testing.assert_allclose(x.grad, 2 * x.data + 1, atol=1e-12)

    def test_shared_projection_matrix(self):
        rng = np.random.default_rng(8)
        w = leaf(rng, 3, 3)
        inp = Tensor(rng.normal(size=(2, 3)))
        pay = spender(rng, (2, 2))

        def make_loss():
            k = T.matmul(inp, w)
            v = T.matmul(inp, w)
            return pay(T.matmul(T.softmax_rows(k), T.transpose(v)))

        fd_gradient_check(make_loss, [w])


finite_rows = arrays(
    np.float64,
    st.tuples(st.integers(1, 5), st.integers(1, 5)),
    elements=st.floats(-50, 50),
)


class TestSoftmaxProperties:
    @given(finite_rows)
    @settings(max_examples=100, deadline=None)
    def test_rows_sum_to_one(self, data):
        out = T.softmax_rows(tensor(data)).data
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
        assert (out > 0).all() and (out <= 1).all()

    @given(finite_rows, st.floats(-100, 100))
    @settings(max_examples=100, deadline=None)
    def test_shift_invariance(self, data, shift):
        base = T.softmax_rows(tensor(data)).data
        shifted = T.softmax_rows(tensor(data + shift)).data
        np.testing.assert_allclose(base, shifted, atol=1e-12)
