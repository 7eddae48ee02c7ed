"""Primitive forward/backward contracts of the tensor core."""

import numpy as np
import pytest

from prosynth import tensor as T
from prosynth.tensor import NumericError, ShapeError, TapeError, Tensor


def numeric_grad(f, x, h=1e-6):
    """Central differences of a scalar-valued f at ndarray x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    with T.no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            gf[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6))


# ---------------------------------------------------------------------------
# Forward values
# ---------------------------------------------------------------------------


def test_softmax_uniform_logits():
    out = T.softmax(Tensor([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(out.data, [1/3, 1/3, 1/3], atol=1e-15)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(0)
    out = T.softmax(Tensor(rng.normal(size=(7, 11)) * 10), axis=-1)
    assert np.all(out.data >= 0)
    np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-9)


def test_layer_norm_constant_vector_maps_to_zero():
    out = T.layer_norm(Tensor([5.0, 5.0, 5.0]))
    np.testing.assert_allclose(out.data, [0.0, 0.0, 0.0], atol=1e-15)


def test_layer_norm_moments():
    rng = np.random.default_rng(1)
    out = T.layer_norm(Tensor(rng.normal(size=(10, 32))))
    assert np.all(np.abs(out.data.mean(axis=-1)) <= 1e-7)
    assert np.all(np.abs(out.data.var(axis=-1) - 1.0) <= 1e-6)


def test_mean_pool_identical_rows():
    row = np.array([1.5, -2.0, 0.25])
    out = T.mean_pool(Tensor(np.tile(row, (6, 1))))
    np.testing.assert_allclose(out.data, row, atol=1e-15)


def conv1d_naive(x, w, b=None):
    """Direct O(T * k) loop with zero same-padding; the conv oracle."""
    t, _ = x.shape
    k, _, c_out = w.shape
    left = (k - 1) // 2
    out = np.zeros((t, c_out))
    for i in range(t):
        for j in range(k):
            src = i + j - left
            if 0 <= src < t:
                out[i] += x[src] @ w[j]
    if b is not None:
        out += b
    return out


def test_conv1d_ramp_fixed_kernel():
    # 3-tap kernel [1, 2, 3] over the ramp [0..4]; expected values frozen
    # from the direct-convolution oracle.
    x = np.arange(5.0).reshape(5, 1)
    w = np.array([1.0, 2.0, 3.0]).reshape(3, 1, 1)
    out = T.conv1d(Tensor(x), Tensor(w))
    np.testing.assert_allclose(out.data.ravel(), [3.0, 8.0, 14.0, 20.0, 11.0], atol=1e-12)
    np.testing.assert_allclose(out.data, conv1d_naive(x, w), atol=1e-12)


def test_conv1d_matches_naive_oracle_random():
    rng = np.random.default_rng(2)
    for k in (1, 3, 5):
        x = rng.normal(size=(9, 4))
        w = rng.normal(size=(k, 4, 6))
        b = rng.normal(size=6)
        out = T.conv1d(Tensor(x), Tensor(w), Tensor(b))
        np.testing.assert_allclose(out.data, conv1d_naive(x, w, b), atol=1e-12)


def test_concat_then_split_roundtrip_bit_exact():
    rng = np.random.default_rng(3)
    parts = [rng.normal(size=(4, d)) for d in (2, 5, 3)]
    joined = T.concat([Tensor(p) for p in parts], axis=1)
    offset = 0
    for p in parts:
        back = T.narrow(joined, 1, offset, p.shape[1])
        assert back.data.tobytes() == p.tobytes()
        offset += p.shape[1]


def test_embed_lookup_and_oov():
    table = Tensor(np.arange(12.0).reshape(4, 3))
    out = T.embed_lookup(table, [1, 3, 1])
    np.testing.assert_allclose(out.data, table.data[[1, 3, 1]])
    with pytest.raises(ShapeError, match="position 1"):
        T.embed_lookup(table, [0, 9])


def test_shape_errors_name_op_and_shapes():
    with pytest.raises(ShapeError, match="matmul"):
        T.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))
    with pytest.raises(ShapeError, match="conv1d"):
        T.conv1d(Tensor(np.zeros((4, 3))), Tensor(np.zeros((3, 5, 2))))


def test_non_finite_output_raises():
    with pytest.raises(NumericError):
        T.log(Tensor([0.0]))
    with pytest.raises(NumericError):
        T.div(Tensor([1.0]), Tensor([0.0]))


def test_dropout_off_is_identity_and_on_is_seeded():
    x = Tensor(np.ones((50, 4)))
    assert T.dropout(x, 0.5, np.random.default_rng(0), training=False) is x
    a = T.dropout(x, 0.5, np.random.default_rng(7)).data
    b = T.dropout(x, 0.5, np.random.default_rng(7)).data
    np.testing.assert_array_equal(a, b)
    assert set(np.unique(a)) == {0.0, 2.0}  # inverted scaling


# ---------------------------------------------------------------------------
# Backward contracts
# ---------------------------------------------------------------------------


def test_linear_loss_gradient():
    # loss = sum(w * x) with x constant -> grad(w) = x
    x = np.array([1.0, -2.0, 3.0])
    w = Tensor(np.array([0.5, 0.5, 0.5]), requires_grad=True)
    loss = (w * Tensor(x)).sum()
    loss.backward()
    np.testing.assert_allclose(w.grad, x, atol=1e-15)


def test_detached_parameter_gets_zero_grad():
    w = Tensor(np.ones(3), requires_grad=True)
    unused = Tensor(np.ones(3), requires_grad=True)
    loss = (w * w).sum()
    loss.backward()
    np.testing.assert_array_equal(unused.grad, np.zeros(3))


def test_backward_accumulates_until_reset():
    w = Tensor(np.array([2.0]), requires_grad=True)
    (w * w).sum().backward()
    (w * w).sum().backward()
    np.testing.assert_allclose(w.grad, [8.0])  # 4 + 4
    w.zero_grad()
    np.testing.assert_allclose(w.grad, [0.0])


def test_backward_rejects_non_scalar_and_consumed_tape():
    w = Tensor(np.ones((2, 2)), requires_grad=True)
    y = w * 2.0
    with pytest.raises(TapeError, match="scalar"):
        y.backward()
    loss = y.sum()
    loss.backward()
    with pytest.raises(TapeError, match="consumed"):
        loss.backward()


def test_softmax_layer_norm_chain_matches_finite_differences():
    rng = np.random.default_rng(4)
    x = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
    tgt = rng.normal(size=(3, 5))

    def forward():
        out = T.layer_norm(T.softmax(x, axis=-1) * 3.0 + 0.1)
        return float(np.sum((out.data - tgt) ** 2))

    out = T.layer_norm(T.softmax(x, axis=-1) * 3.0 + 0.1)
    diff = out - Tensor(tgt)
    (diff * diff).sum().backward()
    num = numeric_grad(forward, x.data, h=1e-6)
    assert rel_err(x.grad, num) < 1e-7


def every_primitive_cases():
    rng = np.random.default_rng(5)
    a34 = rng.normal(size=(3, 4))
    b34 = rng.normal(size=(3, 4)) + 3.0   # keep away from 0 for div/log
    m45 = rng.normal(size=(4, 5))
    pos = np.abs(rng.normal(size=(3, 4))) + 0.5
    far = rng.normal(size=(3, 4)) * 2.0
    far[np.abs(far) < 0.2] = 0.7          # keep relu kink away from FD probes
    cases = [
        ("add", lambda t: T.add(t, Tensor(b34)), a34),
        ("sub", lambda t: T.sub(Tensor(b34), t), a34),
        ("mul", lambda t: T.mul(t, Tensor(b34)), a34),
        ("div", lambda t: T.div(t, Tensor(b34)), a34),
        ("div_denom", lambda t: T.div(Tensor(a34), t), b34),
        ("neg", T.neg, a34),
        ("matmul", lambda t: T.matmul(t, Tensor(m45)), a34),
        ("matmul_rhs", lambda t: T.matmul(Tensor(a34), t), m45),
        ("transpose", T.transpose, a34),
        ("reshape", lambda t: T.reshape(t, (2, 6)), a34),
        ("concat", lambda t: T.concat([t, Tensor(b34)], axis=0), a34),
        ("narrow", lambda t: T.narrow(t, 1, 1, 2), a34),
        ("sum", lambda t: T.tensor_sum(t, axis=0), a34),
        ("mean", lambda t: T.tensor_mean(t, axis=1), a34),
        ("mean_pool", T.mean_pool, a34),
        ("relu", T.relu, far),
        ("tanh", T.tanh, a34),
        ("sigmoid", T.sigmoid, a34),
        ("softplus", T.softplus, a34),
        ("exp", T.exp, a34),
        ("log", T.log, pos),
        ("softmax", lambda t: T.softmax(t, axis=-1), a34),
        ("layer_norm", T.layer_norm, a34),
        ("conv1d", lambda t: T.conv1d(t, Tensor(rng_w), Tensor(rng_b)), a34),
        ("conv1d_w", lambda t: T.conv1d(Tensor(a34), t, Tensor(rng_b)), None),
        ("embed", lambda t: T.embed_lookup(t, [0, 2, 1, 2]), None),
    ]
    return cases


rng_w = np.random.default_rng(6).normal(size=(3, 4, 5))
rng_b = np.random.default_rng(7).normal(size=5)


@pytest.mark.parametrize("name,op,base", every_primitive_cases(),
                         ids=[c[0] for c in every_primitive_cases()])
def test_every_primitive_matches_central_differences(name, op, base):
    # Spec-level bar: 1e-4 relative at h=1e-4 in double precision.
    rng = np.random.default_rng(8)
    if name == "conv1d_w":
        base = rng.normal(size=(3, 4, 5))
    elif name == "embed":
        base = rng.normal(size=(3, 6))
    x = Tensor(base.copy(), requires_grad=True)
    mix = None  # fixed random weighting so the scalarized loss is not symmetric

    def build(t):
        out = op(t)
        nonlocal mix
        if mix is None:
            mix = np.random.default_rng(9).normal(size=out.data.shape)
        return (out * Tensor(mix)).sum()

    build(x).backward()

    def forward():
        return build(Tensor(x.data)).item()

    num = numeric_grad(forward, x.data, h=1e-4)
    assert rel_err(x.grad, num) < 1e-4, name


def test_tensor_invariants():
    t = Tensor(np.zeros((2, 3)), requires_grad=True)
    assert t.data.size == int(np.prod(t.shape))
    assert t.grad.shape == t.data.shape
    with pytest.raises(NumericError):
        Tensor([np.nan])
