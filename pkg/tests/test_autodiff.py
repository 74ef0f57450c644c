import numpy as np
import pytest

from hsdenoise import autodiff as ad

from gradcheck import REL_TOL, max_rel_error

N_SEEDS = 20


def test_conv2d_ones_kernel_sums_window():
    x = ad.constant(np.ones((1, 3, 3)))
    w = ad.constant(np.ones((1, 1, 3, 3)))
    b = ad.constant(np.zeros(1))
    out = ad.conv2d(x, w, b)
    assert out.value.shape == (1, 1, 1)
    assert out.value[0, 0, 0] == 9.0


def test_conv2d_identity_kernel():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1, 4, 4))
    w = np.ones((1, 1, 1, 1))
    out = ad.conv2d(ad.constant(x), ad.constant(w), ad.constant(np.zeros(1)))
    assert np.array_equal(out.value, x)


def test_conv2d_shape_errors():
    x = ad.constant(np.ones((2, 4, 4)))
    w = ad.constant(np.ones((3, 1, 3, 3)))
    with pytest.raises(Exception):
        ad.conv2d(x, w, ad.constant(np.zeros(3)))
    w_big = ad.constant(np.ones((3, 2, 7, 7)))
    with pytest.raises(Exception):
        ad.conv2d(x, w_big, ad.constant(np.zeros(3)))


@pytest.mark.parametrize("seed", range(N_SEEDS))
def test_conv2d_gradients(seed):
    rng = np.random.default_rng(seed)
    store = ad.ParamStore()
    x = store.add("x", rng.standard_normal((2, 5, 5)))
    w = store.add("w", 0.4 * rng.standard_normal((3, 2, 3, 3)))
    b = store.add("b", 0.1 * rng.standard_normal(3))
    proj = rng.standard_normal((3, 3, 3))

    def build():
        return ad.sum_all(ad.mul(ad.conv2d(x, w, b, stride=2, padding=1), proj))

    assert max_rel_error(build, [x, w, b]) < REL_TOL


@pytest.mark.parametrize("seed", range(N_SEEDS))
def test_linear_gradients(seed):
    rng = np.random.default_rng(100 + seed)
    store = ad.ParamStore()
    x = store.add("x", rng.standard_normal(4))
    w = store.add("w", 0.5 * rng.standard_normal((3, 4)))
    b = store.add("b", 0.1 * rng.standard_normal(3))
    proj = rng.standard_normal(3)

    def build():
        return ad.sum_all(ad.mul(ad.linear(x, w, b), proj))

    assert max_rel_error(build, [x, w, b]) < REL_TOL


@pytest.mark.parametrize(
    "name,fn",
    [
        ("relu", ad.relu),
        ("leaky", lambda n: ad.leaky_relu(n, 0.1)),
        ("sigmoid", ad.sigmoid),
        ("softplus", ad.softplus),
    ],
)
@pytest.mark.parametrize("seed", range(N_SEEDS))
def test_pointwise_gradients(name, fn, seed):
    rng = np.random.default_rng(hash(name) % 1000 + seed)
    store = ad.ParamStore()
    # keep inputs away from the relu kink so finite differences are valid
    vals = rng.standard_normal((2, 3, 3))
    vals[np.abs(vals) < 1e-3] = 0.5
    x = store.add("x", vals)
    proj = rng.standard_normal((2, 3, 3))

    def build():
        return ad.sum_all(ad.mul(fn(x), proj))

    assert max_rel_error(build, [x]) < REL_TOL


@pytest.mark.parametrize("seed", range(N_SEEDS))
def test_upsample_concat_norm_gradients(seed):
    rng = np.random.default_rng(300 + seed)
    store = ad.ParamStore()
    a = store.add("a", rng.standard_normal((2, 3, 3)))
    b = store.add("b", rng.standard_normal((1, 6, 6)))
    g = store.add("g", 1.0 + 0.2 * rng.standard_normal(3))
    beta = store.add("beta", 0.1 * rng.standard_normal(3))
    proj = rng.standard_normal((3, 6, 6))

    def build():
        cat = ad.concat_channels(ad.upsample_nearest(a, 2), b)
        return ad.sum_all(ad.mul(ad.channel_norm(cat, g, beta), proj))

    assert max_rel_error(build, [a, b, g, beta]) < REL_TOL


@pytest.mark.parametrize("seed", range(N_SEEDS))
def test_lmm_fit_loss_gradients(seed):
    rng = np.random.default_rng(400 + seed)
    store = ad.ParamStore()
    m0 = store.add("m0", rng.random((3, 4)))
    m1 = store.add("m1", rng.random((3, 4)))
    s0 = store.add("s0", rng.random(5))
    s1 = store.add("s1", rng.random(5))
    target = rng.random((5, 3, 4))

    def build():
        return ad.lmm_fit_loss([m0, m1], [s0, s1], target)

    assert max_rel_error(build, [m0, m1, s0, s1]) < REL_TOL


def test_composed_network_gradient():
    rng = np.random.default_rng(77)
    store = ad.ParamStore()
    w = store.add("w", 0.4 * rng.standard_normal((2, 1, 3, 3)))
    b = store.add("b", 0.1 * rng.standard_normal(2))
    wl = store.add("wl", 0.3 * rng.standard_normal((3, 2 * 4 * 4)))
    bl = store.add("bl", 0.05 * rng.standard_normal(3))
    x = rng.standard_normal((1, 4, 4))

    def build():
        h = ad.relu(ad.conv2d(ad.constant(x), w, b, padding=1))
        h = ad.reshape(h, (2 * 4 * 4,))
        return ad.sum_all(ad.linear(h, wl, bl))

    assert max_rel_error(build, [w, b, wl, bl]) < REL_TOL


def test_pointwise_values():
    assert ad.sigmoid(ad.constant(0.0)).value == 0.5
    assert ad.softplus(ad.constant(0.0)).value == pytest.approx(np.log(2), rel=1e-15)
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    up = ad.upsample_nearest(ad.constant(x[None]), 2).value[0]
    expected = np.array(
        [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]], dtype=float
    )
    assert np.array_equal(up, expected)


def test_leaky_relu_slope_one_is_identity():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((2, 3, 3))
    out = ad.leaky_relu(ad.constant(x), 1.0)
    assert np.array_equal(out.value, x)


def test_sigmoid_strictly_inside_unit_interval():
    x = np.array([-50.0, -1.0, 0.0, 1.0, 50.0, 800.0, -800.0])
    y = ad.sigmoid(ad.constant(x)).value
    assert np.all(y > 0.0) and np.all(y < 1.0)


def test_relu_subgradient_zero_at_zero():
    store = ad.ParamStore()
    x = store.add("x", np.array([0.0, -1.0, 2.0]))
    out = ad.sum_all(ad.relu(x))
    ad.backward(out)
    assert np.array_equal(x.grad, [0.0, 0.0, 1.0])


def test_backward_single_parameter():
    store = ad.ParamStore()
    p = store.add("p", np.array(5.0))
    out = ad.sum_all(p)
    ad.backward(out)
    assert p.grad == 1.0


def test_backward_square():
    store = ad.ParamStore()
    p = store.add("p", np.array(3.0))
    out = ad.mul(p, p)
    ad.backward(out)
    assert p.grad == pytest.approx(6.0, abs=1e-14)


def test_backward_rejects_nonscalar():
    store = ad.ParamStore()
    p = store.add("p", np.ones(3))
    with pytest.raises(ValueError):
        ad.backward(ad.relu(p))


def test_forward_backward_deterministic():
    def run_once():
        rng = np.random.default_rng(1234)
        store = ad.ParamStore()
        w = store.add("w", rng.standard_normal((2, 1, 3, 3)))
        b = store.add("b", rng.standard_normal(2))
        x = rng.standard_normal((1, 4, 4))
        out = ad.sum_all(ad.sigmoid(ad.conv2d(ad.constant(x), w, b, padding=1)))
        ad.backward(out)
        return out.value.tobytes(), w.grad.tobytes(), b.grad.tobytes()

    assert run_once() == run_once()


def _reference_adam(grads, lr, beta1=0.9, beta2=0.999, eps=1e-8, p0=0.0):
    """Scalar Adam recurrence written independently of the engine."""
    p, m, v = p0, 0.0, 0.0
    trajectory = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        p = p - lr * mhat / (np.sqrt(vhat) + eps)
        trajectory.append(p)
    return trajectory


def test_adam_first_step_magnitude():
    for g0 in (3.0, -0.2, 1e-3):
        store = ad.ParamStore()
        p = store.add("p", np.array(1.0))
        out = ad.mul(p, g0)  # gradient is exactly g0
        ad.backward(out)
        before = float(p.value)
        ad.adam_step(store, lr=0.01)
        delta = float(p.value) - before
        assert abs(abs(delta) - 0.01) < 1e-9
        assert np.sign(delta) == -np.sign(g0)


def test_adam_zero_gradient_leaves_parameter():
    store = ad.ParamStore()
    p = store.add("p", np.array(2.5))
    p.grad = np.zeros(())
    ad.adam_step(store, lr=0.1)
    assert float(p.value) == 2.5


def test_adam_quadratic_convergence_matches_reference():
    store = ad.ParamStore()
    p = store.add("p", np.array(0.0))
    grads = []
    trajectory = []
    for _ in range(200):
        out = ad.mul(ad.sub(p, 2.0), ad.sub(p, 2.0))
        ad.backward(out)
        grads.append(float(p.grad))
        ad.adam_step(store, lr=0.1)
        trajectory.append(float(p.value))
    reference = _reference_adam(grads, lr=0.1)
    assert np.allclose(trajectory, reference, rtol=1e-12, atol=1e-12)
    assert abs(float(p.value) - 2.0) < 0.05


def test_adam_zeroes_gradients_after_step():
    store = ad.ParamStore()
    p = store.add("p", np.array(1.0))
    out = ad.mul(p, p)
    ad.backward(out)
    ad.adam_step(store, lr=0.01)
    assert p.grad is None


def test_param_store_basics():
    store = ad.ParamStore()
    store.add("a", np.ones((2, 3)))
    store.add("b", np.ones(4))
    assert ad.param_count(store) == 10
    assert store.names() == ["a", "b"]
    with pytest.raises(ValueError):
        store.add("a", np.ones(1))
    empty = ad.ParamStore()
    assert ad.param_count(empty) == 0
