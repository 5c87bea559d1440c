import numpy as np
import pytest

from platoonsc.nets import Adam, Mlp, flatten_grads, soft_update


def fd_param_grads(net, x, upstream, eps=1e-6):
    """Central finite differences of sum(output * upstream) per parameter."""
    out = []
    for p in net.parameters():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + eps
            hi = float(np.sum(net.forward(x) * upstream))
            p[idx] = orig - eps
            lo = float(np.sum(net.forward(x) * upstream))
            p[idx] = orig
            g[idx] = (hi - lo) / (2 * eps)
            it.iternext()
        out.append(g)
    return out


def fd_input_grad(net, x, upstream, eps=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp.flat[i] += eps
        xm.flat[i] -= eps
        hi = float(np.sum(net.forward(xp) * upstream))
        lo = float(np.sum(net.forward(xm) * upstream))
        g.flat[i] = (hi - lo) / (2 * eps)
    return g


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-8)


# forward ------------------------------------------------------------------

def test_forward_zero_params_zero_output():
    net = Mlp((4, 3, 2), "identity", np.random.default_rng(0))
    for p in net.parameters():
        p[...] = 0.0
    assert np.array_equal(net.forward(np.ones(4)), np.zeros(2))


def test_forward_single_linear_identity():
    net = Mlp((3, 3), "identity", np.random.default_rng(0))
    net.weights[0][...] = np.eye(3)
    net.biases[0][...] = 0.0
    x = np.array([0.3, -1.2, 2.0])
    assert np.allclose(net.forward(x), x)


def test_forward_deterministic_and_batched():
    a = Mlp((5, 8, 2), "tanh", np.random.default_rng(42))
    b = Mlp((5, 8, 2), "tanh", np.random.default_rng(42))
    x = np.random.default_rng(1).normal(size=5)
    assert np.max(np.abs(a.forward(x) - b.forward(x))) < 1e-12
    batch = np.random.default_rng(2).normal(size=(7, 5))
    ys = a.forward(batch)
    assert ys.shape == (7, 2)
    assert np.allclose(ys[3], a.forward(batch[3]))
    assert np.all(np.abs(ys) <= 1.0)  # tanh head stays in the box


def test_forward_shape_errors():
    net = Mlp((4, 2), "identity", np.random.default_rng(0))
    with pytest.raises(ValueError):
        net.forward(np.ones(5))


# gradients -------------------------------------------------------------------

@pytest.mark.parametrize("out_act", ["identity", "tanh"])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradients_match_finite_differences(out_act, seed):
    rng = np.random.default_rng(seed)
    net = Mlp((6, 8, 5, 3), out_act, rng)
    x = rng.normal(size=(4, 6))
    upstream = rng.normal(size=(4, 3))
    _, cache = net.forward_cached(x)
    grads, dx = net.backward(cache, upstream)
    flat = flatten_grads(grads)
    fd = fd_param_grads(net, x, upstream)
    for got, want in zip(flat, fd):
        assert rel_err(got, want) <= 1e-4
    assert rel_err(dx, fd_input_grad(net, x, upstream)) <= 1e-4


def test_zero_upstream_zero_gradients():
    net = Mlp((4, 6, 2), "identity", np.random.default_rng(3))
    x = np.random.default_rng(4).normal(size=(2, 4))
    _, cache = net.forward_cached(x)
    grads, dx = net.backward(cache, np.zeros((2, 2)))
    assert all(np.all(gw == 0) and np.all(gb == 0) for gw, gb in grads)
    assert np.all(dx == 0)


def test_linear_net_input_gradient_exact():
    net = Mlp((3, 2), "identity", np.random.default_rng(5))
    x = np.array([[1.0, -2.0, 0.5]])
    upstream = np.array([[0.7, -1.3]])
    _, cache = net.forward_cached(x)
    _, dx = net.backward(cache, upstream)
    assert np.allclose(dx, upstream @ net.weights[0].T, atol=1e-14)


# soft update / optimiser --------------------------------------------------------

def test_soft_update_copy_and_arithmetic():
    rng = np.random.default_rng(6)
    main = Mlp((3, 4, 2), "identity", rng)
    target = Mlp((3, 4, 2), "identity", rng)
    soft_update(target, main, tau=1.0)
    for t, m in zip(target.parameters(), main.parameters()):
        assert np.array_equal(t, m)

    main.weights[0][...] = 1.0
    target.weights[0][...] = 0.0
    soft_update(target, main, tau=0.005)
    assert np.allclose(target.weights[0], 0.005)
    with pytest.raises(ValueError):
        soft_update(target, main, 0.0)


def test_soft_update_geometric_convergence():
    rng = np.random.default_rng(7)
    main = Mlp((2, 2), "identity", rng)
    target = Mlp((2, 2), "identity", rng)
    prev_gap = None
    for _ in range(200):
        soft_update(target, main, 0.05)
        gap = max(np.max(np.abs(t - m)) for t, m in
                  zip(target.parameters(), main.parameters()))
        if prev_gap is not None:
            assert gap <= prev_gap * (1 - 0.05) + 1e-15
        prev_gap = gap
    assert prev_gap < 1e-4


def test_adam_zero_lr_is_identity():
    net = Mlp((3, 3, 1), "identity", np.random.default_rng(8))
    before = [p.copy() for p in net.parameters()]
    opt = Adam(net.parameters(), lr=0.0)
    grads = [np.ones_like(p) for p in net.parameters()]
    for _ in range(5):
        opt.step(net.parameters(), grads)
    for p, b in zip(net.parameters(), before):
        assert np.array_equal(p, b)


def test_adam_descends_quadratic():
    # minimise 0.5*||p||^2: gradient is p itself
    p = [np.array([5.0, -3.0])]
    opt = Adam(p, lr=0.1)
    for _ in range(500):
        opt.step(p, [p[0].copy()])
    assert np.max(np.abs(p[0])) < 1e-2


def test_final_scale_shrinks_output_layer():
    rng = np.random.default_rng(9)
    net = Mlp((4, 16, 2), "tanh", rng, final_scale=0.01)
    assert np.max(np.abs(net.weights[-1])) <= 0.01 / np.sqrt(16)
    assert np.max(np.abs(net.weights[0])) > 0.01  # hidden layers unscaled
