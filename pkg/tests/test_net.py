import numpy as np
import pytest

from igasil.net import Mlp, AdamState, adam_step, clip_global_norm, softmax


def finite_diff_param_grads(loss_fn, params, h=1e-5):
    """Central finite differences of loss_fn() w.r.t. every entry of params."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat = p.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def assert_grads_close(analytic, numeric, rel=1e-4):
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        err = np.abs(a - n) / denom
        assert err.max() <= rel, f"max rel grad error {err.max():.3e}"


def make_net(dims, head, seed=0):
    return Mlp(dims, output_head=head, init_rng=np.random.default_rng(seed))


# ---------------------------------------------------------------- forward


def test_forward_zero_net_tanh_is_zero():
    net = Mlp([3, 4, 4, 2], output_head="tanh")
    out, _ = net.forward(np.array([0.3, -1.2, 5.0]))
    assert np.all(out == 0.0)


def test_forward_zero_net_softmax_is_uniform():
    net = Mlp([2, 4, 4, 3], output_head="softmax")
    out, _ = net.forward(np.array([1.0, -1.0]))
    np.testing.assert_allclose(out, [1 / 3, 1 / 3, 1 / 3], rtol=0, atol=1e-15)


def test_forward_hand_evaluated_chain():
    # 1-1-1-1 net, all weights 1, biases 0, relu hidden, linear head: relu(relu(2))*1 = 2
    net = Mlp([1, 1, 1, 1], output_head="linear")
    for w in net.weights:
        w[...] = 1.0
    out, _ = net.forward(np.array([2.0]))
    assert out[0] == pytest.approx(2.0, abs=0)


def test_forward_dimension_mismatch_raises():
    net = make_net([3, 4, 2], "linear")
    with pytest.raises(ValueError):
        net.forward(np.zeros(4))


def test_forward_is_pure():
    net = make_net([5, 8, 8, 3], "softmax", seed=3)
    x = np.random.default_rng(1).normal(size=5)
    a, _ = net.forward(x)
    b, _ = net.forward(x)
    assert np.array_equal(a, b)


def test_batch_forward_matches_vector_forward():
    # gemm vs gemv summation order may differ in the last ulp
    net = make_net([4, 8, 8, 2], "tanh", seed=5)
    xs = np.random.default_rng(2).normal(size=(6, 4))
    batch, _ = net.forward(xs)
    for i in range(6):
        single, _ = net.forward(xs[i])
        np.testing.assert_allclose(batch[i], single, rtol=1e-12, atol=1e-15)


def test_softmax_sums_to_one_for_extreme_logits():
    rng = np.random.default_rng(7)
    for _ in range(200):
        scale = 10 ** rng.uniform(-3, 2.7)
        z = rng.normal(size=rng.integers(2, 9)) * scale
        p = softmax(z)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) <= 1e-12


def test_head_ranges():
    rng = np.random.default_rng(11)
    for head in ("tanh", "sigmoid"):
        net = make_net([3, 8, 8, 2], head, seed=13)
        out, _ = net.forward(rng.normal(size=3) * 10)
        lo, hi = (-1.0, 1.0) if head == "tanh" else (0.0, 1.0)
        assert np.all(out > lo) and np.all(out < hi)


# ---------------------------------------------------------------- backward


def test_backward_zero_out_grad_gives_zero_grads():
    net = make_net([4, 8, 8, 2], "tanh", seed=1)
    out, tape = net.forward(np.ones(4))
    grads = net.backward(tape, np.zeros(2))
    assert all(np.all(g == 0) for g in grads.arrays())


def test_backward_single_linear_weight():
    # one linear layer, no hidden: dL/dw = x when out_grad = 1
    net = Mlp([1, 1], output_head="linear")
    net.weights[0][...] = 0.7
    x = np.array([3.25])
    _, tape = net.forward(x)
    grads = net.backward(tape, np.array([1.0]))
    assert grads.weights[0][0, 0] == pytest.approx(3.25, abs=0)
    assert grads.biases[0][0] == pytest.approx(1.0, abs=0)


def test_backward_tape_reuse_is_error():
    net = make_net([2, 4, 4, 1], "linear", seed=2)
    _, tape = net.forward(np.ones(2))
    net.backward(tape, np.ones(1))
    with pytest.raises(RuntimeError):
        net.backward(tape, np.ones(1))


def test_backward_foreign_tape_is_error():
    a = make_net([2, 4, 4, 1], "linear", seed=2)
    b = make_net([2, 4, 4, 1], "linear", seed=3)
    _, tape = a.forward(np.ones(2))
    with pytest.raises(ValueError):
        b.backward(tape, np.ones(1))


@pytest.mark.parametrize("head", ["linear", "tanh", "sigmoid", "softmax"])
def test_backward_matches_finite_differences(head):
    rng = np.random.default_rng(hash(head) % 2**32)
    for trial in range(5):
        net = make_net([4, 8, 8, 2], head, seed=100 + trial)
        x = rng.normal(size=4)
        gout = rng.normal(size=2)

        def loss():
            y, _ = net.forward(x)
            return float(y @ gout)

        _, tape = net.forward(x)
        analytic = net.backward(tape, gout)
        numeric = finite_diff_param_grads(loss, net.params())
        assert_grads_close(analytic.arrays(), numeric)


def test_input_gradient_matches_finite_differences():
    net = make_net([4, 8, 8, 3], "tanh", seed=42)
    rng = np.random.default_rng(0)
    x = rng.normal(size=4)
    gout = rng.normal(size=3)
    _, tape = net.forward(x)
    din = net.backward(tape, gout).inputs[0]
    h = 1e-6
    for i in range(4):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        up = float(net.forward(xp)[0] @ gout)
        down = float(net.forward(xm)[0] @ gout)
        num = (up - down) / (2 * h)
        assert abs(din[i] - num) / max(abs(num), 1e-6) < 1e-4


# ---------------------------------------------------------------- adam


def test_adam_zero_gradient_keeps_params():
    net = make_net([2, 4, 1], "linear", seed=8)
    params = net.params()
    before = [p.copy() for p in params]
    state = AdamState(params, alpha=0.01)
    adam_step(params, [np.zeros_like(p) for p in params], state)
    assert state.step == 1
    for b, p in zip(before, params):
        assert np.array_equal(b, p)


def test_adam_first_step_hand_computed():
    # beta1=0.9, beta2=0.999, eps=1e-8, g=1, alpha=1e-3
    # m_hat = v_hat = 1 -> delta = -1e-3 / (1 + 1e-8)
    p = [np.array([0.0])]
    state = AdamState(p, alpha=1e-3)
    adam_step(p, [np.array([1.0])], state)
    expected = -1e-3 / (1.0 + 1e-8)
    assert p[0][0] == pytest.approx(expected, rel=1e-12)


def test_adam_constant_gradient_step_magnitude_shrinks():
    p = [np.array([0.0])]
    state = AdamState(p, alpha=1e-3)
    adam_step(p, [np.array([1.0])], state)
    d1 = abs(p[0][0])
    prev = p[0][0]
    adam_step(p, [np.array([1.0])], state)
    d2 = abs(p[0][0] - prev)
    assert d2 <= d1 + 1e-12


def test_adam_rejects_non_finite_gradient():
    p = [np.array([0.0])]
    state = AdamState(p)
    with pytest.raises(FloatingPointError):
        adam_step(p, [np.array([np.nan])], state)


def test_clip_global_norm():
    g = [np.array([3.0, 0.0]), np.array([4.0])]
    norm = clip_global_norm(g, 1.0)
    assert norm == pytest.approx(5.0)
    total = np.sqrt(sum(float((a * a).sum()) for a in g))
    assert total == pytest.approx(1.0)
    g2 = [np.array([0.3])]
    clip_global_norm(g2, 1.0)
    assert g2[0][0] == pytest.approx(0.3, abs=0)


# ---------------------------------------------------------------- save/load


def test_save_load_round_trip(tmp_path):
    net = make_net([4, 8, 8, 3], "softmax", seed=21)
    path = tmp_path / "net.mlp"
    net.save(path)
    loaded = Mlp.load(path)
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = rng.normal(size=4)
        a, _ = net.forward(x)
        b, _ = loaded.forward(x)
        assert np.array_equal(a, b)


def test_load_truncated_file_is_error(tmp_path):
    net = make_net([3, 4, 2], "tanh", seed=1)
    path = tmp_path / "net.mlp"
    net.save(path)
    lines = path.read_text().splitlines()
    (tmp_path / "cut.mlp").write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(ValueError, match="truncated|bias|values"):
        Mlp.load(tmp_path / "cut.mlp")


def test_load_version_mismatch_is_error(tmp_path):
    net = make_net([3, 4, 2], "tanh", seed=1)
    path = tmp_path / "net.mlp"
    net.save(path)
    text = path.read_text().replace("MLPV1", "MLPV9", 1)
    (tmp_path / "v9.mlp").write_text(text)
    with pytest.raises(ValueError, match="version"):
        Mlp.load(tmp_path / "v9.mlp")


def test_load_dimension_header_mismatch_is_error(tmp_path):
    net = make_net([3, 4, 2], "tanh", seed=1)
    path = tmp_path / "net.mlp"
    net.save(path)
    lines = path.read_text().splitlines()
    lines[0] = "MLPV1 3 3 4 7"
    (tmp_path / "bad.mlp").write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError):
        Mlp.load(tmp_path / "bad.mlp")
