import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from narcast import _kernels
from narcast.network import (Activation, ModelFormatError, NarNetwork, NormParams, dumps,
                             forward, init_network, load, loads, minmax_normalize,
                             parameter_gradient, save)


def central_difference(net, lags, target, step=1e-6):
    """Oracle: numeric gradient of 0.5 * (f - target)^2, one parameter at a time."""
    theta = net.parameters()
    g = np.empty_like(theta)
    for i in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[i] += step
        dn[i] -= step
        fu = forward(net.with_parameters(up), lags)
        fd = forward(net.with_parameters(dn), lags)
        g[i] = (0.5 * (fu - target) ** 2 - 0.5 * (fd - target) ** 2) / (2 * step)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


def random_net(rng, d, h, hid=Activation.TANH, out=Activation.LINEAR, scale=1.0):
    return NarNetwork(
        input_weights=rng.normal(0, scale, (h, d)),
        hidden_biases=rng.normal(0, scale, h),
        output_weights=rng.normal(0, scale, h),
        output_bias=rng.normal(0, scale),
        hidden_activation=hid,
        output_activation=out,
    )


def test_init_is_deterministic():
    a, b = init_network(10, 10, seed=7), init_network(10, 10, seed=7)
    assert np.array_equal(a.parameters(), b.parameters())


def test_init_parameter_count():
    net = init_network(10, 10, seed=0)
    assert net.n_params == 121
    assert net.parameters().shape == (121,)
    assert net.hidden_activation is Activation.TANH
    assert net.output_activation is Activation.LINEAR


def test_init_seeds_differ():
    assert not np.array_equal(init_network(10, 10, 1).parameters(),
                              init_network(10, 10, 2).parameters())


def test_init_range():
    theta = init_network(10, 10, seed=3).parameters()
    assert theta.min() >= -0.5 and theta.max() <= 0.5


@pytest.mark.parametrize("d, h", [(0, 10), (10, 0), (-1, 1)])
def test_init_rejects_nonpositive(d, h):
    with pytest.raises(ValueError):
        init_network(d, h, seed=0)


def test_forward_zero_network(backend):
    net = NarNetwork(np.zeros((10, 10)), np.zeros(10), np.zeros(10), 0.0)
    assert forward(net, np.linspace(-1, 1, 10)) == 0.0


def test_forward_scalar(backend):
    net = NarNetwork([[1.0]], [0.0], [1.0], 0.0)
    assert forward(net, [0.5]) == pytest.approx(math.tanh(0.5), abs=1e-15)
    assert forward(net, [0.5]) == pytest.approx(0.462117, abs=1e-6)


def test_unit_step_hidden(backend):
    net = NarNetwork([[1.0]], [0.0], [1.0], 0.0, hidden_activation=Activation.STEP)
    assert forward(net, [-0.1]) == 0.0
    assert forward(net, [0.1]) == 1.0
    assert forward(net, [0.0]) == 1.0


def test_step_activation_values():
    out = Activation.STEP(np.array([-2.0, -1e-12, 0.0, 3.0]))
    assert out.tolist() == [0.0, 0.0, 1.0, 1.0]


def test_forward_errors():
    net = init_network(3, 2, seed=0)
    with pytest.raises(ValueError):
        forward(net, [0.1, 0.2])
    with pytest.raises(ValueError):
        forward(net, [0.1, np.nan, 0.2])


def test_forward_matches_formula(backend, rng):
    net = random_net(rng, 5, 4)
    x = rng.uniform(-1, 1, 5)
    W, b, v, c = net.input_weights, net.hidden_biases, net.output_weights, net.output_bias
    expected = sum(v[k] * math.tanh(sum(W[k, j] * x[j] for j in range(5)) + b[k]) for k in range(4)) + c
    assert forward(net, x) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("hid, out", [
    (Activation.TANH, Activation.LINEAR),
    (Activation.TANH, Activation.TANH),
    (Activation.LINEAR, Activation.LINEAR),
    (Activation.LINEAR, Activation.TANH),
])
def test_gradient_vs_finite_differences(backend, hid, out):
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(100):
        d, h = rng.integers(1, 11, size=2)
        net = random_net(rng, d, h, hid, out, scale=0.5)
        lags = rng.uniform(-1, 1, d)
        target = rng.uniform(-1, 1)
        worst = max(worst, rel_err(parameter_gradient(net, lags, target),
                                   central_difference(net, lags, target)))
    assert worst < 1e-6


def test_gradient_zero_output_weights(backend, rng):
    net = random_net(rng, 4, 3).with_parameters(
        np.concatenate([rng.normal(size=12 + 3), np.zeros(3), [0.3]]))
    g = parameter_gradient(net, rng.uniform(-1, 1, 4), 0.7)
    assert np.all(g[:15] == 0)


def test_gradient_linear_closed_form(backend, rng):
    net = random_net(rng, 3, 2, Activation.LINEAR, Activation.LINEAR)
    x = rng.uniform(-1, 1, 3)
    t = 0.25
    W, b, v, c = net.input_weights, net.hidden_biases, net.output_weights, net.output_bias
    hidden = W @ x + b
    e = v @ hidden + c - t
    expected = np.concatenate([(e * np.outer(v, x)).ravel(), e * v, e * hidden, [e]])
    np.testing.assert_allclose(parameter_gradient(net, x, t), expected, rtol=1e-13, atol=1e-15)


def test_gradient_rejects_step():
    net = NarNetwork([[1.0]], [0.0], [1.0], 0.0, hidden_activation=Activation.STEP)
    with pytest.raises(ValueError, match="unit-step"):
        parameter_gradient(net, [0.1], 0.0)


def test_single_linear_neuron_is_affine_ar(backend, rng):
    for _ in range(20):
        d = int(rng.integers(1, 12))
        net = random_net(rng, d, 1, Activation.LINEAR, Activation.LINEAR)
        x = rng.normal(size=d)
        coef = net.output_weights[0] * net.input_weights[0]
        intercept = net.output_weights[0] * net.hidden_biases[0] + net.output_bias
        assert forward(net, x) == pytest.approx(float(np.dot(coef, x) + intercept), rel=1e-12, abs=1e-12)


@given(st.integers(1, 10), st.integers(1, 10), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_forward_bounded_with_tanh_hidden(d, h, seed):
    rng = np.random.default_rng(seed)
    net = random_net(rng, d, h, scale=3.0)
    X = rng.uniform(-50, 50, (20, d))
    bound = np.abs(net.output_weights).sum() + abs(net.output_bias)
    assert np.all(np.abs(net.predict(X)) <= bound + 1e-12)


def test_backends_agree(rng):
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    for hid, out in [(0, 1), (0, 0), (1, 1), (2, 1)]:
        W, b, v = rng.normal(size=(7, 5)), rng.normal(size=7), rng.normal(size=7)
        c = 0.3
        X = rng.uniform(-1, 1, (40, 5))
        np.testing.assert_allclose(_kernels.forward_batch_numba(W, b, v, c, X, hid, out),
                                   _kernels.forward_batch_numpy(W, b, v, c, X, hid, out),
                                   rtol=1e-12, atol=1e-12)
        if hid != 2:
            y1, J1 = _kernels.jacobian_numba(W, b, v, c, X, hid, out)
            y2, J2 = _kernels.jacobian_numpy(W, b, v, c, X, hid, out)
            np.testing.assert_allclose(y1, y2, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(J1, J2, rtol=1e-12, atol=1e-12)
        win = rng.uniform(10, 50, 5)
        np.testing.assert_allclose(_kernels.rollout_numba(W, b, v, c, hid, out, win, 30, 5.0, 60.0),
                                   _kernels.rollout_numpy(W, b, v, c, hid, out, win, 30, 5.0, 60.0),
                                   rtol=1e-10, atol=1e-10)


# --- normalization ---------------------------------------------------------------

def test_minmax_simple():
    scaled, p = minmax_normalize([0, 50, 100])
    assert scaled.tolist() == [-1.0, 0.0, 1.0]
    assert (p.raw_min, p.raw_max) == (0.0, 100.0)


def test_minmax_constant():
    with pytest.raises(ValueError, match="degenerate"):
        minmax_normalize([7, 7, 7])


def test_minmax_roundtrip_weekly(bundled):
    from narcast.resample import monthly_to_weekly
    w = monthly_to_weekly(bundled).values
    scaled, p = minmax_normalize(w)
    assert scaled.min() == -1.0 and scaled.max() == 1.0
    assert np.max(np.abs(p.denormalize(scaled) - w)) <= 1e-12 * np.max(np.abs(w))


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=50).filter(lambda v: max(v) - min(v) > 1e-3))
def test_minmax_inverse(values):
    scaled, p = minmax_normalize(values)
    back = p.denormalize(scaled)
    scale = max(1.0, max(abs(x) for x in values))
    assert np.max(np.abs(back - np.asarray(values))) <= 1e-12 * scale * 4


def test_norm_params_invalid():
    with pytest.raises(ValueError):
        NormParams(1.0, 1.0)
    with pytest.raises(ValueError):
        NormParams(2.0, 1.0)


# --- persistence -------------------------------------------------------------------

def test_save_load_identical_outputs(tmp_path, rng):
    net = random_net(rng, 10, 10).with_norm(NormParams(30.03, 348.8))
    path = tmp_path / "model.json"
    save(net, path)
    back = load(path)
    X = rng.uniform(-1, 1, (1000, 10))
    assert np.array_equal(net.predict(X), back.predict(X))
    assert back.norm == net.norm
    assert back.hidden_activation is net.hidden_activation


def test_document_fields(rng):
    doc = json.loads(dumps(init_network(3, 2, seed=0)))
    assert set(doc) == {"version", "delays", "hidden", "input_weights", "hidden_biases",
                        "output_weights", "output_bias", "hidden_activation",
                        "output_activation", "norm"}
    assert doc["version"] == 1
    assert len(doc["input_weights"]) == 6
    assert set(doc["norm"]) == {"raw_min", "raw_max"}


def test_truncated_document():
    text = dumps(init_network(3, 2, seed=0))
    with pytest.raises(ModelFormatError):
        loads(text[: len(text) // 2])


def test_unknown_version():
    doc = json.loads(dumps(init_network(3, 2, seed=0)))
    doc["version"] = 2
    with pytest.raises(ModelFormatError, match="version"):
        loads(json.dumps(doc))


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("hidden_biases"),
    lambda d: d.__setitem__("input_weights", [1.0]),
    lambda d: d.__setitem__("hidden_activation", "relu"),
    lambda d: d["norm"].__setitem__("raw_max", d["norm"]["raw_min"]),
])
def test_malformed_documents(mutate):
    doc = json.loads(dumps(init_network(3, 2, seed=0)))
    mutate(doc)
    with pytest.raises(ModelFormatError):
        loads(json.dumps(doc))


def test_missing_model_file(tmp_path):
    with pytest.raises(ModelFormatError):
        load(tmp_path / "nope.json")


def test_network_is_immutable():
    net = init_network(2, 2, seed=0)
    with pytest.raises(ValueError):
        net.input_weights[0, 0] = 1.0


@pytest.mark.parametrize("flag, expected", [("1", "numpy"), ("0", "numba")])
def test_backend_env_flag(flag, expected):
    import os
    import subprocess
    import sys
    if expected == "numba" and not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    env = dict(os.environ, NARCAST_DISABLE_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", "from narcast import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert res.stdout.strip() == expected
