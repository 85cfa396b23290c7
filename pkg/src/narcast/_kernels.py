"""Inner loops of the NAR network: batched forward pass, per-sample Jacobian
and the closed-loop rollout.

Two implementations share one signature. The numba versions are used when
numba imports and ``NARCAST_DISABLE_NUMBA`` is unset (or "0"); otherwise the
numpy versions are bound. Both are exported under explicit names so tests and
the benchmark can compare them directly.

Activation codes: 0 = tanh, 1 = linear, 2 = unit step.
"""

import math
import os

import numpy as np

TANH, LINEAR, STEP = 0, 1, 2


# --- numpy -------------------------------------------------------------------

def _act_np(a, kind):
    if kind == TANH:
        return np.tanh(a)
    if kind == LINEAR:
        return a.astype(np.float64, copy=True)
    return (a >= 0.0).astype(np.float64)


def _dact_np(fa, kind):
    if kind == TANH:
        return 1.0 - fa * fa
    return np.ones_like(fa)


def forward_batch_numpy(W, b, v, c, X, hid, out):
    A = X @ W.T + b
    Z = _act_np(A, hid)
    return _act_np(Z @ v + c, out)


def jacobian_numpy(W, b, v, c, X, hid, out):
    """Outputs and d(output)/d(params) for each row of ``X``.

    Parameter order: input weights (row-major h x d), hidden biases,
    output weights, output bias.
    """
    n = X.shape[0]
    A = X @ W.T + b
    Z = _act_np(A, hid)
    y = _act_np(Z @ v + c, out)
    dy = _dact_np(y, out)
    gb = dy[:, None] * v[None, :] * _dact_np(Z, hid)
    gW = gb[:, :, None] * X[:, None, :]
    J = np.concatenate(
        [gW.reshape(n, -1), gb, dy[:, None] * Z, dy[:, None]], axis=1
    )
    return y, J


def rollout_numpy(W, b, v, c, hid, out, window, steps, lo, hi):
    d = window.shape[0]
    span = hi - lo
    buf = np.empty(d + steps)
    buf[:d] = window
    for t in range(steps):
        x = 2.0 * (buf[t:t + d] - lo) / span - 1.0
        z = _act_np(W @ x + b, hid)
        y = _act_np(np.array([z @ v + c]), out)[0]
        raw = (y + 1.0) * 0.5 * span + lo
        if raw < 0.0:
            raw = 0.0
        buf[d + t] = raw
    return buf[d:].copy()


# --- numba -------------------------------------------------------------------

# Defined at module level (not as closures) so cache=True can reuse the
# compiled code across processes.
try:
    import numba
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)

    @_jit
    def _act_nb(a, kind):
        if kind == 0:
            return math.tanh(a)
        if kind == 1:
            return a
        return 1.0 if a >= 0.0 else 0.0

    @_jit
    def forward_batch_numba(W, b, v, c, X, hid, out):
        n, d = X.shape
        h = W.shape[0]
        y = np.empty(n)
        for i in range(n):
            o = c
            for k in range(h):
                a = b[k]
                for j in range(d):
                    a += W[k, j] * X[i, j]
                o += v[k] * _act_nb(a, hid)
            y[i] = _act_nb(o, out)
        return y

    @_jit
    def jacobian_numba(W, b, v, c, X, hid, out):
        n, d = X.shape
        h = W.shape[0]
        p = h * d + 2 * h + 1
        y = np.empty(n)
        J = np.empty((n, p))
        z = np.empty(h)
        for i in range(n):
            o = c
            for k in range(h):
                a = b[k]
                for j in range(d):
                    a += W[k, j] * X[i, j]
                z[k] = _act_nb(a, hid)
                o += v[k] * z[k]
            yi = _act_nb(o, out)
            y[i] = yi
            dy = 1.0 - yi * yi if out == 0 else 1.0
            for k in range(h):
                dz = 1.0 - z[k] * z[k] if hid == 0 else 1.0
                g = dy * v[k] * dz
                for j in range(d):
                    J[i, k * d + j] = g * X[i, j]
                J[i, h * d + k] = g
                J[i, h * d + h + k] = dy * z[k]
            J[i, p - 1] = dy
        return y, J

    @_jit
    def rollout_numba(W, b, v, c, hid, out, window, steps, lo, hi):
        d = window.shape[0]
        h = W.shape[0]
        span = hi - lo
        buf = np.empty(d + steps)
        buf[:d] = window
        for t in range(steps):
            o = c
            for k in range(h):
                a = b[k]
                for j in range(d):
                    a += W[k, j] * (2.0 * (buf[t + j] - lo) / span - 1.0)
                o += v[k] * _act_nb(a, hid)
            raw = (_act_nb(o, out) + 1.0) * 0.5 * span + lo
            if raw < 0.0:
                raw = 0.0
            buf[d + t] = raw
        return buf[d:].copy()
else:
    forward_batch_numba = jacobian_numba = rollout_numba = None


def _numba_disabled():
    return os.environ.get("NARCAST_DISABLE_NUMBA", "0").strip() not in ("", "0")


USE_NUMBA = HAVE_NUMBA and not _numba_disabled()
BACKEND = "numba" if USE_NUMBA else "numpy"

if USE_NUMBA:
    forward_batch, jacobian, rollout = forward_batch_numba, jacobian_numba, rollout_numba
else:
    forward_batch, jacobian, rollout = forward_batch_numpy, jacobian_numpy, rollout_numpy
