"""Dense, LSTM and BLSTM layers with hand-written reverse-mode gradients.

LSTM gates are packed row-wise in the order (input, forget, output, candidate):
``Wx`` is (4H, in), ``Wh`` is (4H, H), ``b`` is (4H,).
"""

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_step(Wx, Wh, b, x_t, h_prev, c_prev):
    """One LSTM step; returns (h_t, c_t)."""
    H = Wh.shape[1]
    z = Wx @ x_t + Wh @ h_prev + b
    i = sigmoid(z[:H])
    f = sigmoid(z[H:2 * H])
    o = sigmoid(z[2 * H:3 * H])
    g = np.tanh(z[3 * H:])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def lstm_forward(Wx, Wh, b, X, reverse=False):
    """Run an LSTM over rows of X from zero state; returns (hidden states (T, H), cache)."""
    T = len(X)
    H = Wh.shape[1]
    zx = X @ Wx.T + b
    hs = np.zeros((T, H))
    acts = np.zeros((T, 4 * H))
    cs = np.zeros((T, H))
    h = np.zeros(H)
    c = np.zeros(H)
    steps = range(T - 1, -1, -1) if reverse else range(T)
    prev_h = np.zeros((T, H))
    prev_c = np.zeros((T, H))
    for t in steps:
        prev_h[t] = h
        prev_c[t] = c
        z = zx[t] + Wh @ h
        a = np.empty(4 * H)
        a[:3 * H] = sigmoid(z[:3 * H])
        a[3 * H:] = np.tanh(z[3 * H:])
        c = a[H:2 * H] * c + a[:H] * a[3 * H:]
        h = a[2 * H:3 * H] * np.tanh(c)
        acts[t] = a
        cs[t] = c
        hs[t] = h
    return hs, (X, acts, cs, prev_h, prev_c, reverse)


def lstm_backward(Wx, Wh, b, cache, dH):
    """Gradients (dX, dWx, dWh, db) given dLoss/dh_t for every step."""
    X, acts, cs, prev_h, prev_c, reverse = cache
    T = len(X)
    H = Wh.shape[1]
    dz_all = np.zeros((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    steps = range(T) if reverse else range(T - 1, -1, -1)
    for t in steps:
        a = acts[t]
        i, f, o, g = a[:H], a[H:2 * H], a[2 * H:3 * H], a[3 * H:]
        tc = np.tanh(cs[t])
        dh = dH[t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * prev_c[t] * f * (1.0 - f),
            dh * tc * o * (1.0 - o),
            dc * i * (1.0 - g * g),
        ])
        dz_all[t] = dz
        dh_next = Wh.T @ dz
        dc_next = dc * f
    return dz_all @ Wx, dz_all.T @ X, dz_all.T @ prev_h, dz_all.sum(axis=0)


def blstm_forward(fwd, bwd, X):
    """Concatenate [forward h_t, backward h_t] per step.

    ``fwd`` and ``bwd`` are (Wx, Wh, b) triples.
    """
    if len(X) == 0:
        raise ValueError("BLSTM needs a non-empty sequence")
    hf, cf = lstm_forward(*fwd, X)
    hb, cb = lstm_forward(*bwd, X, reverse=True)
    return np.hstack([hf, hb]), (cf, cb)


def blstm_backward(fwd, bwd, cache, dOut):
    cf, cb = cache
    H = fwd[1].shape[1]
    dxf, *gf = lstm_backward(*fwd, cf, dOut[:, :H])
    dxb, *gb = lstm_backward(*bwd, cb, dOut[:, H:])
    return dxf + dxb, gf, gb


def activate(z, act):
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "tanh":
        return np.tanh(z)
    return z


def activate_grad(z, y, act):
    if act == "relu":
        return (z > 0).astype(float)
    if act == "tanh":
        return 1.0 - y * y
    return np.ones_like(z)


def mlp_forward(layers, X, act):
    """Hidden layers use ``act``; the last layer is linear.  ``layers`` is [(W, b), ...]."""
    cache = []
    h = X
    for li, (W, b) in enumerate(layers):
        z = h @ W.T + b
        a = act if li < len(layers) - 1 else "identity"
        y = activate(z, a)
        cache.append((h, z, y, a))
        h = y
    return h, cache


def mlp_backward(layers, cache, dY):
    grads = [None] * len(layers)
    d = dY
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        h, z, y, a = cache[li]
        dz = d * activate_grad(z, y, a)
        grads[li] = (dz.T @ h, dz.sum(axis=0))
        d = dz @ W
    return d, grads
