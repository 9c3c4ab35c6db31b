"""LSTM cell and a fused full-sequence node.

Gate layout along the last weight axis is [input, forget, candidate,
output], each block ``hidden`` wide. ``lstm_cell`` composes primitive ops
(one graph node per gate) and is convenient for single steps;
``lstm_sequence`` runs a whole window with hand-derived backward rules,
which is what the forecaster trains with. Both produce identical values
and gradients.
"""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import autodiff as ad
from .autodiff import Variable

Array = np.ndarray


def init_lstm_weights(input_dim: int, hidden: int, rng: np.random.Generator) -> dict[str, Array]:
    """Uniform U(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization."""
    bound_x = 1.0 / np.sqrt(input_dim)
    bound_h = 1.0 / np.sqrt(hidden)
    return {
        "wx": rng.uniform(-bound_x, bound_x, size=(input_dim, 4 * hidden)),
        "wh": rng.uniform(-bound_h, bound_h, size=(hidden, 4 * hidden)),
        "b": rng.uniform(-bound_h, bound_h, size=(4 * hidden,)),
    }


def init_dense_weights(n_in: int, n_out: int, rng: np.random.Generator) -> dict[str, Array]:
    bound = 1.0 / np.sqrt(n_in)
    return {
        "w": rng.uniform(-bound, bound, size=(n_in, n_out)),
        "b": rng.uniform(-bound, bound, size=(n_out,)),
    }


def _check_cell_shapes(x: Array, h: Array, c: Array, wx: Array, wh: Array, b: Array) -> int:
    if wx.ndim != 2 or wh.ndim != 2 or b.ndim != 1:
        raise ShapeError("lstm weights must be (D,4H), (H,4H), (4H,)")
    four_h = wx.shape[1]
    if four_h % 4 or wh.shape[1] != four_h or b.shape[0] != four_h:
        raise ShapeError(f"gate axis mismatch: wx {wx.shape}, wh {wh.shape}, b {b.shape}")
    hidden = four_h // 4
    if wh.shape[0] != hidden:
        raise ShapeError(f"hidden size mismatch: wh {wh.shape}")
    if x.shape[-1] != wx.shape[0] or h.shape[-1] != hidden or c.shape[-1] != hidden:
        raise ShapeError(
            f"input shapes x{x.shape} h{h.shape} c{c.shape} do not fit "
            f"wx{wx.shape} wh{wh.shape}")
    return hidden


def lstm_cell(x, h, c, wx, wh, b):
    """One LSTM step built from primitive graph ops. Returns (h', c')."""
    hidden = _check_cell_shapes(ad._value(x), ad._value(h), ad._value(c),
                                ad._value(wx), ad._value(wh), ad._value(b))
    z = ad.add(ad.add(ad.matmul(x, wx), ad.matmul(h, wh)), b)
    i = ad.sigmoid(ad.slice_cols(z, 0, hidden))
    f = ad.sigmoid(ad.slice_cols(z, hidden, 2 * hidden))
    g = ad.tanh(ad.slice_cols(z, 2 * hidden, 3 * hidden))
    o = ad.sigmoid(ad.slice_cols(z, 3 * hidden, 4 * hidden))
    c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new


def lstm_sequence(x_seq, wx, wh, b) -> Variable:
    """Run an LSTM over ``x_seq`` (B, T, D) and return the last hidden state.

    Fused node: the forward pass caches per-step gate activations and the
    backward pass replays the recurrence in reverse, accumulating
    gradients for the weights (and for ``x_seq`` when it is a Variable).
    """
    xv = ad._value(x_seq)
    if xv.ndim != 3:
        raise ShapeError(f"x_seq must be (B, T, D), got {xv.shape}")
    wxv, whv, bv = ad._value(wx), ad._value(wh), ad._value(b)
    batch, steps, _ = xv.shape
    state0 = np.zeros((batch, max(whv.shape[0], 1)))
    hidden = _check_cell_shapes(xv[:, 0, :], state0, state0, wxv, whv, bv)

    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    cache = []
    for t in range(steps):
        xt = xv[:, t, :]
        z = xt @ wxv + h @ whv + bv
        i = ad._sigmoid_np(z[:, :hidden])
        f = ad._sigmoid_np(z[:, hidden:2 * hidden])
        g = np.tanh(z[:, 2 * hidden:3 * hidden])
        o = ad._sigmoid_np(z[:, 3 * hidden:])
        c_prev = c
        h_prev = h
        c = f * c_prev + i * g
        h = o * np.tanh(c)
        cache.append((h_prev, c_prev, i, f, g, o, c))

    parents = tuple(p for p in (x_seq, wx, wh, b) if isinstance(p, Variable))
    out = Variable(h, parents)

    def back(grad_h: Array) -> None:
        d_wx = np.zeros_like(wxv)
        d_wh = np.zeros_like(whv)
        d_b = np.zeros_like(bv)
        d_x = np.zeros_like(xv) if isinstance(x_seq, Variable) else None
        dh = np.array(grad_h)
        dc = np.zeros((batch, hidden))
        dz = np.empty((batch, 4 * hidden))
        for t in range(steps - 1, -1, -1):
            h_prev, c_prev, i, f, g, o, c_t = cache[t]
            tc = np.tanh(c_t)
            dc = dc + dh * o * (1.0 - tc * tc)
            dz[:, :hidden] = dc * g * i * (1.0 - i)
            dz[:, hidden:2 * hidden] = dc * c_prev * f * (1.0 - f)
            dz[:, 2 * hidden:3 * hidden] = dc * i * (1.0 - g * g)
            dz[:, 3 * hidden:] = dh * tc * o * (1.0 - o)
            xt = xv[:, t, :]
            d_wx += xt.T @ dz
            d_wh += h_prev.T @ dz
            d_b += dz.sum(axis=0)
            if d_x is not None:
                d_x[:, t, :] = dz @ wxv.T
            dh = dz @ whv.T
            dc = dc * f
        if isinstance(x_seq, Variable):
            ad._accumulate(x_seq, d_x)
        if isinstance(wx, Variable):
            ad._accumulate(wx, d_wx)
        if isinstance(wh, Variable):
            ad._accumulate(wh, d_wh)
        if isinstance(b, Variable):
            ad._accumulate(b, d_b)

    out._backward = back
    return out


def lstm_sequence_forward(x_seq: Array, wx: Array, wh: Array, b: Array) -> Array:
    """Inference-only pass over (B, T, D); returns last hidden state (B, H)."""
    batch, steps, _ = x_seq.shape
    hidden = wh.shape[0]
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    for t in range(steps):
        z = x_seq[:, t, :] @ wx + h @ wh + b
        i = ad._sigmoid_np(z[:, :hidden])
        f = ad._sigmoid_np(z[:, hidden:2 * hidden])
        g = np.tanh(z[:, 2 * hidden:3 * hidden])
        o = ad._sigmoid_np(z[:, 3 * hidden:])
        c = f * c + i * g
        h = o * np.tanh(c)
    return h
