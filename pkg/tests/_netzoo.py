"""Random small differentiable networks used for gradient checking.

Each builder returns ``(params, loss_builder)`` where ``loss_builder``
reconstructs the scalar loss graph from the params' current data, so
finite differences can re-evaluate it after poking entries. Parameters
are drawn U(-0.5, 0.5).
"""
from __future__ import annotations

import numpy as np

from gridleak.nn import autodiff as ad
from gridleak.nn.autodiff import Variable
from gridleak.nn.conv import conv2d, global_avg_pool
from gridleak.nn.lstm import lstm_cell, lstm_sequence


def _u(rng, *shape) -> Variable:
    return Variable(rng.uniform(-0.5, 0.5, size=shape))


def build_mlp(rng: np.random.Generator):
    depth = int(rng.integers(1, 4))
    widths = [int(rng.integers(2, 9)) for _ in range(depth + 1)]
    batch = int(rng.integers(2, 5))
    x = rng.uniform(-1, 1, size=(batch, widths[0]))
    target = rng.uniform(-1, 1, size=(batch, widths[-1]))
    params = {}
    for i in range(depth):
        params[f"w{i}"] = _u(rng, widths[i], widths[i + 1])
        params[f"b{i}"] = _u(rng, widths[i + 1])
    acts = [ad.tanh if rng.random() < 0.5 else ad.sigmoid for _ in range(depth)]

    def loss_builder() -> Variable:
        h = x
        for i in range(depth):
            h = ad.add(ad.matmul(h, params[f"w{i}"]), params[f"b{i}"])
            if i < depth - 1:
                h = acts[i](h)
        return ad.vmean(ad.square(ad.add(h, -target)))

    return params, loss_builder


def build_lstm_head(rng: np.random.Generator):
    batch = int(rng.integers(2, 4))
    steps = int(rng.integers(2, 6))
    d_in = int(rng.integers(1, 4))
    hidden = int(rng.integers(2, 7))
    x = rng.uniform(-1, 1, size=(batch, steps, d_in))
    target = rng.uniform(-1, 1, size=(batch, 1))
    params = {
        "wx": _u(rng, d_in, 4 * hidden),
        "wh": _u(rng, hidden, 4 * hidden),
        "b": _u(rng, 4 * hidden),
        "w_out": _u(rng, hidden, 1),
        "b_out": _u(rng, 1),
    }

    def loss_builder() -> Variable:
        h = lstm_sequence(x, params["wx"], params["wh"], params["b"])
        y = ad.add(ad.matmul(h, params["w_out"]), params["b_out"])
        return ad.vmean(ad.square(ad.add(y, -target)))

    return params, loss_builder


def build_lstm_cell_chain(rng: np.random.Generator):
    batch = int(rng.integers(1, 4))
    steps = int(rng.integers(2, 5))
    hidden = int(rng.integers(2, 6))
    xs = rng.uniform(-1, 1, size=(steps, batch, 1))
    params = {
        "wx": _u(rng, 1, 4 * hidden),
        "wh": _u(rng, hidden, 4 * hidden),
        "b": _u(rng, 4 * hidden),
    }

    def loss_builder() -> Variable:
        h = np.zeros((batch, hidden))
        c = np.zeros((batch, hidden))
        h = Variable(h)
        c = Variable(c)
        for t in range(steps):
            h, c = lstm_cell(xs[t], h, c, params["wx"], params["wh"], params["b"])
        return ad.vmean(ad.square(h))

    return params, loss_builder


def build_convnet(rng: np.random.Generator):
    batch = int(rng.integers(1, 3))
    height = int(rng.integers(6, 11))
    width = int(rng.integers(6, 11))
    ch1 = int(rng.integers(2, 5))
    ch2 = int(rng.integers(2, 5))
    stride = int(rng.integers(1, 3))
    x = rng.uniform(-1, 1, size=(batch, 1, height, width))
    y = rng.integers(0, 2, size=(batch, 1)).astype(float)
    params = {
        "k1": _u(rng, ch1, 1, 3, 3),
        "c1": _u(rng, ch1),
        "k2": _u(rng, ch2, ch1, 3, 3),
        "c2": _u(rng, ch2),
        "w": _u(rng, ch2, 1),
        "b": _u(rng, 1),
    }

    def loss_builder() -> Variable:
        h = ad.tanh(conv2d(x, params["k1"], params["c1"], stride=stride, padding=1))
        h = ad.tanh(conv2d(h, params["k2"], params["c2"], stride=1, padding=1))
        z = ad.add(ad.matmul(global_avg_pool(h), params["w"]), params["b"])
        # binary cross-entropy on logits: softplus(z) - y*z
        return ad.vmean(ad.add(ad.softplus(z), ad.mul(z, -y)))

    return params, loss_builder


def build_two_branch(rng: np.random.Generator):
    batch = int(rng.integers(2, 4))
    steps = int(rng.integers(2, 5))
    hidden = int(rng.integers(2, 6))
    fc = int(rng.integers(2, 6))
    x_seq = rng.uniform(-1, 1, size=(batch, steps, 1))
    x_time = rng.uniform(-1, 1, size=(batch, 5))
    target = rng.uniform(-1, 1, size=(batch, 1))
    params = {
        "wx": _u(rng, 1, 4 * hidden),
        "wh": _u(rng, hidden, 4 * hidden),
        "b": _u(rng, 4 * hidden),
        "wt": _u(rng, 5, fc),
        "bt": _u(rng, fc),
        "w_out": _u(rng, hidden + fc, 1),
        "b_out": _u(rng, 1),
    }

    def loss_builder() -> Variable:
        h = lstm_sequence(x_seq, params["wx"], params["wh"], params["b"])
        t = ad.tanh(ad.add(ad.matmul(x_time, params["wt"]), params["bt"]))
        merged = ad.concat([h, t], axis=1)
        y = ad.add(ad.matmul(merged, params["w_out"]), params["b_out"])
        return ad.vmean(ad.square(ad.add(y, -target)))

    return params, loss_builder


BUILDERS = (build_mlp, build_lstm_head, build_lstm_cell_chain, build_convnet, build_two_branch)


def random_net(rng: np.random.Generator):
    builder = BUILDERS[int(rng.integers(0, len(BUILDERS)))]
    return builder(rng)


def param_count(params: dict) -> int:
    return sum(p.data.size for p in params.values())
