"""Independent oracles shared by the test suite.

Everything here deliberately avoids the library's own fast paths: the
finite-difference gradients, the pair-counting AUC, and the scalar Adam
recursion are straight re-statements of the definitions.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from gridleak.nn.autodiff import Variable


def finite_diff_grad(loss_fn: Callable[[], float], param: Variable, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``loss_fn`` w.r.t. every entry of ``param``."""
    grad = np.zeros_like(param.data)
    flat = param.data.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = loss_fn()
        flat[i] = orig - step
        down = loss_fn()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * step)
    return grad


def max_grad_violation(params: dict[str, Variable], loss_builder: Callable[[], Variable],
                       rtol: float = 1e-4, afloor: float = 1e-7) -> float:
    """Largest ``|ad - fd| / max(afloor/rtol, |fd|)`` over all parameter entries.

    A return value <= rtol means every entry matched within tolerance.
    ``loss_builder`` must rebuild the graph from the params' current data.
    """
    for p in params.values():
        p.grad = None
    loss = loss_builder()
    loss.backward()
    ad_grads = {k: np.array(p.grad) for k, p in params.items()}

    def eval_loss() -> float:
        return float(loss_builder().data)

    worst = 0.0
    for name, p in params.items():
        fd = finite_diff_grad(eval_loss, p)
        denom = np.maximum(np.abs(fd), afloor / rtol)
        rel = np.abs(ad_grads[name] - fd) / denom
        worst = max(worst, float(rel.max()))
    return worst


def pair_count_auc(scores, labels) -> float:
    """Mann-Whitney AUC by explicit pair enumeration, ties counted 1/2."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("need both classes")
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def scalar_adam(grad_fn: Callable[[float], float], p0: float, lr: float, steps: int,
                beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                weight_decay: float = 0.0) -> list[float]:
    """Plain-float Adam recursion; returns the parameter trajectory."""
    p, m, v = p0, 0.0, 0.0
    traj = []
    for t in range(1, steps + 1):
        g = grad_fn(p)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1 ** t)
        vhat = v / (1 - beta2 ** t)
        p -= lr * (mhat / (vhat ** 0.5 + eps) + weight_decay * p)
        traj.append(p)
    return traj
