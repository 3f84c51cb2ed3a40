"""Adam with bias correction, operating on lists of parameter arrays."""

import numpy as np

from ..errors import ValidationError


class AdamState:
    """First/second moment accumulators, one pair per parameter array."""

    def __init__(self, params):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One update, mutating params in place. Returns state for chaining."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValidationError("adam_step: params, grads, and state must align")
    state.t += 1
    t = state.t
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValidationError(
                f"adam_step: param shape {p.shape} vs grad shape {g.shape}"
            )
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        mhat = m / c1
        vhat = v / c2
        p -= lr * mhat / (np.sqrt(vhat) + eps)
    return state
