"""Adam with optional decoupled weight decay, on flat parameter vectors."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, NumericError


@dataclass
class AdamState:
    """First/second moment accumulators plus hyperparameters.

    ``weight_decay`` is decoupled (applied to the parameters directly, not
    through the moments) and masked by ``decay_mask`` so biases are exempt.
    Default decay is 0; the trainer opts in with a small value.
    """

    m: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    @classmethod
    def init(cls, n_params, lr=1e-4, weight_decay=0.0):
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), lr=lr,
                   weight_decay=weight_decay)

    def copy(self):
        return AdamState(self.m.copy(), self.v.copy(), self.t, self.lr,
                         self.beta1, self.beta2, self.eps, self.weight_decay)

    def to_json(self):
        return {"m": self.m.tolist(), "v": self.v.tolist(), "t": self.t,
                "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps, "weight_decay": self.weight_decay}

    @classmethod
    def from_json(cls, doc):
        return cls(np.asarray(doc["m"]), np.asarray(doc["v"]), doc["t"],
                   doc["lr"], doc["beta1"], doc["beta2"], doc["eps"],
                   doc["weight_decay"])


def adam_update(state: AdamState, params: np.ndarray, grads: np.ndarray,
                decay_mask=None):
    """One Adam step with bias correction; returns (new_state, new_params).

    Raises NumericError on non-finite gradients so callers can skip and flag
    the update instead of poisoning the moments.
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ConfigurationError("params/grads/state shapes differ")
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradients; update skipped", grads)

    new = state.copy()
    new.t = state.t + 1
    new.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    new.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = new.m / (1.0 - state.beta1 ** new.t)
    v_hat = new.v / (1.0 - state.beta2 ** new.t)
    step = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    out = params - step
    if state.weight_decay > 0.0:
        decay = state.lr * state.weight_decay * params
        if decay_mask is not None:
            decay = decay * decay_mask
        out = out - decay
    return new, out


def clip_global_norm(grad_arrays, max_norm):
    """Rescale a group of gradient arrays to a shared global norm cap."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grad_arrays))
    if total <= max_norm or total == 0.0:
        return list(grad_arrays), total
    scale = max_norm / total
    return [g * scale for g in grad_arrays], total
