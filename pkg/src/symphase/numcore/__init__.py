"""Numerical substrate: autodiff tape, MLPs, Adam, seeded RNG, FD oracle."""

from . import tape
from .fdcheck import central_diff, finite_diff_check
from .mlp import (MlpSpec, ParamVector, backprop, init_params, mlp_forward,
                  mlp_forward_t, param_count, param_slices, weight_mask)
from .optim import AdamState, adam_update, clip_global_norm
from .rng import RngState, stream

__all__ = [
    "tape", "central_diff", "finite_diff_check",
    "MlpSpec", "ParamVector", "backprop", "init_params", "mlp_forward",
    "mlp_forward_t", "param_count", "param_slices", "weight_mask",
    "AdamState", "adam_update", "clip_global_norm", "RngState", "stream",
]
