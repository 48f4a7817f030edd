"""Dense multilayer perceptrons over flat parameter vectors.

Three routes exist for the same network and are cross-checked in tests:
a plain numpy forward, a tape forward (for building training graphs), and a
hand-written vectorized backward pass used on hot inference paths.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from . import tape

_ACTIVATIONS = ("tanh", "elu", "identity")


def _act_np(name, x):
    if name == "tanh":
        return np.tanh(x)
    if name == "elu":
        return np.where(x > 0, x, np.expm1(x))
    return x


def _act_deriv_np(name, x):
    if name == "tanh":
        t = np.tanh(x)
        return 1.0 - t * t
    if name == "elu":
        return np.where(x > 0, 1.0, np.exp(x))
    return np.ones_like(x)


def _act_t(name, x):
    if name == "tanh":
        return tape.tanh(x)
    if name == "elu":
        return tape.elu(x)
    return x


@dataclass(frozen=True)
class MlpSpec:
    """Network shape: widths per layer plus activation names.

    ``activations`` has one entry per hidden layer (len(widths) - 2 of them);
    ``output_activation`` applies to the final affine layer.
    """

    layer_widths: tuple
    activations: tuple = ()
    output_activation: str = "identity"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(widths) < 2:
            raise ConfigurationError("MlpSpec needs at least 2 layers")
        if any(w < 1 for w in widths):
            raise ConfigurationError(f"layer widths must be >= 1, got {widths}")
        n_hidden = len(widths) - 2
        if len(self.activations) != n_hidden:
            raise ConfigurationError(
                f"{n_hidden} hidden layers need {n_hidden} activations, "
                f"got {len(self.activations)}")
        for a in self.activations + (self.output_activation,):
            if a not in _ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {a!r}")

    @classmethod
    def make(cls, in_width, hidden, out_width, activation="elu",
             output_activation="identity"):
        """Uniform-width hidden stack: ``hidden`` is a width list."""
        hidden = tuple(hidden)
        return cls((in_width,) + hidden + (out_width,),
                   (activation,) * len(hidden), output_activation)

    @property
    def in_width(self):
        return self.layer_widths[0]

    @property
    def out_width(self):
        return self.layer_widths[-1]

    def layer_activation(self, i):
        """Activation applied after affine layer ``i`` (0-based)."""
        if i == len(self.layer_widths) - 2:
            return self.output_activation
        return self.activations[i]

    def to_json(self):
        return {"layer_widths": list(self.layer_widths),
                "activations": list(self.activations),
                "output_activation": self.output_activation}

    @classmethod
    def from_json(cls, doc):
        return cls(tuple(doc["layer_widths"]), tuple(doc["activations"]),
                   doc["output_activation"])


def param_count(spec: MlpSpec) -> int:
    widths = spec.layer_widths
    return sum(widths[i] * widths[i + 1] + widths[i + 1]
               for i in range(len(widths) - 1))


def param_slices(spec: MlpSpec):
    """Per layer: (weight slice, weight shape, bias slice)."""
    out, off = [], 0
    widths = spec.layer_widths
    for i in range(len(widths) - 1):
        n_in, n_out = widths[i], widths[i + 1]
        ws = slice(off, off + n_in * n_out)
        off += n_in * n_out
        bs = slice(off, off + n_out)
        off += n_out
        out.append((ws, (n_in, n_out), bs))
    return out


@dataclass
class ParamVector:
    """Flat float64 weight storage for one MlpSpec."""

    spec: MlpSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (param_count(self.spec),):
            raise ConfigurationError(
                f"param vector length {self.values.shape} does not match "
                f"spec count {param_count(self.spec)}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("param vector contains non-finite entries")

    def copy(self):
        return ParamVector(self.spec, self.values.copy())

    def to_json(self):
        return {"spec": self.spec.to_json(), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, doc):
        return cls(MlpSpec.from_json(doc["spec"]),
                   np.asarray(doc["values"], dtype=np.float64))


def weight_mask(spec: MlpSpec) -> np.ndarray:
    """True on weight-matrix entries, False on biases (decay exempts biases)."""
    mask = np.zeros(param_count(spec), dtype=bool)
    for ws, _, _ in param_slices(spec):
        mask[ws] = True
    return mask


def init_params(spec: MlpSpec, rng: np.random.Generator,
                final_scale=None) -> ParamVector:
    """Fan-in scaled Gaussian weights, zero biases.

    ``final_scale`` rescales the last layer's weights, used to start learned
    forcing terms near zero.
    """
    values = np.zeros(param_count(spec))
    slices = param_slices(spec)
    for i, (ws, shape, _) in enumerate(slices):
        w = rng.standard_normal(shape) / np.sqrt(shape[0])
        if final_scale is not None and i == len(slices) - 1:
            w = w * final_scale
        values[ws] = w.ravel()
    return ParamVector(spec, values)


def _check_input(spec, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spec.in_width:
        raise ConfigurationError(
            f"input width {x.shape[-1]} does not match spec {spec.in_width}")
    return x


def mlp_forward(spec: MlpSpec, params: ParamVector, x) -> np.ndarray:
    """Plain numpy forward pass; accepts (in,) or (batch, in)."""
    x = _check_input(spec, x)
    single = x.ndim == 1
    h = x[None, :] if single else x
    for i, (ws, shape, bs) in enumerate(param_slices(spec)):
        w = params.values[ws].reshape(shape)
        b = params.values[bs]
        h = _act_np(spec.layer_activation(i), h @ w + b)
    return h[0] if single else h


def mlp_forward_t(spec: MlpSpec, params_t: tape.Tensor, x_t: tape.Tensor):
    """Tape forward pass; ``x_t`` must be (batch, in)."""
    h = x_t
    for i, (ws, shape, bs) in enumerate(param_slices(spec)):
        w = tape.reshape(params_t[ws], shape)
        b = params_t[bs]
        h = _act_t(spec.layer_activation(i), tape.add(tape.matmul(h, w), b))
    return h


def backprop(spec: MlpSpec, params: ParamVector, x, upstream):
    """Exact reverse-mode gradients of ``upstream . output``.

    Returns ``(input_grad, param_grad)``. Batched inputs give per-row input
    gradients and batch-summed parameter gradients.
    """
    x = _check_input(spec, x)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape[-1] != spec.out_width:
        raise ConfigurationError(
            f"upstream width {upstream.shape[-1]} does not match "
            f"spec output {spec.out_width}")
    single = x.ndim == 1
    h = x[None, :] if single else x
    u = upstream[None, :] if single else upstream
    if h.shape[0] != u.shape[0]:
        raise ConfigurationError("input/upstream batch sizes differ")

    slices = param_slices(spec)
    pre_acts, inputs = [], []
    for i, (ws, shape, bs) in enumerate(slices):
        w = params.values[ws].reshape(shape)
        b = params.values[bs]
        inputs.append(h)
        z = h @ w + b
        pre_acts.append(z)
        h = _act_np(spec.layer_activation(i), z)

    param_grad = np.zeros_like(params.values)
    delta = u
    for i in reversed(range(len(slices))):
        ws, shape, bs = slices[i]
        delta = delta * _act_deriv_np(spec.layer_activation(i), pre_acts[i])
        param_grad[ws] = (inputs[i].T @ delta).ravel()
        param_grad[bs] = delta.sum(axis=0)
        w = params.values[ws].reshape(shape)
        delta = delta @ w.T

    input_grad = delta[0] if single else delta
    return input_grad, ParamVector(spec, param_grad)
