"""Reverse-mode autodiff tape over numpy float64 arrays.

Small by design: exactly the primitives the learned components need, all
vectorized. Two properties matter more than breadth:

* every VJP is itself composed of tape primitives, so gradients can be
  re-differentiated (``grad(..., create_graph=True)``) — the training loss
  flows through the integrator, which contains first derivatives of the
  Hamiltonian, so parameter gradients are second-order quantities;
* with ``create_graph=False`` the backward pass runs under ``no_grad`` and
  produces plain constants, which keeps inference-time gradient evaluation
  (integrator steps inside rollouts and planning) cheap.
"""

import numpy as np

_GRAD_ENABLED = True


class no_grad:
    """Context manager: ops created inside record no graph."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "parents", "vjp", "requires")

    def __init__(self, data, parents=(), vjp=None, requires=False):
        self.data = data
        self.parents = parents
        self.vjp = vjp
        self.requires = requires

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def detach(self):
        """Stop-gradient: same values, no history."""
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires={self.requires})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def _asarray(x):
    return np.asarray(x, dtype=np.float64)


def constant(x) -> Tensor:
    return Tensor(_asarray(x))


def leaf(x) -> Tensor:
    """Differentiable leaf (parameters, integration state)."""
    return Tensor(_asarray(x), requires=True)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def _make(data, parents, vjp) -> Tensor:
    if _GRAD_ENABLED and any(p.requires for p in parents):
        return Tensor(data, parents, vjp, True)
    return Tensor(data)


def _unbroadcast(g: Tensor, shape) -> Tensor:
    """Reduce a broadcasted cotangent back to ``shape``."""
    if g.data.shape == shape:
        return g
    extra = g.data.ndim - len(shape)
    if extra > 0:
        g = tsum(g, axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.data.shape[i] != 1)
    if axes:
        g = tsum(g, axis=axes, keepdims=True)
    if g.data.shape != shape:
        g = reshape(g, shape)
    return g


# ---------------------------------------------------------------- arithmetic


def add(a, b):
    a, b = _wrap(a), _wrap(b)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(a.data + b.data, (a, b), vjp)


def sub(a, b):
    a, b = _wrap(a), _wrap(b)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(neg(g), b.data.shape)

    return _make(a.data - b.data, (a, b), vjp)


def mul(a, b):
    a, b = _wrap(a), _wrap(b)

    def vjp(g):
        return (_unbroadcast(mul(g, b), a.data.shape),
                _unbroadcast(mul(g, a), b.data.shape))

    return _make(a.data * b.data, (a, b), vjp)


def div(a, b):
    a, b = _wrap(a), _wrap(b)

    def vjp(g):
        da = div(g, b)
        db = neg(div(mul(g, a), mul(b, b)))
        return _unbroadcast(da, a.data.shape), _unbroadcast(db, b.data.shape)

    return _make(a.data / b.data, (a, b), vjp)


def neg(a):
    a = _wrap(a)

    def vjp(g):
        return (neg(g),)

    return _make(-a.data, (a,), vjp)


def matmul(a, b):
    """Matrix product; operands must be >= 2-D, leading dims broadcast."""
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError("matmul operands must have ndim >= 2")

    def vjp(g):
        da = matmul(g, swapaxes(b, -1, -2))
        db = matmul(swapaxes(a, -1, -2), g)
        return _unbroadcast(da, a.data.shape), _unbroadcast(db, b.data.shape)

    return _make(a.data @ b.data, (a, b), vjp)


def swapaxes(a, ax1, ax2):
    a = _wrap(a)

    def vjp(g):
        return (swapaxes(g, ax1, ax2),)

    return _make(np.swapaxes(a.data, ax1, ax2), (a,), vjp)


# --------------------------------------------------------------- elementwise


def exp(a):
    a = _wrap(a)
    out_data = np.exp(a.data)

    def vjp(g):
        return (mul(g, out),)

    out = _make(out_data, (a,), vjp)
    return out


def log(a):
    a = _wrap(a)

    def vjp(g):
        return (div(g, a),)

    return _make(np.log(a.data), (a,), vjp)


def sqrt(a):
    a = _wrap(a)
    out_data = np.sqrt(a.data)

    def vjp(g):
        return (div(mul(g, 0.5), out),)

    out = _make(out_data, (a,), vjp)
    return out


def square(a):
    a = _wrap(a)

    def vjp(g):
        return (mul(g, mul(a, 2.0)),)

    return _make(np.square(a.data), (a,), vjp)


def tanh(a):
    a = _wrap(a)
    out_data = np.tanh(a.data)

    def vjp(g):
        return (mul(g, sub(1.0, square(out))),)

    out = _make(out_data, (a,), vjp)
    return out


def elu(a):
    """ELU with alpha=1: x for x>0, exp(x)-1 otherwise."""
    a = _wrap(a)
    mask = a.data > 0

    def vjp(g):
        # d/dx = 1 on the positive branch, exp(x) on the negative one
        return (mul(g, where(mask, 1.0, exp(a))),)

    return _make(np.where(mask, a.data, np.expm1(a.data)), (a,), vjp)


def where(mask, a, b):
    """Select by a constant boolean mask; gradients split by the mask."""
    a, b = _wrap(a), _wrap(b)
    mask = np.asarray(mask, dtype=bool)
    fm = mask.astype(np.float64)

    def vjp(g):
        return (_unbroadcast(mul(g, fm), a.data.shape),
                _unbroadcast(mul(g, 1.0 - fm), b.data.shape))

    return _make(np.where(mask, a.data, b.data), (a, b), vjp)


def maximum(a, b):
    """Elementwise max; subgradient routes to the larger operand."""
    a, b = _wrap(a), _wrap(b)
    mask = a.data >= b.data
    fm = mask.astype(np.float64)

    def vjp(g):
        return (_unbroadcast(mul(g, fm), a.data.shape),
                _unbroadcast(mul(g, 1.0 - fm), b.data.shape))

    return _make(np.maximum(a.data, b.data), (a, b), vjp)


# ------------------------------------------------------------ shape & reduce


def reshape(a, shape):
    a = _wrap(a)
    old = a.data.shape

    def vjp(g):
        return (reshape(g, old),)

    return _make(a.data.reshape(shape), (a,), vjp)


def tsum(a, axis=None, keepdims=False):
    a = _wrap(a)
    out_data = np.sum(a.data, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            kd_shape = (1,) * a.data.ndim
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            axes = tuple(ax % a.data.ndim for ax in axes)
            kd_shape = tuple(1 if i in axes else n
                             for i, n in enumerate(a.data.shape))
        gk = g if keepdims else reshape(g, kd_shape)
        return (mul(gk, np.ones(a.data.shape)),)

    return _make(out_data, (a,), vjp)


def mean(a, axis=None, keepdims=False):
    a = _wrap(a)
    n = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in np.atleast_1d(axis)])
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def getitem(a, key):
    a = _wrap(a)
    shape = a.data.shape

    def vjp(g):
        return (scatter(g, key, shape),)

    return _make(a.data[key], (a,), vjp)


def scatter(g, key, shape):
    """Place ``g`` at ``key`` in a zero array of ``shape`` (dual of getitem)."""
    g = _wrap(g)

    def vjp(gg):
        return (getitem(gg, key),)

    data = np.zeros(shape)
    data[key] = g.data
    return _make(data, (g,), vjp)


def concat(tensors, axis=0):
    tensors = [_wrap(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def vjp(g):
        outs = []
        for i in range(len(tensors)):
            key = [slice(None)] * g.data.ndim
            key[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
            outs.append(getitem(g, tuple(key)))
        return tuple(outs)

    return _make(np.concatenate([t.data for t in tensors], axis=axis),
                 tuple(tensors), vjp)


def stack(tensors, axis=0):
    tensors = [_wrap(t) for t in tensors]

    def vjp(g):
        outs = []
        for i in range(len(tensors)):
            key = [slice(None)] * g.data.ndim
            key[axis] = i
            outs.append(getitem(g, tuple(key)))
        return tuple(outs)

    return _make(np.stack([t.data for t in tensors], axis=axis),
                 tuple(tensors), vjp)


# ------------------------------------------------------------------ backward


def _topo(output):
    """Iterative post-order over the requires-grad subgraph.

    Guarantees every node appears after all of its parents, so the reversed
    order visits each node only once all of its consumers have contributed
    their cotangents.
    """
    order, visited = [], set()
    stack_ = [(output, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            if id(node) not in visited:
                visited.add(id(node))
                order.append(node)
            continue
        if id(node) in visited:
            continue
        stack_.append((node, True))
        for p in node.parents:
            if p.requires and id(p) not in visited:
                stack_.append((p, False))
    return order


def grad(output, inputs, cotangent=None, create_graph=False):
    """Cotangents of ``output`` w.r.t. ``inputs``.

    ``output`` needs an explicit ``cotangent`` unless scalar-shaped, in which
    case it defaults to 1. Returns one Tensor per input (zeros when the input
    does not reach the output). With ``create_graph=True`` the returned
    tensors carry their own graph and can be differentiated again.
    """
    if cotangent is None:
        cotangent = constant(np.ones_like(output.data))
    else:
        cotangent = _wrap(cotangent)
    accum = {id(output): cotangent}
    ctx = no_grad() if not create_graph else _NullCtx()
    with ctx:
        for node in reversed(_topo(output)):
            g = accum.get(id(node))
            if g is None or node.vjp is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if pg is None or not parent.requires:
                    continue
                acc = accum.get(id(parent))
                accum[id(parent)] = pg if acc is None else add(acc, pg)
    out = []
    for x in inputs:
        g = accum.get(id(x))
        out.append(g if g is not None else constant(np.zeros_like(x.data)))
    return out


class _NullCtx:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False
