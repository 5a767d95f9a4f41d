"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Ops record a graph as they execute; ``backward`` replays it in reverse
topological order and accumulates vector-Jacobian products into ``.grad``
buffers.  Only the handful of primitives the recurrent models need are
implemented.  Everything runs in float64 so gradients can be checked
against central finite differences at tight tolerances.

A tensor is *tracked* when it is a gradient leaf (``requires_grad=True``,
e.g. a Parameter) or depends on one; untracked tensors are constants and
are pruned from the backward pass.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Parameter",
    "DivergenceError",
    "backward",
    "zero_grad",
    "add",
    "sub",
    "mul",
    "neg",
    "scale",
    "linear",
    "sigmoid",
    "tanh",
    "slice_cols",
    "slice_rows",
    "concat_rows",
    "sum_all",
    "mean_all",
    "softmax_cross_entropy",
    "stable_sigmoid",
]


class DivergenceError(RuntimeError):
    """Numerical state (loss or weights) stopped being finite.

    ``records`` carries per-epoch metrics gathered before the failure and
    ``snapshot`` the last model/optimizer state that was still finite.
    """

    def __init__(self, message, records=None, snapshot=None):
        super().__init__(message)
        self.records = records
        self.snapshot = snapshot


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_vjps", "_leaf")

    def __init__(self, data, parents=(), vjps=(), requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._vjps = vjps
        self._leaf = requires_grad

    @property
    def tracked(self) -> bool:
        return self._leaf or bool(self._parents)

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, tracked={self.tracked})"


class Parameter(Tensor):
    """A learnable leaf tensor whose gradient buffer persists across steps."""

    def __init__(self, data):
        super().__init__(data, requires_grad=True)


def zero_grad(params) -> None:
    """Reset (allocating if needed) the gradient buffers of leaf tensors."""
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
        else:
            p.grad.fill(0.0)


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor, grad=None) -> None:
    """Accumulate d(root)/d(leaf) into every tracked ancestor's ``.grad``.

    ``grad`` seeds the sweep; it defaults to 1 and is only optional for
    scalar roots.
    """
    if not root.tracked:
        raise ValueError("backward on a tensor with no tracked ancestors")
    if grad is None:
        if root.data.size != 1:
            raise ValueError("a seed gradient is required for non-scalar roots")
        seed = np.ones_like(root.data)
    else:
        seed = np.asarray(grad, dtype=np.float64)
        if seed.shape != root.data.shape:
            raise ValueError(f"seed gradient shape {seed.shape} != root shape {root.data.shape}")
    order = _toposort(root)
    for node in order:
        if node.grad is None:
            node.grad = np.zeros_like(node.data)
    root.grad += seed
    for node in reversed(order):
        g = node.grad
        for vjp in node._vjps:
            vjp(g)


# ---------------------------------------------------------------------------
# primitives


def _as_data(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _is_tracked(x):
    return isinstance(x, Tensor) and x.tracked


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g over the axes that broadcasting expanded to reach its shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if keep:
        g = g.sum(axis=keep, keepdims=True)
    return g


def add(a, b) -> Tensor:
    da, db = _as_data(a), _as_data(b)
    parents, vjps = [], []
    if _is_tracked(a):
        def vjp_a(g, a=a, shape=da.shape):
            a.grad += _unbroadcast(g, shape)
        parents.append(a)
        vjps.append(vjp_a)
    if _is_tracked(b):
        def vjp_b(g, b=b, shape=db.shape):
            b.grad += _unbroadcast(g, shape)
        parents.append(b)
        vjps.append(vjp_b)
    return Tensor(da + db, tuple(parents), tuple(vjps))


def sub(a, b) -> Tensor:
    da, db = _as_data(a), _as_data(b)
    parents, vjps = [], []
    if _is_tracked(a):
        def vjp_a(g, a=a, shape=da.shape):
            a.grad += _unbroadcast(g, shape)
        parents.append(a)
        vjps.append(vjp_a)
    if _is_tracked(b):
        def vjp_b(g, b=b, shape=db.shape):
            b.grad -= _unbroadcast(g, shape)
        parents.append(b)
        vjps.append(vjp_b)
    return Tensor(da - db, tuple(parents), tuple(vjps))


def mul(a, b) -> Tensor:
    da, db = _as_data(a), _as_data(b)
    parents, vjps = [], []
    if _is_tracked(a):
        def vjp_a(g, a=a, db=db, shape=da.shape):
            a.grad += _unbroadcast(g * db, shape)
        parents.append(a)
        vjps.append(vjp_a)
    if _is_tracked(b):
        def vjp_b(g, b=b, da=da, shape=db.shape):
            b.grad += _unbroadcast(g * da, shape)
        parents.append(b)
        vjps.append(vjp_b)
    return Tensor(da * db, tuple(parents), tuple(vjps))


def neg(a) -> Tensor:
    da = _as_data(a)
    if not _is_tracked(a):
        return Tensor(-da)

    def vjp(g, a=a):
        a.grad -= g
    return Tensor(-da, (a,), (vjp,))


def scale(a, s: float) -> Tensor:
    da = _as_data(a)
    if not _is_tracked(a):
        return Tensor(da * s)

    def vjp(g, a=a, s=s):
        a.grad += g * s
    return Tensor(da * s, (a,), (vjp,))


def linear(x, w) -> Tensor:
    """x @ w.T for x of shape (B, n) and w of shape (m, n)."""
    dx, dw = _as_data(x), _as_data(w)
    out = dx @ dw.T
    parents, vjps = [], []
    if _is_tracked(x):
        def vjp_x(g, x=x, dw=dw):
            x.grad += g @ dw
        parents.append(x)
        vjps.append(vjp_x)
    if _is_tracked(w):
        def vjp_w(g, w=w, dx=dx):
            w.grad += g.T @ dx
        parents.append(w)
        vjps.append(vjp_w)
    return Tensor(out, tuple(parents), tuple(vjps))


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function; clipping keeps exp() in range (exact for |x| < 500)."""
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


def sigmoid(a) -> Tensor:
    da = _as_data(a)
    out = stable_sigmoid(da)
    if not _is_tracked(a):
        return Tensor(out)

    def vjp(g, a=a, out=out):
        a.grad += g * (out * (1.0 - out))
    return Tensor(out, (a,), (vjp,))


def tanh(a) -> Tensor:
    da = _as_data(a)
    out = np.tanh(da)
    if not _is_tracked(a):
        return Tensor(out)

    def vjp(g, a=a, out=out):
        a.grad += g * (1.0 - out * out)
    return Tensor(out, (a,), (vjp,))


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    data = a.data[..., start:stop]
    if not _is_tracked(a):
        return Tensor(data)

    def vjp(g, a=a, start=start, stop=stop):
        a.grad[..., start:stop] += g
    return Tensor(data, (a,), (vjp,))


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    data = a.data[start:stop]
    if not _is_tracked(a):
        return Tensor(data)

    def vjp(g, a=a, start=start, stop=stop):
        a.grad[start:stop] += g
    return Tensor(data, (a,), (vjp,))


def concat_rows(tensors) -> Tensor:
    """Concatenate along axis 0 (also joins 1-D vectors end to end)."""
    datas = [_as_data(t) for t in tensors]
    out = np.concatenate(datas, axis=0)
    parents, vjps = [], []
    offset = 0
    for t, d in zip(tensors, datas):
        n = d.shape[0]
        if _is_tracked(t):
            def vjp(g, t=t, start=offset, stop=offset + n):
                t.grad += g[start:stop]
            parents.append(t)
            vjps.append(vjp)
        offset += n
    return Tensor(out, tuple(parents), tuple(vjps))


def sum_all(a) -> Tensor:
    da = _as_data(a)
    out = np.asarray(da.sum())
    if not _is_tracked(a):
        return Tensor(out)

    def vjp(g, a=a):
        a.grad += g
    return Tensor(out, (a,), (vjp,))


def mean_all(a) -> Tensor:
    da = _as_data(a)
    out = np.asarray(da.mean())
    if not _is_tracked(a):
        return Tensor(out)

    def vjp(g, a=a, n=da.size):
        a.grad += g / n
    return Tensor(out, (a,), (vjp,))


def softmax_cross_entropy(logits, targets) -> Tensor:
    """Mean negative log-softmax of the target class, max-stabilized.

    ``logits`` has shape (R, K); ``targets`` is an int array of R class
    indices in [0, K).
    """
    dl = _as_data(logits)
    if dl.ndim != 2:
        raise ValueError(f"logits must be 2-D, got shape {dl.shape}")
    t = np.asarray(targets)
    if t.shape != (dl.shape[0],):
        raise ValueError(f"targets shape {t.shape} does not match logits rows {dl.shape[0]}")
    if not np.issubdtype(t.dtype, np.integer):
        raise ValueError("targets must be integer class indices")
    k = dl.shape[1]
    if t.size and (t.min() < 0 or t.max() >= k):
        raise ValueError(f"target index out of range for {k} classes")
    rows = np.arange(dl.shape[0])
    shifted = dl - dl.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    z = expz.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(z)
    loss = np.asarray(-log_probs[rows, t].mean())
    if not _is_tracked(logits):
        return Tensor(loss)
    probs = expz / z

    def vjp(g, logits=logits, probs=probs, t=t, rows=rows):
        d = probs.copy()
        d[rows, t] -= 1.0
        d *= g / probs.shape[0]
        logits.grad += d
    return Tensor(loss, (logits,), (vjp,))
