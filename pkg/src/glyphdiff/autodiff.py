"""Reverse-mode automatic differentiation over numpy arrays.

This is the numeric substrate every model component is built from: a small
tape of :class:`Tensor` nodes plus the fixed operation set below (matmul,
3x3 convolution, nearest upsampling, channel concat/slice, elementwise
add/mul, group/layer normalization, silu, softmax, embedding lookup, mean
and squared-error reductions, reshape/transpose plumbing).

Ops run in float32 for training and float64 for gradient checking; the
dtype of the inputs is preserved throughout.  Forward evaluation is
bit-deterministic for fixed inputs and backend.  With
``set_strict_finite(True)`` (or ``GLYPHDIFF_STRICT_FINITE=1``) every op
output is scanned and a non-finite value raises ``NumericStateError``.
"""

import math
import os

import numpy as np

from . import kernels
from .errors import DeterminismError, NumericStateError, ShapeMismatch

_strict_finite = os.environ.get("GLYPHDIFF_STRICT_FINITE", "") == "1"


def set_strict_finite(on):
    """Toggle per-op finiteness checking. Returns the previous setting."""
    global _strict_finite
    old, _strict_finite = _strict_finite, bool(on)
    return old


def _checked(data, op):
    if _strict_finite and not np.all(np.isfinite(data)):
        raise NumericStateError(f"non-finite values produced by {op}")
    return data


class Tensor:
    """A node in the computation graph wrapping one ndarray."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad=False, parents=(), grad_fn=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._grad_fn = grad_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _node(data, parents, grad_fn, op):
    # Constant-fold: no differentiable parent means no tape entry is needed.
    if any(p.requires_grad for p in parents):
        return Tensor(_checked(data, op), requires_grad=True, parents=tuple(parents), grad_fn=grad_fn)
    return Tensor(_checked(data, op))


def backward(loss):
    """Accumulate gradients of a scalar loss into every reachable node's .grad."""
    if loss.data.ndim != 0:
        raise ShapeMismatch(f"backward requires a scalar loss, got shape {loss.data.shape}")
    order = []
    seen = set()
    stack = [(loss, iter(loss._parents))]
    seen.add(id(loss))
    while stack:
        node, it = stack[-1]
        advanced = False
        for p in it:
            if id(p) not in seen and p.requires_grad:
                seen.add(id(p))
                stack.append((p, iter(p._parents)))
                advanced = True
                break
        if not advanced:
            order.append(node)
            stack.pop()
    loss.grad = np.ones((), dtype=loss.data.dtype)
    for node in reversed(order):
        if node._grad_fn is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._grad_fn(node.grad)):
            if g is None or not parent.requires_grad:
                continue
            if parent.grad is None:
                parent.grad = g
            else:
                parent.grad = parent.grad + g


class ParamSet:
    """Named, ordered collection of trainable tensors with frozen shapes."""

    def __init__(self):
        self._params = {}

    def add(self, name, array):
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(array), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def n_scalars(self):
        return sum(t.data.size for t in self._params.values())

    def state_arrays(self):
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_arrays(self, arrays):
        for name, t in self._params.items():
            a = np.asarray(arrays[name])
            if a.shape != t.data.shape:
                raise ShapeMismatch(
                    f"parameter {name!r}: stored shape {a.shape} != expected {t.data.shape}"
                )
            t.data = a.astype(t.data.dtype)

    def astype(self, dtype):
        out = ParamSet()
        for name, t in self._params.items():
            out.add(name, t.data.astype(dtype))
        return out

    def frozen(self):
        return FrozenParams(self._params)


class FrozenParams:
    """Read-only view of a ParamSet whose tensors carry no gradient tape;
    forward passes through it build no graph (used for sampling and eval)."""

    def __init__(self, params):
        self._tensors = {name: Tensor(t.data) for name, t in params.items()}

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def items(self):
        return self._tensors.items()


# ---------------------------------------------------------------------------
# elementwise and shape ops


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def grad(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _node(a.data + b.data, (a, b), grad, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def grad(g):
        return _unbroadcast(g, a.data.shape), -_unbroadcast(g, b.data.shape)

    return _node(a.data - b.data, (a, b), grad, "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def grad(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return _node(a.data * b.data, (a, b), grad, "mul")


def scale(a, s):
    s = float(s)

    def grad(g):
        return (g * s,)

    return _node(a.data * s, (a,), grad, "scale")


def reshape(a, shape):
    old = a.data.shape

    def grad(g):
        return (g.reshape(old),)

    return _node(a.data.reshape(shape), (a,), grad, "reshape")


def transpose(a, axes):
    inv = tuple(np.argsort(axes))

    def grad(g):
        return (np.ascontiguousarray(g.transpose(inv)),)

    return _node(np.ascontiguousarray(a.data.transpose(axes)), (a,), grad, "transpose")


def concat_channels(parts):
    """Concatenate 4D tensors along the channel axis."""
    parts = [as_tensor(p) for p in parts]
    base = parts[0].data.shape
    for p in parts[1:]:
        s = p.data.shape
        if len(s) != len(base) or s[0] != base[0] or s[2:] != base[2:]:
            raise ShapeMismatch(f"concat_channels: incompatible shapes {base} vs {s}")
    sizes = [p.data.shape[1] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def grad(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _node(np.concatenate([p.data for p in parts], axis=1), parts, grad, "concat_channels")


def slice_channels(a, start, stop):
    n = a.data.shape[1]
    if not (0 <= start < stop <= n):
        raise ShapeMismatch(f"slice_channels [{start}:{stop}] out of range for {n} channels")

    def grad(g):
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        return (full,)

    return _node(np.ascontiguousarray(a.data[:, start:stop]), (a,), grad, "slice_channels")


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.shape[-1] != bd.shape[-2 if bd.ndim > 1 else 0]:
        raise ShapeMismatch(f"matmul: inner dims differ for {ad.shape} @ {bd.shape}")
    if ad.ndim == 2 and bd.ndim == 2:
        def grad(g):
            return g @ bd.T, ad.T @ g
    elif ad.ndim == 3 and bd.ndim == 3:
        if ad.shape[0] != bd.shape[0]:
            raise ShapeMismatch(f"matmul: batch dims differ for {ad.shape} @ {bd.shape}")

        def grad(g):
            return g @ bd.swapaxes(-1, -2), ad.swapaxes(-1, -2) @ g
    elif ad.ndim == 3 and bd.ndim == 2:
        def grad(g):
            return g @ bd.T, np.tensordot(ad, g, axes=([0, 1], [0, 1]))
    else:
        raise ShapeMismatch(f"matmul: unsupported ranks {ad.shape} @ {bd.shape}")
    return _node(ad @ bd, (a, b), grad, "matmul")


def conv2d(x, w, bias=None, stride=1):
    """3x3 convolution, zero padding 1, stride 1 or 2, optional channel bias."""
    xd, wd = x.data, w.data
    if xd.ndim != 4 or wd.ndim != 4 or wd.shape[2:] != (3, 3):
        raise ShapeMismatch(f"conv2d expects (B,C,H,W) and (O,C,3,3), got {xd.shape}, {wd.shape}")
    if xd.shape[1] != wd.shape[1]:
        raise ShapeMismatch(f"conv2d: {xd.shape[1]} input channels vs kernel {wd.shape[1]}")
    if stride not in (1, 2):
        raise ValueError(f"conv2d stride must be 1 or 2, got {stride}")
    out = kernels.conv2d_forward(xd, wd, stride)
    parents = (x, w) if bias is None else (x, w, bias)
    if bias is not None:
        out = out + bias.data[None, :, None, None]

    def grad(g):
        g = np.ascontiguousarray(g)
        dx = kernels.conv2d_backward_input(g, wd, stride, xd.shape[2:]) if x.requires_grad else None
        dw = kernels.conv2d_backward_weight(g, xd, stride) if w.requires_grad else None
        if bias is None:
            return dx, dw
        return dx, dw, g.sum(axis=(0, 2, 3))

    return _node(out, parents, grad, "conv2d")


def upsample2x(x):
    """Nearest-neighbour 2x spatial upsampling of a (B,C,H,W) tensor."""
    xd = x.data
    out = xd.repeat(2, axis=2).repeat(2, axis=3)

    def grad(g):
        b, c, h2, w2 = g.shape
        return (g.reshape(b, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5)),)

    return _node(out, (x,), grad, "upsample2x")


# ---------------------------------------------------------------------------
# normalization and nonlinearities


def group_norm(x, gamma, beta, num_groups, eps=1e-5):
    """Normalize a (B,C,H,W) tensor over channel groups, then scale and shift."""
    xd = x.data
    b, c, h, w = xd.shape
    if c % num_groups:
        raise ShapeMismatch(f"group_norm: {c} channels not divisible by {num_groups} groups")
    xg = xd.reshape(b, num_groups, -1)
    mean = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mean) * inv).reshape(xd.shape)
    out = xhat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]

    def grad(g):
        dxhat = (g * gamma.data[None, :, None, None]).reshape(b, num_groups, -1)
        xh = xhat.reshape(b, num_groups, -1)
        m1 = dxhat.mean(axis=2, keepdims=True)
        m2 = (dxhat * xh).mean(axis=2, keepdims=True)
        dx = ((dxhat - m1 - xh * m2) * inv).reshape(xd.shape)
        dgamma = (g * xhat).sum(axis=(0, 2, 3))
        dbeta = g.sum(axis=(0, 2, 3))
        return dx, dgamma, dbeta

    return _node(out, (x, gamma, beta), grad, "group_norm")


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize over the last axis of an (..., D) tensor: one group spanning all features."""
    xd = x.data
    mean = xd.mean(axis=-1, keepdims=True)
    var = xd.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mean) * inv
    out = xhat * gamma.data + beta.data

    def grad(g):
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = (dxhat - m1 - xhat * m2) * inv
        axes = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return _node(out, (x, gamma, beta), grad, "layer_norm")


def silu(x):
    """Sigmoid-weighted linear unit, the smooth nonlinearity used throughout."""
    xd = x.data
    sig = 1.0 / (1.0 + np.exp(-xd))
    out = xd * sig

    def grad(g):
        return (g * (sig * (1.0 + xd * (1.0 - sig))),)

    return _node(out, (x,), grad, "silu")


def softmax(x):
    """Softmax over the last axis. Input must be finite; rows sum to 1."""
    xd = x.data
    if not np.all(np.isfinite(xd)):
        raise NumericStateError("softmax input contains non-finite values")
    shifted = xd - xd.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def grad(g):
        dot = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - dot),)

    return _node(out, (x,), grad, "softmax")


def embedding(table, ids):
    """Row lookup into a (V, D) table with an integer id array."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise IndexError(
            f"embedding ids out of range [0, {table.data.shape[0]}): "
            f"min {ids.min()}, max {ids.max()}"
        )

    def grad(g):
        dt = np.zeros_like(table.data)
        np.add.at(dt, ids, g)
        return (dt,)

    return _node(table.data[ids], (table,), grad, "embedding")


# ---------------------------------------------------------------------------
# reductions


def mean(x, axis=None):
    xd = x.data
    if axis is None:
        count = xd.size

        def grad(g):
            return (np.full_like(xd, g / count),)

        return _node(np.asarray(xd.mean()), (x,), grad, "mean")
    axis = tuple(axis) if isinstance(axis, (tuple, list)) else (axis,)
    count = math.prod(xd.shape[a] for a in axis)

    def grad(g):
        return (np.broadcast_to(np.expand_dims(g, axis) / count, xd.shape).copy(),)

    return _node(xd.mean(axis=axis), (x,), grad, "mean")


def mse(a, b):
    """Mean squared error between two same-shape tensors, as a scalar."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"mse: shapes differ {a.data.shape} vs {b.data.shape}")
    diff = a.data - b.data
    n = diff.size

    def grad(g):
        d = (2.0 * g / n) * diff
        return d, -d

    return _node(np.asarray((diff * diff).mean()), (a, b), grad, "mse")


# ---------------------------------------------------------------------------
# gradient checking


class GradCheckReport:
    def __init__(self, max_rel_err, worst_param, n_checked, tol):
        self.max_rel_err = max_rel_err
        self.worst_param = worst_param
        self.n_checked = n_checked
        self.tol = tol
        self.passed = max_rel_err <= tol

    def __repr__(self):
        verdict = "pass" if self.passed else "FAIL"
        return (f"GradCheckReport({verdict}: max_rel_err={self.max_rel_err:.3e} "
                f"at {self.worst_param!r}, n={self.n_checked}, tol={self.tol:.1e})")


def grad_check(fn, params, h=None, tol=1e-3, n_samples=64, seed=0):
    """Compare analytic gradients of ``fn()`` against central finite differences.

    ``fn`` must be a deterministic closure over ``params`` returning a scalar
    Tensor; it is evaluated twice up front and a bitwise mismatch raises
    ``DeterminismError``.  A seeded random subset of at most ``n_samples``
    scalar entries across all parameters is probed; the step is ``h`` when
    given, else cbrt(eps) * max(1, |value|) per entry.
    """
    l1 = fn()
    l2 = fn()
    if l1.data.ndim != 0:
        raise ShapeMismatch(f"grad_check: fn must return a scalar, got {l1.data.shape}")
    if l1.data.tobytes() != l2.data.tobytes():
        raise DeterminismError(
            f"fn is not deterministic: {l1.data.item()!r} != {l2.data.item()!r}"
        )
    params.zero_grad()
    backward(fn())
    analytic = {name: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for name, t in params.items()}

    entries = [(name, i) for name, t in params.items() for i in range(t.data.size)]
    rng = np.random.default_rng(seed)
    if len(entries) > n_samples:
        idx = rng.choice(len(entries), size=n_samples, replace=False)
        entries = [entries[i] for i in sorted(idx)]

    base_h = float(np.cbrt(np.finfo(np.float64).eps))
    max_rel = 0.0
    worst = None
    for name, flat_i in entries:
        t = params[name]
        view = t.data.reshape(-1)
        orig = view[flat_i]
        step = h if h is not None else base_h * max(1.0, abs(orig))
        view[flat_i] = orig + step
        up = fn().data.item()
        view[flat_i] = orig - step
        down = fn().data.item()
        view[flat_i] = orig
        fd = (up - down) / (2.0 * step)
        an = analytic[name].reshape(-1)[flat_i]
        rel = abs(an - fd) / max(abs(an), abs(fd), 1e-6)
        if rel > max_rel:
            max_rel = rel
            worst = name
    return GradCheckReport(max_rel, worst, len(entries), tol)
