"""Minimal reverse-mode automatic differentiation on numpy arrays.

Tensors are eager: the forward value is computed on construction and each
op registers a closure that maps the output adjoint to the input adjoints.
`backward` walks the graph once in reverse topological order and returns a
`GradientMap` keyed by tensor node id. Training runs in float32, gradient
checking in float64; ops preserve the dtype of their inputs.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "Tensor",
    "GradientMap",
    "backward",
    "grad_check",
    "concat",
    "stack_rows",
    "l2_norm",
    "cosine_similarity",
    "softmax",
    "logsumexp",
    "dropout",
    "embedding_lookup",
    "conv1d_valid",
    "transposed_conv1d",
    "conv2d_valid",
    "transposed_conv2d",
    "max_pool_time",
    "max_unpool_time",
]

_node_ids = itertools.count()


class ShapeError(ValueError):
    """Raised when operand shapes do not conform to a primitive."""


def _as_array(value, like: Optional[np.ndarray] = None) -> np.ndarray:
    arr = np.asarray(value)
    if arr.dtype.kind != "f":
        dtype = like.dtype if like is not None else np.float32
        arr = arr.astype(dtype)
    return arr


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """An n-dimensional real array participating in a differentiation graph."""

    __slots__ = ("data", "requires_grad", "node_id", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.requires_grad = requires_grad
        self.node_id = next(_node_ids)
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Optional[Callable[[np.ndarray], tuple]] = None

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence["Tensor"], vjp) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.node_id = next(_node_ids)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._vjp = vjp
        else:
            out.requires_grad = False
            out._parents = ()
            out._vjp = None
        return out

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # -- elementwise arithmetic -----------------------------------------

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(_as_array(other, like=self.data))

    def __add__(self, other) -> "Tensor":
        other = self._coerce(other)
        data = self.data + other.data
        sa, sb = self.shape, other.shape
        return Tensor._from_op(
            data, (self, other),
            lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
        )

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        other = self._coerce(other)
        data = self.data - other.data
        sa, sb = self.shape, other.shape
        return Tensor._from_op(
            data, (self, other),
            lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)),
        )

    def __rsub__(self, other) -> "Tensor":
        return self._coerce(other).__sub__(self)

    def __neg__(self) -> "Tensor":
        return Tensor._from_op(-self.data, (self,), lambda g: (-g,))

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            c = other
            return Tensor._from_op(self.data * c, (self,), lambda g: (g * c,))
        other = self._coerce(other)
        a, b = self.data, other.data
        return Tensor._from_op(
            a * b, (self, other),
            lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return self * (1.0 / other)
        other = self._coerce(other)
        a, b = self.data, other.data
        return Tensor._from_op(
            a / b, (self, other),
            lambda g: (
                _unbroadcast(g / b, a.shape),
                _unbroadcast(-g * a / (b * b), b.shape),
            ),
        )

    def __matmul__(self, other) -> "Tensor":
        other = self._coerce(other)
        a, b = self.data, other.data
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        return Tensor._from_op(
            a @ b, (self, other),
            lambda g: (g @ b.T, a.T @ g),
        )

    # -- shape ops -------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        orig = self.data.shape
        try:
            data = self.data.reshape(shape)
        except ValueError as exc:
            raise ShapeError(f"reshape: cannot view {orig} as {shape}") from exc
        return Tensor._from_op(data, (self,), lambda g: (g.reshape(orig),))

    def transpose(self) -> "Tensor":
        if self.data.ndim != 2:
            raise ShapeError(f"transpose: expected a matrix, got shape {self.shape}")
        return Tensor._from_op(self.data.T.copy(), (self,), lambda g: (g.T,))

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def index0(self, i: int) -> "Tensor":
        """Select entry `i` along the leading axis (drops that axis)."""
        parent_shape = self.data.shape
        data = self.data[i]

        def vjp(g):
            full = np.zeros(parent_shape, dtype=g.dtype)
            full[i] = g
            return (full,)

        return Tensor._from_op(data, (self,), vjp)

    def head_rows(self, n: int) -> "Tensor":
        """Keep the first `n` entries along the leading axis."""
        if n > self.data.shape[0]:
            raise ShapeError(f"head_rows: asked for {n} rows of shape {self.shape}")
        parent_shape = self.data.shape
        data = self.data[:n]

        def vjp(g):
            full = np.zeros(parent_shape, dtype=g.dtype)
            full[:n] = g
            return (full,)

        return Tensor._from_op(data, (self,), vjp)

    # -- reductions and pointwise functions -------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        data = self.data.sum(axis=axis, keepdims=keepdims)
        shape = self.data.shape

        def vjp(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape),)

        return Tensor._from_op(np.asarray(data), (self,), vjp)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            n = self.data.size
        else:
            n = self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor._from_op(out, (self,), lambda g: (g * out,))

    def log(self) -> "Tensor":
        x = self.data
        return Tensor._from_op(np.log(x), (self,), lambda g: (g / x,))

    def sqrt(self) -> "Tensor":
        out = np.sqrt(self.data)
        return Tensor._from_op(out, (self,), lambda g: (g * (0.5 / out),))

    def maximum(self, c: float) -> "Tensor":
        """Elementwise max with a constant; subgradient 0 at the kink."""
        x = self.data
        return Tensor._from_op(
            np.maximum(x, c), (self,),
            lambda g: (np.where(x > c, g, 0.0),),
        )


# -- module-level ops ------------------------------------------------------


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along an existing axis."""
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat: need at least one tensor")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._from_op(data, tensors, vjp)


def stack_rows(vectors: Sequence[Tensor]) -> Tensor:
    """Stack 1-d tensors of equal length into a matrix, one per row."""
    return concat([v.reshape(1, -1) for v in vectors], axis=0)


def l2_norm(t: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    """Euclidean norm; the reduced axes must not be all-zero where used."""
    x = t.data
    out = np.sqrt((x * x).sum(axis=axis, keepdims=keepdims))

    def vjp(g):
        n = out
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
            n = np.expand_dims(n, axis)
        return (g * x / n,)

    return Tensor._from_op(np.asarray(out), (t,), vjp)


def cosine_similarity(u: Tensor, v: Tensor) -> Tensor:
    """Cosine of two 1-d tensors."""
    if u.shape != v.shape or u.data.ndim != 1:
        raise ShapeError(f"cosine_similarity: expected equal vectors, got {u.shape} and {v.shape}")
    dot = (u * v).sum()
    return dot / (l2_norm(u) * l2_norm(v))


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    """Softmax over one axis, computed with the log-sum-exp shift."""
    x = t.data
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return Tensor._from_op(out, (t,), vjp)


def logsumexp(t: Tensor, axis: int = -1) -> Tensor:
    """log(sum(exp(t))) over one axis via the max shift; exact gradient."""
    shift = t.data.max(axis=axis, keepdims=True)
    shifted = t - Tensor(shift)
    total = shifted.exp().sum(axis=axis)
    return total.log() + Tensor(np.squeeze(shift, axis=axis))


def dropout(t: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero entries with probability `rate`, scale by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout: rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return t
    keep = rng.random(t.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    factor = keep.astype(t.dtype) * t.dtype.type(scale)
    return Tensor._from_op(t.data * factor, (t,), lambda g: (g * factor,))


def embedding_lookup(weights: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of a V x d table by an integer id array."""
    ids = np.asarray(ids)
    if ids.size and ids.max() >= weights.shape[0]:
        raise IndexError(
            f"embedding_lookup: id {int(ids.max())} out of range for table of {weights.shape[0]} rows"
        )
    w = weights.data

    def vjp(g):
        gw = np.zeros_like(w)
        np.add.at(gw, ids, g)
        return (gw,)

    return Tensor._from_op(w[ids], (weights,), vjp)


# -- convolution / pooling --------------------------------------------------


def _windows_1d(x: np.ndarray, ks: int) -> np.ndarray:
    """Row-major im2col for a P x d sequence: (P-ks+1) x (ks*d)."""
    p, d = x.shape
    out = np.empty((p - ks + 1, ks * d), dtype=x.dtype)
    for j in range(ks):
        out[:, j * d:(j + 1) * d] = x[j:p - ks + 1 + j]
    return out


def conv1d_valid(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Valid stride-1 convolution of a P x d sequence with c_out kernels of shape ks x d."""
    if x.data.ndim != 2 or kernels.data.ndim != 3:
        raise ShapeError(f"conv1d_valid: expected 2-d input and 3-d kernels, got {x.shape} and {kernels.shape}")
    p, d = x.shape
    c_out, ks, kd = kernels.shape
    if kd != d:
        raise ShapeError(f"conv1d_valid: kernel width {kd} does not match embedding width {d}")
    if bias.shape != (c_out,):
        raise ShapeError(f"conv1d_valid: bias shape {bias.shape} does not match {c_out} channels")
    if p < ks:
        raise ShapeError(f"conv1d_valid: sequence shorter than kernel (P={p} < ks={ks})")

    win = _windows_1d(x.data, ks)               # (P-ks+1) x (ks*d)
    k2 = kernels.data.reshape(c_out, ks * d)
    out = win @ k2.T + bias.data

    def vjp(g):
        gwin = g @ k2
        gx = np.zeros_like(x.data)
        for j in range(ks):
            gx[j:p - ks + 1 + j] += gwin[:, j * d:(j + 1) * d]
        gk = (g.T @ win).reshape(c_out, ks, d)
        return (gx, gk, g.sum(axis=0))

    return Tensor._from_op(out, (x, kernels, bias), vjp)


def transposed_conv1d(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Adjoint of conv1d_valid as a forward op: P x c_in -> (P+ks-1) x d by scatter-add."""
    if x.data.ndim != 2 or kernels.data.ndim != 3:
        raise ShapeError(f"transposed_conv1d: expected 2-d input and 3-d kernels, got {x.shape} and {kernels.shape}")
    p, c_in = x.shape
    kc, ks, d = kernels.shape
    if kc != c_in:
        raise ShapeError(f"transposed_conv1d: input channels {c_in} do not match kernel channels {kc}")
    if bias.shape != (d,):
        raise ShapeError(f"transposed_conv1d: bias shape {bias.shape} does not match width {d}")

    out = np.tile(bias.data, (p + ks - 1, 1))
    for j in range(ks):
        out[j:j + p] += x.data @ kernels.data[:, j, :]

    def vjp(g):
        gx = np.zeros_like(x.data)
        gk = np.zeros_like(kernels.data)
        for j in range(ks):
            gseg = g[j:j + p]
            gx += gseg @ kernels.data[:, j, :].T
            gk[:, j, :] = x.data.T @ gseg
        return (gx, gk, g.sum(axis=0))

    return Tensor._from_op(out, (x, kernels, bias), vjp)


def conv2d_valid(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Valid cross-correlation of one R x C plane: c_out x (R-kh+1) x (C-kw+1)."""
    if x.data.ndim != 2 or kernels.data.ndim != 3:
        raise ShapeError(f"conv2d_valid: expected 2-d plane and 3-d kernels, got {x.shape} and {kernels.shape}")
    r, c = x.shape
    c_out, kh, kw = kernels.shape
    if r < kh or c < kw:
        raise ShapeError(f"conv2d_valid: plane {x.shape} smaller than kernel ({kh}, {kw})")
    if bias.shape != (c_out,):
        raise ShapeError(f"conv2d_valid: bias shape {bias.shape} does not match {c_out} channels")

    rr, cc = r - kh + 1, c - kw + 1
    out = np.empty((c_out, rr, cc), dtype=x.dtype)
    out[:] = bias.data[:, None, None]
    for a in range(kh):
        for b in range(kw):
            patch = x.data[a:a + rr, b:b + cc]
            out += kernels.data[:, a, b][:, None, None] * patch

    def vjp(g):
        gx = np.zeros_like(x.data)
        gk = np.zeros_like(kernels.data)
        for a in range(kh):
            for b in range(kw):
                patch = x.data[a:a + rr, b:b + cc]
                gx[a:a + rr, b:b + cc] += np.einsum("o,orc->rc", kernels.data[:, a, b], g)
                gk[:, a, b] = (g * patch).sum(axis=(1, 2))
        return (gx, gk, g.sum(axis=(1, 2)))

    return Tensor._from_op(out, (x, kernels, bias), vjp)


def transposed_conv2d(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Adjoint of conv2d_valid as a forward op: c_in x R' x C' -> (R'+kh-1) x (C'+kw-1) plane."""
    if x.data.ndim != 3 or kernels.data.ndim != 3:
        raise ShapeError(f"transposed_conv2d: expected 3-d input and 3-d kernels, got {x.shape} and {kernels.shape}")
    c_in, rr, cc = x.shape
    kc, kh, kw = kernels.shape
    if kc != c_in:
        raise ShapeError(f"transposed_conv2d: input channels {c_in} do not match kernel channels {kc}")
    if bias.size != 1:
        raise ShapeError(f"transposed_conv2d: bias must be a scalar, got shape {bias.shape}")

    out = np.full((rr + kh - 1, cc + kw - 1), bias.data.reshape(()), dtype=x.dtype)
    for a in range(kh):
        for b in range(kw):
            out[a:a + rr, b:b + cc] += np.einsum("o,orc->rc", kernels.data[:, a, b], x.data)

    def vjp(g):
        gx = np.zeros_like(x.data)
        gk = np.zeros_like(kernels.data)
        for a in range(kh):
            for b in range(kw):
                gseg = g[a:a + rr, b:b + cc]
                gx += kernels.data[:, a, b][:, None, None] * gseg
                gk[:, a, b] = (x.data * gseg).sum(axis=(1, 2))
        return (gx, gk, g.sum().reshape(bias.shape))

    return Tensor._from_op(out, (x, kernels, bias), vjp)


def max_pool_time(t: Tensor) -> tuple[Tensor, np.ndarray]:
    """Max over positions of a P x c feature map; ties go to the lowest index.

    Returns the pooled c-vector and the integer argmax positions. The
    backward rule routes the adjoint only to the argmax entries.
    """
    if t.data.ndim != 2:
        raise ShapeError(f"max_pool_time: expected a P x c map, got shape {t.shape}")
    p, c = t.shape
    indices = t.data.argmax(axis=0)
    values = t.data[indices, np.arange(c)]

    def vjp(g):
        gx = np.zeros_like(t.data)
        gx[indices, np.arange(c)] = g
        return (gx,)

    return Tensor._from_op(values, (t,), vjp), indices


def max_unpool_time(values: Tensor, indices: np.ndarray, length: int) -> Tensor:
    """Place a c-vector back at recorded positions of a length x c map, zeros elsewhere."""
    if values.data.ndim != 1:
        raise ShapeError(f"max_unpool_time: expected a vector, got shape {values.shape}")
    indices = np.asarray(indices)
    c = values.shape[0]
    if indices.shape != (c,):
        raise ShapeError(f"max_unpool_time: {c} values but indices shape {indices.shape}")
    if indices.size and (indices.min() < 0 or indices.max() >= length):
        raise IndexError(f"max_unpool_time: index {int(indices.max())} out of range for length {length}")
    cols = np.arange(c)
    out = np.zeros((length, c), dtype=values.dtype)
    out[indices, cols] = values.data

    def vjp(g):
        return (g[indices, cols],)

    return Tensor._from_op(out, (values,), vjp)


# -- backward pass ----------------------------------------------------------


class GradientMap:
    """Accumulated adjoints keyed by node id; absent entries mean zero."""

    def __init__(self, grads: dict[int, np.ndarray]):
        self._grads = grads

    def wrt(self, t: Tensor) -> np.ndarray:
        """Adjoint of `t`, zero-filled if the loss does not depend on it."""
        g = self._grads.get(t.node_id)
        if g is None:
            return np.zeros_like(t.data)
        return g

    def __contains__(self, t: Tensor) -> bool:
        return t.node_id in self._grads

    def __len__(self) -> int:
        return len(self._grads)


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.node_id in visited:
            continue
        visited.add(node.node_id)
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and parent.node_id not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> GradientMap:
    """Reverse-mode sweep from a scalar loss to every requires_grad leaf."""
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return GradientMap({})

    grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
    leaves: dict[int, np.ndarray] = {}
    for node in reversed(_topo_order(loss)):
        g = grads.pop(node.node_id, None)
        if g is None:
            continue
        if node._vjp is None:
            leaves[node.node_id] = g
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            if pg.dtype != parent.data.dtype:
                pg = pg.astype(parent.data.dtype)
            if pg.shape != parent.data.shape:
                pg = pg.reshape(parent.data.shape)
            prev = grads.get(parent.node_id)
            grads[parent.node_id] = pg if prev is None else prev + pg
    return GradientMap(leaves)


def grad_check(
    f: Callable[..., Tensor],
    arrays: Iterable[np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Compare analytic gradients of `f` against central finite differences.

    `f` maps one tensor per input array to a scalar tensor and is re-evaluated
    with perturbed copies, so it must be deterministic. Inputs are promoted to
    float64. Returns max |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    leaves = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    grads = backward(f(*leaves))
    analytic = [grads.wrt(t) for t in leaves]

    def value() -> float:
        return float(f(*[Tensor(a) for a in arrays]).data)

    worst = 0.0
    for ai, arr in enumerate(arrays):
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + eps
            f_plus = value()
            arr[idx] = orig - eps
            f_minus = value()
            arr[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            exact = float(analytic[ai][idx])
            err = abs(exact - numeric) / max(1.0, abs(exact), abs(numeric))
            worst = max(worst, err)
    return worst
