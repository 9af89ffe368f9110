"""Dense-matrix reverse-mode autodiff and the Adam optimizer.

Every value is a 2-D float64 array. Operations build a graph through parent
links; :func:`backward` orders that graph topologically and sweeps it once in
reverse. The graph is discarded with the tensors, so each training step builds
a fresh one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp


class ShapeError(ValueError):
    pass


class StructureError(ValueError):
    pass


class NumericError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf",
                 parents: tuple = (), backward_fn: Callable | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NumericError(f"non-finite value produced by '{op}'")
        self.data = arr
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.op = op
        self._parents = parents if self.requires_grad else ()
        self._backward = backward_fn if self.requires_grad else None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> Tensor:
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, op, parents, backward_fn) -> Tensor:
    return Tensor(data, op=op, parents=tuple(parents), backward_fn=backward_fn)


def _is_scalar(x) -> bool:
    if isinstance(x, Tensor):
        return x.shape == (1, 1)
    return np.size(x) == 1


def _check_same(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------- products

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    A, B = a.data, b.data
    return _node(A @ B, "matmul", (a, b), lambda g: (g @ B.T, A.T @ g))


def _validate_csr(s: sp.csr_matrix) -> None:
    n_rows, n_cols = s.shape
    if len(s.indptr) != n_rows + 1 or s.indptr[-1] != len(s.indices):
        raise StructureError("spmm: malformed CSR row pointer")
    if len(s.indices) and (s.indices.min() < 0 or s.indices.max() >= n_cols):
        raise StructureError(
            f"spmm: column index {int(s.indices.max())} out of bounds for {n_cols} columns")


def spmm(s, x: Tensor) -> Tensor:
    """Constant propagation matrix times tensor.

    ``s`` is a CSR matrix (the usual case) or a dense array such as a diffusion
    matrix. Gradient flows only into ``x``.
    """
    x = as_tensor(x)
    if sp.issparse(s):
        s = s.tocsr() if s.format != "csr" else s
        _validate_csr(s)
    else:
        s = np.asarray(s, dtype=np.float64)
    if s.shape[1] != x.shape[0]:
        raise ShapeError(f"spmm: {s.shape} cannot multiply {x.shape}")
    st = s.T
    out = np.asarray(s @ x.data)
    return _node(out, "spmm", (x,), lambda g: (np.asarray(st @ g),))


# ------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a = as_tensor(a)
    if a.shape == (1, 1) and isinstance(b, Tensor) and b.shape != (1, 1):
        a, b = b, a
    if _is_scalar(b) and a.shape != (1, 1):
        b = as_tensor(b)
        return _node(a.data + b.data[0, 0], "add", (a, b), lambda g: (g, np.array([[g.sum()]])))
    b = as_tensor(b)
    _check_same("add", a, b)
    return _node(a.data + b.data, "add", (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    return add(a, neg(as_tensor(b)))


def neg(a: Tensor) -> Tensor:
    a = as_tensor(a)
    return _node(-a.data, "neg", (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    """Hadamard product, or scaling by a python number / 1x1 tensor."""
    a = as_tensor(a)
    if a.shape == (1, 1) and isinstance(b, Tensor) and b.shape != (1, 1):
        a, b = b, a
    if _is_scalar(b) and a.shape != (1, 1):
        b = as_tensor(b)
        A, c = a.data, b.data[0, 0]
        return _node(A * c, "scale", (a, b),
                     lambda g: (g * c, np.array([[np.sum(g * A)]])))
    b = as_tensor(b)
    _check_same("mul", a, b)
    A, B = a.data, b.data
    return _node(A * B, "mul", (a, b), lambda g: (g * B, g * A))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same("div", a, b)
    A, B = a.data, b.data
    return _node(A / B, "div", (a, b), lambda g: (g / B, -g * A / (B * B)))


def square(a: Tensor) -> Tensor:
    a = as_tensor(a)
    A = a.data
    return _node(A * A, "square", (a,), lambda g: (2.0 * g * A,))


def reciprocal(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = 1.0 / a.data
    return _node(out, "reciprocal", (a,), lambda g: (-g * out * out,))


def log(a: Tensor) -> Tensor:
    a = as_tensor(a)
    A = a.data
    return _node(np.log(A), "log", (a,), lambda g: (g / A,))


def exp(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _node(out, "exp", (a,), lambda g: (g * out,))


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), "relu", (a,), lambda g: (g * mask,))


def tanh(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _node(out, "tanh", (a,), lambda g: (g * (1.0 - out * out),))


def identity(a: Tensor) -> Tensor:
    return as_tensor(a)


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": relu,
    "tanh": tanh,
    "linear": identity,
}


def elementwise(kind: str, a, b=None) -> Tensor:
    """Dispatch by name: add, sub, mul, div, square, relu, tanh, exp, log, linear."""
    binary = {"add": add, "sub": sub, "mul": mul, "div": div}
    unary = {"square": square, "exp": exp, "log": log, "neg": neg, **ACTIVATIONS}
    if kind in binary:
        return binary[kind](a, b)
    if kind in unary:
        return unary[kind](a)
    raise ValueError(f"unknown elementwise op {kind!r}")


# ---------------------------------------------------------- shape / reduce

def transpose(a: Tensor) -> Tensor:
    a = as_tensor(a)
    return _node(a.data.T, "transpose", (a,), lambda g: (g.T,))


def sum_all(a: Tensor) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    return _node(np.array([[a.data.sum()]]), "sum", (a,),
                 lambda g: (np.full(shape, g[0, 0]),))


def mean_all(a: Tensor) -> Tensor:
    return mul(sum_all(a), 1.0 / (a.shape[0] * a.shape[1]))


def row_sum(a: Tensor) -> Tensor:
    """Sum across columns, n x m -> n x 1."""
    a = as_tensor(a)
    m = a.shape[1]
    return _node(a.data.sum(axis=1, keepdims=True), "row_sum", (a,),
                 lambda g: (np.repeat(g, m, axis=1),))


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """x (n x m) plus a 1 x m row vector on every row."""
    x, b = as_tensor(x), as_tensor(b)
    if b.shape != (1, x.shape[1]):
        raise ShapeError(f"add_bias: bias {b.shape} does not fit {x.shape}")
    return _node(x.data + b.data, "add_bias", (x, b),
                 lambda g: (g, g.sum(axis=0, keepdims=True)))


def take_rows(x: Tensor, idx) -> Tensor:
    """Gather rows x[idx]; repeated indices accumulate in the gradient."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    shape = x.shape

    def back(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return _node(x.data[idx], "take_rows", (x,), back)


def gather_dot(zq: Tensor, za: Tensor, idx) -> Tensor:
    """out[i, k] = zq[i] . za[idx[i, k]] for an integer n x M index table."""
    zq, za = as_tensor(zq), as_tensor(za)
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 2 or idx.shape[0] != zq.shape[0]:
        raise ShapeError(f"gather_dot: index table {idx.shape} vs queries {zq.shape}")
    if zq.shape[1] != za.shape[1]:
        raise ShapeError(f"gather_dot: embedding widths {zq.shape} vs {za.shape}")
    Q, A = zq.data, za.data
    gathered = A[idx]
    out = np.einsum("id,ikd->ik", Q, gathered)

    def back(g):
        gq = np.einsum("ik,ikd->id", g, gathered)
        ga = np.zeros_like(A)
        np.add.at(ga, idx.ravel(), (g[:, :, None] * Q[:, None, :]).reshape(-1, Q.shape[1]))
        return gq, ga

    return _node(out, "gather_dot", (zq, za), back)


def diag_part(a: Tensor) -> Tensor:
    """Diagonal of a square tensor as an n x 1 column."""
    a = as_tensor(a)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"diag_part: {a.shape} is not square")
    n = a.shape[0]
    return _node(np.diag(a.data).reshape(n, 1).copy(), "diag", (a,),
                 lambda g: (np.diag(g[:, 0]),))


# ------------------------------------------------------- row-wise numerics

def softmax_rows(a: Tensor) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def back(g):
        return (out * (g - np.sum(g * out, axis=1, keepdims=True)),)

    return _node(out, "softmax_rows", (a,), back)


def log_softmax_rows(a: Tensor) -> Tensor:
    a = as_tensor(a)
    z = a.data - a.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = z - lse
    sm = np.exp(out)

    def back(g):
        return (g - sm * g.sum(axis=1, keepdims=True),)

    return _node(out, "log_softmax_rows", (a,), back)


def normalize_rows(a: Tensor) -> Tensor:
    """Scale each row to unit Euclidean norm; zero rows stay zero (gradient 0)."""
    a = as_tensor(a)
    A = a.data
    norms = np.sqrt(np.sum(A * A, axis=1, keepdims=True))
    safe = np.where(norms > 0, norms, 1.0)
    out = np.where(norms > 0, A / safe, 0.0)

    def back(g):
        proj = np.sum(g * out, axis=1, keepdims=True)
        return (np.where(norms > 0, (g - out * proj) / safe, 0.0),)

    return _node(out, "normalize_rows", (a,), back)


def row_normalize_sum(a: Tensor) -> Tensor:
    """Divide each row by its sum (rows must have positive sums)."""
    a = as_tensor(a)
    A = a.data
    s = A.sum(axis=1, keepdims=True)
    out = A / s

    def back(g):
        return ((g - np.sum(g * out, axis=1, keepdims=True)) / s,)

    return _node(out, "row_normalize_sum", (a,), back)


def pairwise_sqdist(z: Tensor, mu: Tensor) -> Tensor:
    """out[i, j] = ||z_i - mu_j||^2."""
    z, mu = as_tensor(z), as_tensor(mu)
    if z.shape[1] != mu.shape[1]:
        raise ShapeError(f"pairwise_sqdist: widths {z.shape} vs {mu.shape}")
    Z, M = z.data, mu.data
    diff = Z[:, None, :] - M[None, :, :]
    out = np.einsum("ijd,ijd->ij", diff, diff)

    def back(g):
        w = 2.0 * g[:, :, None] * diff
        return w.sum(axis=1), -w.sum(axis=0)

    return _node(out, "pairwise_sqdist", (z, mu), back)


# ---------------------------------------------------------------- backward

def _topological(loss: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
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


def backward(loss: Tensor, wrt: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Gradients of a 1x1 loss.

    Returns a map from tensor to gradient array for every grad-requiring leaf
    reached from ``loss``; tensors listed in ``wrt`` that are not reached map to
    zeros. Every recorded node is visited exactly once, in reverse topological
    order.
    """
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _topological(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    leaves: dict[Tensor, np.ndarray] = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            if node.requires_grad:
                leaves[node] = g
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if not parent.requires_grad:
                continue
            if not np.all(np.isfinite(pg)):
                raise NumericError(f"non-finite gradient from op '{node.op}'")
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg
    if wrt is not None:
        for t in wrt:
            if t not in leaves:
                leaves[t] = np.zeros(t.shape)
    return leaves


# ------------------------------------------------------------------- Adam

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState) -> AdamState:
    """One bias-corrected Adam update, applied in place to ``params``."""
    missing = [k for k in params if k not in grads]
    if missing:
        raise KeyError(f"adam_step: no gradient for {missing}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"adam_step: gradient {g.shape} for parameter {name} {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros(p.shape)
            state.v[name] = np.zeros(p.shape)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        p.data = p.data - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)
