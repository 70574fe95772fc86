"""Minimal dense-tensor math with reverse-mode differentiation.

Everything is float64 and every operation is recorded on a :class:`Tape`;
creation order is the topological order, so the backward pass is a single
reverse sweep.  The op set is exactly what the sequence encoder, the graph
encoders and the classification head need; there is no fusion, no views, no
GPU, and every op checks its output for NaN/Inf.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, NumericError

Array = np.ndarray


def _as_f64(x) -> Array:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim > 0 and not arr.flags.c_contiguous:
        arr = np.ascontiguousarray(arr)
    return arr


def _check_finite(arr: Array, op: str) -> None:
    # cheap probe first: a non-finite entry makes the sum non-finite; the
    # full scan only runs to rule out overflow of the sum itself
    if not np.isfinite(arr.sum()) and not np.all(np.isfinite(arr)):
        raise NumericError(f"{op} produced non-finite values")


def sigmoid(x: Array) -> Array:
    """Numerically stable logistic function (pure, tape-free)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: Array) -> Array:
    """Shift-stabilized softmax over the last axis (pure, tape-free)."""
    x = np.asarray(x, dtype=np.float64)
    z = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(x: Array) -> Array:
    x = np.asarray(x, dtype=np.float64)
    z = x - np.max(x, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def _unbroadcast(g: Array, shape: tuple[int, ...]) -> Array:
    """Sum gradient g down to the given operand shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


class PackedLists:
    """Ragged index lists flattened for vectorized segment reductions."""

    __slots__ = ("flat", "starts", "counts", "min_index", "max_index")

    def __init__(self, flat: Array, starts: Array, counts: Array) -> None:
        self.flat = flat
        self.starts = starts
        self.counts = counts
        self.min_index = int(flat.min()) if flat.size else 0
        self.max_index = int(flat.max()) if flat.size else -1


def pack_index_lists(index_lists: Sequence[Sequence[int]]) -> PackedLists:
    counts = np.empty(len(index_lists), dtype=np.intp)
    chunks: list[int] = []
    for i, lst in enumerate(index_lists):
        if len(lst) == 0:
            raise ContractError(f"empty index list at position {i}")
        counts[i] = len(lst)
        chunks.extend(lst)
    flat = np.asarray(chunks, dtype=np.intp)
    starts = np.zeros(len(index_lists), dtype=np.intp)
    if len(index_lists) > 1:
        np.cumsum(counts[:-1], out=starts[1:])
    return PackedLists(flat, starts, counts)


class Tensor:
    """A float64 array plus its position on the tape."""

    __slots__ = ("data", "idx")

    def __init__(self, data: Array, idx: int) -> None:
        self.data = data
        self.idx = idx

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape


class _Node:
    __slots__ = ("parents", "vjp", "needs_grad", "shape")

    def __init__(
        self,
        parents: tuple[int, ...],
        vjp: Callable[[Array], tuple[Array | None, ...]] | None,
        needs_grad: bool,
        shape: tuple[int, ...],
    ) -> None:
        self.parents = parents
        self.vjp = vjp
        self.needs_grad = needs_grad
        self.shape = shape


class Tape:
    """Ordered record of executed operations with per-node gradient buffers."""

    def __init__(self) -> None:
        self._nodes: list[_Node] = []
        self._grads: list[Array | None] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def _record(
        self,
        data: Array,
        parents: tuple[Tensor, ...],
        vjp: Callable[[Array], tuple[Array | None, ...]] | None,
        op: str,
        needs_grad: bool | None = None,
    ) -> Tensor:
        _check_finite(data, op)
        if needs_grad is None:
            needs_grad = any(self._nodes[p.idx].needs_grad for p in parents)
        self._nodes.append(
            _Node(tuple(p.idx for p in parents), vjp, needs_grad, data.shape)
        )
        self._grads.append(None)
        return Tensor(data, len(self._nodes) - 1)

    # -- leaves ------------------------------------------------------------

    def param(self, data) -> Tensor:
        """Register a trainable leaf; gradients accumulate for it."""
        return self._record(_as_f64(data), (), None, "param", needs_grad=True)

    def constant(self, data) -> Tensor:
        """Register a non-trainable leaf (inputs, position codes, adjacency)."""
        return self._record(_as_f64(data), (), None, "constant", needs_grad=False)

    # -- ops ---------------------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        A, B = a.data, b.data
        if A.ndim > 2 or B.ndim > 2 or A.ndim == 0 or B.ndim == 0:
            raise DimensionError(f"matmul supports 1-D/2-D operands, got {A.shape} @ {B.shape}")
        a2 = A.reshape(1, -1) if A.ndim == 1 else A
        b2 = B.reshape(-1, 1) if B.ndim == 1 else B
        if a2.shape[1] != b2.shape[0]:
            raise DimensionError(f"matmul shape mismatch: {A.shape} @ {B.shape}")
        out2 = a2 @ b2
        if A.ndim == 1 and B.ndim == 1:
            out = out2.reshape(())
        elif A.ndim == 1:
            out = out2.reshape(-1)
        elif B.ndim == 1:
            out = out2.reshape(-1)
        else:
            out = out2

        def vjp(g: Array) -> tuple[Array | None, Array | None]:
            g2 = g.reshape(a2.shape[0], b2.shape[1])
            da = (g2 @ b2.T).reshape(A.shape)
            db = (a2.T @ g2).reshape(B.shape)
            return da, db

        return self._record(out, (a, b), vjp, "matmul")

    def transpose(self, a: Tensor) -> Tensor:
        if a.data.ndim != 2:
            raise DimensionError(f"transpose expects a 2-D tensor, got {a.shape}")
        return self._record(
            a.data.T.copy(), (a,), lambda g: (g.T,), "transpose"
        )

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        A, B = a.data, b.data
        try:
            out = A + B
        except ValueError:
            raise DimensionError(f"add shape mismatch: {A.shape} + {B.shape}") from None

        def vjp(g: Array) -> tuple[Array, Array]:
            return _unbroadcast(g, A.shape), _unbroadcast(g, B.shape)

        return self._record(out, (a, b), vjp, "add")

    def add_n(self, terms: Sequence[Tensor]) -> Tensor:
        if not terms:
            raise ContractError("add_n needs at least one term")
        shape = terms[0].shape
        for t in terms:
            if t.shape != shape:
                raise DimensionError(f"add_n shape mismatch: {shape} vs {t.shape}")
        out = terms[0].data.copy()
        for t in terms[1:]:
            out += t.data
        return self._record(
            out, tuple(terms), lambda g: tuple(g for _ in terms), "add_n"
        )

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        A, B = a.data, b.data
        try:
            out = A * B
        except ValueError:
            raise DimensionError(f"mul shape mismatch: {A.shape} * {B.shape}") from None

        def vjp(g: Array) -> tuple[Array, Array]:
            return _unbroadcast(g * B, A.shape), _unbroadcast(g * A, B.shape)

        return self._record(out, (a, b), vjp, "mul")

    def scale(self, a: Tensor, c: float) -> Tensor:
        c = float(c)
        return self._record(a.data * c, (a,), lambda g: (g * c,), "scale")

    def relu(self, a: Tensor) -> Tensor:
        mask = a.data > 0
        return self._record(
            np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu"
        )

    def sigmoid(self, a: Tensor) -> Tensor:
        out = sigmoid(a.data)
        return self._record(
            out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid"
        )

    def concat_rows(self, parts: Sequence[Tensor]) -> Tensor:
        """Concatenate 1-D tensors end to end."""
        if not parts:
            raise ContractError("concat_rows needs at least one part")
        for p in parts:
            if p.data.ndim != 1:
                raise DimensionError(f"concat_rows expects 1-D parts, got {p.shape}")
        sizes = [p.data.shape[0] for p in parts]
        out = np.concatenate([p.data for p in parts])
        offsets = np.cumsum([0] + sizes)

        def vjp(g: Array) -> tuple[Array, ...]:
            return tuple(g[offsets[k] : offsets[k + 1]] for k in range(len(parts)))

        return self._record(out, tuple(parts), vjp, "concat_rows")

    def stack_rows(self, rows: Sequence[Tensor]) -> Tensor:
        """Stack equal-width 1-D tensors into a matrix, one per row."""
        if not rows:
            raise ContractError("stack_rows needs at least one row")
        width = rows[0].data.shape
        for r in rows:
            if r.data.ndim != 1 or r.data.shape != width:
                raise DimensionError(
                    f"stack_rows expects equal-width 1-D rows, got {r.shape} vs {width}"
                )
        out = np.stack([r.data for r in rows])
        return self._record(
            out, tuple(rows), lambda g: tuple(g[k] for k in range(len(rows))), "stack_rows"
        )

    def row_select(self, a: Tensor, i: int) -> Tensor:
        if a.data.ndim != 2:
            raise DimensionError(f"row_select expects a 2-D tensor, got {a.shape}")
        if not (0 <= i < a.data.shape[0]):
            raise ContractError(f"row {i} out of range for {a.shape}")

        def vjp(g: Array) -> tuple[Array]:
            da = np.zeros_like(a.data)
            da[i] = g
            return (da,)

        return self._record(a.data[i].copy(), (a,), vjp, "row_select")

    def gather_rows(self, a: Tensor, ids: Sequence[int]) -> Tensor:
        if a.data.ndim != 2:
            raise DimensionError(f"gather_rows expects a 2-D tensor, got {a.shape}")
        idx = np.asarray(ids, dtype=np.intp)
        if idx.ndim != 1:
            raise DimensionError("gather_rows expects a flat id list")
        if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[0]):
            raise ContractError(
                f"gather index out of range for {a.data.shape[0]} rows"
            )

        def vjp(g: Array) -> tuple[Array]:
            da = np.zeros_like(a.data)
            np.add.at(da, idx, g)
            return (da,)

        return self._record(a.data[idx], (a,), vjp, "gather_rows")

    def mean_rows(self, a: Tensor, index_lists) -> Tensor:
        """Row i of the result is the mean of a's rows named by index_lists[i].

        Accepts plain index lists or a prepacked :class:`PackedLists`, which
        callers that reuse the same lists should build once.
        """
        packed = (
            index_lists
            if isinstance(index_lists, PackedLists)
            else pack_index_lists(index_lists)
        )
        X = a.data
        if X.ndim != 2:
            raise DimensionError(f"mean_rows expects a 2-D tensor, got {a.shape}")
        if packed.counts.size == 0:
            raise ContractError("mean_rows needs at least one index list")
        if packed.min_index < 0 or packed.max_index >= X.shape[0]:
            raise ContractError("mean_rows: index out of range")
        sums = np.add.reduceat(X[packed.flat], packed.starts, axis=0)
        out = sums / packed.counts[:, None]

        def vjp(g: Array) -> tuple[Array]:
            da = np.zeros_like(X)
            np.add.at(
                da, packed.flat, np.repeat(g / packed.counts[:, None], packed.counts, axis=0)
            )
            return (da,)

        return self._record(out, (a,), vjp, "mean_rows")

    def softmax_rows(self, a: Tensor) -> Tensor:
        if a.data.ndim != 2:
            raise DimensionError(f"softmax_rows expects a 2-D tensor, got {a.shape}")
        out = softmax(a.data)

        def vjp(g: Array) -> tuple[Array]:
            dot = np.sum(g * out, axis=1, keepdims=True)
            return (out * (g - dot),)

        return self._record(out, (a,), vjp, "softmax_rows")

    def softmax_cross_entropy(self, logits: Tensor, gold_index: int) -> Tensor:
        """Negative log softmax probability of the gold class (scalar)."""
        z = logits.data
        if z.ndim != 1:
            raise DimensionError(f"softmax_cross_entropy expects 1-D logits, got {logits.shape}")
        if not (0 <= gold_index < z.shape[0]):
            raise ContractError(f"gold index {gold_index} out of range for {z.shape[0]} classes")
        shifted = z - z.max()
        lse = np.log(np.sum(np.exp(shifted)))
        loss = np.asarray(lse - shifted[gold_index])
        probs = np.exp(shifted - lse)

        def vjp(g: Array) -> tuple[Array]:
            dz = probs.copy()
            dz[gold_index] -= 1.0
            return (dz * g,)

        return self._record(loss, (logits,), vjp, "softmax_cross_entropy")

    # -- reverse sweep -------------------------------------------------------

    def backward(self, loss: Tensor) -> None:
        """Populate gradient buffers by one reverse traversal from loss."""
        if loss.data.shape != ():
            raise ContractError(f"loss must be scalar, got shape {loss.data.shape}")
        self._grads = [None] * len(self._nodes)
        self._grads[loss.idx] = np.ones(())
        for idx in range(loss.idx, -1, -1):
            node = self._nodes[idx]
            g = self._grads[idx]
            if g is None or node.vjp is None:
                continue
            parent_grads = node.vjp(g)
            for p_idx, pg in zip(node.parents, parent_grads):
                if pg is None or not self._nodes[p_idx].needs_grad:
                    continue
                if self._grads[p_idx] is None:
                    self._grads[p_idx] = np.zeros(self._nodes[p_idx].shape)
                self._grads[p_idx] += pg

    def grad(self, t: Tensor) -> Array:
        """Gradient buffer of a tensor; zeros when it was never reached."""
        g = self._grads[t.idx]
        if g is None:
            return np.zeros(t.data.shape)
        return g


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


def finite_diff_check(
    f: Callable[[list[Array]], tuple[float, list[Array]]],
    params: list[Array],
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between analytic gradients and central differences.

    ``f(params)`` must return (scalar loss, gradients in parameter order);
    finite-difference probes reuse f and read only the loss.  The relative
    error denominator is max(|analytic|, |numeric|, 1e-8).
    """
    if epsilon <= 0:
        raise ContractError("epsilon must be positive")
    loss0, grads = f(params)
    if not np.isfinite(loss0):
        raise NumericError("f returned a non-finite loss")
    if len(grads) != len(params):
        raise ContractError("f must return one gradient per parameter")
    worst = 0.0
    for p, g in zip(params, grads):
        if g.shape != p.shape:
            raise ContractError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        for k in range(p.size):
            orig = p.flat[k]
            p.flat[k] = orig + epsilon
            up, _ = f(params)
            p.flat[k] = orig - epsilon
            down, _ = f(params)
            p.flat[k] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise NumericError("f returned a non-finite loss during probing")
            numeric = (up - down) / (2.0 * epsilon)
            analytic = g.reshape(-1)[k]
            denom = max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
