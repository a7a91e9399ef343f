"""Dense tensors with reverse-mode gradient recording.

Every operation is a method on a :class:`Tape`.  The tape appends one record
per executed op (output, inputs, backward rule) and :meth:`Tape.backward`
walks those records once, in reverse execution order, accumulating
gradients into every tensor created with ``requires_grad=True``.

Layers that need a fused kernel (LSTM unrolling, 1-D convolution, pooling)
register their own backward rule through :meth:`Tape.record`.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class ShapeError(ValueError):
    pass


class BackwardError(RuntimeError):
    pass


class Tensor:
    """An n-dimensional array that can take part in gradient recording."""

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"


class _Record:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out: Tensor, inputs: tuple[Tensor, ...], backward: BackwardFn):
        self.out = out
        self.inputs = inputs
        self.backward = backward


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast_bias(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return grad.sum(axis=0).reshape(shape)


def _check_binary(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape == b.shape:
        return
    # bias row (n,) or (1, n) added across an m x n matrix
    if a.data.ndim == 2 and b.shape in ((a.shape[1],), (1, a.shape[1])):
        return
    raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


class Tape:
    """Ordered record of executed operations.

    With ``record=False`` the tape still computes every op but keeps no
    history; use it for inference.
    """

    def __init__(self, record: bool = True):
        self.recording = record
        self.records: list[_Record] = []
        self._done = False

    def __len__(self) -> int:
        return len(self.records)

    def reset(self) -> None:
        self.records.clear()
        self._done = False

    def record(self, out_data: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
        """Wrap ``out_data`` as a tensor and register its backward rule.

        ``backward`` receives the upstream gradient and returns one gradient
        per input (``None`` for inputs that need none).
        """
        if self._done:
            raise BackwardError("tape already consumed by backward(); call reset() first")
        inputs = tuple(inputs)
        needs = any(t.requires_grad for t in inputs)
        out = Tensor(out_data, requires_grad=needs)
        if self.recording and needs:
            self.records.append(_Record(out, inputs, backward))
        return out

    # -- linear algebra -------------------------------------------------
    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
        A, B = a.data, b.data
        return self.record(A @ B, (a, b), lambda g: (g @ B.T, A.T @ g))

    # -- elementwise ----------------------------------------------------
    def add(self, a: Tensor, b: Tensor) -> Tensor:
        _check_binary(a, b, "add")
        sa, sb = a.shape, b.shape
        return self.record(
            a.data + b.data, (a, b), lambda g: (g, _unbroadcast_bias(g, sb) if sb != sa else g)
        )

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        _check_binary(a, b, "sub")
        sa, sb = a.shape, b.shape
        return self.record(
            a.data - b.data, (a, b), lambda g: (g, -_unbroadcast_bias(g, sb) if sb != sa else -g)
        )

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        _check_binary(a, b, "mul")
        A, B = a.data, b.data
        sb = b.shape
        return self.record(A * B, (a, b), lambda g: (g * B, _unbroadcast_bias(g * A, sb)))

    def scale(self, a: Tensor, c: float) -> Tensor:
        return self.record(a.data * c, (a,), lambda g: (g * c,))

    def sigmoid(self, a: Tensor) -> Tensor:
        s = expit(a.data)
        return self.record(s, (a,), lambda g: (g * s * (1.0 - s),))

    def tanh(self, a: Tensor) -> Tensor:
        t = np.tanh(a.data)
        return self.record(t, (a,), lambda g: (g * (1.0 - t * t),))

    def relu(self, a: Tensor) -> Tensor:
        # derivative at exactly 0 is taken as 0
        mask = a.data > 0
        return self.record(np.where(mask, a.data, 0).astype(a.dtype), (a,), lambda g: (g * mask,))

    def activation(self, kind: str, a: Tensor) -> Tensor:
        if kind not in ("relu", "tanh", "sigmoid"):
            raise ValueError(f"unknown activation {kind!r}")
        return getattr(self, kind)(a)

    def elementwise(self, op: str, *args: Tensor) -> Tensor:
        if op in ("add", "sub", "mul"):
            return getattr(self, op)(*args)
        if op in ("sigmoid", "tanh", "relu"):
            return getattr(self, op)(*args)
        raise ValueError(f"unknown elementwise op {op!r}")

    # -- reductions -----------------------------------------------------
    def sum(self, a: Tensor) -> Tensor:
        shape = a.shape
        return self.record(np.asarray(a.data.sum()), (a,), lambda g: (np.full(shape, g, dtype=a.dtype),))

    def mean(self, a: Tensor) -> Tensor:
        shape, n = a.shape, a.data.size
        return self.record(np.asarray(a.data.mean()), (a,), lambda g: (np.full(shape, g / n, dtype=a.dtype),))

    def reduce(self, op: str, a: Tensor) -> Tensor:
        if op not in ("sum", "mean"):
            raise ValueError(f"unknown reduction {op!r}")
        return getattr(self, op)(a)

    # -- shape manipulation ---------------------------------------------
    def reshape(self, a: Tensor, shape: tuple[int, ...]) -> Tensor:
        src = a.shape
        return self.record(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))

    def getitem(self, a: Tensor, key) -> Tensor:
        src, dt = a.shape, a.dtype

        def back(g):
            out = np.zeros(src, dtype=dt)
            np.add.at(out, key, g)
            return (out,)

        return self.record(np.array(a.data[key]), (a,), back)

    # -- reverse pass ---------------------------------------------------
    def backward(self, loss: Tensor) -> None:
        """Populate ``.grad`` on every ``requires_grad`` leaf recorded here.

        Leaves that do not reach ``loss`` receive a zero gradient.  A tape
        may be consumed only once; call :meth:`reset` to reuse it.
        """
        if self._done:
            raise BackwardError("backward() already called on this tape; call reset() first")
        if loss.data.size != 1:
            raise BackwardError(f"loss must be scalar, got shape {loss.shape}")
        if not any(r.out is loss for r in self.records):
            raise BackwardError("loss was not produced by an operation on this tape")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        produced = {id(r.out) for r in self.records}
        leaves: dict[int, Tensor] = {}
        for rec in reversed(self.records):
            g_out = grads.pop(id(rec.out), None)
            for t in rec.inputs:
                if t.requires_grad and id(t) not in produced:
                    leaves[id(t)] = t
            if g_out is None:
                continue
            for t, g in zip(rec.inputs, rec.backward(g_out)):
                if g is None or not t.requires_grad:
                    continue
                key = id(t)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
        for key, t in leaves.items():
            g = grads.get(key)
            g = np.zeros_like(t.data) if g is None else np.asarray(g, dtype=t.dtype).reshape(t.shape)
            t.grad = g if t.grad is None else t.grad + g
        self._done = True


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


def gradient_check(f: Callable[[Tape, Tensor], Tensor], x: Tensor, eps: float = 1e-5) -> float:
    """Compare reverse-mode gradients of scalar ``f`` at ``x`` to central differences.

    Returns ``max_i |analytic_i - numeric_i| / max(1, |analytic_i|, |numeric_i|)``.
    """
    x0 = np.array(x.data, dtype=np.float64)
    probe = Tensor(x0.copy(), requires_grad=True)
    tape = Tape()
    out = f(tape, probe)
    if not np.all(np.isfinite(out.data)):
        raise FloatingPointError("non-finite value in f(x)")
    tape.backward(out)
    analytic = probe.grad.reshape(-1)

    numeric = np.empty_like(analytic)
    flat = x0.reshape(-1)
    for i in range(flat.size):
        vals = []
        for step in (eps, -eps):
            bumped = flat.copy()
            bumped[i] += step
            y = f(Tape(record=False), Tensor(bumped.reshape(x0.shape))).data
            if not np.all(np.isfinite(y)):
                raise FloatingPointError(f"non-finite value in f at coordinate {i}")
            vals.append(float(y.reshape(-1)[0]))
        numeric[i] = (vals[0] - vals[1]) / (2 * eps)
    if not np.all(np.isfinite(analytic)):
        raise FloatingPointError("non-finite analytic gradient")
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom)) if flat.size else 0.0
