"""Neural building blocks and the LSTM / CNN review classifiers.

The LSTM unroll, 1-D convolution, max pooling and embedding lookup are
fused kernels: each records a single tape entry with a hand-derived
backward rule.  :func:`lstm_step` and :func:`lstm_sequence_unrolled` build
the same recurrence out of primitive tape ops and serve as the reference
the fused unroll is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ShapeError, Tape, Tensor

ACTIVATIONS = ("relu", "tanh", "sigmoid")
GATES = ("f", "i", "o", "c")


def uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype=np.float64) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


# ---------------------------------------------------------------------------
# parameter containers


@dataclass
class EmbeddingParams:
    E: Tensor

    @property
    def dim(self) -> int:
        return self.E.shape[1]


@dataclass
class DenseParams:
    W: Tensor
    b: Tensor

    @classmethod
    def init(cls, rng, n_in: int, n_out: int, dtype=np.float64) -> "DenseParams":
        return cls(
            Tensor(uniform_init(rng, (n_in, n_out), n_in, dtype), requires_grad=True),
            Tensor(uniform_init(rng, (n_out,), n_in, dtype), requires_grad=True),
        )


@dataclass
class LstmParams:
    W_f: Tensor
    W_i: Tensor
    W_o: Tensor
    W_c: Tensor
    U_f: Tensor
    U_i: Tensor
    U_o: Tensor
    U_c: Tensor
    b_f: Tensor
    b_i: Tensor
    b_o: Tensor
    b_c: Tensor

    @property
    def input_size(self) -> int:
        return self.W_f.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.U_f.shape[0]

    @classmethod
    def init(cls, rng, d: int, h: int, dtype=np.float64) -> "LstmParams":
        kw = {}
        for g in GATES:
            kw[f"W_{g}"] = Tensor(uniform_init(rng, (d, h), h, dtype), requires_grad=True)
        for g in GATES:
            kw[f"U_{g}"] = Tensor(uniform_init(rng, (h, h), h, dtype), requires_grad=True)
        for g in GATES:
            kw[f"b_{g}"] = Tensor(uniform_init(rng, (h,), h, dtype), requires_grad=True)
        return cls(**kw)

    def tensors(self) -> list[Tensor]:
        return [getattr(self, f"{kind}_{g}") for kind in "WUb" for g in GATES]


@dataclass
class Conv1dParams:
    kernels: Tensor  # (F, k, c_in)
    bias: Tensor  # (F,)

    @property
    def width(self) -> int:
        return self.kernels.shape[1]

    @classmethod
    def init(cls, rng, filters: int, width: int, c_in: int, dtype=np.float64) -> "Conv1dParams":
        if width % 2 == 0:
            raise ValueError(f"kernel width must be odd for same padding, got {width}")
        fan_in = width * c_in
        return cls(
            Tensor(uniform_init(rng, (filters, width, c_in), fan_in, dtype), requires_grad=True),
            Tensor(uniform_init(rng, (filters,), fan_in, dtype), requires_grad=True),
        )


# ---------------------------------------------------------------------------
# layer operations


def embedding_forward(tape: Tape, ids: np.ndarray, E: Tensor) -> Tensor:
    """Look up rows of ``E``; the pad row 0 never receives gradient."""
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= E.shape[0]):
        raise IndexError(f"token id out of range [0, {E.shape[0] - 1}]")
    n_rows, dt = E.shape[0], E.dtype

    def back(g):
        dE = np.zeros((n_rows, g.shape[-1]), dtype=dt)
        np.add.at(dE, ids.reshape(-1), g.reshape(-1, g.shape[-1]))
        dE[0] = 0.0
        return (dE,)

    return tape.record(E.data[ids], (E,), back)


def dense(tape: Tape, x: Tensor, p: DenseParams) -> Tensor:
    return tape.add(tape.matmul(x, p.W), p.b)


def dropout(tape: Tape, x: Tensor, rate: float, mode: str, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout: identity in eval mode, scale survivors by 1/(1-rate) in train mode."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs a seeded generator")
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / x.dtype.type(1.0 - rate)
    return tape.record(x.data * mask, (x,), lambda g: (g * mask,))


def lstm_step(tape: Tape, x_t: Tensor, h_prev: Tensor, c_prev: Tensor, p: LstmParams) -> tuple[Tensor, Tensor]:
    """One LSTM update built from primitive ops."""
    if x_t.shape[1] != p.input_size or h_prev.shape[1] != p.hidden_size or c_prev.shape != h_prev.shape:
        raise ShapeError(
            f"lstm_step: x {x_t.shape}, h {h_prev.shape}, c {c_prev.shape} "
            f"vs input {p.input_size}, hidden {p.hidden_size}"
        )

    def pre(g):
        z = tape.add(tape.matmul(x_t, getattr(p, f"W_{g}")), tape.matmul(h_prev, getattr(p, f"U_{g}")))
        return tape.add(z, getattr(p, f"b_{g}"))

    f = tape.sigmoid(pre("f"))
    i = tape.sigmoid(pre("i"))
    o = tape.sigmoid(pre("o"))
    cand = tape.tanh(pre("c"))
    c_t = tape.add(tape.mul(f, c_prev), tape.mul(i, cand))
    h_t = tape.mul(o, tape.tanh(c_t))
    return h_t, c_t


def lstm_sequence_unrolled(tape: Tape, x: Tensor, p: LstmParams) -> Tensor:
    """Fold :func:`lstm_step` over time from zero state; returns the final hidden state."""
    B, T, _ = x.shape
    if T < 1:
        raise ShapeError("lstm_sequence needs at least one time step")
    h = Tensor(np.zeros((B, p.hidden_size), dtype=x.dtype))
    c = Tensor(np.zeros((B, p.hidden_size), dtype=x.dtype))
    for t in range(T):
        h, c = lstm_step(tape, tape.getitem(x, (slice(None), t, slice(None))), h, c, p)
    return h


def _fast_sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_sequence(tape: Tape, x: Tensor, p: LstmParams) -> Tensor:
    """Run the LSTM over ``x`` (B, T, d) from zero state and return h_T (B, h).

    Fused kernel: the whole unroll is a single tape record whose backward
    rule performs backpropagation through time.
    """
    if x.data.ndim != 3 or x.shape[2] != p.input_size:
        raise ShapeError(f"lstm_sequence: input {x.shape} does not match input size {p.input_size}")
    B, T, d = x.shape
    if T < 1:
        raise ShapeError("lstm_sequence needs at least one time step")
    h_size = p.hidden_size
    dt = np.result_type(x.dtype, p.W_f.dtype)
    W = np.concatenate([getattr(p, f"W_{g}").data for g in GATES], axis=1)  # (d, 4h)
    U = np.concatenate([getattr(p, f"U_{g}").data for g in GATES], axis=1)  # (h, 4h)
    bias = np.concatenate([getattr(p, f"b_{g}").data for g in GATES])
    X = x.data
    Zx = (X.reshape(B * T, d) @ W).reshape(B, T, 4 * h_size) + bias

    gates = np.empty((T, B, 4 * h_size), dtype=dt)  # post-activation f, i, o, c~
    cs = np.empty((T + 1, B, h_size), dtype=dt)
    hs = np.empty((T + 1, B, h_size), dtype=dt)
    cs[0] = 0.0
    hs[0] = 0.0
    s3 = 3 * h_size
    for t in range(T):
        z = Zx[:, t] + hs[t] @ U
        a = gates[t]
        a[:, :s3] = _fast_sigmoid(z[:, :s3])
        a[:, s3:] = np.tanh(z[:, s3:])
        cs[t + 1] = a[:, :h_size] * cs[t] + a[:, h_size : 2 * h_size] * a[:, s3:]
        hs[t + 1] = a[:, 2 * h_size : s3] * np.tanh(cs[t + 1])

    def back(g_h):
        dZ = np.empty((B, T, 4 * h_size), dtype=dt)
        dU = np.zeros_like(U)
        dh = np.array(g_h, dtype=dt)
        dc = np.zeros((B, h_size), dtype=dt)
        # flush values within 1e8 of the subnormal range: below it every float
        # op gets an order of magnitude slower, and the values are noise anyway
        tiny = np.finfo(dt).tiny * 1e8
        dZ[:] = 0.0
        for t in range(T - 1, -1, -1):
            a = gates[t]
            f, i, o, cand = a[:, :h_size], a[:, h_size : 2 * h_size], a[:, 2 * h_size : s3], a[:, s3:]
            tc = np.tanh(cs[t + 1])
            dc = dc + dh * o * (1.0 - tc * tc)
            dz = dZ[:, t]
            dz[:, :h_size] = dc * cs[t] * f * (1.0 - f)
            dz[:, h_size : 2 * h_size] = dc * cand * i * (1.0 - i)
            dz[:, 2 * h_size : s3] = dh * tc * o * (1.0 - o)
            dz[:, s3:] = dc * i * (1.0 - cand * cand)
            dU += hs[t].T @ dz
            dh = dz @ U.T
            dc = dc * f
            dh[np.abs(dh) < tiny] = 0.0
            dc[np.abs(dc) < tiny] = 0.0
            if not (dh.any() or dc.any()):
                break
        flat = dZ.reshape(B * T, 4 * h_size)
        dW = X.reshape(B * T, d).T @ flat
        db = flat.sum(axis=0)
        dx = (flat @ W.T).reshape(B, T, d)
        parts = []
        for mat in (dW, dU):
            parts.extend(np.split(mat, 4, axis=1))
        parts.extend(np.split(db, 4))
        return (dx, *parts)

    return tape.record(hs[T].copy(), (x, *p.tensors()), back)


def conv1d_same(tape: Tape, x: Tensor, p: Conv1dParams) -> Tensor:
    """Zero-padded 1-D convolution over time; (B, T, c_in) -> (B, T, F)."""
    F, k, c_in = p.kernels.shape
    if k % 2 == 0:
        raise ValueError(f"conv1d_same requires an odd kernel width, got {k}")
    if x.data.ndim != 3 or x.shape[2] != c_in:
        raise ShapeError(f"conv1d_same: input {x.shape} does not match {c_in} input channels")
    B, T, _ = x.shape
    half = (k - 1) // 2
    xp = np.pad(x.data, ((0, 0), (half, half), (0, 0)))
    # cols[b, t, j, c] = xp[b, t + j, c]
    cols = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1).transpose(0, 1, 3, 2).reshape(B * T, k * c_in)
    Wm = p.kernels.data.reshape(F, k * c_in).T
    out = (cols @ Wm + p.bias.data).reshape(B, T, F)

    def back(g):
        g2 = g.reshape(B * T, F)
        dK = (cols.T @ g2).T.reshape(F, k, c_in)
        db = g2.sum(axis=0)
        dcols = (g2 @ Wm.T).reshape(B, T, k, c_in)
        dxp = np.zeros_like(xp)
        for j in range(k):
            dxp[:, j : j + T] += dcols[:, :, j]
        return dxp[:, half : half + T], dK, db

    return tape.record(out, (x, p.kernels, p.bias), back)


def pooled_length(T: int, window: int, stride: int) -> int:
    return (T - window) // stride + 1 if window <= T else 0


def maxpool1d(tape: Tape, x: Tensor, window: int, stride: int) -> Tensor:
    """Windowed max over time; gradient goes to the first maximal position."""
    if window < 1 or stride < 1:
        raise ValueError(f"window and stride must be >= 1, got {window}, {stride}")
    B, T, F = x.shape
    if window > T:
        raise ValueError(f"pool window {window} exceeds sequence length {T}")
    L = pooled_length(T, window, stride)
    starts = stride * np.arange(L)
    stacked = np.stack([x.data[:, starts + j] for j in range(window)], axis=2)  # (B, L, w, F)
    arg = stacked.argmax(axis=2)
    out = np.take_along_axis(stacked, arg[:, :, None, :], axis=2)[:, :, 0]
    dt = x.dtype

    def back(g):
        dx = np.zeros((B, T, F), dtype=dt)
        for j in range(window):
            dx[:, starts + j] += np.where(arg == j, g, 0)
        return (dx,)

    return tape.record(out, (x,), back)


def flatten(tape: Tape, x: Tensor) -> Tensor:
    return tape.reshape(x, (x.shape[0], int(np.prod(x.shape[1:]))))


# ---------------------------------------------------------------------------
# classifiers


def _check_activation(kind: str) -> None:
    if kind not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}, got {kind!r}")


@dataclass
class LstmClassifier:
    """Embedding -> LSTM (final state) -> FC -> activation -> dropout -> dense(1) -> sigmoid."""

    embedding: EmbeddingParams
    lstm: LstmParams
    fc: DenseParams
    out: DenseParams
    hidden_activation: str = "relu"
    dropout_rate: float = 0.3

    kind = "lstm"

    @classmethod
    def init(
        cls,
        vocab_size: int,
        *,
        embedding_dim: int = 64,
        hidden_size: int = 128,
        fc_size: int = 64,
        activation: str = "relu",
        dropout: float = 0.3,
        seed: int = 0,
        dtype=np.float32,
        embedding_matrix: np.ndarray | None = None,
    ) -> "LstmClassifier":
        _check_activation(activation)
        rng = np.random.default_rng(seed)
        E = _embedding_matrix(rng, vocab_size, embedding_dim, embedding_matrix, dtype)
        return cls(
            EmbeddingParams(Tensor(E, requires_grad=True)),
            LstmParams.init(rng, embedding_dim, hidden_size, dtype),
            DenseParams.init(rng, hidden_size, fc_size, dtype),
            DenseParams.init(rng, fc_size, 1, dtype),
            activation,
            dropout,
        )

    def parameters(self) -> dict[str, Tensor]:
        named = {"embedding.E": self.embedding.E}
        for kind in "WUb":
            for g in GATES:
                named[f"lstm.{kind}_{g}"] = getattr(self.lstm, f"{kind}_{g}")
        named.update({"fc.W": self.fc.W, "fc.b": self.fc.b, "out.W": self.out.W, "out.b": self.out.b})
        return named

    def forward(self, tape: Tape, ids: np.ndarray, mode: str = "eval", rng=None) -> Tensor:
        x = embedding_forward(tape, ids, self.embedding.E)
        h = lstm_sequence(tape, x, self.lstm)
        z = tape.activation(self.hidden_activation, dense(tape, h, self.fc))
        z = dropout(tape, z, self.dropout_rate, mode, rng)
        return tape.sigmoid(dense(tape, z, self.out))


@dataclass
class CnnStage:
    conv: Conv1dParams
    pool_window: int = 2
    pool_stride: int = 2


@dataclass
class CnnClassifier:
    """Embedding -> 3 x (conv1d same -> activation -> maxpool) -> flatten -> dense -> activation -> dense(1) -> sigmoid."""

    embedding: EmbeddingParams
    stages: list[CnnStage]
    dense1: DenseParams
    dense2: DenseParams
    hidden_activation: str = "relu"

    kind = "cnn"

    @classmethod
    def init(
        cls,
        vocab_size: int,
        seq_len: int,
        *,
        embedding_dim: int = 64,
        filters: tuple[int, ...] = (128, 64, 32),
        kernel_size: int = 3,
        pool_window: int = 2,
        pool_stride: int = 2,
        dense_size: int = 64,
        activation: str = "relu",
        seed: int = 0,
        dtype=np.float32,
        embedding_matrix: np.ndarray | None = None,
    ) -> "CnnClassifier":
        _check_activation(activation)
        length = seq_len
        for n, _ in enumerate(filters, start=1):
            length = pooled_length(length, pool_window, pool_stride)
            if length < 1:
                raise ValueError(
                    f"sequence length {seq_len} collapses to 0 at pooling stage {n} "
                    f"(window {pool_window}, stride {pool_stride})"
                )
        rng = np.random.default_rng(seed)
        E = _embedding_matrix(rng, vocab_size, embedding_dim, embedding_matrix, dtype)
        stages, c_in = [], embedding_dim
        for F in filters:
            stages.append(CnnStage(Conv1dParams.init(rng, F, kernel_size, c_in, dtype), pool_window, pool_stride))
            c_in = F
        return cls(
            EmbeddingParams(Tensor(E, requires_grad=True)),
            stages,
            DenseParams.init(rng, length * c_in, dense_size, dtype),
            DenseParams.init(rng, dense_size, 1, dtype),
            activation,
        )

    def parameters(self) -> dict[str, Tensor]:
        named = {"embedding.E": self.embedding.E}
        for n, st in enumerate(self.stages, start=1):
            named[f"conv{n}.kernels"] = st.conv.kernels
            named[f"conv{n}.bias"] = st.conv.bias
        named.update({"dense1.W": self.dense1.W, "dense1.b": self.dense1.b})
        named.update({"dense2.W": self.dense2.W, "dense2.b": self.dense2.b})
        return named

    def forward(self, tape: Tape, ids: np.ndarray, mode: str = "eval", rng=None) -> Tensor:
        z = embedding_forward(tape, ids, self.embedding.E)
        for n, st in enumerate(self.stages, start=1):
            z = tape.activation(self.hidden_activation, conv1d_same(tape, z, st.conv))
            if st.pool_window > z.shape[1]:
                raise ValueError(f"stage {n}: pool window {st.pool_window} exceeds length {z.shape[1]}")
            z = maxpool1d(tape, z, st.pool_window, st.pool_stride)
        z = flatten(tape, z)
        if z.shape[1] != self.dense1.W.shape[0]:
            raise ShapeError(f"flattened width {z.shape[1]} != dense input {self.dense1.W.shape[0]}")
        z = tape.activation(self.hidden_activation, dense(tape, z, self.dense1))
        return tape.sigmoid(dense(tape, z, self.dense2))


def _embedding_matrix(rng, vocab_size, dim, given, dtype) -> np.ndarray:
    # draw even when a matrix is given so later parameters see the same stream
    E = rng.uniform(-0.05, 0.05, size=(vocab_size + 1, dim)).astype(dtype)
    if given is not None:
        given = np.asarray(given)
        if given.shape != E.shape:
            raise ShapeError(f"embedding matrix shape {given.shape} != {E.shape}")
        E = given.astype(dtype, copy=True)
    E[0] = 0.0
    return E


def forward_lstm_classifier(tape: Tape, ids: np.ndarray, m: LstmClassifier, mode: str = "eval", rng=None) -> Tensor:
    return m.forward(tape, ids, mode, rng)


def forward_cnn_classifier(tape: Tape, ids: np.ndarray, m: CnnClassifier, mode: str = "eval", rng=None) -> Tensor:
    return m.forward(tape, ids, mode, rng)
