"""A short tour of the tape: record ops, run backward, check against finite differences."""

import numpy as np

from sentikit import Tape, Tensor, gradient_check
from sentikit.layers import LstmParams, lstm_sequence, lstm_sequence_unrolled

rng = np.random.default_rng(0)

# y = sum(relu(x @ W)) ; every op goes through the tape
x = Tensor(rng.normal(size=(4, 3)))
W = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
tape = Tape()
y = tape.sum(tape.relu(tape.matmul(x, W)))
tape.backward(y)
print("loss", y.item())
print("dL/dW\n", W.grad)

# the same gradient, numerically
err = gradient_check(lambda t, w: t.sum(t.relu(t.matmul(x, w))), W)
print("max relative error vs central differences:", err)

# the fused LSTM kernel agrees with the step-by-step version built from primitives
p = LstmParams.init(rng, 3, 5)
seq = Tensor(rng.normal(size=(2, 7, 3)))
fused = lstm_sequence(Tape(record=False), seq, p).data
unrolled = lstm_sequence_unrolled(Tape(record=False), seq, p).data
print("fused vs unrolled max |diff|:", np.abs(fused - unrolled).max())

# gradient through 7 steps of BPTT
r = Tensor(rng.normal(size=(2, 5)))
print("BPTT gradient check:", gradient_check(lambda t, s: t.sum(t.mul(lstm_sequence(t, s, p), r)), seq))
