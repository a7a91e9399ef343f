import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import adam_reference, central_difference
from sentikit.autodiff import ShapeError, Tape, Tensor
from sentikit.optim import (
    AdamState,
    NonFiniteGradientError,
    adam_step,
    bce_loss,
    binary_accuracy,
)


def loss_of(p, y):
    return bce_loss(Tape(), Tensor(np.asarray(p, dtype=np.float64)), y).item()


def test_bce_perfect_prediction_hits_clamp_floor():
    assert loss_of([1.0, 0.0], [1, 0]) <= -math.log(1 - 1e-7) + 1e-15


def test_bce_half_is_ln2():
    assert loss_of([0.5, 0.5, 0.5], [1, 0, 1]) == pytest.approx(math.log(2), abs=1e-12)


def test_bce_length_mismatch():
    with pytest.raises(ShapeError):
        loss_of([0.5, 0.5], [1])


def test_bce_gradient_against_finite_differences():
    rng = np.random.default_rng(0)
    p0, y = rng.uniform(0.05, 0.95, size=6), rng.integers(0, 2, size=6)
    p = Tensor(p0, requires_grad=True)
    tape = Tape()
    tape.backward(bce_loss(tape, p, y))

    def ref(q):
        return float(-np.mean(y * np.log(q) + (1 - y) * np.log(1 - q)))

    num = central_difference(ref, p0)
    assert np.max(np.abs(p.grad - num) / np.maximum(1, np.abs(num))) < 1e-6


@given(st.floats(0.0, 1.0), st.integers(0, 1))
def test_bce_nonnegative(p, y):
    assert loss_of([p], [y]) >= 0


@pytest.mark.parametrize("y", [0, 1])
def test_bce_minimized_at_label(y):
    grid = np.linspace(0.0, 1.0, 101)
    losses = [loss_of([q], [y]) for q in grid]
    assert grid[int(np.argmin(losses))] == float(y)


def test_accuracy_rules():
    assert binary_accuracy([0.9, 0.1], [1, 0]) == 1.0
    assert binary_accuracy([0.1, 0.9], [1, 0]) == 0.0
    assert binary_accuracy([0.5], [1]) == 1.0
    with pytest.raises(ShapeError):
        binary_accuracy([0.5], [1, 0])


def test_adam_zero_gradient_is_noop():
    theta = Tensor(np.array([1.0, -2.0]))
    adam_step({"w": theta}, {"w": np.zeros(2)}, AdamState())
    np.testing.assert_array_equal(theta.data, [1.0, -2.0])


def test_adam_first_step():
    theta = Tensor(np.array([0.0]))
    adam_step({"w": theta}, {"w": np.array([1.0])}, AdamState(lr=0.001))
    assert theta.data[0] == pytest.approx(-0.001 / (1 + 1e-8), rel=1e-12)


def test_adam_matches_straight_line_reference_bitwise():
    theta = Tensor(np.array([0.3]))
    state = AdamState(lr=0.01)
    for _ in range(2):
        adam_step({"w": theta}, {"w": np.array([0.7])}, state)
    assert theta.data[0] == adam_reference(0.3, [0.7, 0.7], lr=0.01)
    assert state.t == 2


def test_adam_zero_lr_is_identity():
    theta = Tensor(np.random.default_rng(1).normal(size=5))
    before = theta.data.copy()
    state = AdamState(lr=0.0)
    for _ in range(3):
        adam_step({"w": theta}, {"w": np.ones(5)}, state)
    np.testing.assert_array_equal(theta.data, before)


def test_adam_constant_positive_gradient_decreases():
    theta = Tensor(np.array([1.0]))
    state = AdamState()
    last = theta.data[0]
    for _ in range(50):
        adam_step({"w": theta}, {"w": np.array([0.2])}, state)
        assert theta.data[0] < last
        last = theta.data[0]


def test_adam_rejects_non_finite_gradient():
    theta = Tensor(np.array([1.0]))
    with pytest.raises(NonFiniteGradientError, match="'w'"):
        adam_step({"w": theta}, {"w": np.array([np.nan])}, AdamState())
    assert theta.data[0] == 1.0
