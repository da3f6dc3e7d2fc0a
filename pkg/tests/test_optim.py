"""Momentum SGD update rule and cosine schedule values."""

import math

import numpy as np
import pytest

from deltaprompt import autodiff as ad
from deltaprompt.errors import ConfigError, NumericError
from deltaprompt.optim import SGD, cosine_lr


def _param(value):
    p = ad.parameter(value)
    return p


def test_single_step_no_momentum():
    p = _param([1.0])
    p.grad = np.array([2.0])
    opt = SGD({"p": p}, lr=1.0, momentum=0.0, schedule="constant")
    opt.step()
    np.testing.assert_allclose(p.data, [-1.0])
    assert p.grad is None


def test_two_steps_momentum_accumulates_velocity():
    p = _param([0.0])
    opt = SGD({"p": p}, lr=1.0, momentum=0.9, schedule="constant")
    p.grad = np.array([1.0])
    opt.step()
    p.grad = np.array([1.0])
    opt.step()
    # v1 = 1, v2 = 0.9 + 1 = 1.9; p = -(1 + 1.9)
    np.testing.assert_allclose(opt.velocity["p"], [1.9])
    np.testing.assert_allclose(p.data, [-2.9])


def test_cosine_schedule_midpoint_is_half():
    assert cosine_lr(0.002, 50, 100) == pytest.approx(0.001)
    assert cosine_lr(0.002, 0, 100) == pytest.approx(0.002)
    assert cosine_lr(0.002, 100, 100) == pytest.approx(0.0, abs=1e-18)


def test_cosine_schedule_monotone_decreasing():
    vals = [cosine_lr(1.0, t, 40) for t in range(41)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_missing_gradient_is_an_error():
    p = _param([1.0])
    opt = SGD({"p": p}, lr=0.1, momentum=0.0, schedule="constant")
    with pytest.raises(NumericError, match="no gradient"):
        opt.step()


def test_schedule_validation():
    p = _param([1.0])
    with pytest.raises(ConfigError):
        SGD({"p": p}, lr=0.1, schedule="linear")
    with pytest.raises(ConfigError):
        SGD({"p": p}, lr=0.1, schedule="cosine", total_steps=0)
    assert math.isclose(
        SGD({"p": p}, lr=0.1, schedule="cosine", total_steps=10).current_lr(), 0.1
    )
