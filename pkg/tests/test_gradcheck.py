"""Finite-difference verification harness behavior."""

import numpy as np
import pytest

from prosynth.fragments import (decoder_step_fragment, direct_aggregation_fragment,
                                encoder_block_fragment, gmm_attention_fragment,
                                linear_fragment, weighted_aggregation_fragment)
from prosynth.gradcheck import check_gradients
from prosynth.layers import Linear
from prosynth.tensor import Tensor


def test_single_linear_layer_tight_tolerance():
    name, loss_fn, params = linear_fragment(seed=0)
    report = check_gradients(loss_fn, params, step=1e-5, tolerance=1e-6)
    assert report.passed, report.summary()
    assert report.max_rel_err < 1e-6


def test_full_attention_block():
    name, loss_fn, params = encoder_block_fragment(seed=1)
    report = check_gradients(loss_fn, params, step=1e-4, tolerance=1e-4,
                             max_elements_per_param=24)
    assert report.passed, report.summary()


def test_weighted_aggregation():
    name, loss_fn, params = weighted_aggregation_fragment(seed=2)
    report = check_gradients(loss_fn, params, step=1e-4, tolerance=1e-4,
                             max_elements_per_param=24)
    assert report.passed, report.summary()


def test_direct_aggregation():
    name, loss_fn, params = direct_aggregation_fragment(seed=3)
    report = check_gradients(loss_fn, params, step=1e-4, tolerance=1e-4,
                             max_elements_per_param=24)
    assert report.passed, report.summary()


def test_gmm_attention_rollout():
    name, loss_fn, params = gmm_attention_fragment(seed=4)
    report = check_gradients(loss_fn, params, step=1e-4, tolerance=1e-4)
    assert report.passed, report.summary()


def test_decoder_steps():
    name, loss_fn, params = decoder_step_fragment(seed=5)
    report = check_gradients(loss_fn, params, step=1e-4, tolerance=1e-4,
                             max_elements_per_param=12)
    assert report.passed, report.summary()


def test_detects_a_wrong_gradient():
    rng = np.random.default_rng(0)
    layer = Linear(4, 3, rng)
    x = Tensor(rng.normal(size=(2, 4)))

    # The first call (analytic pass) sees a different function than the
    # finite-difference probes; the disagreement must be flagged.
    calls = {"n": 0}
    def inconsistent():
        calls["n"] += 1
        scale = 1.0 if calls["n"] == 1 else 3.0
        return layer(x).mean() * scale

    report = check_gradients(inconsistent, layer.parameters(), step=1e-5,
                             tolerance=1e-6)
    assert not report.passed


def test_rejects_bad_step():
    name, loss_fn, params = linear_fragment()
    with pytest.raises(ValueError):
        check_gradients(loss_fn, params, step=0.0)
