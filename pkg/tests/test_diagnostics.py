import dataclasses

import pytest
from conftest import tiny_config

from dualqa_api.diagnostics import GRADCHECK_CONFIG, model_checks, primitive_checks, run_gradient_suite


def test_suite_covers_primitives_and_the_model():
    names = set(primitive_checks(0)) | set(model_checks(tiny_config(), 0))
    assert {"softmax_rows", "layer_normalize", "lstm_sequence", "embed_sequence", "encode_context",
            "encode_autoregressive", "fold", "generator", "dual_loss"} <= names


def test_gradients_agree_with_finite_differences():
    worst = run_gradient_suite(GRADCHECK_CONFIG, seeds=[0], per_tensor=1)
    assert max(worst.values()) < 1e-4, worst


def test_gradient_checks_need_dropout_off():
    with pytest.raises(ValueError, match="dropout disabled"):
        run_gradient_suite(dataclasses.replace(GRADCHECK_CONFIG, keep=0.9), seeds=[0])


@pytest.mark.slow
def test_gradients_agree_over_five_seeds():
    worst = run_gradient_suite(GRADCHECK_CONFIG, seeds=range(5), per_tensor=3)
    assert max(worst.values()) < 1e-4, worst
