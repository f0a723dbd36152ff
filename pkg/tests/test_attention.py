import numpy
import pytest

from tensor_api.gradcheck import check_gradients
from tensor_api.tensor import Tensor

from dualqa_api.attention import SITES, bilinear_scores, fold_first, fold_second, register_site
from dualqa_api.registry import ParameterRegistry


def random_tensor(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def setup_function():
    global rng, U, V
    rng = numpy.random.default_rng(0)
    U, V = random_tensor(rng, 6, 5), random_tensor(rng, 6, 5)


def test_score_rows_sum_to_one():
    scores = bilinear_scores(random_tensor(rng, 4, 6), random_tensor(rng, 7, 6), U, V, "tag")
    assert scores.shape == (4, 7)
    assert scores.tag == "tag"
    assert numpy.allclose(scores.numpy().sum(axis=1), 1.0, atol=1e-12)
    assert (scores.numpy() >= 0).all()


def test_single_counterpart_row_is_copied_everywhere():
    context = random_tensor(rng, 5, 6)
    counterpart = random_tensor(rng, 1, 6)
    folded = fold_first(context, counterpart, U, V)
    assert len(folded) == 5
    assert numpy.allclose(folded.values.data, numpy.repeat(counterpart.data, 5, axis=0))


def test_scores_match_direct_formula():
    X, Y = rng.normal(size=(3, 6)), rng.normal(size=(4, 6))
    logits = (X @ U.data) @ (Y @ V.data).T / numpy.sqrt(6)
    expected = numpy.exp(logits) / numpy.exp(logits).sum(axis=1, keepdims=True)
    assert numpy.allclose(bilinear_scores(Tensor(X), Tensor(Y), U, V).numpy(), expected, atol=1e-12)


def test_folded_rows_lie_in_the_counterpart_hull():
    counterpart = random_tensor(rng, 4, 6)
    folded = fold_first(random_tensor(rng, 5, 6), counterpart, U, V).values.data
    assert (folded <= counterpart.data.max(axis=0) + 1e-12).all()
    assert (folded >= counterpart.data.min(axis=0) - 1e-12).all()


def test_two_folds_compose_row_stochastic_weights():
    context, counterpart, prefix = random_tensor(rng, 5, 6), random_tensor(rng, 3, 6), random_tensor(rng, 2, 6)
    first = bilinear_scores(context, counterpart, U, V).numpy()
    folded = fold_first(context, counterpart, U, V)
    attended, second = fold_second(prefix, folded, V, U)
    combined = second.numpy() @ first
    assert numpy.allclose(combined.sum(axis=1), 1.0)
    assert numpy.allclose(attended.data, combined @ counterpart.data, atol=1e-12)


def test_swapping_roles_transposes_the_logits():
    X, Y = random_tensor(rng, 3, 6), random_tensor(rng, 4, 6)
    forward = numpy.log(bilinear_scores(X, Y, U, V).numpy())
    mirrored = numpy.log(bilinear_scores(Y, X, V, U).numpy()).T
    # log-scores differ by a row term plus a column term
    diff = forward - mirrored
    assert numpy.allclose(diff - diff[:, :1], (diff - diff[:, :1])[0], atol=1e-9)


def test_empty_side_raises():
    with pytest.raises(ValueError, match="non-empty"):
        bilinear_scores(Tensor(numpy.zeros((0, 6))), random_tensor(rng, 2, 6), U, V)


def test_sites_register_both_projections():
    registry = ParameterRegistry()
    for site in SITES:
        register_site(registry, site, 6, 5, rng)
    assert registry["attention/answer_context/V"].shape == (6, 5)
    assert registry.census() == 4 * 2 * 30


def test_fold_gradients_match_finite_differences():
    context, counterpart, prefix = random_tensor(rng, 5, 6), random_tensor(rng, 3, 6), random_tensor(rng, 2, 6)
    U2, V2 = random_tensor(rng, 6, 5), random_tensor(rng, 6, 5)
    w = rng.normal(size=(2, 6))

    def loss():
        attended, scores = fold_second(prefix, fold_first(context, counterpart, U, V), U2, V2)
        return (attended * w).sum() + (scores.values * scores.values).sum()

    params = {"context": context, "counterpart": counterpart, "prefix": prefix, "U": U, "V": V, "U2": U2, "V2": V2}
    assert check_gradients(loss, params) < 1e-4
