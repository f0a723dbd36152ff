import numpy
import pytest
from conftest import tiny_config

from squad_connector.squad import Triplet
from tensor_api.tensor import GradientTape

from dualqa_api.generator import dual_loss, gold_probabilities
from dualqa_api.model import (
    WIRING,
    assemble_model,
    encode_tokens,
    encode_triplet,
    forward_dual,
    forward_task,
    prepare_task,
    triplet_loss,
)
from dualqa_api.synthetic import copy_triplets, corpus_tokens
from dualqa_api.vocabulary import END, build_vocabulary


def gradients(model, loss):
    with GradientTape() as tape:
        total = loss().total
    return tape.backward(total, model.params)


def test_wiring_mirrors_the_tasks():
    qa, qg = WIRING["qa"], WIRING["qg"]
    assert (qa.source, qa.target) == (qg.target, qg.source) == ("question", "answer")
    assert qa.second_site == "answer_context"
    assert qg.first_site == "context_answer"


def test_teacher_forced_shapes(model, triplets):
    encoded = encode_triplet(model, triplets[0])
    out = forward_task(model, encoded, "qa")
    steps = len(triplets[0].answer_tokens) + 1
    assert out.distribution.final.shape == (steps, encoded.extended_size)
    assert out.scores.shape == (steps, len(triplets[0].context_tokens))
    assert out.targets[-1] == END
    assert numpy.allclose(out.distribution.final.data.sum(axis=1), 1.0)


def test_forward_dual_runs_both_directions(model, triplets):
    outputs = forward_dual(model, encode_triplet(model, triplets[1]))
    assert set(outputs) == {"qa", "qg"}
    assert outputs["qg"].targets.shape[0] == len(triplets[1].question_tokens) + 1


def answer_span(triplet, start, length):
    words = triplet.context_tokens[start : start + length]
    return Triplet(triplet.question, triplet.context, " ".join(words), triplet.source_id)


def test_decoder_rows_ignore_later_gold_tokens(model, triplets):
    t = triplets[0]
    question = list(t.question_tokens)
    a = forward_task(model, encode_tokens(model, t.context_tokens, question, t.answer_tokens), "qg")
    changed = question[:-1] + ["what"]
    b = forward_task(model, encode_tokens(model, t.context_tokens, changed, t.answer_tokens), "qg")
    assert numpy.array_equal(a.distribution.final.data[:-1], b.distribution.final.data[:-1])
    assert not numpy.allclose(a.distribution.final.data[-1], b.distribution.final.data[-1])


@pytest.mark.parametrize("seed", range(50))
def test_decoder_prefixes_are_bit_identical_under_suffix_changes(vocab, triplets, seed):
    rng = numpy.random.default_rng(seed)
    model = assemble_model(tiny_config(seed=seed), vocab)
    t = triplets[seed % len(triplets)]
    task = ("qa", "qg")[seed % 2]
    target = list(t.answer_tokens if task == "qa" else t.question_tokens)
    cut = int(rng.integers(0, len(target)))
    words = [w for w in vocab.words if w != target[cut]]
    changed = target[:cut] + [words[int(rng.integers(len(words)))]] + target[cut + 1 :]

    def final(tokens):
        if task == "qa":
            encoded = encode_tokens(model, t.context_tokens, t.question_tokens, tokens)
        else:
            encoded = encode_tokens(model, t.context_tokens, tokens, t.answer_tokens)
        return forward_task(model, encoded, task).distribution.final.data

    # row r predicts target token r from START and target[:r]
    assert numpy.array_equal(final(target)[: cut + 1], final(changed)[: cut + 1])


def test_each_direction_trains_the_shared_context_encoder(model, triplets):
    encoded = encode_triplet(model, answer_span(triplets[0], 1, 2))
    qa = gradients(model, lambda: dual_loss(None, forward_task(model, encoded, "qa")))
    qg = gradients(model, lambda: dual_loss(forward_task(model, encoded, "qg"), None))
    dual = gradients(model, lambda: triplet_loss(model, encoded))
    assert qa["context_encoder/ffn/W_in"].any()
    assert qg["context_encoder/ffn/W_in"].any()
    assert not qa["qg/generator/W1"].any()
    assert not qa["attention/context_answer/U"].any()
    for name in dual:
        assert numpy.allclose(dual[name], qa[name] + qg[name], atol=1e-9), name


def test_single_token_answer_hides_the_context_encoder_from_qg(model, triplets):
    # one answer row: the context-answer softmax is a single column equal to 1
    encoded = encode_triplet(model, answer_span(triplets[0], 1, 1))
    qg = gradients(model, lambda: dual_loss(forward_task(model, encoded, "qg"), None))
    context = {name: grad for name, grad in qg.items() if name.startswith("context_encoder/")}
    assert context
    assert not any(grad.any() for grad in context.values())
    assert qg["qg/generator/W1"].any()


def test_unshared_context_encoders_learn_separately(vocab, triplets):
    model = assemble_model(tiny_config(unshare_context_encoder=True), vocab)
    encoded = encode_triplet(model, triplets[0])
    qa = gradients(model, lambda: dual_loss(None, forward_task(model, encoded, "qa")))
    assert qa["qa/context_encoder/ffn/W_in"].any()
    assert not qa["qg/context_encoder/ffn/W_in"].any()


def test_mono_model_only_runs_its_task(vocab, triplets):
    model = assemble_model(tiny_config(mode="qg-only"), vocab)
    encoded = encode_triplet(model, triplets[0])
    loss = triplet_loss(model, encoded)
    assert loss.qa is None and loss.qg is not None
    with pytest.raises(ValueError, match="not part of a qg-only model"):
        prepare_task(model, encoded, "qa")


@pytest.mark.parametrize(
    "overrides",
    [
        {"no_context_attention": True},
        {"encoder_no_lstm": True},
        {"encoder_no_selfattn": True},
        {"share_attention": True},
        {"vector_highway_bias": True},
        {"d_prime": 5, "d_attn": 4},
    ],
)
def test_ablations_train_end_to_end(vocab, triplets, overrides):
    model = assemble_model(tiny_config(**overrides), vocab)
    loss = triplet_loss(model, encode_triplet(model, triplets[2]))
    assert numpy.isfinite(loss.total.item())


def test_copy_path_reaches_context_only_words():
    triplets = copy_triplets(count=4, seed=1)
    vocab = build_vocabulary(corpus_tokens(triplets), min_count=3)
    assert triplets[0].answer not in vocab

    model = assemble_model(tiny_config(), vocab)
    encoded = encode_triplet(model, triplets[0])
    out = forward_task(model, encoded, "qa")
    assert out.targets[0] >= len(vocab)
    assert gold_probabilities(out)[0] > 0

    plain = assemble_model(tiny_config(no_copy=True), vocab)
    out = forward_task(plain, encode_triplet(plain, triplets[0]), "qa")
    assert gold_probabilities(out)[0] == 0.0
    assert dual_loss(None, out).clamped == 1
