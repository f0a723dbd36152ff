import logging
import math

import numpy
import pytest
from conftest import tiny_config

from tensor_api.optim import AdamState

from dualqa_api.model import assemble_model
from dualqa_api.training import BatchFeeder, Trainer, learning_rate, train_step
from dualqa_api.vocabulary import PAD


def test_learning_rate_warms_up_towards_the_maximum():
    assert learning_rate(0, 10, 0.01) == 0.0
    assert learning_rate(10, 10, 0.01) == pytest.approx(0.01 * (1 - math.exp(-1)))
    values = [learning_rate(s, 10, 0.01) for s in range(0, 200, 7)]
    assert values == sorted(values)
    assert values[-1] < 0.01
    with pytest.raises(ValueError):
        learning_rate(-1)


def test_single_step_updates_parameters(model, triplets):
    state = AdamState.for_parameters(model.params)
    before = model.registry["qa/generator/W1"].data.copy()
    metrics = train_step(triplets[:2], model, state)
    assert state.step == metrics.step == 1
    assert math.isfinite(metrics.loss) and metrics.loss > 0
    assert metrics.qa_loss is not None and metrics.qg_loss is not None
    assert metrics.lr == pytest.approx(learning_rate(1, 10, 0.001))
    assert metrics.tokens == sum(len(t.answer_tokens) + len(t.question_tokens) + 2 for t in triplets[:2])
    assert not numpy.array_equal(before, model.registry["qa/generator/W1"].data)


def test_frozen_embedding_rows_never_move(model, triplets):
    words = model.registry["embedding/word"].data.copy()
    chars = model.registry["embedding/chars"].data.copy()
    state = AdamState.for_parameters(model.params)
    for _ in range(2):
        train_step(triplets, model, state)
    after = model.registry["embedding/word"].data
    assert numpy.array_equal(after[PAD], words[PAD])
    assert numpy.array_equal(after[4:], words[4:])
    assert not numpy.array_equal(after[1:4], words[1:4])
    assert numpy.array_equal(model.registry["embedding/chars"].data[0], chars[0])


def test_empty_batch_raises(model):
    with pytest.raises(ValueError, match="non-empty batch"):
        train_step([], model, AdamState())


def test_training_is_reproducible(vocab, triplets):
    runs = []
    for _ in range(2):
        model = assemble_model(tiny_config(), vocab)
        trainer = Trainer(model, triplets)
        losses = [m.loss for m in trainer.run(3, progress=False)]
        runs.append((losses, {n: t.data.copy() for n, t in model.params.items()}))
    assert runs[0][0] == runs[1][0]
    for name, values in runs[0][1].items():
        assert numpy.array_equal(values, runs[1][1][name]), name


def test_trainer_counts_steps_and_logs(model, triplets, caplog):
    trainer = Trainer(model, triplets)
    with caplog.at_level(logging.INFO, logger="dualqa_api.training"):
        metrics = trainer.run(2, progress=False)
    assert [m.step for m in metrics] == [1, 2]
    assert trainer.global_step == 2
    assert len(trainer.history) == 2
    assert "step 2 loss" in caplog.text
    trainer.run(1, progress=False)
    assert trainer.history[-1].step == 3


def test_repeated_steps_on_one_triplet_lower_its_loss(vocab, triplets):
    model = assemble_model(tiny_config(lr_max=0.01, warmup_steps=1), vocab)
    state = AdamState.for_parameters(model.params)
    losses = [train_step(triplets[:1], model, state).loss for _ in range(15)]
    assert losses[-1] < losses[0]


def test_feeder_covers_every_triplet_each_pass(triplets):
    with BatchFeeder(triplets, batch_size=3, seed=1, steps=4) as feeder:
        batches = list(feeder)
    assert [len(b) for b in batches] == [3, 1, 3, 1]
    first_pass = [t.source_id for b in batches[:2] for t in b]
    assert sorted(first_pass) == sorted(t.source_id for t in triplets)


def test_feeder_is_seeded(triplets):
    with BatchFeeder(triplets, 2, seed=5, steps=2) as a, BatchFeeder(triplets, 2, seed=5, steps=2) as b:
        assert [[t.source_id for t in x] for x in a] == [[t.source_id for t in x] for x in b]


def test_feeder_can_be_closed_early(triplets):
    feeder = BatchFeeder(triplets, 1, queue_size=1)
    next(feeder)
    feeder.close()
    assert not feeder._thread.is_alive()


def test_feeder_needs_data():
    with pytest.raises(ValueError, match="at least one triplet"):
        BatchFeeder([], 2)
