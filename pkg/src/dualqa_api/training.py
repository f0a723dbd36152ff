"""Teacher-forced dual training: schedule, single steps and the training loop."""

from __future__ import annotations

import logging
import math
import queue
import threading
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy
from tqdm import tqdm

from squad_connector.squad import Triplet
from tensor_api.optim import AdamState, adam_step, clip_global_norm, global_norm
from tensor_api.tensor import GradientTape, NumericError

from dualqa_api.generator import merge_losses
from dualqa_api.model import DualModel, encode_triplet, triplet_loss

logger = logging.getLogger(__name__)


def learning_rate(step: int, warmup_steps: int = 1000, lr_max: float = 0.001) -> float:
    """``lr_max * (1 - exp(-step / warmup_steps))``.

    >>> learning_rate(0)
    0.0
    >>> round(learning_rate(1000), 10)
    0.0006321206
    """
    if step < 0:
        raise ValueError(f"step must be non-negative, got {step}")
    return lr_max * (1.0 - math.exp(-step / warmup_steps))


@dataclass(frozen=True)
class StepMetrics:
    step: int
    loss: float
    qa_loss: Optional[float]
    qg_loss: Optional[float]
    coverage: float
    grad_norm: float
    clamped: int
    lr: float
    tokens: int
    nll: float

    @property
    def token_nll(self) -> float:
        return self.nll / max(self.tokens, 1)

    def postfix(self) -> dict:
        return {"loss": f"{self.loss:.4f}", "lr": f"{self.lr:.2e}", "gnorm": f"{self.grad_norm:.3f}"}


def train_step(
    batch: Sequence[Triplet],
    model: DualModel,
    state: AdamState,
    rng: Optional[numpy.random.Generator] = None,
    training: bool = True,
) -> StepMetrics:
    """One forward over the batch, one backward, clipping and an Adam update.

    The batch loss is the mean of per-triplet losses. Gradients of frozen
    entries are zeroed before clipping so they never move.
    """
    if not batch:
        raise ValueError("train_step needs a non-empty batch")
    config = model.config
    if rng is None:
        rng = numpy.random.default_rng(config.seed + state.step)
    params = model.params
    with GradientTape() as tape:
        losses = [triplet_loss(model, encode_triplet(model, t), training, rng) for t in batch]
        merged = merge_losses(losses)
    loss_value = float(merged.total.data)
    if not math.isfinite(loss_value):
        raise NumericError(f"non-finite loss {loss_value} at step {state.step + 1}")
    grads = model.registry.mask_gradients(tape.backward(merged.total, params))
    norm = global_norm(grads)
    if not math.isfinite(norm):
        raise NumericError(f"non-finite gradient norm at step {state.step + 1}")
    grads = clip_global_norm(grads, config.clip)
    lr = learning_rate(state.step + 1, config.warmup_steps, config.lr_max)
    adam_step(params, grads, state, lr, config.beta1, config.beta2, config.adam_eps)
    if merged.clamped:
        logger.warning("step %d: %d gold probabilities clamped at the log floor", state.step, merged.clamped)
    return StepMetrics(
        step=state.step,
        loss=loss_value,
        qa_loss=None if merged.qa is None else float(merged.qa.data),
        qg_loss=None if merged.qg is None else float(merged.qg.data),
        coverage=merged.coverage,
        grad_norm=norm,
        clamped=merged.clamped,
        lr=lr,
        tokens=merged.tokens,
        nll=merged.nll,
    )


_DONE = object()


class BatchFeeder:
    """Shuffled batches assembled on a background thread.

    Batches go through a bounded queue, so at most ``queue_size`` batches
    are prepared ahead of the consumer. Each pass over the data is shuffled
    with the feeder's own generator.
    """

    def __init__(self, triplets: Sequence[Triplet], batch_size: int, seed: int = 0, queue_size: int = 4, steps: Optional[int] = None):
        if not triplets:
            raise ValueError("BatchFeeder needs at least one triplet")
        self._triplets = list(triplets)
        self._batch_size = batch_size
        self._rng = numpy.random.default_rng(seed)
        self._steps = steps
        self._queue: "queue.Queue" = queue.Queue(maxsize=queue_size)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._produce, name="batch-feeder", daemon=True)
        self._thread.start()

    def _batches(self) -> Iterator[List[Triplet]]:
        while True:
            order = self._rng.permutation(len(self._triplets))
            for start in range(0, len(order), self._batch_size):
                yield [self._triplets[i] for i in order[start : start + self._batch_size]]

    def _produce(self) -> None:
        produced = 0
        for batch in self._batches():
            if self._stop.is_set() or (self._steps is not None and produced >= self._steps):
                break
            while not self._stop.is_set():
                try:
                    self._queue.put(batch, timeout=0.1)
                    produced += 1
                    break
                except queue.Full:
                    continue
        self._queue.put(_DONE)

    def __iter__(self) -> "BatchFeeder":
        return self

    def __next__(self) -> List[Triplet]:
        item = self._queue.get()
        if item is _DONE:
            raise StopIteration
        return item

    def close(self) -> None:
        self._stop.set()
        # drain so a blocked producer can finish
        while self._thread.is_alive():
            try:
                self._queue.get(timeout=0.1)
            except queue.Empty:
                pass
        self._thread.join()

    def __enter__(self) -> "BatchFeeder":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class Trainer:
    """Runs :func:`train_step` over a corpus for a fixed number of steps."""

    def __init__(self, model: DualModel, triplets: Sequence[Triplet], state: Optional[AdamState] = None):
        self.model = model
        self.triplets = list(triplets)
        self.state = state if state is not None else AdamState.for_parameters(model.params)
        self.rng = numpy.random.default_rng(model.config.seed)
        self.history: List[StepMetrics] = []

    @property
    def global_step(self) -> int:
        return self.state.step

    def run(self, steps: int, progress: bool = True) -> List[StepMetrics]:
        config = self.model.config
        feeder = BatchFeeder(self.triplets, config.batch_size, seed=config.seed + self.state.step, steps=steps)
        metrics: List[StepMetrics] = []
        with feeder, tqdm(total=steps, desc="train", disable=not progress) as bar:
            for batch in feeder:
                m = train_step(batch, self.model, self.state, self.rng)
                metrics.append(m)
                bar.update(1)
                bar.set_postfix(m.postfix())
                if m.step % config.log_every == 0:
                    logger.info(
                        "step %d loss %.4f qa %s qg %s coverage %.4f lr %.2e",
                        m.step, m.loss, _fmt(m.qa_loss), _fmt(m.qg_loss), m.coverage, m.lr,
                    )
        self.history.extend(metrics)
        return metrics


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"
