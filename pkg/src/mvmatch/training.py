"""Per-instance training with the hinge ranking loss."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .autodiff import backward, make_optimizer
from .config import TrainConfig
from .data import evaluate
from .model import MultiViewMatcher, QuestionInstance

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    train_accuracy: float | None = None
    dev_accuracy: float | None = None
    seconds: float = 0.0


@dataclass
class TrainResult:
    history: list[EpochMetrics] = field(default_factory=list)
    best_epoch: int | None = None
    best_dev_accuracy: float | None = None

    @property
    def final(self) -> EpochMetrics | None:
        return self.history[-1] if self.history else None


def _check_instances(instances: Sequence[QuestionInstance]) -> None:
    if not instances:
        raise ValueError("training set is empty")
    for k, inst in enumerate(instances):
        if inst.gold not in inst.candidates:
            raise ValueError(f"instance {k}: gold relation not among candidates")
        if len(inst.candidates) < 2:
            raise ValueError(f"instance {k}: needs at least one negative candidate")


def train(model: MultiViewMatcher, train_set: Sequence[QuestionInstance], config: TrainConfig,
          dev_set: Sequence[QuestionInstance] | None = None, eval_train: bool = False,
          stop_at_train_accuracy: float | None = None,
          on_epoch: Callable[[EpochMetrics], None] | None = None) -> TrainResult:
    """Train in place.

    Each epoch visits every instance once (seeded shuffle) and takes one
    optimizer step per instance.  With a dev set the parameters of the best
    dev epoch are restored at the end.
    """
    instances = list(train_set)
    _check_instances(instances)
    params = model.params
    opt = make_optimizer(config.optimizer, params, config.lr, config.clip_norm)
    rng = np.random.default_rng(config.seed)
    result = TrainResult()
    best = None
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(instances)) if config.shuffle else np.arange(len(instances))
        total = 0.0
        for k in order:
            inst = instances[k]
            loss = model.loss_graph(inst, config.margin)
            value = float(loss.value)
            if not math.isfinite(value):
                raise TrainingError(f"non-finite loss {value} at epoch {epoch}, instance {k} "
                                    f"(gold {inst.gold!r}, {len(inst.candidates)} candidates)")
            total += value
            grads = backward(loss, params.values())
            opt.step({name: grads[node] for name, node in params.items()})
        m = EpochMetrics(epoch, total / len(instances))
        if eval_train or stop_at_train_accuracy is not None:
            m.train_accuracy = evaluate(model, instances)
        if dev_set:
            m.dev_accuracy = evaluate(model, dev_set)
            if best is None or m.dev_accuracy > result.best_dev_accuracy:
                result.best_epoch, result.best_dev_accuracy = epoch, m.dev_accuracy
                best = model.store.snapshot()
        m.seconds = time.perf_counter() - t0
        result.history.append(m)
        log.info("epoch %d loss %.5f train_acc %s dev_acc %s", epoch, m.loss,
                 m.train_accuracy, m.dev_accuracy)
        if on_epoch:
            on_epoch(m)
        if stop_at_train_accuracy is not None and m.train_accuracy >= stop_at_train_accuracy:
            break
    if best is not None:
        model.store.restore(best)
    return result
