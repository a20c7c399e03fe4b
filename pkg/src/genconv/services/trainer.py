# src/genconv/services/trainer.py
from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..core.cloud import LabeledCloud
from ..core.numeric import softmax_cross_entropy
from ..core.optim import OptimizerState, optimizer_step
from ..core.rng import derive_int_seed, random_stream
from ..domain.models import ModelConfig
from ..errors import DataError, EmptyInputError, NumericalError
from ..logging import get_component_logger
from .model import GenConvModel, TrainingState

log = get_component_logger("trainer")

EPOCH_LOG_COLUMNS = ("epoch", "mean_loss", "train_acc", "wall_seconds")


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    train_acc: float
    wall_seconds: float


@dataclass
class TrainingResult:
    model: GenConvModel
    epochs: List[EpochRecord] = field(default_factory=list)


@dataclass
class EvaluationReport:
    accuracy: float
    confusion: np.ndarray  # (C, C), rows = truth
    predictions: List[int] = field(default_factory=list)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())


def _cloud_id(item: LabeledCloud, index: int) -> str:
    return item.source or f"#{index}"


# ─────────────────────────────────────────────
# 🏋️ TRAINING LOOP
# ─────────────────────────────────────────────
def train(
    model: GenConvModel,
    train_set: Sequence[LabeledCloud],
    config: Optional[ModelConfig] = None,
    progress: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainingResult:
    """
    Per-cloud (batch size 1) training: seeded shuffle, forward, softmax
    cross-entropy, backward, optimizer step. Optimizer, epoch counter and
    shuffle RNG live on ``model.training_state`` so a checkpoint can resume.
    """
    if not train_set:
        raise EmptyInputError("training set is empty")
    config = config or model.config
    spec = config.optimizer
    params = model.parameters()

    state = model.training_state or TrainingState()
    if state.optimizer is None:
        state.optimizer = OptimizerState.for_parameters(params, spec)
    shuffle_rng = random_stream(config.seed, "shuffle")
    if state.rng_state is not None:
        shuffle_rng.bit_generator.state = state.rng_state
    model.training_state = state

    result = TrainingResult(model=model)
    accumulate = spec.accumulate_every
    first_epoch = state.epoch
    for epoch in range(first_epoch, first_epoch + config.epochs):
        started = time.perf_counter()
        order = shuffle_rng.permutation(len(train_set))
        total_loss = 0.0
        correct = 0
        pending: Optional[List[np.ndarray]] = None
        pending_count = 0

        for step, index in enumerate(order):
            item = train_set[int(index)]
            seed = derive_int_seed(config.seed, "stride", epoch, step)
            try:
                logits = model.forward(item.cloud, seed)
                loss, grad = softmax_cross_entropy(logits, item.label)
            except NumericalError as e:
                raise NumericalError(e.detail, epoch, _cloud_id(item, int(index))) from e
            if not np.isfinite(loss):
                log.error("non_finite_loss", epoch=epoch, cloud=_cloud_id(item, int(index)))
                raise NumericalError("non-finite loss", epoch, _cloud_id(item, int(index)))

            total_loss += loss
            correct += int(np.argmax(logits) == item.label)
            grads = model.backward(grad)
            if pending is None:
                pending = grads
            else:
                for acc, g in zip(pending, grads):
                    acc += g
            pending_count += 1

            if pending_count == accumulate or step == len(order) - 1:
                if pending_count > 1:
                    for acc in pending:
                        acc /= pending_count
                optimizer_step(params, pending, state.optimizer)
                pending, pending_count = None, 0

        record = EpochRecord(
            epoch=epoch + 1,
            mean_loss=total_loss / len(train_set),
            train_acc=correct / len(train_set),
            wall_seconds=time.perf_counter() - started,
        )
        state.epoch = epoch + 1
        state.rng_state = shuffle_rng.bit_generator.state
        result.epochs.append(record)
        log.info(
            "epoch_done",
            epoch=record.epoch,
            mean_loss=round(record.mean_loss, 6),
            train_acc=round(record.train_acc, 4),
            seconds=round(record.wall_seconds, 2),
        )
        if progress is not None:
            progress(record)

    state.rng_state = shuffle_rng.bit_generator.state
    model.clear_caches()
    return result


def write_epoch_log(records: Sequence[EpochRecord], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(EPOCH_LOG_COLUMNS)
        for r in records:
            writer.writerow([r.epoch, repr(r.mean_loss), repr(r.train_acc), f"{r.wall_seconds:.3f}"])


# ─────────────────────────────────────────────
# 📊 EVALUATION
# ─────────────────────────────────────────────
def _predict_range(model: GenConvModel, items: Sequence[LabeledCloud], offset: int) -> List[int]:
    seed = model.config.seed
    return [
        model.predict(item.cloud, derive_int_seed(seed, "eval", offset + i))
        for i, item in enumerate(items)
    ]


def evaluate(
    model: GenConvModel, test_set: Sequence[LabeledCloud], threads: int = 1
) -> EvaluationReport:
    """Accuracy and a C×C confusion matrix (rows = truth); ties go to the lowest class."""
    if not test_set:
        raise EmptyInputError("test set is empty")
    n_classes = model.config.num_classes
    bad = [i for i, item in enumerate(test_set) if not 0 <= item.label < n_classes]
    if bad:
        raise DataError(f"{len(bad)} test clouds carry labels outside 0..{n_classes - 1}")

    if threads <= 1 or len(test_set) < 2:
        predictions = _predict_range(model, test_set, 0)
    else:
        chunk = -(-len(test_set) // threads)
        bounds = [(s, test_set[s : s + chunk]) for s in range(0, len(test_set), chunk)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(lambda b: _predict_range(model.clone(), b[1], b[0]), bounds)
        predictions = [p for part in parts for p in part]
    model.clear_caches()

    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for item, pred in zip(test_set, predictions):
        confusion[item.label, pred] += 1
    accuracy = float(np.trace(confusion)) / len(test_set)
    log.info("evaluation_done", clouds=len(test_set), accuracy=round(accuracy, 4))
    return EvaluationReport(accuracy=accuracy, confusion=confusion, predictions=predictions)


def write_confusion_csv(report: EvaluationReport, path: str) -> None:
    """Bare C×C integer grid, rows = truth, columns = prediction."""
    np.savetxt(path, report.confusion, fmt="%d", delimiter=",")
