# *************************************************************************************************************************
#   ProbeTrainer.py
#       Train the activations probe on (hidden_state, step_label) pairs.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       config = ProbeTrainConfig.from_settings(run_config.get('probe'))
#       result = probe_train(examples, config)        # examples: [(hidden_state, label), ...]
#       write_training_curve(result.curve, "runs/probe_curve.csv")
#
#   Design Notes:
#   -.  Binary cross-entropy on the output logit (BCEWithLogitsLoss), Adam, mini-batches in a seeded shuffle order.
#   -.  The validation split is stratified by label through scikit-learn with the run seed as random_state.
#   -.  Early stopping watches the validation loss; the returned model holds the parameters of the best epoch.
#   -.  Training runs on one thread over a fixed batch order, so identical config and data give identical parameters.
# *************************************************************************************************************************

import copy
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
import torch
from sklearn.model_selection import train_test_split

from config.DEFAULTS import (DEFAULT_PROBE_HIDDEN_DIMS,
                             DEFAULT_PROBE_TRAIN_CONFIG)
from src.probe.ProbeModel import ProbeModel
from src.utils.errors import (ConfigError, ProbeDimensionError,
                              ProbeDivergenceError, ProbeTrainingError)
from src.utils.helperFunctions import config_hash

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProbeTrainConfig:
    learning_rate: float = DEFAULT_PROBE_TRAIN_CONFIG['learning_rate']
    batch_size: int = DEFAULT_PROBE_TRAIN_CONFIG['batch_size']
    epochs: int = DEFAULT_PROBE_TRAIN_CONFIG['epochs']
    seed: int = DEFAULT_PROBE_TRAIN_CONFIG['seed']
    validation_fraction: float = DEFAULT_PROBE_TRAIN_CONFIG['validation_fraction']
    patience: int = DEFAULT_PROBE_TRAIN_CONFIG['patience']
    hidden_dims: Tuple[int, ...] = tuple(DEFAULT_PROBE_HIDDEN_DIMS)

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "epochs", "patience"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive", field_path=f"probe.{name}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative", field_path="probe.seed")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in (0, 1)", field_path="probe.validation_fraction")
        if not self.hidden_dims or any(int(h) < 1 for h in self.hidden_dims):
            raise ConfigError("hidden_dims must be positive widths", field_path="probe.hidden_dims")

    @classmethod
    def from_settings(cls, settings=None):
        merged = dict(DEFAULT_PROBE_TRAIN_CONFIG, hidden_dims=list(DEFAULT_PROBE_HIDDEN_DIMS))
        merged.update(settings or {})
        merged['hidden_dims'] = tuple(int(h) for h in merged['hidden_dims'])
        return cls(**merged)

    def to_dict(self):
        record = asdict(self)
        record['hidden_dims'] = list(self.hidden_dims)
        return record

    def config_hash(self):
        return config_hash(self.to_dict())


@dataclass
class CurvePoint:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainingResult:
    model: ProbeModel
    config: ProbeTrainConfig
    curve: List[CurvePoint] = field(default_factory=list)
    best_epoch: int = 0
    validation: Optional[Tuple[np.ndarray, np.ndarray]] = None


def _as_arrays(dataset):
    if not dataset:
        raise ProbeTrainingError("probe training needs a non-empty dataset")
    dims = {len(hidden_state) for hidden_state, _ in dataset}
    if len(dims) != 1:
        raise ProbeDimensionError(f"hidden states have inconsistent dimensions {sorted(dims)}")
    features = np.asarray([hidden_state for hidden_state, _ in dataset], dtype=np.float64)
    labels = np.asarray([int(label) for _, label in dataset], dtype=np.int64)
    if not np.all(np.isin(labels, (0, 1))):
        raise ProbeTrainingError("labels must be 0 or 1")
    if not np.all(np.isfinite(features)):
        raise ProbeTrainingError("hidden states must be finite")
    return features, labels


def _check_classes(labels):
    counts = np.bincount(labels, minlength=2)
    if counts[0] == 0 or counts[1] == 0:
        raise ProbeTrainingError(f"single-class dataset: {int(counts[0])} correct, {int(counts[1])} incorrect steps")
    if counts.min() < 2:
        raise ProbeTrainingError(f"at least 2 examples per class are required, got {counts.tolist()}")


def split_train_validation(labels, validation_fraction, seed):
    """
    Stratified index split; the validation part holds at least one example of each class.
    """
    indices = np.arange(labels.size)
    validation_size = min(max(2, int(round(validation_fraction * labels.size))), labels.size - 2)
    train_index, validation_index = train_test_split(
        indices, test_size=validation_size, stratify=labels, random_state=seed)
    train_index, validation_index = np.sort(train_index), np.sort(validation_index)
    # proportional allocation can leave a rare class out of a tiny validation part
    for label in (0, 1):
        if not np.any(labels[validation_index] == label):
            incoming = train_index[labels[train_index] == label][0]
            outgoing = validation_index[labels[validation_index] != label][0]
            train_index = np.sort(np.append(train_index[train_index != incoming], outgoing))
            validation_index = np.sort(np.append(validation_index[validation_index != outgoing], incoming))
    return train_index, validation_index


def probe_loss(model, features, labels):
    """
    Mean binary cross-entropy of the probe on a batch, computed on the output logit.
    """
    return torch.nn.functional.binary_cross_entropy_with_logits(model.logits(features), labels)


def probe_train(dataset, config=None, dtype=torch.float32):
    """
    Train a probe on [(hidden_state, label)] pairs.

    Returns:
    - TrainingResult holding the best-validation-loss model and the per-epoch curve
    """
    config = config or ProbeTrainConfig()
    features, labels = _as_arrays(dataset)
    _check_classes(labels)
    train_index, validation_index = split_train_validation(labels, config.validation_fraction, config.seed)

    x_train = torch.as_tensor(features[train_index], dtype=dtype)
    y_train = torch.as_tensor(labels[train_index], dtype=dtype)
    x_val = torch.as_tensor(features[validation_index], dtype=dtype)
    y_val = torch.as_tensor(labels[validation_index], dtype=dtype)

    model = ProbeModel(features.shape[1], config.hidden_dims, seed=config.seed, dtype=dtype)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    shuffle = torch.Generator().manual_seed(config.seed)

    logger.info("Training probe %s on %d examples (%d validation)", model.dims, len(train_index), len(validation_index))
    curve = []
    best_loss, best_epoch, best_state, stale = math.inf, 0, None, 0
    for epoch in range(1, config.epochs + 1):
        model.train()
        order = torch.randperm(x_train.shape[0], generator=shuffle)
        for start in range(0, x_train.shape[0], config.batch_size):
            batch = order[start:start + config.batch_size]
            optimizer.zero_grad()
            loss = probe_loss(model, x_train[batch], y_train[batch])
            if not torch.isfinite(loss):
                raise ProbeDivergenceError(epoch, float(loss))
            loss.backward()
            optimizer.step()

        model.eval()
        with torch.no_grad():
            train_loss = float(probe_loss(model, x_train, y_train))
            val_loss = float(probe_loss(model, x_val, y_val))
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise ProbeDivergenceError(epoch, train_loss if not math.isfinite(train_loss) else val_loss)
        curve.append(CurvePoint(epoch, train_loss, val_loss))
        logger.debug("epoch %d: train_loss=%.6f val_loss=%.6f", epoch, train_loss, val_loss)

        if val_loss < best_loss:
            best_loss, best_epoch, stale = val_loss, epoch, 0
            best_state = copy.deepcopy(model.state_dict())
        else:
            stale += 1
            if stale >= config.patience:
                logger.info("Early stop at epoch %d (best epoch %d)", epoch, best_epoch)
                break

    model.load_state_dict(best_state)
    model.eval()
    logger.info("Probe trained: best epoch %d, validation loss %.6f", best_epoch, best_loss)
    return TrainingResult(model=model, config=config, curve=curve, best_epoch=best_epoch,
                          validation=(features[validation_index], labels[validation_index]))


def examples_from_traces(traces):
    """
    (hidden_state, step_label) pairs of every step carrying both.
    """
    examples = []
    for trace in traces:
        for step in trace.steps:
            if step.hidden_state is not None and step.step_label is not None:
                examples.append((step.hidden_state, step.step_label))
    return examples


def training_curve_frame(curve):
    return pd.DataFrame([asdict(point) for point in curve], columns=["epoch", "train_loss", "val_loss"])


def write_training_curve(curve, path):
    training_curve_frame(curve).to_csv(path, index=False, float_format="%.10g")
    return path
