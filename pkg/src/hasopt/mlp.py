"""One-hidden-layer perceptron: sigmoid hidden units, softmax output, cross-entropy loss."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import Video
from .features import ScalingContext, extract
from .simulator import PlayerStateView

FORMAT_VERSION = 1


@dataclass
class MlpModel:
    w1: np.ndarray  # (F, H)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H, r)
    b2: np.ndarray  # (r,)
    scaling: ScalingContext | None = None

    def __post_init__(self):
        f, h = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape[0] != h or self.b2.shape != (self.w2.shape[1],):
            raise ValueError("inconsistent layer shapes")
        if self.scaling is not None and self.scaling.n_features(self.w2.shape[1]) != f:
            raise ValueError(f"model has {f} inputs, scaling context implies "
                             f"{self.scaling.n_features(self.w2.shape[1])}")
        for a in self.params():
            if not np.all(np.isfinite(a)):
                raise ValueError("weights must be finite")

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.w2.shape[1]

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "MlpModel":
        return MlpModel(*(p.copy() for p in self.params()), scaling=self.scaling)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "input_size": self.n_inputs,
            "hidden_size": self.hidden_size,
            "output_size": self.n_classes,
            "w1": self.w1.ravel().tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.ravel().tolist(),
            "b2": self.b2.tolist(),
            "scaling": None if self.scaling is None else vars(self.scaling).copy(),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def from_json(cls, obj: dict) -> "MlpModel":
        if obj.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {obj.get('format_version')!r}")
        f, h, r = obj["input_size"], obj["hidden_size"], obj["output_size"]
        scaling = ScalingContext(**obj["scaling"]) if obj.get("scaling") else None
        return cls(np.array(obj["w1"], dtype=np.float64).reshape(f, h), np.array(obj["b1"], dtype=np.float64),
                   np.array(obj["w2"], dtype=np.float64).reshape(h, r), np.array(obj["b2"], dtype=np.float64),
                   scaling)

    @classmethod
    def load(cls, path) -> "MlpModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_inputs(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_inputs:
        raise ValueError(f"expected {model.n_inputs} features, got {x.shape[-1]}")
    return x


def logits(model: MlpModel, x) -> np.ndarray:
    x = _check_inputs(model, x)
    return sigmoid(x @ model.w1 + model.b1) @ model.w2 + model.b2


def forward(model: MlpModel, x) -> np.ndarray:
    """Class probabilities for one feature vector or a batch of them."""
    return softmax(logits(model, x))


def loss_and_grads(model: MlpModel, x: np.ndarray, y: np.ndarray, weight_decay: float = 0.0):
    """Mean cross-entropy over the batch and its gradients w.r.t. (w1, b1, w2, b2)."""
    x = _check_inputs(model, np.atleast_2d(x))
    y = np.atleast_1d(y)
    m = x.shape[0]
    h = sigmoid(x @ model.w1 + model.b1)
    p = softmax(h @ model.w2 + model.b2)
    rows = np.arange(m)
    loss = -np.log(np.maximum(p[rows, y], 1e-300)).mean()
    dz2 = p.copy()
    dz2[rows, y] -= 1.0
    dz2 /= m
    gw2 = h.T @ dz2
    gb2 = dz2.sum(axis=0)
    dz1 = (dz2 @ model.w2.T) * h * (1.0 - h)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    if weight_decay:
        loss += 0.5 * weight_decay * (np.sum(model.w1**2) + np.sum(model.w2**2))
        gw1 = gw1 + weight_decay * model.w1
        gw2 = gw2 + weight_decay * model.w2
    return float(loss), [gw1, gb1, gw2, gb2]


def gradient_check(model: MlpModel, x, y, step: float = 1e-5) -> float:
    """Largest relative gap between analytic and central-difference gradients."""
    _, grads = loss_and_grads(model, x, y)
    probe = model.copy()
    worst = 0.0
    for param, grad in zip(probe.params(), grads):
        flat, gflat = param.reshape(-1), grad.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + step
            up, _ = loss_and_grads(probe, x, y)
            flat[k] = orig - step
            down, _ = loss_and_grads(probe, x, y)
            flat[k] = orig
            numeric = (up - down) / (2 * step)
            scale = max(abs(numeric), abs(gflat[k]))
            if scale > 1e-10:
                worst = max(worst, abs(numeric - gflat[k]) / scale)
    return worst


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    validation_fraction: float = 1 / 9
    hidden_size: int = 110
    weight_decay: float = 0.0
    keep_best: bool = True  # return the epoch with the best validation accuracy

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 0 or self.hidden_size < 1:
            raise ValueError("batch_size, hidden_size must be >= 1 and epochs >= 0")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    n_train: int = 0
    n_val: int = 0
    best_epoch: int = -1

    @property
    def final_val_accuracy(self) -> float:
        if not self.val_accuracy:
            return float("nan")
        return self.val_accuracy[self.best_epoch]

    def to_json(self) -> dict:
        return {"train_loss": self.train_loss, "val_accuracy": self.val_accuracy,
                "n_train": self.n_train, "n_val": self.n_val, "best_epoch": self.best_epoch}


def init_model(n_inputs: int, hidden: int, n_classes: int, rng: np.random.Generator,
               scaling: ScalingContext | None = None) -> MlpModel:
    def glorot(fan_in, fan_out):
        s = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-s, s, size=(fan_in, fan_out))

    return MlpModel(glorot(n_inputs, hidden), np.zeros(hidden), glorot(hidden, n_classes),
                    np.zeros(n_classes), scaling)


def accuracy(model: MlpModel, x: np.ndarray, y: np.ndarray, chunk: int = 65536) -> float:
    hits = 0
    for lo in range(0, len(y), chunk):
        hits += int((logits(model, x[lo:lo + chunk]).argmax(axis=1) == y[lo:lo + chunk]).sum())
    return hits / len(y)


def _mean_loss(model, x, y, chunk=65536) -> float:
    total = 0.0
    for lo in range(0, len(y), chunk):
        loss, _ = loss_and_grads(model, x[lo:lo + chunk], y[lo:lo + chunk])
        total += loss * len(y[lo:lo + chunk])
    return total / len(y)


def train(features: np.ndarray, labels: np.ndarray, cfg: TrainConfig, n_classes: int | None = None,
          scaling: ScalingContext | None = None) -> tuple[MlpModel, TrainReport]:
    """Mini-batch gradient descent with a seeded split, initialisation and shuffle order."""
    labels = np.asarray(labels, dtype=np.int64)
    if np.unique(labels).size < 2:
        raise ValueError("training needs at least two classes in the corpus")
    n_classes = n_classes or int(labels.max()) + 1
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(labels))
    n_val = max(1, int(round(len(labels) * cfg.validation_fraction)))
    val_idx, train_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    x_val, y_val = features[val_idx], labels[val_idx]
    x_tr, y_tr = features[train_idx], labels[train_idx]
    model = init_model(features.shape[1], cfg.hidden_size, n_classes, rng, scaling)
    report = TrainReport(n_train=len(train_idx), n_val=n_val)
    best = model.copy()
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(y_tr))
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            _, grads = loss_and_grads(model, x_tr[idx], y_tr[idx], cfg.weight_decay)
            for p, g in zip(model.params(), grads):
                p -= cfg.learning_rate * g
        report.train_loss.append(_mean_loss(model, x_tr, y_tr))
        report.val_accuracy.append(accuracy(model, x_val, y_val))
        if not cfg.keep_best:
            report.best_epoch = epoch
        elif report.best_epoch < 0 or report.val_accuracy[-1] > report.val_accuracy[report.best_epoch]:
            report.best_epoch = epoch
            best = model.copy()
    return (best if cfg.keep_best else model), report


class MlpLogic:
    def __init__(self, model: MlpModel, video: Video):
        if model.n_classes != video.r:
            raise ValueError(f"model predicts {model.n_classes} levels, video has {video.r}")
        if model.scaling is None:
            raise ValueError("model carries no scaling context")
        self.model, self.video = model, video

    def decide(self, view: PlayerStateView) -> int:
        x = extract(view, self.video, self.model.scaling)
        return 1 + int(np.argmax(forward(self.model, x)))


def as_logic(model: MlpModel, video: Video) -> MlpLogic:
    return MlpLogic(model, video)
