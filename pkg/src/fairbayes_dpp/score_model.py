"""Plug-in estimate of P(Y=1 | X=x, A=a) by logistic regression.

The protected attribute enters as one-hot columns appended to the features,
so a single model yields every group's score function.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import TabularDataset
from .errors import ConfigError, DivergenceError, PreconditionError, ShapeError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 20
    batch_size: int = 512
    seed: int = 0
    l2: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be at least 1")
        if self.l2 < 0:
            raise ConfigError("l2 must be nonnegative")


@dataclass(frozen=True, eq=False)
class ScoreModel:
    weights: np.ndarray
    bias: float
    d: int
    num_groups: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.d + self.num_groups,):
            raise ShapeError(f"expected {self.d + self.num_groups} weights, got {w.shape}")
        if not (np.all(np.isfinite(w)) and math.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    def logits(self, features, groups) -> np.ndarray:
        z = design_matrix(features, groups, self.d, self.num_groups)
        return z @ self.weights + self.bias

    def predict(self, features, groups) -> np.ndarray:
        """Vectorised scores for many rows."""
        return _sigmoid(self.logits(features, groups))

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias, "d": self.d,
                "num_groups": self.num_groups, "meta": self.meta}

    @classmethod
    def from_dict(cls, doc: dict) -> "ScoreModel":
        return cls(np.array(doc["weights"], dtype=float), doc["bias"], int(doc["d"]),
                   int(doc["num_groups"]), dict(doc.get("meta", {})))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "ScoreModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _sigmoid(z):
    # exp(-|z|) never overflows; result stays strictly inside (0, 1) for |z| < ~36
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return np.clip(out, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def design_matrix(features, groups, d, num_groups) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    a = np.atleast_1d(np.asarray(groups, dtype=np.int64))
    if x.shape[1] != d:
        raise ShapeError(f"expected {d} features, got {x.shape[1]}")
    if a.shape[0] != x.shape[0]:
        raise ShapeError("features and groups differ in length")
    if np.any((a < 0) | (a >= num_groups)):
        raise ShapeError(f"group id outside 0..{num_groups - 1}")
    onehot = np.zeros((x.shape[0], num_groups))
    onehot[np.arange(x.shape[0]), a] = 1.0
    return np.hstack([x, onehot])


def loss_and_grad(w, b, z, y, l2=0.0):
    """Mean cross-entropy (plus ``l2/2 * |w|^2``) and its gradient.

    The loss uses log(1 + e^s) - y*s on the logit s, never the log of a
    clipped probability.
    """
    s = z @ w + b
    loss = float(np.mean(np.logaddexp(0.0, s) - y * s)) + 0.5 * l2 * float(w @ w)
    r = _sigmoid(s) - y
    gw = z.T @ r / len(y) + l2 * w
    gb = float(np.mean(r))
    return loss, gw, gb


def train(ds: TabularDataset, cfg: TrainConfig) -> ScoreModel:
    """Fit the score model by seeded mini-batch gradient descent."""
    if ds.n < 1:
        raise PreconditionError("cannot train on an empty dataset")
    y = ds.labels.astype(float)
    if y.min() == y.max():
        raise PreconditionError("training data must contain both label values")

    z = design_matrix(ds.features, ds.groups, ds.dim, ds.num_groups)
    w = np.zeros(z.shape[1])
    b = 0.0
    rng = np.random.default_rng(cfg.seed)
    initial, _, _ = loss_and_grad(w, b, z, y, cfg.l2)
    bs = min(cfg.batch_size, ds.n)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(ds.n)
        for start in range(0, ds.n, bs):
            idx = order[start:start + bs]
            _, gw, gb = loss_and_grad(w, b, z[idx], y[idx], cfg.l2)
            w = w - cfg.learning_rate * gw
            b = b - cfg.learning_rate * gb
        if not (np.all(np.isfinite(w)) and math.isfinite(b)):
            raise DivergenceError(epoch)

    final, _, _ = loss_and_grad(w, b, z, y, cfg.l2)
    if not math.isfinite(final):
        raise DivergenceError(cfg.epochs)
    if final > initial + 1e-6:
        log.warning("training loss rose from %.6g to %.6g; consider a smaller learning rate",
                    initial, final)
    meta = {"epochs": cfg.epochs, "initial_loss": initial, "final_loss": final, "seed": cfg.seed}
    return ScoreModel(w, b, ds.dim, ds.num_groups, meta)


def predict_eta(model: ScoreModel, x, a: int) -> float:
    """Score of a single row: logistic link of the affine score."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError("predict_eta takes one feature vector")
    return float(model.predict(x.reshape(1, -1), [a])[0])
