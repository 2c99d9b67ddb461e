"""Scikit-learn style estimators wrapping the training pipeline.

``SignalTransformRecognizer`` is the self-supervised stage: fit it on an
unlabeled matrix of ECG segments and it learns the transformation-recognition
network. As a transformer it maps segments to 128-dim trunk features; as a
classifier it predicts which transformation a segment underwent.

``EmotionClassifier`` is the downstream stage: given a fitted recognizer (or
a raw trunk) it trains only its dense head on the frozen transferred trunk;
without one it trains the whole network end-to-end (the supervised baseline).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import ValidationError
from .signal import WINDOW_LEN
from .training import (
    TrainConfig,
    extract_features,
    predict_emotion,
    predict_pretext_task,
    train_emotion,
    train_pretext,
    train_supervised,
)
from .transforms import TransformParams, build_pretext_dataset


def _check_segments(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != WINDOW_LEN:
        raise ValidationError(f"X must be (n_segments, {WINDOW_LEN}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("X contains non-finite values")
    return X


class SignalTransformRecognizer(TransformerMixin, BaseEstimator):
    """Self-supervised multi-task network trained to recognize which of the
    seven transformations (including "none") was applied to a segment."""

    def __init__(self, lr=0.001, batch_size=128, epochs=30,
                 alphas=None, dropout=0.6, l2_beta=0.0001,
                 noise_sigma_rel=0.5, scale_factor=2.0, permute_pieces=10,
                 warp_pieces=4, warp_stretch=1.25, seed=0):
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.alphas = alphas
        self.dropout = dropout
        self.l2_beta = l2_beta
        self.noise_sigma_rel = noise_sigma_rel
        self.scale_factor = scale_factor
        self.permute_pieces = permute_pieces
        self.warp_pieces = warp_pieces
        self.warp_stretch = warp_stretch
        self.seed = seed

    def _config(self) -> TrainConfig:
        kwargs = {} if self.alphas is None else {"alphas": tuple(self.alphas)}
        return TrainConfig(lr=self.lr, batch_size=self.batch_size,
                           pretext_epochs=self.epochs, dropout=self.dropout,
                           l2_beta=self.l2_beta, seed=self.seed, **kwargs)

    def transform_params(self) -> TransformParams:
        return TransformParams(noise_sigma_rel=self.noise_sigma_rel,
                               scale_factor=self.scale_factor,
                               permute_pieces=self.permute_pieces,
                               warp_pieces=self.warp_pieces,
                               warp_stretch=self.warp_stretch,
                               rng_seed=self.seed)

    def fit(self, X, y=None):
        """Build the pseudo-labeled pretext dataset from X and train on it."""
        X = _check_segments(X)
        samples = build_pretext_dataset(list(X), self.transform_params())
        self.params_, self.loss_trace_ = train_pretext(samples, self._config())
        return self

    def _fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before using this estimator")
        return self.params_

    def transform(self, X) -> np.ndarray:
        """Frozen-trunk features, shape (n_segments, 128)."""
        return extract_features(self._fitted(), _check_segments(X))

    def predict(self, X) -> np.ndarray:
        """Predicted transformation id (0..6) per segment."""
        return predict_pretext_task(self._fitted(), _check_segments(X))

    def score(self, X, y) -> float:
        return float(np.mean(self.predict(X) == np.asarray(y)))


class EmotionClassifier(ClassifierMixin, BaseEstimator):
    """Binary affect classifier on 10 s ECG segments.

    With ``trunk`` set (a fitted SignalTransformRecognizer or a parameter
    dict), the conv layers are transferred frozen and only the dense head is
    trained. With ``trunk=None`` the identical architecture trains end-to-end.
    """

    def __init__(self, trunk=None, lr=0.001, batch_size=128, epochs=100,
                 dropout=0.6, l2_beta=0.0001, seed=0):
        self.trunk = trunk
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.dropout = dropout
        self.l2_beta = l2_beta
        self.seed = seed

    def _config(self, num_classes: int) -> TrainConfig:
        return TrainConfig(lr=self.lr, batch_size=self.batch_size,
                           emotion_epochs=self.epochs, dropout=self.dropout,
                           l2_beta=self.l2_beta, seed=self.seed,
                           num_classes=num_classes)

    def fit(self, X, y):
        X = _check_segments(X)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        y_idx = np.searchsorted(self.classes_, y)
        config = self._config(len(self.classes_))
        trunk = self.trunk
        if isinstance(trunk, SignalTransformRecognizer):
            trunk = trunk._fitted()
        if trunk is None:
            self.net_, self.loss_trace_ = train_supervised(X, y_idx, config)
        else:
            self.net_, self.loss_trace_ = train_emotion(trunk, X, y_idx, config)
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "net_"):
            raise NotFittedError("call fit before predict")
        idx = predict_emotion(self.net_, _check_segments(X))
        return self.classes_[idx]

    def predict_proba(self, X) -> np.ndarray:
        """Per-class sigmoid outputs, renormalized to sum to 1 per row."""
        if not hasattr(self, "net_"):
            raise NotFittedError("call fit before predict_proba")
        from .models import emotion_forward

        X = _check_segments(X).astype(np.float32)[..., None]
        probs = []
        for start in range(0, X.shape[0], self.batch_size):
            probs.append(emotion_forward(self.net_, X[start:start + self.batch_size],
                                         training=False))
        p = np.concatenate(probs)
        return p / p.sum(axis=1, keepdims=True)
