"""Training loops, cross-validation, metrics, and the label-fraction ablation.

The pretext network is trained once on the whole (unlabeled) segment corpus;
its trunk is then transferred frozen into per-fold emotion classifiers whose
dense heads train on cached trunk features. A no-transfer supervised baseline
trains the identical architecture end-to-end for comparison.

Everything is deterministic given the data and a TrainConfig: epoch shuffles,
dropout masks, and initializations all derive from the config seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ParameterError, ValidationError
from .kernel.layers import Param
from .kernel.losses import (
    bce_loss,
    bce_loss_backward,
    cross_entropy,
    cross_entropy_backward,
    l2_penalty,
    l2_penalty_grad,
    multitask_loss,
)
from .kernel.optim import AdamState, adam_step
from .kernel.layers import sigmoid, sigmoid_backward
from .models import (
    NUM_TASKS,
    build_emotion_network,
    build_pretext_network,
    dense_weight_names,
    head_backward,
    head_forward,
    pretext_forward,
    transfer_weights,
    trunk_backward,
    trunk_forward,
)
from .rng import stream
from .signal import TARGET_FS_HZ, WINDOW_LEN, highpass_baseline_filter, resample, segment
from .transforms import PretextSample, TransformParams, build_pretext_dataset


@dataclass
class TrainConfig:
    """All hyperparameters of both training stages."""

    lr: float = 0.001
    batch_size: int = 128
    pretext_epochs: int = 30
    emotion_epochs: int = 100
    alphas: tuple[float, ...] = tuple([1.0 / NUM_TASKS] * NUM_TASKS)
    dropout: float = 0.6
    l2_beta: float = 0.0001
    kfolds: int = 10
    seed: int = 0
    label_fraction: float = 1.0
    binarize_scope: str = "global"  # or "fold"
    split_by_subject: bool = False
    num_classes: int = 2

    def __post_init__(self) -> None:
        if self.lr <= 0 or self.batch_size < 1 or self.pretext_epochs < 1 or self.emotion_epochs < 1:
            raise ParameterError("lr, batch_size and epoch counts must be positive")
        if len(self.alphas) != NUM_TASKS or any(a < 0 for a in self.alphas) or not any(self.alphas):
            raise ParameterError(f"alphas must be {NUM_TASKS} non-negative values, not all zero")
        if not 0 <= self.dropout < 1 or self.l2_beta < 0:
            raise ParameterError("dropout in [0, 1), l2_beta >= 0")
        if self.kfolds < 2:
            raise ParameterError("kfolds must be >= 2")
        if not 0 < self.label_fraction <= 1:
            raise ParameterError("label_fraction must be in (0, 1]")
        if self.binarize_scope not in ("global", "fold"):
            raise ParameterError("binarize_scope must be 'global' or 'fold'")


@dataclass
class SegmentDataset:
    """Preprocessed segments with per-segment subject ids and affect scores."""

    X: np.ndarray  # (n, 2560) float32
    subjects: list[str]
    scores: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float32)
        if self.X.ndim != 2 or self.X.shape[1] != WINDOW_LEN:
            raise ValidationError(f"X must be (n, {WINDOW_LEN}), got {self.X.shape}")
        if len(self.subjects) != self.X.shape[0]:
            raise ValidationError("subjects length mismatch")
        for name, s in self.scores.items():
            if len(s) != self.X.shape[0]:
                raise ValidationError(f"scores[{name!r}] length mismatch")

    def __len__(self) -> int:
        return self.X.shape[0]


@dataclass
class EvalReport:
    """Per-fold and aggregate downstream metrics plus pretext loss traces."""

    rows: list[dict]  # fold, target, accuracy, f1
    pretext_trace: np.ndarray | None = None  # (epochs, 7)

    def mean(self, target: str, metric: str = "accuracy") -> float:
        vals = [r[metric] for r in self.rows if r["target"] == target]
        return float(np.mean(vals))

    @property
    def targets(self) -> list[str]:
        return sorted({r["target"] for r in self.rows})


def prepare_dataset(recordings, fs_target: float = TARGET_FS_HZ) -> SegmentDataset:
    """Resample -> high-pass filter -> window each recording."""
    xs, subjects, scores_rows = [], [], []
    for rec in recordings:
        x = rec.samples
        if rec.sample_rate_hz != fs_target:
            x = resample(x, rec.sample_rate_hz, fs_target)
        x = highpass_baseline_filter(x, fs_target)
        for seg in segment(x, fs_target, subject_id=rec.subject_id):
            xs.append(seg.samples)
            subjects.append(rec.subject_id)
            scores_rows.append(rec.condition_labels)
    if not xs:
        raise ValidationError("no segments produced; recordings too short?")
    targets = sorted({t for row in scores_rows for t in row})
    scores = {}
    for t in targets:
        if not all(t in row for row in scores_rows):
            raise ValidationError(f"target {t!r} missing from some recordings")
        scores[t] = np.array([row[t] for row in scores_rows])
    return SegmentDataset(np.stack(xs).astype(np.float32), subjects, scores)


def binarize_labels(scores: np.ndarray, threshold: float | None = None) -> np.ndarray:
    """Binarize affect scores at the mean: label 1 iff score > mean."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size < 1:
        raise ParameterError("need at least one score")
    if threshold is None:
        threshold = float(scores.mean())
    labels = (scores > threshold).astype(np.int64)
    if labels.min() == labels.max():
        warnings.warn("degenerate target: all binarized labels identical", stacklevel=2)
    return labels


def kfold_split(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded shuffle then contiguous partition into k (train, test) pairs."""
    if n < k:
        raise ParameterError(f"cannot make {k} folds from {n} items")
    perm = stream(seed, 5).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(train), np.sort(test)))
    return out


def evaluate(predictions: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Accuracy and positive-class F1 (0 when precision + recall is 0)."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size < 1:
        raise ParameterError("predictions and labels must be equal-length, non-empty")
    accuracy = float(np.mean(predictions == labels))
    tp = int(np.sum((predictions == 1) & (labels == 1)))
    fp = int(np.sum((predictions == 1) & (labels == 0)))
    fn = int(np.sum((predictions == 0) & (labels == 1)))
    if tp == 0:
        return accuracy, 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return accuracy, 2 * precision * recall / (precision + recall)


def label_fraction_subset(subjects: list[str] | np.ndarray, labels: np.ndarray,
                          fraction: float, seed: int,
                          indices: np.ndarray | None = None) -> np.ndarray:
    """Seeded per-(subject, class) subsampling keeping ceil(fraction * count)."""
    if not 0 < fraction <= 1:
        raise ParameterError("fraction must be in (0, 1]")
    subjects = np.asarray(subjects)
    labels = np.asarray(labels)
    if indices is None:
        indices = np.arange(len(labels))
    indices = np.asarray(indices)
    if fraction == 1.0:
        return indices.copy()
    kept = []
    cells = sorted({(subjects[i], int(labels[i])) for i in indices})
    for c, (subj, lab) in enumerate(cells):
        cell = np.array([i for i in indices if subjects[i] == subj and labels[i] == lab])
        n_keep = math.ceil(fraction * cell.size)
        pick = stream(seed, 6, c).choice(cell.size, size=n_keep, replace=False)
        kept.append(cell[np.sort(pick)])
    return np.sort(np.concatenate(kept))


# ---------------------------------------------------------------------------
# Pretext training
# ---------------------------------------------------------------------------

def _pretext_loss_and_grads(params: dict[str, Param], xb: np.ndarray,
                            tasks: np.ndarray, alphas: np.ndarray,
                            dropout_rate: float, l2_beta: float,
                            rng: np.random.Generator | None, training: bool):
    probs, (trunk_caches, head_caches) = pretext_forward(
        params, xb, training=training, dropout_rate=dropout_rate, rng=rng, need_cache=True)
    b = xb.shape[0]
    labels = (tasks[:, None] == np.arange(NUM_TASKS)[None, :]).astype(probs.dtype)
    per_task = bce_loss(probs, labels).mean(axis=0)
    reg_names = dense_weight_names(params)
    loss = multitask_loss(per_task, alphas) + l2_penalty(
        [params[n].value for n in reg_names], l2_beta)

    dprobs = bce_loss_backward(probs, labels) * np.asarray(alphas)[None, :] / b
    grads: dict[str, np.ndarray] = {}
    dfeats = None
    for j in range(NUM_TASKS):
        hc, sc = head_caches[j]
        dz = sigmoid_backward(dprobs[:, j], sc)[:, None].astype(xb.dtype)
        df = head_backward(dz, hc, f"head{j}", grads)
        dfeats = df if dfeats is None else dfeats + df
    if params["trunk/conv0/kernels"].trainable:
        trunk_backward(dfeats, trunk_caches, grads)
    for n in reg_names:
        grads[n] = grads[n] + l2_penalty_grad(params[n].value, l2_beta)
    return loss, per_task, grads


def train_pretext(samples: list[PretextSample], config: TrainConfig,
                  on_epoch_end=None):
    """Train trunk + 7 heads; returns (params, per-task loss trace (epochs, 7)).

    ``on_epoch_end(epoch, params, per_task_losses)``, when given, runs after
    every epoch; returning True stops training early (the trace is truncated
    to the completed epochs).
    """
    if not samples:
        raise ParameterError("empty pretext dataset")
    X = np.stack([s.segment for s in samples]).astype(np.float32)[..., None]
    tasks = np.array([int(s.task) for s in samples])
    params = build_pretext_network(config.seed)
    state = AdamState(lr=config.lr)
    alphas = np.asarray(config.alphas, dtype=np.float64)
    trace = np.zeros((config.pretext_epochs, NUM_TASKS))
    n = len(samples)
    for epoch in range(config.pretext_epochs):
        order = stream(config.seed, 3, epoch).permutation(n)
        drop_rng = stream(config.seed, 4, epoch)
        epoch_losses = np.zeros(NUM_TASKS)
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, per_task, grads = _pretext_loss_and_grads(
                params, X[idx], tasks[idx], alphas, config.dropout,
                config.l2_beta, drop_rng, training=True)
            adam_step(params, grads, state)
            epoch_losses += np.asarray(per_task, dtype=np.float64)
            n_batches += 1
        trace[epoch] = epoch_losses / n_batches
        if on_epoch_end is not None and on_epoch_end(epoch, params, trace[epoch]):
            return params, trace[:epoch + 1]
    return params, trace


def predict_pretext_task(params: dict[str, Param], X: np.ndarray,
                         batch_size: int = 128) -> np.ndarray:
    """Predicted transformation id = argmax over the 7 head probabilities."""
    X = np.asarray(X, dtype=np.float32)
    if X.ndim == 2:
        X = X[..., None]
    preds = []
    for start in range(0, X.shape[0], batch_size):
        probs = pretext_forward(params, X[start:start + batch_size], training=False)
        preds.append(np.argmax(probs, axis=1))
    return np.concatenate(preds)


# ---------------------------------------------------------------------------
# Downstream (emotion) training
# ---------------------------------------------------------------------------

def extract_features(params: dict[str, Param], X: np.ndarray,
                     batch_size: int = 128) -> np.ndarray:
    """Trunk features (n, 128) for (n, 2560) segments."""
    X = np.asarray(X, dtype=np.float32)
    if X.ndim == 2:
        X = X[..., None]
    feats = []
    for start in range(0, X.shape[0], batch_size):
        f, _, _ = trunk_forward(params, X[start:start + batch_size], need_cache=False)
        feats.append(f)
    return np.concatenate(feats)


def _normalized_ce(probs: np.ndarray, onehot: np.ndarray):
    """Cross-entropy on per-class sigmoid outputs renormalized to sum to 1.

    Independent sigmoids with a plain categorical cross-entropy are degenerate
    (pushing every class probability to 1 zeroes the loss), so the loss is
    evaluated on rho = p / sum(p); argmax decisions are unaffected because the
    rescaling is monotone within each row. Returns (mean loss, d loss / d p).
    """
    s = probs.sum(axis=1, keepdims=True)
    rho = probs / s
    loss = float(cross_entropy(rho, onehot).mean())
    drho = cross_entropy_backward(rho, onehot) / probs.shape[0]
    dprobs = (drho - (drho * rho).sum(axis=1, keepdims=True)) / s
    return loss, dprobs


def _head_loss_and_grads(params: dict[str, Param], feats: np.ndarray,
                         onehot: np.ndarray, dropout_rate: float, l2_beta: float,
                         rng: np.random.Generator | None, training: bool):
    logits, hc = head_forward(params, "emotion", feats, dropout_rate, rng, training)
    probs, sc = sigmoid(logits)
    reg_names = [n for n in dense_weight_names(params) if n.startswith("emotion/")]
    ce, dprobs = _normalized_ce(probs, onehot)
    loss = ce + l2_penalty([params[n].value for n in reg_names], l2_beta)
    dz = sigmoid_backward(dprobs, sc).astype(feats.dtype)
    grads: dict[str, np.ndarray] = {}
    head_backward(dz, hc, "emotion", grads)
    for n in reg_names:
        grads[n] = grads[n] + l2_penalty_grad(params[n].value, l2_beta)
    return loss, grads


def _emotion_loss_and_grads(params: dict[str, Param], xb: np.ndarray,
                            labels: np.ndarray, l2_beta: float,
                            dropout_rate: float, rng: np.random.Generator | None,
                            training: bool):
    """Full-network loss/grads; trunk grads computed only when trainable."""
    trainable_trunk = params["trunk/conv0/kernels"].trainable
    feats, trunk_caches, _ = trunk_forward(params, xb, need_cache=trainable_trunk)
    n_classes = params["emotion/fc2/weights"].value.shape[1]
    onehot = np.eye(n_classes, dtype=xb.dtype)[np.asarray(labels)]
    logits, hc = head_forward(params, "emotion", feats, dropout_rate, rng, training)
    probs, sc = sigmoid(logits)
    reg_names = dense_weight_names(params)
    ce, dprobs = _normalized_ce(probs, onehot)
    loss = ce + l2_penalty([params[n].value for n in reg_names], l2_beta)
    dz = sigmoid_backward(dprobs, sc).astype(xb.dtype)
    grads: dict[str, np.ndarray] = {}
    dfeats = head_backward(dz, hc, "emotion", grads)
    if trainable_trunk:
        trunk_backward(dfeats, trunk_caches, grads)
    for n in reg_names:
        grads[n] = grads[n] + l2_penalty_grad(params[n].value, l2_beta)
    return loss, grads


def train_emotion(trunk: dict[str, Param], X: np.ndarray, labels: np.ndarray,
                  config: TrainConfig, seed_salt: int = 0):
    """Train the emotion head on a frozen transferred trunk.

    Trunk features are extracted once and the dense head trains on them;
    with the trunk frozen and dropout confined to the head, this is exactly
    equivalent to running full batches through the network every step.
    Returns (network params, per-epoch loss trace).
    """
    net = build_emotion_network(int(stream(config.seed, 7, seed_salt).integers(2 ** 31)),
                                trunk=trunk, num_classes=config.num_classes)
    feats = extract_features(net, X)
    labels = np.asarray(labels)
    onehot_all = np.eye(config.num_classes, dtype=np.float32)[labels]
    head = {k: v for k, v in net.items() if k.startswith("emotion/")}
    state = AdamState(lr=config.lr)
    trace = np.zeros(config.emotion_epochs)
    n = feats.shape[0]
    for epoch in range(config.emotion_epochs):
        order = stream(config.seed, 8, seed_salt, epoch).permutation(n)
        drop_rng = stream(config.seed, 9, seed_salt, epoch)
        epoch_loss, n_batches = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = _head_loss_and_grads(head, feats[idx], onehot_all[idx],
                                               config.dropout, config.l2_beta,
                                               drop_rng, training=True)
            adam_step(head, grads, state)
            epoch_loss += loss
            n_batches += 1
        trace[epoch] = epoch_loss / n_batches
    return net, trace


def train_supervised(X: np.ndarray, labels: np.ndarray, config: TrainConfig,
                     seed_salt: int = 0):
    """No-transfer baseline: identical architecture trained end-to-end."""
    net = build_emotion_network(int(stream(config.seed, 7, seed_salt).integers(2 ** 31)),
                                trunk=None, num_classes=config.num_classes)
    X = np.asarray(X, dtype=np.float32)
    if X.ndim == 2:
        X = X[..., None]
    labels = np.asarray(labels)
    state = AdamState(lr=config.lr)
    trace = np.zeros(config.emotion_epochs)
    n = X.shape[0]
    for epoch in range(config.emotion_epochs):
        order = stream(config.seed, 8, seed_salt, epoch).permutation(n)
        drop_rng = stream(config.seed, 9, seed_salt, epoch)
        epoch_loss, n_batches = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grads = _emotion_loss_and_grads(net, X[idx], labels[idx],
                                                  config.l2_beta, config.dropout,
                                                  drop_rng, training=True)
            adam_step(net, grads, state)
            epoch_loss += loss
            n_batches += 1
        trace[epoch] = epoch_loss / n_batches
    return net, trace


def predict_emotion(net: dict[str, Param], X: np.ndarray,
                    batch_size: int = 128) -> np.ndarray:
    from .models import emotion_forward

    X = np.asarray(X, dtype=np.float32)
    if X.ndim == 2:
        X = X[..., None]
    preds = []
    for start in range(0, X.shape[0], batch_size):
        probs = emotion_forward(net, X[start:start + batch_size], training=False)
        preds.append(np.argmax(probs, axis=1))
    return np.concatenate(preds)


# ---------------------------------------------------------------------------
# Cross-validation experiment
# ---------------------------------------------------------------------------

def run_cv_experiment(data: SegmentDataset, config: TrainConfig,
                      trunk: dict[str, Param] | None = None,
                      supervised: bool = False,
                      transform_params: TransformParams | None = None) -> EvalReport:
    """Full protocol: pretext-pretrain on all segments (once), then per fold
    train the downstream classifier on the train split and evaluate on the
    test split, for every affect target.

    With ``supervised=True`` the pretext step is skipped and a fresh network
    is trained end-to-end per fold instead (the no-transfer baseline).
    """
    n = len(data)
    if n < config.kfolds:
        raise ParameterError(f"{n} segments is fewer than {config.kfolds} folds")
    if not data.scores:
        raise ParameterError("dataset has no affect targets")

    pretext_trace = None
    if not supervised and trunk is None:
        tp = transform_params or TransformParams(rng_seed=config.seed)
        samples = build_pretext_dataset(list(data.X), tp)
        trunk, pretext_trace = train_pretext(samples, config)

    if config.split_by_subject:
        uniq = sorted(set(data.subjects))
        subject_folds = kfold_split(len(uniq), config.kfolds, config.seed)
        subj_arr = np.asarray(data.subjects)
        folds = []
        for tr_s, te_s in subject_folds:
            tr_set = {uniq[i] for i in tr_s}
            mask = np.isin(subj_arr, sorted(tr_set))
            folds.append((np.flatnonzero(mask), np.flatnonzero(~mask)))
    else:
        folds = kfold_split(n, config.kfolds, config.seed)

    rows = []
    for target_id, (target, scores) in enumerate(sorted(data.scores.items())):
        global_labels = binarize_labels(scores) if config.binarize_scope == "global" else None
        for fold_id, (train_idx, test_idx) in enumerate(folds):
            assert not np.intersect1d(train_idx, test_idx).size, "fold leakage"
            if config.binarize_scope == "global":
                labels = global_labels
            else:
                thr = float(np.mean(scores[train_idx]))
                labels = binarize_labels(scores, threshold=thr)
            fit_idx = label_fraction_subset(data.subjects, labels,
                                            config.label_fraction,
                                            config.seed, indices=train_idx)
            salt = fold_id * 10 + target_id
            if supervised:
                net, _ = train_supervised(data.X[fit_idx], labels[fit_idx], config,
                                          seed_salt=salt)
            else:
                net, _ = train_emotion(trunk, data.X[fit_idx], labels[fit_idx],
                                       config, seed_salt=salt)
            preds = predict_emotion(net, data.X[test_idx])
            acc, f1 = evaluate(preds, labels[test_idx])
            rows.append({"fold": fold_id, "target": target,
                         "accuracy": acc, "f1": f1})
    return EvalReport(rows=rows, pretext_trace=pretext_trace)


def config_echo(config: TrainConfig) -> dict:
    return asdict(config)
