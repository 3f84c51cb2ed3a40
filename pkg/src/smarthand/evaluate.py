"""Training loop, both cross-validation protocols, and the metrics.

cv_random shuffles contact frames into n_folds near-equal folds; cv_loso
holds out one full recording session per fold.  Object classes contribute
their contact frames, the empty-hand class contributes its own frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calib import ThresholdMap, calibrate, is_contact
from .errors import ValidationError
from .frames import NUM_CLASSES, Dataset
from .model import ModelGraph, build_smarthand_net, normalize_frame
from .nn import AdamState, adam_step, cross_entropy, softmax
from .sensorsim.scenes import EMPTY_HAND_CLASS


@dataclass(frozen=True)
class EvalConfig:
    epochs: int = 60
    batch_size: int = 32
    lr0: float = 1e-3
    # MultiStep schedule: lr is multiplied by lr_gamma at each milestone epoch
    lr_milestones: tuple = (20, 40)
    lr_gamma: float = 0.1
    n_folds: int = 7
    seed: int = 0
    dropout_rate: float = 0.2
    with_imu: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.n_folds < 2:
            raise ValidationError(f"n_folds must be >= 2, got {self.n_folds}")
        if self.lr0 < 0:
            raise ValidationError(f"lr0 must be >= 0, got {self.lr0}")
        if not 0 < self.lr_gamma <= 1:
            raise ValidationError(f"lr_gamma must be in (0, 1], got {self.lr_gamma}")

    def lr_at(self, epoch: int) -> float:
        drops = sum(1 for m in self.lr_milestones if m <= epoch)
        return self.lr0 * self.lr_gamma**drops


@dataclass
class EvalReport:
    method: str
    folds: list = field(default_factory=list)
    mean_top1: float = 0.0
    std_top1: float = 0.0
    mean_top3: float = 0.0
    std_top3: float = 0.0

    def to_json_dict(self):
        return {
            "method": self.method,
            "mean_top1": self.mean_top1,
            "std_top1": self.std_top1,
            "mean_top3": self.mean_top3,
            "std_top3": self.std_top3,
            "folds": self.folds,
        }


def topk_accuracy(probs, labels, k):
    """Fraction with the true class among the k highest probabilities.

    Ties resolve toward the lower class index (stable sort on -prob).
    """
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if not 1 <= k <= probs.shape[1]:
        raise ValidationError(f"k must be in [1, {probs.shape[1]}], got {k}")
    order = np.argsort(-probs, axis=1, kind="stable")[:, :k]
    hit = (order == labels[:, None]).any(axis=1)
    return float(hit.mean())


def confusion(probs, labels, n_classes=NUM_CLASSES):
    """Counts matrix, rows true class, columns predicted class."""
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    pred = probs.argmax(axis=1)  # argmax takes the first maximum: low index
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (labels, pred), 1)
    return m


def extract_training_set(dataset: Dataset, thresholds: ThresholdMap):
    """Normalized inputs X (N,1,32,32), labels y, and session ids.

    Object-class recordings contribute only frames passing the contact
    check; empty-hand recordings contribute every frame.
    """
    xs, ys, sessions = [], [], []
    for rec in dataset.recordings():
        for frame in rec.frames:
            if rec.label != EMPTY_HAND_CLASS and not is_contact(frame, thresholds):
                continue
            xs.append(normalize_frame(frame.values))
            ys.append(rec.label)
            sessions.append(rec.session_id)
    if not xs:
        raise ValidationError("dataset contains no usable frames")
    x = np.stack(xs)[:, None, :, :]
    return x, np.array(ys, dtype=np.int64), np.array(sessions, dtype=np.int64)


def thresholds_from_dataset(dataset: Dataset) -> ThresholdMap:
    frames = [
        f
        for rec in dataset.recordings()
        if rec.label == EMPTY_HAND_CLASS
        for f in rec.frames
    ]
    if not frames:
        raise ValidationError("dataset has no empty-hand recordings to calibrate on")
    return calibrate(frames)


def _batches(n, batch_size, rng):
    perm = rng.permutation(n)
    out = [perm[i : i + batch_size] for i in range(0, n, batch_size)]
    # batchnorm cannot normalize a single sample; fold a lone trailing
    # sample into the previous batch
    if len(out) > 1 and len(out[-1]) == 1:
        out[-2] = np.concatenate([out[-2], out[-1]])
        out.pop()
    return out


def predict_probs(g: ModelGraph, x, imu=None, batch=256):
    chunks = []
    for i in range(0, len(x), batch):
        im = imu[i : i + batch] if imu is not None else None
        chunks.append(softmax(g.forward(x[i : i + batch], imu=im, mode="eval")))
    return np.concatenate(chunks)


def train(g: ModelGraph, x_train, y_train, x_val, y_val, cfg: EvalConfig):
    """Shuffled mini-batch Adam; returns per-epoch learning curves."""
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValidationError("train and validation splits must be non-empty")
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xB47C)))
    params = g.params()
    grads = g.grads()
    state = AdamState(params)
    curves = {"train_loss": [], "train_acc": [], "val_loss": [], "val_acc": []}
    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        loss_sum = 0.0
        hit_sum = 0
        for idx in _batches(len(x_train), cfg.batch_size, rng):
            xb, yb = x_train[idx], y_train[idx]
            logits = g.forward(xb, mode="train")
            loss, grad = cross_entropy(logits, yb)
            g.backward(grad)
            if lr > 0:
                adam_step(params, grads, state, lr)
            loss_sum += loss * len(idx)
            hit_sum += int((logits.argmax(axis=1) == yb).sum())
        val_probs = predict_probs(g, x_val)
        val_loss, _ = cross_entropy(np.log(np.maximum(val_probs, 1e-300)), y_val)
        curves["train_loss"].append(loss_sum / len(x_train))
        curves["train_acc"].append(hit_sum / len(x_train))
        curves["val_loss"].append(val_loss)
        curves["val_acc"].append(topk_accuracy(val_probs, y_val, 1))
    return curves


def _fold_seed(cfg, tag, index):
    return int(np.random.SeedSequence((cfg.seed, tag, index)).generate_state(1)[0])


def _run_fold(name, x_tr, y_tr, x_va, y_va, cfg, fold_index):
    g = build_smarthand_net(
        with_imu=cfg.with_imu,
        seed=_fold_seed(cfg, 0xF01D, fold_index),
        dropout_rate=cfg.dropout_rate,
    )
    curves = train(g, x_tr, y_tr, x_va, y_va, cfg)
    probs = predict_probs(g, x_va)
    top1 = curves["val_acc"][-1]
    return {
        "name": name,
        "n_train": int(len(x_tr)),
        "n_val": int(len(x_va)),
        "top1": top1,
        "top3": topk_accuracy(probs, y_va, 3),
        "confusion": confusion(probs, y_va).tolist(),
        "curves": curves,
    }


def _finalize(method, folds):
    top1 = np.array([f["top1"] for f in folds])
    top3 = np.array([f["top3"] for f in folds])
    return EvalReport(
        method=method,
        folds=folds,
        mean_top1=float(top1.mean()),
        std_top1=float(top1.std()),
        mean_top3=float(top3.mean()),
        std_top3=float(top3.std()),
    )


def cv_random(dataset: Dataset, cfg: EvalConfig, thresholds=None) -> EvalReport:
    """Frame-level shuffle into n_folds folds, each held out once."""
    if thresholds is None:
        thresholds = thresholds_from_dataset(dataset)
    x, y, _ = extract_training_set(dataset, thresholds)
    counts = np.bincount(y, minlength=NUM_CLASSES)
    if (counts < cfg.n_folds).any():
        lacking = int(np.argmin(counts))
        raise ValidationError(
            f"class {lacking} has {counts[lacking]} usable frames, "
            f"needs at least n_folds = {cfg.n_folds}"
        )
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x5F1E)))
    perm = rng.permutation(len(x))
    folds = []
    for i, val_idx in enumerate(np.array_split(perm, cfg.n_folds)):
        mask = np.ones(len(x), dtype=bool)
        mask[val_idx] = False
        folds.append(
            _run_fold(f"fold{i}", x[mask], y[mask], x[val_idx], y[val_idx], cfg, i)
        )
    return _finalize("cv_random", folds)


def cv_loso(dataset: Dataset, cfg: EvalConfig, thresholds=None) -> EvalReport:
    """Leave-one-session-out: train on all other sessions."""
    if thresholds is None:
        thresholds = thresholds_from_dataset(dataset)
    x, y, sessions = extract_training_set(dataset, thresholds)
    ids = np.unique(sessions)
    if len(ids) < 2:
        raise ValidationError("leave-one-session-out needs at least 2 sessions")
    folds = []
    for i, sid in enumerate(ids):
        va = sessions == sid
        folds.append(
            _run_fold(f"session{sid}", x[~va], y[~va], x[va], y[va], cfg, i)
        )
    return _finalize("cv_loso", folds)
