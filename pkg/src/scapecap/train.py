"""Training loop with early stopping on validation ISOP loss, and metrics."""

import copy
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import vocab
from .errors import DegenerateClassError, EmptySplitError
from .model.network import PredictionBundle, save_checkpoint
from .objectives import LabelSet, task_losses, uncertainty_weighted_total

logger = logging.getLogger(__name__)

ISOP_TASK = vocab.TASKS.index("isop")


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    patience_start_epoch: int = 10
    seed: int | None = 0
    weight_decay: float = 0.0

    def __post_init__(self):
        if not (self.learning_rate > 0 and self.batch_size > 0 and self.max_epochs > 0 and self.patience > 0
                and self.patience_start_epoch > 0):
            raise ValueError("training settings must be positive")
        if self.patience_start_epoch > self.max_epochs:
            raise ValueError("patience_start_epoch must not exceed max_epochs")


@dataclass
class EpochRecord:
    epoch: int  # 1-based
    train_total: float
    train_task_losses: list
    val_isop_loss: float
    metrics: dict = field(default_factory=dict)


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False

    @property
    def val_isop(self):
        return [e.val_isop_loss for e in self.epochs]

    @property
    def train_total(self):
        return [e.train_total for e in self.epochs]

    def to_dict(self):
        return {"epochs": [asdict(e) for e in self.epochs], "best_epoch": self.best_epoch,
                "stopped_early": self.stopped_early}


# ---------------------------------------------------------------- data

@dataclass
class ClipTensors:
    """Features and labels of a split, one entry per clip."""

    clip_ids: list
    mel: list  # (T, 64) float tensors
    loudness: list  # (T', 1)
    labels: LabelSet

    def __len__(self):
        return len(self.clip_ids)

    def batch(self, idx):
        idx = list(idx)
        # Clips of unequal length are cropped to the shortest in the batch.
        t_mel = min(self.mel[i].shape[0] for i in idx)
        t_loud = min(self.loudness[i].shape[0] for i in idx)
        mel = torch.stack([self.mel[i][:t_mel] for i in idx])
        loud = torch.stack([self.loudness[i][:t_loud] for i in idx])
        labels = LabelSet(self.labels.scene[idx], self.labels.events[idx], self.labels.aq[idx])
        return mel, loud, labels


def labels_from_records(records):
    return LabelSet(
        scene=torch.tensor([r.scene_index for r in records], dtype=torch.long),
        events=torch.tensor([list(r.event_multihot) for r in records], dtype=torch.float32),
        aq=torch.tensor([list(r.aq_responses) for r in records], dtype=torch.float32),
    )


def load_split(records, cache):
    """Read cached features for ``records``; raises CacheMissError naming the clip."""
    if not records:
        raise EmptySplitError("split has no clips")
    pairs = [cache.load(r.clip_id) for r in records]
    return ClipTensors(
        clip_ids=[r.clip_id for r in records],
        mel=[torch.as_tensor(p.mel.values, dtype=torch.float32) for p in pairs],
        loudness=[torch.as_tensor(p.loudness.values, dtype=torch.float32) for p in pairs],
        labels=labels_from_records(records),
    )


# ---------------------------------------------------------------- metrics

def roc_auc(scores, labels):
    """Rank-based AUC (Mann-Whitney); tied scores count one half."""
    from scipy.stats import rankdata

    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClassError("AUC needs at least one positive and one negative example")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_auc(scores, labels, names=vocab.EVENTS, skipped=None):
    """Mean per-class AUC; classes with a single label value are skipped
    (and their names appended to ``skipped`` when a list is given)."""
    scores, labels = np.asarray(scores), np.asarray(labels)
    aucs = []
    for c in range(scores.shape[1]):
        try:
            aucs.append(roc_auc(scores[:, c], labels[:, c]))
        except DegenerateClassError:
            if skipped is not None:
                skipped.append(names[c])
    if not aucs:
        raise DegenerateClassError("no event class has both positive and negative examples")
    return float(np.mean(aucs))


def predict(model, data: ClipTensors, batch_size=32):
    """Eval-mode predictions for every clip, concatenated in clip order."""
    model.eval()
    parts = []
    with torch.no_grad():
        for start in range(0, len(data), batch_size):
            mel, loud, _ = data.batch(range(start, min(start + batch_size, len(data))))
            parts.append(model(mel, loud))
    return PredictionBundle(*(torch.cat(ts) for ts in zip(*(p.as_tuple() for p in parts))))


def metrics_from_predictions(pred, labels: LabelSet):
    acc = float((pred.scene_probs.argmax(dim=1) == labels.scene).double().mean())
    skipped = []
    try:
        auc = macro_auc(pred.event_probs.numpy(), labels.events.numpy(), skipped=skipped)
    except DegenerateClassError:
        auc = float("nan")
    mse = {"isop": float(((pred.isop - labels.isop) ** 2).mean()),
           "isoe": float(((pred.isoe - labels.isoe) ** 2).mean())}
    aq_mse = ((pred.aq - labels.aq) ** 2).mean(dim=0)
    for name, v in zip(vocab.AQ_NAMES, aq_mse):
        mse[name] = float(v)
    return {"asc_accuracy": acc, "aec_auc_macro": auc, "auc_skipped_events": skipped, "mse_per_target": mse,
            "mse_mean": float(aq_mse.mean())}


def evaluate_metrics(model, data: ClipTensors, batch_size=32):
    if len(data) == 0:
        raise EmptySplitError("cannot evaluate an empty split")
    metrics = metrics_from_predictions(predict(model, data, batch_size), data.labels)
    if metrics["auc_skipped_events"]:
        logger.warning("events without both label values, skipped from AUC: %s", metrics["auc_skipped_events"])
    return metrics


# ---------------------------------------------------------------- early stopping

def _best_epoch(val_losses, upto):
    best, best_epoch = np.inf, None
    for epoch, loss in enumerate(val_losses[:upto], start=1):
        if loss < best:
            best, best_epoch = loss, epoch
    return best_epoch


def early_stop_check(history, epoch, config: TrainConfig):
    """True when, from ``patience_start_epoch`` on, the validation ISOP loss
    has not reached a new strict minimum for ``patience`` epochs.

    ``history`` is a TrainHistory or a sequence of per-epoch validation ISOP
    losses; ``epoch`` is 1-based.
    """
    losses = history.val_isop if isinstance(history, TrainHistory) else list(history)
    if epoch < config.patience_start_epoch:
        return False
    best_epoch = _best_epoch(losses, epoch) or 0
    return epoch - max(best_epoch, config.patience_start_epoch) >= config.patience


# ---------------------------------------------------------------- training

def train(model, train_data: ClipTensors, val_data: ClipTensors, config: TrainConfig = TrainConfig(),
          log_path=None, checkpoint_dir=None, extra=None):
    """Fit ``model`` in place; returns ``(best_model, history)``.

    The uncertainty parameters ``model.log_sigma`` are optimised jointly
    with the network weights.
    """
    if len(train_data) == 0 or len(val_data) == 0:
        raise EmptySplitError("train and validation splits must be non-empty")
    if config.seed is not None:
        torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    optimiser = torch.optim.Adam(model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)
    history = TrainHistory()
    best_state, best_loss = None, np.inf
    log_file = open(log_path, "w") if log_path else None
    if checkpoint_dir:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)

    try:
        for epoch in range(1, config.max_epochs + 1):
            model.train()
            order = rng.permutation(len(train_data))
            totals, task_sums, n_seen = 0.0, torch.zeros(len(vocab.TASKS), dtype=torch.float64), 0
            for start in range(0, len(order), config.batch_size):
                idx = order[start:start + config.batch_size]
                if len(idx) == 1 and len(order) > 1:
                    # Batch-norm needs two samples; fold a lone remainder into training once more.
                    idx = np.concatenate([idx, order[:1]])
                mel, loud, labels = train_data.batch(idx)
                losses = task_losses(model(mel, loud), labels)
                total = uncertainty_weighted_total(losses, log_sigma=model.log_sigma)
                optimiser.zero_grad()
                total.backward()
                optimiser.step()
                totals += total.item() * len(idx)
                task_sums += losses.values.detach().double() * len(idx)
                n_seen += len(idx)

            pred = predict(model, val_data, config.batch_size)
            val_isop = float(((pred.isop - val_data.labels.isop) ** 2).mean())
            record = EpochRecord(epoch, totals / n_seen, (task_sums / n_seen).tolist(), val_isop,
                                 metrics_from_predictions(pred, val_data.labels))
            history.epochs.append(record)
            if val_isop < best_loss:
                best_loss, history.best_epoch = val_isop, epoch
                best_state = copy.deepcopy(model.state_dict())
                if checkpoint_dir:
                    save_checkpoint(model, Path(checkpoint_dir) / "best.pt", {"epoch": epoch, **(extra or {})})
            if log_file:
                log_file.write(json.dumps(asdict(record), sort_keys=True) + "\n")
                log_file.flush()
            logger.info("epoch %d total %.4f val ISOP %.4f", epoch, record.train_total, val_isop)
            if early_stop_check(history, epoch, config):
                history.stopped_early = True
                logger.info("early stop at epoch %d (best %d)", epoch, history.best_epoch)
                break
    finally:
        if log_file:
            log_file.close()

    if checkpoint_dir:
        save_checkpoint(model, Path(checkpoint_dir) / "last.pt", {"epoch": history.epochs[-1].epoch, **(extra or {})})
    model.load_state_dict(best_state)
    model.eval()
    return model, history
