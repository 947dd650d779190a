"""Task losses, ISO pleasantness/eventfulness and uncertainty weighting."""

from dataclasses import dataclass
from math import sqrt

import numpy as np
import torch
import torch.nn.functional as F

from . import vocab
from .errors import DomainError, RangeError, ShapeError

ISO_K = 8.0 + sqrt(32.0)
_S2 = sqrt(2.0)
N_CLASSIFICATION = 2  # scene (CE) and events (BCE)


def _aq_columns(r):
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != vocab.N_AQ:
        raise ShapeError(f"affective-quality vectors need {vocab.N_AQ} entries, got shape {r.shape}")
    if np.any(r < 1) or np.any(r > 5):
        raise RangeError("affective-quality ratings must lie in [1, 5]")
    return [r[..., vocab.AQ_INDEX[n]] for n in vocab.AQ_NAMES]


def iso_pleasantness(r):
    """Projection of AQ ratings on the pleasant-annoying axis, in [-1, 1]."""
    pl, ev, ch, vi, ue, ca, an, mo = _aq_columns(r)
    return (_S2 * pl - _S2 * an + ca - ch + vi - mo) / ISO_K


def iso_eventfulness(r):
    """Projection of AQ ratings on the eventful-uneventful axis, in [-1, 1]."""
    pl, ev, ch, vi, ue, ca, an, mo = _aq_columns(r)
    return (_S2 * ev - _S2 * ue - ca + ch + vi - mo) / ISO_K


def iso_coordinates_torch(aq):
    """Differentiable ISOP/ISOE for a (B, 8) tensor; no range check."""
    pl, ev, ch, vi, ue, ca, an, mo = aq.unbind(-1)
    isop = (_S2 * pl - _S2 * an + ca - ch + vi - mo) / ISO_K
    isoe = (_S2 * ev - _S2 * ue - ca + ch + vi - mo) / ISO_K
    return isop, isoe


@dataclass
class LabelSet:
    """Targets for a batch: scene index, 15-bit events, 8 integer AQ ratings."""

    scene: torch.Tensor  # (B,) long
    events: torch.Tensor  # (B, 15) float
    aq: torch.Tensor  # (B, 8) float

    @property
    def isop(self):
        return iso_coordinates_torch(self.aq)[0]

    @property
    def isoe(self):
        return iso_coordinates_torch(self.aq)[1]


@dataclass
class LossVector:
    values: torch.Tensor  # (12,) in task order
    sigmas: torch.Tensor | None = None  # (12,)

    def named(self):
        return dict(zip(vocab.TASKS, (float(v) for v in self.values)))


def task_losses(pred, truth: LabelSet):
    """L1 scene CE, L2 mean event BCE, L3/L4 ISOP/ISOE MSE, L5..L12 per-AQ MSE."""
    b = truth.scene.shape[0]
    expected = {"scene_logits": (b, vocab.N_SCENES), "event_probs": (b, vocab.N_EVENTS), "aq": (b, vocab.N_AQ),
                "isop": (b,), "isoe": (b,)}
    for name, shape in expected.items():
        got = tuple(getattr(pred, name).shape)
        if got != shape:
            raise ShapeError(f"prediction {name} has shape {got}, expected {shape}")
    if tuple(truth.events.shape) != (b, vocab.N_EVENTS) or tuple(truth.aq.shape) != (b, vocab.N_AQ):
        raise ShapeError("label shapes do not match the batch")

    events = truth.events.to(pred.event_probs.dtype)
    aq = truth.aq.to(pred.aq.dtype)
    l_scene = F.cross_entropy(pred.scene_logits, truth.scene)
    if getattr(pred, "event_logits", None) is not None:
        l_events = F.binary_cross_entropy_with_logits(pred.event_logits, events)
    else:
        l_events = F.binary_cross_entropy(pred.event_probs, events)
    isop_t, isoe_t = iso_coordinates_torch(aq)
    l_isop = F.mse_loss(pred.isop, isop_t)
    l_isoe = F.mse_loss(pred.isoe, isoe_t)
    l_aq = ((pred.aq - aq) ** 2).mean(dim=0)
    return LossVector(torch.cat([torch.stack([l_scene, l_events, l_isop, l_isoe]), l_aq]))


def uncertainty_weighted_total(losses, log_sigma=None, sigmas=None):
    """Sum of L_i / sigma_i^2 + ln sigma_i (classification) and
    L_j / (2 sigma_j^2) + ln sigma_j (regression).

    ``losses`` is a :class:`LossVector` or a length-12 tensor.  Pass either
    ``log_sigma`` (learnable parameterisation) or ``sigmas``; a LossVector's
    own ``sigmas`` are used when neither is given, otherwise all sigma are 1.
    """
    if isinstance(losses, LossVector):
        if sigmas is None and log_sigma is None:
            sigmas = losses.sigmas
        losses = losses.values
    losses = torch.as_tensor(losses, dtype=torch.float64 if not torch.is_tensor(losses) else None)
    n = losses.shape[0]
    if sigmas is not None:
        sigmas = torch.as_tensor(sigmas, dtype=losses.dtype)
        if torch.any(~(sigmas > 0)):
            raise DomainError("every sigma must be positive")
        log_sigma = torch.log(sigmas)
    elif log_sigma is None:
        log_sigma = torch.zeros(n, dtype=losses.dtype)
    scale = torch.ones(n, dtype=losses.dtype)
    scale[N_CLASSIFICATION:] = 0.5
    return torch.sum(scale * losses * torch.exp(-2.0 * log_sigma) + log_sigma)
