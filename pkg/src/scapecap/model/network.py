"""Multiscale dilated-convolution branches, gated graph fusion and task heads.

Layout of one forward pass::

    mel (B, T, 64)   -> 4 mel branches, time kernels 3/5/7/9      -> 4 x 64
    loud (B, T', 1)  -> 4 loudness branches, kernels (k, 1)        -> 4 x 64
    8 node embeddings -> one GatedGCN layer on the complete graph  -> 8 x 64
    + pre-fusion embeddings, flatten (512) -> common embedding
    -> 12 separate heads (scene, events, ISOP, ISOE, 8 affective qualities)

Time convolutions use no padding, so a branch needs at least its receptive
field in input frames and produces exactly one frame at that length.  The
frequency axis is zero-padded to keep its size through each convolution.
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .. import vocab
from ..errors import InputTooShortError, ShapeError
from .receptive_field import branch_layer_plan, receptive_field

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class BranchConfig:
    feature: str  # "mel" or "loudness"
    kernel: int
    n_bins: int = 64
    filters: tuple = (16, 32, 64)
    dilations: tuple = (1, 2, 3)
    embed_dim: int = 64

    @property
    def kernel_2d(self):
        return (self.kernel, self.kernel if self.feature == "mel" else 1)

    @property
    def pool_2d(self):
        return (2, 2) if self.feature == "mel" else (2, 1)

    @property
    def receptive_field(self):
        return receptive_field(self.kernel, branch_layer_plan(self.dilations))


@dataclass(frozen=True)
class ModelConfig:
    kernels: tuple = (3, 5, 7, 9)
    filters: tuple = (16, 32, 64)
    dilations: tuple = (1, 2, 3)
    n_mels: int = 64
    embed_dim: int = 64
    edge_dim: int = 64
    common_dim: int = 768
    head_hidden: int = 64

    def branches(self):
        out = []
        for feature, n_bins in (("mel", self.n_mels), ("loudness", 1)):
            for k in self.kernels:
                out.append(BranchConfig(feature, k, n_bins, tuple(self.filters), tuple(self.dilations), self.embed_dim))
        return out

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})

    def hash(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def tiny_config():
    """Two filters per block: small enough for finite-difference checks."""
    return ModelConfig(filters=(2, 2, 2), n_mels=16, embed_dim=4, edge_dim=4, common_dim=8, head_hidden=4)


@dataclass
class PredictionBundle:
    scene_logits: torch.Tensor  # (B, 3)
    scene_probs: torch.Tensor  # (B, 3)
    event_logits: torch.Tensor  # (B, 15)
    event_probs: torch.Tensor  # (B, 15)
    isop: torch.Tensor  # (B,)
    isoe: torch.Tensor  # (B,)
    aq: torch.Tensor  # (B, 8)

    def detach(self):
        return PredictionBundle(*(t.detach() for t in self.as_tuple()))

    def as_tuple(self):
        return (self.scene_logits, self.scene_probs, self.event_logits, self.event_probs, self.isop, self.isoe, self.aq)

    def records(self, clip_ids):
        """One plain dict per clip, ready for line-delimited export."""
        out = []
        for i, cid in enumerate(clip_ids):
            out.append({
                "clip_id": cid,
                "scene_probs": self.scene_probs[i].tolist(),
                "event_probs": self.event_probs[i].tolist(),
                "isop": float(self.isop[i]),
                "isoe": float(self.isoe[i]),
                "aq": self.aq[i].tolist(),
            })
        return out


class ConvBlock(nn.Module):
    def __init__(self, c_in, c_out, kernel, dilation, pool):
        super().__init__()
        pad_f = (kernel[1] - 1) // 2
        self.conv1 = nn.Conv2d(c_in, c_out, kernel, dilation=(dilation, 1), padding=(0, pad_f), bias=False)
        self.bn1 = nn.BatchNorm2d(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, kernel, dilation=(dilation, 1), padding=(0, pad_f), bias=False)
        self.bn2 = nn.BatchNorm2d(c_out)
        self.pool = pool

    def forward(self, x):
        x = F.relu(self.bn1(self.conv1(x)))
        x = F.relu(self.bn2(self.conv2(x)))
        return F.avg_pool2d(x, self.pool)


class Branch(nn.Module):
    """One feature/kernel-size branch: (B, T, bins) -> (B, embed_dim)."""

    def __init__(self, cfg: BranchConfig):
        super().__init__()
        self.cfg = cfg
        self.min_frames = cfg.receptive_field
        self.bn0 = nn.BatchNorm2d(1)
        chans = (1,) + tuple(cfg.filters)
        self.blocks = nn.ModuleList(
            ConvBlock(chans[i], chans[i + 1], cfg.kernel_2d, cfg.dilations[i], cfg.pool_2d)
            for i in range(len(cfg.filters))
        )
        out_bins = cfg.n_bins // cfg.pool_2d[1] ** len(cfg.filters)
        self.project = nn.Linear(cfg.filters[-1] * out_bins, cfg.embed_dim)

    def forward(self, x):
        if x.dim() != 3 or x.shape[2] != self.cfg.n_bins:
            raise ShapeError(f"{self.cfg.feature} input must be (batch, frames, {self.cfg.n_bins}), got {tuple(x.shape)}")
        if x.shape[1] < self.min_frames:
            raise InputTooShortError(x.shape[1], self.min_frames)
        x = self.bn0(x.unsqueeze(1))
        for block in self.blocks:
            x = block(x)
        x = x.mean(dim=2)  # global average over time -> (B, C, bins)
        return F.relu(self.project(x.flatten(1)))


class GatedGCNLayer(nn.Module):
    """Gated graph convolution on a complete graph (self-loops included).

    With node features h and edge features e::

        e_hat_ij = C e_ij + D h_i + E h_j
        eta_ij   = sigmoid(e_hat_ij) / (sum_j sigmoid(e_hat_ij) + eps)
        h_i'     = h_i  + ReLU(BN(A h_i + sum_j eta_ij * B h_j))
        e_ij'    = e_ij + ReLU(BN(e_hat_ij))
    """

    def __init__(self, dim, edge_dim=None, eps=1e-6):
        super().__init__()
        edge_dim = dim if edge_dim is None else edge_dim
        if edge_dim != dim:
            raise ValueError("gated message passing needs edge_dim == node dim")
        self.A = nn.Linear(dim, dim)
        self.B = nn.Linear(dim, dim)
        self.C = nn.Linear(edge_dim, dim)
        self.D = nn.Linear(dim, dim)
        self.E = nn.Linear(dim, dim)
        self.bn_h = nn.BatchNorm1d(dim)
        self.bn_e = nn.BatchNorm1d(dim)
        self.eps = eps

    def forward(self, h, e):
        """``h``: (B, n, d); ``e``: (B, n, n, d) with ``e[:, i, j]`` the edge i-j."""
        b, n, d = h.shape
        e_hat = self.C(e) + self.D(h)[:, :, None, :] + self.E(h)[:, None, :, :]
        gate = torch.sigmoid(e_hat)
        messages = (gate * self.B(h)[:, None, :, :]).sum(dim=2) / (gate.sum(dim=2) + self.eps)
        h_new = self.A(h) + messages
        h_new = F.relu(self.bn_h(h_new.reshape(b * n, d)).reshape(b, n, d))
        e_new = F.relu(self.bn_e(e_hat.reshape(b * n * n, d)).reshape(b, n, n, d))
        return h + h_new, e + e_new


class SoundAQNet(nn.Module):
    def __init__(self, config: ModelConfig = ModelConfig()):
        super().__init__()
        self.config = config
        self.branch_configs = config.branches()
        self.branches = nn.ModuleList(Branch(bc) for bc in self.branch_configs)
        d = config.embed_dim
        self.edge_init = nn.Linear(2 * d, config.edge_dim)
        self.gcn = GatedGCNLayer(d, config.edge_dim)
        n_nodes = len(self.branch_configs)
        self.common = nn.Sequential(nn.Linear(n_nodes * d, config.common_dim), nn.ReLU())
        outs = {"scene": vocab.N_SCENES, "events": vocab.N_EVENTS, "isop": 1, "isoe": 1}
        outs.update({name: 1 for name in vocab.AQ_NAMES})
        self.heads = nn.ModuleDict({
            name.replace(" ", "_"): nn.Sequential(
                nn.Linear(config.common_dim, config.head_hidden), nn.ReLU(), nn.Linear(config.head_hidden, n_out)
            )
            for name, n_out in outs.items()
        })
        # s_i = ln(sigma_i) per task; sigma = 1 at init.
        self.log_sigma = nn.Parameter(torch.zeros(len(vocab.TASKS)))

    @property
    def min_frames(self):
        mel = max(b.min_frames for b in self.branches if b.cfg.feature == "mel")
        loud = max(b.min_frames for b in self.branches if b.cfg.feature == "loudness")
        return mel, loud

    def embed(self, mel, loudness):
        """Per-branch embeddings stacked as graph nodes: (B, 8, d)."""
        nodes = [br(mel if br.cfg.feature == "mel" else loudness) for br in self.branches]
        return torch.stack(nodes, dim=1)

    def initial_edges(self, h):
        n = h.shape[1]
        pairs = torch.cat([h[:, :, None, :].expand(-1, -1, n, -1), h[:, None, :, :].expand(-1, n, -1, -1)], dim=-1)
        return self.edge_init(pairs)

    def forward(self, mel, loudness):
        if mel.shape[0] != loudness.shape[0]:
            raise ShapeError(f"batch sizes differ: mel {mel.shape[0]}, loudness {loudness.shape[0]}")
        h0 = self.embed(mel, loudness)
        h, _ = self.gcn(h0, self.initial_edges(h0))
        z = self.common((h + h0).flatten(1))
        scene_logits = self.heads["scene"](z)
        event_logits = self.heads["events"](z)
        aq = torch.cat([self.heads[name](z) for name in vocab.AQ_NAMES], dim=1)
        return PredictionBundle(
            scene_logits=scene_logits,
            scene_probs=torch.softmax(scene_logits, dim=1),
            event_logits=event_logits,
            event_probs=torch.sigmoid(event_logits),
            isop=self.heads["isop"](z).squeeze(1),
            isoe=self.heads["isoe"](z).squeeze(1),
            aq=aq,
        )


def forward(mel, loudness, model: SoundAQNet, mode="eval"):
    """Run ``model`` in the requested mode; eval runs without autograd."""
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    model.train(mode == "train")
    if mode == "eval":
        with torch.no_grad():
            return model(mel, loudness)
    return model(mel, loudness)


def init_params(seed, config: ModelConfig = ModelConfig(), dtype=torch.float32):
    """Build a model with reproducible weights.

    Convolutions and linear layers use Kaiming-uniform initialisation (the
    framework default), batch-norm starts at identity and every
    ``log_sigma`` at 0.
    """
    gen_state = torch.random.get_rng_state()
    torch.manual_seed(seed)
    try:
        model = SoundAQNet(config).to(dtype)
    finally:
        torch.random.set_rng_state(gen_state)
    return model


def count_params(model):
    return sum(p.numel() for p in model.parameters())


def save_checkpoint(model: SoundAQNet, path, extra=None):
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "model_config": model.config.to_dict(),
        "config_hash": model.config.hash(),
        "state_dict": model.state_dict(),
        "extra": extra or {},
    }
    torch.save(payload, path)


def load_checkpoint(path):
    """Return ``(model, extra)``; the model is in eval mode."""
    from ..errors import CacheVersionError

    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise CacheVersionError(f"{path}: checkpoint format {payload.get('format_version')} is not supported")
    config = ModelConfig.from_dict(payload["model_config"])
    model = SoundAQNet(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload["extra"]
