"""Shared setup for tests that exercise the network and training loop."""

import numpy as np
import torch

from scapecap.model.network import init_params, tiny_config
from scapecap.objectives import LabelSet, task_losses, uncertainty_weighted_total
from scapecap.train import ClipTensors


def random_labels(batch, generator):
    return LabelSet(
        scene=torch.randint(0, 3, (batch,), generator=generator),
        events=(torch.rand(batch, 15, generator=generator) > 0.5).double(),
        aq=torch.randint(1, 6, (batch, 8), generator=generator).double(),
    )


def tiny_loss_problem(seed=0, batch=4, frames=290):
    """Tiny float64 model, a random batch and a closure for its total loss."""
    gen = torch.Generator().manual_seed(seed)
    model = init_params(seed, tiny_config(), torch.float64)
    model.train()
    with torch.no_grad():
        model.log_sigma.copy_(torch.rand(12, generator=gen, dtype=torch.float64) * 0.6 - 0.3)
    mel = torch.randn(batch, frames, 16, generator=gen, dtype=torch.float64)
    loud = torch.rand(batch, frames, 1, generator=gen, dtype=torch.float64) * 5
    labels = random_labels(batch, gen)

    def loss():
        return uncertainty_weighted_total(task_losses(model(mel, loud), labels), model.log_sigma)

    return model, loss


def separable_scene_data(n_per_scene, frames=300, n_mels=64, seed=0):
    """Clips whose scene is encoded by which third of the mel axis is loud.

    Loudness carries a per-scene constant level, so a linear read-out of
    either feature separates the three scenes.
    """
    rng = np.random.default_rng(seed)
    mel, loud, scenes = [], [], []
    for scene in range(3):
        for _ in range(n_per_scene):
            m = rng.normal(-60.0, 3.0, size=(frames, n_mels))
            band = slice(scene * n_mels // 3, (scene + 1) * n_mels // 3)
            m[:, band] += 30.0
            mel.append(torch.tensor(m, dtype=torch.float32))
            lo = rng.normal(2.0 + 4.0 * scene, 0.3, size=(frames * 5, 1)).clip(0)
            loud.append(torch.tensor(lo, dtype=torch.float32))
            scenes.append(scene)
    n = len(scenes)
    labels = LabelSet(
        scene=torch.tensor(scenes),
        events=torch.zeros(n, 15),
        aq=torch.full((n, 8), 3.0),
    )
    return ClipTensors([f"s{i}" for i in range(n)], mel, loud, labels)


# One line per acceptance criterion, printed by the terminal-summary hook in conftest.
ACCEPTANCE_LINES = []


class criterion:
    """Record PASS/FAIL for one acceptance criterion around a block of asserts."""

    def __init__(self, number, title):
        self.number, self.title = number, title

    def __enter__(self):
        import time

        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        import time

        elapsed = time.perf_counter() - self._t0
        if exc_type is None:
            line = f"PASS  criterion {self.number:>2}: {self.title} ({elapsed:.1f} s)"
        else:
            detail = " ".join(str(exc).split())[:160]
            line = f"FAIL  criterion {self.number:>2}: {self.title} ({elapsed:.1f} s) :: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return False
