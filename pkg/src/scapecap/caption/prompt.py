"""Prompt assembly from model predictions.

A template is a text asset with a ``[system]`` and a ``[user]`` section
using ``str.format`` placeholders.  Only the names in ``PLACEHOLDERS`` may
appear; anything else is rejected when the template is loaded.
"""

import hashlib
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .. import vocab
from ..errors import TemplateError

EVENT_THRESHOLD = 0.3
MAX_OUTPUT_TOKENS = 200
DEFAULT_TEMPLATE = "v1"
PLACEHOLDERS = frozenset({"scene", "events", "affect", "max_tokens"})
NO_EVENTS_TEXT = "(no salient events detected)"


@dataclass(frozen=True)
class PromptTemplate:
    version: str
    system: str
    user: str

    @classmethod
    def parse(cls, text, version):
        sections, current = {}, None
        for line in text.splitlines():
            if line.strip() in ("[system]", "[user]"):
                current = line.strip()[1:-1]
                sections[current] = []
            elif current is not None:
                sections[current].append(line)
        if set(sections) != {"system", "user"}:
            raise TemplateError("template needs exactly a [system] and a [user] section")
        tpl = cls(version, "\n".join(sections["system"]).strip(), "\n".join(sections["user"]).strip())
        tpl.check()
        return tpl

    def check(self):
        for part in (self.system, self.user):
            try:
                fields = {name for _, name, _, _ in string.Formatter().parse(part) if name is not None}
            except ValueError as exc:
                raise TemplateError(f"malformed template {self.version!r}: {exc}") from None
            unknown = fields - PLACEHOLDERS
            if unknown:
                raise TemplateError(f"template {self.version!r} uses unknown placeholders {sorted(unknown)}")


def load_template(name=DEFAULT_TEMPLATE):
    """Bundled template by version name, or a template file path."""
    path = Path(name)
    if path.suffix == ".txt" and path.exists():
        return PromptTemplate.parse(path.read_text(encoding="utf-8"), path.stem)
    try:
        text = resources.files(__package__).joinpath("templates", f"soundscape_{name}.txt").read_text(encoding="utf-8")
    except FileNotFoundError:
        raise TemplateError(f"no bundled template {name!r}") from None
    return PromptTemplate.parse(text, name)


@dataclass(frozen=True)
class PromptPackage:
    system_text: str
    user_text: str
    max_output_tokens: int = MAX_OUTPUT_TOKENS
    template_version: str = DEFAULT_TEMPLATE

    @property
    def text(self):
        return self.system_text + "\n\n" + self.user_text

    @property
    def digest(self):
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()[:16]

    def to_dict(self):
        return {"system_text": self.system_text, "user_text": self.user_text,
                "max_output_tokens": self.max_output_tokens, "template_version": self.template_version}


def threshold_events(event_probs, threshold=EVENT_THRESHOLD, names=vocab.EVENTS):
    """Events with probability strictly above ``threshold``, most likely first.

    Accepts a 15-vector or an already filtered ``(name, prob)`` list.
    Equal probabilities keep vocabulary order.
    """
    if len(event_probs) and isinstance(event_probs[0], tuple):
        pairs = list(event_probs)
    else:
        pairs = list(zip(names, (float(p) for p in event_probs)))
    order = {n: i for i, n in enumerate(names)}
    kept = [(n, p) for n, p in pairs if p > threshold]
    return sorted(kept, key=lambda np_: (-np_[1], order.get(np_[0], len(order))))


def rank_affect(aq_pred, names=vocab.AQ_NAMES):
    """(name, value) pairs by descending value; ties keep the fixed AQ order."""
    values = [float(v) for v in aq_pred]
    if len(values) != len(names):
        raise ValueError(f"expected {len(names)} affective-quality values")
    idx = sorted(range(len(values)), key=lambda i: (-values[i], i))
    return [(names[i], values[i]) for i in idx]


def render_events(events):
    if not events:
        return NO_EVENTS_TEXT
    return "\n".join(f"- {name}: {p:.2f}" for name, p in events)


def render_affect(aq_ranked):
    return "\n".join(f"- {name}: {v:.1f}" for name, v in aq_ranked)


def build_prompt(scene_name, events, aq_ranked, template=None, max_output_tokens=MAX_OUTPUT_TOKENS):
    template = load_template() if template is None else template
    template.check()
    values = {"scene": scene_name, "events": render_events(events), "affect": render_affect(aq_ranked),
              "max_tokens": max_output_tokens}
    try:
        system = template.system.format(**values)
        user = template.user.format(**values)
    except (KeyError, IndexError, ValueError) as exc:
        raise TemplateError(f"cannot render template {template.version!r}: {exc}") from None
    return PromptPackage(system, user, max_output_tokens, template.version)


def prompt_from_prediction(record, template=None, threshold=EVENT_THRESHOLD, max_output_tokens=MAX_OUTPUT_TOKENS):
    """Prompt for one exported prediction record (dict with scene/event/aq fields)."""
    scene = vocab.SCENES[int(np.argmax(record["scene_probs"]))]
    return build_prompt(scene, threshold_events(record["event_probs"], threshold), rank_affect(record["aq"]),
                        template, max_output_tokens)
