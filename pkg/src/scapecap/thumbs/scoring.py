"""Caption-quality ratings: score formula, aggregation, paired comparisons."""

import csv
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyGroupError, LengthError, ParseError, RangeError
from .stats import compare_paired

FIELDS = ("P", "R", "F", "C", "I")
SOURCES = ("expert", "system")
RATING_COLUMNS = ("rater_id", "caption_id", "source", "dataset") + FIELDS


@dataclass(frozen=True)
class THumBSRating:
    rater_id: str
    caption_id: str
    source: str
    P: float
    R: float
    F: float = 0.0
    C: float = 0.0
    I: float = 0.0  # noqa: E741
    dataset: str = ""

    def validate(self):
        for name in ("P", "R"):
            if not 1.0 <= getattr(self, name) <= 5.0:
                raise RangeError(f"{name}={getattr(self, name)} outside [1, 5]")
        for name in ("F", "C", "I"):
            if not -2.0 <= getattr(self, name) <= 0.0:
                raise RangeError(f"{name}={getattr(self, name)} outside [-2, 0]")
        if self.source not in SOURCES:
            raise RangeError(f"source must be one of {SOURCES}, got {self.source!r}")


def thumbs_score(rating):
    """(P + R) / 2 + F + C + I, in [-5, 5]."""
    rating.validate()
    return (rating.P + rating.R) / 2.0 + rating.F + rating.C + rating.I


@dataclass
class GroupSummary:
    n: int
    mean: dict
    std: dict  # unbiased sample std; 0.0 when n == 1
    single: bool


def aggregate(ratings, group_by=("source", "dataset"), groups=None):
    """Mean and sample standard deviation of every field and the score per group.

    ``groups`` optionally lists the group keys that must be present.
    """
    buckets = defaultdict(list)
    for r in ratings:
        buckets[tuple(getattr(r, g) for g in group_by)].append(r)
    if not buckets:
        raise EmptyGroupError("no ratings to aggregate")
    for key in groups or ():
        if key not in buckets:
            raise EmptyGroupError(f"group {key} has no ratings")
    out = {}
    for key in sorted(buckets):
        rows = buckets[key]
        table = {f: np.array([getattr(r, f) for r in rows], dtype=np.float64) for f in FIELDS}
        table["score"] = np.array([thumbs_score(r) for r in rows])
        n = len(rows)
        out[key] = GroupSummary(
            n=n,
            mean={k: float(v.mean()) for k, v in table.items()},
            std={k: float(v.std(ddof=1)) if n > 1 else 0.0 for k, v in table.items()},
            single=n == 1,
        )
    return out


def load_ratings(path):
    """Ratings CSV with header rater_id, caption_id, source, dataset, P, R, F, C, I."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in RATING_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ParseError(f"{path}: ratings header lacks {missing}")
        for lineno, row in enumerate(reader, 2):
            try:
                rating = THumBSRating(row["rater_id"], row["caption_id"], row["source"],
                                      *(float(row[f]) for f in FIELDS), dataset=row["dataset"])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            rating.validate()
            out.append(rating)
    return out


def _value(r, field):
    return thumbs_score(r) if field == "score" else getattr(r, field)


def paired_samples(ratings, field, dataset=None, per_caption_mean=True):
    """Expert and system values paired by caption (or by rater and caption).

    With ``per_caption_mean`` each caption contributes the mean over its
    raters; otherwise every (rater, caption) pair is one observation.
    """
    sel = [r for r in ratings if dataset is None or r.dataset == dataset]
    values = defaultdict(list)
    for r in sel:
        unit = r.caption_id if per_caption_mean else (r.rater_id, r.caption_id)
        values[(r.source, unit)].append(_value(r, field))
    units = sorted({u for (s, u) in values if s == "expert"} & {u for (s, u) in values if s == "system"})
    if not units:
        raise EmptyGroupError("no caption is rated for both sources")
    expert = np.array([np.mean(values[("expert", u)]) for u in units])
    system = np.array([np.mean(values[("system", u)]) for u in units])
    return expert, system, units


def compare_sources(ratings, field, dataset=None, per_caption_mean=True, alpha=0.05):
    """Normality-gated paired test of expert against system captions."""
    if field not in FIELDS + ("score",):
        raise ValueError(f"unknown field {field!r}")
    expert, system, units = paired_samples(ratings, field, dataset, per_caption_mean)
    if len(units) < 3:
        raise LengthError("paired comparison needs at least 3 captions")
    result = compare_paired(expert, system, alpha)
    result.notes.update({"field": field, "dataset": dataset, "per_caption_mean": per_caption_mean,
                         "mean_expert": float(expert.mean()), "mean_system": float(system.mean())})
    return result
