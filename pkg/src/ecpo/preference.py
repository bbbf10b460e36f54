"""Preference pairs over scored candidate sets and the weighted pairwise loss.

The pair for a prompt is (argmax aggregate score, argmin aggregate score)
with ties broken by candidate_id ascending; sets whose score gap does not
exceed gap_min yield no pair, since a zero-gap pair carries no training
signal. The gap maps to a clipped-linear weight, and the loss value is
-w * log(sigmoid(beta * (f_plus - f_minus))) computed through a stable
softplus so magnitudes up to |beta * diff| = 1e4 neither overflow nor lose
the asymptote. Loss values only: gradients belong to the external trainer.

beta and lambda_ecpo are deliberately mandatory wherever they are used;
there is no defensible default for either.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import ConfigError, InputError
from .validator import EcpoReport


@dataclass(frozen=True)
class Candidate:
    candidate_id: str
    document: str
    report: EcpoReport
    log_score: float | None = None


@dataclass(frozen=True)
class CandidateSet:
    prompt_id: str
    candidates: tuple[Candidate, ...]

    def __post_init__(self):
        if not self.candidates:
            raise InputError("EMPTY_SET", f"prompt {self.prompt_id!r} has no candidates")
        ids = [c.candidate_id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise InputError("DUPLICATE_ID", f"prompt {self.prompt_id!r} repeats a candidate_id")


@dataclass(frozen=True)
class PreferencePair:
    prompt_id: str
    plus_id: str
    minus_id: str
    gap: float
    weight: float

    def __post_init__(self):
        if self.gap <= 0:
            raise InputError("BAD_PAIR", f"gap must be > 0, got {self.gap}")
        if self.plus_id == self.minus_id:
            raise InputError("BAD_PAIR", "plus and minus must be distinct candidates")


@dataclass(frozen=True)
class PsiConfig:
    """Clipped-linear gap-to-weight mapping: identity between floor and ceiling."""

    floor: float = 0.05
    ceiling: float = 1.0

    def __post_init__(self):
        if not 0 <= self.floor <= self.ceiling:
            raise ConfigError("BAD_PSI", f"need 0 <= floor <= ceiling, got ({self.floor}, {self.ceiling})")


@dataclass(frozen=True)
class TrainingConfig:
    beta: float
    lambda_ecpo: float
    psi: PsiConfig = field(default_factory=PsiConfig)
    gap_min: float = 0.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ConfigError("BAD_BETA", f"beta must be > 0, got {self.beta}")
        if self.lambda_ecpo < 0:
            raise ConfigError("BAD_LAMBDA", f"lambda_ecpo must be >= 0, got {self.lambda_ecpo}")
        if self.gap_min < 0:
            raise ConfigError("BAD_GAP_MIN", f"gap_min must be >= 0, got {self.gap_min}")


def weight(gap: float, psi: PsiConfig | None = None) -> float:
    cfg = psi or PsiConfig()
    return min(cfg.ceiling, max(cfg.floor, gap))


def select_pair(
    candidate_set: CandidateSet, psi: PsiConfig | None = None, gap_min: float = 0.0
) -> PreferencePair | None:
    """Extremes of the set by aggregate score; None when the gap is too small."""
    candidates = candidate_set.candidates
    plus = min(candidates, key=lambda c: (-c.report.ecpo, c.candidate_id))
    minus = min(candidates, key=lambda c: (c.report.ecpo, c.candidate_id))
    gap = plus.report.ecpo - minus.report.ecpo
    if gap <= gap_min:
        return None
    return PreferencePair(
        prompt_id=candidate_set.prompt_id,
        plus_id=plus.candidate_id,
        minus_id=minus.candidate_id,
        gap=gap,
        weight=weight(gap, psi),
    )


def pairwise_loss(f_plus: float, f_minus: float, beta: float, w: float = 1.0) -> float:
    """-w * log(sigmoid(beta * (f_plus - f_minus))), numerically stable."""
    if beta <= 0:
        raise ConfigError("BAD_BETA", f"beta must be > 0, got {beta}")
    if w < 0:
        raise ConfigError("BAD_WEIGHT", f"w must be >= 0, got {w}")
    x = beta * (f_plus - f_minus)
    if x >= 0:
        softplus = math.log1p(math.exp(-x))
    else:
        softplus = -x + math.log1p(math.exp(x))
    return w * softplus


def combined_objective(l_sft: float, l_ecpo: float, lambda_ecpo: float) -> float:
    if lambda_ecpo < 0:
        raise ConfigError("BAD_LAMBDA", f"lambda_ecpo must be >= 0, got {lambda_ecpo}")
    return l_sft + lambda_ecpo * l_ecpo


def export_preference_dataset(
    pairs: Iterable[PreferencePair],
    candidate_sets: Mapping[str, CandidateSet],
    prompts: Mapping[str, object] | None = None,
) -> list[dict]:
    """One chosen/rejected record per pair, ordered by prompt_id."""
    records = []
    for pair in sorted(pairs, key=lambda p: (p.prompt_id, p.plus_id)):
        candidate_set = candidate_sets.get(pair.prompt_id)
        if candidate_set is None:
            raise InputError("DANGLING_ID", f"no candidate set for prompt {pair.prompt_id!r}")
        by_id = {c.candidate_id: c for c in candidate_set.candidates}
        plus = by_id.get(pair.plus_id)
        minus = by_id.get(pair.minus_id)
        if plus is None or minus is None:
            missing = pair.plus_id if plus is None else pair.minus_id
            raise InputError("DANGLING_ID", f"prompt {pair.prompt_id!r} has no candidate {missing!r}")
        records.append(
            {
                "prompt_id": pair.prompt_id,
                "prompt": prompts.get(pair.prompt_id) if prompts else None,
                "chosen": plus.document,
                "rejected": minus.document,
                "gap": pair.gap,
                "weight": pair.weight,
            }
        )
    return records
