"""Run configuration: one frozen value governing every tunable.

Defaults reproduce the documented module-level defaults exactly. beta and
lambda_ecpo have no blessed defaults on purpose; operations that need them
fail with MISSING_BETA / MISSING_LAMBDA until the caller sets them.

Referenced files (lexicon, hazard rules, label vocabulary) must exist when
the config is built; relative paths in a config file resolve against the
file's directory. Loaded assets are cached per path.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from functools import lru_cache
from pathlib import Path

from .errors import ConfigError
from .policy import DEFAULT_J_MAX, PenaltyTable

DEFAULT_WEIGHTS = (0.5, 0.3, 0.2)

_WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class RunConfig:
    ecpo_weights: tuple[float, float, float] = DEFAULT_WEIGHTS
    penalty_table: PenaltyTable = field(default_factory=PenaltyTable)
    lexicon_path: str | None = None
    hazard_rules_path: str | None = None
    label_vocab_path: str | None = None
    match_threshold: float = 0.5
    epsilon: float = 1e-9
    j_max: int = DEFAULT_J_MAX
    beta: float | None = None
    lambda_ecpo: float | None = None
    psi_floor: float = 0.05
    psi_ceiling: float = 1.0
    gap_min: float = 0.0
    top_k: int = 5
    token_budget: int = 200
    seeds: tuple[int, ...] = (0,)
    block_size: int = 1
    prng: str = "splitmix64"

    def __post_init__(self):
        weights = tuple(float(w) for w in self.ecpo_weights)
        if len(weights) != 3 or any(w < 0 for w in weights):
            raise ConfigError("BAD_WEIGHTS", f"need three non-negative weights, got {self.ecpo_weights!r}")
        if abs(sum(weights) - 1.0) > _WEIGHT_TOLERANCE:
            raise ConfigError("BAD_WEIGHTS", f"weights {weights} do not sum to 1")
        object.__setattr__(self, "ecpo_weights", weights)
        if not 0.0 < self.match_threshold <= 1.0:
            raise ConfigError("BAD_THRESHOLD", f"match_threshold must be in (0, 1], got {self.match_threshold}")
        if self.epsilon <= 0:
            raise ConfigError("BAD_EPSILON", f"epsilon must be > 0, got {self.epsilon}")
        if self.j_max < 1:
            raise ConfigError("BAD_J_MAX", f"j_max must be >= 1, got {self.j_max}")
        if self.beta is not None and self.beta <= 0:
            raise ConfigError("BAD_BETA", f"beta must be > 0, got {self.beta}")
        if self.lambda_ecpo is not None and self.lambda_ecpo < 0:
            raise ConfigError("BAD_LAMBDA", f"lambda_ecpo must be >= 0, got {self.lambda_ecpo}")
        if not 0 <= self.psi_floor <= self.psi_ceiling:
            raise ConfigError("BAD_PSI", f"need 0 <= floor <= ceiling, got ({self.psi_floor}, {self.psi_ceiling})")
        if self.gap_min < 0:
            raise ConfigError("BAD_GAP_MIN", f"gap_min must be >= 0, got {self.gap_min}")
        if self.top_k < 1:
            raise ConfigError("BAD_TOP_K", f"top_k must be >= 1, got {self.top_k}")
        if self.token_budget < 1:
            raise ConfigError("BAD_BUDGET", f"token_budget must be >= 1, got {self.token_budget}")
        if not self.seeds:
            raise ConfigError("BAD_SEEDS", "seeds must be a non-empty integer list")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.block_size < 1:
            raise ConfigError("BAD_BLOCK_SIZE", f"block_size must be >= 1, got {self.block_size}")
        if self.prng != "splitmix64":
            raise ConfigError("BAD_PRNG", f"the only declared PRNG is splitmix64, got {self.prng!r}")
        for name in ("lexicon_path", "hazard_rules_path", "label_vocab_path"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise ConfigError("MISSING_PATH", f"{name} {path!r} does not exist")

    def lexicon(self):
        from .policy import DEFAULT_LEXICON

        if self.lexicon_path is None:
            return DEFAULT_LEXICON
        return _lexicon_cached(self.lexicon_path)

    def hazard_rules(self):
        from .validator import DEFAULT_HAZARD_RULES

        if self.hazard_rules_path is None:
            return DEFAULT_HAZARD_RULES
        return _rules_cached(self.hazard_rules_path)

    def label_vocab(self):
        from .context import DEFAULT_LABEL_VOCAB

        if self.label_vocab_path is None:
            return DEFAULT_LABEL_VOCAB
        return _vocab_cached(self.label_vocab_path)

    def training(self):
        from .preference import PsiConfig, TrainingConfig

        if self.beta is None:
            raise ConfigError("MISSING_BETA", "beta is mandatory for loss computation; no default exists")
        if self.lambda_ecpo is None:
            raise ConfigError("MISSING_LAMBDA", "lambda_ecpo is mandatory here; no default exists")
        return TrainingConfig(
            beta=self.beta,
            lambda_ecpo=self.lambda_ecpo,
            psi=PsiConfig(self.psi_floor, self.psi_ceiling),
            gap_min=self.gap_min,
        )

    def echo(self) -> dict:
        """Resolved configuration embedded in every report."""
        return {
            "ecpo_weights": list(self.ecpo_weights),
            "penalty_table": dataclasses.asdict(self.penalty_table),
            "lexicon_path": self.lexicon_path,
            "hazard_rules_path": self.hazard_rules_path,
            "label_vocab_path": self.label_vocab_path,
            "match_threshold": self.match_threshold,
            "epsilon": self.epsilon,
            "j_max": self.j_max,
            "beta": self.beta,
            "lambda_ecpo": self.lambda_ecpo,
            "psi_floor": self.psi_floor,
            "psi_ceiling": self.psi_ceiling,
            "gap_min": self.gap_min,
            "top_k": self.top_k,
            "token_budget": self.token_budget,
            "seeds": list(self.seeds),
            "block_size": self.block_size,
            "prng": self.prng,
        }


@lru_cache(maxsize=None)
def _lexicon_cached(path: str):
    from .policy import load_lexicon

    return load_lexicon(path)


@lru_cache(maxsize=None)
def _rules_cached(path: str):
    from .validator import load_hazard_rules

    return load_hazard_rules(path)


@lru_cache(maxsize=None)
def _vocab_cached(path: str):
    from .context import load_label_vocab

    return load_label_vocab(path)


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def load_config(path: str | Path) -> RunConfig:
    """Read a JSON config file; unknown keys are errors, relative paths resolve
    against the file's directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError("BAD_CONFIG", f"cannot read config {path}: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("BAD_CONFIG", "config file must hold a JSON object")
    unknown = set(raw) - _FIELD_NAMES
    if unknown:
        raise ConfigError("UNKNOWN_CONFIG_KEY", f"unknown config keys: {sorted(unknown)}")
    values: dict = dict(raw)
    if "penalty_table" in values:
        table = values["penalty_table"]
        if not isinstance(table, dict):
            raise ConfigError("BAD_CONFIG", "penalty_table must be an object")
        known = set(PenaltyTable.__dataclass_fields__)
        bad = set(table) - known
        if bad:
            raise ConfigError("UNKNOWN_CONFIG_KEY", f"unknown penalty_table keys: {sorted(bad)}")
        values["penalty_table"] = PenaltyTable(**table)
    if "ecpo_weights" in values:
        values["ecpo_weights"] = tuple(values["ecpo_weights"])
    if "seeds" in values:
        values["seeds"] = tuple(values["seeds"])
    for name in ("lexicon_path", "hazard_rules_path", "label_vocab_path"):
        value = values.get(name)
        if isinstance(value, str) and not Path(value).is_absolute():
            values[name] = str((path.parent / value).resolve())
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError("BAD_CONFIG", f"malformed config: {exc}")
