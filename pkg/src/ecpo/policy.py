"""Policy documents: parsing, canonical serialization, structural scoring.

A policy document is a JSON object with three top-level fields: ``objectives``
(free text), ``constraints`` (a four-layer ledger), and ``actions`` (an
ordered, bounded list of typed actions). Parsing is total: every input yields
a ParseOutcome, never an exception. Hard defects make the outcome Invalid;
soft defects ride along on Valid outcomes and feed structural_score.

Low-level vehicle control language (throttle, brake, steering, numeric speed
commands) is detected separately and never flips schema validity; callers
that want a hard gate check the match list themselves.
"""

from __future__ import annotations

import enum
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError

Scalar = str | int | float

DEFAULT_J_MAX = 5

CONSTRAINT_LAYERS = (
    "legal_regulations",
    "vehicle_limits",
    "driver_preferences",
    "contextual_evidence",
)

EVIDENCE_FIELDS = ("in_cabin_text", "out_of_vehicle_text", "objects", "labels")

# Defect codes that make a document Invalid; everything else is soft.
HARD_DEFECT_CODES = frozenset(
    {"UNPARSEABLE", "MISSING_ACTIONS", "NO_ACTIONS", "TOO_MANY_ACTIONS", "BAD_ACTION_TYPE"}
)


class ActionType(enum.Enum):
    DRIVING_SUGGESTION = "DrivingSuggestion"
    HMI_PROMPT = "HmiPrompt"
    HVAC = "Hvac"
    AMBIENT_LIGHT = "AmbientLight"


_ALNUM_ONLY = re.compile(r"[^0-9a-z]+")

# Surface spellings vary in source documents ("Driving suggest", "HMI prompt",
# "HVAC"); keys here are casefolded with punctuation and whitespace stripped.
_ACTION_TYPE_ALIASES = {
    "drivingsuggestion": ActionType.DRIVING_SUGGESTION,
    "drivingsuggest": ActionType.DRIVING_SUGGESTION,
    "hmiprompt": ActionType.HMI_PROMPT,
    "hvac": ActionType.HVAC,
    "ambientlight": ActionType.AMBIENT_LIGHT,
}

_LAYER_ALIASES = {
    "legal_regulations": "legal_regulations",
    "legal": "legal_regulations",
    "vehicle_limits": "vehicle_limits",
    "vehicle": "vehicle_limits",
    "driver_preferences": "driver_preferences",
    "driver": "driver_preferences",
    "contextual_evidence": "contextual_evidence",
    "contextual": "contextual_evidence",
}


def parse_action_type(text: str) -> ActionType | None:
    """Map a surface spelling to its canonical variant, or None."""
    return _ACTION_TYPE_ALIASES.get(_ALNUM_ONLY.sub("", text.casefold()))


def _norm_key(key: str) -> str:
    """Normalize a document key: casefold, non-alphanumeric runs become '_'."""
    return _ALNUM_ONLY.sub("_", key.casefold()).strip("_")


@dataclass(frozen=True)
class Evidence:
    in_cabin_text: tuple[str, ...] = ()
    out_of_vehicle_text: tuple[str, ...] = ()
    objects: tuple[str, ...] = ()
    labels: tuple[str, ...] = ()

    def is_empty(self) -> bool:
        return not (self.in_cabin_text or self.out_of_vehicle_text or self.objects or self.labels)

    def all_entries(self) -> tuple[str, ...]:
        return self.in_cabin_text + self.out_of_vehicle_text + self.objects + self.labels


@dataclass(frozen=True)
class Action:
    action_type: ActionType
    parameters: dict[str, Scalar] = field(default_factory=dict)
    rationale: str = ""
    evidence: Evidence = field(default_factory=Evidence)


@dataclass(frozen=True)
class ConstraintLedger:
    legal_regulations: str | None = None
    vehicle_limits: str | None = None
    driver_preferences: str | None = None
    contextual_evidence: str | None = None

    def layer(self, name: str) -> str | None:
        if name not in CONSTRAINT_LAYERS:
            raise KeyError(name)
        return getattr(self, name)

    def populated(self) -> dict[str, str]:
        out = {}
        for name in CONSTRAINT_LAYERS:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


@dataclass(frozen=True)
class PolicyAction:
    objectives: str
    constraints: ConstraintLedger
    actions: tuple[Action, ...]


@dataclass(frozen=True)
class StructuralDefect:
    code: str
    path: str
    message: str


@dataclass(frozen=True)
class ParseOutcome:
    policy: PolicyAction | None
    defects: tuple[StructuralDefect, ...]

    @property
    def valid(self) -> bool:
        return self.policy is not None

    def defect_codes(self) -> list[str]:
        return [d.code for d in self.defects]


@dataclass(frozen=True)
class LowLevelMatch:
    action_index: int
    matched_pattern: str
    matched_text: str


def parse_policy(document: str | bytes, j_max: int = DEFAULT_J_MAX) -> ParseOutcome:
    """Parse a raw policy document. Total: all failures land in the outcome."""
    defects: list[StructuralDefect] = []

    def defect(code: str, path: str, message: str) -> None:
        defects.append(StructuralDefect(code, path, message))

    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError:
            defect("UNPARSEABLE", "$", "document is not UTF-8 text")
            return ParseOutcome(None, tuple(defects))
    try:
        top = json.loads(document)
    except (ValueError, RecursionError):
        defect("UNPARSEABLE", "$", "document is not well-formed JSON")
        return ParseOutcome(None, tuple(defects))
    if not isinstance(top, dict):
        defect("UNPARSEABLE", "$", "top-level value is not an object")
        return ParseOutcome(None, tuple(defects))

    doc: dict[str, object] = {}
    for key, value in top.items():
        doc.setdefault(_norm_key(key), value)

    objectives = _parse_objectives(doc.get("objectives"), defect)
    ledger = _parse_constraints(doc.get("constraints"), defect)

    raw_actions = doc.get("actions")
    if not isinstance(raw_actions, list):
        kind = "missing" if raw_actions is None else "not an array"
        defect("MISSING_ACTIONS", "$.actions", f"actions array is {kind}")
        return ParseOutcome(None, tuple(defects))
    if not raw_actions:
        defect("NO_ACTIONS", "$.actions", "policy contains no actions")
    elif len(raw_actions) > j_max:
        defect("TOO_MANY_ACTIONS", "$.actions", f"{len(raw_actions)} actions exceed the limit {j_max}")

    actions = []
    for index, entry in enumerate(raw_actions):
        action = _parse_action(entry, f"$.actions[{index}]", defect)
        if action is not None:
            actions.append(action)

    if any(d.code in HARD_DEFECT_CODES for d in defects):
        return ParseOutcome(None, tuple(defects))
    return ParseOutcome(PolicyAction(objectives, ledger, tuple(actions)), tuple(defects))


def _parse_objectives(raw: object, defect) -> str:
    if isinstance(raw, str):
        objectives = raw.strip()
        if not objectives:
            defect("MISSING_OBJECTIVES", "$.objectives", "objectives is empty")
        return objectives
    if isinstance(raw, list) and raw and all(isinstance(item, str) for item in raw):
        defect("OBJECTIVES_COERCED", "$.objectives", "objectives list joined into one string")
        objectives = " ".join(item.strip() for item in raw if item.strip())
        if not objectives:
            defect("MISSING_OBJECTIVES", "$.objectives", "objectives list holds no text")
        return objectives
    reason = "missing" if raw is None else "not text"
    defect("MISSING_OBJECTIVES", "$.objectives", f"objectives is {reason}")
    return ""


def _parse_constraints(raw: object, defect) -> ConstraintLedger:
    entries: list[tuple[str, object]] = []
    if isinstance(raw, dict):
        entries = list(raw.items())
    elif isinstance(raw, list):
        for position, item in enumerate(raw):
            if isinstance(item, dict):
                entries.extend(item.items())
            else:
                defect(
                    "BAD_CONSTRAINT_VALUE",
                    f"$.constraints[{position}]",
                    "constraint entry is not an object",
                )
    elif raw is not None:
        defect("BAD_CONSTRAINT_VALUE", "$.constraints", "constraints is not an object or list")

    values: dict[str, str] = {}
    for key, value in entries:
        layer = _LAYER_ALIASES.get(_norm_key(key))
        path = f"$.constraints.{key}"
        if layer is None:
            defect("UNKNOWN_CONSTRAINT_KEY", path, f"unknown constraint layer {key!r}")
        elif layer in values:
            defect("DUPLICATE_CONSTRAINT_LAYER", path, f"layer {layer} already set; extra entry ignored")
        elif not isinstance(value, str) or not value.strip():
            defect("BAD_CONSTRAINT_VALUE", path, "constraint value is not non-empty text")
        else:
            values[layer] = value.strip()
    if not values:
        defect("MISSING_CONSTRAINTS", "$.constraints", "no populated constraint layer")
    return ConstraintLedger(**{layer: values.get(layer) for layer in CONSTRAINT_LAYERS})


def _parse_action(entry: object, path: str, defect) -> Action | None:
    if not isinstance(entry, dict):
        defect("BAD_ACTION_TYPE", path, "action entry is not an object")
        return None
    fields: dict[str, object] = {}
    for key, value in entry.items():
        fields.setdefault(_norm_key(key), value)

    raw_type = fields.get("type", fields.get("action_type"))
    action_type = parse_action_type(raw_type) if isinstance(raw_type, str) else None
    if action_type is None:
        defect("BAD_ACTION_TYPE", f"{path}.type", f"unmappable action type {raw_type!r}")
        return None

    parameters: dict[str, Scalar] = {}
    raw_params = fields.get("parameters")
    if isinstance(raw_params, dict):
        for key, value in raw_params.items():
            name = key.strip()
            ppath = f"{path}.parameters.{name or key!r}"
            if not name:
                defect("BAD_PARAMETER_VALUE", ppath, "empty parameter key dropped")
            elif isinstance(value, bool):
                defect("BAD_PARAMETER_VALUE", ppath, "boolean parameter dropped")
            elif isinstance(value, str):
                parameters[name] = value.strip()
            elif isinstance(value, int):
                parameters[name] = value
            elif isinstance(value, float) and math.isfinite(value):
                parameters[name] = value
            else:
                defect("BAD_PARAMETER_VALUE", ppath, "parameter value is not a scalar; dropped")
    elif raw_params is not None:
        defect("BAD_PARAMETER_VALUE", f"{path}.parameters", "parameters is not an object")

    raw_rationale = fields.get("rationale")
    rationale = raw_rationale.strip() if isinstance(raw_rationale, str) else ""
    if not rationale:
        defect("MISSING_RATIONALE", f"{path}.rationale", "rationale is missing or empty")

    evidence = _parse_evidence(fields.get("evidence"), f"{path}.evidence", defect)
    if evidence.is_empty():
        defect("EMPTY_EVIDENCE", f"{path}.evidence", "all evidence lists are empty")
    return Action(action_type, parameters, rationale, evidence)


def _parse_evidence(raw: object, path: str, defect) -> Evidence:
    lists: dict[str, list[str]] = {name: [] for name in EVIDENCE_FIELDS}
    if isinstance(raw, dict):
        for key, value in raw.items():
            name = _norm_key(key)
            if name not in lists:
                continue
            if not isinstance(value, list):
                defect("BAD_EVIDENCE_ENTRY", f"{path}.{name}", "evidence field is not a list")
                continue
            for item in value:
                if isinstance(item, str) and item.strip():
                    lists[name].append(item.strip())
                else:
                    defect("BAD_EVIDENCE_ENTRY", f"{path}.{name}", "dropped entry that is not non-empty text")
    elif raw is not None:
        defect("BAD_EVIDENCE_ENTRY", path, "evidence is not an object")
    return Evidence(**{name: tuple(values) for name, values in lists.items()})


def serialize_policy(policy: PolicyAction) -> str:
    """Canonical single-line JSON; fixed key order, parameters sorted by key."""
    doc: dict[str, object] = {
        "objectives": policy.objectives,
        "constraints": policy.constraints.populated(),
        "actions": [
            {
                "type": action.action_type.value,
                "parameters": {key: action.parameters[key] for key in sorted(action.parameters)},
                "rationale": action.rationale,
                "evidence": {name: list(getattr(action.evidence, name)) for name in EVIDENCE_FIELDS},
            }
            for action in policy.actions
        ],
    }
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


@dataclass(frozen=True)
class PenaltyTable:
    """Deductions applied by structural_score; all values non-negative."""

    missing_objectives: float = 0.1
    missing_constraints: float = 0.1
    missing_rationale: float = 0.1
    missing_rationale_cap: float = 0.3
    empty_evidence: float = 0.1
    empty_evidence_cap: float = 0.3
    other: float = 0.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ConfigError("BAD_PENALTY", f"penalty {name} must be non-negative")


_CORE_PENALTY_CODES = frozenset(
    {"MISSING_OBJECTIVES", "MISSING_CONSTRAINTS", "MISSING_RATIONALE", "EMPTY_EVIDENCE"}
)


def structural_score(outcome: ParseOutcome, penalties: PenaltyTable | None = None) -> float:
    """1.0 minus configured deductions, clamped to [0,1]; Invalid scores 0.0."""
    table = penalties or PenaltyTable()
    if not outcome.valid:
        return 0.0
    counts = Counter(outcome.defect_codes())
    penalty = 0.0
    if counts["MISSING_OBJECTIVES"]:
        penalty += table.missing_objectives
    if counts["MISSING_CONSTRAINTS"]:
        penalty += table.missing_constraints
    penalty += min(table.missing_rationale_cap, table.missing_rationale * counts["MISSING_RATIONALE"])
    penalty += min(table.empty_evidence_cap, table.empty_evidence * counts["EMPTY_EVIDENCE"])
    penalty += table.other * sum(n for code, n in counts.items() if code not in _CORE_PENALTY_CODES)
    return min(1.0, max(0.0, 1.0 - penalty))


@dataclass(frozen=True)
class LexiconPattern:
    source: str
    regex: re.Pattern


# Explicit control verbs and numeric set-commands only; indirect phrasings
# ("floor it") are intentionally out of scope.
DEFAULT_LEXICON_LINES = (
    "throttle",
    r"accelerate\s+by\s+-?\d+(?:\.\d+)?",
    r"brake|braking(?:\s+force)?",
    r"steer(?:ing)?(?:\s+angle)?",
    r"set\s+speed\s+to\s+-?\d+(?:\.\d+)?",
)


def compile_lexicon(lines: Iterable[str]) -> tuple[LexiconPattern, ...]:
    """One regex fragment per line, '#' comments; each wrapped in word boundaries."""
    patterns = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            regex = re.compile(rf"\b(?:{line})\b", re.IGNORECASE)
        except re.error as exc:
            raise ConfigError("BAD_LEXICON_PATTERN", f"lexicon line {lineno}: {exc}")
        patterns.append(LexiconPattern(line, regex))
    return tuple(patterns)


def load_lexicon(path: str | Path) -> tuple[LexiconPattern, ...]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("BAD_LEXICON_PATTERN", f"cannot read lexicon {path}: {exc}")
    return compile_lexicon(text.splitlines())


DEFAULT_LEXICON = compile_lexicon(DEFAULT_LEXICON_LINES)


def detect_low_level_control(
    policy: PolicyAction, lexicon: Sequence[LexiconPattern] | None = None
) -> list[LowLevelMatch]:
    """Every lexicon match in any action's string parameter values or rationale."""
    patterns = DEFAULT_LEXICON if lexicon is None else tuple(lexicon)
    matches = []
    for index, action in enumerate(policy.actions):
        texts = [action.parameters[key] for key in sorted(action.parameters)
                 if isinstance(action.parameters[key], str)]
        texts.append(action.rationale)
        for text in texts:
            for pattern in patterns:
                for hit in pattern.regex.finditer(text):
                    matches.append(LowLevelMatch(index, pattern.source, hit.group(0)))
    return matches


def action_text(action: Action) -> str:
    """Scannable text of one action: string parameter values then rationale."""
    parts = [action.parameters[key] for key in sorted(action.parameters)
             if isinstance(action.parameters[key], str)]
    parts.append(action.rationale)
    return " ".join(part for part in parts if part)


def policy_text(policy: PolicyAction) -> str:
    """Scannable text of a policy: objectives, ledger, then per-action text.

    Evidence entries are deliberately excluded; quoting a hazard as evidence
    is not the same as acting on it.
    """
    parts = [policy.objectives]
    parts.extend(policy.constraints.populated().values())
    parts.extend(action_text(action) for action in policy.actions)
    return " ".join(part for part in parts if part)
