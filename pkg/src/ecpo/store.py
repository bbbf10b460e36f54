"""Versioned constraint snippet store, retrieval, and budgeted compression.

Snippets carry provenance (layer, jurisdiction, vehicle configuration, clause
id) plus optional machine-readable assertions that the layered checks can
evaluate deterministically. The store is append-only: version 0 is empty and
every update produces version N+1 while all earlier versions stay readable,
so retrieval pinned to a version is reproducible forever.

Scoring is lexical by default (cosine over term-frequency vectors of
normalized content tokens of the snippet text; provenance fields do not enter
the vector). An embedding scorer over externally supplied unit-norm vectors
is available for callers with a precomputed encoder.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .errors import ConfigError, InputError
from .policy import ActionType, parse_action_type
from .textnorm import content_tokens, dedup_preserve_order, lexical_cosine

if TYPE_CHECKING:
    from .context import DriverProfile, PerceptionSummary, VehicleProfile

SNIPPET_LAYERS = ("legal", "vehicle", "driver")

# Compression order: legal clauses outrank vehicle, vehicle outranks driver.
LAYER_PRIORITY = {"legal": 0, "vehicle": 1, "driver": 2}

UNIT_NORM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ParameterBound:
    action_type: ActionType
    parameter: str
    minimum: float
    maximum: float

    def __post_init__(self):
        if self.minimum > self.maximum:
            raise InputError(
                "BAD_BOUND",
                f"bound for {self.parameter}: min {self.minimum} exceeds max {self.maximum}",
            )


@dataclass(frozen=True)
class Assertions:
    forbidden_action_types: frozenset[ActionType] = frozenset()
    parameter_bounds: tuple[ParameterBound, ...] = ()
    required_modalities: frozenset[str] = frozenset()
    forbidden_keywords: tuple[str, ...] = ()

    def __post_init__(self):
        for keyword in self.forbidden_keywords:
            try:
                re.compile(keyword)
            except re.error as exc:
                raise InputError("BAD_KEYWORD", f"keyword pattern {keyword!r}: {exc}")

    def is_empty(self) -> bool:
        return not (
            self.forbidden_action_types
            or self.parameter_bounds
            or self.required_modalities
            or self.forbidden_keywords
        )


@dataclass(frozen=True)
class ConstraintSnippet:
    snippet_id: str
    layer: str
    clause_id: str
    text: str
    jurisdiction: str | None = None
    vehicle_config: str | None = None
    assertions: Assertions | None = None
    version: int = 0

    def __post_init__(self):
        if not self.snippet_id:
            raise InputError("BAD_SNIPPET", "snippet_id must be non-empty")
        if self.layer not in SNIPPET_LAYERS:
            raise InputError("BAD_SNIPPET", f"unknown snippet layer {self.layer!r}")
        if not self.clause_id:
            raise InputError("BAD_SNIPPET", f"snippet {self.snippet_id}: clause_id must be non-empty")
        if not self.text.strip():
            raise InputError("BAD_SNIPPET", f"snippet {self.snippet_id}: text must be non-empty")


@dataclass(frozen=True)
class RetrievalQuery:
    jurisdiction: str = ""
    operating_mode: str = ""
    sensitivity_terms: tuple[str, ...] = ()
    situation_terms: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.sensitivity_terms and not self.situation_terms:
            raise InputError("EMPTY_QUERY", "at least one term list must be non-empty")

    def tokens(self) -> list[str]:
        parts = [self.jurisdiction, self.operating_mode]
        parts.extend(self.sensitivity_terms)
        parts.extend(self.situation_terms)
        out: list[str] = []
        for part in parts:
            out.extend(content_tokens(part))
        return out


@dataclass(frozen=True)
class RankedSnippet:
    snippet_id: str
    score: float


@dataclass(frozen=True)
class RetrievalResult:
    ranked: tuple[RankedSnippet, ...]
    scorer_kind: str
    store_version: int


@dataclass(frozen=True)
class SummaryEntry:
    snippet_id: str
    clause_id: str
    layer: str
    text: str


@dataclass(frozen=True)
class ConstraintStore:
    """Append-only snapshots; versions[n] is the full content of version n."""

    versions: tuple[tuple[ConstraintSnippet, ...], ...] = ((),)

    @property
    def version(self) -> int:
        return len(self.versions) - 1

    def snapshot(self, version: int | None = None) -> tuple[ConstraintSnippet, ...]:
        if version is None:
            version = self.version
        if not 0 <= version <= self.version:
            raise InputError("UNKNOWN_VERSION", f"store has no version {version}")
        return self.versions[version]


def empty_store() -> ConstraintStore:
    return ConstraintStore()


def update_store(
    store: ConstraintStore,
    additions: Iterable[ConstraintSnippet] = (),
    removals: Iterable[str] = (),
) -> ConstraintStore:
    """New store at version+1; earlier versions are untouched."""
    content = {snippet.snippet_id: snippet for snippet in store.snapshot()}
    for snippet_id in removals:
        if snippet_id not in content:
            raise InputError("UNKNOWN_REMOVAL_ID", f"no snippet {snippet_id!r} to remove")
        del content[snippet_id]
    new_version = store.version + 1
    for snippet in additions:
        if snippet.snippet_id in content:
            raise InputError("DUPLICATE_ID", f"snippet id {snippet.snippet_id!r} already present")
        content[snippet.snippet_id] = dataclasses.replace(snippet, version=new_version)
    return ConstraintStore(store.versions + (tuple(content.values()),))


# Sensitivity levels at or above this rank become query terms.
_QUERY_SENSITIVITY_FLOOR = "medium"


def build_query(
    z: PerceptionSummary, driver: DriverProfile, vehicle: VehicleProfile
) -> RetrievalQuery:
    """Form the retrieval query from vehicle identity, driver profile, and z.

    Situation terms take every perception label (driver state describes the
    situation as much as the scene does) plus the content tokens of the three
    summary stages, deduplicated in source order. An all-empty context falls
    back to the single term "general" so the query invariant holds.
    """
    from .context import sensitivity_rank

    sensitivity = [
        key
        for key, level in driver.sensitivities.items()
        if sensitivity_rank(level) >= sensitivity_rank(_QUERY_SENSITIVITY_FLOOR)
    ]
    for preference in (driver.alert_modality_preference, driver.style_preference):
        sensitivity.extend(content_tokens(preference))

    situation: list[str] = []
    for label in z.driver_labels + z.scene_labels:
        situation.extend(content_tokens(label))
    for stage in (z.summary_initial, z.summary_transition, z.summary_final):
        situation.extend(content_tokens(stage))

    sensitivity = dedup_preserve_order(sensitivity)
    situation = dedup_preserve_order(situation)
    if not sensitivity and not situation:
        situation = ["general"]
    return RetrievalQuery(
        jurisdiction=vehicle.jurisdiction,
        operating_mode=vehicle.operating_mode,
        sensitivity_terms=tuple(sensitivity),
        situation_terms=tuple(situation),
    )


class LexicalScorer:
    """Cosine over term-frequency vectors of normalized content tokens."""

    kind = "lexical"

    def scores(self, snippets: Sequence[ConstraintSnippet], query: RetrievalQuery) -> list[float]:
        query_tokens = query.tokens()
        return [lexical_cosine(content_tokens(s.text), query_tokens) for s in snippets]


def _check_unit_norm(name: str, vector: Sequence[float]) -> tuple[float, ...]:
    values = tuple(float(v) for v in vector)
    norm = math.sqrt(sum(v * v for v in values))
    if abs(norm - 1.0) > UNIT_NORM_TOLERANCE:
        raise InputError("BAD_EMBEDDING", f"vector for {name} has norm {norm:.8f}, expected 1.0")
    return values


class EmbeddingScorer:
    """Dot product of externally supplied unit-norm vectors."""

    kind = "embedding"

    def __init__(self, query_vector: Sequence[float], snippet_vectors: Mapping[str, Sequence[float]]):
        self.query_vector = _check_unit_norm("query", query_vector)
        self.snippet_vectors = {
            snippet_id: _check_unit_norm(snippet_id, vector)
            for snippet_id, vector in snippet_vectors.items()
        }

    def scores(self, snippets: Sequence[ConstraintSnippet], query: RetrievalQuery) -> list[float]:
        out = []
        for snippet in snippets:
            vector = self.snippet_vectors.get(snippet.snippet_id)
            if vector is None:
                raise InputError("MISSING_EMBEDDING", f"no vector for snippet {snippet.snippet_id!r}")
            if len(vector) != len(self.query_vector):
                raise InputError("BAD_EMBEDDING", f"vector length mismatch for {snippet.snippet_id!r}")
            out.append(sum(q * s for q, s in zip(self.query_vector, vector)))
        return out


def load_embeddings(path: str | Path) -> dict[str, tuple[float, ...]]:
    """Sidecar file: JSON object snippet_id -> vector; unit norm enforced."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InputError("BAD_EMBEDDING", f"cannot load embeddings from {path}: {exc}")
    if not isinstance(raw, dict):
        raise InputError("BAD_EMBEDDING", "embedding sidecar must be an object")
    return {name: _check_unit_norm(name, vector) for name, vector in raw.items()}


def retrieve(
    store: ConstraintStore,
    query: RetrievalQuery,
    top_k: int,
    scorer=None,
    version: int | None = None,
) -> RetrievalResult:
    """Top-k snippets by cosine; ties broken by snippet_id ascending."""
    if top_k < 1:
        raise ConfigError("BAD_TOP_K", f"top_k must be >= 1, got {top_k}")
    snippets = store.snapshot(version)
    if not snippets:
        raise InputError("EMPTY_STORE", "no snippets in the selected store version")
    if scorer is None:
        scorer = LexicalScorer()
    scores = scorer.scores(snippets, query)
    order = sorted(zip(snippets, scores), key=lambda pair: (-pair[1], pair[0].snippet_id))
    resolved = store.version if version is None else version
    ranked = tuple(RankedSnippet(s.snippet_id, score) for s, score in order[:top_k])
    return RetrievalResult(ranked, scorer.kind, resolved)


def compress(ranked: Sequence[ConstraintSnippet], token_budget: int) -> tuple[SummaryEntry, ...]:
    """Budgeted constraint summary over snippets given in retrieval order.

    Re-orders by layer priority (stable, so retrieval order survives within a
    layer), then includes whole snippets until the next one would exceed the
    budget. Tokens are whitespace-delimited units; snippets are never split.
    """
    if token_budget < 1:
        raise ConfigError("BAD_BUDGET", f"token_budget must be >= 1, got {token_budget}")
    ordered = sorted(ranked, key=lambda snippet: LAYER_PRIORITY[snippet.layer])
    entries = []
    used = 0
    for snippet in ordered:
        cost = len(snippet.text.split())
        if used + cost > token_budget:
            break
        entries.append(SummaryEntry(snippet.snippet_id, snippet.clause_id, snippet.layer, snippet.text))
        used += cost
    return tuple(entries)


def assertions_to_dict(assertions: Assertions) -> dict:
    return {
        "forbidden_action_types": sorted(t.value for t in assertions.forbidden_action_types),
        "parameter_bounds": [
            [b.action_type.value, b.parameter, b.minimum, b.maximum]
            for b in assertions.parameter_bounds
        ],
        "required_modalities": sorted(assertions.required_modalities),
        "forbidden_keywords": list(assertions.forbidden_keywords),
    }


def assertions_from_dict(raw: dict) -> Assertions:
    if not isinstance(raw, dict):
        raise InputError("BAD_SNIPPET", "assertions must be an object")
    types = []
    for name in raw.get("forbidden_action_types", ()):
        parsed = parse_action_type(name) if isinstance(name, str) else None
        if parsed is None:
            raise InputError("BAD_SNIPPET", f"unmappable forbidden action type {name!r}")
        types.append(parsed)
    bounds = []
    for entry in raw.get("parameter_bounds", ()):
        if not isinstance(entry, (list, tuple)) or len(entry) != 4:
            raise InputError("BAD_SNIPPET", f"parameter bound {entry!r} is not a 4-item list")
        parsed = parse_action_type(entry[0]) if isinstance(entry[0], str) else None
        if parsed is None:
            raise InputError("BAD_SNIPPET", f"unmappable bound action type {entry[0]!r}")
        bounds.append(ParameterBound(parsed, str(entry[1]), float(entry[2]), float(entry[3])))
    return Assertions(
        forbidden_action_types=frozenset(types),
        parameter_bounds=tuple(bounds),
        required_modalities=frozenset(str(m) for m in raw.get("required_modalities", ())),
        forbidden_keywords=tuple(str(k) for k in raw.get("forbidden_keywords", ())),
    )


def snippet_to_dict(snippet: ConstraintSnippet) -> dict:
    return {
        "snippet_id": snippet.snippet_id,
        "layer": snippet.layer,
        "clause_id": snippet.clause_id,
        "text": snippet.text,
        "jurisdiction": snippet.jurisdiction,
        "vehicle_config": snippet.vehicle_config,
        "assertions": assertions_to_dict(snippet.assertions) if snippet.assertions else None,
        "version": snippet.version,
    }


def snippet_from_dict(raw: dict) -> ConstraintSnippet:
    if not isinstance(raw, dict):
        raise InputError("BAD_SNIPPET", "snippet record must be an object")
    try:
        snippet_id = raw["snippet_id"]
        layer = raw["layer"]
        clause_id = raw["clause_id"]
        text = raw["text"]
    except KeyError as exc:
        raise InputError("BAD_SNIPPET", f"snippet record missing field {exc.args[0]!r}")
    assertions = raw.get("assertions")
    return ConstraintSnippet(
        snippet_id=str(snippet_id),
        layer=str(layer),
        clause_id=str(clause_id),
        text=str(text),
        jurisdiction=raw.get("jurisdiction"),
        vehicle_config=raw.get("vehicle_config"),
        assertions=assertions_from_dict(assertions) if assertions else None,
        version=int(raw.get("version", 0)),
    )


def load_store(snippets: Iterable[ConstraintSnippet]) -> ConstraintStore:
    """Build a one-update store (version 1) from a snippet corpus."""
    return update_store(empty_store(), list(snippets))
