"""Perception summaries, driver/vehicle profiles, prompts, and sample records.

Also houses the two corpus procedures that operate on records alone: the
split-preserving mixed pairing (joining in-cabin records with out-of-cabin
records under a seeded, portable shuffle) and the four-way scenario
stratification over the classification heads.

The shuffle PRNG is splitmix64 with the published constants (increment
0x9E3779B97F4A7C15, mixers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB)
driving a Fisher-Yates pass with modulo draw, so pairings reproduce
bit-identically across implementations that follow this note.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError, InputError
from .policy import PolicyAction, parse_action_type, parse_policy, serialize_policy
from .store import ConstraintSnippet, snippet_from_dict, snippet_to_dict
from .textnorm import dedup_preserve_order, normalize_text

SPLITS = ("train", "val", "test")

SENSITIVITY_LEVELS = ("none", "low", "medium", "high")

STRATIFY_HEADS = ("emotion", "behavior", "traffic_scene", "vehicle_motion")

STRATIFY_GROUPS = ("driver_critical", "env_critical", "interaction_critical", "nominal")


def sensitivity_rank(level: str) -> int:
    if level not in SENSITIVITY_LEVELS:
        raise InputError("BAD_PROFILE", f"unknown sensitivity level {level!r}")
    return SENSITIVITY_LEVELS.index(level)


@dataclass(frozen=True)
class PerceptionSummary:
    driver_labels: tuple[str, ...] = ()
    scene_labels: tuple[str, ...] = ()
    summary_initial: str = ""
    summary_transition: str = ""
    summary_final: str = ""
    objects: tuple[str, ...] = ()

    def all_labels(self) -> tuple[str, ...]:
        return self.driver_labels + self.scene_labels

    def summary_stages(self) -> tuple[str, str, str]:
        return (self.summary_initial, self.summary_transition, self.summary_final)


@dataclass(frozen=True)
class DriverProfile:
    alert_modality_preference: str = ""
    alert_frequency: str = ""
    sensitivities: dict[str, str] = field(default_factory=dict)
    style_preference: str = ""
    cabin_preferences: dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        for key, level in self.sensitivities.items():
            if level not in SENSITIVITY_LEVELS:
                raise InputError("BAD_PROFILE", f"sensitivity {key!r} has unknown level {level!r}")
        band = self.cabin_preferences.get("temperature_band")
        if band is not None:
            if (
                not isinstance(band, (list, tuple))
                or len(band) != 2
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in band)
                or band[0] > band[1]
            ):
                raise InputError("BAD_PROFILE", f"temperature_band {band!r} is not a [low, high] pair")
            object.__setattr__(
                self,
                "cabin_preferences",
                {**self.cabin_preferences, "temperature_band": (float(band[0]), float(band[1]))},
            )

    def temperature_band(self) -> tuple[float, float] | None:
        return self.cabin_preferences.get("temperature_band")


@dataclass(frozen=True)
class VehicleProfile:
    jurisdiction: str = ""
    operating_mode: str = ""
    available_actuators: frozenset[str] = frozenset()
    capability_limits: dict[str, dict[str, tuple[float, float]]] = field(default_factory=dict)

    def __post_init__(self):
        canonical = set()
        for name in self.available_actuators:
            parsed = parse_action_type(name)
            if parsed is None:
                raise InputError("BAD_PROFILE", f"actuator {name!r} is not a known channel")
            canonical.add(parsed.value)
        object.__setattr__(self, "available_actuators", frozenset(canonical))
        limits: dict[str, dict[str, tuple[float, float]]] = {}
        for name, bounds in self.capability_limits.items():
            parsed = parse_action_type(name)
            if parsed is None or parsed.value not in canonical:
                raise InputError("BAD_PROFILE", f"capability bound names unavailable actuator {name!r}")
            checked = {}
            for parameter, bound in bounds.items():
                if not isinstance(bound, (list, tuple)) or len(bound) != 2 or bound[0] > bound[1]:
                    raise InputError("BAD_PROFILE", f"capability bound {name}.{parameter} is not [min, max]")
                checked[parameter] = (float(bound[0]), float(bound[1]))
            limits[parsed.value] = checked
        object.__setattr__(self, "capability_limits", limits)


@dataclass(frozen=True)
class StrategyPrompt:
    prompt_id: str
    z: PerceptionSummary = field(default_factory=PerceptionSummary)
    driver: DriverProfile = field(default_factory=DriverProfile)
    vehicle: VehicleProfile = field(default_factory=VehicleProfile)
    constraints: tuple[ConstraintSnippet, ...] = ()


@dataclass(frozen=True)
class SampleRecord:
    prompt: StrategyPrompt
    split: str
    reference_policy: PolicyAction | None = None
    ground_truth_labels: dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise InputError("BAD_SPLIT", f"split must be one of {SPLITS}, got {self.split!r}")


@dataclass(frozen=True)
class LabelVocabulary:
    heads: dict[str, tuple[str, ...]]
    nominal: dict[str, str]

    def __post_init__(self):
        for head, label in self.nominal.items():
            labels = self.heads.get(head)
            if labels is None:
                raise ConfigError("BAD_VOCAB", f"nominal label declared for unknown head {head!r}")
            if label not in labels:
                raise ConfigError("BAD_VOCAB", f"nominal {label!r} not in labels of head {head!r}")

    def nominal_for(self, head: str) -> str:
        if head not in self.nominal:
            raise ConfigError("BAD_VOCAB", f"no nominal label declared for head {head!r}")
        return self.nominal[head]


DEFAULT_LABEL_VOCAB = LabelVocabulary(
    heads={
        "emotion": ("neutral", "anger", "anxiety", "happiness", "sadness", "surprise"),
        "behavior": (
            "normal_driving",
            "looking_around",
            "phone_use",
            "drowsy",
            "drinking",
            "reaching_back",
        ),
        "traffic_scene": (
            "smooth_traffic",
            "traffic_jam",
            "intersection",
            "highway",
            "parking_lot",
            "rain",
            "fog",
        ),
        "vehicle_motion": ("forward_moving", "reversing", "turning", "stopped", "merging", "overtaking"),
    },
    nominal={
        "emotion": "neutral",
        "behavior": "normal_driving",
        "traffic_scene": "smooth_traffic",
        "vehicle_motion": "forward_moving",
    },
)


def load_label_vocab(path: str | Path) -> LabelVocabulary:
    """Vocabulary file: {"heads": {head: {"labels": [...], "nominal": "..."}}}."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError("BAD_VOCAB", f"cannot load vocabulary from {path}: {exc}")
    heads_raw = raw.get("heads") if isinstance(raw, dict) else None
    if not isinstance(heads_raw, dict):
        raise ConfigError("BAD_VOCAB", "vocabulary file must hold a 'heads' object")
    heads = {}
    nominal = {}
    for head, entry in heads_raw.items():
        if not isinstance(entry, dict) or not isinstance(entry.get("labels"), list):
            raise ConfigError("BAD_VOCAB", f"head {head!r} must declare a labels list")
        heads[head] = tuple(str(label) for label in entry["labels"])
        if "nominal" in entry:
            nominal[head] = str(entry["nominal"])
    return LabelVocabulary(heads=heads, nominal=nominal)


def flag_unknown_labels(z: PerceptionSummary, vocab: LabelVocabulary) -> list[str]:
    """Labels outside every head's declared set; retained, caller logs them."""
    known = {normalize_text(label) for labels in vocab.heads.values() for label in labels}
    return [label for label in z.all_labels() if normalize_text(label) not in known]


_MASK64 = (1 << 64) - 1


class SplitMix64:
    """splitmix64 (Steele et al. constants); the toolkit's only PRNG."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    digest = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        digest ^= byte
        digest = (digest * 0x100000001B3) & _MASK64
    return digest


def stream_seed(seed: int, name: str) -> int:
    """Per-stream seed: user seed XORed with the FNV-1a hash of the name."""
    return (seed & _MASK64) ^ fnv1a64(name)


def seeded_shuffle(items: Sequence, rng: SplitMix64) -> list:
    """Fisher-Yates with modulo draw so pairings replay identically anywhere."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.next_u64() % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def pair_mixed(
    in_samples: Sequence[SampleRecord],
    out_samples: Sequence[SampleRecord],
    seed: int,
    block_size: int = 1,
) -> list[SampleRecord]:
    """Pair every in-cabin record with a block of same-split out-of-cabin records.

    Out-of-cabin records are shuffled once per split with the stream seeded by
    (seed, split name); the k-th in-cabin record of a split consumes shuffled
    positions k*block_size .. k*block_size+block_size-1, wrapping around when
    exhausted. Output preserves in-cabin input order.
    """
    if block_size < 1:
        raise ConfigError("BAD_BLOCK_SIZE", f"block_size must be >= 1, got {block_size}")
    by_split: dict[str, list[SampleRecord]] = {}
    for record in out_samples:
        by_split.setdefault(record.split, []).append(record)

    shuffled: dict[str, list[SampleRecord]] = {}
    counters: dict[str, int] = {}
    for split in sorted({record.split for record in in_samples}):
        pool = by_split.get(split)
        if not pool:
            raise InputError("EMPTY_SPLIT", f"split {split!r} has no out-of-cabin samples")
        shuffled[split] = seeded_shuffle(pool, SplitMix64(stream_seed(seed, split)))
        counters[split] = 0

    paired = []
    for record in in_samples:
        pool = shuffled[record.split]
        position = counters[record.split]
        counters[record.split] = position + 1
        start = position * block_size
        block = [pool[(start + offset) % len(pool)] for offset in range(block_size)]
        paired.append(_merge_pair(record, block))
    return paired


def _merge_pair(in_record: SampleRecord, block: list[SampleRecord]) -> SampleRecord:
    """One joint record: driver side from in-cabin, scene side from the block."""
    in_z = in_record.prompt.z
    scene_labels = list(in_z.scene_labels)
    objects = list(in_z.objects)
    stages = {name: [getattr(in_z, name)] for name in
              ("summary_initial", "summary_transition", "summary_final")}
    for member in block:
        z = member.prompt.z
        scene_labels.extend(z.scene_labels)
        objects.extend(z.objects)
        for name in stages:
            stages[name].append(getattr(z, name))
    merged_z = PerceptionSummary(
        driver_labels=in_z.driver_labels,
        scene_labels=tuple(dedup_preserve_order(scene_labels)),
        summary_initial=" ".join(part for part in stages["summary_initial"] if part),
        summary_transition=" ".join(part for part in stages["summary_transition"] if part),
        summary_final=" ".join(part for part in stages["summary_final"] if part),
        objects=tuple(dedup_preserve_order(objects)),
    )

    vehicle = block[0].prompt.vehicle
    if vehicle == VehicleProfile():
        vehicle = in_record.prompt.vehicle
    prompt = StrategyPrompt(
        prompt_id="+".join([in_record.prompt.prompt_id] + [m.prompt.prompt_id for m in block]),
        z=merged_z,
        driver=in_record.prompt.driver,
        vehicle=vehicle,
        constraints=in_record.prompt.constraints,
    )

    labels: dict[str, object] = {}
    for member in block:
        labels.update(member.ground_truth_labels)
    labels.update(in_record.ground_truth_labels)

    reference = in_record.reference_policy or block[0].reference_policy
    return SampleRecord(
        prompt=prompt,
        split=in_record.split,
        reference_policy=reference,
        ground_truth_labels=labels,
    )


def stratify(
    records: Sequence[SampleRecord], vocab: LabelVocabulary | None = None
) -> dict[str, list[SampleRecord]]:
    """Partition records into the four mutually exclusive scenario groups."""
    vocab = vocab or DEFAULT_LABEL_VOCAB
    groups: dict[str, list[SampleRecord]] = {group: [] for group in STRATIFY_GROUPS}
    for record in records:
        flags = {}
        for head in STRATIFY_HEADS:
            label = record.ground_truth_labels.get(head)
            if not isinstance(label, str):
                raise InputError("MISSING_HEAD", f"record lacks a single label for head {head!r}")
            flags[head] = normalize_text(label) != normalize_text(vocab.nominal_for(head))
        driver_side = flags["emotion"] or flags["behavior"]
        env_side = flags["traffic_scene"] or flags["vehicle_motion"]
        if driver_side and env_side:
            groups["interaction_critical"].append(record)
        elif driver_side:
            groups["driver_critical"].append(record)
        elif env_side:
            groups["env_critical"].append(record)
        else:
            groups["nominal"].append(record)
    return groups


def perception_to_dict(z: PerceptionSummary) -> dict:
    return {
        "driver_labels": list(z.driver_labels),
        "scene_labels": list(z.scene_labels),
        "summary_initial": z.summary_initial,
        "summary_transition": z.summary_transition,
        "summary_final": z.summary_final,
        "objects": list(z.objects),
    }


def _string_tuple(raw: object, path: str) -> tuple[str, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list) or not all(isinstance(item, str) for item in raw):
        raise InputError("BAD_RECORD", f"{path} must be a list of strings")
    return tuple(raw)


def perception_from_dict(raw: dict) -> PerceptionSummary:
    if not isinstance(raw, dict):
        raise InputError("BAD_RECORD", "perception summary must be an object")
    return PerceptionSummary(
        driver_labels=_string_tuple(raw.get("driver_labels"), "driver_labels"),
        scene_labels=_string_tuple(raw.get("scene_labels"), "scene_labels"),
        summary_initial=str(raw.get("summary_initial", "")),
        summary_transition=str(raw.get("summary_transition", "")),
        summary_final=str(raw.get("summary_final", "")),
        objects=_string_tuple(raw.get("objects"), "objects"),
    )


def driver_to_dict(driver: DriverProfile) -> dict:
    prefs = dict(driver.cabin_preferences)
    band = prefs.get("temperature_band")
    if band is not None:
        prefs["temperature_band"] = list(band)
    return {
        "alert_modality_preference": driver.alert_modality_preference,
        "alert_frequency": driver.alert_frequency,
        "sensitivities": dict(driver.sensitivities),
        "style_preference": driver.style_preference,
        "cabin_preferences": prefs,
    }


def driver_from_dict(raw: dict) -> DriverProfile:
    if not isinstance(raw, dict):
        raise InputError("BAD_RECORD", "driver profile must be an object")
    sensitivities = raw.get("sensitivities", {})
    if not isinstance(sensitivities, dict):
        raise InputError("BAD_PROFILE", "sensitivities must be an object")
    prefs = raw.get("cabin_preferences", {})
    if not isinstance(prefs, dict):
        raise InputError("BAD_PROFILE", "cabin_preferences must be an object")
    return DriverProfile(
        alert_modality_preference=str(raw.get("alert_modality_preference", "")),
        alert_frequency=str(raw.get("alert_frequency", "")),
        sensitivities={str(k): str(v) for k, v in sensitivities.items()},
        style_preference=str(raw.get("style_preference", "")),
        cabin_preferences=dict(prefs),
    )


def vehicle_to_dict(vehicle: VehicleProfile) -> dict:
    return {
        "jurisdiction": vehicle.jurisdiction,
        "operating_mode": vehicle.operating_mode,
        "available_actuators": sorted(vehicle.available_actuators),
        "capability_limits": {
            actuator: {parameter: list(bound) for parameter, bound in sorted(bounds.items())}
            for actuator, bounds in sorted(vehicle.capability_limits.items())
        },
    }


def vehicle_from_dict(raw: dict) -> VehicleProfile:
    if not isinstance(raw, dict):
        raise InputError("BAD_RECORD", "vehicle profile must be an object")
    actuators = raw.get("available_actuators", [])
    limits = raw.get("capability_limits", {})
    if not isinstance(actuators, list) or not isinstance(limits, dict):
        raise InputError("BAD_PROFILE", "malformed vehicle profile")
    return VehicleProfile(
        jurisdiction=str(raw.get("jurisdiction", "")),
        operating_mode=str(raw.get("operating_mode", "")),
        available_actuators=frozenset(str(name) for name in actuators),
        capability_limits={
            str(name): {str(p): bound for p, bound in bounds.items()}
            for name, bounds in limits.items()
            if isinstance(bounds, dict)
        },
    )


def prompt_to_dict(prompt: StrategyPrompt) -> dict:
    return {
        "prompt_id": prompt.prompt_id,
        "z": perception_to_dict(prompt.z),
        "driver": driver_to_dict(prompt.driver),
        "vehicle": vehicle_to_dict(prompt.vehicle),
        "constraints": [snippet_to_dict(snippet) for snippet in prompt.constraints],
    }


def prompt_from_dict(raw: dict) -> StrategyPrompt:
    if not isinstance(raw, dict) or not isinstance(raw.get("prompt_id"), str):
        raise InputError("BAD_RECORD", "prompt record needs a string prompt_id")
    constraints = raw.get("constraints", [])
    if not isinstance(constraints, list):
        raise InputError("BAD_RECORD", "constraints must be a list")
    return StrategyPrompt(
        prompt_id=raw["prompt_id"],
        z=perception_from_dict(raw.get("z", {})),
        driver=driver_from_dict(raw.get("driver", {})),
        vehicle=vehicle_from_dict(raw.get("vehicle", {})),
        constraints=tuple(snippet_from_dict(entry) for entry in constraints),
    )


def sample_to_dict(record: SampleRecord) -> dict:
    reference = None
    if record.reference_policy is not None:
        reference = json.loads(serialize_policy(record.reference_policy))
    return {
        "prompt": prompt_to_dict(record.prompt),
        "split": record.split,
        "reference_policy": reference,
        "ground_truth_labels": {
            task: list(value) if isinstance(value, (list, tuple)) else value
            for task, value in record.ground_truth_labels.items()
        },
    }


def sample_from_dict(raw: dict) -> SampleRecord:
    if not isinstance(raw, dict):
        raise InputError("BAD_RECORD", "sample record must be an object")
    reference = None
    raw_reference = raw.get("reference_policy")
    if raw_reference is not None:
        document = raw_reference if isinstance(raw_reference, str) else json.dumps(raw_reference)
        outcome = parse_policy(document)
        if not outcome.valid:
            raise InputError("BAD_RECORD", "reference_policy is not schema-valid")
        reference = outcome.policy
    labels_raw = raw.get("ground_truth_labels", {})
    if not isinstance(labels_raw, dict):
        raise InputError("BAD_RECORD", "ground_truth_labels must be an object")
    labels: dict[str, object] = {}
    for task, value in labels_raw.items():
        labels[str(task)] = tuple(str(v) for v in value) if isinstance(value, list) else value
    return SampleRecord(
        prompt=prompt_from_dict(raw.get("prompt", {})),
        split=str(raw.get("split", "")),
        reference_policy=reference,
        ground_truth_labels=labels,
    )
