"""Command-line batch pipelines over JSONL files.

Every command reads line-delimited JSON (UTF-8, LF), writes data records to
stdout or --out, and logs to stderr. A single config file governs all
tunables; CLI flags override it. Outputs are deterministic: re-running a
command on the same inputs and config is byte-identical. Exit codes: 0
success, 1 input error, 2 config error, 3 violated internal invariant.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Sequence

from .config import RunConfig, load_config
from .context import (
    SampleRecord,
    StrategyPrompt,
    pair_mixed,
    prompt_from_dict,
    sample_from_dict,
    sample_to_dict,
    stratify,
)
from .errors import ConfigError, InputError, InvariantError
from .metrics import (
    DEGENERATE,
    LabelSetSample,
    MetricReport,
    NO_RATINGS,
    StrategyEvalRecord,
    bleu4,
    classification_metrics,
    has_aggregate,
    multilabel_metrics,
    rouge_l,
    spearman,
    strategy_metrics,
)
from .preference import Candidate, CandidateSet, PsiConfig, select_pair, export_preference_dataset
from .store import LexicalScorer, build_query, compress, load_store, retrieve, snippet_from_dict
from .validator import report_to_dict, validate


def _dumps(payload: object) -> str:
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def _read_jsonl(path: str) -> list[object]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputError("MISSING_FILE", f"no such file: {path}")
    except OSError as error:
        raise InputError("BAD_FILE", f"cannot read {path}: {error}")
    records = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except ValueError as error:
            raise InputError("BAD_LINE", f"{path}:{number}: {error}")
    return records


def _emit(lines: Sequence[str], out_path: str | None) -> None:
    payload = "".join(line + "\n" for line in lines)
    if out_path is None:
        sys.stdout.write(payload)
        return
    try:
        Path(out_path).write_text(payload, encoding="utf-8")
    except OSError as error:
        raise InputError("BAD_OUT", f"cannot write {out_path}: {error}")


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _record_field(record: object, key: str, path: str) -> object:
    if not isinstance(record, dict) or key not in record:
        raise InputError("BAD_RECORD", f"{path}: record needs a {key!r} field")
    return record[key]


def _document_text(raw: object) -> str:
    """Policy payloads may be raw text or an already-parsed object."""
    if isinstance(raw, str):
        return raw
    return json.dumps(raw)


def _load_prompts(path: str) -> dict[str, StrategyPrompt]:
    """Accept bare prompt records or full sample records (keyed 'prompt')."""
    prompts: dict[str, StrategyPrompt] = {}
    for record in _read_jsonl(path):
        if isinstance(record, dict) and isinstance(record.get("prompt"), dict):
            record = record["prompt"]
        prompt = prompt_from_dict(record if isinstance(record, dict) else {})
        if prompt.prompt_id in prompts:
            raise InputError("DUPLICATE_ID", f"{path}: prompt {prompt.prompt_id!r} appears twice")
        prompts[prompt.prompt_id] = prompt
    return prompts


def _load_samples(path: str) -> list[SampleRecord]:
    return [sample_from_dict(record) for record in _read_jsonl(path)]


def cmd_validate(args, config: RunConfig) -> list[str]:
    prompts = _load_prompts(args.prompts)
    lines = []
    valid_count = 0
    records = _read_jsonl(args.policies)
    for index, record in enumerate(records):
        prompt_id = _record_field(record, "prompt_id", args.policies)
        document = _record_field(record, "document", args.policies)
        prompt = prompts.get(prompt_id)
        if prompt is None:
            raise InputError("UNKNOWN_PROMPT", f"{args.policies}: no prompt {prompt_id!r}")
        report = validate(_document_text(document), prompt, config)
        valid_count += report.schema_valid
        lines.append(
            _dumps(
                {
                    "kind": "report",
                    "prompt_id": prompt_id,
                    "candidate_id": record.get("candidate_id", str(index)),
                    "report": report_to_dict(report),
                    "config": config.echo(),
                }
            )
        )
    if records:
        _log(f"validate: {len(records)} records, valid_pct={100.0 * valid_count / len(records):.2f}")
    else:
        _log("validate: 0 records")
    return lines


def cmd_pairs(args, config: RunConfig) -> list[str]:
    psi = PsiConfig(config.psi_floor, config.psi_ceiling)
    pairs = []
    sets: dict[str, CandidateSet] = {}
    prompt_payloads: dict[str, object] = {}
    for record in _read_jsonl(args.candidates):
        prompt_id = _record_field(record, "prompt_id", args.candidates)
        raw_candidates = _record_field(record, "candidates", args.candidates)
        if not isinstance(raw_candidates, list) or not raw_candidates:
            raise InputError("BAD_RECORD", f"{args.candidates}: candidates must be a non-empty list")
        if prompt_id in sets:
            raise InputError("DUPLICATE_ID", f"{args.candidates}: prompt {prompt_id!r} appears twice")
        raw_prompt = record.get("prompt")
        prompt = prompt_from_dict(raw_prompt if isinstance(raw_prompt, dict) else {"prompt_id": prompt_id})
        candidates = []
        for index, entry in enumerate(raw_candidates):
            candidate_id = entry.get("candidate_id", str(index)) if isinstance(entry, dict) else str(index)
            document = _document_text(_record_field(entry, "document", args.candidates))
            candidates.append(
                Candidate(
                    candidate_id=candidate_id,
                    document=document,
                    report=validate(document, prompt, config),
                )
            )
        candidate_set = CandidateSet(prompt_id=prompt_id, candidates=tuple(candidates))
        sets[prompt_id] = candidate_set
        prompt_payloads[prompt_id] = raw_prompt
        pair = select_pair(candidate_set, psi=psi, gap_min=config.gap_min)
        if pair is None:
            _log(f"pairs: skip prompt {prompt_id!r} (score gap <= {config.gap_min})")
        else:
            pairs.append(pair)
    dataset = export_preference_dataset(pairs, sets, prompt_payloads)
    _log(f"pairs: {len(pairs)} pairs from {len(sets)} candidate sets")
    return [_dumps(record) for record in dataset]


def _eval_strategy_records(records: list[dict], config: RunConfig, path: str) -> list[StrategyEvalRecord]:
    out = []
    for record in records:
        prompt_id = _record_field(record, "prompt_id", path)
        document = _document_text(_record_field(record, "document", path))
        raw_prompt = record.get("prompt")
        prompt = prompt_from_dict(raw_prompt if isinstance(raw_prompt, dict) else {"prompt_id": prompt_id})
        raw_ratings = record.get("ratings")
        ratings = None
        if raw_ratings is not None:
            if not isinstance(raw_ratings, list) or any(
                not isinstance(vote, list) or len(vote) != 3 for vote in raw_ratings
            ):
                raise InputError("BAD_RECORD", f"{path}: ratings must be a list of [bool, bool, bool]")
            ratings = tuple(tuple(bool(flag) for flag in vote) for vote in raw_ratings)
        seed = record.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise InputError("BAD_RECORD", f"{path}: seed must be an integer")
        out.append(
            StrategyEvalRecord.from_report(
                prompt_id, validate(document, prompt, config), ratings=ratings, seed=seed
            )
        )
    return out


def _eval_has_section(report: MetricReport, records: list[StrategyEvalRecord]) -> None:
    """HAS mean/std and the rank correlation with the aggregate score.

    Both are gated by the same sub-50% validity rule as the other
    strategy-level metrics.
    """
    valid_pct = report.values.get("valid_pct")
    gate = report.reasons.get("viol_sev")
    if valid_pct is None or gate is not None:
        for name in ("has_mean", "has_std", "ecpo_has_spearman"):
            report.set_na(name, gate or report.reasons.get("valid_pct", NO_RATINGS))
        return
    rated = [r for r in records if r.ratings]
    if not rated:
        for name in ("has_mean", "has_std", "ecpo_has_spearman"):
            report.set_na(name, NO_RATINGS)
        return
    mean, std = has_aggregate(rated)
    report.set("has_mean", mean)
    report.set("has_std", std)
    if len(rated) < 2:
        report.set_na("ecpo_has_spearman", DEGENERATE)
        return
    weights = (0.5, 0.3, 0.2)
    scores = []
    for record in rated:
        items = [all(vote[i] for vote in record.ratings) for i in range(3)]
        scores.append(sum(w * float(flag) for w, flag in zip(weights, items)))
    correlation = spearman([r.report.ecpo for r in rated], scores)
    if correlation is None:
        report.set_na("ecpo_has_spearman", DEGENERATE)
    else:
        report.set("ecpo_has_spearman", correlation)


def cmd_eval(args, config: RunConfig) -> list[str]:
    records = _read_jsonl(args.records)
    by_kind: dict[str, list[dict]] = {}
    for record in records:
        kind = _record_field(record, "kind", args.records)
        if kind not in ("strategy", "labels", "classification", "text"):
            raise InputError("BAD_RECORD", f"{args.records}: unknown record kind {kind!r}")
        by_kind.setdefault(kind, []).append(record)

    report = MetricReport(config_echo=config.echo())
    report.counts["records"] = len(records)

    if "labels" in by_kind:
        samples = [
            LabelSetSample.from_lists(
                _record_field(r, "truth", args.records), _record_field(r, "prediction", args.records)
            )
            for r in by_kind["labels"]
        ]
        report.counts["labels"] = len(samples)
        try:
            iou, emr, f1 = multilabel_metrics(samples, epsilon=config.epsilon)
        except InputError as error:
            for name in ("labels_iou", "labels_emr", "labels_f1"):
                report.set_na(name, error.code)
        else:
            report.set("labels_iou", iou)
            report.set("labels_emr", emr)
            report.set("labels_f1", f1)

    if "classification" in by_kind:
        truth = [str(_record_field(r, "truth", args.records)) for r in by_kind["classification"]]
        prediction = [str(_record_field(r, "prediction", args.records)) for r in by_kind["classification"]]
        report.counts["classification"] = len(truth)
        accuracy, macro_f1 = classification_metrics(truth, prediction)
        report.set("cls_accuracy", accuracy)
        report.set("cls_macro_f1", macro_f1)

    if "text" in by_kind:
        references = [str(_record_field(r, "reference", args.records)) for r in by_kind["text"]]
        hypotheses = [str(_record_field(r, "hypothesis", args.records)) for r in by_kind["text"]]
        report.counts["text"] = len(references)
        report.set("text_bleu4", bleu4(references, hypotheses, epsilon=config.epsilon))
        report.set("text_rouge_l", rouge_l(references, hypotheses))

    if "strategy" in by_kind:
        strategy_records = _eval_strategy_records(by_kind["strategy"], config, args.records)
        report.merge(strategy_metrics(strategy_records, epsilon=config.epsilon))
        # the merged sub-report counts strategy records only; keep the total intact
        report.counts["strategy"] = report.counts.pop("records")
        report.counts["records"] = len(records)
        _eval_has_section(report, strategy_records)

    _log(report.render_table())
    return [_dumps(report.to_dict())]


def cmd_retrieve(args, config: RunConfig) -> list[str]:
    snippets = []
    for record in _read_jsonl(args.store):
        if not isinstance(record, dict):
            raise InputError("BAD_RECORD", f"{args.store}: snippet records must be objects")
        snippets.append(snippet_from_dict(record))
    store = load_store(snippets)
    scorer = LexicalScorer()
    lines = []
    for record in _read_jsonl(args.prompt):
        if isinstance(record, dict) and isinstance(record.get("prompt"), dict):
            record = record["prompt"]
        prompt = prompt_from_dict(record if isinstance(record, dict) else {})
        query = build_query(prompt.z, prompt.driver, prompt.vehicle)
        result = retrieve(store, query, config.top_k, scorer=scorer)
        by_id = {snippet.snippet_id: snippet for snippet in store.snapshot()}
        ranked_snippets = [by_id[entry.snippet_id] for entry in result.ranked]
        compressed = compress(ranked_snippets, config.token_budget)
        lines.append(
            _dumps(
                {
                    "kind": "retrieval",
                    "prompt_id": prompt.prompt_id,
                    "store_version": result.store_version,
                    "scorer": result.scorer_kind,
                    "query": {
                        "jurisdiction": query.jurisdiction,
                        "operating_mode": query.operating_mode,
                        "sensitivity_terms": list(query.sensitivity_terms),
                        "situation_terms": list(query.situation_terms),
                    },
                    "ranked": [
                        {
                            "snippet_id": entry.snippet_id,
                            "layer": by_id[entry.snippet_id].layer,
                            "clause_id": by_id[entry.snippet_id].clause_id,
                            "score": entry.score,
                            "text": by_id[entry.snippet_id].text,
                        }
                        for entry in result.ranked
                    ],
                    "compressed": [
                        {
                            "snippet_id": entry.snippet_id,
                            "clause_id": entry.clause_id,
                            "layer": entry.layer,
                            "text": entry.text,
                        }
                        for entry in compressed
                    ],
                    "config": config.echo(),
                }
            )
        )
    return lines


def cmd_mixpair(args, config: RunConfig) -> list[str]:
    in_samples = _load_samples(args.in_cabin)
    out_samples = _load_samples(args.out_of_cabin)
    seed = config.seeds[0]
    paired = pair_mixed(in_samples, out_samples, seed=seed, block_size=config.block_size)
    _log(f"mixpair: {len(paired)} merged records (seed={seed}, block_size={config.block_size})")
    return [_dumps(sample_to_dict(record)) for record in paired]


def cmd_stratify(args, config: RunConfig) -> list[str]:
    records = _load_samples(args.records)
    groups = stratify(records, config.label_vocab())
    membership = {}
    for group, members in groups.items():
        for record in members:
            membership[id(record)] = group
    counts = {group: len(members) for group, members in groups.items()}
    _log(f"stratify: {_dumps(counts)}")
    return [
        _dumps(
            {
                "kind": "stratum",
                "prompt_id": record.prompt.prompt_id,
                "split": record.split,
                "group": membership[id(record)],
            }
        )
        for record in records
    ]


HANDLERS = {
    "validate": cmd_validate,
    "pairs": cmd_pairs,
    "eval": cmd_eval,
    "retrieve": cmd_retrieve,
    "mixpair": cmd_mixpair,
    "stratify": cmd_stratify,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecpo", description="Batch pipelines for policy validation, pairing, and evaluation."
    )
    parser.add_argument("--config", help="JSON run-config file; flags below override it")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--seed", type=int, help="override the config seed list with one seed")
    parser.add_argument("--top-k", type=int, dest="top_k", help="override retrieval depth")
    parser.add_argument("--weights", help="override score weights as w_core,w_evd,w_str")
    commands = parser.add_subparsers(dest="command", required=True)

    cmd = commands.add_parser("validate", help="score policy documents against their prompts")
    cmd.add_argument("--policies", required=True, help="JSONL of {prompt_id, candidate_id?, document}")
    cmd.add_argument("--prompts", required=True, help="JSONL of prompt or sample records")

    cmd = commands.add_parser("pairs", help="build a weighted preference dataset from candidate sets")
    cmd.add_argument("--candidates", required=True, help="JSONL of {prompt_id, prompt?, candidates: [...]}")

    cmd = commands.add_parser("eval", help="run the offline metric protocol over mixed-kind records")
    cmd.add_argument("--records", required=True, help="JSONL of kind-tagged evaluation records")

    cmd = commands.add_parser("retrieve", help="rank and compress constraint snippets for prompts")
    cmd.add_argument("--store", required=True, help="JSONL of constraint snippets")
    cmd.add_argument("--prompt", required=True, help="JSONL of prompt or sample records")

    cmd = commands.add_parser("mixpair", help="pair in-cabin with out-of-cabin samples, split-preserving")
    cmd.add_argument("--in-cabin", required=True, dest="in_cabin", help="JSONL of sample records")
    cmd.add_argument("--out-of-cabin", required=True, dest="out_of_cabin", help="JSONL of sample records")

    cmd = commands.add_parser("stratify", help="partition samples into scenario-criticality groups")
    cmd.add_argument("--records", required=True, help="JSONL of sample records")
    return parser


def _parse_weights(raw: str) -> tuple[float, float, float]:
    parts = raw.split(",")
    try:
        values = tuple(float(part) for part in parts)
    except ValueError:
        raise ConfigError("BAD_WEIGHTS", f"weights must be three comma-separated numbers, got {raw!r}")
    if len(values) != 3:
        raise ConfigError("BAD_WEIGHTS", f"weights must be three comma-separated numbers, got {raw!r}")
    return values


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    if args.top_k is not None:
        overrides["top_k"] = args.top_k
    if args.weights is not None:
        overrides["ecpo_weights"] = _parse_weights(args.weights)
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve_config(args)
        lines = HANDLERS[args.command](args, config)
        _emit(lines, args.out)
    except InputError as error:
        _log(f"error: {error}")
        return 1
    except ConfigError as error:
        _log(f"error: {error}")
        return 2
    except InvariantError as error:
        _log(f"error: {error}")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
