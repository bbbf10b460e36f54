import json

import pytest

from ecpo.cli import main
from ecpo.context import prompt_to_dict, sample_to_dict
from ecpo.store import snippet_to_dict
from conftest import make_sample


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return str(path)


def run_cli(argv, capsys):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    lines = [json.loads(line) for line in captured.out.splitlines() if line]
    return code, lines, captured.err


@pytest.fixture
def rain_files(tmp_path, rain_prompt, rain_policy_dict):
    prompts = write_jsonl(tmp_path / "prompts.jsonl", [prompt_to_dict(rain_prompt)])
    policies = write_jsonl(
        tmp_path / "policies.jsonl",
        [{"prompt_id": "rain-01", "candidate_id": "c1", "document": rain_policy_dict}],
    )
    return prompts, policies


# --- validate ---------------------------------------------------------------------------


def test_validate_end_to_end(rain_files, capsys):
    prompts, policies = rain_files
    code, lines, err = run_cli(["validate", "--policies", policies, "--prompts", prompts], capsys)
    assert code == 0
    assert len(lines) == 1
    record = lines[0]
    assert (record["kind"], record["prompt_id"], record["candidate_id"]) == ("report", "rain-01", "c1")
    assert record["report"]["ecpo"] == 1.0
    assert record["config"]["ecpo_weights"] == [0.5, 0.3, 0.2]
    assert "valid_pct=100.00" in err


def test_validate_defaults_candidate_id_to_index(tmp_path, rain_prompt, rain_policy_dict, capsys):
    prompts = write_jsonl(tmp_path / "p.jsonl", [prompt_to_dict(rain_prompt)])
    policies = write_jsonl(tmp_path / "d.jsonl", [{"prompt_id": "rain-01", "document": rain_policy_dict}])
    code, lines, _ = run_cli(["validate", "--policies", policies, "--prompts", prompts], capsys)
    assert code == 0
    assert lines[0]["candidate_id"] == "0"


def test_validate_out_file_reruns_byte_identical(rain_files, tmp_path, capsys):
    prompts, policies = rain_files
    out_a = tmp_path / "a.jsonl"
    out_b = tmp_path / "b.jsonl"
    for out in (out_a, out_b):
        code = main(["--out", str(out), "validate", "--policies", policies, "--prompts", prompts])
        assert code == 0
    capsys.readouterr()
    assert out_a.read_bytes() == out_b.read_bytes()
    assert out_a.read_bytes().endswith(b"\n")


def test_validate_empty_input_writes_nothing(tmp_path, rain_prompt, capsys):
    prompts = write_jsonl(tmp_path / "p.jsonl", [prompt_to_dict(rain_prompt)])
    policies = tmp_path / "empty.jsonl"
    policies.write_text("", encoding="utf-8")
    out = tmp_path / "out.jsonl"
    code = main(["--out", str(out), "validate", "--policies", str(policies), "--prompts", prompts])
    capsys.readouterr()
    assert code == 0
    assert out.read_text(encoding="utf-8") == ""


def test_validate_unknown_prompt_exits_1(tmp_path, rain_prompt, rain_policy_dict, capsys):
    prompts = write_jsonl(tmp_path / "p.jsonl", [prompt_to_dict(rain_prompt)])
    policies = write_jsonl(tmp_path / "d.jsonl", [{"prompt_id": "ghost", "document": rain_policy_dict}])
    code, lines, err = run_cli(["validate", "--policies", policies, "--prompts", prompts], capsys)
    assert code == 1
    assert not lines
    assert "UNKNOWN_PROMPT" in err


def test_validate_missing_file_exits_1(tmp_path, rain_prompt, capsys):
    prompts = write_jsonl(tmp_path / "p.jsonl", [prompt_to_dict(rain_prompt)])
    code, _, err = run_cli(["validate", "--policies", tmp_path / "nope.jsonl", "--prompts", prompts], capsys)
    assert code == 1
    assert "MISSING_FILE" in err


def test_weights_flag_overrides_config(rain_files, capsys):
    prompts, policies = rain_files
    code, lines, _ = run_cli(
        ["--weights", "0.7,0.15,0.15", "validate", "--policies", policies, "--prompts", prompts], capsys
    )
    assert code == 0
    assert lines[0]["report"]["weights_used"] == [0.7, 0.15, 0.15]
    assert lines[0]["config"]["ecpo_weights"] == [0.7, 0.15, 0.15]


def test_bad_weights_flag_exits_2(rain_files, capsys):
    prompts, policies = rain_files
    for raw in ("0.5,0.5", "a,b,c", "0.6,0.3,0.3"):
        code, lines, err = run_cli(
            ["--weights", raw, "validate", "--policies", policies, "--prompts", prompts], capsys
        )
        assert code == 2
        assert not lines
        assert "BAD_WEIGHTS" in err


def test_config_file_governs_run(rain_files, tmp_path, capsys):
    prompts, policies = rain_files
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps({"ecpo_weights": [0.4, 0.3, 0.3], "top_k": 2}), encoding="utf-8")
    code, lines, _ = run_cli(
        ["--config", config_path, "validate", "--policies", policies, "--prompts", prompts], capsys
    )
    assert code == 0
    assert lines[0]["config"]["ecpo_weights"] == [0.4, 0.3, 0.3]
    assert lines[0]["config"]["top_k"] == 2


def test_bad_config_file_exits_2(rain_files, tmp_path, capsys):
    prompts, policies = rain_files
    config_path = tmp_path / "bad.json"
    config_path.write_text(json.dumps({"ecpo_weights": [0.9, 0.3, 0.3]}), encoding="utf-8")
    code, _, err = run_cli(
        ["--config", config_path, "validate", "--policies", policies, "--prompts", prompts], capsys
    )
    assert code == 2
    assert "BAD_WEIGHTS" in err


# --- pairs ------------------------------------------------------------------------------


def test_pairs_builds_dataset(tmp_path, rain_prompt, rain_policy_dict, capsys):
    broken = {"objectives": "x", "constraints": {}, "actions": []}
    candidates = write_jsonl(
        tmp_path / "c.jsonl",
        [
            {
                "prompt_id": "rain-01",
                "prompt": prompt_to_dict(rain_prompt),
                "candidates": [
                    {"candidate_id": "good", "document": rain_policy_dict},
                    {"candidate_id": "bad", "document": broken},
                ],
            }
        ],
    )
    code, lines, err = run_cli(["pairs", "--candidates", candidates], capsys)
    assert code == 0
    assert len(lines) == 1
    record = lines[0]
    assert record["prompt_id"] == "rain-01"
    assert json.loads(record["chosen"]) == rain_policy_dict
    assert json.loads(record["rejected"]) == broken
    assert record["gap"] == 1.0
    assert record["weight"] == 1.0
    assert record["prompt"]["prompt_id"] == "rain-01"
    assert "1 pairs from 1 candidate sets" in err


def test_pairs_skips_gapless_sets(tmp_path, rain_policy_dict, capsys):
    candidates = write_jsonl(
        tmp_path / "c.jsonl",
        [
            {
                "prompt_id": "p1",
                "candidates": [
                    {"candidate_id": "a", "document": rain_policy_dict},
                    {"candidate_id": "b", "document": rain_policy_dict},
                ],
            }
        ],
    )
    code, lines, err = run_cli(["pairs", "--candidates", candidates], capsys)
    assert code == 0
    assert lines == []
    assert "skip prompt 'p1'" in err


def test_pairs_duplicate_prompt_exits_1(tmp_path, rain_policy_dict, capsys):
    row = {"prompt_id": "p1", "candidates": [{"document": rain_policy_dict}]}
    candidates = write_jsonl(tmp_path / "c.jsonl", [row, row])
    code, _, err = run_cli(["pairs", "--candidates", candidates], capsys)
    assert code == 1
    assert "DUPLICATE_ID" in err


# --- eval -------------------------------------------------------------------------------


def test_eval_mixed_kinds(tmp_path, rain_prompt, rain_policy_dict, capsys):
    no_rationale = {
        "objectives": "steady pace",
        "constraints": {"legal_regulations": "obey limits"},
        "actions": [{"type": "DrivingSuggestion", "parameters": {"text": "steady"}, "evidence": {"labels": ["x"]}}],
    }
    records = write_jsonl(
        tmp_path / "r.jsonl",
        [
            {"kind": "labels", "truth": ["a", "b"], "prediction": ["a", "b"]},
            {"kind": "classification", "truth": "anger", "prediction": "anger"},
            {"kind": "text", "reference": "please slow down right now", "hypothesis": "please slow down right now"},
            {
                "kind": "strategy",
                "prompt_id": "rain-01",
                "prompt": prompt_to_dict(rain_prompt),
                "document": rain_policy_dict,
                "ratings": [[True, True, True], [True, True, True]],
            },
            {
                "kind": "strategy",
                "prompt_id": "p2",
                "document": no_rationale,
                "ratings": [[False, False, False]],
            },
        ],
    )
    code, lines, err = run_cli(["eval", "--records", records], capsys)
    assert code == 0
    assert len(lines) == 1
    values = lines[0]["values"]
    assert values["labels_iou"] == 100.0
    assert values["labels_emr"] == 100.0
    assert values["cls_accuracy"] == 100.0
    assert values["cls_macro_f1"] == 100.0
    assert values["text_bleu4"] == pytest.approx(100.0, abs=1e-6)
    assert values["text_rouge_l"] == 100.0
    assert values["valid_pct"] == 100.0
    assert values["has_mean"] == 50.0
    assert values["has_std"] == 0.0
    assert values["ecpo_has_spearman"] == 1.0
    assert lines[0]["counts"]["records"] == 5
    assert lines[0]["config"]["ecpo_weights"] == [0.5, 0.3, 0.2]
    assert "valid_pct" in err


def test_eval_empty_label_sets_reported_na(tmp_path, capsys):
    records = write_jsonl(
        tmp_path / "r.jsonl",
        [{"kind": "labels", "truth": [], "prediction": []}],
    )
    code, lines, _ = run_cli(["eval", "--records", records], capsys)
    assert code == 0
    values, reasons = lines[0]["values"], lines[0]["reasons"]
    for name in ("labels_iou", "labels_emr", "labels_f1"):
        assert values[name] is None
        assert reasons[name] == "NO_ELIGIBLE_SAMPLES"


def test_eval_gates_has_below_validity_floor(tmp_path, rain_policy_dict, capsys):
    rows = [
        {
            "kind": "strategy",
            "prompt_id": f"p{i}",
            "document": "{broken" if i else rain_policy_dict,
            "ratings": [[True, True, True]],
        }
        for i in range(3)
    ]
    records = write_jsonl(tmp_path / "r.jsonl", rows)
    code, lines, _ = run_cli(["eval", "--records", records], capsys)
    assert code == 0
    values, reasons = lines[0]["values"], lines[0]["reasons"]
    assert values["valid_pct"] == pytest.approx(100 / 3)
    for name in ("viol_sev", "low_ctrl_pct", "haz_f1", "has_mean", "has_std", "ecpo_has_spearman"):
        assert values[name] is None
        assert reasons[name] == "VALIDITY_BELOW_50"


def test_eval_without_ratings_reports_no_ratings(tmp_path, rain_policy_dict, capsys):
    records = write_jsonl(
        tmp_path / "r.jsonl",
        [{"kind": "strategy", "prompt_id": "p1", "document": rain_policy_dict}],
    )
    code, lines, _ = run_cli(["eval", "--records", records], capsys)
    assert code == 0
    assert lines[0]["reasons"]["has_mean"] == "NO_RATINGS"


def test_eval_unknown_kind_exits_1(tmp_path, capsys):
    records = write_jsonl(tmp_path / "r.jsonl", [{"kind": "mystery"}])
    code, _, err = run_cli(["eval", "--records", records], capsys)
    assert code == 1
    assert "BAD_RECORD" in err


# --- retrieve ---------------------------------------------------------------------------


def test_retrieve_ranks_and_compresses(tmp_path, layered_snippets, comfort_prompt, capsys):
    store = write_jsonl(tmp_path / "s.jsonl", [snippet_to_dict(s) for s in layered_snippets])
    prompts = write_jsonl(tmp_path / "p.jsonl", [prompt_to_dict(comfort_prompt)])
    code, lines, _ = run_cli(["retrieve", "--store", store, "--prompt", prompts], capsys)
    assert code == 0
    record = lines[0]
    assert record["kind"] == "retrieval"
    assert record["prompt_id"] == "comfort-01"
    assert record["store_version"] == 1
    assert record["scorer"] == "lexical"
    assert len(record["ranked"]) == 3
    assert {entry["snippet_id"] for entry in record["ranked"]} == {"legal-001", "veh-001", "drv-001"}
    assert all(set(entry) == {"snippet_id", "layer", "clause_id", "score", "text"} for entry in record["ranked"])
    # compression orders whole snippets legal > vehicle > driver
    layers = [entry["layer"] for entry in record["compressed"]]
    assert layers == sorted(layers, key=("legal", "vehicle", "driver").index)
    assert "sensitivity_terms" in record["query"] and "situation_terms" in record["query"]


def test_retrieve_top_k_flag(tmp_path, layered_snippets, comfort_prompt, capsys):
    store = write_jsonl(tmp_path / "s.jsonl", [snippet_to_dict(s) for s in layered_snippets])
    prompts = write_jsonl(tmp_path / "p.jsonl", [prompt_to_dict(comfort_prompt)])
    code, lines, _ = run_cli(["--top-k", "1", "retrieve", "--store", store, "--prompt", prompts], capsys)
    assert code == 0
    assert len(lines[0]["ranked"]) == 1
    assert lines[0]["config"]["top_k"] == 1


def test_retrieve_empty_store_exits_1(tmp_path, comfort_prompt, capsys):
    store = tmp_path / "s.jsonl"
    store.write_text("", encoding="utf-8")
    prompts = write_jsonl(tmp_path / "p.jsonl", [prompt_to_dict(comfort_prompt)])
    code, _, err = run_cli(["retrieve", "--store", store, "--prompt", prompts], capsys)
    assert code == 1
    assert "EMPTY_STORE" in err


# --- mixpair ----------------------------------------------------------------------------


def mix_inputs(tmp_path):
    ins = [
        make_sample("in-a", driver_labels=("anxiety",), stages=("driver is anxious", "", "")),
        make_sample("in-b", driver_labels=("neutral",), stages=("calm driver", "", "")),
    ]
    outs = [
        make_sample("out-a", scene_labels=("rain",), stages=("", "heavy rain", "")),
        make_sample("out-b", scene_labels=("traffic jam",), stages=("", "dense traffic", "")),
    ]
    in_path = write_jsonl(tmp_path / "in.jsonl", [sample_to_dict(s) for s in ins])
    out_path = write_jsonl(tmp_path / "out.jsonl", [sample_to_dict(s) for s in outs])
    return in_path, out_path


def test_mixpair_merges_deterministically(tmp_path, capsys):
    in_path, out_path = mix_inputs(tmp_path)
    out_a = tmp_path / "a.jsonl"
    out_b = tmp_path / "b.jsonl"
    for out in (out_a, out_b):
        code = main(["--seed", "7", "--out", str(out), "mixpair", "--in-cabin", in_path, "--out-of-cabin", out_path])
        assert code == 0
    err = capsys.readouterr().err
    assert out_a.read_bytes() == out_b.read_bytes()
    assert "seed=7" in err
    records = [json.loads(line) for line in out_a.read_text(encoding="utf-8").splitlines()]
    assert len(records) == 2
    for record in records:
        assert "+" in record["prompt"]["prompt_id"]
        assert record["split"] == "train"


def test_mixpair_missing_split_partner_exits_1(tmp_path, capsys):
    ins = [make_sample("in-a", split="test")]
    outs = [make_sample("out-a", split="train")]
    in_path = write_jsonl(tmp_path / "in.jsonl", [sample_to_dict(s) for s in ins])
    out_path = write_jsonl(tmp_path / "out.jsonl", [sample_to_dict(s) for s in outs])
    code, _, err = run_cli(["mixpair", "--in-cabin", in_path, "--out-of-cabin", out_path], capsys)
    assert code == 1
    assert "EMPTY_SPLIT" in err


# --- stratify ---------------------------------------------------------------------------


def test_stratify_reports_groups_in_input_order(tmp_path, capsys):
    records = [
        make_sample("nominal-1", labels={"emotion": "neutral", "behavior": "normal_driving",
                                         "traffic_scene": "smooth_traffic", "vehicle_motion": "forward_moving"}),
        make_sample("driver-1", labels={"emotion": "anger", "behavior": "normal_driving",
                                        "traffic_scene": "smooth_traffic", "vehicle_motion": "forward_moving"}),
        make_sample("env-1", labels={"emotion": "neutral", "behavior": "normal_driving",
                                     "traffic_scene": "traffic_jam", "vehicle_motion": "forward_moving"}),
        make_sample("both-1", labels={"emotion": "anxiety", "behavior": "looking_around",
                                      "traffic_scene": "rain", "vehicle_motion": "reversing"}),
    ]
    path = write_jsonl(tmp_path / "records.jsonl", [sample_to_dict(s) for s in records])
    code, lines, err = run_cli(["stratify", "--records", path], capsys)
    assert code == 0
    assert [line["prompt_id"] for line in lines] == ["nominal-1", "driver-1", "env-1", "both-1"]
    assert [line["group"] for line in lines] == [
        "nominal", "driver_critical", "env_critical", "interaction_critical",
    ]
    assert all(line["kind"] == "stratum" for line in lines)
    assert '"interaction_critical":1' in err


def test_stratify_missing_head_exits_1(tmp_path, capsys):
    path = write_jsonl(tmp_path / "records.jsonl", [sample_to_dict(make_sample("x", labels={"emotion": "anger"}))])
    code, _, err = run_cli(["stratify", "--records", path], capsys)
    assert code == 1
    assert "MISSING_HEAD" in err
