from __future__ import annotations

import json
import math

import pytest

from autoskill.errors import (
    InvalidAction,
    MergeWithoutTarget,
    MissingField,
    MissingHeading,
    MissingSlot,
    Unparseable,
)
from autoskill.gateway import (
    MockLLM,
    MockScenario,
    PromptRole,
    complete_with_json_retry,
    extract_json_object,
    parse_extraction_output,
    parse_judge_output,
    parse_merge_output,
    render_prompt,
)

CASE_STUDY_ID = "a407043f-d6b0-4760-821e-86b538c149c1"


class TestTemplates:
    def test_rewrite_slots(self):
        system, user = render_prompt(
            PromptRole.REWRITE, {"history": "user: hi", "query": "make it formal"})
        assert system.startswith("You are a retrieval query rewriter.")
        assert user.endswith("Current query: make it formal")
        assert "user: hi" in user

    def test_deterministic(self):
        slots = {"history": "user: a", "query": "b"}
        assert render_prompt(PromptRole.REWRITE, slots) == render_prompt(PromptRole.REWRITE, slots)

    def test_missing_required_slot(self):
        with pytest.raises(MissingSlot):
            render_prompt(PromptRole.REWRITE, {"history": "user: hi"})

    def test_judge_requires_neighbor(self):
        with pytest.raises(MissingSlot):
            render_prompt(PromptRole.JUDGE, {"candidate": "{}"})

    def test_chat_optional_context_present(self):
        system, _ = render_prompt(
            PromptRole.CHAT,
            {"context": "Retrieved skill list\nSearch query: x", "history": "user: hi"})
        assert "Retrieved skill list" in system

    def test_chat_optional_context_absent(self):
        system, _ = render_prompt(PromptRole.CHAT, {"history": "user: hi"})
        assert "Retrieved skill list" not in system
        assert "<<" not in system

    def test_no_unfilled_slots_leak(self):
        for role, slots in [
            (PromptRole.EXTRACT, {"queries": "1. q"}),
            (PromptRole.MERGE, {"existing": "{}", "candidate": "{}"}),
            (PromptRole.JUDGE, {"candidate": "{}", "neighbor": "{}"}),
        ]:
            system, user = render_prompt(role, slots)
            assert "<<" not in system and "<<" not in user


class TestJsonExtraction:
    def test_bare_object(self):
        assert extract_json_object('{"a": 1}') == {"a": 1}

    def test_fenced(self):
        text = 'Sure, here you go:\n```json\n{"a": [1, 2]}\n```\nDone.'
        assert extract_json_object(text) == {"a": [1, 2]}

    def test_prose_wrapped(self):
        assert extract_json_object('Result: {"x": {"y": "}"}} trailing') == {"x": {"y": "}"}}

    def test_braces_inside_strings(self):
        assert extract_json_object('{"s": "a { b } c"}') == {"s": "a { b } c"}

    def test_unparseable(self):
        with pytest.raises(Unparseable):
            extract_json_object("no json here")


class TestExtractionParsing:
    def test_valid_candidates(self):
        text = json.dumps({"skills": [{
            "name": "professional_text_rewrite",
            "description": "rewrite casual text formally",
            "prompt": "# Goal\nRewrite.",
            "triggers": ["rewrite"],
            "tags": ["writing"],
            "examples": [],
            "confidence": 0.9,
        }]})
        out = parse_extraction_output(text)
        assert len(out) == 1
        assert out[0].name == "professional_text_rewrite"
        assert out[0].confidence == 0.9

    def test_empty_skills(self):
        assert parse_extraction_output('{"skills": []}') == []

    def test_invalid_element_dropped_not_fatal(self, caplog):
        text = json.dumps({"skills": [
            {"name": "ok", "confidence": 0.7},
            {"name": "", "confidence": 0.7},
            {"name": "bad-conf", "confidence": 1.5},
            "not an object",
        ]})
        with caplog.at_level("WARNING"):
            out = parse_extraction_output(text)
        assert [c.name for c in out] == ["ok"]
        assert len([r for r in caplog.records if "dropping" in r.message]) == 3

    def test_duplicate_triggers_deduped(self):
        text = json.dumps({"skills": [{"name": "x", "confidence": 0.8,
                                       "triggers": ["a", "a", "b"]}]})
        assert parse_extraction_output(text)[0].triggers == ["a", "b"]

    def test_missing_skills_array(self):
        with pytest.raises(Unparseable):
            parse_extraction_output('{"other": 1}')


class TestJudgeParsing:
    def test_merge_with_case_study_target(self):
        text = json.dumps({"action": "merge", "target_skill_id": CASE_STUDY_ID,
                           "reason": "same capability"})
        decision = parse_judge_output(text)
        assert decision.action == "merge"
        assert decision.target_skill_id == CASE_STUDY_ID

    def test_add_clears_target(self):
        decision = parse_judge_output(
            '{"action": "add", "target_skill_id": "stray", "reason": ""}')
        assert decision.action == "add" and decision.target_skill_id is None

    def test_merge_without_target(self):
        with pytest.raises(MergeWithoutTarget):
            parse_judge_output('{"action": "merge", "target_skill_id": null, "reason": ""}')

    def test_unknown_action(self):
        with pytest.raises(InvalidAction):
            parse_judge_output('{"action": "keep", "reason": ""}')


class TestMergeParsing:
    GOOD = {
        "name": "n", "description": "d",
        "prompt": "# Goal\ng\n\n# Constraints & Style\n- c",
        "triggers": ["t", "t"], "tags": [], "examples": [],
    }

    def test_ok_and_dedup(self):
        out = parse_merge_output(json.dumps(self.GOOD))
        assert out["triggers"] == ["t"]
        assert out["name"] == "n"

    @pytest.mark.parametrize("missing", ["name", "description", "prompt", "triggers", "tags", "examples"])
    def test_missing_field(self, missing):
        obj = {k: v for k, v in self.GOOD.items() if k != missing}
        with pytest.raises(MissingField):
            parse_merge_output(json.dumps(obj))

    def test_missing_constraints_heading(self):
        obj = dict(self.GOOD, prompt="# Goal\nonly")
        with pytest.raises(MissingHeading):
            parse_merge_output(json.dumps(obj))


class TestMockLLM:
    def test_role_detection_and_scripting(self):
        scenario = MockScenario(responses={
            PromptRole.JUDGE: [("candidate-x", '{"action": "add", "target_skill_id": null, "reason": "r"}')],
        })
        mock = MockLLM(scenario)
        system, user = render_prompt(PromptRole.JUDGE, {"candidate": "candidate-x", "neighbor": "{}"})
        assert parse_judge_output(mock.complete(system, [{"role": "user", "content": user}])).action == "add"
        assert mock.calls[0][0] is PromptRole.JUDGE

    def test_neutral_defaults_parse(self):
        mock = MockLLM()
        for role, parser in [
            (PromptRole.EXTRACT, parse_extraction_output),
            (PromptRole.JUDGE, parse_judge_output),
            (PromptRole.MERGE, parse_merge_output),
        ]:
            system, _ = render_prompt(role, {
                "queries": "q", "candidate": "{}", "neighbor": "{}", "existing": "{}"})
            parser(mock.complete(system, [{"role": "user", "content": "anything"}]))

    def test_rewrite_default_echoes_query_line(self):
        mock = MockLLM()
        system, user = render_prompt(
            PromptRole.REWRITE, {"history": "user: earlier", "query": "translate the poem"})
        assert mock.complete(system, [{"role": "user", "content": user}]) == "translate the poem"

    def test_embeddings_unit_norm_and_deterministic(self):
        mock = MockLLM(MockScenario(seed=3))
        [a], [b] = mock.embed(["hello"]), mock.embed(["hello"])
        assert a == b
        assert math.sqrt(sum(x * x for x in a)) == pytest.approx(1.0, abs=1e-9)
        assert len(a) == 32

    def test_embeddings_depend_on_seed(self):
        a = MockLLM(MockScenario(seed=1)).embed(["same text"])[0]
        b = MockLLM(MockScenario(seed=2)).embed(["same text"])[0]
        assert a != b

    def test_retry_path_appends_reminder(self):
        scenario = MockScenario(responses={
            PromptRole.JUDGE: [
                ("Output only valid JSON.", '{"action": "discard", "target_skill_id": null, "reason": ""}'),
                ("", "total garbage"),
            ],
        })
        mock = MockLLM(scenario)
        system, _ = render_prompt(PromptRole.JUDGE, {"candidate": "{}", "neighbor": "{}"})
        decision = complete_with_json_retry(mock, system, "judge this", parse_judge_output)
        assert decision.action == "discard"
        assert len(mock.calls) == 2
