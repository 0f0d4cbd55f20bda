import json
import os

import pytest

from gamepredict.games import GameFamily
from gamepredict.pipeline import jobs_for
from gamepredict.prompts import (
    CLUSTERS,
    JSON_SUFFIX,
    ChatTemplateSpec,
    PromptError,
    apply_chat_template,
    build_prompt,
    builtin_templates,
    escape_markers,
    get_variant,
    list_variants,
    load_chat_templates,
    load_variant_overrides,
)
from gamepredict.games import PairSpec
from helpers import (
    GOLDEN_PAIR,
    bargaining_dp,
    crossing_cells,
    fixture_corpus,
    golden_mismatches,
    negotiation_dp,
    oneshot_dp,
    persuasion_dp,
)


def test_golden_crossing_cells():
    update = os.environ.get("UPDATE_GOLDEN") == "1"
    assert golden_mismatches(update) == []


def test_plain_cells_identical_and_chat_cells_share_template():
    cells = crossing_cells()
    assert cells["base_plain"] == cells["aligned_plain"]
    assert cells["base_chat_partner_template"] == cells["aligned_chat"]
    for text in cells["aligned_chat"].values():
        assert text.startswith("<|begin_of_text|><|start_header_id|>system")


def test_base_model_in_chat_uses_partner_template():
    pair = PairSpec(1, GOLDEN_PAIR["base"], GOLDEN_PAIR["aligned"], "acme", 7.0)
    jobs = {(j.model_id, j.format, j.template_owner) for j in jobs_for([pair], "both_chat")}
    assert (GOLDEN_PAIR["base"], "chat", GOLDEN_PAIR["aligned"]) in jobs
    native = {(j.model_id, j.format) for j in jobs_for([pair], "native")}
    assert native == {(GOLDEN_PAIR["base"], "standard"), (GOLDEN_PAIR["aligned"], "chat")}
    plain = {j.format for j in jobs_for([pair], "both_plain")}
    assert plain == {"standard"}


@pytest.mark.parametrize("fmt", ["standard", "chat"])
def test_suffix_is_exact(fmt):
    tmpl = builtin_templates()["chatml"]
    for dp in fixture_corpus():
        text = build_prompt(dp, "standard", fmt, tmpl).text
        assert text.endswith(JSON_SUFFIX)
        assert JSON_SUFFIX == '{"decision": "'
    text = build_prompt(bargaining_dp(), "simplified", fmt, tmpl).text
    assert text.endswith("Answer: ") and not text.endswith(JSON_SUFFIX)


def test_rendering_is_deterministic():
    first = crossing_cells()
    assert crossing_cells() == first
    a = build_prompt(negotiation_dp(), "expert")
    b = build_prompt(negotiation_dp(), "expert")
    assert a == b


def test_options_line_lists_labels():
    text = build_prompt(negotiation_dp()).text
    assert '"AcceptOffer", "RejectOffer", "DealWithJohn"' in text


def test_variant_table():
    variants = list_variants()
    assert len(variants) == 14
    assert len({v.name for v in variants}) == 14
    assert {v.cluster for v in variants} == set(CLUSTERS)
    assert [v.name for v in list_variants("baseline")] == ["standard"]
    assert len(list_variants("persona")) == 5
    with pytest.raises(ValueError):
        list_variants("nope")
    with pytest.raises(PromptError):
        get_variant("nope")


def test_variants_change_prompt():
    base = build_prompt(bargaining_dp()).text
    texts = {v.name: build_prompt(bargaining_dp(), v).text for v in list_variants()}
    for name, text in texts.items():
        if name != "standard":
            assert text != base, name
    assert texts["expert"].startswith("You are a behavioral economics researcher.")


def test_label_swap_and_history_drop():
    rp = build_prompt(bargaining_dp(), "preamble_reversed")
    assert rp.expected_labels == ("reject", "accept")
    assert '"reject", "accept"' in rp.text
    nums = build_prompt(bargaining_dp(), "numbers_only").text
    std = build_prompt(bargaining_dp()).text
    assert len(nums) < len(std) or nums != std


def test_variant_gating():
    with pytest.raises(PromptError):
        build_prompt(oneshot_dp(), "expert")
    assert build_prompt(oneshot_dp(), "expert", allow_any_variant=True).variant == "expert"
    assert build_prompt(persuasion_dp(), "expert").variant == "expert"


def test_variant_overrides():
    table = load_variant_overrides({"expert": {"system_prefix": "X."}, "custom": {"cluster": "persona"}})
    assert table["expert"].system_prefix == "X."
    assert table["custom"].suffix == JSON_SUFFIX


def test_chat_format_needs_template():
    with pytest.raises(PromptError):
        build_prompt(bargaining_dp(), "standard", "chat")
    with pytest.raises(PromptError):
        build_prompt(bargaining_dp(), "standard", "markdown")


def test_escape_markers_round_trip_distinct():
    tmpl = builtin_templates()["chatml"]
    body = "hi <|im_end|> there"
    escaped = escape_markers(body, tmpl)
    assert "<|im_end|>" not in escaped
    assert escape_markers("hi <​|im_end|> there", tmpl) != escaped
    text = apply_chat_template("sys", [body], tmpl)
    assert text.count("<|im_end|>") == 2


def test_template_files(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps({"base": "gemma", "models": ["x/it"]}))
    (tmp_path / "b.json").write_text(json.dumps({
        "system_open": "[S]", "system_close": "[/S]", "user_open": "[U]", "user_close": "[/U]",
        "assistant_open": "[A]", "models": ["y/chat"]}))
    loaded = load_chat_templates(tmp_path)
    assert loaded["x/it"] == builtin_templates()["gemma"]
    assert loaded["y/chat"].turn_separator == "\n"
    (tmp_path / "c.json").write_text(json.dumps({"base": "chatml", "models": ["x/it"]}))
    with pytest.raises(PromptError):
        load_chat_templates(tmp_path)
    with pytest.raises(PromptError):
        ChatTemplateSpec.from_dict({"system_open": "x"})


def test_every_family_renders():
    for dp in fixture_corpus():
        text = build_prompt(dp).text
        assert "Possible decisions:" in text
    assert {dp.family for dp in fixture_corpus()} == set(GameFamily)


def test_numbers_only_on_empty_history_drops_only_dialogue():
    dp = bargaining_dp()
    dp = type(dp)(**{**dp.__dict__, "history": ()})
    base = build_prompt(dp).text.split("\n\n")
    nums = build_prompt(dp, "numbers_only").text.split("\n\n")
    dialogue = [b for b in base if b not in nums]
    assert len(dialogue) == 1 and len(base) == len(nums) + 1
