"""Evidence ledger: session protocols, append-only persistence, and
deterministic replay."""

from __future__ import annotations

import json
import random
from datetime import datetime, timedelta, timezone

import pytest

from chc_gauge.battery import MemoryProtocol
from chc_gauge.config import SeparationPolicy
from chc_gauge.evidence import Judgment, Measurement
from chc_gauge.ledger import (
    Ledger,
    LedgerCorruption,
    ProtocolViolation,
    ToolPolicy,
    enforce_tool_policy,
    read_ledger_file,
    replay,
)
from chc_gauge.scoring import aggregate
from chc_gauge.taxonomy import lookup

from conftest import synthesize_ledger

TOOLS_OFF = ToolPolicy(search_enabled=False)
TOOLS_ON = ToolPolicy(search_enabled=True)


def make_ledger(tmp_path, taxonomy, min_filler=3, **kwargs) -> Ledger:
    return Ledger(tmp_path / "run.ledger", taxonomy,
                  separation=SeparationPolicy(min_filler=min_filler, min_delay_s=0),
                  **kwargs)


# --------------------------------------------------------------------------
# sessions and the separation policy

def test_open_standard_session_appends_event(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy)
    session = ledger.open_session("m1", TOOLS_OFF)
    assert session.id.startswith("sess-")
    assert ledger.events[-1].kind == "session_opened"
    assert ledger.events[-1].payload["model_id"] == "m1"


def test_recall_without_filler_is_memory_separation_violation(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy, min_filler=20)
    presentation = ledger.open_session("m1", TOOLS_OFF, kind="presentation")
    with pytest.raises(ProtocolViolation, match="memory-separation"):
        ledger.open_session("m1", TOOLS_OFF, kind="recall", parent=presentation.id)


def test_recall_opens_after_enough_filler(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy, min_filler=3)
    presentation = ledger.open_session("m1", TOOLS_OFF, kind="presentation")
    standard = ledger.open_session("m1", TOOLS_OFF)
    for i in range(3):
        ledger.record_item_presented(f"filler-{i}", standard.id,
                                     ability="K.commonsense")
    recall = ledger.open_session("m1", TOOLS_OFF, kind="recall",
                                 parent=presentation.id)
    assert recall.filler_count == 3


def test_presentations_inside_parent_do_not_count_as_filler(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy, min_filler=2)
    presentation = ledger.open_session("m1", TOOLS_OFF, kind="presentation")
    for i in range(5):
        ledger.record_item_presented(
            f"present-{i}", presentation.id, ability="MS.verbatim.set_recall",
            memory_protocol=MemoryProtocol(kind="presentation"))
    with pytest.raises(ProtocolViolation, match="memory-separation"):
        ledger.open_session("m1", TOOLS_OFF, kind="recall", parent=presentation.id)


def test_wall_clock_delay_satisfies_separation(tmp_path, taxonomy):
    now = datetime(2025, 10, 1, 12, 0, 0, tzinfo=timezone.utc)
    ledger = Ledger(tmp_path / "run.ledger", taxonomy,
                    separation=SeparationPolicy(min_filler=0, min_delay_s=3600),
                    clock=lambda: now)
    presentation = ledger.open_session("m1", TOOLS_OFF, kind="presentation")
    with pytest.raises(ProtocolViolation):
        ledger.open_session("m1", TOOLS_OFF, kind="recall", parent=presentation.id)
    now = now + timedelta(hours=2)
    recall = ledger.open_session("m1", TOOLS_OFF, kind="recall",
                                 parent=presentation.id)
    assert recall.kind == "recall"


def test_recall_for_other_model_rejected(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy, min_filler=0)
    presentation = ledger.open_session("m1", TOOLS_OFF, kind="presentation")
    with pytest.raises(ProtocolViolation, match="one-model-per-ledger"):
        ledger.open_session("m2", TOOLS_OFF, kind="recall", parent=presentation.id)


def test_recall_with_unknown_parent_rejected(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy)
    with pytest.raises(ProtocolViolation, match="unknown-parent"):
        ledger.open_session("m1", TOOLS_OFF, kind="recall", parent="sess-9999")


# --------------------------------------------------------------------------
# tool policy

def test_tool_policy_both_directions(taxonomy, tmp_path):
    ledger = make_ledger(tmp_path, taxonomy)
    on = ledger.open_session("m1", TOOLS_ON)
    off = ledger.open_session("m1", TOOLS_OFF)

    halluc = lookup(taxonomy, "MR.hallucinations").testing_notes
    assert enforce_tool_policy(halluc, on) is not None
    assert enforce_tool_policy(halluc, off) is None

    current_affairs = lookup(taxonomy, "K.culture.current_affairs").testing_notes
    assert enforce_tool_policy(current_affairs, on) is None
    violation = enforce_tool_policy(current_affairs, off)
    assert violation is not None and "enabled" in violation.message


def test_judgment_rejected_in_search_enabled_session(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy)
    session = ledger.open_session("m1", TOOLS_ON)
    with pytest.raises(ProtocolViolation, match="tool-policy"):
        ledger.record_judgment(
            Judgment("q1", session.id, "pass", "g"), ability="MR.hallucinations")


def test_current_affairs_judgment_allowed_with_search(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy)
    session = ledger.open_session("m1", TOOLS_ON)
    seq = ledger.record_judgment(
        Judgment("q1", session.id, "pass", "g"),
        ability="K.culture.current_affairs")
    assert seq == ledger.events[-1].seq


# --------------------------------------------------------------------------
# judgments

def test_judgment_on_closed_session_rejected(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy)
    session = ledger.open_session("m1", TOOLS_OFF)
    ledger.close_session(session.id)
    with pytest.raises(ProtocolViolation, match="session-closed"):
        ledger.record_judgment(Judgment("q1", session.id, "pass", "g"),
                               ability="K.commonsense")


def test_duplicate_judgment_rejected(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy)
    session = ledger.open_session("m1", TOOLS_OFF)
    judgment = Judgment("q1", session.id, "pass", "g")
    ledger.record_judgment(judgment, ability="K.commonsense")
    with pytest.raises(ProtocolViolation, match="duplicate-judgment"):
        ledger.record_judgment(judgment, ability="K.commonsense")
    # a different variant of the same item is a new data point
    seq = ledger.record_judgment(
        Judgment("q1", session.id, "pass", "g", variant_index=1),
        ability="K.commonsense")
    assert seq > 0


def test_unknown_session_rejected(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy)
    with pytest.raises(ProtocolViolation, match="unknown-session"):
        ledger.record_judgment(Judgment("q1", "sess-000042", "pass", "g"),
                               ability="K.commonsense")


def test_measurement_recorded_and_linked(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy)
    measurement = Measurement(requirement_id="librispeech-clean", metric="wer",
                              value=0.051, sample_size=2620, run_id="r1")
    seq = ledger.record_measurement(measurement,
                                    ability="A.speech_recognition.clean")
    event = ledger.events[seq - 1]
    assert event.kind == "measurement_recorded"
    assert event.payload["value"] == 0.051
    assert event.payload["requirement_id"] == "librispeech-clean"


# --------------------------------------------------------------------------
# recall protocol soundness

def build_presentation(tmp_path, taxonomy, min_filler=2):
    ledger = make_ledger(tmp_path, taxonomy, min_filler=min_filler)
    presentation = ledger.open_session("m1", TOOLS_OFF, kind="presentation")
    ledger.record_item_presented(
        "story:present", presentation.id, ability="MS.meaningful.story_recall",
        memory_protocol=MemoryProtocol(kind="presentation"))
    return ledger, presentation


RECALL = MemoryProtocol(kind="recall", of="story:present")


def test_recall_judgment_in_presentation_session_rejected(tmp_path, taxonomy):
    ledger, presentation = build_presentation(tmp_path, taxonomy)
    with pytest.raises(ProtocolViolation, match="memory-separation"):
        ledger.record_judgment(
            Judgment("story:recall", presentation.id, "pass", "g"),
            ability="MS.meaningful.story_recall", memory_protocol=RECALL)


def test_recall_judgment_in_standard_session_rejected(tmp_path, taxonomy):
    ledger, _ = build_presentation(tmp_path, taxonomy)
    standard = ledger.open_session("m1", TOOLS_OFF)
    with pytest.raises(ProtocolViolation, match="recall session"):
        ledger.record_judgment(
            Judgment("story:recall", standard.id, "pass", "g"),
            ability="MS.meaningful.story_recall", memory_protocol=RECALL)


def test_recall_judgment_accepted_in_proper_recall_session(tmp_path, taxonomy):
    ledger, presentation = build_presentation(tmp_path, taxonomy)
    standard = ledger.open_session("m1", TOOLS_OFF)
    for i in range(2):
        ledger.record_item_presented(f"filler-{i}", standard.id,
                                     ability="K.commonsense")
    recall = ledger.open_session("m1", TOOLS_OFF, kind="recall",
                                 parent=presentation.id)
    seq = ledger.record_judgment(
        Judgment("story:recall", recall.id, "fail", "g"),
        ability="MS.meaningful.story_recall", memory_protocol=RECALL)
    assert ledger.events[seq - 1].payload["memory_protocol"]["kind"] == "recall"


def test_item_level_min_filler_tightens_policy(tmp_path, taxonomy):
    ledger, presentation = build_presentation(tmp_path, taxonomy, min_filler=2)
    standard = ledger.open_session("m1", TOOLS_OFF)
    for i in range(2):
        ledger.record_item_presented(f"filler-{i}", standard.id,
                                     ability="K.commonsense")
    recall = ledger.open_session("m1", TOOLS_OFF, kind="recall",
                                 parent=presentation.id)
    strict = MemoryProtocol(kind="recall", of="story:present", min_filler=10)
    with pytest.raises(ProtocolViolation, match="10 filler"):
        ledger.record_judgment(
            Judgment("story:recall", recall.id, "pass", "g"),
            ability="MS.meaningful.story_recall", memory_protocol=strict)


def test_fuzzed_recall_in_presentation_session_always_rejected(tmp_path, taxonomy):
    rng = random.Random(2025)
    storage_leaves = [str(n.path) for n in taxonomy.walk()
                      if not n.children and str(n.path).startswith("MS.")]
    rejected = 0
    attempts = 50
    for case in range(attempts):
        ledger = Ledger(tmp_path / f"fuzz-{case}.ledger", taxonomy,
                        separation=SeparationPolicy(
                            min_filler=rng.randint(1, 5), min_delay_s=0))
        ability = rng.choice(storage_leaves)
        presentation = ledger.open_session("m1", TOOLS_OFF, kind="presentation")
        item = f"{ability}:present:{case}"
        ledger.record_item_presented(
            item, presentation.id, ability=ability,
            memory_protocol=MemoryProtocol(kind="presentation"))
        protocol = MemoryProtocol(kind="recall", of=item)
        judgment = Judgment(f"{ability}:recall:{case}", presentation.id,
                            rng.choice(["pass", "fail", "partial"]),
                            grader=f"g{rng.randint(1, 9)}",
                            variant_index=rng.randint(0, 2))
        try:
            ledger.record_judgment(judgment, ability=ability,
                                   memory_protocol=protocol)
        except ProtocolViolation:
            rejected += 1
    assert rejected == attempts  # 100% rejection


# --------------------------------------------------------------------------
# persistence, append-only, corruption

def test_ledger_reloads_and_continues_sequence(tmp_path, taxonomy):
    path = tmp_path / "run.ledger"
    ledger = Ledger(path, taxonomy)
    session = ledger.open_session("m1", TOOLS_OFF)
    ledger.record_judgment(Judgment("q1", session.id, "pass", "g"),
                           ability="K.commonsense")

    reopened = Ledger(path, taxonomy)
    assert [e.seq for e in reopened.events] == [1, 2]
    assert reopened.model_id == "m1"
    seq = reopened.record_judgment(Judgment("q2", session.id, "pass", "g"),
                                   ability="K.commonsense")
    assert seq == 3


def test_seq_gap_is_corruption(tmp_path, taxonomy):
    path = tmp_path / "run.ledger"
    ledger = Ledger(path, taxonomy)
    session = ledger.open_session("m1", TOOLS_OFF)
    for i in range(3):
        ledger.record_judgment(Judgment(f"q{i}", session.id, "pass", "g"),
                               ability="K.commonsense")
    lines = path.read_text().strip().split("\n")
    path.write_text("\n".join(lines[:2] + lines[3:]) + "\n")
    with pytest.raises(LedgerCorruption, match="corrupted ledger"):
        Ledger(path, taxonomy)
    with pytest.raises(LedgerCorruption):
        replay(read_ledger_file(path), taxonomy)


def test_rewritten_event_detected_at_replay(tmp_path, taxonomy, gpt5_fixture):
    ledger = synthesize_ledger(tmp_path / "g.ledger", taxonomy, gpt5_fixture)
    profile = ledger.replay()
    ledger.record_profile(profile)
    path = ledger.path
    # flip one judgment from fail to pass behind the ledger's back
    lines = path.read_text().strip().split("\n")
    for i, line in enumerate(lines):
        if '"verdict":"fail"' in line:
            lines[i] = line.replace('"verdict":"fail"', '"verdict":"pass"')
            break
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(LedgerCorruption, match="does not match replay"):
        replay(read_ledger_file(path), taxonomy)


def test_no_api_mutates_existing_events(tmp_path, taxonomy):
    ledger = make_ledger(tmp_path, taxonomy)
    session = ledger.open_session("m1", TOOLS_OFF)
    ledger.record_judgment(Judgment("q1", session.id, "pass", "g"),
                           ability="K.commonsense")
    snapshot = [json.dumps(e.to_json(), sort_keys=True) for e in ledger.events]
    ledger.record_judgment(Judgment("q2", session.id, "fail", "g"),
                           ability="K.commonsense")
    ledger.close_session(session.id)
    after = [json.dumps(e.to_json(), sort_keys=True) for e in ledger.events]
    assert after[:len(snapshot)] == snapshot
    with pytest.raises(AttributeError):
        ledger.events.append("bogus")  # tuples reject mutation


def test_judgment_in_closed_session_detected_at_replay(tmp_path, taxonomy):
    path = tmp_path / "run.ledger"
    ledger = Ledger(path, taxonomy)
    session = ledger.open_session("m1", TOOLS_OFF)
    ledger.record_judgment(Judgment("q1", session.id, "pass", "g"),
                           ability="K.commonsense")
    ledger.close_session(session.id)
    events = [json.loads(line) for line in path.read_text().strip().split("\n")]
    forged = dict(events[1])
    forged["seq"] = 4
    forged["payload"] = dict(forged["payload"], item_id="q2")
    events.append(forged)
    path.write_text("\n".join(json.dumps(e) for e in events) + "\n")
    with pytest.raises(LedgerCorruption, match="closed session"):
        replay(read_ledger_file(path), taxonomy)


# --------------------------------------------------------------------------
# replay

def test_empty_ledger_replays_to_all_zero(tmp_path, taxonomy):
    profile = replay([], taxonomy)
    assert profile.total == 0
    assert all(v == 0 for v in profile.per_node.values())


def test_gpt5_ledger_replays_to_57(taxonomy, gpt5_ledger):
    profile = gpt5_ledger.replay()
    assert profile.total == 57
    assert profile.model_id == "gpt-5"


def test_gpt4_ledger_replays_to_27(taxonomy, gpt4_ledger):
    profile = gpt4_ledger.replay()
    assert profile.total == 27


def test_replay_of_persisted_file_is_bit_identical(taxonomy, gpt5_ledger):
    live = gpt5_ledger.replay()
    persisted = replay(read_ledger_file(gpt5_ledger.path), taxonomy)
    assert persisted == live
    assert persisted.to_json() == live.to_json()


def test_replay_matches_fixture_aggregate(taxonomy, gpt5_fixture, gpt5_ledger):
    direct = aggregate(taxonomy, gpt5_fixture.verdicts, gpt5_fixture.percentiles,
                       model_id=gpt5_fixture.model_id)
    assert gpt5_ledger.replay() == direct


def test_recorded_profile_round_trips(taxonomy, gpt5_ledger):
    profile = gpt5_ledger.replay()
    gpt5_ledger.record_profile(profile)
    again = replay(read_ledger_file(gpt5_ledger.path), taxonomy)
    assert again == profile
