"""Append-only provenance log with deterministic replay.

One ledger file covers one evaluation run of one model: UTF-8 JSON lines,
one event per line, seq strictly increasing from 1 with no gaps. Events are
never rewritten; every profile the engine reports is recomputed from the
log, so an auditor can re-derive any score from the file alone.

Session-scoped protocols enforced at record time and re-checked at replay:
tool policy (search must match the item's testing notes) and memory-delay
separation (recall of stored material happens in a new session after the
configured filler interactions or wall-clock delay, standing in for "48
hours' worth of experiences" at desk scale).
"""

from __future__ import annotations

import functools
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from threading import Lock

from .battery import EvidenceRequirement, MemoryProtocol, Suite
from .config import SeparationPolicy
from .evidence import JUDGMENT_VERDICTS, Judgment, Measurement
from .scoring import (
    CapabilityProfile,
    aggregate,
    evaluate_criterion,
    untested_verdicts,
)
from .taxonomy import Taxonomy, TestingNotes, Violation

EVENT_KINDS = (
    "session_opened",
    "session_closed",
    "item_presented",
    "judgment_recorded",
    "measurement_recorded",
    "profile_computed",
)

SESSION_KINDS = ("standard", "presentation", "recall")


class LedgerCorruption(ValueError):
    """The event stream violates ledger invariants (gap, tamper, bad shape)."""


class ProtocolViolation(Exception):
    """A recording was rejected; carries the violation as data."""

    def __init__(self, violation: Violation):
        self.violation = violation
        super().__init__(str(violation))


@dataclass(frozen=True)
class ToolPolicy:
    search_enabled: bool = False
    modalities: frozenset = frozenset({"text"})

    def to_json(self) -> dict:
        return {"search_enabled": self.search_enabled,
                "modalities": sorted(self.modalities)}

    @classmethod
    def from_json(cls, data: dict) -> "ToolPolicy":
        return cls(search_enabled=bool(data.get("search_enabled", False)),
                   modalities=frozenset(data.get("modalities", ["text"])))


@dataclass(frozen=True)
class LedgerEvent:
    seq: int
    at: str  # ISO-8601 UTC
    kind: str
    actor: str
    payload: dict

    def to_json(self) -> dict:
        return {"seq": self.seq, "at": self.at, "kind": self.kind,
                "actor": self.actor, "payload": self.payload}


@dataclass
class Session:
    id: str
    model_id: str
    opened_at: str
    tool_policy: ToolPolicy
    kind: str = "standard"
    parent_presentation: str | None = None
    filler_count: int = 0
    closed: bool = False


def enforce_tool_policy(notes: TestingNotes, session: Session) -> Violation | None:
    """Search state must match the item's testing notes in both directions:
    tools-off material rejects search-enabled sessions, and search-required
    material (current affairs) rejects search-disabled ones."""
    if notes.tools_allowed and not session.tool_policy.search_enabled:
        return Violation(session.id, "tool-policy",
                         "item requires search tools enabled")
    if not notes.tools_allowed and session.tool_policy.search_enabled:
        return Violation(session.id, "tool-policy",
                         "item requires external tools disabled")
    return None


def _parse_at(text: str) -> datetime:
    return datetime.fromisoformat(text)


def _protocol_to_json(protocol: MemoryProtocol | None):
    if protocol is None:
        return None
    out: dict = {"kind": protocol.kind}
    if protocol.of:
        out["of"] = protocol.of
    if protocol.min_delay_s is not None:
        out["min_delay_s"] = protocol.min_delay_s
    if protocol.min_filler is not None:
        out["min_filler"] = protocol.min_filler
    return out


def _protocol_from_json(data) -> MemoryProtocol | None:
    if not data:
        return None
    return MemoryProtocol(
        kind=str(data.get("kind", "presentation")),
        of=str(data.get("of", "")),
        min_delay_s=data.get("min_delay_s"),
        min_filler=data.get("min_filler"),
    )


def _locked(method):
    """Serialize a Ledger mutation through the single-writer lock."""

    @functools.wraps(method)
    def wrapper(self, *args, **kwargs):
        with self._lock:
            return method(self, *args, **kwargs)

    return wrapper


class Ledger:
    """Single-writer append-only event log backed by one JSON-lines file.

    ``suite`` (when given) resolves items to their battery's ability,
    testing notes, and memory protocol; without it the caller supplies the
    ability explicitly and the same facts are denormalized into payloads so
    replay never needs the suite.
    """

    def __init__(self, path: str | Path, taxonomy: Taxonomy,
                 suite: Suite | None = None,
                 separation: SeparationPolicy = SeparationPolicy(),
                 actor: str = "harness", clock=None):
        self.path = Path(path)
        self.taxonomy = taxonomy
        self.suite = suite
        self.separation = separation
        self.default_actor = actor
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._lock = Lock()
        self._events: list[LedgerEvent] = []
        self.sessions: dict[str, Session] = {}
        self._judged: set = set()  # (item_id, variant_index)
        self.model_id: str = ""
        if self.path.exists():
            for event in read_ledger_file(self.path):
                self._apply(event)

    # -- event access -------------------------------------------------

    @property
    def events(self) -> tuple[LedgerEvent, ...]:
        return tuple(self._events)

    @property
    def next_seq(self) -> int:
        return len(self._events) + 1

    # -- recording ----------------------------------------------------

    def _now(self) -> str:
        return self._clock().isoformat()

    def _append(self, kind: str, payload: dict, actor: str | None) -> LedgerEvent:
        # Serialized appends: callers must hold self._lock (all public
        # record methods do), keeping check-then-append atomic.
        event = LedgerEvent(seq=self.next_seq, at=self._now(), kind=kind,
                            actor=actor or self.default_actor, payload=payload)
        line = json.dumps(event.to_json(), separators=(",", ":"), sort_keys=True)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as handle:
            handle.write(line + "\n")
            handle.flush()
            os.fsync(handle.fileno())
        self._apply(event)
        return event

    def _claim_model(self, model_id: str) -> None:
        if not self.model_id:
            self.model_id = model_id
        elif model_id and model_id != self.model_id:
            raise ProtocolViolation(Violation(
                model_id, "one-model-per-ledger",
                f"ledger already tracks {self.model_id!r}"))

    @_locked
    def open_session(self, model_id: str, policy: ToolPolicy,
                     kind: str = "standard", parent: str | None = None,
                     actor: str | None = None) -> Session:
        """Open a session and persist the event; recall sessions must honor
        the memory-separation policy relative to their parent presentation."""
        if kind not in SESSION_KINDS:
            raise ValueError(f"unknown session kind {kind!r}")
        self._claim_model(model_id)
        filler = 0
        if kind == "recall":
            if parent is None or parent not in self.sessions:
                raise ProtocolViolation(Violation(
                    parent or "", "unknown-parent",
                    "recall session requires an existing presentation session"))
            parent_session = self.sessions[parent]
            if parent_session.kind != "presentation":
                raise ProtocolViolation(Violation(
                    parent, "not-a-presentation",
                    f"parent session is {parent_session.kind!r}"))
            if parent_session.model_id != model_id:
                raise ProtocolViolation(Violation(
                    parent, "model-mismatch",
                    "recall must target the same model as its presentation"))
            filler = self._filler_since(parent)
            delay_s = (self._clock() - _parse_at(parent_session.opened_at)).total_seconds()
            if not self.separation.satisfied(filler, delay_s):
                raise ProtocolViolation(Violation(
                    parent, "memory-separation",
                    f"memory-separation violated: {filler} filler interactions, "
                    f"{delay_s:.0f}s elapsed; policy {self.separation.describe()}"))
        elif parent is not None:
            raise ValueError("only recall sessions take a parent")

        session_id = f"sess-{self.next_seq:06d}"
        payload = {
            "session_id": session_id,
            "model_id": model_id,
            "kind": kind,
            "tool_policy": policy.to_json(),
            "parent_presentation": parent,
            "filler_count": filler,
        }
        self._append("session_opened", payload, actor)
        return self.sessions[session_id]

    @_locked
    def close_session(self, session_id: str, actor: str | None = None) -> int:
        session = self._session(session_id)
        if session.closed:
            raise ProtocolViolation(Violation(session_id, "session-closed",
                                              "session already closed"))
        event = self._append("session_closed", {"session_id": session_id}, actor)
        return event.seq

    def _session(self, session_id: str) -> Session:
        if session_id not in self.sessions:
            raise ProtocolViolation(Violation(session_id, "unknown-session",
                                              "no such session"))
        return self.sessions[session_id]

    def _filler_since(self, parent_id: str) -> int:
        parent_open_seq = None
        count = 0
        for event in self._events:
            if event.kind == "session_opened" and \
                    event.payload["session_id"] == parent_id:
                parent_open_seq = event.seq
            elif event.kind == "item_presented" and parent_open_seq is not None \
                    and event.seq > parent_open_seq \
                    and event.payload.get("session_id") != parent_id:
                count += 1
        return count

    def _resolve_item(self, item_id: str, ability: str | None,
                      memory_protocol: MemoryProtocol | None):
        """(ability, testing notes, protocol) for an item, from the suite
        when available, else from explicit arguments plus the taxonomy."""
        if self.suite is not None:
            found = self.suite.find_item(item_id)
            if found is not None:
                doc, item = found
                notes = doc.testing_notes
                if notes is None:
                    node = self.taxonomy.find(doc.ability)
                    notes = node.testing_notes if node else TestingNotes()
                return str(doc.ability), notes, item.memory_protocol
        if ability is None:
            raise ProtocolViolation(Violation(
                item_id, "unknown-item",
                "item not in suite and no ability supplied"))
        node = self.taxonomy.find(ability)
        if node is None:
            raise ProtocolViolation(Violation(ability, "unknown-ability",
                                              "ability not in taxonomy"))
        return ability, node.testing_notes, memory_protocol

    @_locked
    def record_item_presented(self, item_id: str, session_id: str | None,
                              ability: str | None = None, variant_index: int = 0,
                              response: str | None = None, outcome: str | None = None,
                              memory_protocol: MemoryProtocol | None = None,
                              actor: str | None = None) -> int:
        ability, notes, protocol = self._resolve_item(item_id, ability, memory_protocol)
        if session_id is not None:
            session = self._session(session_id)
            if session.closed:
                raise ProtocolViolation(Violation(session_id, "session-closed",
                                                  "session is closed"))
            violation = enforce_tool_policy(notes, session)
            if violation:
                raise ProtocolViolation(violation)
        payload = {
            "session_id": session_id,
            "item_id": item_id,
            "ability": ability,
            "variant_index": variant_index,
            "tools_allowed": notes.tools_allowed,
            "memory_protocol": _protocol_to_json(protocol),
        }
        if response is not None:
            payload["response"] = response
        if outcome is not None:
            payload["outcome"] = outcome
        return self._append("item_presented", payload, actor).seq

    def _presentation_session_of(self, item_id: str) -> str | None:
        """Session in which a presentation item was last shown."""
        found = None
        for event in self._events:
            if event.kind == "item_presented" and \
                    event.payload.get("item_id") == item_id and \
                    event.payload.get("session_id") is not None:
                found = event.payload["session_id"]
        return found

    def check_recall_protocol(self, item_id: str, protocol: MemoryProtocol,
                              session: Session) -> Violation | None:
        """Long-term-memory separation for one recall item in one session."""
        if session.kind != "recall":
            return Violation(
                item_id, "memory-separation",
                "recall items must be graded in a recall session, not "
                f"{session.kind!r}")
        presented_in = self._presentation_session_of(protocol.of)
        if presented_in is None:
            return Violation(item_id, "memory-separation",
                             f"presentation item {protocol.of!r} was never presented")
        if presented_in == session.id:
            return Violation(item_id, "memory-separation",
                             "recall judged in the same session as its presentation")
        if session.parent_presentation != presented_in:
            return Violation(
                item_id, "memory-separation",
                f"recall session parent {session.parent_presentation!r} does not "
                f"match presentation session {presented_in!r}")
        # Item-level overrides tighten the configured separation policy.
        if protocol.min_filler is not None and session.filler_count < protocol.min_filler:
            return Violation(
                item_id, "memory-separation",
                f"item requires {protocol.min_filler} filler interactions; "
                f"session had {session.filler_count}")
        if protocol.min_delay_s is not None:
            parent = self.sessions.get(session.parent_presentation or "")
            if parent is not None:
                delay = (_parse_at(session.opened_at) -
                         _parse_at(parent.opened_at)).total_seconds()
                if delay < protocol.min_delay_s:
                    return Violation(
                        item_id, "memory-separation",
                        f"item requires {protocol.min_delay_s}s delay; got {delay:.0f}s")
        return None

    @_locked
    def record_judgment(self, judgment: Judgment, ability: str | None = None,
                        memory_protocol: MemoryProtocol | None = None,
                        actor: str | None = None) -> int:
        """Append a human verdict after protocol checks (open session, tool
        policy, duplicate guard, memory separation for recall items)."""
        if judgment.verdict not in JUDGMENT_VERDICTS:
            raise ValueError(f"unknown verdict {judgment.verdict!r}")
        ability, notes, protocol = self._resolve_item(
            judgment.item_id, ability, memory_protocol)
        session = self._session(judgment.session_id)
        if session.closed:
            raise ProtocolViolation(Violation(judgment.session_id, "session-closed",
                                              "session is closed"))
        self._claim_model(session.model_id)
        violation = enforce_tool_policy(notes, session)
        if violation:
            raise ProtocolViolation(violation)
        if protocol is not None and protocol.kind == "recall":
            violation = self.check_recall_protocol(judgment.item_id, protocol, session)
            if violation:
                raise ProtocolViolation(violation)
        key = (judgment.item_id, judgment.variant_index)
        if key in self._judged:
            raise ProtocolViolation(Violation(
                judgment.item_id, "duplicate-judgment",
                f"variant {judgment.variant_index} already judged"))
        payload = {
            "session_id": judgment.session_id,
            "item_id": judgment.item_id,
            "ability": ability,
            "verdict": judgment.verdict,
            "grader": judgment.grader,
            "note": judgment.note,
            "latency_ms": judgment.latency_ms,
            "variant_index": judgment.variant_index,
            "memory_protocol": _protocol_to_json(protocol),
        }
        return self._append("judgment_recorded", payload, actor).seq

    @_locked
    def record_measurement(self, measurement: Measurement, ability: str,
                           requirement: EvidenceRequirement | None = None,
                           model_id: str = "", actor: str | None = None) -> int:
        """Append an automated metric reading; the requirement's definition
        rides along so replay is self-contained."""
        if model_id:
            self._claim_model(model_id)
        if self.taxonomy.find(ability) is None:
            raise ProtocolViolation(Violation(ability, "unknown-ability",
                                              "ability not in taxonomy"))
        requirement_json = None
        if requirement is not None:
            if requirement.id != measurement.requirement_id:
                raise ValueError("measurement and requirement ids disagree")
            requirement_json = {
                "id": requirement.id,
                "semantics": requirement.semantics,
                "metric": requirement.metric,
                "comparator": requirement.comparator,
                "threshold": requirement.threshold,
                "robustness_required": requirement.robustness_required,
                "source": requirement.source,
            }
        elif self.suite is not None:
            for req in self.suite.requirements_for(ability):
                if req.id == measurement.requirement_id:
                    requirement_json = {
                        "id": req.id, "semantics": req.semantics,
                        "metric": req.metric, "comparator": req.comparator,
                        "threshold": req.threshold,
                        "robustness_required": req.robustness_required,
                        "source": req.source,
                    }
                    break
        payload = {
            "ability": ability,
            "requirement_id": measurement.requirement_id,
            "requirement": requirement_json,
            "metric": measurement.metric,
            "value": measurement.value,
            "sample_size": measurement.sample_size,
            "run_id": measurement.run_id,
            "per_variant_results": list(measurement.per_variant_results)
            if measurement.per_variant_results is not None else None,
            "model_id": model_id or self.model_id,
        }
        return self._append("measurement_recorded", payload, actor).seq

    @_locked
    def record_percentile(self, source: str, value: float, ability: str,
                          actor: str | None = None) -> int:
        """Percentile reading for one induction channel input."""
        if source not in self.taxonomy.percentile_sources():
            raise ProtocolViolation(Violation(source, "unknown-source",
                                              "not a declared percentile source"))
        if not 0 <= value <= 100:
            raise ValueError(f"percentile {value} outside [0, 100]")
        payload = {"ability": ability, "source": source, "value": value,
                   "metric": "percentile", "model_id": self.model_id}
        return self._append("measurement_recorded", payload, actor).seq

    @_locked
    def record_profile(self, profile: CapabilityProfile,
                       actor: str | None = None) -> int:
        return self._append("profile_computed", profile.to_json(), actor).seq

    # -- state reconstruction ------------------------------------------

    def _apply(self, event: LedgerEvent) -> None:
        if event.seq != len(self._events) + 1:
            raise LedgerCorruption(
                f"corrupted ledger: expected seq {len(self._events) + 1}, "
                f"got {event.seq}")
        if event.kind not in EVENT_KINDS:
            raise LedgerCorruption(f"corrupted ledger: unknown kind {event.kind!r}")
        self._events.append(event)
        payload = event.payload
        if event.kind == "session_opened":
            session = Session(
                id=payload["session_id"],
                model_id=payload["model_id"],
                opened_at=event.at,
                tool_policy=ToolPolicy.from_json(payload.get("tool_policy", {})),
                kind=payload.get("kind", "standard"),
                parent_presentation=payload.get("parent_presentation"),
                filler_count=payload.get("filler_count", 0),
            )
            self.sessions[session.id] = session
            if not self.model_id:
                self.model_id = session.model_id
        elif event.kind == "session_closed":
            session_id = payload["session_id"]
            if session_id in self.sessions:
                self.sessions[session_id].closed = True
        elif event.kind == "judgment_recorded":
            self._judged.add((payload["item_id"], payload.get("variant_index", 0)))
        elif event.kind == "measurement_recorded":
            if not self.model_id and payload.get("model_id"):
                self.model_id = payload["model_id"]

    def replay(self, suite: Suite | None = None) -> CapabilityProfile:
        return replay(self._events, self.taxonomy, suite=suite or self.suite)


# --------------------------------------------------------------------------
# File IO and replay

def read_ledger_file(path: str | Path) -> list[LedgerEvent]:
    """Parse a JSON-lines ledger; seq and shape problems raise
    LedgerCorruption."""
    events: list[LedgerEvent] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LedgerCorruption(
                    f"corrupted ledger: line {line_no} is not JSON ({exc.msg})")
            if not isinstance(data, dict):
                raise LedgerCorruption(f"corrupted ledger: line {line_no} not an object")
            missing = {"seq", "at", "kind", "actor", "payload"} - set(data)
            if missing:
                raise LedgerCorruption(
                    f"corrupted ledger: line {line_no} missing {sorted(missing)}")
            events.append(LedgerEvent(
                seq=data["seq"], at=data["at"], kind=data["kind"],
                actor=data["actor"], payload=data["payload"]))
    return events


def _requirements_from_events(events) -> dict:
    """ability -> {requirement id -> EvidenceRequirement} seen in payloads."""
    out: dict[str, dict[str, EvidenceRequirement]] = {}
    for event in events:
        if event.kind != "measurement_recorded":
            continue
        req = event.payload.get("requirement")
        if not req:
            continue
        ability = event.payload["ability"]
        out.setdefault(ability, {})[req["id"]] = EvidenceRequirement(
            id=req["id"], semantics=req["semantics"], metric=req["metric"],
            comparator=req["comparator"], threshold=req["threshold"],
            robustness_required=req.get("robustness_required", False),
            source=req.get("source", "manual"),
        )
    return out


@dataclass
class ReplayState:
    """Everything replay derives from a ledger besides the profile itself."""

    verdicts: dict  # criterion -> status
    percentiles: dict  # source -> value
    model_id: str
    evidence_index: dict  # criterion -> list of event seqs
    recorded_profile: dict | None


def replay_state(events, taxonomy: Taxonomy, suite: Suite | None = None) -> ReplayState:
    """Validate ledger invariants and rebuild per-criterion verdicts.

    Raises LedgerCorruption when the log could not have been produced by a
    compliant writer (seq gap, unknown kind, judgment in a closed or unknown
    session, recall judged alongside its presentation).
    """
    events = list(events)
    expected_seq = 1
    for event in events:
        if event.seq != expected_seq:
            raise LedgerCorruption(
                f"corrupted ledger: expected seq {expected_seq}, got {event.seq}")
        if event.kind not in EVENT_KINDS:
            raise LedgerCorruption(f"corrupted ledger: unknown kind {event.kind!r}")
        expected_seq += 1

    sessions: dict[str, Session] = {}
    presented_in: dict[str, str] = {}
    judgments: dict[str, list[Judgment]] = {}
    measurements: dict[str, list[Measurement]] = {}
    percentiles: dict[str, float] = {}
    evidence_index: dict[str, list[int]] = {}
    recorded_profile = None
    model_id = ""

    for event in events:
        payload = event.payload
        if event.kind == "session_opened":
            session = Session(
                id=payload["session_id"], model_id=payload["model_id"],
                opened_at=event.at,
                tool_policy=ToolPolicy.from_json(payload.get("tool_policy", {})),
                kind=payload.get("kind", "standard"),
                parent_presentation=payload.get("parent_presentation"),
                filler_count=payload.get("filler_count", 0),
            )
            sessions[session.id] = session
            model_id = model_id or session.model_id
        elif event.kind == "session_closed":
            session_id = payload["session_id"]
            if session_id not in sessions:
                raise LedgerCorruption("corrupted ledger: close of unknown session")
            sessions[session_id].closed = True
        elif event.kind == "item_presented":
            if payload.get("session_id") is not None:
                presented_in[payload["item_id"]] = payload["session_id"]
        elif event.kind == "judgment_recorded":
            session_id = payload["session_id"]
            if session_id not in sessions:
                raise LedgerCorruption("corrupted ledger: judgment in unknown session")
            if sessions[session_id].closed:
                raise LedgerCorruption("corrupted ledger: judgment in closed session")
            protocol = _protocol_from_json(payload.get("memory_protocol"))
            if protocol is not None and protocol.kind == "recall":
                session = sessions[session_id]
                shown = presented_in.get(protocol.of)
                if session.kind != "recall" or shown is None or \
                        shown == session_id or \
                        session.parent_presentation != shown:
                    raise LedgerCorruption(
                        "corrupted ledger: recall judgment violates memory separation")
            judgments.setdefault(payload["ability"], []).append(Judgment(
                item_id=payload["item_id"], session_id=session_id,
                verdict=payload["verdict"], grader=payload.get("grader", ""),
                note=payload.get("note", ""),
                latency_ms=payload.get("latency_ms"),
                variant_index=payload.get("variant_index", 0),
            ))
            evidence_index.setdefault(payload["ability"], []).append(event.seq)
        elif event.kind == "measurement_recorded":
            evidence_index.setdefault(payload["ability"], []).append(event.seq)
            if "source" in payload:
                percentiles[payload["source"]] = float(payload["value"])
                continue
            per_variant = payload.get("per_variant_results")
            measurements.setdefault(payload["ability"], []).append(Measurement(
                requirement_id=payload["requirement_id"],
                metric=payload["metric"],
                value=float(payload["value"]),
                sample_size=payload.get("sample_size", 0),
                run_id=payload.get("run_id", ""),
                per_variant_results=tuple(per_variant) if per_variant else None,
            ))
            model_id = model_id or payload.get("model_id", "")
        elif event.kind == "profile_computed":
            recorded_profile = payload

    embedded = _requirements_from_events(events)
    verdicts = untested_verdicts(taxonomy)
    for criterion in list(verdicts):
        if suite is not None:
            requirements = suite.requirements_for(criterion)
        else:
            requirements = list(embedded.get(criterion, {}).values())
        criterion_judgments = judgments.get(criterion, [])
        criterion_measurements = measurements.get(criterion, [])
        if not criterion_judgments and not criterion_measurements:
            continue
        verdict = evaluate_criterion(criterion, requirements,
                                     criterion_measurements, criterion_judgments)
        verdicts[criterion] = verdict.status

    return ReplayState(
        verdicts=verdicts,
        percentiles=percentiles,
        model_id=model_id,
        evidence_index=evidence_index,
        recorded_profile=recorded_profile,
    )


def replay(events, taxonomy: Taxonomy,
           suite: Suite | None = None) -> CapabilityProfile:
    """Recompute the capability profile purely from the event stream.

    If the stream carries profile_computed events, the recomputed profile
    must match the last one; a mismatch means the log was edited.
    """
    state = replay_state(events, taxonomy, suite=suite)
    profile = aggregate(taxonomy, state.verdicts, state.percentiles,
                        model_id=state.model_id)
    if state.recorded_profile is not None:
        recorded = CapabilityProfile.from_json(state.recorded_profile)
        if recorded.per_node != profile.per_node or recorded.total != profile.total:
            raise LedgerCorruption(
                "corrupted ledger: recorded profile does not match replay")
    return profile
