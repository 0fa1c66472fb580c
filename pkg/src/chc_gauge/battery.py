"""Battery documents: declarative test definitions for one narrow ability.

A battery bundles concrete items (prompts, expected answers or grading
rubrics, paraphrase variants), threshold requirements against named
benchmarks, and administration notes. Documents are strict JSON (unknown
fields are errors) because graders hand-edit them.

Media prompts are opaque URI references graded manually; the engine never
fetches them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .evidence import COMPARATORS, METRIC_KINDS, comparator_coherent
from .parsing import ParseError, ParseFailure, Reader, load_json_document
from .taxonomy import (
    AbilityPath,
    Taxonomy,
    TestingNotes,
    Violation,
    _read_testing_notes,
)

SEMANTICS = ("sufficient", "necessary", "indicative")
MEDIA_KINDS = ("image", "audio", "video", "document")
EXPECTED_KINDS = ("exact", "rubric", "timing")

# Minimum paraphrase variants on every item of a battery whose requirements
# demand robustness checks.
MIN_ROBUSTNESS_VARIANTS = 2


@dataclass(frozen=True)
class MediaRef:
    kind: str
    uri: str
    note: str = ""


@dataclass(frozen=True)
class PromptSpec:
    text: str = ""
    media: tuple[MediaRef, ...] = ()


@dataclass(frozen=True)
class RubricSpec:
    """What counts as a pass: an exact answer key, free-text grading
    instructions, or a timing criterion against a named human baseline."""

    kind: str
    answer: str = ""
    accept: tuple[str, ...] = ()
    abstain: tuple[str, ...] = ()
    text: str = ""
    baseline: str = ""


@dataclass(frozen=True)
class TimingPolicy:
    budget_ms: int | None = None
    baseline: str = ""


@dataclass(frozen=True)
class MemoryProtocol:
    kind: str  # "presentation" | "recall"
    of: str = ""
    min_delay_s: int | None = None
    min_filler: int | None = None


@dataclass(frozen=True)
class BatteryItem:
    id: str
    prompt: PromptSpec
    expected: RubricSpec
    variants: tuple[PromptSpec, ...] = ()
    timing_policy: TimingPolicy | None = None
    memory_protocol: MemoryProtocol | None = None


@dataclass(frozen=True)
class EvidenceRequirement:
    """A named threshold test with sufficient/necessary/indicative force."""

    id: str
    semantics: str
    metric: str
    comparator: str
    threshold: float
    robustness_required: bool = False
    source: str = "manual"


@dataclass(frozen=True)
class BatteryDoc:
    ability: AbilityPath
    items: tuple[BatteryItem, ...]
    requirements: tuple[EvidenceRequirement, ...]
    testing_notes: TestingNotes | None = None
    source_note: str = ""


# --------------------------------------------------------------------------
# Parsing

_DOC_FIELDS = {"ability", "testing_notes", "items", "requirements", "source_note"}
_ITEM_FIELDS = {"id", "prompt", "expected", "variants", "timing_policy", "memory_protocol"}
_PROMPT_FIELDS = {"text", "media"}
_MEDIA_FIELDS = {"kind", "uri", "note"}
_EXPECTED_FIELDS = {"kind", "answer", "accept", "abstain", "text", "baseline"}
_TIMING_FIELDS = {"budget_ms", "baseline"}
_PROTOCOL_FIELDS = {"kind", "of", "min_delay_s", "min_filler"}
_REQ_FIELDS = {"id", "semantics", "metric", "comparator", "threshold",
               "robustness_required", "source"}


def _read_prompt(reader: Reader, data, loc: str) -> PromptSpec:
    obj = reader.obj(data, loc)
    if obj is None:
        return PromptSpec()
    reader.check_keys(obj, loc, _PROMPT_FIELDS)
    text = reader.str_(obj, "text", loc, required=False, default="")
    media: list[MediaRef] = []
    raw_media = reader.list_(obj, "media", loc, required=False)
    if raw_media:
        for i, raw in enumerate(raw_media):
            mloc = f"{loc}.media[{i}]"
            mobj = reader.obj(raw, mloc)
            if mobj is None:
                continue
            reader.check_keys(mobj, mloc, _MEDIA_FIELDS)
            media.append(MediaRef(
                kind=reader.enum(mobj, "kind", mloc, MEDIA_KINDS) or "document",
                uri=reader.str_(mobj, "uri", mloc) or "",
                note=reader.str_(mobj, "note", mloc, required=False, default="") or "",
            ))
    if not text and not media:
        reader.fail(loc, "prompt needs text or media")
    return PromptSpec(text=text or "", media=tuple(media))


def _read_expected(reader: Reader, data, loc: str) -> RubricSpec:
    obj = reader.obj(data, loc)
    if obj is None:
        return RubricSpec(kind="rubric")
    reader.check_keys(obj, loc, _EXPECTED_FIELDS)
    kind = reader.enum(obj, "kind", loc, EXPECTED_KINDS) or "rubric"
    spec = RubricSpec(
        kind=kind,
        answer=reader.str_(obj, "answer", loc, required=False, default="") or "",
        accept=tuple(reader.str_list(obj, "accept", loc, required=False) or ()),
        abstain=tuple(reader.str_list(obj, "abstain", loc, required=False) or ()),
        text=reader.str_(obj, "text", loc, required=False, default="") or "",
        baseline=reader.str_(obj, "baseline", loc, required=False, default="") or "",
    )
    if kind == "exact" and not spec.answer:
        reader.fail(f"{loc}.answer", "exact rubric needs an answer")
    if kind == "rubric" and not spec.text:
        reader.fail(f"{loc}.text", "grader rubric needs text")
    return spec


def _read_item(reader: Reader, data, loc: str) -> BatteryItem | None:
    obj = reader.obj(data, loc)
    if obj is None:
        return None
    reader.check_keys(obj, loc, _ITEM_FIELDS)
    item_id = reader.str_(obj, "id", loc)
    prompt = _read_prompt(reader, obj.get("prompt", {}), f"{loc}.prompt")
    if "prompt" not in obj:
        reader.fail(f"{loc}.prompt", "missing required field")
    if "expected" not in obj:
        reader.fail(f"{loc}.expected", "missing required field")
        expected = RubricSpec(kind="rubric", text="?")
    else:
        expected = _read_expected(reader, obj["expected"], f"{loc}.expected")
    variants: list[PromptSpec] = []
    raw_variants = reader.list_(obj, "variants", loc, required=False)
    if raw_variants:
        for i, raw in enumerate(raw_variants):
            variants.append(_read_prompt(reader, raw, f"{loc}.variants[{i}]"))
    timing = None
    if "timing_policy" in obj:
        tloc = f"{loc}.timing_policy"
        tobj = reader.obj(obj["timing_policy"], tloc)
        if tobj is not None:
            reader.check_keys(tobj, tloc, _TIMING_FIELDS)
            timing = TimingPolicy(
                budget_ms=reader.int_(tobj, "budget_ms", tloc, required=False),
                baseline=reader.str_(tobj, "baseline", tloc, required=False, default="") or "",
            )
    protocol = None
    if "memory_protocol" in obj:
        ploc = f"{loc}.memory_protocol"
        pobj = reader.obj(obj["memory_protocol"], ploc)
        if pobj is not None:
            reader.check_keys(pobj, ploc, _PROTOCOL_FIELDS)
            kind = reader.enum(pobj, "kind", ploc, ("presentation", "recall"))
            of = reader.str_(pobj, "of", ploc, required=(kind == "recall"), default="") or ""
            protocol = MemoryProtocol(
                kind=kind or "presentation",
                of=of,
                min_delay_s=reader.int_(pobj, "min_delay_s", ploc, required=False),
                min_filler=reader.int_(pobj, "min_filler", ploc, required=False),
            )
    if item_id is None:
        return None
    return BatteryItem(
        id=item_id,
        prompt=prompt,
        expected=expected,
        variants=tuple(variants),
        timing_policy=timing,
        memory_protocol=protocol,
    )


def _read_requirement(reader: Reader, data, loc: str) -> EvidenceRequirement | None:
    obj = reader.obj(data, loc)
    if obj is None:
        return None
    reader.check_keys(obj, loc, _REQ_FIELDS)
    req_id = reader.str_(obj, "id", loc)
    semantics = reader.enum(obj, "semantics", loc, SEMANTICS)
    metric = reader.enum(obj, "metric", loc, METRIC_KINDS)
    comparator = reader.enum(obj, "comparator", loc, COMPARATORS)
    threshold = reader.num(obj, "threshold", loc)
    if threshold is not None and not math.isfinite(threshold):
        reader.fail(f"{loc}.threshold", "threshold must be finite")
        threshold = None
    if metric and comparator and not comparator_coherent(metric, comparator):
        reader.fail(f"{loc}.comparator",
                    f"comparator {comparator!r} incoherent for metric {metric!r}")
    if None in (req_id, semantics, metric, comparator, threshold):
        return None
    return EvidenceRequirement(
        id=req_id,
        semantics=semantics,
        metric=metric,
        comparator=comparator,
        threshold=threshold,
        robustness_required=reader.bool_(obj, "robustness_required", loc,
                                         required=False, default=False),
        source=reader.str_(obj, "source", loc, required=False, default="manual") or "manual",
    )


def parse_battery(document: bytes | str | dict) -> BatteryDoc:
    """Read one battery document; raises ParseFailure carrying every error."""
    data = document if isinstance(document, dict) else load_json_document(document)
    reader = Reader()
    reader.check_keys(data, "", _DOC_FIELDS)
    ability_text = reader.str_(data, "ability", "document")
    ability = None
    if ability_text is not None:
        try:
            ability = AbilityPath.parse(ability_text)
        except ValueError as exc:
            reader.fail("ability", str(exc))
    notes = None
    if "testing_notes" in data:
        notes = _read_testing_notes(reader, data["testing_notes"], "testing_notes")
    items: list[BatteryItem] = []
    raw_items = reader.list_(data, "items", "document")
    if raw_items is not None:
        for i, raw in enumerate(raw_items):
            item = _read_item(reader, raw, f"items[{i}]")
            if item is not None:
                items.append(item)
    requirements: list[EvidenceRequirement] = []
    raw_reqs = reader.list_(data, "requirements", "document", required=False)
    if raw_reqs is not None:
        for i, raw in enumerate(raw_reqs):
            req = _read_requirement(reader, raw, f"requirements[{i}]")
            if req is not None:
                requirements.append(req)

    seen: dict[str, int] = {}
    for i, item in enumerate(items):
        if item.id in seen:
            reader.errors.append(ParseError(
                f"items[{i}].id",
                f"duplicate item id {item.id!r} (first at items[{seen[item.id]}].id)"))
        else:
            seen[item.id] = i
    seen_reqs: dict[str, int] = {}
    for i, req in enumerate(requirements):
        if req.id in seen_reqs:
            reader.errors.append(ParseError(
                f"requirements[{i}].id",
                f"duplicate requirement id {req.id!r} "
                f"(first at requirements[{seen_reqs[req.id]}].id)"))
        else:
            seen_reqs[req.id] = i

    reader.raise_if_failed()
    return BatteryDoc(
        ability=ability,
        items=tuple(items),
        requirements=tuple(requirements),
        testing_notes=notes,
        source_note=reader.str_(data, "source_note", "document",
                                required=False, default="") or "",
    )


def serialize_battery(doc: BatteryDoc) -> dict:
    """Document form of a battery; parse_battery(serialize_battery(d)) == d."""

    def prompt_json(prompt: PromptSpec) -> dict:
        out: dict = {}
        if prompt.text:
            out["text"] = prompt.text
        if prompt.media:
            out["media"] = [
                {"kind": m.kind, "uri": m.uri, **({"note": m.note} if m.note else {})}
                for m in prompt.media
            ]
        return out

    def expected_json(spec: RubricSpec) -> dict:
        out: dict = {"kind": spec.kind}
        if spec.answer:
            out["answer"] = spec.answer
        if spec.accept:
            out["accept"] = list(spec.accept)
        if spec.abstain:
            out["abstain"] = list(spec.abstain)
        if spec.text:
            out["text"] = spec.text
        if spec.baseline:
            out["baseline"] = spec.baseline
        return out

    def item_json(item: BatteryItem) -> dict:
        out: dict = {
            "id": item.id,
            "prompt": prompt_json(item.prompt),
            "expected": expected_json(item.expected),
        }
        if item.variants:
            out["variants"] = [prompt_json(v) for v in item.variants]
        if item.timing_policy is not None:
            timing: dict = {}
            if item.timing_policy.budget_ms is not None:
                timing["budget_ms"] = item.timing_policy.budget_ms
            if item.timing_policy.baseline:
                timing["baseline"] = item.timing_policy.baseline
            out["timing_policy"] = timing
        if item.memory_protocol is not None:
            protocol: dict = {"kind": item.memory_protocol.kind}
            if item.memory_protocol.of:
                protocol["of"] = item.memory_protocol.of
            if item.memory_protocol.min_delay_s is not None:
                protocol["min_delay_s"] = item.memory_protocol.min_delay_s
            if item.memory_protocol.min_filler is not None:
                protocol["min_filler"] = item.memory_protocol.min_filler
            out["memory_protocol"] = protocol
        return out

    out: dict = {
        "ability": str(doc.ability),
        "items": [item_json(item) for item in doc.items],
        "requirements": [
            {
                "id": req.id,
                "semantics": req.semantics,
                "metric": req.metric,
                "comparator": req.comparator,
                "threshold": req.threshold,
                "robustness_required": req.robustness_required,
                "source": req.source,
            }
            for req in doc.requirements
        ],
    }
    if doc.testing_notes is not None:
        out["testing_notes"] = {
            "input_modalities": sorted(doc.testing_notes.input_modalities),
            "output_modalities": sorted(doc.testing_notes.output_modalities),
            "tools_allowed": doc.testing_notes.tools_allowed,
            "grading": doc.testing_notes.grading,
        }
    if doc.source_note:
        out["source_note"] = doc.source_note
    return out


# --------------------------------------------------------------------------
# Validation

def effective_testing_notes(doc: BatteryDoc, taxonomy: Taxonomy) -> TestingNotes:
    if doc.testing_notes is not None:
        return doc.testing_notes
    node = taxonomy.find(doc.ability)
    return node.testing_notes if node else TestingNotes()


def validate_battery(doc: BatteryDoc, taxonomy: Taxonomy) -> list[Violation]:
    """Doc-level coherence against the active taxonomy; violations are data."""
    out: list[Violation] = []
    key = str(doc.ability)
    node = taxonomy.find(doc.ability)
    if node is None:
        out.append(Violation(key, "unknown-ability", "ability not in taxonomy"))
        return out
    if node.children:
        out.append(Violation(key, "non-leaf-ability",
                             "batteries must target leaf abilities"))
    if doc.testing_notes is not None and \
            doc.testing_notes.tools_allowed != node.testing_notes.tools_allowed:
        expected = "enabled" if node.testing_notes.tools_allowed else "disabled"
        out.append(Violation(key, "tool-policy",
                             f"ability requires tools {expected}"))

    robustness_needed = any(req.robustness_required for req in doc.requirements)
    item_ids = {item.id for item in doc.items}
    for item in doc.items:
        where = f"{key}/{item.id}"
        if robustness_needed and len(item.variants) < MIN_ROBUSTNESS_VARIANTS:
            out.append(Violation(
                where, "robustness-variants",
                f"{len(item.variants)} variants; robustness checks need >= "
                f"{MIN_ROBUSTNESS_VARIANTS}"))
        protocol = item.memory_protocol
        if protocol is not None and protocol.kind == "recall":
            if protocol.of not in item_ids:
                out.append(Violation(where, "recall-reference",
                                     f"recall references missing item {protocol.of!r}"))
            elif protocol.of == item.id:
                out.append(Violation(where, "recall-reference",
                                     "recall item references itself"))
            else:
                target = next(i for i in doc.items if i.id == protocol.of)
                if target.memory_protocol is None or \
                        target.memory_protocol.kind != "presentation":
                    out.append(Violation(
                        where, "recall-reference",
                        f"recall target {protocol.of!r} is not a presentation item"))
    return sorted(out, key=lambda v: (v.path, v.rule))


# --------------------------------------------------------------------------
# Suite loading

@dataclass(frozen=True)
class Suite:
    docs: tuple[BatteryDoc, ...]
    uncovered: tuple[str, ...]  # leaf ability paths with no battery
    _by_ability: dict = field(default_factory=dict, repr=False, compare=False)
    _items: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        by_ability: dict[str, list[BatteryDoc]] = {}
        items: dict[str, tuple[BatteryDoc, BatteryItem]] = {}
        for doc in self.docs:
            by_ability.setdefault(str(doc.ability), []).append(doc)
            for item in doc.items:
                items[item.id] = (doc, item)
        object.__setattr__(self, "_by_ability", by_ability)
        object.__setattr__(self, "_items", items)

    def batteries_for(self, ability: str) -> list[BatteryDoc]:
        return list(self._by_ability.get(str(ability), []))

    def abilities(self) -> list[str]:
        return sorted(self._by_ability)

    def find_item(self, item_id: str):
        """(doc, item) pair, or None. Item ids are unique across the suite."""
        return self._items.get(item_id)

    def requirements_for(self, ability: str) -> list[EvidenceRequirement]:
        return [req for doc in self.batteries_for(ability) for req in doc.requirements]


class SuiteLoadError(ValueError):
    """Aggregate parse/validate failure across a document set."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        lines = [f"{name}: {message}" for name, message in problems]
        super().__init__("\n".join(lines))


def load_suite(documents: list, taxonomy: Taxonomy) -> Suite:
    """Parse and validate a set of (name, bytes) pairs into a Suite.

    Raises SuiteLoadError aggregating every parse error and violation. The
    returned suite's ``uncovered`` lists leaf abilities with zero batteries.
    """
    problems: list[tuple[str, str]] = []
    docs: list[BatteryDoc] = []
    for name, payload in documents:
        try:
            doc = parse_battery(payload)
        except ParseFailure as exc:
            problems.extend((name, str(err)) for err in exc.errors)
            continue
        for violation in validate_battery(doc, taxonomy):
            problems.append((name, str(violation)))
        docs.append(doc)

    # Item ids must be unique across the whole suite so judgments can name
    # items without qualification.
    seen_items: dict[str, str] = {}
    for doc in docs:
        owner = str(doc.ability)
        for item in doc.items:
            if item.id in seen_items:
                problems.append((owner, f"item id {item.id!r} already used by "
                                        f"{seen_items[item.id]}"))
            else:
                seen_items[item.id] = owner

    if problems:
        raise SuiteLoadError(problems)

    covered = {str(doc.ability) for doc in docs}
    uncovered = tuple(
        str(node.path) for node in taxonomy.walk()
        if not node.children and str(node.path) not in covered
    )
    return Suite(docs=tuple(docs), uncovered=uncovered)
