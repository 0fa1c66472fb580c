"""The ability hierarchy: ten broad cognitive domains and their narrow
sub-abilities, each carrying an integer share of the 100-point score.

The canonical hierarchy is versioned data, not code: it lives in
``data/taxonomy.json`` and is loaded through the same strict document
machinery as battery files, so alternate weighting schemes are swappable
inputs rather than forks of the engine.

Criterion ids referenced by scoring rules are ability paths. Narrow
sub-units that carry no standalone weight (the five perception sub-tasks,
the per-subject knowledge tests, the rudimentary/proficient tiers) are
modeled as children with weight 0; points for them are awarded only through
the parent's rule.
"""

from __future__ import annotations

import functools
import importlib.resources
import re
from dataclasses import dataclass, field

from .parsing import ParseFailure, Reader, load_json_document
from .rules import (
    COMBINE_MODES,
    AllocatedSum,
    AllOrNothing,
    CountMap,
    GatedPoints,
    PercentileBuckets,
    ScoringRule,
    TierLadder,
    rule_criteria,
    rule_max_points,
    rule_to_json,
)

BROAD_CODES = ("K", "RW", "M", "R", "WM", "MS", "MR", "V", "A", "S")
MODALITIES = ("text", "image", "audio", "video")
GRADING_MODES = ("automated", "manual", "either")

_SEGMENT_RE = re.compile(r"^[a-z0-9_]+$")


@dataclass(frozen=True, order=True)
class AbilityPath:
    """Dotted path into the hierarchy, e.g. ``V.perception.image_recognition``.

    The first segment is one of the ten broad codes; every later segment is
    lowercase ``[a-z0-9_]+``.
    """

    segments: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "AbilityPath":
        path = cls(tuple(text.split(".")))
        problem = path.problem()
        if problem:
            raise ValueError(f"invalid ability path {text!r}: {problem}")
        return path

    def problem(self) -> str | None:
        if not self.segments:
            return "empty path"
        if self.segments[0] not in BROAD_CODES:
            return f"first segment must be one of {', '.join(BROAD_CODES)}"
        for seg in self.segments[1:]:
            if not _SEGMENT_RE.match(seg):
                return f"segment {seg!r} must match [a-z0-9_]+"
        return None

    @property
    def root(self) -> str:
        return self.segments[0]

    def child(self, segment: str) -> "AbilityPath":
        return AbilityPath(self.segments + (segment,))

    def __str__(self) -> str:
        return ".".join(self.segments)


@dataclass(frozen=True)
class TestingNotes:
    """How items under a node are administered and graded."""

    input_modalities: frozenset = frozenset({"text"})
    output_modalities: frozenset = frozenset({"text"})
    tools_allowed: bool = False
    grading: str = "manual"


@dataclass(frozen=True)
class AbilityNode:
    path: AbilityPath
    display_name: str
    weight_points: int
    rule: ScoringRule
    children: tuple["AbilityNode", ...] = ()
    testing_notes: TestingNotes = TestingNotes()

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class Violation:
    """A broken invariant, named by the offending path and rule id."""

    path: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.path} [{self.rule}]: {self.message}"


@dataclass(frozen=True)
class Taxonomy:
    roots: tuple[AbilityNode, ...]
    version: str
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for root in self.roots:
            for node in root.walk():
                index.setdefault(str(node.path), node)
        object.__setattr__(self, "_index", index)

    def walk(self):
        for root in self.roots:
            yield from root.walk()

    def find(self, path: AbilityPath | str) -> AbilityNode | None:
        return self._index.get(str(path))

    def criterion_ids(self) -> list[str]:
        """Every criterion id consumed by some rule, in tree order."""
        seen: dict[str, None] = {}
        for node in self.walk():
            for criterion in rule_criteria(node.rule):
                seen.setdefault(criterion, None)
        return list(seen)

    def percentile_sources(self) -> list[str]:
        out: dict[str, None] = {}
        for node in self.walk():
            if isinstance(node.rule, PercentileBuckets):
                for source in node.rule.inputs:
                    out.setdefault(source, None)
        return list(out)


def lookup(taxonomy: Taxonomy, path: AbilityPath | str) -> AbilityNode:
    """The unique node at ``path``; KeyError for unknown paths."""
    node = taxonomy.find(path)
    if node is None:
        raise KeyError(f"no ability at path {path!r}")
    return node


# --------------------------------------------------------------------------
# Document parsing

_NODE_FIELDS = {"path", "display_name", "weight_points", "rule", "children", "testing_notes"}
_NOTE_FIELDS = {"input_modalities", "output_modalities", "tools_allowed", "grading"}
_RULE_FIELDS = {
    "allocated_sum": {"kind"},
    "count_map": {"kind", "criteria", "awards", "all_bonus"},
    "tier_ladder": {"kind", "tiers"},
    "percentile_buckets": {"kind", "boundaries", "inputs", "combine"},
    "all_or_nothing": {"kind", "criteria", "points"},
    "gated_points": {"kind", "criterion", "points"},
}


def _read_modalities(reader: Reader, obj: dict, key: str, loc: str) -> frozenset:
    raw = reader.str_list(obj, key, loc, required=False)
    if raw is None:
        return frozenset({"text"})
    out = set()
    for i, item in enumerate(raw):
        if item not in MODALITIES:
            reader.fail(f"{loc}.{key}[{i}]", f"unknown modality {item!r}")
        else:
            out.add(item)
    return frozenset(out)


def _read_testing_notes(reader: Reader, data, loc: str) -> TestingNotes:
    obj = reader.obj(data, loc)
    if obj is None:
        return TestingNotes()
    reader.check_keys(obj, loc, _NOTE_FIELDS)
    return TestingNotes(
        input_modalities=_read_modalities(reader, obj, "input_modalities", loc),
        output_modalities=_read_modalities(reader, obj, "output_modalities", loc),
        tools_allowed=reader.bool_(obj, "tools_allowed", loc, required=False, default=False),
        grading=reader.enum(obj, "grading", loc, GRADING_MODES, required=False, default="manual"),
    )


def _read_pairs(reader: Reader, data: list, loc: str, first_kind: str) -> list[tuple]:
    pairs = []
    for i, entry in enumerate(data):
        if (not isinstance(entry, list) or len(entry) != 2):
            reader.fail(f"{loc}[{i}]", "expected a two-element array")
            continue
        first, second = entry
        if first_kind == "int" and (isinstance(first, bool) or not isinstance(first, int)):
            reader.fail(f"{loc}[{i}]", "first element must be an integer")
            continue
        if first_kind == "str" and not isinstance(first, str):
            reader.fail(f"{loc}[{i}]", "first element must be a string")
            continue
        if isinstance(second, bool) or not isinstance(second, int):
            reader.fail(f"{loc}[{i}]", "second element must be an integer")
            continue
        pairs.append((first, second))
    return pairs


def read_rule(reader: Reader, data, loc: str) -> ScoringRule | None:
    """Read a scoring rule object. AllocatedSum children are filled by the caller."""
    obj = reader.obj(data, loc)
    if obj is None:
        return None
    kind = reader.enum(obj, "kind", loc, tuple(_RULE_FIELDS))
    if kind is None:
        return None
    reader.check_keys(obj, loc, _RULE_FIELDS[kind])
    if kind == "allocated_sum":
        return AllocatedSum(children=())
    if kind == "count_map":
        criteria = tuple(reader.str_list(obj, "criteria", loc) or ())
        awards = reader.list_(obj, "awards", loc)
        pairs = tuple(_read_pairs(reader, awards, f"{loc}.awards", "int")) if awards else ()
        return CountMap(criteria=criteria, awards=pairs,
                        all_bonus=reader.int_(obj, "all_bonus", loc, required=False))
    if kind == "tier_ladder":
        tiers = reader.list_(obj, "tiers", loc)
        pairs = tuple(_read_pairs(reader, tiers, f"{loc}.tiers", "str")) if tiers else ()
        return TierLadder(tiers=pairs)
    if kind == "percentile_buckets":
        boundaries = reader.list_(obj, "boundaries", loc)
        pairs = tuple(_read_pairs(reader, boundaries, f"{loc}.boundaries", "int")) if boundaries else ()
        return PercentileBuckets(
            boundaries=pairs,
            inputs=tuple(reader.str_list(obj, "inputs", loc) or ()),
            combine=reader.enum(obj, "combine", loc, COMBINE_MODES, required=False,
                                default="average"),
        )
    if kind == "all_or_nothing":
        return AllOrNothing(
            criteria=tuple(reader.str_list(obj, "criteria", loc) or ()),
            points=reader.int_(obj, "points", loc) or 0,
        )
    return GatedPoints(
        criterion=reader.str_(obj, "criterion", loc) or "",
        points=reader.int_(obj, "points", loc) or 0,
    )


def _read_node(reader: Reader, data, loc: str, inherited: TestingNotes) -> AbilityNode | None:
    obj = reader.obj(data, loc)
    if obj is None:
        return None
    reader.check_keys(obj, loc, _NODE_FIELDS)
    path_text = reader.str_(obj, "path", loc)
    path = None
    if path_text is not None:
        try:
            path = AbilityPath.parse(path_text)
        except ValueError as exc:
            reader.fail(f"{loc}.path", str(exc))
    display = reader.str_(obj, "display_name", loc) or ""
    weight = reader.int_(obj, "weight_points", loc)
    if "testing_notes" in obj:
        notes = _read_testing_notes(reader, obj["testing_notes"], f"{loc}.testing_notes")
    else:
        notes = inherited
    rule = None
    if "rule" in obj:
        rule = read_rule(reader, obj["rule"], f"{loc}.rule")
    else:
        reader.fail(f"{loc}.rule", "missing required field")
    children = []
    raw_children = reader.list_(obj, "children", loc, required=False)
    if raw_children:
        for i, raw_child in enumerate(raw_children):
            child = _read_node(reader, raw_child, f"{loc}.children[{i}]", notes)
            if child is not None:
                children.append(child)
    if path is None or rule is None or weight is None:
        return None
    if isinstance(rule, AllocatedSum):
        rule = AllocatedSum(
            children=tuple((str(c.path), c.weight_points) for c in children)
        )
    return AbilityNode(
        path=path,
        display_name=display,
        weight_points=weight,
        rule=rule,
        children=tuple(children),
        testing_notes=notes,
    )


def parse_taxonomy(document: bytes | str | dict) -> Taxonomy:
    """Read a taxonomy document; raises ParseFailure on structural problems.

    Testing notes inherit downward: a node without its own ``testing_notes``
    uses its parent's.
    """
    data = document if isinstance(document, dict) else load_json_document(document)
    reader = Reader()
    reader.check_keys(data, "", {"version", "abilities"})
    version = reader.str_(data, "version", "document")
    raw_roots = reader.list_(data, "abilities", "document")
    roots = []
    if raw_roots is not None:
        for i, raw_root in enumerate(raw_roots):
            node = _read_node(reader, raw_root, f"abilities[{i}]", TestingNotes())
            if node is not None:
                roots.append(node)
    reader.raise_if_failed()
    return Taxonomy(roots=tuple(roots), version=version or "")


def taxonomy_to_json(taxonomy: Taxonomy) -> dict:
    """Serialize back to the document form (inverse of parse_taxonomy)."""

    def node_to_json(node: AbilityNode) -> dict:
        out: dict = {
            "path": str(node.path),
            "display_name": node.display_name,
            "weight_points": node.weight_points,
            "rule": rule_to_json(node.rule),
            "testing_notes": {
                "input_modalities": sorted(node.testing_notes.input_modalities),
                "output_modalities": sorted(node.testing_notes.output_modalities),
                "tools_allowed": node.testing_notes.tools_allowed,
                "grading": node.testing_notes.grading,
            },
        }
        if node.children:
            out["children"] = [node_to_json(child) for child in node.children]
        return out

    return {
        "version": taxonomy.version,
        "abilities": [node_to_json(root) for root in taxonomy.roots],
    }


# --------------------------------------------------------------------------
# Validation

def validate_taxonomy(taxonomy: Taxonomy) -> list[Violation]:
    """All structural invariants; an empty list means the hierarchy is sound."""
    violations: list[Violation] = []
    seen_paths: set[str] = set()
    all_paths: set[str] = set()

    for node in taxonomy.walk():
        key = str(node.path)
        if key in seen_paths:
            violations.append(Violation(key, "duplicate-path", "duplicate path"))
        seen_paths.add(key)
        all_paths.add(key)

    if len(taxonomy.roots) != 10:
        violations.append(Violation("", "root-count",
                                    f"expected 10 root abilities, got {len(taxonomy.roots)}"))
    root_codes = [str(r.path) for r in taxonomy.roots]
    for code, root in zip(root_codes, taxonomy.roots):
        if len(root.path.segments) != 1:
            violations.append(Violation(code, "root-path", "roots must be single-segment paths"))
        if root.weight_points != 10:
            violations.append(Violation(code, "root-weight",
                                        f"root weight {root.weight_points} != 10"))
    if len(set(root_codes)) != len(root_codes):
        violations.append(Violation("", "root-duplicate", "duplicate root codes"))
    total = sum(r.weight_points for r in taxonomy.roots)
    if total != 100:
        violations.append(Violation("", "root-weight-sum", f"root weights sum {total} != 100"))

    for node in taxonomy.walk():
        key = str(node.path)
        problem = node.path.problem()
        if problem:
            violations.append(Violation(key, "path-format", problem))
        if node.weight_points < 0:
            violations.append(Violation(key, "weight-negative",
                                        f"weight {node.weight_points} < 0"))
        for child in node.children:
            if child.path.segments[:-1] != node.path.segments:
                violations.append(Violation(str(child.path), "path-nesting",
                                            f"child path does not extend {key}"))
        violations.extend(_check_rule(node, all_paths))

    return violations


def _check_rule(node: AbilityNode, all_paths: set[str]) -> list[Violation]:
    out: list[Violation] = []
    key = str(node.path)
    rule = node.rule

    if isinstance(rule, AllocatedSum):
        if not node.children:
            out.append(Violation(key, "leaf-allocated-sum",
                                 "leaf node scored by allocated sum"))
        child_total = sum(c.weight_points for c in node.children)
        if node.children and child_total != node.weight_points:
            out.append(Violation(key, "child-weight-sum",
                                 f"children weights sum {child_total} != {node.weight_points}"))
        declared = tuple((str(c.path), c.weight_points) for c in node.children)
        if rule.children != declared:
            out.append(Violation(key, "allocated-sum-children",
                                 "rule children do not match node children"))
        return out

    # Only allocated sums may carry weighted children; anything else would let
    # the same points flow through two routes.
    for child in node.children:
        if child.weight_points != 0:
            out.append(Violation(str(child.path), "weighted-child-of-non-sum",
                                 "weighted child under a non-sum rule"))

    if rule_max_points(rule) > node.weight_points:
        out.append(Violation(key, "rule-cap",
                             f"rule can award {rule_max_points(rule)} > weight {node.weight_points}"))

    for criterion in rule_criteria(rule):
        if criterion not in all_paths:
            out.append(Violation(key, "unknown-criterion",
                                 f"criterion {criterion!r} is not an ability path"))

    if isinstance(rule, CountMap):
        if not rule.criteria:
            out.append(Violation(key, "count-map-empty", "no criteria listed"))
        if len(set(rule.criteria)) != len(rule.criteria):
            out.append(Violation(key, "count-map-duplicate", "duplicate criteria"))
        if not rule.awards:
            out.append(Violation(key, "count-map-awards", "no awards listed"))
        last = (0, 0)
        for min_count, points in rule.awards:
            if min_count <= last[0] or points <= last[1]:
                out.append(Violation(key, "awards-monotone",
                                     "awards must increase strictly in count and points"))
                break
            last = (min_count, points)
        if any(min_count > len(rule.criteria) for min_count, _ in rule.awards):
            out.append(Violation(key, "count-map-range", "award count exceeds criteria count"))
        if rule.all_bonus is not None and rule.awards:
            if rule.all_bonus < max(points for _, points in rule.awards):
                out.append(Violation(key, "all-bonus-monotone",
                                     "all_bonus below a partial award"))
    elif isinstance(rule, TierLadder):
        if not rule.tiers:
            out.append(Violation(key, "tiers-empty", "no tiers listed"))
        criteria = [criterion for criterion, _ in rule.tiers]
        if len(set(criteria)) != len(criteria):
            out.append(Violation(key, "tiers-duplicate", "duplicate tier criteria"))
        last_points = 0
        for _, points in rule.tiers:
            if points <= last_points:
                out.append(Violation(key, "tiers-monotone",
                                     "tier points must increase strictly"))
                break
            last_points = points
    elif isinstance(rule, PercentileBuckets):
        if not rule.inputs:
            out.append(Violation(key, "percentile-inputs", "no percentile inputs"))
        if len(set(rule.inputs)) != len(rule.inputs):
            out.append(Violation(key, "percentile-inputs", "duplicate percentile inputs"))
        if rule.combine not in COMBINE_MODES:
            out.append(Violation(key, "percentile-combine", f"unknown combine {rule.combine!r}"))
        if not rule.boundaries:
            out.append(Violation(key, "boundaries-empty", "no boundaries listed"))
        else:
            last = (-1, -1)
            for min_pct, points in rule.boundaries:
                if min_pct <= last[0] or points <= last[1]:
                    out.append(Violation(key, "boundaries-monotone",
                                         "boundaries must increase strictly in both coordinates"))
                    break
                last = (min_pct, points)
            if rule.boundaries[0][0] < 0 or rule.boundaries[-1][0] > 100:
                out.append(Violation(key, "boundaries-range",
                                     "boundary percentiles must be within [0, 100]"))
    elif isinstance(rule, AllOrNothing):
        if not rule.criteria:
            out.append(Violation(key, "all-or-nothing-empty", "no criteria listed"))
        if rule.points < 0:
            out.append(Violation(key, "points-negative", "negative points"))
    elif isinstance(rule, GatedPoints):
        if rule.points < 0:
            out.append(Violation(key, "points-negative", "negative points"))

    return out


@functools.lru_cache(maxsize=1)
def canonical_taxonomy() -> Taxonomy:
    """The full encoded hierarchy shipped with the package."""
    data = importlib.resources.files("chc_gauge.data").joinpath("taxonomy.json").read_bytes()
    try:
        return parse_taxonomy(data)
    except ParseFailure as exc:  # pragma: no cover - shipped data must parse
        raise RuntimeError(f"embedded taxonomy is invalid: {exc}") from exc
