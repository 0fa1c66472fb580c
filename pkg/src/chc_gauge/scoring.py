"""Rule interpretation and profile aggregation.

Turns per-criterion proficiency verdicts (plus percentile readings for the
induction channels) into integer points per ability and a 0-100 total.

Verdict semantics follow conjunctive gating: a failed necessary test
dominates any sufficient pass. A sufficient test that passes without its
robustness check earns nothing. Indicative evidence alone never awards
points; it only marks a criterion "suggested" for human confirmation. When
a criterion declares a sufficient test, manual judgments cannot substitute
for it; the bare manual route applies only where no sufficient test exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import fmean

from .battery import EvidenceRequirement
from .evidence import Judgment, Measurement, compare
from .rules import (
    AllocatedSum,
    AllOrNothing,
    CountMap,
    GatedPoints,
    PercentileBuckets,
    ScoringRule,
    TierLadder,
)
from .taxonomy import AbilityNode, Taxonomy

PROFICIENT = "proficient"
NOT_PROFICIENT = "not_proficient"
SUGGESTED = "suggested"
UNTESTED = "untested"
STATUSES = (PROFICIENT, NOT_PROFICIENT, SUGGESTED, UNTESTED)

# Roots scoring at or below this many points are flagged as bottlenecks.
DEFAULT_BOTTLENECK_THRESHOLD = 2

# Perturbed paraphrase passes needed before a memorization-prone pass counts.
ROBUSTNESS_MIN_VARIANT_PASSES = 2


@dataclass(frozen=True)
class ProficiencyVerdict:
    criterion_id: str
    status: str
    basis: tuple[str, ...] = ()
    robustness_passed: bool | None = None

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == PROFICIENT and not self.basis:
            raise ValueError("proficient verdict requires a non-empty basis")


@dataclass(frozen=True)
class JaggednessReport:
    spread: int
    bottlenecks: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class CapabilityProfile:
    per_node: dict  # ability path -> integer points
    total: int
    spread: int
    bottlenecks: tuple[tuple[str, int], ...]
    model_id: str = ""
    taxonomy_version: str = ""

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "taxonomy_version": self.taxonomy_version,
            "per_node": dict(self.per_node),
            "total": self.total,
            "spread": self.spread,
            "bottlenecks": [list(pair) for pair in self.bottlenecks],
        }

    @classmethod
    def from_json(cls, data: dict) -> "CapabilityProfile":
        return cls(
            per_node={str(k): int(v) for k, v in data["per_node"].items()},
            total=int(data["total"]),
            spread=int(data["spread"]),
            bottlenecks=tuple((str(p), int(n)) for p, n in data["bottlenecks"]),
            model_id=str(data.get("model_id", "")),
            taxonomy_version=str(data.get("taxonomy_version", "")),
        )


@dataclass(frozen=True)
class DeltaReport:
    per_path: dict  # ability path -> signed delta (b - a)
    total_delta: int


# --------------------------------------------------------------------------
# Criterion evaluation

def _judgment_pass_rate(judgments: list[Judgment]) -> float:
    return sum(1 for j in judgments if j.passed) / len(judgments)


def _judgment_robustness(judgments: list[Judgment]) -> bool:
    base_passed = any(j.passed and j.variant_index == 0 for j in judgments)
    variant_passes = {j.variant_index for j in judgments if j.passed and j.variant_index > 0}
    return base_passed and len(variant_passes) >= ROBUSTNESS_MIN_VARIANT_PASSES


def _measurement_robustness(measurements: list[Measurement]) -> bool:
    for m in measurements:
        if m.per_variant_results is None:
            continue
        if sum(1 for ok in m.per_variant_results if ok) >= ROBUSTNESS_MIN_VARIANT_PASSES:
            return True
    return False


def evaluate_criterion(
    criterion_id: str,
    requirements: list[EvidenceRequirement],
    measurements: list[Measurement],
    judgments: list[Judgment],
) -> ProficiencyVerdict:
    """Fold threshold evidence and human verdicts into one criterion status.

    Manual requirements (source ``"manual"`` with no recorded measurement)
    are evaluated from the judgment pass rate. A requirement passes only if
    every reading recorded against it clears the threshold.
    """
    by_id = {req.id: req for req in requirements}
    measured: dict[str, list[Measurement]] = {}
    for m in measurements:
        if m.requirement_id not in by_id:
            raise KeyError(
                f"measurement references unknown requirement {m.requirement_id!r}"
            )
        measured.setdefault(m.requirement_id, []).append(m)

    def req_measured(req: EvidenceRequirement) -> bool:
        if req.id in measured:
            return True
        return req.source == "manual" and bool(judgments)

    def req_passes(req: EvidenceRequirement) -> bool:
        if req.id in measured:
            return all(
                compare(m.value, req.comparator, req.threshold)
                for m in measured[req.id]
            )
        return compare(_judgment_pass_rate(judgments), req.comparator, req.threshold)

    def req_robust(req: EvidenceRequirement) -> bool:
        if not req.robustness_required:
            return True
        if req.id in measured:
            return _measurement_robustness(measured[req.id])
        return _judgment_robustness(judgments)

    if not measurements and not judgments:
        return ProficiencyVerdict(criterion_id, UNTESTED)

    basis = tuple(
        [f"measurement:{m.requirement_id}" for m in measurements]
        + [f"judgment:{j.item_id}/{j.variant_index}" for j in judgments]
    )

    necessary = [r for r in requirements if r.semantics == "necessary"]
    sufficient = [r for r in requirements if r.semantics == "sufficient"]
    indicative = [r for r in requirements if r.semantics == "indicative"]

    if any(req_measured(r) and not req_passes(r) for r in necessary):
        return ProficiencyVerdict(criterion_id, NOT_PROFICIENT, basis)

    all_necessary_pass = all(req_measured(r) and req_passes(r) for r in necessary)
    robustness_demanded = False
    sufficient_ok = False
    for req in sufficient:
        if req_measured(req) and req_passes(req) and req_robust(req):
            sufficient_ok = True
            robustness_demanded = robustness_demanded or req.robustness_required
            break
    judgments_pass = all(j.passed for j in judgments)

    if all_necessary_pass and (
        sufficient_ok or (not sufficient and judgments and judgments_pass)
        or (not sufficient and not judgments and necessary and all_necessary_pass)
    ):
        return ProficiencyVerdict(
            criterion_id,
            PROFICIENT,
            basis,
            robustness_passed=True if robustness_demanded else None,
        )

    if judgments and not judgments_pass:
        return ProficiencyVerdict(criterion_id, NOT_PROFICIENT, basis)

    if any(req_measured(r) and req_passes(r) for r in indicative):
        return ProficiencyVerdict(criterion_id, SUGGESTED, basis)

    return ProficiencyVerdict(criterion_id, UNTESTED, basis)


# --------------------------------------------------------------------------
# Rule interpretation

def _status_of(verdict) -> str:
    return verdict.status if isinstance(verdict, ProficiencyVerdict) else verdict


def _proficient(verdicts: dict, criterion: str) -> bool:
    if criterion not in verdicts:
        raise KeyError(f"no verdict entry for criterion {criterion!r}")
    return _status_of(verdicts[criterion]) == PROFICIENT


def score_rule(rule: ScoringRule, verdicts: dict) -> int:
    """Integer points for one rule. Suggested and untested criteria count as
    not proficient for point purposes."""
    if isinstance(rule, AllocatedSum):
        raise TypeError("allocated sums are scored by aggregate(), not score_rule()")
    if isinstance(rule, PercentileBuckets):
        raise TypeError("percentile rules are scored by score_percentile()")
    if isinstance(rule, CountMap):
        count = sum(1 for c in rule.criteria if _proficient(verdicts, c))
        if rule.all_bonus is not None and count == len(rule.criteria):
            return rule.all_bonus
        return max((points for min_count, points in rule.awards if count >= min_count),
                   default=0)
    if isinstance(rule, TierLadder):
        return max((points for criterion, points in rule.tiers
                    if _proficient(verdicts, criterion)), default=0)
    if isinstance(rule, AllOrNothing):
        return rule.points if all(_proficient(verdicts, c) for c in rule.criteria) else 0
    if isinstance(rule, GatedPoints):
        return rule.points if _proficient(verdicts, rule.criterion) else 0
    raise TypeError(f"unknown rule type {type(rule).__name__}")


def bucket_points(boundaries, percentile: float) -> int:
    """Highest boundary at or below the percentile wins (half-open buckets)."""
    points = 0
    for min_pct, pts in boundaries:
        if percentile >= min_pct:
            points = pts
    return points


def score_percentile(rule: PercentileBuckets, inputs: dict) -> int:
    values = []
    for source in rule.inputs:
        if source not in inputs:
            raise KeyError(f"missing percentile input {source!r}")
        value = float(inputs[source])
        if not 0 <= value <= 100:
            raise ValueError(f"percentile {source!r} = {value} outside [0, 100]")
        values.append(value)
    if rule.combine == "per_input_sum":
        return sum(bucket_points(rule.boundaries, v) for v in values)
    return bucket_points(rule.boundaries, fmean(values))


# --------------------------------------------------------------------------
# Aggregation

def _node_points(node: AbilityNode, verdicts: dict, percentiles: dict,
                 per_node: dict) -> int:
    child_points = {str(c.path): _node_points(c, verdicts, percentiles, per_node)
                    for c in node.children}
    if isinstance(node.rule, AllocatedSum):
        points = sum(child_points.values())
    elif isinstance(node.rule, PercentileBuckets):
        # A channel stays untested (0) until every declared reading exists;
        # score_percentile itself is strict about missing inputs.
        if not all(source in percentiles for source in node.rule.inputs):
            points = 0
        else:
            points = score_percentile(node.rule, percentiles)
    else:
        points = score_rule(node.rule, verdicts)
    per_node[str(node.path)] = points
    return points


def aggregate(
    taxonomy: Taxonomy,
    verdicts: dict,
    percentiles: dict | None = None,
    model_id: str = "",
    bottleneck_threshold: int = DEFAULT_BOTTLENECK_THRESHOLD,
) -> CapabilityProfile:
    """Bottom-up fold of every rule into a full capability profile.

    ``verdicts`` must cover every criterion the taxonomy references
    (``untested`` entries are fine); a missing entry raises KeyError.
    """
    percentiles = percentiles or {}
    per_node: dict = {}
    for root in taxonomy.roots:
        _node_points(root, verdicts, percentiles, per_node)
    root_points = [(str(r.path), per_node[str(r.path)]) for r in taxonomy.roots]
    total = sum(points for _, points in root_points)
    values = [points for _, points in root_points]
    spread = max(values) - min(values) if values else 0
    bottlenecks = tuple(sorted(
        ((path, points) for path, points in root_points
         if points <= bottleneck_threshold),
        key=lambda pair: pair[1],
    ))
    return CapabilityProfile(
        per_node=per_node,
        total=total,
        spread=spread,
        bottlenecks=bottlenecks,
        model_id=model_id,
        taxonomy_version=taxonomy.version,
    )


def untested_verdicts(taxonomy: Taxonomy) -> dict:
    """A total verdict map with every criterion untested."""
    return {criterion: UNTESTED for criterion in taxonomy.criterion_ids()}


def jaggedness(profile: CapabilityProfile, taxonomy: Taxonomy,
               threshold: int = DEFAULT_BOTTLENECK_THRESHOLD) -> JaggednessReport:
    """Spread between strongest and weakest broad abilities plus the
    bottleneck list at the given threshold, sorted by ascending points."""
    root_points = [(str(r.path), profile.per_node[str(r.path)]) for r in taxonomy.roots]
    values = [points for _, points in root_points]
    spread = max(values) - min(values) if values else 0
    bottlenecks = tuple(sorted(
        ((path, points) for path, points in root_points if points <= threshold),
        key=lambda pair: pair[1],
    ))
    return JaggednessReport(spread=spread, bottlenecks=bottlenecks)


def compare_profiles(a: CapabilityProfile, b: CapabilityProfile) -> DeltaReport:
    """Signed per-path deltas (b minus a); profiles must share a taxonomy."""
    if a.taxonomy_version != b.taxonomy_version:
        raise ValueError(
            f"taxonomy version mismatch: {a.taxonomy_version!r} vs {b.taxonomy_version!r}"
        )
    paths = set(a.per_node) | set(b.per_node)
    per_path = {path: b.per_node.get(path, 0) - a.per_node.get(path, 0)
                for path in sorted(paths)}
    return DeltaReport(per_path=per_path, total_delta=b.total - a.total)
