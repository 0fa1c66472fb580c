"""Scoring rule variants.

Every point-allocation scheme used by the ability hierarchy is one of the
six rule kinds below. Rules are plain immutable data; interpretation lives
in the scoring module. Points are integer percentage points throughout
(granularity 1, no rounding).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

COMBINE_MODES = ("average", "per_input_sum")


@dataclass(frozen=True)
class AllocatedSum:
    """Internal node: points are the sum of the children's points."""

    children: tuple[tuple[str, int], ...]  # (ability path, weight_points)


@dataclass(frozen=True)
class CountMap:
    """Points keyed to how many of the listed criteria are proficient.

    ``awards`` is strictly increasing in both coordinates; the award for a
    count is the highest entry whose min_count is satisfied. ``all_bonus``,
    when set, is the total awarded only when every criterion is proficient.
    """

    criteria: tuple[str, ...]
    awards: tuple[tuple[int, int], ...]  # (min_count, points)
    all_bonus: int | None = None


@dataclass(frozen=True)
class TierLadder:
    """Cumulative tiers: the highest satisfied tier's points are awarded.

    A higher tier pays out in full even if lower tiers are failed or
    untested.
    """

    tiers: tuple[tuple[str, int], ...]  # (criterion, cumulative_points)


@dataclass(frozen=True)
class PercentileBuckets:
    """Maps human-normed percentiles to points.

    ``combine="average"`` averages the named inputs and buckets the mean;
    ``combine="per_input_sum"`` buckets each input and sums the results.
    Boundaries are half-open from below: a percentile equal to a boundary
    lands in that boundary's bucket.
    """

    boundaries: tuple[tuple[int, int], ...]  # (min_percentile, points)
    inputs: tuple[str, ...]
    combine: str = "average"


@dataclass(frozen=True)
class AllOrNothing:
    """Points awarded only when every listed criterion is proficient."""

    criteria: tuple[str, ...]
    points: int


@dataclass(frozen=True)
class GatedPoints:
    """Points gated on a single criterion."""

    criterion: str
    points: int


ScoringRule = Union[
    AllocatedSum, CountMap, TierLadder, PercentileBuckets, AllOrNothing, GatedPoints
]


def rule_criteria(rule: ScoringRule) -> tuple[str, ...]:
    """Criterion ids a rule consumes (empty for sums and percentile rules)."""
    if isinstance(rule, CountMap):
        return rule.criteria
    if isinstance(rule, TierLadder):
        return tuple(criterion for criterion, _ in rule.tiers)
    if isinstance(rule, AllOrNothing):
        return rule.criteria
    if isinstance(rule, GatedPoints):
        return (rule.criterion,)
    return ()


def rule_max_points(rule: ScoringRule) -> int:
    """The largest point total a rule can yield."""
    if isinstance(rule, AllocatedSum):
        return sum(weight for _, weight in rule.children)
    if isinstance(rule, CountMap):
        best = max((points for _, points in rule.awards), default=0)
        if rule.all_bonus is not None:
            best = max(best, rule.all_bonus)
        return best
    if isinstance(rule, TierLadder):
        return max((points for _, points in rule.tiers), default=0)
    if isinstance(rule, PercentileBuckets):
        per_channel = max((points for _, points in rule.boundaries), default=0)
        if rule.combine == "per_input_sum":
            return per_channel * len(rule.inputs)
        return per_channel
    if isinstance(rule, AllOrNothing):
        return rule.points
    return rule.points


def rule_to_json(rule: ScoringRule) -> dict:
    """Encode a rule as a plain JSON object (inverse of rule_from_json)."""
    if isinstance(rule, AllocatedSum):
        return {"kind": "allocated_sum"}
    if isinstance(rule, CountMap):
        out: dict = {
            "kind": "count_map",
            "criteria": list(rule.criteria),
            "awards": [list(pair) for pair in rule.awards],
        }
        if rule.all_bonus is not None:
            out["all_bonus"] = rule.all_bonus
        return out
    if isinstance(rule, TierLadder):
        return {"kind": "tier_ladder", "tiers": [list(pair) for pair in rule.tiers]}
    if isinstance(rule, PercentileBuckets):
        return {
            "kind": "percentile_buckets",
            "boundaries": [list(pair) for pair in rule.boundaries],
            "inputs": list(rule.inputs),
            "combine": rule.combine,
        }
    if isinstance(rule, AllOrNothing):
        return {
            "kind": "all_or_nothing",
            "criteria": list(rule.criteria),
            "points": rule.points,
        }
    return {"kind": "gated_points", "criterion": rule.criterion, "points": rule.points}
