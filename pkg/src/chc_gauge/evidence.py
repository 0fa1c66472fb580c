"""Shared evidence records: automated measurements and human judgments.

Both the scoring engine and the ledger consume these; they live here so the
two modules stay import-cycle free.
"""

from __future__ import annotations

from dataclasses import dataclass

METRIC_KINDS = (
    "accuracy",
    "wer",
    "error_count",
    "latency_ms",
    "correlation",
    "hallucination_rate",
    "percentile",
    "manual_pass_rate",
    "stroop_ms",
)

COMPARATORS = ("<", "<=", ">", ">=")

# Direction a metric improves in; used to check comparator coherence.
HIGHER_IS_BETTER = frozenset({"accuracy", "correlation", "percentile", "manual_pass_rate"})
LOWER_IS_BETTER = frozenset(
    {"wer", "error_count", "latency_ms", "hallucination_rate", "stroop_ms"}
)

JUDGMENT_VERDICTS = ("pass", "fail", "partial")


@dataclass(frozen=True)
class Measurement:
    """One automated metric reading against a named requirement."""

    requirement_id: str
    metric: str
    value: float
    sample_size: int = 0
    run_id: str = ""
    per_variant_results: tuple[bool, ...] | None = None


@dataclass(frozen=True)
class Judgment:
    """One human verdict on a battery item. Partial verdicts carry a note
    but score as fail."""

    item_id: str
    session_id: str
    verdict: str
    grader: str
    note: str = ""
    latency_ms: int | None = None
    variant_index: int = 0

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def compare(value: float, comparator: str, threshold: float) -> bool:
    if comparator == "<":
        return value < threshold
    if comparator == "<=":
        return value <= threshold
    if comparator == ">":
        return value > threshold
    if comparator == ">=":
        return value >= threshold
    raise ValueError(f"unknown comparator {comparator!r}")


def comparator_coherent(metric: str, comparator: str) -> bool:
    """A threshold must gate in the direction the metric improves."""
    if metric in HIGHER_IS_BETTER:
        return comparator in (">", ">=")
    if metric in LOWER_IS_BETTER:
        return comparator in ("<", "<=")
    return False
