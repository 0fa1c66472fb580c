"""Profile and comparison reports.

Reports always show the full cognitive profile, never just the total: a
single summed number can hide a crippling bottleneck, so the per-domain
table leads and the total is rendered last. Every non-zero number in a
report is traceable to ledger event seqs through the evidence index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .ledger import LedgerEvent, replay_state
from .rules import TierLadder
from .scoring import (
    DeltaReport,
    CapabilityProfile,
    NOT_PROFICIENT,
    PROFICIENT,
    SUGGESTED,
    UNTESTED,
    aggregate,
)
from .taxonomy import AbilityNode, Taxonomy

REPORT_FORMATS = ("json", "markdown")


class ReportMismatch(ValueError):
    """The supplied profile does not equal the ledger's replay."""


@dataclass(frozen=True)
class ProfileReport:
    model_id: str
    taxonomy_version: str
    per_node: dict
    total: int
    spread: int
    bottlenecks: tuple[tuple[str, int], ...]
    statuses: dict  # criterion -> status
    evidence_index: dict  # criterion -> list of ledger seqs
    percentiles: dict
    tier_inconsistencies: tuple[str, ...] = ()

    def suggested(self) -> list[str]:
        return sorted(c for c, s in self.statuses.items() if s == SUGGESTED)

    def untested(self) -> list[str]:
        return sorted(c for c, s in self.statuses.items() if s == UNTESTED)


def find_tier_inconsistencies(taxonomy: Taxonomy, statuses: dict) -> tuple[str, ...]:
    """Tier ladders award the highest satisfied tier in full, so a proficient
    upper tier over a failed or untested lower tier still pays out; reports
    flag the oddity instead of withholding points."""
    flags = []
    for node in taxonomy.walk():
        if not isinstance(node.rule, TierLadder):
            continue
        tiers = node.rule.tiers
        for upper in range(len(tiers) - 1, 0, -1):
            if statuses.get(tiers[upper][0]) != PROFICIENT:
                continue
            for lower in range(upper):
                status = statuses.get(tiers[lower][0], UNTESTED)
                if status != PROFICIENT:
                    flags.append(
                        f"{node.path}: {tiers[upper][0]} is proficient while "
                        f"{tiers[lower][0]} is {status}")
    return tuple(sorted(flags))


def build_report(profile: CapabilityProfile, events: list[LedgerEvent],
                 taxonomy: Taxonomy, suite=None) -> ProfileReport:
    """Check profile/ledger consistency and assemble the report data."""
    state = replay_state(events, taxonomy, suite=suite)
    replayed = aggregate(taxonomy, state.verdicts, state.percentiles,
                         model_id=state.model_id)
    if replayed.per_node != profile.per_node or replayed.total != profile.total:
        raise ReportMismatch("profile does not match ledger replay")
    return ProfileReport(
        model_id=profile.model_id or state.model_id,
        taxonomy_version=profile.taxonomy_version,
        per_node=dict(profile.per_node),
        total=profile.total,
        spread=profile.spread,
        bottlenecks=profile.bottlenecks,
        statuses=dict(state.verdicts),
        evidence_index={k: list(v) for k, v in sorted(state.evidence_index.items())},
        percentiles=dict(state.percentiles),
        tier_inconsistencies=find_tier_inconsistencies(taxonomy, state.verdicts),
    )


def report_to_json(report: ProfileReport, taxonomy: Taxonomy) -> dict:
    roots = [
        {
            "path": str(root.path),
            "display_name": root.display_name,
            "points": report.per_node[str(root.path)],
            "max": root.weight_points,
        }
        for root in taxonomy.roots
    ]
    return {
        "model_id": report.model_id,
        "taxonomy_version": report.taxonomy_version,
        "roots": roots,
        "per_node": dict(sorted(report.per_node.items())),
        "statuses": dict(sorted(report.statuses.items())),
        "suggested": report.suggested(),
        "untested": report.untested(),
        "evidence_index": report.evidence_index,
        "percentiles": dict(sorted(report.percentiles.items())),
        "tier_inconsistencies": list(report.tier_inconsistencies),
        "radar": {
            "labels": [r["path"] for r in roots],
            "values": [r["points"] for r in roots],
            "max": 10,
        },
        "bottlenecks": [list(pair) for pair in report.bottlenecks],
        "spread": report.spread,
        "total": report.total,
    }


def report_from_json(data: dict) -> ProfileReport:
    return ProfileReport(
        model_id=data["model_id"],
        taxonomy_version=data["taxonomy_version"],
        per_node={k: int(v) for k, v in data["per_node"].items()},
        total=int(data["total"]),
        spread=int(data["spread"]),
        bottlenecks=tuple((p, int(n)) for p, n in data["bottlenecks"]),
        statuses=dict(data["statuses"]),
        evidence_index={k: list(v) for k, v in data["evidence_index"].items()},
        percentiles={k: float(v) for k, v in data["percentiles"].items()},
        tier_inconsistencies=tuple(data.get("tier_inconsistencies", [])),
    )


def summary_row(per_node: dict, roots, total: int, model_id: str) -> str:
    cells = [model_id] + [str(per_node[str(r.path)]) for r in roots] + [f"**{total}**"]
    return "| " + " | ".join(cells) + " |"


def _breakdown_rows(node: AbilityNode, report: ProfileReport, depth: int,
                    lines: list[str]) -> None:
    for child in node.children:
        path = str(child.path)
        indent = "&nbsp;&nbsp;" * (depth - 1)
        if child.weight_points > 0:
            points = report.per_node[path]
            lines.append(f"| {indent}{child.display_name} | {points} | "
                         f"{child.weight_points} |")
        else:
            status = report.statuses.get(path, UNTESTED)
            marker = {PROFICIENT: "yes", NOT_PROFICIENT: "no",
                      SUGGESTED: "suggested", UNTESTED: "untested"}[status]
            lines.append(f"| {indent}{child.display_name} | {marker} | - |")
        _breakdown_rows(child, report, depth + 1, lines)


def render_markdown(report: ProfileReport, taxonomy: Taxonomy) -> str:
    roots = taxonomy.roots
    lines = [f"# Cognitive profile: {report.model_id or 'unknown model'}", ""]
    header = ["Model"] + [str(r.path) for r in roots] + ["Total"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    lines.append(summary_row(report.per_node, roots, report.total, report.model_id))
    lines.append("")
    if report.bottlenecks:
        flagged = ", ".join(f"{path} ({points})" for path, points in report.bottlenecks)
        lines.append(f"Spread: {report.spread}. Bottlenecks: {flagged}.")
    else:
        lines.append(f"Spread: {report.spread}. Bottlenecks: none.")
    lines.append("")

    for root in roots:
        points = report.per_node[str(root.path)]
        lines.append(f"## {root.display_name} ({root.path}) - {points}/{root.weight_points}")
        lines.append("")
        lines.append("| Ability | Points | Max |")
        lines.append("|---|---|---|")
        _breakdown_rows(root, report, 1, lines)
        lines.append("")

    suggested = report.suggested()
    lines.append("## Requires human confirmation (suggested)")
    lines.append("")
    if suggested:
        lines.extend(f"- {criterion}" for criterion in suggested)
    else:
        lines.append("- none")
    lines.append("")

    if report.tier_inconsistencies:
        lines.append("## Tier inconsistencies")
        lines.append("")
        lines.extend(f"- {flag}" for flag in report.tier_inconsistencies)
        lines.append("")

    untested = report.untested()
    lines.append("## Untested criteria")
    lines.append("")
    if untested:
        lines.extend(f"- {criterion}" for criterion in untested)
    else:
        lines.append("- none")
    lines.append("")

    lines.append("## Evidence index")
    lines.append("")
    if report.evidence_index:
        for criterion, seqs in report.evidence_index.items():
            joined = ", ".join(str(s) for s in seqs)
            lines.append(f"- {criterion}: ledger seq {joined}")
    else:
        lines.append("- no ledger evidence")
    lines.append("")
    return "\n".join(lines)


def render_profile(profile: CapabilityProfile, events: list[LedgerEvent],
                   taxonomy: Taxonomy, fmt: str = "json", suite=None) -> str:
    """Render a profile that must equal the ledger's replay.

    JSON output follows the published report schema; markdown leads with the
    ten-domain summary row and per-ability breakdown tables, the total last
    in the row.
    """
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"unknown report format {fmt!r}")
    report = build_report(profile, events, taxonomy, suite=suite)
    if fmt == "json":
        return json.dumps(report_to_json(report, taxonomy), indent=1, sort_keys=False)
    return render_markdown(report, taxonomy)


def render_delta(delta: DeltaReport, a: CapabilityProfile, b: CapabilityProfile,
                 taxonomy: Taxonomy) -> str:
    """Side-by-side root table for two profiles of the same taxonomy."""
    lines = [f"# {a.model_id or 'a'} vs {b.model_id or 'b'}", ""]
    lines.append("| Ability | " + (a.model_id or "a") + " | " +
                 (b.model_id or "b") + " | Delta |")
    lines.append("|---|---|---|---|")
    for root in taxonomy.roots:
        path = str(root.path)
        change = delta.per_path.get(path, 0)
        lines.append(f"| {path} | {a.per_node.get(path, 0)} | "
                     f"{b.per_node.get(path, 0)} | {change:+d} |")
    lines.append(f"| Total | {a.total} | {b.total} | {delta.total_delta:+d} |")
    lines.append("")
    return "\n".join(lines)
