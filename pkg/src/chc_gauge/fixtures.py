"""Verdict/percentile fixture files.

A fixture freezes one model's per-criterion statuses (and percentile
readings for the induction channels) so a profile can be recomputed without
re-running any evaluation. Criteria the fixture omits default to untested;
unknown criterion ids are errors so typos cannot silently zero a score.
"""

from __future__ import annotations

from dataclasses import dataclass

from .parsing import Reader, load_json_document
from .scoring import STATUSES, UNTESTED, untested_verdicts
from .taxonomy import Taxonomy

_FIXTURE_FIELDS = {"model_id", "taxonomy_version", "note", "verdicts", "percentiles"}


@dataclass(frozen=True)
class VerdictFixture:
    model_id: str
    taxonomy_version: str
    verdicts: dict  # criterion id -> status, total over the taxonomy
    percentiles: dict  # percentile source id -> value in [0, 100]
    note: str = ""


def load_fixture(document: bytes | str | dict, taxonomy: Taxonomy) -> VerdictFixture:
    data = document if isinstance(document, dict) else load_json_document(document)
    reader = Reader()
    reader.check_keys(data, "", _FIXTURE_FIELDS)
    model_id = reader.str_(data, "model_id", "document") or ""
    version = reader.str_(data, "taxonomy_version", "document", required=False,
                          default=taxonomy.version) or taxonomy.version
    if version != taxonomy.version:
        reader.fail("taxonomy_version",
                    f"fixture targets {version!r}, active taxonomy is "
                    f"{taxonomy.version!r}")
    note = reader.str_(data, "note", "document", required=False, default="") or ""

    verdicts = untested_verdicts(taxonomy)
    raw_verdicts = data.get("verdicts")
    if not isinstance(raw_verdicts, dict):
        reader.fail("verdicts", "missing or not an object")
        raw_verdicts = {}
    for criterion, status in raw_verdicts.items():
        if criterion not in verdicts:
            reader.fail(f"verdicts.{criterion}", "unknown criterion id")
        elif status not in STATUSES:
            reader.fail(f"verdicts.{criterion}", f"unknown status {status!r}")
        else:
            verdicts[criterion] = status

    known_sources = set(taxonomy.percentile_sources())
    percentiles: dict = {}
    raw_pct = data.get("percentiles", {})
    if not isinstance(raw_pct, dict):
        reader.fail("percentiles", "not an object")
        raw_pct = {}
    for source, value in raw_pct.items():
        if source not in known_sources:
            reader.fail(f"percentiles.{source}", "unknown percentile source")
        elif isinstance(value, bool) or not isinstance(value, (int, float)):
            reader.fail(f"percentiles.{source}", "expected number")
        elif not 0 <= value <= 100:
            reader.fail(f"percentiles.{source}", f"{value} outside [0, 100]")
        else:
            percentiles[source] = float(value)

    reader.raise_if_failed()
    return VerdictFixture(
        model_id=model_id,
        taxonomy_version=version,
        verdicts=verdicts,
        percentiles=percentiles,
        note=note,
    )


def fixture_to_json(fixture: VerdictFixture) -> dict:
    out: dict = {
        "model_id": fixture.model_id,
        "taxonomy_version": fixture.taxonomy_version,
        "verdicts": {k: v for k, v in sorted(fixture.verdicts.items())
                     if v != UNTESTED},
        "percentiles": dict(sorted(fixture.percentiles.items())),
    }
    if fixture.note:
        out["note"] = fixture.note
    return out
