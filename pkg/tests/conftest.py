"""Shared fixtures: canonical taxonomy, starter suite, fixture profiles, and
a ledger synthesizer that converts a verdict fixture into a full protocol-
compliant event stream."""

from __future__ import annotations

import importlib.resources
from pathlib import Path

import pytest

from chc_gauge.battery import MemoryProtocol, load_suite
from chc_gauge.config import SeparationPolicy
from chc_gauge.evidence import Judgment
from chc_gauge.fixtures import VerdictFixture, load_fixture
from chc_gauge.ledger import Ledger, ToolPolicy
from chc_gauge.scoring import NOT_PROFICIENT, PROFICIENT, UNTESTED
from chc_gauge.taxonomy import canonical_taxonomy


@pytest.fixture(scope="session")
def taxonomy():
    return canonical_taxonomy()


def _data(name: str) -> bytes:
    return importlib.resources.files("chc_gauge.data").joinpath(name).read_bytes()


@pytest.fixture(scope="session")
def gpt4_fixture(taxonomy) -> VerdictFixture:
    return load_fixture(_data("fixtures/gpt4.json"), taxonomy)


@pytest.fixture(scope="session")
def gpt5_fixture(taxonomy) -> VerdictFixture:
    return load_fixture(_data("fixtures/gpt5.json"), taxonomy)


@pytest.fixture(scope="session")
def battery_dir() -> Path:
    return Path(str(importlib.resources.files("chc_gauge.data").joinpath("batteries")))


@pytest.fixture(scope="session")
def starter_suite(taxonomy, battery_dir):
    documents = [(p.name, p.read_bytes()) for p in sorted(battery_dir.glob("*.json"))]
    return load_suite(documents, taxonomy)


def synthesize_ledger(path: Path, taxonomy, fixture: VerdictFixture,
                      min_filler: int = 3) -> Ledger:
    """Build a protocol-compliant ledger whose replay reproduces a fixture.

    Long-term-storage criteria go through the full presentation / filler /
    recall session chain; search-enabled criteria are judged in a
    search-enabled session; everything else lands in one standard session.
    """
    separation = SeparationPolicy(min_filler=min_filler, min_delay_s=0)
    ledger = Ledger(path, taxonomy, separation=separation, actor="fixture")
    tools_off = ToolPolicy(search_enabled=False)
    tools_on = ToolPolicy(search_enabled=True)

    standard = ledger.open_session(fixture.model_id, tools_off)
    search_session = ledger.open_session(fixture.model_id, tools_on)
    presentation = ledger.open_session(fixture.model_id, tools_off,
                                       kind="presentation")

    storage_criteria = [c for c, status in fixture.verdicts.items()
                        if c.startswith("MS.") and status != UNTESTED]
    for criterion in storage_criteria:
        ledger.record_item_presented(
            item_id=f"{criterion}:present", session_id=presentation.id,
            ability=criterion,
            memory_protocol=MemoryProtocol(kind="presentation"))
    for i in range(min_filler):
        ledger.record_item_presented(item_id=f"filler:{i}",
                                     session_id=standard.id,
                                     ability="K.commonsense")
    recall = ledger.open_session(fixture.model_id, tools_off, kind="recall",
                                 parent=presentation.id)

    for criterion, status in sorted(fixture.verdicts.items()):
        if status == UNTESTED:
            continue
        node = taxonomy.find(criterion)
        verdict = "pass" if status == PROFICIENT else "fail"
        if criterion in storage_criteria:
            session_id = recall.id
            protocol = MemoryProtocol(kind="recall", of=f"{criterion}:present")
        elif node.testing_notes.tools_allowed:
            session_id = search_session.id
            protocol = None
        else:
            session_id = standard.id
            protocol = None
        ledger.record_judgment(
            Judgment(item_id=f"{criterion}:item", session_id=session_id,
                     verdict=verdict, grader="fixture"),
            ability=criterion, memory_protocol=protocol)

    for source, value in sorted(fixture.percentiles.items()):
        channel = "R.induction.verbal" if source.endswith("verbal") \
            else "R.induction.visual"
        ledger.record_percentile(source, value, ability=channel)
    return ledger


@pytest.fixture()
def gpt5_ledger(tmp_path, taxonomy, gpt5_fixture) -> Ledger:
    return synthesize_ledger(tmp_path / "gpt5.ledger", taxonomy, gpt5_fixture)


@pytest.fixture()
def gpt4_ledger(tmp_path, taxonomy, gpt4_fixture) -> Ledger:
    return synthesize_ledger(tmp_path / "gpt4.ledger", taxonomy, gpt4_fixture)
