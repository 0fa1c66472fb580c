"""chc-gauge: cognitive-profile evaluation engine.

Encodes a ten-domain ability hierarchy with per-ability point rules,
interprets proficiency verdicts into auditable capability profiles, and
keeps every score traceable through an append-only evidence ledger.
"""

from .battery import (
    BatteryDoc,
    BatteryItem,
    EvidenceRequirement,
    Suite,
    SuiteLoadError,
    load_suite,
    parse_battery,
    serialize_battery,
    validate_battery,
)
from .evidence import Judgment, Measurement
from .fixtures import VerdictFixture, load_fixture
from .ledger import (
    Ledger,
    LedgerCorruption,
    LedgerEvent,
    ProtocolViolation,
    Session,
    ToolPolicy,
    enforce_tool_policy,
    read_ledger_file,
    replay,
)
from .metrics import hallucination_rate, stroop_effect, wer
from .scoring import (
    CapabilityProfile,
    ProficiencyVerdict,
    aggregate,
    compare_profiles,
    evaluate_criterion,
    jaggedness,
    score_percentile,
    score_rule,
    untested_verdicts,
)
from .taxonomy import (
    AbilityNode,
    AbilityPath,
    Taxonomy,
    TestingNotes,
    Violation,
    canonical_taxonomy,
    lookup,
    validate_taxonomy,
)

__version__ = "0.1.0"
