"""Automated evidence production against a model endpoint.

The adapter contract is deliberately small: one call in, one timed text
response out. Timing instants include any model "thinking" delay; artificial
latency counts toward time limits. Benchmark items may run concurrently up
to a configured parallelism, but timing measurements require exclusive use
of the adapter and are never parallelized.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import httpx

from .battery import BatteryItem, EvidenceRequirement, PromptSpec, RubricSpec
from .evidence import Measurement
from .metrics import (
    edit_distance,
    exact_match,
    hallucination_rate,
    matthews_correlation,
    normalize_tokens,
)

_TRUE_WORDS = frozenset({"yes", "true", "acceptable", "1"})
_FALSE_WORDS = frozenset({"no", "false", "unacceptable", "0"})


@dataclass(frozen=True)
class AdapterCall:
    """One round trip: response text plus wall-clock instants."""

    text: str
    time_to_first_output_ms: float
    total_ms: float
    timed_out: bool = False
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


class ModelAdapter:
    """Endpoint contract. Timing-capable adapters report both the first
    output instant and the completion instant for every call."""

    id: str = "adapter"
    capabilities: frozenset = frozenset({"text"})
    supports_streaming: bool = False
    timing_capable: bool = True

    def generate(self, prompt: PromptSpec, budget_ms: float | None = None) -> AdapterCall:
        raise NotImplementedError


class StubAdapter(ModelAdapter):
    """Deterministic canned-response adapter for tests and dry runs.

    ``script`` maps prompt text to the response; unknown prompts get
    ``default``. Prompts listed in ``fail`` raise a simulated transport
    error; ``delay_ms`` is reported in the timing instants without really
    sleeping unless ``real_sleep`` is set.
    """

    def __init__(self, script: dict[str, str] | None = None, default: str = "",
                 delay_ms: float = 0.0, first_output_ms: float | None = None,
                 fail: set[str] | None = None, real_sleep: bool = False,
                 capabilities: frozenset | None = None, adapter_id: str = "stub"):
        self.id = adapter_id
        self.script = dict(script or {})
        self.default = default
        self.delay_ms = delay_ms
        self.first_output_ms = delay_ms if first_output_ms is None else first_output_ms
        self.fail = set(fail or ())
        self.real_sleep = real_sleep
        self.capabilities = capabilities or frozenset({"text", "image", "audio", "video"})
        self.calls: list[str] = []

    def generate(self, prompt: PromptSpec, budget_ms: float | None = None) -> AdapterCall:
        self.calls.append(prompt.text)
        if self.real_sleep and self.delay_ms:
            time.sleep(self.delay_ms / 1000)
        if prompt.text in self.fail:
            return AdapterCall("", 0.0, 0.0, error="simulated transport failure")
        text = self.script.get(prompt.text, self.default)
        total = self.delay_ms
        timed_out = budget_ms is not None and total > budget_ms
        return AdapterCall(
            text=text,
            time_to_first_output_ms=min(self.first_output_ms, total),
            total_ms=total,
            timed_out=timed_out,
        )


class HttpChatAdapter(ModelAdapter):
    """Chat-style JSON-over-HTTP adapter with optional streaming timing.

    Expects an endpoint accepting ``{"prompt": ...}`` and answering either
    ``{"text": ...}`` or a plain-text streaming body. Credentials come from
    the environment, never from config values.
    """

    supports_streaming = True

    def __init__(self, base_url: str, api_key: str = "", timeout_s: float = 60.0,
                 adapter_id: str = "http", stream: bool = False,
                 capabilities: frozenset | None = None):
        self.id = adapter_id
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self.stream = stream
        self.capabilities = capabilities or frozenset({"text"})
        headers = {"authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout_s, headers=headers)

    def generate(self, prompt: PromptSpec, budget_ms: float | None = None) -> AdapterCall:
        payload = {"prompt": prompt.text,
                   "media": [{"kind": m.kind, "uri": m.uri} for m in prompt.media]}
        started = time.monotonic()
        try:
            if self.stream:
                chunks: list[str] = []
                first_at = None
                with self._client.stream("POST", f"{self.base_url}/generate",
                                         json=payload) as response:
                    response.raise_for_status()
                    for chunk in response.iter_text():
                        if chunk and first_at is None:
                            first_at = time.monotonic()
                        chunks.append(chunk)
                done = time.monotonic()
                text = "".join(chunks)
                first_at = first_at or done
            else:
                response = self._client.post(f"{self.base_url}/generate", json=payload)
                response.raise_for_status()
                text = response.json().get("text", "")
                done = time.monotonic()
                first_at = done
        except httpx.HTTPError as exc:
            elapsed = (time.monotonic() - started) * 1000
            timed_out = isinstance(exc, httpx.TimeoutException)
            return AdapterCall("", elapsed, elapsed, timed_out=timed_out,
                               error=f"{type(exc).__name__}: {exc}")
        total_ms = (done - started) * 1000
        first_ms = (first_at - started) * 1000
        timed_out = budget_ms is not None and total_ms > budget_ms
        return AdapterCall(text, first_ms, total_ms, timed_out=timed_out)


@dataclass(frozen=True)
class TimingMeasurement:
    item_id: str
    time_to_first_output_ms: float
    total_ms: float
    output_unit_count: int
    timed_out: bool = False

    def __post_init__(self):
        if self.time_to_first_output_ms < 0 or self.total_ms < 0:
            raise ValueError("timing instants must be non-negative")
        if self.time_to_first_output_ms > self.total_ms:
            raise ValueError("first output cannot come after completion")


@dataclass(frozen=True)
class ItemOutcome:
    item_id: str
    response: str
    outcome: str  # correct | wrong | abstained | hallucinated | errored
    error: str = ""


@dataclass(frozen=True)
class RobustnessResult:
    item_id: str
    passes: int
    fails: int
    robustness_passed: bool
    outcomes: tuple[tuple[int, bool], ...]  # (variant index, passed); 0 = base


# --------------------------------------------------------------------------
# Benchmark running

def _check_modalities(adapter: ModelAdapter, items: list[BatteryItem]) -> None:
    for item in items:
        needed = {m.kind for m in item.prompt.media if m.kind != "document"}
        missing = needed - set(adapter.capabilities)
        if missing:
            raise ValueError(
                f"adapter {adapter.id!r} lacks modalities {sorted(missing)} "
                f"for item {item.id!r}")


def _grade(expected: RubricSpec, call: AdapterCall) -> str:
    if call.failed:
        return "errored"
    if expected.kind != "exact":
        raise ValueError("automated runs require exact-keyed items")
    if exact_match(expected.answer, call.text, expected.accept):
        return "correct"
    lowered = call.text.casefold()
    if any(marker.casefold() in lowered for marker in expected.abstain):
        return "abstained"
    return "wrong"


def _binary_label(text: str) -> bool | None:
    joined = " ".join(normalize_tokens(text))
    if joined in _TRUE_WORDS:
        return True
    if joined in _FALSE_WORDS:
        return False
    return None


def _metric_value(metric: str, items: list[BatteryItem],
                  outcomes: list[ItemOutcome]) -> float:
    if metric == "accuracy":
        return sum(1 for o in outcomes if o.outcome == "correct") / len(outcomes)
    if metric == "error_count":
        return float(sum(1 for o in outcomes if o.outcome != "correct"))
    if metric == "hallucination_rate":
        gradings = []
        for o in outcomes:
            if o.outcome == "correct":
                gradings.append("correct")
            elif o.outcome == "abstained":
                gradings.append("abstained")
            else:
                gradings.append("hallucinated")
        return hallucination_rate(gradings)
    if metric == "wer":
        total_distance = 0
        total_reference = 0
        for item, o in zip(items, outcomes):
            reference = normalize_tokens(item.expected.answer)
            hypothesis = normalize_tokens(o.response) if o.outcome != "errored" else []
            if not reference:
                raise ValueError(f"item {item.id!r} has an empty reference transcript")
            total_distance += edit_distance(reference, hypothesis)
            total_reference += len(reference)
        return total_distance / total_reference
    if metric == "correlation":
        pairs = []
        for item, o in zip(items, outcomes):
            expected = _binary_label(item.expected.answer)
            if expected is None:
                raise ValueError(f"item {item.id!r} answer is not a yes/no label")
            predicted = _binary_label(o.response)
            if predicted is None:
                predicted = not expected  # unparseable output scores as wrong
            pairs.append((expected, predicted))
        return matthews_correlation(pairs)
    raise ValueError(f"metric {metric!r} is not produced by the benchmark runner")


def run_threshold_benchmark(
    adapter: ModelAdapter,
    requirement: EvidenceRequirement,
    items: list[BatteryItem],
    ledger=None,
    ability: str = "",
    run_id: str = "",
    parallelism: int = 1,
    retry_transport_errors: bool = False,
) -> Measurement:
    """Query every item, fold the declared metric, and record provenance.

    Transport failures score as incorrect (optionally retried once); they
    are never silently dropped from the denominator. The result is
    order-independent over items.
    """
    if not items:
        raise ValueError("no items to run")
    _check_modalities(adapter, items)

    def run_one(item: BatteryItem) -> ItemOutcome:
        call = adapter.generate(item.prompt)
        if call.failed and retry_transport_errors:
            call = adapter.generate(item.prompt)
        return ItemOutcome(item.id, call.text, _grade(item.expected, call),
                           error=call.error)

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(run_one, items))
    else:
        outcomes = [run_one(item) for item in items]

    value = _metric_value(requirement.metric, items, outcomes)
    measurement = Measurement(
        requirement_id=requirement.id,
        metric=requirement.metric,
        value=value,
        sample_size=len(items),
        run_id=run_id or f"{adapter.id}-{requirement.id}",
    )
    if ledger is not None:
        for item, outcome in zip(items, outcomes):
            ledger.record_item_presented(
                item_id=item.id, session_id=None, ability=ability,
                response=outcome.response, outcome=outcome.outcome,
                actor=f"run:{measurement.run_id}")
        ledger.record_measurement(measurement, ability=ability,
                                  requirement=requirement,
                                  actor=f"run:{measurement.run_id}")
    return measurement


def measure_timing(adapter: ModelAdapter, item: BatteryItem,
                   budget_ms: float | None = None) -> TimingMeasurement:
    """Exclusive-use wall-clock timing of one item, thinking delays included.

    A timeout is recorded as exceeding the budget, never dropped.
    """
    if not getattr(adapter, "timing_capable", False):
        raise ValueError(f"adapter {adapter.id!r} is not timing-capable")
    if budget_ms is None and item.timing_policy is not None:
        budget_ms = item.timing_policy.budget_ms
    call = adapter.generate(item.prompt, budget_ms=budget_ms)
    units = len(normalize_tokens(call.text))
    return TimingMeasurement(
        item_id=item.id,
        time_to_first_output_ms=call.time_to_first_output_ms,
        total_ms=call.total_ms,
        output_unit_count=units,
        timed_out=call.timed_out,
    )


def robustness_run(adapter: ModelAdapter, item: BatteryItem, k: int,
                   seed: int) -> RobustnessResult:
    """Re-administer an item under k seed-chosen paraphrase variants.

    Robust means the base item passes and at least two distinct variants
    pass; that distinguishes rephrasing from repetition.
    """
    if len(item.variants) < k:
        raise ValueError(
            f"item {item.id!r} has {len(item.variants)} variants; {k} requested")
    rng = random.Random(seed)
    chosen = sorted(rng.sample(range(len(item.variants)), k))

    outcomes: list[tuple[int, bool]] = []
    base_call = adapter.generate(item.prompt)
    base_pass = (not base_call.failed) and _grade(item.expected, base_call) == "correct"
    outcomes.append((0, base_pass))
    variant_passes = 0
    for index in chosen:
        call = adapter.generate(item.variants[index])
        passed = (not call.failed) and _grade(item.expected, call) == "correct"
        outcomes.append((index + 1, passed))
        variant_passes += int(passed)

    passes = sum(1 for _, ok in outcomes if ok)
    return RobustnessResult(
        item_id=item.id,
        passes=passes,
        fails=len(outcomes) - passes,
        robustness_passed=base_pass and variant_passes >= 2,
        outcomes=tuple(outcomes),
    )
