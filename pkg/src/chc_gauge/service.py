"""Grading API consumed by the proctor workbench.

Plain JSON over HTTP, no auth by default (desk-scale localhost tool); an
operator-supplied bearer token enables remote use. All writes flow through
the ledger's protocol checks; every profile answer is a fresh replay of the
ledger file, so restarting the service changes nothing.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from .battery import MemoryProtocol, Suite, load_suite
from .config import GaugeConfig
from .evidence import Judgment, Measurement
from .ledger import Ledger, ProtocolViolation, ToolPolicy, enforce_tool_policy, replay
from .report import render_profile, report_to_json, build_report
from .taxonomy import Taxonomy, TestingNotes, canonical_taxonomy, parse_taxonomy


class SessionRequest(BaseModel):
    model_id: str
    tool_policy: dict = Field(default_factory=dict)
    kind: str = "standard"
    parent: str | None = None


class JudgmentRequest(BaseModel):
    session_id: str
    item_id: str
    verdict: str
    grader: str = "anonymous"
    note: str = ""
    latency_ms: int | None = None
    variant_index: int = 0


class MeasurementRequest(BaseModel):
    ability: str
    requirement_id: str | None = None
    metric: str | None = None
    value: float
    sample_size: int = 0
    run_id: str = ""
    per_variant_results: list[bool] | None = None
    source: str | None = None  # set for percentile inputs


class RunRequest(BaseModel):
    ability: str
    requirement_id: str | None = None


def _violation_detail(violation) -> dict:
    return {"violation": {"path": violation.path, "rule": violation.rule,
                          "message": violation.message}}


class GaugeService:
    """Request handlers plus the small amount of in-memory run state."""

    def __init__(self, config: GaugeConfig, taxonomy: Taxonomy, suite: Suite,
                 ledger: Ledger, adapter=None):
        self.config = config
        self.taxonomy = taxonomy
        self.suite = suite
        self.ledger = ledger
        self.adapter = adapter
        self.runs: dict = {}
        self._runs_lock = threading.Lock()

    # -- item queue -----------------------------------------------------

    def _notes_for(self, doc) -> TestingNotes:
        if doc.testing_notes is not None:
            return doc.testing_notes
        node = self.taxonomy.find(doc.ability)
        return node.testing_notes if node else TestingNotes()

    def _judged_items(self) -> set:
        return {(e.payload["item_id"], e.payload.get("variant_index", 0))
                for e in self.ledger.events if e.kind == "judgment_recorded"}

    def _presented_in_session(self, session_id: str) -> set:
        return {e.payload["item_id"] for e in self.ledger.events
                if e.kind == "item_presented"
                and e.payload.get("session_id") == session_id}

    def session_grader(self, session_id: str) -> str | None:
        """First grader to judge in a session claims it."""
        for event in self.ledger.events:
            if event.kind == "judgment_recorded" and \
                    event.payload.get("session_id") == session_id:
                return event.payload.get("grader")
        return None

    def latency_since_presentation(self, item_id: str,
                                   session_id: str) -> int | None:
        from datetime import datetime, timezone

        presented_at = None
        for event in self.ledger.events:
            if event.kind == "item_presented" and \
                    event.payload.get("item_id") == item_id and \
                    event.payload.get("session_id") == session_id:
                presented_at = event.at
        if presented_at is None:
            return None
        delta = datetime.now(timezone.utc) - datetime.fromisoformat(presented_at)
        return max(0, int(delta.total_seconds() * 1000))

    def next_item(self, session_id: str):
        session = self.ledger.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, detail="unknown session")
        if session.closed:
            raise HTTPException(409, detail={"violation": {
                "path": session_id, "rule": "session-closed",
                "message": "session is closed"}})

        judged = self._judged_items()
        queue = []
        for doc in sorted(self.suite.docs, key=lambda d: str(d.ability)):
            for item in doc.items:
                if (item.id, 0) in judged:
                    continue
                queue.append((doc, item))

        blocked = None
        eligible = []
        for doc, item in queue:
            notes = self._notes_for(doc)
            if enforce_tool_policy(notes, session) is not None:
                continue  # belongs to a session with the other tool policy
            protocol = item.memory_protocol
            if protocol is not None:
                if protocol.kind == "presentation" and session.kind != "presentation":
                    continue
                if protocol.kind == "recall":
                    violation = self.ledger.check_recall_protocol(
                        item.id, protocol, session)
                    if violation is not None:
                        blocked = blocked or violation
                        continue
            eligible.append((doc, item))
        # a protocol session serves its protocol items first
        if session.kind in ("presentation", "recall"):
            eligible.sort(key=lambda pair: (
                pair[1].memory_protocol is None
                or pair[1].memory_protocol.kind != session.kind))

        if not eligible:
            if blocked is not None:
                raise HTTPException(409, detail=_violation_detail(blocked))
            return {"done": True, "remaining": 0}

        doc, item = eligible[0]
        if item.id not in self._presented_in_session(session_id):
            try:
                self.ledger.record_item_presented(
                    item_id=item.id, session_id=session_id, actor="service")
            except ProtocolViolation as exc:
                raise HTTPException(409, detail=_violation_detail(exc.violation))
        model_response = None
        if self.adapter is not None:
            call = self.adapter.generate(item.prompt)
            model_response = call.error if call.failed else call.text
        notes = self._notes_for(doc)
        protocol = item.memory_protocol
        return {
            "done": False,
            "remaining": len(eligible) - 1,
            "item": {
                "id": item.id,
                "ability": str(doc.ability),
                "prompt": {
                    "text": item.prompt.text,
                    "media": [{"kind": m.kind, "uri": m.uri, "note": m.note}
                              for m in item.prompt.media],
                },
                "rubric": {
                    "kind": item.expected.kind,
                    "answer": item.expected.answer,
                    "accept": list(item.expected.accept),
                    "text": item.expected.text,
                    "baseline": item.expected.baseline,
                },
                "variant_index": 0,
                "variant_count": len(item.variants),
                "model_response": model_response,
                "timing": {
                    "budget_ms": item.timing_policy.budget_ms
                    if item.timing_policy else None,
                },
                "protocol": {
                    "tools": "on" if notes.tools_allowed else "off",
                    "memory": protocol.kind if protocol else "none",
                    "grading": notes.grading,
                },
            },
        }

    # -- background benchmark runs ---------------------------------------

    def start_run(self, request: RunRequest) -> str:
        from .harness import run_threshold_benchmark

        if self.adapter is None:
            raise HTTPException(400, detail="no adapter configured")
        docs = self.suite.batteries_for(request.ability)
        if not docs:
            raise HTTPException(404, detail=f"no batteries for {request.ability}")
        run_id = uuid.uuid4().hex[:12]
        with self._runs_lock:
            self.runs[run_id] = {"id": run_id, "status": "running",
                                 "ability": request.ability, "measurements": []}

        def work():
            try:
                seqs = []
                for doc in docs:
                    items = [i for i in doc.items if i.expected.kind == "exact"
                             and i.memory_protocol is None]
                    for requirement in doc.requirements:
                        if request.requirement_id and \
                                requirement.id != request.requirement_id:
                            continue
                        if requirement.source == "manual" or requirement.metric in (
                                "manual_pass_rate", "latency_ms", "stroop_ms",
                                "percentile"):
                            continue
                        if not items:
                            continue
                        measurement = run_threshold_benchmark(
                            self.adapter, requirement, items, ledger=self.ledger,
                            ability=str(doc.ability), run_id=run_id)
                        seqs.append({"requirement_id": requirement.id,
                                     "value": measurement.value})
                with self._runs_lock:
                    self.runs[run_id].update(status="done", measurements=seqs)
            except Exception as exc:  # surfaced via /runs/{id}, never dropped
                with self._runs_lock:
                    self.runs[run_id].update(status="failed", error=str(exc))

        threading.Thread(target=work, daemon=True).start()
        return run_id


def create_app(config: GaugeConfig, taxonomy: Taxonomy, suite: Suite,
               ledger: Ledger, adapter=None, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="gauge", version="0.1.0")
    service = GaugeService(config, taxonomy, suite, ledger, adapter=adapter)
    app.state.service = service

    async def check_auth(request: Request):
        if not config.auth_token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {config.auth_token}":
            raise HTTPException(401, detail="missing or wrong bearer token")

    dependencies = [Depends(check_auth)]

    @app.post("/sessions", status_code=201, dependencies=dependencies)
    def open_session(request: SessionRequest):
        try:
            session = ledger.open_session(
                model_id=request.model_id,
                policy=ToolPolicy.from_json(request.tool_policy),
                kind=request.kind,
                parent=request.parent,
                actor="service",
            )
        except ProtocolViolation as exc:
            raise HTTPException(409, detail=_violation_detail(exc.violation))
        except ValueError as exc:
            raise HTTPException(422, detail=str(exc))
        return {"session_id": session.id, "kind": session.kind,
                "filler_count": session.filler_count,
                "tool_policy": session.tool_policy.to_json()}

    @app.post("/sessions/{session_id}/close", dependencies=dependencies)
    def close_session(session_id: str):
        try:
            seq = ledger.close_session(session_id, actor="service")
        except ProtocolViolation as exc:
            raise HTTPException(409, detail=_violation_detail(exc.violation))
        return {"closed": True, "seq": seq}

    @app.get("/items/next", dependencies=dependencies)
    def items_next(session: str = Query(...)):
        return service.next_item(session)

    @app.post("/judgments", status_code=201, dependencies=dependencies)
    def post_judgment(request: JudgmentRequest):
        pinned = service.session_grader(request.session_id)
        if pinned is not None and pinned != request.grader:
            raise HTTPException(409, detail={"violation": {
                "path": request.session_id, "rule": "single-grader",
                "message": f"session is graded by {pinned!r}"}})
        latency_ms = request.latency_ms
        if latency_ms is None:
            # recorded latency comes from server timestamps; client clocks
            # are advisory only
            latency_ms = service.latency_since_presentation(
                request.item_id, request.session_id)
        judgment = Judgment(
            item_id=request.item_id,
            session_id=request.session_id,
            verdict=request.verdict,
            grader=request.grader,
            note=request.note,
            latency_ms=latency_ms,
            variant_index=request.variant_index,
        )
        try:
            seq = ledger.record_judgment(judgment, actor=f"grader:{request.grader}")
        except ProtocolViolation as exc:
            raise HTTPException(409, detail=_violation_detail(exc.violation))
        except ValueError as exc:
            raise HTTPException(422, detail=str(exc))
        return {"seq": seq}

    @app.post("/measurements", status_code=201, dependencies=dependencies)
    def post_measurement(request: MeasurementRequest):
        try:
            if request.source:
                seq = ledger.record_percentile(request.source, request.value,
                                               ability=request.ability,
                                               actor="service")
            else:
                if not request.requirement_id or not request.metric:
                    raise HTTPException(
                        422, detail="requirement_id and metric are required")
                measurement = Measurement(
                    requirement_id=request.requirement_id,
                    metric=request.metric,
                    value=request.value,
                    sample_size=request.sample_size,
                    run_id=request.run_id,
                    per_variant_results=tuple(request.per_variant_results)
                    if request.per_variant_results else None,
                )
                seq = ledger.record_measurement(measurement, ability=request.ability,
                                                actor="service")
        except ProtocolViolation as exc:
            raise HTTPException(409, detail=_violation_detail(exc.violation))
        except ValueError as exc:
            raise HTTPException(422, detail=str(exc))
        return {"seq": seq}

    @app.get("/profile", dependencies=dependencies)
    def get_profile():
        profile = replay(ledger.events, taxonomy, suite=suite)
        return profile.to_json()

    @app.get("/reports/{fmt}", dependencies=dependencies)
    def get_report(fmt: str):
        if fmt not in ("json", "markdown"):
            raise HTTPException(404, detail=f"unknown report format {fmt!r}")
        profile = replay(ledger.events, taxonomy, suite=suite)
        if fmt == "json":
            report = build_report(profile, list(ledger.events), taxonomy, suite=suite)
            return report_to_json(report, taxonomy)
        document = render_profile(profile, list(ledger.events), taxonomy,
                                  fmt="markdown", suite=suite)
        return PlainTextResponse(document, media_type="text/markdown")

    @app.post("/runs", status_code=202, dependencies=dependencies)
    def post_run(request: RunRequest):
        run_id = service.start_run(request)
        return {"run_id": run_id, "status": "running"}

    @app.get("/runs/{run_id}", dependencies=dependencies)
    def get_run(run_id: str):
        with service._runs_lock:
            run = service.runs.get(run_id)
            if run is None:
                raise HTTPException(404, detail="unknown run")
            return dict(run)

    if ui_dir is not None and ui_dir.exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def build_service(config: GaugeConfig, with_ui: bool = False) -> FastAPI:
    """Assemble the app from a config file's paths."""
    if config.taxonomy_path:
        taxonomy = parse_taxonomy(Path(config.taxonomy_path).read_bytes())
    else:
        taxonomy = canonical_taxonomy()
    battery_dir = Path(config.battery_dir)
    documents = [(str(p), p.read_bytes()) for p in sorted(battery_dir.glob("*.json"))]
    suite = load_suite(documents, taxonomy)
    ledger = Ledger(config.ledger_path, taxonomy, suite=suite,
                    separation=config.separation, actor="service")
    adapter = None
    if config.adapter.id == "stub":
        import json as json_module

        from .harness import StubAdapter

        script = {}
        if config.adapter.stub_script:
            script = json_module.loads(
                Path(config.adapter.stub_script).read_text(encoding="utf-8"))
        adapter = StubAdapter(script=script)
    elif config.adapter.id == "http":
        from .harness import HttpChatAdapter

        endpoint = config.adapter.resolve_endpoint()
        if endpoint:
            adapter = HttpChatAdapter(endpoint, api_key=config.adapter.resolve_key(),
                                      timeout_s=config.adapter.timeout_s)
    ui_dir = None
    if with_ui:
        ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return create_app(config, taxonomy, suite, ledger, adapter=adapter, ui_dir=ui_dir)
