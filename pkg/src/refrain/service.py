"""HTTP surface for the full pipeline: interact, verify, generate, compensate.

One generation request runs against exactly one consent snapshot from
verification through ledger append; the snapshot id in the verification
outcome, the manifest, and the ledger entry of a request are always
identical. Outputs are released if and only if their ledger entry
committed. All GET endpoints are side-effect free.
"""

from __future__ import annotations

import hmac
import threading
import time
from dataclasses import dataclass, field as dataclass_field
from datetime import datetime, timezone

from fastapi import Depends, FastAPI, Header, HTTPException, Query
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .blocks import track_from_frames
from .catalogue import Catalogue
from .config import ServiceConfig
from .consent import ConsentRegistry, IntendedUse, UsageKind, load_consent_lines
from .errors import (
    ConfigurationError,
    ConservationError,
    InvalidRequestError,
    NotFoundError,
)
from .generation import GenerationEngine, GenerationOutput, contribution_weights
from .ledger import (
    KIND_GENERATION,
    KIND_GENERATION_BLOCKED,
    KIND_VERIFICATION,
    Ledger,
    allocate,
    compute_fee,
)
from .retrieval import Prompt, PromptKind, RetrievalEngine, RetrievalSession
from .verification import (
    GenerationRequest,
    ReferenceSelection,
    SelectionLevel,
    UnspecifiedPolicy,
    recommend_alternatives,
    request_digest,
    verify,
)


@dataclass
class SessionSlot:
    session: RetrievalSession
    user_id: str
    last_access: float


@dataclass
class AppState:
    """Shared handler state: immutable catalogue, serialized writers."""

    config: ServiceConfig
    catalogue: Catalogue
    registry: ConsentRegistry
    retrieval: RetrievalEngine
    engine: GenerationEngine
    ledger: Ledger
    sessions: dict[str, SessionSlot] = dataclass_field(default_factory=dict)
    outputs: dict[str, GenerationOutput] = dataclass_field(default_factory=dict)
    session_lock: threading.Lock = dataclass_field(default_factory=threading.Lock)
    consent_lock: threading.Lock = dataclass_field(default_factory=threading.Lock)
    ledger_lock: threading.Lock = dataclass_field(default_factory=threading.Lock)

    @classmethod
    def from_config(cls, config: ServiceConfig) -> "AppState":
        if not config.catalogue_path:
            raise ConfigurationError("catalogue_path is required")
        catalogue = Catalogue(config.block_vocabulary, config.hierarchies)
        report = catalogue.ingest(config.catalogue_path)
        if report.rejections:
            raise ConfigurationError(
                "catalogue ingest rejected records: " + "; ".join(str(r) for r in report.rejections)
            )
        registry = ConsentRegistry(catalogue.__contains__)
        if config.consent_path:
            with open(config.consent_path, "r", encoding="utf-8") as handle:
                consent_report = load_consent_lines(registry, handle)
            if consent_report.rejections:
                raise ConfigurationError(
                    "consent fixture rejected records: " + "; ".join(consent_report.rejections)
                )
        return cls.assemble(config, catalogue, registry)

    @classmethod
    def assemble(cls, config: ServiceConfig, catalogue: Catalogue, registry: ConsentRegistry) -> "AppState":
        retrieval = RetrievalEngine(catalogue, dim=config.embedding_dim, default_k=config.retrieval_k)
        engine = GenerationEngine(
            catalogue,
            config.block_vocabulary,
            retrieval=retrieval,
            blend_mode=config.blend_mode,
            blend_alpha=config.blend_alpha,
        )
        ledger = Ledger.load(config.ledger_path) if config.ledger_path else Ledger()
        return cls(config, catalogue, registry, retrieval, engine, ledger)


# ---------------------------------------------------------------------------
# Wire models
# ---------------------------------------------------------------------------


class PromptModel(BaseModel):
    kind: str = "free_text"
    text: str | None = None
    categories: dict[str, list[str]] | None = None

    def to_prompt(self) -> Prompt:
        try:
            kind = PromptKind(self.kind)
        except ValueError:
            raise InvalidRequestError(f"unknown prompt kind {self.kind!r}") from None
        categories = (
            {key: tuple(values) for key, values in self.categories.items()}
            if self.categories is not None
            else None
        )
        return Prompt(kind=kind, text=self.text, categories=categories)


class SessionCreateModel(BaseModel):
    user_id: str
    prompt: PromptModel
    k: int | None = Field(default=None, ge=1)


class RefineModel(BaseModel):
    rejected: list[int] = Field(default_factory=list)


class SelectionModel(BaseModel):
    song_id: int
    function_blocks: list[str] = Field(default_factory=list)
    weight: float = 1.0
    segment: tuple[int, int] | None = None


class UserTrackModel(BaseModel):
    frame_duration_ms: int
    frames: list[dict[str, list[float]]]


class GenerationRequestModel(BaseModel):
    request_id: str
    user_id: str
    selections: list[SelectionModel]
    level: str
    intended_use: str
    unspecified_policy: str = "unconditional"
    seed: int = 0
    user_track: UserTrackModel | None = None

    def to_request(self, state: AppState) -> GenerationRequest:
        try:
            level = SelectionLevel(self.level)
            intended_use = IntendedUse(self.intended_use)
            policy = UnspecifiedPolicy(self.unspecified_policy)
        except ValueError as exc:
            raise InvalidRequestError(str(exc)) from None
        user_track = None
        if self.user_track is not None:
            try:
                user_track = track_from_frames(
                    self.user_track.frame_duration_ms,
                    self.user_track.frames,
                    state.config.block_vocabulary,
                )
            except ValueError as exc:
                raise InvalidRequestError(f"user track: {exc}") from None
        return GenerationRequest(
            request_id=self.request_id,
            user_id=self.user_id,
            selections=tuple(
                ReferenceSelection(
                    song_id=sel.song_id,
                    function_blocks=frozenset(sel.function_blocks),
                    weight=sel.weight,
                    segment=tuple(sel.segment) if sel.segment is not None else None,
                )
                for sel in self.selections
            ),
            level=level,
            intended_use=intended_use,
            unspecified_policy=policy,
            seed=self.seed,
            user_track=user_track,
        )


class GenerateModel(GenerationRequestModel):
    session_id: str | None = None


class ConsentWriteModel(BaseModel):
    usage: dict[str, bool]
    distribution: dict[str, bool]
    actor_id: str = "admin"


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def _song_summary(state: AppState, song_id: int) -> dict:
    song = state.catalogue.get_song(song_id)
    return {
        "song_id": song.song_id,
        "title": song.title,
        "artist_id": song.artist_id,
        "artist_name": song.artist_name,
        "album": song.album,
        "genre_path": list(song.genre_path),
        "tags": sorted(song.tags),
        "release_year": song.release_year,
        "num_frames": song.feature_track.num_frames,
    }


def _alternatives_payload(state: AppState, request, outcome, snapshot) -> list[dict]:
    alternative_sets = recommend_alternatives(
        request,
        outcome,
        snapshot,
        catalogue=state.catalogue,
        engine=state.retrieval,
        k=state.config.retrieval_k,
    )
    return [
        {
            "blocked_song_id": alt.song_id,
            "signal": alt.signal,
            "candidates": [
                {"score": score, **_song_summary(state, song_id)} for song_id, score in alt.items
            ],
        }
        for alt in alternative_sets
    ]


def orchestrate_generate(state: AppState, request: GenerationRequest, prompt: Prompt | None = None) -> dict:
    """Snapshot -> verify -> compose -> allocate -> append, atomically.

    Blocked requests are logged with zero fee and answered with a
    structured denial plus compliant alternatives.
    """
    snapshot = state.registry.take_snapshot()
    outcome = verify(request, snapshot, catalogue=state.catalogue, vocabulary=state.config.block_vocabulary)
    tariff = state.config.tariff()
    if not outcome.cleared:
        with state.ledger_lock:
            entry = state.ledger.append(
                kind=KIND_GENERATION_BLOCKED,
                request_id=request.request_id,
                snapshot_id=snapshot.snapshot_id,
                outcome_digest=outcome.digest(),
                currency=tariff.currency,
            )
        return {
            "verdict": outcome.verdict,
            "outcome": outcome.to_dict(),
            "request_digest": request_digest(request),
            "entry_index": entry.entry_index,
            "alternatives": _alternatives_payload(state, request, outcome, snapshot),
        }

    output = state.engine.generate(request, snapshot, prompt=prompt)
    weights = contribution_weights(output.manifest)
    fee = compute_fee(request.intended_use, tariff)
    allocation = allocate(
        fee,
        weights,
        output.manifest.attributed_fraction,
        tariff,
        state.catalogue.song_to_artist(),
    )
    with state.ledger_lock:
        entry = state.ledger.append(
            kind=KIND_GENERATION,
            request_id=request.request_id,
            snapshot_id=snapshot.snapshot_id,
            outcome_digest=outcome.digest(),
            manifest_digest=output.manifest.digest(),
            output_id=output.output_id,
            fee_minor=fee,
            payouts=allocation.payouts,
            song_weights=weights,
            tta_pool_delta_minor=allocation.tta_pool_delta_minor,
            platform_delta_minor=allocation.platform_delta_minor,
            currency=tariff.currency,
        )
        # Release only after the entry committed: no orphan outputs.
        state.outputs[output.output_id] = output
    return {
        "verdict": outcome.verdict,
        "outcome": outcome.to_dict(),
        "request_digest": request_digest(request),
        "output_id": output.output_id,
        "manifest": output.manifest.to_dict(),
        "contribution_weights": {str(song_id): weight for song_id, weight in weights.items()},
        "fee_minor": fee,
        "payouts": dict(allocation.payouts),
        "tta_pool_delta_minor": allocation.tta_pool_delta_minor,
        "platform_delta_minor": allocation.platform_delta_minor,
        "currency": tariff.currency,
        "entry_index": entry.entry_index,
    }


def _parse_period(value: str | None, key: str) -> int | None:
    """Accept epoch microseconds or ISO-8601 timestamps."""
    if value is None or value == "":
        return None
    try:
        return int(value)
    except ValueError:
        pass
    try:
        parsed = datetime.fromisoformat(value)
    except ValueError:
        raise HTTPException(status_code=400, detail=f"{key}: expected epoch microseconds or ISO-8601") from None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return int(parsed.timestamp() * 1_000_000)


# ---------------------------------------------------------------------------
# App factory
# ---------------------------------------------------------------------------


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="refrain", version="0.1.0")
    app.state.refrain = state

    def require_admin(x_admin_token: str | None = Header(default=None)) -> None:
        expected = state.config.admin_token
        if not expected:
            raise HTTPException(status_code=403, detail="admin API disabled (no admin_token configured)")
        if x_admin_token is None or not hmac.compare_digest(x_admin_token, expected):
            raise HTTPException(status_code=401, detail="bad admin token")

    def get_session(session_id: str) -> SessionSlot:
        with state.session_lock:
            _expire_sessions()
            slot = state.sessions.get(session_id)
            if slot is None:
                raise NotFoundError(f"unknown session {session_id}")
            slot.last_access = time.monotonic()
            return slot

    def _expire_sessions() -> None:
        deadline = time.monotonic() - state.config.session_idle_seconds
        for session_id in [sid for sid, slot in state.sessions.items() if slot.last_access < deadline]:
            del state.sessions[session_id]

    @app.exception_handler(NotFoundError)
    async def _not_found(_, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(InvalidRequestError)
    async def _invalid(_, exc: InvalidRequestError):
        return JSONResponse(status_code=400, content={"detail": list(exc.reasons) or str(exc)})

    @app.exception_handler(ConservationError)
    async def _conservation(_, exc: ConservationError):
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "songs": len(state.catalogue), "ledger_entries": len(state.ledger.entries)}

    # -- catalogue ----------------------------------------------------------

    @app.get("/catalogue/tree/{node:path}")
    def browse(node: str) -> dict:
        children = state.catalogue.browse(node)
        return {
            "node_id": node,
            "children": [
                {
                    "node_id": child.node_id,
                    "label": child.label,
                    "kind": child.kind,
                    "song_id": child.song_id,
                    "leaf": child.is_leaf,
                }
                for child in children
            ],
        }

    @app.get("/catalogue/search")
    def search(q: str = Query(default=""), limit: int = Query(default=10, ge=1, le=100)) -> dict:
        results = state.catalogue.search(q, limit)
        return {
            "query": q,
            "results": [
                {"match_field": field, **_song_summary(state, song_id)} for song_id, field in results
            ],
        }

    @app.get("/catalogue/songs/{song_id}")
    def get_song(song_id: int) -> dict:
        return _song_summary(state, song_id)

    # -- retrieval sessions ----------------------------------------------------

    @app.post("/sessions")
    def create_session(payload: SessionCreateModel) -> dict:
        prompt = payload.prompt.to_prompt()
        session = state.retrieval.open_session(prompt, k=payload.k)
        with state.session_lock:
            state.sessions[session.session_id] = SessionSlot(session, payload.user_id, time.monotonic())
        return {"session_id": session.session_id, "k": session.k}

    @app.post("/sessions/{session_id}/retrieve")
    def retrieve(session_id: str) -> dict:
        slot = get_session(session_id)
        result = state.retrieval.rank_top_k(slot.session)
        return _rank_payload(result)

    @app.post("/sessions/{session_id}/refine")
    def refine(session_id: str, payload: RefineModel | None = None) -> dict:
        slot = get_session(session_id)
        if payload is not None and payload.rejected:
            slot.session.reject(payload.rejected)
        result = state.retrieval.refine(slot.session)
        return _rank_payload(result)

    def _rank_payload(result) -> dict:
        return {
            "signal": result.signal,
            "items": [
                {"score": score, **_song_summary(state, song_id)} for song_id, score in result.items
            ],
        }

    # -- verification and generation ---------------------------------------------

    @app.post("/verify")
    def verify_request(payload: GenerationRequestModel) -> dict:
        request = payload.to_request(state)
        snapshot = state.registry.take_snapshot()
        outcome = verify(
            request, snapshot, catalogue=state.catalogue, vocabulary=state.config.block_vocabulary
        )
        tariff = state.config.tariff()
        with state.ledger_lock:
            state.ledger.append(
                kind=KIND_VERIFICATION,
                request_id=request.request_id,
                snapshot_id=snapshot.snapshot_id,
                outcome_digest=outcome.digest(),
                currency=tariff.currency,
            )
        response = {
            "outcome": outcome.to_dict(),
            "request_digest": request_digest(request),
            "fee_quote_minor": compute_fee(request.intended_use, tariff),
            "currency": tariff.currency,
        }
        if not outcome.cleared:
            response["alternatives"] = _alternatives_payload(state, request, outcome, snapshot)
        return response

    @app.post("/generate")
    def generate(payload: GenerateModel) -> dict:
        request = payload.to_request(state)
        prompt = None
        if payload.session_id is not None:
            prompt = get_session(payload.session_id).session.prompt
        result = orchestrate_generate(state, request, prompt)
        if result["verdict"] != "cleared":
            raise HTTPException(status_code=403, detail=result)
        return result

    @app.get("/outputs/{output_id}")
    def get_output(output_id: str) -> dict:
        output = state.outputs.get(output_id)
        if output is None:
            raise NotFoundError(f"unknown output {output_id}")
        return output.to_doc()

    @app.get("/outputs/{output_id}/provenance")
    def get_provenance(output_id: str) -> dict:
        output = state.outputs.get(output_id)
        if output is None:
            raise NotFoundError(f"unknown output {output_id}")
        return {"output_id": output_id, "manifest": output.manifest.to_dict()}

    # -- ledger -------------------------------------------------------------------

    @app.get("/ledger/entries")
    def ledger_entries(
        from_index: int = Query(default=0, alias="from", ge=0),
        to_index: int | None = Query(default=None, alias="to", ge=0),
    ) -> dict:
        end = len(state.ledger.entries) if to_index is None else min(to_index, len(state.ledger.entries))
        entries = state.ledger.entries[from_index:end]
        check = state.ledger.verify_chain()
        return {
            "chain_ok": check.ok,
            "broken_at": check.broken_at,
            "entries": [dict(e.hashed_fields(), prev_hash=e.prev_hash, entry_hash=e.entry_hash) for e in entries],
        }

    @app.get("/ledger/statement")
    def ledger_statement(
        artist: str,
        from_ts: str | None = Query(default=None, alias="from"),
        to_ts: str | None = Query(default=None, alias="to"),
    ) -> dict:
        statement = state.ledger.statement(
            artist,
            state.catalogue.song_to_artist(),
            start_us=_parse_period(from_ts, "from"),
            end_us=_parse_period(to_ts, "to"),
        )
        return statement.to_dict()

    # -- consent admin ---------------------------------------------------------------

    @app.put("/admin/consent/{song_id}", dependencies=[Depends(require_admin)])
    def put_consent(song_id: int, payload: ConsentWriteModel) -> dict:
        usage = {kind: payload.usage.get(kind.value, False) for kind in UsageKind}
        distribution = {use: payload.distribution.get(use.value, False) for use in IntendedUse}
        unknown = (set(payload.usage) - {k.value for k in UsageKind}) | (
            set(payload.distribution) - {u.value for u in IntendedUse}
        )
        if unknown:
            raise InvalidRequestError(f"unknown grant keys {sorted(unknown)}")
        with state.consent_lock:
            version = state.registry.set_consent(song_id, usage, distribution, actor_id=payload.actor_id)
        return {"song_id": song_id, "version": version}

    @app.delete("/admin/consent/{song_id}", dependencies=[Depends(require_admin)])
    def revoke_consent(song_id: int, actor_id: str = Query(default="admin")) -> dict:
        with state.consent_lock:
            version = state.registry.revoke(song_id, actor_id=actor_id)
        return {"song_id": song_id, "version": version, "revoked": True}

    if state.config.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/studio", StaticFiles(directory=state.config.static_dir, html=True), name="studio")

    return app


def build_app(config: ServiceConfig) -> FastAPI:
    return create_app(AppState.from_config(config))
