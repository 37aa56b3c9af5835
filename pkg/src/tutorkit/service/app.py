"""HTTP boundary: authentication, onboarding, materials, session events,
streaming chat, dashboards, and health.

All handlers are synchronous and run in the framework's worker pool. Events
for one session are serialized by a per-session lock; the chat stream holds
that lock until its terminal frame, so a session never has two in-flight
transitions. Every 2xx that implies persistence happens after the durable
write, which is what makes the kill-and-restart story work.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

from fastapi import FastAPI, Request, UploadFile
from fastapi.responses import JSONResponse, StreamingResponse

from tutorkit import analytics, gateway, orchestrator as orch
from tutorkit.access import AccessControl, Action, DenyReason, Role, TokenClaims
from tutorkit.model import (
    RequestStatus,
    SupportRequest,
    SupportValidationError,
    derive_assistant_config,
    validate_support_request,
)
from tutorkit.prompts import PromptContext, TaskKind, TemplateCatalog, compose_prompt
from tutorkit.rag import EmptyDocument, RetrievalEngine, SourceKind
from tutorkit.service import storage

SCHEMA_VERSION = 1

RETRIEVE_K = 3
FUSE_BUDGET_TOKENS = 400

DEFAULT_UPLOAD_CAP = 20 * 1024 * 1024
DEFAULT_TOKEN_TTL_MS = 3_600_000

# Phases in which the chat endpoint accepts a learner message.
CHAT_PHASES = frozenset({
    orch.Phase.DELIVERING,
    orch.Phase.PRACTICE_AWAITING_INPUT,
    orch.Phase.QUIZ_IN_PROGRESS,
    orch.Phase.REINFORCING,
})


@dataclass(frozen=True)
class Settings:
    storage_path: Path
    bind_addr: str = "127.0.0.1:8000"
    token_ttl_ms: int = DEFAULT_TOKEN_TTL_MS
    upload_cap_bytes: int = DEFAULT_UPLOAD_CAP
    token_secret: str = "dev-secret-change-me"
    curated_dir: Path | None = None
    llm: gateway.BackendConfig = field(
        default_factory=lambda: gateway.BackendConfig(mode=gateway.BackendMode.MOCK))
    llm_script_path: Path | None = None

    @classmethod
    def from_env(cls, env: Mapping[str, str]) -> "Settings":
        return cls(
            storage_path=Path(env.get("STORAGE_PATH", "./tutorkit-data")),
            bind_addr=env.get("BIND_ADDR", "127.0.0.1:8000"),
            token_ttl_ms=int(env.get("TOKEN_TTL_MS", DEFAULT_TOKEN_TTL_MS)),
            upload_cap_bytes=int(env.get("UPLOAD_CAP_BYTES", DEFAULT_UPLOAD_CAP)),
            token_secret=env.get("TOKEN_SECRET", "dev-secret-change-me"),
            curated_dir=Path(env["CURATED_DIR"]) if env.get("CURATED_DIR") else None,
            llm=gateway.BackendConfig.from_env(env),
            llm_script_path=Path(env["LLM_SCRIPT"]) if env.get("LLM_SCRIPT") else None,
        )


def _default_ids() -> Iterator[str]:
    import uuid

    while True:
        yield uuid.uuid4().hex


def _hash_password(password: str) -> str:
    return hashlib.sha256(password.encode("utf-8")).hexdigest()


class ExactMatchJudge:
    """Offline answer judge: the answer must equal the expected key."""

    def judge(self, question_text: str, expected_key: str, given: str) -> tuple[bool, str]:
        ok = given.strip() == expected_key.strip()
        if ok:
            return True, "Correct."
        return False, f"Not quite. The expected answer was: {expected_key}."


class GatewayJudge:
    """Judges free-form answers by asking the configured model."""

    def __init__(self, backend):
        self._backend = backend

    def judge(self, question_text: str, expected_key: str, given: str) -> tuple[bool, str]:
        messages = [
            {"role": "system", "content": (
                "You grade quiz answers. Reply with the single word CORRECT or "
                "INCORRECT on the first line, then one sentence of feedback.")},
            {"role": "user", "content": (
                f"Question: {question_text}\nExpected answer: {expected_key}\n"
                f"Learner answer: {given}")},
        ]
        text, terminal = gateway.collect(self._backend.complete(messages))
        if isinstance(terminal, gateway.Failure):
            return False, "Could not grade the answer right now; counted as incorrect."
        verdict = text.strip().splitlines()[0].strip().upper() if text.strip() else ""
        correct = verdict.startswith("CORRECT")
        feedback = text.strip() or ("Correct." if correct else "Incorrect.")
        return correct, feedback


class ServiceContext:
    def __init__(
        self,
        settings: Settings,
        *,
        id_factory=None,
        clock=None,
        question_source=None,
        judge=None,
        mock_script: Sequence[Mapping[str, str]] | None = None,
    ):
        self.settings = settings
        self.clock = clock or storage._now_ms
        ids = id_factory or _default_ids().__next__
        self.id_factory = ids
        self.store = storage.DocumentStore(settings.storage_path, clock=self.clock)
        self.catalog = TemplateCatalog.load_default()
        script = list(mock_script) if mock_script is not None else None
        if script is None and settings.llm_script_path is not None:
            script = json.loads(settings.llm_script_path.read_text("utf-8"))
        self.backend = gateway.select_backend(settings.llm, script)
        self.question_source = question_source or orch.MockQuestionSource()
        if judge is not None:
            self.judge = judge
        elif settings.llm.mode is gateway.BackendMode.MOCK:
            self.judge = ExactMatchJudge()
        else:
            self.judge = GatewayJudge(self.backend)
        self.engine = RetrievalEngine()
        self.access = AccessControl(
            secret=settings.token_secret.encode("utf-8"),
            links=self._load_links(),
            clock=self.clock,
        )
        self._session_locks: dict[str, threading.Lock] = {}
        self._event_logs: dict[str, analytics.EventLog] = {}
        self._master = threading.Lock()
        self._rebuild_index()

    # -- startup -----------------------------------------------------------

    def _load_links(self) -> dict[str, set[str]]:
        links: dict[str, set[str]] = {}
        for parent_id in self.store.list_ids("link"):
            doc = self.store.load("link", parent_id).payload
            links[parent_id] = set(doc.get("children", ()))
        return links

    def _rebuild_index(self) -> None:
        if self.settings.curated_dir is not None and self.settings.curated_dir.is_dir():
            for path in sorted(self.settings.curated_dir.glob("*")):
                if path.suffix.lower() in (".txt", ".md") and path.is_file():
                    text = path.read_text("utf-8")
                    if text.split():
                        self.engine.ingest_document(path.stem, text, SourceKind.CURATED)
        for doc_id in self.store.list_ids("document"):
            doc = self.store.load("document", doc_id).payload
            self.engine.ingest_document(
                doc["doc_id"], doc["text"], SourceKind(doc["source_kind"]),
                scope=doc.get("support_id"),
            )

    # -- shared helpers ----------------------------------------------------

    def session_lock(self, session_id: str) -> threading.Lock:
        with self._master:
            return self._session_locks.setdefault(session_id, threading.Lock())

    def event_log(self, learner_id: str) -> analytics.EventLog:
        with self._master:
            log = self._event_logs.get(learner_id)
            if log is None:
                log = analytics.EventLog(self.settings.storage_path / "events" / f"{learner_id}.jsonl")
                self._event_logs[learner_id] = log
            return log

    def record_event(self, learner_id: str, kind: analytics.EventKind,
                     support_id: str | None = None, **fields) -> None:
        ev = analytics.EngagementEvent(
            event_id=fields.pop("event_id", None) or self.id_factory(),
            learner_id=learner_id,
            kind=kind,
            at=fields.pop("at", None) or self.clock(),
            support_id=support_id,
            **fields,
        )
        self.event_log(learner_id).record(ev)

    def seed_users(self, users: Sequence[Mapping]) -> None:
        for user in users:
            subject = user.get("subject_id") or user["username"]
            self.store.store("user", user["username"], {
                "username": user["username"],
                "password_hash": _hash_password(user["password"]),
                "role": Role(user["role"]).value,
                "subject_id": subject,
                "disabled": bool(user.get("disabled", False)),
            })
            if Role(user["role"]) is Role.LEARNER:
                profile = {
                    "learner_id": subject,
                    "display_name": user.get("display_name", user["username"]),
                    "education_level": user.get("education_level", "University"),
                    "preferred_language": user.get("preferred_language", "en"),
                    "avatar_persona": user.get("avatar_persona"),
                    "created_at": self.clock(),
                }
                self.store.store("profile", subject, profile)

    def seed_links(self, links: Mapping[str, Sequence[str]]) -> None:
        for parent, children in links.items():
            self.store.store("link", parent, {"children": list(children)})
            for child in children:
                self.access.link_child(parent, child)


class ApiError(Exception):
    def __init__(self, status: int, error: str, **extra):
        self.status = status
        self.body = {"schema_version": SCHEMA_VERSION, "error": error, **extra}
        super().__init__(error)


def _bearer(request: Request) -> str:
    header = request.headers.get("authorization", "")
    if not header.lower().startswith("bearer "):
        raise ApiError(401, "MissingToken")
    return header[7:].strip()


def _authorize(ctx: ServiceContext, request: Request, action: Action,
               owner: str | None) -> TokenClaims:
    token = _bearer(request)
    claims, reason = ctx.access.verify_token(token)
    if claims is None:
        raise ApiError(401, reason.value if reason else "BadSignature")
    decision = ctx.access.authorize(token, action, owner)
    if not decision.allowed:
        status = 401 if decision.reason in (DenyReason.EXPIRED, DenyReason.BAD_SIGNATURE) else 403
        raise ApiError(status, decision.reason.value if decision.reason else "Forbidden")
    return claims


def _claims_only(ctx: ServiceContext, request: Request) -> TokenClaims:
    token = _bearer(request)
    claims, reason = ctx.access.verify_token(token)
    if claims is None:
        raise ApiError(401, reason.value if reason else "BadSignature")
    return claims


# Which action a read-only learner resource requires, by caller role.
_READ_ACTION = {
    Role.LEARNER: {"dashboard": Action.VIEW_OWN_DASHBOARD, "path": Action.VIEW_OWN_PATH},
    Role.TEACHER: {"dashboard": Action.VIEW_STUDENT_ANALYTICS, "path": Action.VIEW_STUDENT_ANALYTICS},
    Role.PARENT: {"dashboard": Action.VIEW_CHILD_SUMMARY, "path": Action.VIEW_CHILD_SUMMARY},
    Role.ADMINISTRATOR: {"dashboard": Action.VIEW_OWN_DASHBOARD, "path": Action.VIEW_OWN_PATH},
}


# ---------------------------------------------------------------------------
# Session plumbing

def _action_summary(action) -> dict:
    out = {"kind": action.kind}
    for f in dataclasses.fields(action):
        value = getattr(action, f.name)
        if f.name == "quiz":
            continue
        out[f.name] = value
    return out


def _next_message_seq(ctx: ServiceContext, session_id: str) -> int:
    prefix = f"{session_id}.m"
    existing = [i for i in ctx.store.list_ids("message") if i.startswith(prefix)]
    return len(existing)


def _persist_message(ctx: ServiceContext, session_id: str, role: str, text: str,
                     task: str | None = None) -> dict:
    seq = _next_message_seq(ctx, session_id)
    doc = {
        "session_id": session_id,
        "seq": seq,
        "role": role,
        "text": text,
        "task": task,
        "at": ctx.clock(),
    }
    ctx.store.store("message", f"{session_id}.m{seq:06d}", doc)
    return doc


def _session_messages(ctx: ServiceContext, session_id: str) -> list[dict]:
    prefix = f"{session_id}.m"
    out = []
    for entity_id in ctx.store.list_ids("message"):
        if entity_id.startswith(prefix):
            out.append(ctx.store.load("message", entity_id).payload)
    return sorted(out, key=lambda d: d["seq"])


def _load_session(ctx: ServiceContext, session_id: str) -> dict:
    try:
        return ctx.store.load("session", session_id).payload
    except storage.NotFound:
        raise ApiError(404, "UnknownSession") from None


def _store_session(ctx: ServiceContext, wrapper: dict, state: orch.SessionState) -> None:
    wrapper = dict(wrapper)
    wrapper["state"] = storage.session_to_doc(state)
    ctx.store.store("session", state.session_id, wrapper)


def _support_for(ctx: ServiceContext, support_id: str) -> dict:
    return ctx.store.load("support", support_id).payload


def _prompt_context(ctx: ServiceContext, wrapper: dict, state: orch.SessionState,
                    task: TaskKind, topic: str, progress: str = "") -> PromptContext:
    support = _support_for(ctx, wrapper["support_id"])
    cfg = storage.assistant_config_from_doc(support["assistant_config"])
    learner_id = wrapper["learner_id"]
    learner_name = learner_id
    persona = "Tutor"
    try:
        profile = ctx.store.load("profile", learner_id).payload
        learner_name = profile.get("display_name") or learner_id
        avatar = profile.get("avatar_persona")
        if avatar:
            persona = avatar.get("display_name", persona)
    except storage.NotFound:
        pass
    retrieved = ""
    results = ctx.engine.retrieve(topic, RETRIEVE_K, scope=wrapper["support_id"])
    if results:
        retrieved = ctx.engine.fuse_context(topic, results, FUSE_BUDGET_TOKENS)
    return PromptContext(
        assistant_config=cfg,
        task_kind=task,
        learner_level=cfg.depth_level,
        topic=topic,
        session_index=state.current_index,
        progress_summary=progress,
        performance_history=state.outcomes[-5:],
        retrieved_context=retrieved,
        tone_override=state.tone_current,
        reasoning_override=state.reasoning_current,
        learner_name=learner_name,
        persona_name=persona,
    )


def _run_completion(ctx: ServiceContext, prompt_ctx: PromptContext,
                    user_message: str) -> tuple[str, gateway.Usage]:
    prompt = compose_prompt(prompt_ctx, ctx.catalog)
    messages = [
        {"role": "system", "content": prompt.rendered},
        {"role": "user", "content": user_message},
    ]
    text, terminal = gateway.collect(ctx.backend.complete(messages))
    if isinstance(terminal, gateway.Failure):
        raise ApiError(502, "CompletionFailed", kind=terminal.kind.value,
                       retryable=terminal.retryable)
    return terminal.full_text, terminal.usage


def _finish_quiz(ctx: ServiceContext, wrapper: dict, quiz: orch.QuizState) -> None:
    learner_id = wrapper["learner_id"]
    at = ctx.clock()
    ctx.store.store("quiz", quiz.quiz_id, {
        "quiz_id": quiz.quiz_id,
        "session_id": wrapper["state"]["session_id"],
        "learner_id": learner_id,
        "score": quiz.score,
        "at": at,
        "answers": [dataclasses.asdict(a) for a in quiz.answers],
    })
    ctx.record_event(learner_id, analytics.EventKind.QUIZ_COMPLETED,
                     support_id=wrapper["support_id"], score=quiz.score, at=at)


def _process_actions(
    ctx: ServiceContext,
    wrapper: dict,
    state: orch.SessionState,
    actions: list,
    *,
    inline_llm: bool,
) -> tuple[orch.SessionState, list[dict], list[dict]]:
    """Walk the action queue, producing messages and follow-up transitions.

    inline_llm controls whether feedback/review compositions run here
    (non-streamed); the chat endpoint streams those itself and never passes
    them through this path.
    """
    session_id = state.session_id
    queue = list(actions)
    summaries: list[dict] = []
    messages: list[dict] = []

    def say(text: str, task: str | None = None) -> None:
        doc = _persist_message(ctx, session_id, "assistant", text, task)
        messages.append({"role": "assistant", "text": doc["text"]})

    while queue:
        action = queue.pop(0)
        summaries.append(_action_summary(action))
        if isinstance(action, orch.JudgeAnswer):
            correct, feedback = ctx.judge.judge(
                action.question_text, action.expected_answer_key, action.given)
            state, more = orch.advance(
                state,
                orch.AnswerGraded(given=action.given, correct=correct,
                                  feedback_text=feedback, at=ctx.clock()),
                question_source=ctx.question_source,
            )
            say(feedback, task="Grade")
            queue.extend(more)
        elif isinstance(action, orch.ComposeFeedback) and inline_llm:
            prompt_ctx = _prompt_context(ctx, wrapper, state, TaskKind.FEEDBACK,
                                         action.concept, progress=action.submission)
            text, _ = _run_completion(ctx, prompt_ctx, action.submission)
            say(text, task="Feedback")
            state, more = orch.advance(state, orch.FeedbackComplete(at=ctx.clock()),
                                       question_source=ctx.question_source)
            queue.extend(more)
        elif isinstance(action, orch.ComposeReview) and inline_llm:
            prompt_ctx = _prompt_context(ctx, wrapper, state, TaskKind.REVIEW, action.concept)
            text, _ = _run_completion(ctx, prompt_ctx, f"Please review {action.concept}.")
            say(text, task="Review")
            state, more = orch.advance(state, orch.ReviewComplete(at=ctx.clock()),
                                       question_source=ctx.question_source)
            queue.extend(more)
        elif isinstance(action, orch.AskQuestion):
            say(f"Question {action.number} of {orch.QUIZ_LENGTH}: {action.question_text}",
                task="Quiz")
        elif isinstance(action, orch.OfferReview):
            say(f"That one was missed. Want to review {action.concept} before "
                "continuing? Send AcceptReview or DeclineReview.", task="ReviewOffer")
        elif isinstance(action, orch.RecommendReview):
            say(f"Moving on for now, but plan some extra review of {action.concept} "
                "on your own time.", task="Recommend")
        elif isinstance(action, orch.QuizFinished):
            if action.quiz is not None:
                _finish_quiz(ctx, wrapper, action.quiz)
        elif isinstance(action, orch.RequestReplan):
            try:
                plan_doc = ctx.store.load("plan", state.plan_id).payload
                plan_doc["status"] = orch.PlanStatus.REJECTED.value
                ctx.store.store("plan", state.plan_id, plan_doc)
            except storage.NotFound:
                pass
            say("Understood. Update your request and resubmit to get a new plan.",
                task="Replan")
        # ComposeDeliver / ComposeReinforce stay pending: the chat stream
        # delivers them when the learner opens the conversation.
    return state, summaries, messages


def _apply_learner_event(
    ctx: ServiceContext,
    wrapper: dict,
    state: orch.SessionState,
    ev,
) -> tuple[orch.SessionState, list[dict], list[dict]]:
    kwargs = {}
    if isinstance(ev, orch.ChooseQuiz):
        kwargs["quiz_id"] = ctx.id_factory()
    state, actions = orch.advance(state, ev, question_source=ctx.question_source,
                                  **kwargs)
    if isinstance(ev, orch.ApprovePlan):
        try:
            plan_doc = ctx.store.load("plan", state.plan_id).payload
            plan_doc["status"] = orch.PlanStatus.APPROVED.value
            ctx.store.store("plan", state.plan_id, plan_doc)
        except storage.NotFound:
            pass
    # The raw submission goes into the transcript only once the machine has
    # accepted it, and ahead of any reply the actions generate.
    if isinstance(ev, (orch.SubmitPractice, orch.SubmitAnswer)) and ev.text:
        _persist_message(ctx, state.session_id, "user", ev.text)
    return _process_actions(ctx, wrapper, state, actions, inline_llm=True)


# ---------------------------------------------------------------------------
# SSE framing

def _sse_data(payload: dict) -> str:
    return f"data: {json.dumps(payload, sort_keys=True)}\n\n"


def _sse_event(name: str, payload: dict) -> str:
    return f"event: {name}\ndata: {json.dumps(payload, sort_keys=True)}\n\n"


# ---------------------------------------------------------------------------
# Application factory

def create_app(
    settings: Settings | None = None,
    *,
    users: Sequence[Mapping] | None = None,
    links: Mapping[str, Sequence[str]] | None = None,
    id_factory=None,
    clock=None,
    question_source=None,
    judge=None,
    mock_script: Sequence[Mapping[str, str]] | None = None,
) -> FastAPI:
    settings = settings or Settings.from_env(os.environ)
    ctx = ServiceContext(
        settings,
        id_factory=id_factory,
        clock=clock,
        question_source=question_source,
        judge=judge,
        mock_script=mock_script,
    )
    if users:
        ctx.seed_users(users)
    if links:
        ctx.seed_links(links)

    app = FastAPI(title="tutorkit", version="0.1.0", openapi_url=None)
    app.state.ctx = ctx

    @app.exception_handler(ApiError)
    def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body)

    # -- auth --------------------------------------------------------------

    @app.post("/api/auth/login")
    def login(body: dict):
        username = str(body.get("username", ""))
        password = str(body.get("password", ""))
        try:
            user = ctx.store.load("user", username).payload
        except (storage.NotFound, ValueError):
            raise ApiError(401, "BadCredentials")
        if user["password_hash"] != _hash_password(password):
            raise ApiError(401, "BadCredentials")
        if user.get("disabled"):
            raise ApiError(403, "AccountDisabled")
        role = Role(user["role"])
        token = ctx.access.issue_token(user["subject_id"], role, settings.token_ttl_ms)
        permissions = [a.value for a in ctx.access.allowed_actions(role)]
        return {
            "schema_version": SCHEMA_VERSION,
            "token": token,
            "role": role.value,
            "subject_id": user["subject_id"],
            "permissions": permissions,
            "ttl_ms": settings.token_ttl_ms,
        }

    @app.get("/api/permissions")
    def permissions(request: Request):
        claims = _claims_only(ctx, request)
        allowed = [a.value for a in ctx.access.allowed_actions(claims.role)]
        return {
            "schema_version": SCHEMA_VERSION,
            "role": claims.role.value,
            "subject_id": claims.subject,
            "permissions": allowed,
        }

    # -- onboarding --------------------------------------------------------

    _SUPPORT_FIELDS = (
        "learning_objective", "short_description", "subject_area", "goal_type",
        "education_level", "content_language", "estimated_duration_minutes",
        "keywords", "start_date", "end_date", "availability",
    )

    def _record_forwarded_events(learner_id: str, support_id: str | None,
                                 events: Sequence[Mapping]) -> None:
        allowed = {f.name for f in dataclasses.fields(analytics.EngagementEvent)}
        for raw in events:
            try:
                kind = analytics.EventKind(raw.get("kind"))
            except ValueError:
                raise ApiError(400, "UnknownEventKind", kind=str(raw.get("kind")))
            fields_in = {k: v for k, v in raw.items()
                         if k in allowed and k not in ("event_id", "learner_id", "kind",
                                                       "at", "support_id", "late")}
            ctx.record_event(
                learner_id, kind, support_id=support_id,
                event_id=raw.get("event_id"), at=raw.get("at"), **fields_in,
            )

    @app.post("/api/supports", status_code=201)
    def create_support(request: Request, body: dict):
        learner_id = str(body.get("learner_id", ""))
        if not learner_id:
            raise ApiError(400, "MissingLearnerId")
        _authorize(ctx, request, Action.SET_GOALS, learner_id)

        support_id = body.get("support_id")
        if support_id:
            try:
                current = storage.support_from_doc(_support_for(ctx, support_id))
            except storage.NotFound:
                raise ApiError(404, "UnknownSupport")
            if current.learner_id != learner_id:
                raise ApiError(403, "Forbidden")
        else:
            support_id = ctx.id_factory()
            current = SupportRequest(support_id=support_id, learner_id=learner_id)

        _record_forwarded_events(learner_id, support_id, body.get("events", ()))

        from datetime import date as _date

        updates: dict = {}
        for name in _SUPPORT_FIELDS:
            if name not in body:
                continue
            value = body[name]
            if name in ("start_date", "end_date") and isinstance(value, str) and value:
                try:
                    value = _date.fromisoformat(value)
                except ValueError:
                    raise ApiError(400, "BadDate", field=name)
            if name in ("start_date", "end_date") and value == "":
                value = None
            if name == "keywords":
                value = tuple(value)
            if name == "estimated_duration_minutes" and value is not None:
                try:
                    value = int(value)
                except (TypeError, ValueError):
                    raise ApiError(400, "BadNumber", field=name)
            updates[name] = value
        draft = dataclasses.replace(current, **updates, status=RequestStatus.DRAFT)

        old_doc: dict = {}
        try:
            old_doc = _support_for(ctx, support_id)
        except storage.NotFound:
            pass

        if not body.get("submit", True):
            doc = {**old_doc, **storage.support_to_doc(draft)}
            ctx.store.store("support", support_id, doc)
            return {"schema_version": SCHEMA_VERSION, "support_id": support_id,
                    "status": RequestStatus.DRAFT.value}

        try:
            submitted = validate_support_request(draft)
        except SupportValidationError as exc:
            raise ApiError(400, "ValidationFailed", errors=[
                {"code": e.code.value, "field": e.field, "message": e.message}
                for e in exc.errors
            ])

        config = derive_assistant_config(_profile_obj(ctx, learner_id), submitted)

        concepts: list[str] = []
        for doc_id in submitted.material_ids:
            try:
                material = ctx.store.load("document", doc_id).payload
            except storage.NotFound:
                continue
            for concept in orch.extract_concepts(material["text"]):
                if concept.lower() not in {c.lower() for c in concepts}:
                    concepts.append(concept)
        try:
            plan = orch.plan_lessons(submitted, concepts, plan_id=ctx.id_factory())
        except orch.EmptyTopic:
            raise ApiError(400, "EmptyTopic")

        session_id = ctx.id_factory()
        state = orch.SessionState(
            session_id=session_id,
            plan_id=plan.plan_id,
            concepts=tuple(s.concept_title for s in plan.sessions),
            tone_current=config.default_tone,
            reasoning_current=config.default_reasoning,
        )

        support_doc = {
            **storage.support_to_doc(submitted),
            "assistant_config": storage.assistant_config_to_doc(config),
            "plan_id": plan.plan_id,
            "session_id": session_id,
        }
        ctx.store.store("support", support_id, support_doc)
        ctx.store.store("plan", plan.plan_id, storage.plan_to_doc(plan))
        ctx.store.store("session", session_id, {
            "learner_id": learner_id,
            "support_id": support_id,
            "state": storage.session_to_doc(state),
        })
        ctx.record_event(learner_id, analytics.EventKind.SESSION_PHASE_CHANGED,
                         support_id=support_id, phase=state.phase.value)
        return {
            "schema_version": SCHEMA_VERSION,
            "support_id": support_id,
            "status": RequestStatus.SUBMITTED.value,
            "session_id": session_id,
            "assistant_config": storage.assistant_config_to_doc(config),
            "plan": storage.plan_to_doc(plan),
        }

    # -- materials ---------------------------------------------------------

    @app.post("/api/supports/{support_id}/materials", status_code=201)
    def upload_material(support_id: str, request: Request, file: UploadFile):
        try:
            support = _support_for(ctx, support_id)
        except (storage.NotFound, ValueError):
            raise ApiError(404, "UnknownSupport")
        learner_id = support["learner_id"]
        _authorize(ctx, request, Action.UPLOAD_MATERIAL, learner_id)

        raw = file.file.read(settings.upload_cap_bytes + 1)
        if len(raw) > settings.upload_cap_bytes:
            raise ApiError(413, "UploadTooLarge", cap_bytes=settings.upload_cap_bytes)
        if b"\x00" in raw:
            raise ApiError(415, "UnsupportedFormat")
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise ApiError(415, "UnsupportedFormat")

        doc_id = ctx.id_factory()
        try:
            chunks = ctx.engine.ingest_document(doc_id, text, SourceKind.USER_UPLOADED,
                                                scope=support_id)
        except EmptyDocument:
            raise ApiError(400, "EmptyDocument")
        ctx.store.store("document", doc_id, {
            "doc_id": doc_id,
            "support_id": support_id,
            "source_kind": SourceKind.USER_UPLOADED.value,
            "filename": file.filename or doc_id,
            "size": len(raw),
            "text": text,
        })
        support["material_ids"] = list(support.get("material_ids", ())) + [doc_id]
        ctx.store.store("support", support_id, support)
        ctx.record_event(learner_id, analytics.EventKind.MATERIAL_UPLOADED,
                         support_id=support_id, doc_id=doc_id)
        return {
            "schema_version": SCHEMA_VERSION,
            "doc_id": doc_id,
            "chunk_count": len(chunks),
        }

    # -- session events ----------------------------------------------------

    @app.post("/api/sessions/{session_id}/events")
    def session_event(session_id: str, request: Request, body: dict):
        try:
            wrapper = _load_session(ctx, session_id)
        except ValueError:
            raise ApiError(404, "UnknownSession")
        _authorize(ctx, request, Action.CHAT_WITH_TUTOR, wrapper["learner_id"])

        raw_event = body.get("event") or {}
        try:
            ev = storage.learner_event_from_doc({**raw_event, "at": ctx.clock()})
        except (KeyError, TypeError):
            raise ApiError(400, "UnknownEventKind", kind=str(raw_event.get("kind")))

        with ctx.session_lock(session_id):
            state = storage.session_from_doc(wrapper["state"])
            before = state.phase
            try:
                state, summaries, messages = _apply_learner_event(ctx, wrapper, state, ev)
            except orch.InvalidTransition as exc:
                raise ApiError(409, "InvalidTransition", phase=exc.phase.value,
                               event=exc.event_kind)
            except orch.QuestionGenerationFailed as exc:
                raise ApiError(503, "QuestionGenerationFailed", detail=str(exc))
            _store_session(ctx, wrapper, state)
            if state.phase is not before:
                ctx.record_event(wrapper["learner_id"],
                                 analytics.EventKind.SESSION_PHASE_CHANGED,
                                 support_id=wrapper["support_id"],
                                 phase=state.phase.value)

        quiz = state.quiz
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": session_id,
            "phase": state.phase.value,
            "current_index": state.current_index,
            "actions": summaries,
            "messages": messages,
            "quiz": None if quiz is None else {"cursor": quiz.cursor, "score": quiz.score},
        }

    # -- chat --------------------------------------------------------------

    @app.post("/api/sessions/{session_id}/chat")
    def chat(session_id: str, request: Request, body: dict):
        try:
            wrapper = _load_session(ctx, session_id)
        except ValueError:
            raise ApiError(404, "UnknownSession")
        _authorize(ctx, request, Action.CHAT_WITH_TUTOR, wrapper["learner_id"])
        user_message = str(body.get("message", ""))

        state = storage.session_from_doc(wrapper["state"])
        if state.phase not in CHAT_PHASES:
            raise ApiError(409, "PhaseRejectsDialogue", phase=state.phase.value)

        def stream() -> Iterator[str]:
            with ctx.session_lock(session_id):
                fresh = storage.session_from_doc(_load_session(ctx, session_id)["state"])
                if fresh.phase not in CHAT_PHASES:
                    yield _sse_event("error", {"kind": "conflict", "retryable": False,
                                               "phase": fresh.phase.value})
                    return
                yield from _chat_exchange(ctx, wrapper, fresh, user_message)

        return StreamingResponse(stream(), media_type="text/event-stream")

    # -- dashboards --------------------------------------------------------

    def _learner_context(learner_id: str):
        """Latest support, plan, session state and quiz history for a learner."""
        supports = []
        for sid in ctx.store.list_ids("support"):
            entity = ctx.store.load("support", sid)
            if entity.payload.get("learner_id") == learner_id:
                supports.append(entity)
        supports.sort(key=lambda e: (e.updated_at, e.id))
        support = supports[-1].payload if supports else None
        request_obj = storage.support_from_doc(support) if support else None
        plan = None
        states: list[orch.SessionState] = []
        chat_texts: list[str] = []
        session_count = 0
        for e in supports:
            if e.payload.get("session_id"):
                session_count += 1
        if support and support.get("plan_id"):
            try:
                plan = storage.plan_from_doc(ctx.store.load("plan", support["plan_id"]).payload)
            except storage.NotFound:
                plan = None
        if support and support.get("session_id"):
            try:
                wrapper = _load_session(ctx, support["session_id"])
                states = [storage.session_from_doc(wrapper["state"])]
                chat_texts = [m["text"] for m in _session_messages(ctx, support["session_id"])]
            except ApiError:
                states = []
        quiz_results = []
        for qid in ctx.store.list_ids("quiz"):
            q = ctx.store.load("quiz", qid).payload
            if q.get("learner_id") == learner_id:
                quiz_results.append(q)
        quiz_results.sort(key=lambda q: q.get("at", 0))
        history = [
            {"quiz_id": q["quiz_id"], "score": q["score"], "at": q["at"],
             "answers": q["answers"]}
            for q in quiz_results
        ]
        return request_obj, plan, states, history, chat_texts, session_count

    @app.get("/api/learners/{learner_id}/dashboard")
    def dashboard(learner_id: str, request: Request,
                  from_ms: int | None = None, to_ms: int | None = None):
        claims = _claims_only(ctx, request)
        action = _READ_ACTION[claims.role]["dashboard"]
        _authorize(ctx, request, action, learner_id)

        req, plan, states, history, chat_texts, session_count = _learner_context(learner_id)
        window = None
        if from_ms is not None or to_ms is not None:
            window = (from_ms or 0, to_ms if to_ms is not None else 2**62)
        summary = analytics.dashboard_summary(
            learner_id,
            ctx.event_log(learner_id).events(),
            request=req,
            plan=plan,
            states=states,
            quiz_results=history,
            chat_texts=chat_texts,
            session_count=session_count,
            window=window,
        )
        if claims.role is Role.PARENT:
            return ctx.access.parent_scope_filter(claims.subject, summary)
        return summary.to_json()

    @app.get("/api/learners/{learner_id}/path")
    def path(learner_id: str, request: Request):
        claims = _claims_only(ctx, request)
        action = _READ_ACTION[claims.role]["path"]
        _authorize(ctx, request, action, learner_id)

        _req, plan, states, _h, _c, _n = _learner_context(learner_id)
        if plan is None:
            return {"schema_version": SCHEMA_VERSION, "learner_id": learner_id,
                    "plan_status": None, "path": []}
        if plan.status is not orch.PlanStatus.APPROVED:
            return {"schema_version": SCHEMA_VERSION, "learner_id": learner_id,
                    "plan_status": plan.status.value, "path": []}
        entries = analytics.path_progress(plan, states)
        return {
            "schema_version": SCHEMA_VERSION,
            "learner_id": learner_id,
            "plan_status": plan.status.value,
            "path": [
                {"index": e.index, "concept_title": e.concept_title, "status": e.status.value}
                for e in entries
            ],
        }

    # -- health ------------------------------------------------------------

    @app.get("/api/health")
    def health():
        llm = ctx.backend.health_check()
        return {
            "schema_version": SCHEMA_VERSION,
            "status": "ok",
            "llm": {"healthy": llm.healthy, "reason": llm.reason},
            "storage": str(settings.storage_path),
        }

    return app


def _profile_obj(ctx: ServiceContext, learner_id: str):
    from tutorkit.model import EducationLevel, LearnerProfile

    try:
        return storage.profile_from_doc(ctx.store.load("profile", learner_id).payload)
    except storage.NotFound:
        return LearnerProfile(
            learner_id=learner_id,
            display_name=learner_id,
            education_level=EducationLevel.UNIVERSITY,
        )


# ---------------------------------------------------------------------------
# The chat exchange, factored out so the generator stays readable

def _chat_exchange(ctx: ServiceContext, wrapper: dict, state: orch.SessionState,
                   user_message: str) -> Iterator[str]:
    session_id = state.session_id
    _persist_message(ctx, session_id, "user", user_message)
    phase = state.phase
    before = phase

    if phase in (orch.Phase.DELIVERING, orch.Phase.REINFORCING):
        task = TaskKind.DELIVER if phase is orch.Phase.DELIVERING else TaskKind.REVIEW
        topic = state.concept_current
        progress = f"session {state.current_index} of {len(state.concepts)}"
        prompt_ctx = _prompt_context(ctx, wrapper, state, task, topic, progress)
        prompt = compose_prompt(prompt_ctx, ctx.catalog)
        messages = [{"role": "system", "content": prompt.rendered},
                    {"role": "user", "content": user_message}]
        pieces: list[str] = []
        usage = None
        for event in ctx.backend.complete(messages):
            if isinstance(event, gateway.Delta):
                pieces.append(event.text)
                yield _sse_data({"text": event.text})
            elif isinstance(event, gateway.Failure):
                yield _sse_event("error", {"kind": event.kind.value,
                                           "retryable": event.retryable,
                                           "message": event.message})
                return
            else:
                usage = event.usage
        full = "".join(pieces)
        _persist_message(ctx, session_id, "assistant", full, task.value)
        state, actions = orch.advance(state, orch.DeliveryComplete(at=ctx.clock()),
                                      question_source=ctx.question_source)
        state, _s, _m = _process_actions(ctx, wrapper, state, actions, inline_llm=True)
        _store_session(ctx, wrapper, state)
        _note_phase_change(ctx, wrapper, before, state)
        yield _sse_event("done", _done_payload(full, usage, state))
        return

    if phase is orch.Phase.PRACTICE_AWAITING_INPUT:
        state, actions = orch.advance(state, orch.SubmitPractice(text=user_message,
                                                                at=ctx.clock()),
                                      question_source=ctx.question_source)
        compose = next(a for a in actions if isinstance(a, orch.ComposeFeedback))
        rest = [a for a in actions if not isinstance(a, orch.ComposeFeedback)]
        prompt_ctx = _prompt_context(ctx, wrapper, state, TaskKind.FEEDBACK,
                                     compose.concept, progress=compose.submission)
        prompt = compose_prompt(prompt_ctx, ctx.catalog)
        messages = [{"role": "system", "content": prompt.rendered},
                    {"role": "user", "content": user_message}]
        pieces = []
        usage = None
        for event in ctx.backend.complete(messages):
            if isinstance(event, gateway.Delta):
                pieces.append(event.text)
                yield _sse_data({"text": event.text})
            elif isinstance(event, gateway.Failure):
                # Nothing persisted: the stored phase is still
                # PracticeAwaitingInput, so the learner can just resend.
                yield _sse_event("error", {"kind": event.kind.value,
                                           "retryable": event.retryable,
                                           "message": event.message})
                return
            else:
                usage = event.usage
        full = "".join(pieces)
        _persist_message(ctx, session_id, "assistant", full, TaskKind.FEEDBACK.value)
        state, actions = orch.advance(state, orch.FeedbackComplete(at=ctx.clock()),
                                      question_source=ctx.question_source)
        state, _s, _m = _process_actions(ctx, wrapper, state, rest + actions, inline_llm=True)
        _store_session(ctx, wrapper, state)
        _note_phase_change(ctx, wrapper, before, state)
        yield _sse_event("done", _done_payload(full, usage, state))
        return

    # QuizInProgress: the message is the answer; the reply is service-composed.
    state, actions = orch.advance(state, orch.SubmitAnswer(text=user_message,
                                                           at=ctx.clock()),
                                  question_source=ctx.question_source)
    state, _summaries, messages = _process_actions(ctx, wrapper, state, actions,
                                                   inline_llm=True)
    reply = "\n\n".join(m["text"] for m in messages)
    _store_session(ctx, wrapper, state)
    _note_phase_change(ctx, wrapper, before, state)
    parts = [m["text"] for m in messages]
    for i, part in enumerate(parts):
        yield _sse_data({"text": part if i == 0 else "\n\n" + part})
    yield _sse_event("done", _done_payload(reply, None, state))


def _done_payload(full_text: str, usage, state: orch.SessionState) -> dict:
    payload = {
        "text": full_text,
        "phase": state.phase.value,
        "current_index": state.current_index,
    }
    if usage is not None:
        payload["usage"] = {
            "prompt_tokens": usage.prompt_tokens,
            "completion_tokens": usage.completion_tokens,
            "approximate": usage.approximate,
        }
    return payload


def _note_phase_change(ctx: ServiceContext, wrapper: dict, before: orch.Phase,
                       state: orch.SessionState) -> None:
    if state.phase is not before:
        ctx.record_event(wrapper["learner_id"],
                         analytics.EventKind.SESSION_PHASE_CHANGED,
                         support_id=wrapper["support_id"],
                         phase=state.phase.value)
