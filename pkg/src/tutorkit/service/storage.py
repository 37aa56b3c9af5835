"""Durable JSON document storage plus converters between domain objects and
their stored payloads.

Layout: one directory per entity kind, one pretty-stable JSON file per id.
Writes go through a temp file, fsync, then an atomic rename, so a reader (or
a process restarted after a hard kill) only ever sees complete documents.
"""

from __future__ import annotations

import dataclasses
import json
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass
from datetime import date
from pathlib import Path

from tutorkit import orchestrator as orch
from tutorkit.model import (
    AssistantConfig,
    AvatarChoice,
    EducationLevel,
    GoalType,
    LearnerProfile,
    ReasoningStrategy,
    RequestStatus,
    SupportRequest,
    Tone,
)

SCHEMA_VERSION = 1

_SAFE_NAME = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class NotFound(Exception):
    pass


class StorageCorrupt(Exception):
    def __init__(self, entity_id: str, detail: str = ""):
        self.entity_id = entity_id
        super().__init__(f"stored record {entity_id} is corrupt: {detail}")


@dataclass(frozen=True)
class StoredEntity:
    entity_kind: str
    id: str
    schema_version: int
    payload: dict
    updated_at: int  # UTC ms


def _now_ms() -> int:
    return int(time.time() * 1000)


class DocumentStore:
    """Directory-per-kind JSON documents with atomic, durable writes."""

    def __init__(self, root: Path | str, clock=_now_ms):
        self._root = Path(root)
        self._root.mkdir(parents=True, exist_ok=True)
        self._clock = clock
        self._lock = threading.Lock()

    def _path(self, kind: str, entity_id: str) -> Path:
        if not _SAFE_NAME.match(kind):
            raise ValueError(f"bad entity kind: {kind!r}")
        if not _SAFE_NAME.match(entity_id):
            raise ValueError(f"bad entity id: {entity_id!r}")
        return self._root / kind / f"{entity_id}.json"

    def store(self, kind: str, entity_id: str, payload: dict,
              schema_version: int = SCHEMA_VERSION) -> StoredEntity:
        entity = StoredEntity(kind, entity_id, schema_version, payload, self._clock())
        path = self._path(kind, entity_id)
        doc = {
            "entity_kind": entity.entity_kind,
            "id": entity.id,
            "schema_version": entity.schema_version,
            "payload": entity.payload,
            "updated_at": entity.updated_at,
        }
        with self._lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    json.dump(doc, fh, ensure_ascii=False)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        return entity

    def load(self, kind: str, entity_id: str) -> StoredEntity:
        path = self._path(kind, entity_id)
        if not path.exists():
            raise NotFound(f"{kind}/{entity_id}")
        try:
            doc = json.loads(path.read_text("utf-8"))
            return StoredEntity(
                entity_kind=doc["entity_kind"],
                id=doc["id"],
                schema_version=int(doc["schema_version"]),
                payload=doc["payload"],
                updated_at=int(doc["updated_at"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise StorageCorrupt(f"{kind}/{entity_id}", str(exc)) from exc

    def exists(self, kind: str, entity_id: str) -> bool:
        return self._path(kind, entity_id).exists()

    def list_ids(self, kind: str) -> list[str]:
        folder = self._root / kind
        if not folder.is_dir():
            return []
        return sorted(p.stem for p in folder.glob("*.json"))


# ---------------------------------------------------------------------------
# Domain object converters

def profile_to_doc(p: LearnerProfile) -> dict:
    return {
        "learner_id": p.learner_id,
        "display_name": p.display_name,
        "education_level": p.education_level.value,
        "preferred_language": p.preferred_language,
        "avatar_persona": None if p.avatar_persona is None else {
            "persona_id": p.avatar_persona.persona_id,
            "display_name": p.avatar_persona.display_name,
        },
        "created_at": p.created_at,
    }


def profile_from_doc(doc: dict) -> LearnerProfile:
    avatar = doc.get("avatar_persona")
    return LearnerProfile(
        learner_id=doc["learner_id"],
        display_name=doc["display_name"],
        education_level=EducationLevel(doc["education_level"]),
        preferred_language=doc.get("preferred_language", "en"),
        avatar_persona=None if avatar is None else AvatarChoice(**avatar),
        created_at=doc.get("created_at", 0),
    )


def support_to_doc(r: SupportRequest) -> dict:
    def enum_val(v):
        return v.value if hasattr(v, "value") else v

    return {
        "support_id": r.support_id,
        "learner_id": r.learner_id,
        "learning_objective": r.learning_objective,
        "short_description": r.short_description,
        "subject_area": r.subject_area,
        "goal_type": enum_val(r.goal_type),
        "material_ids": list(r.material_ids),
        "education_level": enum_val(r.education_level),
        "content_language": r.content_language,
        "estimated_duration_minutes": r.estimated_duration_minutes,
        "keywords": list(r.keywords),
        "start_date": r.start_date.isoformat() if r.start_date else None,
        "end_date": r.end_date.isoformat() if r.end_date else None,
        "availability": r.availability,
        "status": r.status.value,
    }


def support_from_doc(doc: dict) -> SupportRequest:
    def opt_enum(value, enum_cls):
        if value is None:
            return None
        try:
            return enum_cls(value)
        except ValueError:
            return value  # unvalidated draft value survives the roundtrip

    return SupportRequest(
        support_id=doc["support_id"],
        learner_id=doc["learner_id"],
        learning_objective=doc.get("learning_objective", ""),
        short_description=doc.get("short_description", ""),
        subject_area=doc.get("subject_area", ""),
        goal_type=opt_enum(doc.get("goal_type"), GoalType),
        material_ids=tuple(doc.get("material_ids", ())),
        education_level=opt_enum(doc.get("education_level"), EducationLevel),
        content_language=doc.get("content_language", ""),
        estimated_duration_minutes=doc.get("estimated_duration_minutes"),
        keywords=tuple(doc.get("keywords", ())),
        start_date=date.fromisoformat(doc["start_date"]) if doc.get("start_date") else None,
        end_date=date.fromisoformat(doc["end_date"]) if doc.get("end_date") else None,
        availability=doc.get("availability"),
        status=RequestStatus(doc.get("status", "Draft")),
    )


def assistant_config_to_doc(cfg: AssistantConfig) -> dict:
    return {
        "support_id": cfg.support_id,
        "default_tone": cfg.default_tone.value,
        "default_reasoning": cfg.default_reasoning.value,
        "content_language": cfg.content_language,
        "depth_level": cfg.depth_level.value,
        "session_target_minutes": cfg.session_target_minutes,
    }


def assistant_config_from_doc(doc: dict) -> AssistantConfig:
    return AssistantConfig(
        support_id=doc["support_id"],
        default_tone=Tone(doc["default_tone"]),
        default_reasoning=ReasoningStrategy(doc["default_reasoning"]),
        content_language=doc["content_language"],
        depth_level=EducationLevel(doc["depth_level"]),
        session_target_minutes=doc.get("session_target_minutes", 25),
    )


def plan_to_doc(plan: orch.LessonPlan) -> dict:
    return {
        "plan_id": plan.plan_id,
        "support_id": plan.support_id,
        "status": plan.status.value,
        "sessions": [dataclasses.asdict(s) for s in plan.sessions],
        "estimated_total": plan.estimated_total,
    }


def plan_from_doc(doc: dict) -> orch.LessonPlan:
    return orch.LessonPlan(
        plan_id=doc["plan_id"],
        support_id=doc["support_id"],
        status=orch.PlanStatus(doc["status"]),
        sessions=tuple(orch.PlanSession(**s) for s in doc["sessions"]),
    )


_EVENT_TYPES = {cls.kind: cls for cls in orch.LEARNER_EVENT_TYPES}


def learner_event_to_doc(ev) -> dict:
    doc = {"kind": ev.kind, "at": ev.at}
    if hasattr(ev, "text"):
        doc["text"] = ev.text
    return doc


def learner_event_from_doc(doc: dict):
    cls = _EVENT_TYPES[doc["kind"]]
    kwargs = {"at": doc.get("at", 0)}
    if "text" in doc and any(f.name == "text" for f in dataclasses.fields(cls)):
        kwargs["text"] = doc["text"]
    return cls(**kwargs)


def quiz_to_doc(quiz: orch.QuizState) -> dict:
    return {
        "quiz_id": quiz.quiz_id,
        "cursor": quiz.cursor,
        "questions": [
            {
                "question_text": q.question_text,
                "expected_answer_key": q.expected_answer_key,
                "source": q.source.value,
                "concept": q.concept,
            }
            for q in quiz.questions
        ],
        "answers": [dataclasses.asdict(a) for a in quiz.answers],
        "score": quiz.score,
    }


def quiz_from_doc(doc: dict) -> orch.QuizState:
    return orch.QuizState(
        quiz_id=doc["quiz_id"],
        cursor=doc["cursor"],
        questions=tuple(
            orch.QuizQuestion(
                question_text=q["question_text"],
                expected_answer_key=q["expected_answer_key"],
                source=orch.QuestionOrigin(q["source"]),
                concept=q["concept"],
            )
            for q in doc["questions"]
        ),
        answers=tuple(
            orch.QuizAnswer(
                given=a["given"],
                correct=a["correct"],
                feedback_text=a["feedback_text"],
                review_offered=a.get("review_offered", False),
            )
            for a in doc["answers"]
        ),
    )


def session_to_doc(state: orch.SessionState) -> dict:
    return {
        "session_id": state.session_id,
        "plan_id": state.plan_id,
        "concepts": list(state.concepts),
        "current_index": state.current_index,
        "phase": state.phase.value,
        "tone_current": state.tone_current.value,
        "reasoning_current": state.reasoning_current.value,
        "reinforce_rounds": state.reinforce_rounds,
        "quiz": None if state.quiz is None else quiz_to_doc(state.quiz),
        "outcomes": list(state.outcomes),
        "trace": [learner_event_to_doc(ev) for ev in state.trace],
    }


def session_from_doc(doc: dict) -> orch.SessionState:
    return orch.SessionState(
        session_id=doc["session_id"],
        plan_id=doc["plan_id"],
        concepts=tuple(doc["concepts"]),
        current_index=doc["current_index"],
        phase=orch.Phase(doc["phase"]),
        tone_current=Tone(doc["tone_current"]),
        reasoning_current=ReasoningStrategy(doc["reasoning_current"]),
        reinforce_rounds=doc["reinforce_rounds"],
        quiz=None if doc.get("quiz") is None else quiz_from_doc(doc["quiz"]),
        outcomes=tuple(bool(o) for o in doc.get("outcomes", ())),
        trace=tuple(learner_event_from_doc(e) for e in doc.get("trace", ())),
    )
