"""Behavioral analytics: append-only event capture, engagement scoring, and
dashboard/path aggregates.

The engagement score synthesizes six indicators into a 0..100 total:

    total = 100 * (0.25*objective_quality + 0.25*completion_rate
                   + 0.15*time_investment + 0.15*material_upload
                   + 0.10*goal_preference_set + 0.10*planning_horizon_set)

Each sub-score lives in [0, 1], so the total is bounded by construction. The
arithmetic is kept in exactly this order so equal inputs give bit-equal
totals everywhere the formula is evaluated.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from tutorkit.model import SupportRequest
from tutorkit.orchestrator import LessonPlan, Phase, PlanStatus, SessionState

SCHEMA_VERSION = 1

# Wizard steps: 3 (materials) is optional, the rest are mandatory.
MANDATORY_STEPS = (1, 2, 4, 5, 6)
OPTIONAL_STEPS = (3,)

# Total step time is capped at 600 seconds when scoring time investment.
TIME_CAP_MS = 600_000

WEIGHTS = {
    "objective_quality": 0.25,
    "completion_rate": 0.25,
    "time_investment": 0.15,
    "material_upload": 0.15,
    "goal_preference_set": 0.10,
    "planning_horizon_set": 0.10,
}


class EventKind(str, Enum):
    STEP_ENTERED = "StepEntered"
    STEP_EXITED = "StepExited"
    FIELD_EDITED = "FieldEdited"
    MATERIAL_UPLOADED = "MaterialUploaded"
    GOAL_TYPE_SELECTED = "GoalTypeSelected"
    DATES_SELECTED = "DatesSelected"
    SESSION_PHASE_CHANGED = "SessionPhaseChanged"
    QUIZ_COMPLETED = "QuizCompleted"


@dataclass(frozen=True)
class EngagementEvent:
    event_id: str
    learner_id: str
    kind: EventKind
    at: int  # UTC ms
    support_id: str | None = None
    step: int | None = None
    field_name: str | None = None
    text_length: int | None = None
    doc_id: str | None = None
    goal: str | None = None
    start: str | None = None  # ISO date
    end: str | None = None  # ISO date
    phase: str | None = None
    score: int | None = None
    late: bool = False


def event_to_dict(ev: EngagementEvent) -> dict:
    out = {"schema_version": SCHEMA_VERSION}
    for f in dataclasses.fields(ev):
        value = getattr(ev, f.name)
        if value is None:
            continue
        out[f.name] = value.value if isinstance(value, EventKind) else value
    return out


def event_from_dict(raw: dict) -> EngagementEvent:
    known = {f.name for f in dataclasses.fields(EngagementEvent)}
    kwargs = {k: v for k, v in raw.items() if k in known}
    kwargs["kind"] = EventKind(kwargs["kind"])
    return EngagementEvent(**kwargs)


class RecordOutcome(str, Enum):
    ACCEPTED = "Accepted"
    DUPLICATE_IGNORED = "DuplicateIgnored"


class EventLog:
    """Append-only event store, idempotent by event_id.

    Events arriving with a timestamp behind the learner's stream are kept but
    flagged late. When a path is given, every accepted event is appended as
    one JSON line and fsynced before record() returns.
    """

    def __init__(self, path: Path | str | None = None):
        self._path = Path(path) if path is not None else None
        self._events: list[EngagementEvent] = []
        self._seen: set[str] = set()
        self._max_at: dict[str, int] = {}
        if self._path is not None and self._path.exists():
            for line in self._path.read_text("utf-8").splitlines():
                if line.strip():
                    self._absorb(event_from_dict(json.loads(line)), persist=False)

    def _absorb(self, ev: EngagementEvent, persist: bool) -> RecordOutcome:
        if ev.event_id in self._seen:
            return RecordOutcome.DUPLICATE_IGNORED
        max_at = self._max_at.get(ev.learner_id)
        if max_at is not None and ev.at < max_at:
            ev = dataclasses.replace(ev, late=True)
        else:
            self._max_at[ev.learner_id] = ev.at
        self._seen.add(ev.event_id)
        self._events.append(ev)
        if persist and self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            with open(self._path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(event_to_dict(ev), sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        return RecordOutcome.ACCEPTED

    def record(self, ev: EngagementEvent) -> RecordOutcome:
        return self._absorb(ev, persist=True)

    def events(self) -> tuple[EngagementEvent, ...]:
        return tuple(self._events)

    def __len__(self) -> int:
        return len(self._events)


# ---------------------------------------------------------------------------
# Indicator arithmetic

@dataclass(frozen=True)
class StepTime:
    duration_ms: int = 0
    pairs: int = 0
    open: bool = False


def step_durations(events: Iterable[EngagementEvent]) -> dict[int, StepTime]:
    """Total dwell time per wizard step from Entered/Exited pairs.

    Events are sorted by timestamp first, so the result does not depend on
    arrival order. Re-entries accumulate; an Entered with no matching Exited
    contributes nothing but marks the step open.
    """
    ordered = sorted(
        (e for e in events if e.kind in (EventKind.STEP_ENTERED, EventKind.STEP_EXITED)
         and e.step is not None),
        key=lambda e: (e.at, e.kind is not EventKind.STEP_ENTERED),
    )
    totals: dict[int, int] = {}
    pairs: dict[int, int] = {}
    pending: dict[int, int] = {}
    open_steps: set[int] = set()
    for ev in ordered:
        step = ev.step
        if ev.kind is EventKind.STEP_ENTERED:
            if step in pending:
                open_steps.add(step)  # previous visit never closed
            pending[step] = ev.at
        else:
            entered = pending.pop(step, None)
            if entered is None:
                continue  # Exited with no Entered: ignore
            totals[step] = totals.get(step, 0) + max(0, ev.at - entered)
            pairs[step] = pairs.get(step, 0) + 1
    open_steps.update(pending)
    out: dict[int, StepTime] = {}
    for step in set(totals) | open_steps:
        out[step] = StepTime(
            duration_ms=totals.get(step, 0),
            pairs=pairs.get(step, 0),
            open=step in open_steps,
        )
    return out


def objective_quality(objective: str, description: str) -> float:
    """Goal clarity heuristic: rewards a fleshed-out objective and description."""
    obj_words = len(objective.split())
    desc_words = len(description.split())
    return 0.5 * min(obj_words / 8, 1) + 0.5 * min(desc_words / 25, 1)


def _completion_rate(durations: dict[int, StepTime]) -> float:
    completed = {s for s, t in durations.items() if t.pairs >= 1}
    mandatory = sum(1 for s in MANDATORY_STEPS if s in completed)
    optional = sum(1 for s in OPTIONAL_STEPS if s in completed)
    return min(1.0, (mandatory + 0.5 * optional) / len(MANDATORY_STEPS))


def _horizon_ok(start: date | str | None, end: date | str | None) -> bool:
    if start is None or end is None:
        return False
    if isinstance(start, str):
        start = date.fromisoformat(start)
    if isinstance(end, str):
        end = date.fromisoformat(end)
    return (end - start).days >= 1


@dataclass(frozen=True)
class CognitiveEngagementScore:
    total: float
    sub_scores: dict[str, float] = field(default_factory=dict)


def engagement_score(events: Iterable[EngagementEvent],
                     request: SupportRequest | None = None) -> CognitiveEngagementScore:
    """Synthesize the six engagement indicators into one 0..100 score."""
    events = list(events)
    durations = step_durations(events)

    oq = objective_quality(
        request.learning_objective if request else "",
        request.short_description if request else "",
    )
    cr = _completion_rate(durations)
    total_ms = sum(t.duration_ms for t in durations.values())
    ti = min(total_ms / TIME_CAP_MS, 1.0)

    uploaded = any(e.kind is EventKind.MATERIAL_UPLOADED for e in events)
    if request is not None and request.material_ids:
        uploaded = True
    mu = 1.0 if uploaded else 0.0

    goal_set = any(e.kind is EventKind.GOAL_TYPE_SELECTED for e in events)
    if request is not None and request.goal_type is not None:
        goal_set = True
    gp = 1.0 if goal_set else 0.0

    horizon = False
    if request is not None and _horizon_ok(request.start_date, request.end_date):
        horizon = True
    if not horizon:
        horizon = any(
            e.kind is EventKind.DATES_SELECTED and _horizon_ok(e.start, e.end)
            for e in events
        )
    ph = 1.0 if horizon else 0.0

    total = 100.0 * (0.25 * oq + 0.25 * cr + 0.15 * ti + 0.15 * mu + 0.10 * gp + 0.10 * ph)
    return CognitiveEngagementScore(
        total=total,
        sub_scores={
            "objective_quality": oq,
            "completion_rate": cr,
            "time_investment": ti,
            "material_upload": mu,
            "goal_preference_set": gp,
            "planning_horizon_set": ph,
        },
    )


# ---------------------------------------------------------------------------
# Path and dashboard aggregates

class PathStatus(str, Enum):
    COMPLETED = "Completed"
    IN_PROGRESS = "InProgress"
    PENDING = "Pending"


@dataclass(frozen=True)
class PathEntry:
    index: int
    concept_title: str
    status: PathStatus


def path_progress(plan: LessonPlan, states: Sequence[SessionState]) -> list[PathEntry]:
    """Status per planned session: done, current, or not yet reached."""
    if plan.status is not PlanStatus.APPROVED:
        raise ValueError("path progress requires an approved plan")
    if states:
        latest = states[-1]
        current = latest.current_index
        done = latest.phase is Phase.COMPLETED
    else:
        current, done = 1, False
    out = []
    for session in plan.sessions:
        if session.index < current or (session.index == current and done):
            status = PathStatus.COMPLETED
        elif session.index == current:
            status = PathStatus.IN_PROGRESS
        else:
            status = PathStatus.PENDING
        out.append(PathEntry(session.index, session.concept_title, status))
    return out


@dataclass(frozen=True)
class DashboardSummary:
    learner_id: str
    engagement: CognitiveEngagementScore
    step_durations: dict[int, StepTime]
    quiz_history: list[dict]
    path: list[dict]
    session_count: int
    recent_events: list[dict]
    chat_excerpts: list[str]

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "learner_id": self.learner_id,
            "engagement": {
                "total": self.engagement.total,
                "sub_scores": dict(self.engagement.sub_scores),
            },
            "step_durations": {
                str(step): {"duration_ms": t.duration_ms, "pairs": t.pairs, "open": t.open}
                for step, t in sorted(self.step_durations.items())
            },
            "quiz_history": list(self.quiz_history),
            "path": list(self.path),
            "session_count": self.session_count,
            "recent_events": list(self.recent_events),
            "chat_excerpts": list(self.chat_excerpts),
        }


def dashboard_summary(
    learner_id: str,
    events: Iterable[EngagementEvent],
    *,
    request: SupportRequest | None = None,
    plan: LessonPlan | None = None,
    states: Sequence[SessionState] = (),
    quiz_results: Sequence[dict] = (),
    chat_texts: Sequence[str] = (),
    session_count: int = 0,
    window: tuple[int, int] | None = None,
) -> DashboardSummary:
    """Aggregate a learner's activity for the dashboard.

    window is an inclusive (start_ms, end_ms) filter over events and quiz
    results; everything request-derived is timeless and passes through.
    """
    events = [e for e in events if e.learner_id == learner_id]
    quizzes = list(quiz_results)
    if window is not None:
        lo, hi = window
        events = [e for e in events if lo <= e.at <= hi]
        quizzes = [q for q in quizzes if lo <= q.get("at", 0) <= hi]

    path: list[dict] = []
    if plan is not None and plan.status is PlanStatus.APPROVED:
        path = [
            {"index": p.index, "concept_title": p.concept_title, "status": p.status.value}
            for p in path_progress(plan, states)
        ]

    return DashboardSummary(
        learner_id=learner_id,
        engagement=engagement_score(events, request),
        step_durations=step_durations(events),
        quiz_history=quizzes,
        path=path,
        session_count=session_count,
        recent_events=[{"kind": e.kind.value, "at": e.at} for e in events[-20:]],
        chat_excerpts=list(chat_texts)[-10:],
    )
