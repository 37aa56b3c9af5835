"""Shared domain types: learner profiles, onboarding support requests, assistant configs.

All types are immutable value objects; every operation here is pure, so the
module is safe to use from any thread without locking.
"""

from __future__ import annotations

import dataclasses
import re
import uuid
from dataclasses import dataclass
from datetime import date
from enum import Enum


class EducationLevel(str, Enum):
    PRIMARY_SCHOOL = "PrimarySchool"
    MIDDLE_SCHOOL = "MiddleSchool"
    HIGH_SCHOOL = "HighSchool"
    UNIVERSITY = "University"


# Ordering used for "level >= HighSchool" style rules.
LEVEL_ORDER = {
    EducationLevel.PRIMARY_SCHOOL: 0,
    EducationLevel.MIDDLE_SCHOOL: 1,
    EducationLevel.HIGH_SCHOOL: 2,
    EducationLevel.UNIVERSITY: 3,
}


class GoalType(str, Enum):
    BUILD_NEW_SKILL = "BuildNewSkill"
    REVIEW_COURSE = "ReviewCourse"
    PREPARE_FOR_EXAM = "PrepareForExam"


class Tone(str, Enum):
    ENCOURAGING = "Encouraging"
    FRIENDLY = "Friendly"
    INFORMATIVE = "Informative"
    HUMOROUS = "Humorous"
    NEUTRAL = "Neutral"


class ReasoningStrategy(str, Enum):
    DEDUCTIVE = "Deductive"
    INDUCTIVE = "Inductive"
    ANALOGICAL = "Analogical"
    CAUSAL = "Causal"
    ABDUCTIVE = "Abductive"


class RequestStatus(str, Enum):
    DRAFT = "Draft"
    SUBMITTED = "Submitted"


# Loose IETF language-tag shape: primary subtag plus optional subtags.
_LANGUAGE_TAG = re.compile(r"^[A-Za-z]{2,3}(-[A-Za-z0-9]{2,8})*$")


@dataclass(frozen=True)
class AvatarChoice:
    persona_id: str
    display_name: str


# Static persona catalog; the published system ships a fixed set the learner
# picks from during onboarding.
PERSONA_CATALOG: tuple[AvatarChoice, ...] = (
    AvatarChoice("nova", "Nova"),
    AvatarChoice("atlas", "Atlas"),
    AvatarChoice("sage", "Sage"),
    AvatarChoice("lumi", "Lumi"),
)

_PERSONA_IDS = frozenset(p.persona_id for p in PERSONA_CATALOG)


@dataclass(frozen=True)
class LearnerProfile:
    learner_id: str
    display_name: str
    education_level: EducationLevel
    preferred_language: str = "en"
    avatar_persona: AvatarChoice | None = None
    created_at: int = 0  # UTC epoch ms

    def __post_init__(self) -> None:
        if not self.learner_id:
            raise ValueError("learner_id must be non-empty")
        if self.avatar_persona is not None and self.avatar_persona.persona_id not in _PERSONA_IDS:
            raise ValueError(f"unknown persona: {self.avatar_persona.persona_id}")
        if not _LANGUAGE_TAG.match(self.preferred_language):
            raise ValueError(f"invalid language tag: {self.preferred_language!r}")


@dataclass(frozen=True)
class SupportRequest:
    """The six-step onboarding payload.

    Drafts may be partially filled; enum-typed fields additionally tolerate raw
    strings so that validation can report unknown values instead of failing at
    construction time.
    """

    support_id: str
    learner_id: str
    learning_objective: str = ""
    short_description: str = ""
    subject_area: str = ""
    goal_type: GoalType | str | None = None
    material_ids: tuple[str, ...] = ()
    education_level: EducationLevel | str | None = None
    content_language: str = ""
    estimated_duration_minutes: int | None = None
    keywords: tuple[str, ...] = ()
    start_date: date | None = None
    end_date: date | None = None
    availability: str | None = None  # opaque free text, not interpreted
    status: RequestStatus = RequestStatus.DRAFT


@dataclass(frozen=True)
class AssistantConfig:
    support_id: str
    default_tone: Tone
    default_reasoning: ReasoningStrategy
    content_language: str
    depth_level: EducationLevel
    session_target_minutes: int = 25

    def __post_init__(self) -> None:
        if self.session_target_minutes <= 0:
            raise ValueError("session_target_minutes must be > 0")


class ErrorCode(str, Enum):
    MISSING_MANDATORY_FIELD = "MissingMandatoryField"
    INVALID_PLANNING_HORIZON = "InvalidPlanningHorizon"
    UNKNOWN_EDUCATION_LEVEL = "UnknownEducationLevel"
    UNKNOWN_GOAL_TYPE = "UnknownGoalType"


@dataclass(frozen=True)
class FieldError:
    code: ErrorCode
    field: str
    message: str


class SupportValidationError(Exception):
    """Raised when a support request fails validation; carries field-scoped errors."""

    def __init__(self, errors: list[FieldError]):
        self.errors = list(errors)
        detail = "; ".join(f"{e.field}: {e.code.value}" for e in errors)
        super().__init__(f"support request invalid: {detail}")


MANDATORY_FIELDS = (
    "learning_objective",
    "subject_area",
    "goal_type",
    "education_level",
    "content_language",
)


def normalize_keywords(raw: list[str]) -> list[str]:
    """Lowercase, trim, and dedupe keywords, keeping first-occurrence order."""
    seen: set[str] = set()
    out: list[str] = []
    for kw in raw:
        norm = kw.strip().lower()
        if not norm or norm in seen:
            continue
        seen.add(norm)
        out.append(norm)
    return out


def _coerce_enum(value, enum_cls):
    """Return the enum member for value, or None if it is not recognized."""
    if isinstance(value, enum_cls):
        return value
    if isinstance(value, str):
        try:
            return enum_cls(value)
        except ValueError:
            return None
    return None


def validate_support_request(draft: SupportRequest) -> SupportRequest:
    """Validate a draft and return it with status Submitted.

    The draft itself is never mutated. Raises SupportValidationError with one
    FieldError per failing field. Already-submitted requests are returned
    unchanged (validation is idempotent).
    """
    errors: list[FieldError] = []

    if not draft.learning_objective.strip():
        errors.append(FieldError(ErrorCode.MISSING_MANDATORY_FIELD, "learning_objective",
                                 "learning objective is required"))
    if not draft.subject_area.strip():
        errors.append(FieldError(ErrorCode.MISSING_MANDATORY_FIELD, "subject_area",
                                 "subject area is required"))

    goal = draft.goal_type
    if goal is None or (isinstance(goal, str) and not goal.strip()):
        errors.append(FieldError(ErrorCode.MISSING_MANDATORY_FIELD, "goal_type",
                                 "goal type is required"))
        goal = None
    else:
        coerced = _coerce_enum(goal, GoalType)
        if coerced is None:
            errors.append(FieldError(ErrorCode.UNKNOWN_GOAL_TYPE, "goal_type",
                                     f"unknown goal type: {goal!r}"))
        goal = coerced

    level = draft.education_level
    if level is None or (isinstance(level, str) and not level.strip()):
        errors.append(FieldError(ErrorCode.MISSING_MANDATORY_FIELD, "education_level",
                                 "education level is required"))
        level = None
    else:
        coerced = _coerce_enum(level, EducationLevel)
        if coerced is None:
            errors.append(FieldError(ErrorCode.UNKNOWN_EDUCATION_LEVEL, "education_level",
                                     f"unknown education level: {level!r}"))
        level = coerced

    if not draft.content_language.strip() or not _LANGUAGE_TAG.match(draft.content_language.strip()):
        errors.append(FieldError(ErrorCode.MISSING_MANDATORY_FIELD, "content_language",
                                 "content language is required"))

    if draft.start_date is not None and draft.end_date is not None:
        if draft.end_date < draft.start_date:
            errors.append(FieldError(ErrorCode.INVALID_PLANNING_HORIZON, "end_date",
                                     "end date precedes start date"))

    if draft.estimated_duration_minutes is not None and draft.estimated_duration_minutes <= 0:
        errors.append(FieldError(ErrorCode.MISSING_MANDATORY_FIELD, "estimated_duration_minutes",
                                 "estimated duration must be positive when given"))

    if errors:
        raise SupportValidationError(errors)

    return dataclasses.replace(
        draft,
        goal_type=goal,
        education_level=level,
        keywords=tuple(normalize_keywords(list(draft.keywords))),
        status=RequestStatus.SUBMITTED,
    )


def derive_assistant_config(
    profile: LearnerProfile,
    request: SupportRequest,
    session_target_minutes: int = 25,
) -> AssistantConfig:
    """Derive the assistant configuration for a submitted request.

    Pure function of (profile, request): identical inputs yield identical
    configs. Tone and reasoning defaults come from the prompt selection rules.
    """
    if request.status is not RequestStatus.SUBMITTED:
        raise ValueError("assistant config requires a Submitted request")
    # Deferred import: the prompt module depends on these domain enums.
    from tutorkit.prompts import classify_subject, select_reasoning, select_tone

    assert isinstance(request.goal_type, GoalType)
    assert isinstance(request.education_level, EducationLevel)
    tone = select_tone(request.education_level, request.subject_area,
                       request.goal_type, struggle_signal=False)
    reasoning = select_reasoning(classify_subject(request.subject_area))
    return AssistantConfig(
        support_id=request.support_id,
        default_tone=tone,
        default_reasoning=reasoning,
        content_language=request.content_language,
        depth_level=request.education_level,
        session_target_minutes=session_target_minutes,
    )


def new_id() -> str:
    return str(uuid.uuid4())
