"""Tutoring session state machine.

Pure functions over immutable state: plan decomposition, approval gating,
micro-lesson delivery, practice gating, 5-question quizzing with optional
review, and the advance/reinforce decision after each quiz.

The machine distinguishes learner events (sent by the client) from internal
events (fed back by the service when a composition or grading step finishes).
Undeclared (phase, event) pairs raise InvalidTransition and leave the caller's
state untouched.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass
from enum import Enum
from typing import Protocol, Sequence

from tutorkit.model import ReasoningStrategy, Tone


class Phase(str, Enum):
    PLAN_PROPOSED = "PlanProposed"
    PLAN_APPROVED = "PlanApproved"
    DELIVERING = "Delivering"
    PRACTICE_AWAITING_INPUT = "PracticeAwaitingInput"
    FEEDBACK_GIVEN = "FeedbackGiven"
    POST_SESSION_CHOICE = "PostSessionChoice"
    QUIZ_IN_PROGRESS = "QuizInProgress"
    REVIEW_OFFERED = "ReviewOffered"
    REINFORCING = "Reinforcing"
    COMPLETED = "Completed"


class PlanStatus(str, Enum):
    AWAITING_APPROVAL = "AwaitingApproval"
    APPROVED = "Approved"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class PlanSession:
    index: int  # 1-based, contiguous
    concept_title: str
    scope_summary: str


@dataclass(frozen=True)
class LessonPlan:
    plan_id: str
    support_id: str
    sessions: tuple[PlanSession, ...]
    status: PlanStatus = PlanStatus.AWAITING_APPROVAL

    @property
    def estimated_total(self) -> int:
        return len(self.sessions)

    def __post_init__(self) -> None:
        if not self.sessions:
            raise ValueError("plan must have at least one session")
        for i, s in enumerate(self.sessions, start=1):
            if s.index != i:
                raise ValueError("session indices must be contiguous from 1")


# ---------------------------------------------------------------------------
# Events

@dataclass(frozen=True)
class ApprovePlan:
    kind = "ApprovePlan"
    at: int = 0


@dataclass(frozen=True)
class RejectPlan:
    kind = "RejectPlan"
    at: int = 0


@dataclass(frozen=True)
class RequestDelivery:
    kind = "RequestDelivery"
    at: int = 0


@dataclass(frozen=True)
class SubmitPractice:
    kind = "SubmitPractice"
    text: str = ""
    at: int = 0


@dataclass(frozen=True)
class ChooseNext:
    kind = "ChooseNext"
    at: int = 0


@dataclass(frozen=True)
class ChooseQuiz:
    kind = "ChooseQuiz"
    at: int = 0


@dataclass(frozen=True)
class SubmitAnswer:
    kind = "SubmitAnswer"
    text: str = ""
    at: int = 0


@dataclass(frozen=True)
class AcceptReview:
    kind = "AcceptReview"
    at: int = 0


@dataclass(frozen=True)
class DeclineReview:
    kind = "DeclineReview"
    at: int = 0


LearnerEvent = (ApprovePlan | RejectPlan | RequestDelivery | SubmitPractice
                | ChooseNext | ChooseQuiz | SubmitAnswer | AcceptReview | DeclineReview)

LEARNER_EVENT_TYPES: tuple[type, ...] = (
    ApprovePlan, RejectPlan, RequestDelivery, SubmitPractice, ChooseNext,
    ChooseQuiz, SubmitAnswer, AcceptReview, DeclineReview,
)


@dataclass(frozen=True)
class DeliveryComplete:
    kind = "DeliveryComplete"
    at: int = 0


@dataclass(frozen=True)
class FeedbackComplete:
    kind = "FeedbackComplete"
    at: int = 0


@dataclass(frozen=True)
class AnswerGraded:
    kind = "AnswerGraded"
    given: str = ""
    correct: bool = False
    feedback_text: str = ""
    at: int = 0


@dataclass(frozen=True)
class ReviewComplete:
    kind = "ReviewComplete"
    at: int = 0


InternalEvent = DeliveryComplete | FeedbackComplete | AnswerGraded | ReviewComplete

INTERNAL_EVENT_TYPES: tuple[type, ...] = (
    DeliveryComplete, FeedbackComplete, AnswerGraded, ReviewComplete,
)

Event = LearnerEvent | InternalEvent


# ---------------------------------------------------------------------------
# Actions emitted to the service layer

@dataclass(frozen=True)
class RequestReplan:
    kind = "RequestReplan"


@dataclass(frozen=True)
class ComposeDeliver:
    kind = "ComposeDeliver"
    concept: str = ""


@dataclass(frozen=True)
class ComposeFeedback:
    kind = "ComposeFeedback"
    concept: str = ""
    submission: str = ""


@dataclass(frozen=True)
class AskQuestion:
    kind = "AskQuestion"
    question_text: str = ""
    number: int = 1  # 1-based position within the quiz


@dataclass(frozen=True)
class JudgeAnswer:
    kind = "JudgeAnswer"
    question_text: str = ""
    expected_answer_key: str = ""
    given: str = ""


@dataclass(frozen=True)
class OfferReview:
    kind = "OfferReview"
    concept: str = ""
    question_text: str = ""


@dataclass(frozen=True)
class ComposeReview:
    kind = "ComposeReview"
    concept: str = ""


@dataclass(frozen=True)
class ComposeReinforce:
    kind = "ComposeReinforce"
    concept: str = ""


@dataclass(frozen=True)
class RecommendReview:
    kind = "RecommendReview"
    concept: str = ""


@dataclass(frozen=True)
class QuizFinished:
    """Carries the full scored quiz out of the machine before it is cleared."""

    kind = "QuizFinished"
    quiz: "QuizState | None" = None


Action = (RequestReplan | ComposeDeliver | ComposeFeedback | AskQuestion
          | JudgeAnswer | OfferReview | ComposeReview | ComposeReinforce
          | RecommendReview | QuizFinished)


# ---------------------------------------------------------------------------
# Quiz

QUIZ_LENGTH = 5
ADVANCE_THRESHOLD = 3  # correct answers out of 5 needed to advance
REINFORCE_CAP = 2  # rounds per concept before forced advance


class QuestionOrigin(str, Enum):
    CURRENT = "Current"
    PRIOR = "Prior"


@dataclass(frozen=True)
class QuizQuestion:
    question_text: str
    expected_answer_key: str
    source: QuestionOrigin
    concept: str


@dataclass(frozen=True)
class QuizAnswer:
    given: str
    correct: bool
    feedback_text: str
    review_offered: bool = False


@dataclass(frozen=True)
class QuizState:
    quiz_id: str
    questions: tuple[QuizQuestion, ...]
    cursor: int = 0
    answers: tuple[QuizAnswer, ...] = ()

    @property
    def score(self) -> int:
        return sum(1 for a in self.answers if a.correct)

    def __post_init__(self) -> None:
        if len(self.questions) != QUIZ_LENGTH:
            raise ValueError(f"quiz must have exactly {QUIZ_LENGTH} questions")
        if not 0 <= self.cursor <= QUIZ_LENGTH:
            raise ValueError("cursor out of range")
        if len(self.answers) != self.cursor:
            raise ValueError("cursor must equal the number of answers")


class QuestionSource(Protocol):
    """Supplies quiz questions; n_current + n_prior always equals 5."""

    def questions(self, concept: str, prior_concepts: Sequence[str],
                  n_current: int, n_prior: int) -> list[QuizQuestion]:
        ...


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-") or "topic"


class MockQuestionSource:
    """Deterministic offline question source.

    Question text and answer keys are pure functions of the concept titles, so
    scripted tests can predict every expected answer.
    """

    def questions(self, concept: str, prior_concepts: Sequence[str],
                  n_current: int, n_prior: int) -> list[QuizQuestion]:
        out: list[QuizQuestion] = []
        for i in range(1, n_current + 1):
            out.append(QuizQuestion(
                question_text=f"Q{i}: What is the key idea of {concept}? (part {i})",
                expected_answer_key=f"answer-{_slug(concept)}-{i}",
                source=QuestionOrigin.CURRENT,
                concept=concept,
            ))
        for j in range(n_prior):
            prior = prior_concepts[j % len(prior_concepts)]
            out.append(QuizQuestion(
                question_text=f"Q{n_current + j + 1}: Recall from earlier: what does {prior} do?",
                expected_answer_key=f"answer-{_slug(prior)}-prior",
                source=QuestionOrigin.PRIOR,
                concept=prior,
            ))
        return out


class FailingQuestionSource:
    """Test double for backend outages."""

    def questions(self, concept, prior_concepts, n_current, n_prior):
        raise RuntimeError("question backend unavailable")


# ---------------------------------------------------------------------------
# Session state

@dataclass(frozen=True)
class SessionState:
    session_id: str
    plan_id: str
    concepts: tuple[str, ...]  # ordered concept titles from the plan
    current_index: int = 1  # 1-based into concepts
    phase: Phase = Phase.PLAN_PROPOSED
    tone_current: Tone = Tone.NEUTRAL
    reasoning_current: ReasoningStrategy = ReasoningStrategy.ANALOGICAL
    reinforce_rounds: int = 0
    quiz: QuizState | None = None
    outcomes: tuple[bool, ...] = ()  # graded practice/quiz correctness history
    trace: tuple[LearnerEvent, ...] = ()

    @property
    def concept_current(self) -> str:
        return self.concepts[self.current_index - 1]

    @property
    def prior_concepts(self) -> tuple[str, ...]:
        return self.concepts[: self.current_index - 1]

    def __post_init__(self) -> None:
        if not self.concepts:
            raise ValueError("session needs at least one concept")
        if not 1 <= self.current_index <= len(self.concepts):
            raise ValueError("current_index out of range")
        if not 0 <= self.reinforce_rounds <= REINFORCE_CAP:
            raise ValueError("reinforce_rounds out of range")


class InvalidTransition(Exception):
    def __init__(self, phase: Phase, event_kind: str):
        self.phase = phase
        self.event_kind = event_kind
        super().__init__(f"event {event_kind} not allowed in phase {phase.value}")


class EmptyTopic(Exception):
    pass


class QuestionGenerationFailed(Exception):
    pass


class QuizAlreadyComplete(Exception):
    pass


class QuestionAlreadyAnswered(Exception):
    pass


class QuizIncomplete(Exception):
    pass


# ---------------------------------------------------------------------------
# Planning

# Delimiters that suggest a topic already enumerates its own parts.
_TOPIC_SPLIT = re.compile(r",|;|/|&|\band\b|\bvs\.?\b", re.IGNORECASE)

# Generic arc used when a topic names a single subject with no visible parts.
_DEFAULT_ARC = (
    "Introduction to {topic}",
    "Core concepts of {topic}",
    "Applying {topic}",
    "Review and practice: {topic}",
)

MAX_PLAN_SESSIONS = 8

# Headings and numbered outline items in uploaded material become concepts.
_HEADING = re.compile(r"^\s*(?:#{1,3}\s+|\d+[.)]\s+)(.+?)\s*$", re.MULTILINE)


def extract_concepts(material_text: str) -> list[str]:
    """Pull an ordered, deduplicated concept list out of material headings."""
    seen: set[str] = set()
    out: list[str] = []
    for m in _HEADING.finditer(material_text):
        title = m.group(1).strip()
        key = title.lower()
        if title and key not in seen:
            seen.add(key)
            out.append(title)
    return out


def heuristic_concepts(topic: str) -> list[str]:
    """Decompose a free-text topic into concept titles without materials.

    Topics that list their own parts (commas, "and", slashes) become one
    session per part; otherwise a fixed four-session arc over the whole topic.
    Result length is clamped to 1..8.
    """
    topic = topic.strip()
    if not topic:
        raise EmptyTopic("cannot plan an empty topic")
    parts = [p.strip(" .") for p in _TOPIC_SPLIT.split(topic)]
    parts = [p for p in parts if p]
    if len(parts) >= 2:
        return parts[:MAX_PLAN_SESSIONS]
    return [arc.format(topic=topic) for arc in _DEFAULT_ARC]


def plan_lessons(request, material_concepts: list[str], plan_id: str) -> LessonPlan:
    """Build a lesson plan: one session per concept, order preserved.

    Concepts come from uploaded materials when available, otherwise from the
    topic decomposition heuristic. The plan starts AwaitingApproval.
    """
    from tutorkit.model import RequestStatus
    if request.status is not RequestStatus.SUBMITTED:
        raise ValueError("plan requires a Submitted request")
    concepts = [c.strip() for c in material_concepts if c.strip()]
    if not concepts:
        topic = request.learning_objective.strip() or request.subject_area.strip()
        concepts = heuristic_concepts(topic)
    concepts = concepts[:MAX_PLAN_SESSIONS]
    sessions = tuple(
        PlanSession(index=i, concept_title=c, scope_summary=f"Micro-lesson covering {c}")
        for i, c in enumerate(concepts, start=1)
    )
    return LessonPlan(plan_id=plan_id, support_id=request.support_id, sessions=sessions)


# ---------------------------------------------------------------------------
# Quiz operations

def start_quiz(state: SessionState, question_source: QuestionSource, quiz_id: str) -> QuizState:
    """Generate a fresh 5-question quiz for the current concept.

    From session 2 onward, 1..2 of the 5 questions come from prior concepts.
    Backend failures propagate as QuestionGenerationFailed; the session state
    is the caller's and remains untouched.
    """
    if state.phase is not Phase.POST_SESSION_CHOICE:
        raise InvalidTransition(state.phase, "ChooseQuiz")
    prior = state.prior_concepts
    n_prior = min(2, len(prior)) if prior else 0
    n_current = QUIZ_LENGTH - n_prior
    try:
        questions = question_source.questions(state.concept_current, prior, n_current, n_prior)
    except Exception as exc:
        raise QuestionGenerationFailed(str(exc)) from exc
    if len(questions) != QUIZ_LENGTH:
        raise QuestionGenerationFailed(f"source returned {len(questions)} questions, need {QUIZ_LENGTH}")
    return QuizState(quiz_id=quiz_id, questions=tuple(questions))


def grade_answer(quiz: QuizState, given: str, correct: bool, feedback_text: str) -> QuizState:
    """Record a judged answer: append the record, advance the cursor.

    Incorrect answers carry a review-offered marker. Correctness is judged
    upstream; this function only books the result.
    """
    if quiz.cursor >= QUIZ_LENGTH:
        raise QuizAlreadyComplete("all 5 questions already answered")
    if len(quiz.answers) != quiz.cursor:
        raise QuestionAlreadyAnswered(f"question {quiz.cursor + 1} already has an answer")
    answer = QuizAnswer(given=given, correct=correct, feedback_text=feedback_text,
                        review_offered=not correct)
    return dataclasses.replace(quiz, cursor=quiz.cursor + 1, answers=quiz.answers + (answer,))


@dataclass(frozen=True)
class Advance:
    recommend_review: bool = False


@dataclass(frozen=True)
class Reinforce:
    round_number: int = 1


def advance_or_reinforce(quiz: QuizState, state: SessionState) -> Advance | Reinforce:
    """Decide what follows a finished quiz.

    Majority rule: 3 of 5 correct advances. Below that the concept is
    reinforced, at most twice; after the second round the session advances
    anyway, with a recommendation to review on the learner's own time.
    """
    if quiz.cursor < QUIZ_LENGTH:
        raise QuizIncomplete(f"only {quiz.cursor} of {QUIZ_LENGTH} questions answered")
    if quiz.score >= ADVANCE_THRESHOLD:
        return Advance()
    if state.reinforce_rounds >= REINFORCE_CAP:
        return Advance(recommend_review=True)
    return Reinforce(round_number=state.reinforce_rounds + 1)


# ---------------------------------------------------------------------------
# Adaptive strategy

# Concept titles containing these words are treated as abstract, which switches
# the explanation style to analogy.
ABSTRACT_KEYWORDS = frozenset({
    "theory", "theoretical", "abstract", "abstraction", "principle",
    "principles", "concept", "concepts", "architecture", "model", "models",
    "paradigm", "recursion", "entropy", "infinity", "philosophy",
})


@dataclass(frozen=True)
class StrategyUpdate:
    tone_current: Tone
    reasoning_current: ReasoningStrategy


def adapt_strategy(state: SessionState) -> StrategyUpdate:
    """Recompute tone and reasoning from observed signals.

    Two consecutive incorrect outcomes switch the tone to Encouraging; an
    abstract-sounding current concept switches reasoning to Analogical.
    Anything else leaves the current values alone.
    """
    tone = state.tone_current
    reasoning = state.reasoning_current
    if len(state.outcomes) >= 2 and not state.outcomes[-1] and not state.outcomes[-2]:
        tone = Tone.ENCOURAGING
    concept_words = set(re.findall(r"[a-z]+", state.concept_current.lower()))
    if concept_words & ABSTRACT_KEYWORDS:
        reasoning = ReasoningStrategy.ANALOGICAL
    return StrategyUpdate(tone_current=tone, reasoning_current=reasoning)


def _with_strategy(state: SessionState) -> SessionState:
    upd = adapt_strategy(state)
    if upd.tone_current is state.tone_current and upd.reasoning_current is state.reasoning_current:
        return state
    return dataclasses.replace(state, tone_current=upd.tone_current,
                               reasoning_current=upd.reasoning_current)


# ---------------------------------------------------------------------------
# The transition function

def _advance_concept(state: SessionState, extra: list[Action]) -> tuple[SessionState, list[Action]]:
    """Move to the next concept (Delivering) or finish the whole plan."""
    if state.current_index < len(state.concepts):
        nxt = state.concepts[state.current_index]
        new = dataclasses.replace(state, current_index=state.current_index + 1,
                                  phase=Phase.DELIVERING, quiz=None, reinforce_rounds=0)
        return new, extra + [ComposeDeliver(concept=nxt)]
    return dataclasses.replace(state, phase=Phase.COMPLETED, quiz=None), extra


def _decide_after_quiz(state: SessionState) -> tuple[SessionState, list[Action]]:
    assert state.quiz is not None
    finished: list[Action] = [QuizFinished(quiz=state.quiz)]
    outcome = advance_or_reinforce(state.quiz, state)
    if isinstance(outcome, Reinforce):
        new = dataclasses.replace(state, phase=Phase.REINFORCING, quiz=None,
                                  reinforce_rounds=outcome.round_number)
        return new, finished + [ComposeReinforce(concept=state.concept_current)]
    if outcome.recommend_review:
        finished.append(RecommendReview(concept=state.concept_current))
    return _advance_concept(state, finished)


def _resume_quiz(state: SessionState) -> tuple[SessionState, list[Action]]:
    """Leave ReviewOffered: next question if any remain, else decide."""
    assert state.quiz is not None
    quiz = state.quiz
    if quiz.cursor < QUIZ_LENGTH:
        new = dataclasses.replace(state, phase=Phase.QUIZ_IN_PROGRESS)
        q = quiz.questions[quiz.cursor]
        return new, [AskQuestion(question_text=q.question_text, number=quiz.cursor + 1)]
    return _decide_after_quiz(state)


def advance(
    state: SessionState,
    ev: Event,
    *,
    question_source: QuestionSource | None = None,
    quiz_id: str = "quiz",
) -> tuple[SessionState, list[Action]]:
    """Apply one event; return the successor state and emitted actions.

    Pure: raises InvalidTransition for undeclared (phase, event) pairs without
    producing a successor. Learner events are appended to the trace; internal
    events are not. Adaptive strategy is re-evaluated on every transition.
    """
    phase = state.phase
    actions: list[Action] = []

    if isinstance(ev, ApprovePlan) and phase is Phase.PLAN_PROPOSED:
        new = dataclasses.replace(state, phase=Phase.PLAN_APPROVED)

    elif isinstance(ev, RejectPlan) and phase is Phase.PLAN_PROPOSED:
        new = state
        actions.append(RequestReplan())

    elif isinstance(ev, RequestDelivery) and phase is Phase.PLAN_APPROVED:
        new = dataclasses.replace(state, phase=Phase.DELIVERING)
        actions.append(ComposeDeliver(concept=state.concept_current))

    elif isinstance(ev, DeliveryComplete) and phase is Phase.DELIVERING:
        new = dataclasses.replace(state, phase=Phase.PRACTICE_AWAITING_INPUT)

    elif isinstance(ev, DeliveryComplete) and phase is Phase.REINFORCING:
        new = dataclasses.replace(state, phase=Phase.POST_SESSION_CHOICE)

    elif isinstance(ev, SubmitPractice) and phase is Phase.PRACTICE_AWAITING_INPUT:
        new = dataclasses.replace(state, phase=Phase.FEEDBACK_GIVEN)
        actions.append(ComposeFeedback(concept=state.concept_current, submission=ev.text))

    elif isinstance(ev, FeedbackComplete) and phase is Phase.FEEDBACK_GIVEN:
        new = dataclasses.replace(state, phase=Phase.POST_SESSION_CHOICE)

    elif isinstance(ev, ChooseQuiz) and phase is Phase.POST_SESSION_CHOICE:
        if question_source is None:
            raise ValueError("ChooseQuiz requires a question_source")
        quiz = start_quiz(state, question_source, quiz_id)
        new = dataclasses.replace(state, phase=Phase.QUIZ_IN_PROGRESS, quiz=quiz)
        q = quiz.questions[0]
        actions.append(AskQuestion(question_text=q.question_text, number=1))

    elif isinstance(ev, ChooseNext) and phase is Phase.POST_SESSION_CHOICE:
        new, actions = _advance_concept(state, [])

    elif isinstance(ev, SubmitAnswer) and phase is Phase.QUIZ_IN_PROGRESS:
        assert state.quiz is not None
        quiz = state.quiz
        if quiz.cursor >= QUIZ_LENGTH:
            raise QuizAlreadyComplete("all 5 questions already answered")
        q = quiz.questions[quiz.cursor]
        new = state
        actions.append(JudgeAnswer(question_text=q.question_text,
                                   expected_answer_key=q.expected_answer_key, given=ev.text))

    elif isinstance(ev, AnswerGraded) and phase is Phase.QUIZ_IN_PROGRESS:
        assert state.quiz is not None
        quiz = grade_answer(state.quiz, ev.given, ev.correct, ev.feedback_text)
        mid = dataclasses.replace(state, quiz=quiz, outcomes=state.outcomes + (ev.correct,))
        if not ev.correct:
            missed = quiz.questions[quiz.cursor - 1]
            new = dataclasses.replace(mid, phase=Phase.REVIEW_OFFERED)
            actions.append(OfferReview(concept=missed.concept, question_text=missed.question_text))
        elif quiz.cursor < QUIZ_LENGTH:
            nxt = quiz.questions[quiz.cursor]
            new = mid
            actions.append(AskQuestion(question_text=nxt.question_text, number=quiz.cursor + 1))
        else:
            new, actions = _decide_after_quiz(mid)

    elif isinstance(ev, AcceptReview) and phase is Phase.REVIEW_OFFERED:
        assert state.quiz is not None
        missed = state.quiz.questions[state.quiz.cursor - 1]
        new = state
        actions.append(ComposeReview(concept=missed.concept))

    elif isinstance(ev, DeclineReview) and phase is Phase.REVIEW_OFFERED:
        new, actions = _resume_quiz(state)

    elif isinstance(ev, ReviewComplete) and phase is Phase.REVIEW_OFFERED:
        new, actions = _resume_quiz(state)

    else:
        raise InvalidTransition(phase, ev.kind)

    if isinstance(ev, LEARNER_EVENT_TYPES):
        new = dataclasses.replace(new, trace=new.trace + (ev,))
    return _with_strategy(new), actions
