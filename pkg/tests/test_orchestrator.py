import dataclasses

import pytest

from tutorkit.model import (
    EducationLevel,
    GoalType,
    ReasoningStrategy,
    RequestStatus,
    SupportRequest,
    Tone,
)
from tutorkit import orchestrator as orch


def submitted_request(**overrides) -> SupportRequest:
    base = dict(
        support_id="s1",
        learner_id="ada",
        learning_objective="Hadoop ecosystem",
        subject_area="computer science",
        goal_type=GoalType.BUILD_NEW_SKILL,
        education_level=EducationLevel.UNIVERSITY,
        content_language="en",
        status=RequestStatus.SUBMITTED,
    )
    base.update(overrides)
    return SupportRequest(**base)


def fresh_state(concepts=("Introduction", "HDFS", "MapReduce", "YARN"), **overrides):
    base = dict(session_id="sess1", plan_id="p1", concepts=tuple(concepts))
    base.update(overrides)
    return orch.SessionState(**base)


SOURCE = orch.MockQuestionSource()


def run(state, *events, question_source=SOURCE, quiz_id="quiz"):
    actions = []
    for ev in events:
        state, acts = orch.advance(state, ev, question_source=question_source,
                                   quiz_id=quiz_id)
        actions.extend(acts)
    return state, actions


def answer_for(state, correct: bool):
    """Build the AnswerGraded event matching the current quiz cursor."""
    q = state.quiz.questions[state.quiz.cursor]
    given = q.expected_answer_key if correct else "wrong"
    return orch.AnswerGraded(given=given, correct=correct, feedback_text="fb")


def finish_quiz(state, pattern):
    """Drive a quiz to completion; pattern is a 5-tuple of correctness."""
    actions = []
    for correct in pattern:
        state, acts = run(state, orch.SubmitAnswer(text="x"))
        actions.extend(acts[-1:])
        state, acts = orch.advance(state, answer_for(state, correct),
                                   question_source=SOURCE)
        actions.extend(acts)
        if state.phase is orch.Phase.REVIEW_OFFERED:
            state, acts = run(state, orch.DeclineReview())
            actions.extend(acts)
    return state, actions


def to_post_session(state=None):
    state = state or fresh_state()
    state, _ = run(state, orch.ApprovePlan(), orch.RequestDelivery())
    state, _ = orch.advance(state, orch.DeliveryComplete())
    state, _ = run(state, orch.SubmitPractice(text="attempt"))
    state, _ = orch.advance(state, orch.FeedbackComplete())
    assert state.phase is orch.Phase.POST_SESSION_CHOICE
    return state


# -- planning ---------------------------------------------------------------

def test_plan_one_session_per_concept():
    plan = orch.plan_lessons(submitted_request(),
                             ["Introduction", "HDFS", "MapReduce", "YARN"], "p1")
    assert [s.concept_title for s in plan.sessions] == [
        "Introduction", "HDFS", "MapReduce", "YARN"]
    assert [s.index for s in plan.sessions] == [1, 2, 3, 4]
    assert plan.status is orch.PlanStatus.AWAITING_APPROVAL
    assert plan.estimated_total == 4


def test_plan_single_concept():
    plan = orch.plan_lessons(submitted_request(), ["Only topic"], "p1")
    assert plan.estimated_total == 1


def test_plan_falls_back_to_heuristic():
    plan = orch.plan_lessons(
        submitted_request(learning_objective="Sorting algorithms"), [], "p1")
    assert [s.concept_title for s in plan.sessions] == [
        "Introduction to Sorting algorithms",
        "Core concepts of Sorting algorithms",
        "Applying Sorting algorithms",
        "Review and practice: Sorting algorithms",
    ]


def test_heuristic_splits_enumerated_topics():
    assert orch.heuristic_concepts("HDFS, MapReduce and YARN") == [
        "HDFS", "MapReduce", "YARN"]


def test_plan_requires_submitted():
    with pytest.raises(ValueError):
        orch.plan_lessons(submitted_request(status=RequestStatus.DRAFT), ["x"], "p1")


def test_empty_topic_rejected():
    with pytest.raises(orch.EmptyTopic):
        orch.plan_lessons(
            submitted_request(learning_objective=" ", subject_area=""), [], "p1")


def test_extract_concepts_from_headings():
    material = """# Course outline

## Introduction
Some text here.

## HDFS
1. replication details
more text

## HDFS
duplicate heading ignored

2) Shuffle phase
"""
    assert orch.extract_concepts(material) == [
        "Course outline", "Introduction", "HDFS", "replication details",
        "Shuffle phase"]


def test_plan_caps_sessions():
    plan = orch.plan_lessons(submitted_request(), [f"c{i}" for i in range(12)], "p1")
    assert plan.estimated_total == orch.MAX_PLAN_SESSIONS


# -- approval gate ----------------------------------------------------------

def test_approve_then_deliver():
    state, actions = run(fresh_state(), orch.ApprovePlan(), orch.RequestDelivery())
    assert state.phase is orch.Phase.DELIVERING
    assert actions == [orch.ComposeDeliver(concept="Introduction")]


def test_delivery_requires_approval():
    with pytest.raises(orch.InvalidTransition):
        orch.advance(fresh_state(), orch.RequestDelivery())


def test_reject_requests_replan():
    state, actions = run(fresh_state(), orch.RejectPlan())
    assert state.phase is orch.Phase.PLAN_PROPOSED
    assert actions == [orch.RequestReplan()]


def test_invalid_transition_leaves_state_alone():
    state = fresh_state()
    with pytest.raises(orch.InvalidTransition) as exc:
        orch.advance(state, orch.SubmitAnswer(text="x"))
    assert exc.value.phase is orch.Phase.PLAN_PROPOSED
    assert exc.value.event_kind == "SubmitAnswer"
    assert state == fresh_state()


# -- delivery and practice --------------------------------------------------

def test_practice_gate_before_feedback():
    state, _ = run(fresh_state(), orch.ApprovePlan(), orch.RequestDelivery())
    state, _ = orch.advance(state, orch.DeliveryComplete())
    assert state.phase is orch.Phase.PRACTICE_AWAITING_INPUT
    # no way forward except submitting practice
    for ev in (orch.ChooseNext(), orch.ChooseQuiz(), orch.RequestDelivery()):
        with pytest.raises(orch.InvalidTransition):
            orch.advance(state, ev, question_source=SOURCE)
    state, actions = run(state, orch.SubmitPractice(text="my try"))
    assert state.phase is orch.Phase.FEEDBACK_GIVEN
    assert actions == [orch.ComposeFeedback(concept="Introduction", submission="my try")]


def test_trace_records_learner_events_only():
    state = to_post_session()
    kinds = [ev.kind for ev in state.trace]
    assert kinds == ["ApprovePlan", "RequestDelivery", "SubmitPractice"]


# -- quiz -------------------------------------------------------------------

def test_first_session_quiz_all_current():
    quiz = orch.start_quiz(to_post_session(), SOURCE, "q1")
    assert len(quiz.questions) == 5
    assert all(q.source is orch.QuestionOrigin.CURRENT for q in quiz.questions)
    assert quiz.cursor == 0


def test_later_session_quiz_blends_prior():
    state = to_post_session()
    state = dataclasses.replace(state, current_index=3)
    quiz = orch.start_quiz(state, SOURCE, "q1")
    prior = [q for q in quiz.questions if q.source is orch.QuestionOrigin.PRIOR]
    assert 1 <= len(prior) <= 2
    assert len(quiz.questions) == 5


def test_question_generation_failure_propagates():
    state = to_post_session()
    with pytest.raises(orch.QuestionGenerationFailed):
        orch.start_quiz(state, orch.FailingQuestionSource(), "q1")
    assert state.phase is orch.Phase.POST_SESSION_CHOICE


def test_quiz_requires_post_session_choice():
    with pytest.raises(orch.InvalidTransition):
        orch.start_quiz(fresh_state(), SOURCE, "q1")


def test_grade_answer_appends_and_marks_review():
    quiz = orch.start_quiz(to_post_session(), SOURCE, "q1")
    quiz = orch.grade_answer(quiz, "right", True, "well done")
    assert quiz.cursor == 1 and quiz.score == 1
    assert not quiz.answers[0].review_offered
    quiz = orch.grade_answer(quiz, "nope", False, "not quite")
    assert quiz.cursor == 2 and quiz.score == 1
    assert quiz.answers[1].review_offered


def test_grade_when_complete_rejected():
    quiz = orch.start_quiz(to_post_session(), SOURCE, "q1")
    for _ in range(5):
        quiz = orch.grade_answer(quiz, "x", True, "fb")
    with pytest.raises(orch.QuizAlreadyComplete):
        orch.grade_answer(quiz, "x", True, "fb")


def test_submit_answer_emits_judge_action():
    state = to_post_session()
    state, actions = run(state, orch.ChooseQuiz())
    assert state.phase is orch.Phase.QUIZ_IN_PROGRESS
    assert isinstance(actions[0], orch.AskQuestion) and actions[0].number == 1
    state, actions = run(state, orch.SubmitAnswer(text="guess"))
    judge = actions[-1]
    assert isinstance(judge, orch.JudgeAnswer)
    assert judge.given == "guess"
    assert judge.question_text == state.quiz.questions[0].question_text


def test_incorrect_answer_offers_review():
    state = to_post_session()
    state, _ = run(state, orch.ChooseQuiz(), orch.SubmitAnswer(text="bad"))
    state, actions = orch.advance(
        state, orch.AnswerGraded(given="bad", correct=False, feedback_text="fb"),
        question_source=SOURCE)
    assert state.phase is orch.Phase.REVIEW_OFFERED
    assert isinstance(actions[0], orch.OfferReview)


def test_accept_review_then_resume():
    state = to_post_session()
    state, _ = run(state, orch.ChooseQuiz(), orch.SubmitAnswer(text="bad"))
    state, _ = orch.advance(
        state, orch.AnswerGraded(given="bad", correct=False, feedback_text="fb"),
        question_source=SOURCE)
    state, actions = run(state, orch.AcceptReview())
    assert actions == [orch.ComposeReview(concept="Introduction")]
    assert state.phase is orch.Phase.REVIEW_OFFERED
    state, actions = orch.advance(state, orch.ReviewComplete(), question_source=SOURCE)
    assert state.phase is orch.Phase.QUIZ_IN_PROGRESS
    assert isinstance(actions[0], orch.AskQuestion) and actions[0].number == 2


# -- advance / reinforce ----------------------------------------------------

def test_three_of_five_advances():
    state = to_post_session()
    state, _ = run(state, orch.ChooseQuiz())
    state, actions = finish_quiz(state, (True, True, True, False, False))
    assert state.phase is orch.Phase.DELIVERING
    assert state.current_index == 2
    assert state.quiz is None
    assert state.reinforce_rounds == 0
    kinds = [a.kind for a in actions]
    assert "QuizFinished" in kinds and "ComposeDeliver" in kinds


def test_perfect_score_advances():
    state = to_post_session()
    state, _ = run(state, orch.ChooseQuiz())
    state, _ = finish_quiz(state, (True,) * 5)
    assert state.current_index == 2


def test_low_score_reinforces():
    state = to_post_session()
    state, _ = run(state, orch.ChooseQuiz())
    state, actions = finish_quiz(state, (True, True, False, False, False))
    assert state.phase is orch.Phase.REINFORCING
    assert state.current_index == 1
    assert state.reinforce_rounds == 1
    assert any(isinstance(a, orch.ComposeReinforce) for a in actions)


def test_reinforce_cap_forces_advance_with_recommendation():
    state = to_post_session()
    for round_no in (1, 2):
        state, _ = run(state, orch.ChooseQuiz())
        state, _ = finish_quiz(state, (False,) * 5)
        assert state.reinforce_rounds == round_no
        state, _ = orch.advance(state, orch.DeliveryComplete())  # reinforce delivered
        assert state.phase is orch.Phase.POST_SESSION_CHOICE
    state, actions = run(state, orch.ChooseQuiz())
    state, actions = finish_quiz(state, (False,) * 5)
    assert state.phase is orch.Phase.DELIVERING
    assert state.current_index == 2
    assert state.reinforce_rounds == 0  # reset on advance
    assert any(isinstance(a, orch.RecommendReview) for a in actions)


def test_advance_or_reinforce_boundaries():
    state = to_post_session()
    quiz = orch.start_quiz(state, SOURCE, "q")
    for correct in (True, True, True, False, False):
        quiz = orch.grade_answer(quiz, "x", correct, "fb")
    assert orch.advance_or_reinforce(quiz, state) == orch.Advance()

    quiz2 = orch.start_quiz(state, SOURCE, "q")
    for correct in (True, True, False, False, False):
        quiz2 = orch.grade_answer(quiz2, "x", correct, "fb")
    assert orch.advance_or_reinforce(quiz2, state) == orch.Reinforce(round_number=1)

    capped = dataclasses.replace(state, reinforce_rounds=2)
    assert orch.advance_or_reinforce(quiz2, capped) == orch.Advance(recommend_review=True)


def test_incomplete_quiz_cannot_decide():
    state = to_post_session()
    quiz = orch.start_quiz(state, SOURCE, "q")
    quiz = orch.grade_answer(quiz, "x", True, "fb")
    with pytest.raises(orch.QuizIncomplete):
        orch.advance_or_reinforce(quiz, state)


def test_choose_next_skips_quiz():
    state = to_post_session()
    state, actions = run(state, orch.ChooseNext())
    assert state.phase is orch.Phase.DELIVERING
    assert state.current_index == 2
    assert actions == [orch.ComposeDeliver(concept="HDFS")]


def test_last_session_completes():
    state = to_post_session(fresh_state(concepts=("Only one",)))
    state, actions = run(state, orch.ChooseNext())
    assert state.phase is orch.Phase.COMPLETED
    assert actions == []
    with pytest.raises(orch.InvalidTransition):
        orch.advance(state, orch.ChooseNext())


def test_quiz_finished_carries_scored_quiz():
    state = to_post_session()
    state, _ = run(state, orch.ChooseQuiz())
    state, actions = finish_quiz(state, (True, True, True, True, False))
    finished = [a for a in actions if isinstance(a, orch.QuizFinished)]
    assert len(finished) == 1
    assert finished[0].quiz.score == 4
    assert finished[0].quiz.cursor == 5


# -- adaptive strategy ------------------------------------------------------

def test_two_consecutive_misses_turn_encouraging():
    state = fresh_state(outcomes=(True, False, False))
    upd = orch.adapt_strategy(state)
    assert upd.tone_current is Tone.ENCOURAGING


def test_miss_then_hit_keeps_tone():
    state = fresh_state(outcomes=(False, True), tone_current=Tone.FRIENDLY)
    assert orch.adapt_strategy(state).tone_current is Tone.FRIENDLY


def test_abstract_concept_switches_to_analogy():
    state = fresh_state(concepts=("Queueing theory basics",),
                        reasoning_current=ReasoningStrategy.DEDUCTIVE)
    assert orch.adapt_strategy(state).reasoning_current is ReasoningStrategy.ANALOGICAL


def test_concrete_concept_keeps_reasoning():
    state = fresh_state(reasoning_current=ReasoningStrategy.CAUSAL)
    assert orch.adapt_strategy(state).reasoning_current is ReasoningStrategy.CAUSAL


def test_strategy_applied_during_advance():
    state = to_post_session()
    state, _ = run(state, orch.ChooseQuiz())
    state, _ = run(state, orch.SubmitAnswer(text="bad"))
    state, _ = orch.advance(state, orch.AnswerGraded(given="bad", correct=False,
                                                     feedback_text="fb"),
                            question_source=SOURCE)
    state, _ = run(state, orch.DeclineReview(), orch.SubmitAnswer(text="bad"))
    state, _ = orch.advance(state, orch.AnswerGraded(given="bad", correct=False,
                                                     feedback_text="fb"),
                            question_source=SOURCE)
    assert state.tone_current is Tone.ENCOURAGING


# -- state validation -------------------------------------------------------

def test_quiz_state_invariants():
    qs = [orch.QuizQuestion(f"q{i}", f"a{i}", orch.QuestionOrigin.CURRENT, "c")
          for i in range(5)]
    with pytest.raises(ValueError):
        orch.QuizState(quiz_id="q", questions=tuple(qs[:4]))
    with pytest.raises(ValueError):
        orch.QuizState(quiz_id="q", questions=tuple(qs), cursor=2, answers=())


def test_session_state_bounds():
    with pytest.raises(ValueError):
        fresh_state(current_index=9)
    with pytest.raises(ValueError):
        fresh_state(reinforce_rounds=3)
    with pytest.raises(ValueError):
        orch.SessionState(session_id="s", plan_id="p", concepts=())


def test_plan_indices_contiguous():
    with pytest.raises(ValueError):
        orch.LessonPlan(plan_id="p", support_id="s", sessions=(
            orch.PlanSession(index=1, concept_title="a", scope_summary="x"),
            orch.PlanSession(index=3, concept_title="b", scope_summary="y"),
        ))
