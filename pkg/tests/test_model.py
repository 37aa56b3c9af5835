from datetime import date

import pytest

from tutorkit.model import (
    AssistantConfig,
    AvatarChoice,
    EducationLevel,
    ErrorCode,
    GoalType,
    LearnerProfile,
    ReasoningStrategy,
    RequestStatus,
    SupportRequest,
    SupportValidationError,
    Tone,
    derive_assistant_config,
    normalize_keywords,
    validate_support_request,
)


def draft(**overrides) -> SupportRequest:
    base = dict(
        support_id="s1",
        learner_id="ada",
        learning_objective="Understand Hadoop",
        short_description="Big data basics for a project",
        subject_area="computer science",
        goal_type=GoalType.BUILD_NEW_SKILL,
        education_level=EducationLevel.UNIVERSITY,
        content_language="en",
    )
    base.update(overrides)
    return SupportRequest(**base)


def test_valid_draft_submits():
    out = validate_support_request(draft())
    assert out.status is RequestStatus.SUBMITTED
    assert out.goal_type is GoalType.BUILD_NEW_SKILL
    assert out.education_level is EducationLevel.UNIVERSITY


def test_validation_is_pure():
    d = draft()
    validate_support_request(d)
    assert d.status is RequestStatus.DRAFT


def test_missing_mandatory_fields_all_reported():
    d = draft(learning_objective="", subject_area="  ", goal_type=None,
              education_level=None, content_language="")
    with pytest.raises(SupportValidationError) as exc:
        validate_support_request(d)
    codes = {(e.field, e.code) for e in exc.value.errors}
    for f in ("learning_objective", "subject_area", "goal_type",
              "education_level", "content_language"):
        assert (f, ErrorCode.MISSING_MANDATORY_FIELD) in codes
    assert len(exc.value.errors) == 5


def test_unknown_enum_strings_rejected():
    d = draft(goal_type="Cram", education_level="Kindergarten")
    with pytest.raises(SupportValidationError) as exc:
        validate_support_request(d)
    codes = {e.code for e in exc.value.errors}
    assert ErrorCode.UNKNOWN_GOAL_TYPE in codes
    assert ErrorCode.UNKNOWN_EDUCATION_LEVEL in codes


def test_enum_strings_coerced_on_submit():
    out = validate_support_request(draft(goal_type="PrepareForExam",
                                         education_level="HighSchool"))
    assert out.goal_type is GoalType.PREPARE_FOR_EXAM
    assert out.education_level is EducationLevel.HIGH_SCHOOL


def test_end_before_start_rejected():
    d = draft(start_date=date(2026, 9, 1), end_date=date(2026, 8, 1))
    with pytest.raises(SupportValidationError) as exc:
        validate_support_request(d)
    assert exc.value.errors[0].code is ErrorCode.INVALID_PLANNING_HORIZON


def test_same_day_horizon_allowed():
    d = draft(start_date=date(2026, 8, 1), end_date=date(2026, 8, 1))
    assert validate_support_request(d).status is RequestStatus.SUBMITTED


def test_nonpositive_duration_rejected():
    with pytest.raises(SupportValidationError):
        validate_support_request(draft(estimated_duration_minutes=0))


def test_keywords_normalized():
    assert normalize_keywords([" Hadoop ", "hadoop", "HDFS", "", "  "]) == ["hadoop", "hdfs"]
    out = validate_support_request(draft(keywords=("Spark", " spark ", "Flink")))
    assert out.keywords == ("spark", "flink")


def test_profile_rejects_unknown_persona():
    with pytest.raises(ValueError):
        LearnerProfile(learner_id="x", display_name="X",
                       education_level=EducationLevel.UNIVERSITY,
                       avatar_persona=AvatarChoice("zorp", "Zorp"))


def test_profile_rejects_bad_language_tag():
    with pytest.raises(ValueError):
        LearnerProfile(learner_id="x", display_name="X",
                       education_level=EducationLevel.UNIVERSITY,
                       preferred_language="not a tag!")


def test_assistant_config_requires_submitted():
    profile = LearnerProfile(learner_id="ada", display_name="Ada",
                             education_level=EducationLevel.UNIVERSITY)
    with pytest.raises(ValueError):
        derive_assistant_config(profile, draft())


def test_assistant_config_is_deterministic():
    profile = LearnerProfile(learner_id="ada", display_name="Ada",
                             education_level=EducationLevel.UNIVERSITY)
    submitted = validate_support_request(draft())
    a = derive_assistant_config(profile, submitted)
    b = derive_assistant_config(profile, submitted)
    assert a == b
    assert a.depth_level is EducationLevel.UNIVERSITY
    assert a.content_language == "en"


def test_assistant_config_tone_for_exam_goal():
    profile = LearnerProfile(learner_id="ada", display_name="Ada",
                             education_level=EducationLevel.UNIVERSITY)
    submitted = validate_support_request(draft(goal_type=GoalType.PREPARE_FOR_EXAM))
    cfg = derive_assistant_config(profile, submitted)
    assert cfg.default_tone is Tone.INFORMATIVE


def test_assistant_config_reasoning_for_math():
    profile = LearnerProfile(learner_id="ada", display_name="Ada",
                             education_level=EducationLevel.UNIVERSITY)
    submitted = validate_support_request(draft(subject_area="algebra",
                                               goal_type=GoalType.REVIEW_COURSE))
    cfg = derive_assistant_config(profile, submitted)
    assert cfg.default_reasoning is ReasoningStrategy.DEDUCTIVE


def test_session_minutes_must_be_positive():
    with pytest.raises(ValueError):
        AssistantConfig(support_id="s", default_tone=Tone.NEUTRAL,
                        default_reasoning=ReasoningStrategy.ANALOGICAL,
                        content_language="en",
                        depth_level=EducationLevel.UNIVERSITY,
                        session_target_minutes=0)
