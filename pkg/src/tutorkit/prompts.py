"""Prompt engine: tone/reasoning selection rules and layered prompt composition.

Prompts are assembled from four layers in fixed order: global context,
instructional logic, adaptive variables, post-interaction. Each layer is a
template with ``{{name}}`` placeholders; ``{{{{`` escapes a literal ``{{``.
Composition is pure and deterministic: same inputs, same bytes out.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from tutorkit.model import (
    LEVEL_ORDER,
    AssistantConfig,
    EducationLevel,
    GoalType,
    ReasoningStrategy,
    Tone,
)


class SubjectKind(str, Enum):
    LOGIC_MATH = "LogicMath"
    EMPIRICAL = "Empirical"
    BRIDGING = "Bridging"
    PROCESS = "Process"
    CREATIVE = "Creative"


class TaskKind(str, Enum):
    PLAN = "Plan"
    DELIVER = "Deliver"
    FEEDBACK = "Feedback"
    QUIZ = "Quiz"
    REVIEW = "Review"


class ChainKind(str, Enum):
    FULL_SESSION = "FullSession"
    QUIZ_ONLY = "QuizOnly"
    REVIEW_ONLY = "ReviewOnly"


class PromptLayer(str, Enum):
    GLOBAL_CONTEXT = "global_context"
    INSTRUCTIONAL_LOGIC = "instructional_logic"
    ADAPTIVE_VARIABLES = "adaptive_variables"
    POST_INTERACTION = "post_interaction"


LAYER_ORDER = (
    PromptLayer.GLOBAL_CONTEXT,
    PromptLayer.INSTRUCTIONAL_LOGIC,
    PromptLayer.ADAPTIVE_VARIABLES,
    PromptLayer.POST_INTERACTION,
)

# Keyword table for the subject classifier. Matching is on whole words of the
# lowercased subject string; first category with a hit wins, in this order.
SUBJECT_KEYWORDS: tuple[tuple[SubjectKind, tuple[str, ...]], ...] = (
    (SubjectKind.LOGIC_MATH, (
        "math", "mathematics", "algebra", "geometry", "calculus", "logic",
        "arithmetic", "statistics", "probability", "trigonometry",
    )),
    (SubjectKind.EMPIRICAL, (
        "physics", "chemistry", "biology", "science", "astronomy", "geology",
        "ecology", "experiment", "lab",
    )),
    (SubjectKind.PROCESS, (
        "history", "economics", "engineering", "programming", "algorithms",
        "systems", "hadoop", "networks", "cooking", "manufacturing",
    )),
    (SubjectKind.CREATIVE, (
        "writing", "art", "music", "design", "poetry", "drama", "film",
        "creative", "storytelling",
    )),
)

# Subjects treated as casual for the humor rule.
CASUAL_SUBJECTS = frozenset({
    "music", "film", "games", "gaming", "sports", "hobbies", "cooking",
    "pop", "culture", "trivia",
})

STRATEGY_FOR_SUBJECT: dict[SubjectKind, ReasoningStrategy] = {
    SubjectKind.LOGIC_MATH: ReasoningStrategy.DEDUCTIVE,
    SubjectKind.EMPIRICAL: ReasoningStrategy.INDUCTIVE,
    SubjectKind.BRIDGING: ReasoningStrategy.ANALOGICAL,
    SubjectKind.PROCESS: ReasoningStrategy.CAUSAL,
    SubjectKind.CREATIVE: ReasoningStrategy.ABDUCTIVE,
}


def _subject_words(subject_area: str) -> list[str]:
    return re.findall(r"[a-z]+", subject_area.lower())


def classify_subject(subject_area: str) -> SubjectKind:
    """Classify a free-text subject into a reasoning category.

    Whole-word keyword match against the table above; unmatched subjects fall
    back to Bridging (analogy works everywhere).
    """
    words = set(_subject_words(subject_area))
    for kind, keywords in SUBJECT_KEYWORDS:
        if words & set(keywords):
            return kind
    return SubjectKind.BRIDGING


def is_casual_subject(subject_area: str) -> bool:
    return bool(set(_subject_words(subject_area)) & CASUAL_SUBJECTS)


def select_tone(
    level: EducationLevel,
    subject_area: str,
    goal: GoalType,
    *,
    struggle_signal: bool,
) -> Tone:
    """Pick a tone from the rule table; first matching rule wins.

    1. struggling learner        -> Encouraging
    2. exam preparation          -> Informative
    3. young learner, new skill  -> Friendly
    4. casual subject, older     -> Humorous
    5. otherwise                 -> Neutral
    """
    if struggle_signal:
        return Tone.ENCOURAGING
    if goal is GoalType.PREPARE_FOR_EXAM:
        return Tone.INFORMATIVE
    if level in (EducationLevel.PRIMARY_SCHOOL, EducationLevel.MIDDLE_SCHOOL) \
            and goal is GoalType.BUILD_NEW_SKILL:
        return Tone.FRIENDLY
    if is_casual_subject(subject_area) and LEVEL_ORDER[level] >= LEVEL_ORDER[EducationLevel.HIGH_SCHOOL]:
        return Tone.HUMOROUS
    return Tone.NEUTRAL


def select_reasoning(kind: SubjectKind) -> ReasoningStrategy:
    return STRATEGY_FOR_SUBJECT[kind]


# ---------------------------------------------------------------------------
# Templates

@dataclass(frozen=True)
class PromptTemplate:
    id: str
    task_kind: TaskKind
    layer: PromptLayer
    body: str
    schema_version: int = 1


class UnknownTemplate(Exception):
    pass


class UnknownTaskKind(Exception):
    pass


class UnresolvedVariable(Exception):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no value bound for placeholder {name!r}")


class CatalogError(Exception):
    pass


# Placeholder scanner: an escaped {{{{ or a {{name}} reference.
_PLACEHOLDER = re.compile(r"\{\{\{\{|\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}")

# Unresolved markers left in rendered output (escape sequences excluded).
_UNRESOLVED = re.compile(r"\{\{[A-Za-z_][A-Za-z0-9_]*\}\}")


def substitute(body: str, bindings: dict[str, str]) -> str:
    """Replace {{name}} from bindings; {{{{ renders a literal {{.

    Unknown placeholder names raise UnresolvedVariable; extra binding keys are
    ignored.
    """
    def sub(m: re.Match) -> str:
        if m.group(0) == "{{{{":
            return "{{"
        name = m.group(1)
        value = bindings.get(name)
        if value is None:
            raise UnresolvedVariable(name)
        return value

    return _PLACEHOLDER.sub(sub, body)


def placeholder_names(body: str) -> set[str]:
    return {m.group(1) for m in _PLACEHOLDER.finditer(body) if m.group(1)}


class TemplateCatalog:
    """Lookup of prompt templates keyed by id and by (task_kind, layer).

    The catalog must provide exactly one template per (task, layer) pair for
    every task kind; the constructor enforces that so composition can never
    come up short a layer at request time.
    """

    def __init__(self, templates: list[PromptTemplate]):
        self._by_key: dict[tuple[TaskKind, PromptLayer], PromptTemplate] = {}
        self._by_id: dict[str, PromptTemplate] = {}
        for tpl in templates:
            key = (tpl.task_kind, tpl.layer)
            if key in self._by_key:
                raise CatalogError(f"duplicate template for {tpl.task_kind.value}/{tpl.layer.value}")
            if tpl.id in self._by_id:
                raise CatalogError(f"duplicate template id {tpl.id}")
            self._by_key[key] = tpl
            self._by_id[tpl.id] = tpl
        for task in TaskKind:
            for layer in LAYER_ORDER:
                if (task, layer) not in self._by_key:
                    raise CatalogError(f"missing template for {task.value}/{layer.value}")

    def get(self, task: TaskKind, layer: PromptLayer) -> PromptTemplate:
        return self._by_key[(task, layer)]

    def get_by_id(self, template_id: str) -> PromptTemplate:
        tpl = self._by_id.get(template_id)
        if tpl is None:
            raise UnknownTemplate(template_id)
        return tpl

    @classmethod
    def from_json(cls, text: str) -> "TemplateCatalog":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CatalogError(f"catalog is not valid JSON: {exc}") from exc
        if not isinstance(raw, list):
            raise CatalogError("catalog root must be a list")
        templates = []
        for item in raw:
            try:
                templates.append(PromptTemplate(
                    id=item["id"],
                    task_kind=TaskKind(item["task_kind"]),
                    layer=PromptLayer(item["layer"]),
                    body=item["body"],
                    schema_version=int(item.get("schema_version", 1)),
                ))
            except (KeyError, ValueError, TypeError) as exc:
                raise CatalogError(f"bad catalog entry {item!r}: {exc}") from exc
        return cls(templates)

    @classmethod
    def load_default(cls) -> "TemplateCatalog":
        text = resources.files("tutorkit").joinpath("templates.json").read_text("utf-8")
        return cls.from_json(text)


_default_catalog: TemplateCatalog | None = None


def default_catalog() -> TemplateCatalog:
    global _default_catalog
    if _default_catalog is None:
        _default_catalog = TemplateCatalog.load_default()
    return _default_catalog


def render_template(template_id: str, bindings: dict[str, str],
                    catalog: TemplateCatalog | None = None) -> str:
    cat = catalog or default_catalog()
    return substitute(cat.get_by_id(template_id).body, bindings)


# ---------------------------------------------------------------------------
# Composition

@dataclass(frozen=True)
class PromptContext:
    """Everything the composer may substitute into a prompt."""

    assistant_config: AssistantConfig
    task_kind: TaskKind
    learner_level: EducationLevel | None
    topic: str
    session_index: int = 1
    progress_summary: str = ""
    performance_history: tuple[bool, ...] = ()
    retrieved_context: str = ""
    tone_override: Tone | None = None
    reasoning_override: ReasoningStrategy | None = None
    learner_name: str = "learner"
    persona_name: str = "Tutor"

    def __post_init__(self) -> None:
        if self.session_index < 1:
            raise ValueError("session_index must be >= 1")


@dataclass(frozen=True)
class LayeredPrompt:
    global_context: str
    instructional_logic: str
    adaptive_variables: str
    post_interaction: str

    @property
    def rendered(self) -> str:
        return "\n\n".join(self.blocks())

    def blocks(self) -> tuple[str, str, str, str]:
        return (self.global_context, self.instructional_logic,
                self.adaptive_variables, self.post_interaction)

    def __post_init__(self) -> None:
        for block in self.blocks():
            if not block.strip():
                raise ValueError("prompt layers must be non-empty")
            if _UNRESOLVED.search(block):
                raise ValueError("prompt layer contains an unresolved placeholder")


def _performance_summary(history: tuple[bool, ...]) -> str:
    if not history:
        return "no graded work yet"
    correct = sum(1 for h in history if h)
    return f"{correct} of {len(history)} recent answers correct"


def context_bindings(ctx: PromptContext) -> dict[str, str]:
    """Build the placeholder bindings for a context; None fields stay unbound."""
    tone = ctx.tone_override or ctx.assistant_config.default_tone
    reasoning = ctx.reasoning_override or ctx.assistant_config.default_reasoning
    bindings = {
        "persona_name": ctx.persona_name,
        "learner_name": ctx.learner_name,
        "content_language": ctx.assistant_config.content_language,
        "tone": tone.value,
        "reasoning": reasoning.value,
        "topic": ctx.topic,
        "session_index": str(ctx.session_index),
        "progress_summary": ctx.progress_summary,
        "performance_summary": _performance_summary(ctx.performance_history),
        "retrieved_context": ctx.retrieved_context,
    }
    if ctx.learner_level is not None:
        bindings["learner_level"] = ctx.learner_level.value
    return bindings


def compose_prompt(ctx: PromptContext, catalog: TemplateCatalog | None = None) -> LayeredPrompt:
    """Render the four layers for a task, in fixed order.

    Deterministic: equal contexts produce byte-identical prompts. Raises
    UnresolvedVariable when a template references a binding the context cannot
    supply (for example a None learner_level).
    """
    cat = catalog or default_catalog()
    task = ctx.task_kind
    if not isinstance(task, TaskKind):
        try:
            task = TaskKind(task)
        except ValueError:
            raise UnknownTaskKind(str(task)) from None
    bindings = context_bindings(ctx)
    rendered = [substitute(cat.get(task, layer).body, bindings) for layer in LAYER_ORDER]
    return LayeredPrompt(*rendered)


def chain_for_task(kind: ChainKind | str) -> list[TaskKind]:
    """Expand a chain kind into its ordered prompt stages."""
    if not isinstance(kind, ChainKind):
        try:
            kind = ChainKind(kind)
        except ValueError:
            raise UnknownTaskKind(str(kind)) from None
    if kind is ChainKind.FULL_SESSION:
        return [TaskKind.PLAN, TaskKind.DELIVER, TaskKind.FEEDBACK, TaskKind.QUIZ]
    if kind is ChainKind.QUIZ_ONLY:
        return [TaskKind.QUIZ]
    return [TaskKind.REVIEW]
