"""Adaptive tutoring service: onboarding, prompt composition, session orchestration,
retrieval grounding, engagement analytics, and a pluggable LLM gateway."""

__version__ = "0.1.0"
