import itertools
import json

import pytest

from tutorkit.service.app import Settings, create_app


def make_seq_ids(prefix: str = "id"):
    counter = itertools.count(1)
    return lambda: f"{prefix}{next(counter):05d}"


def make_ticker(start: int = 1_700_000_000_000, step: int = 1000):
    counter = itertools.count(start, step)
    return lambda: next(counter)


USERS = [
    {"username": "ada", "password": "ada-pw", "role": "Learner",
     "display_name": "Ada", "education_level": "University"},
    {"username": "ben", "password": "ben-pw", "role": "Learner",
     "display_name": "Ben", "education_level": "MiddleSchool"},
    {"username": "tess", "password": "tess-pw", "role": "Teacher"},
    {"username": "pat", "password": "pat-pw", "role": "Parent"},
    {"username": "root", "password": "root-pw", "role": "Administrator"},
]

LINKS = {"pat": ["ben"]}


@pytest.fixture
def app_factory(tmp_path):
    """Build a service instance on throwaway storage with deterministic ids/clock."""

    def build(**overrides):
        kwargs = dict(
            users=USERS,
            links=LINKS,
            id_factory=make_seq_ids(),
            clock=make_ticker(),
        )
        kwargs.update(overrides)
        settings = kwargs.pop("settings", None) or Settings(
            storage_path=tmp_path / "data", token_secret="test-secret")
        return create_app(settings, **kwargs)

    return build


@pytest.fixture
def client(app_factory):
    from fastapi.testclient import TestClient

    return TestClient(app_factory())


def login(client, username: str, password: str) -> dict:
    r = client.post("/api/auth/login", json={"username": username, "password": password})
    assert r.status_code == 200, r.text
    return r.json()


def auth_headers(client, username: str, password: str) -> dict:
    return {"Authorization": f"Bearer {login(client, username, password)['token']}"}


def parse_sse(raw: str) -> list[tuple[str, dict]]:
    """Split an SSE body into (event_name, payload) tuples; plain data
    frames come back with event_name 'message'."""
    frames = []
    for block in raw.split("\n\n"):
        if not block.strip():
            continue
        name = "message"
        data_lines = []
        for line in block.splitlines():
            if line.startswith("event:"):
                name = line[6:].strip()
            elif line.startswith("data:"):
                data_lines.append(line[5:].lstrip())
        frames.append((name, json.loads("\n".join(data_lines))))
    return frames


def submit_support(client, headers, learner_id="ada", **overrides):
    body = {
        "learner_id": learner_id,
        "learning_objective": "Sorting algorithms",
        "short_description": "I want a solid grasp of the classic sorting approaches.",
        "subject_area": "computer science",
        "goal_type": "BuildNewSkill",
        "education_level": "University",
        "content_language": "en",
        "start_date": "2026-08-01",
        "end_date": "2026-09-01",
        "submit": True,
    }
    body.update(overrides)
    r = client.post("/api/supports", headers=headers, json=body)
    assert r.status_code == 201, r.text
    return r.json()


def post_event(client, headers, session_id, kind, text=None, expect=200):
    event = {"kind": kind}
    if text is not None:
        event["text"] = text
    r = client.post(f"/api/sessions/{session_id}/events", headers=headers,
                    json={"event": event})
    assert r.status_code == expect, f"{kind}: {r.status_code} {r.text}"
    return r.json()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # One verdict line per acceptance criterion, bypassing output capture.
    rows = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            lineno = rep.location[1] if rep.location else 0
            name = nodeid.split("::")[-1].removeprefix("test_")
            rows.append((lineno, name, "PASS" if rep.passed else "FAIL"))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for _, name, verdict in sorted(rows):
        terminalreporter.write_line(f"[acceptance] {name}: {verdict}")
