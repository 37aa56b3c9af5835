"""Role-based access control: signed bearer tokens, an explicit permission
matrix with deny-by-default, ownership scoping, and the parent-facing
dashboard filter.

Tokens are stateless: base64url(JSON claims) + "." + base64url(HMAC-SHA256).
Verification needs only the shared secret, so any request handler can check a
token without touching storage.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import time
from dataclasses import dataclass
from enum import Enum


class Role(str, Enum):
    LEARNER = "Learner"
    TEACHER = "Teacher"
    PARENT = "Parent"
    ADMINISTRATOR = "Administrator"


class Action(str, Enum):
    VIEW_OWN_PATH = "view_own_path"
    CHAT_WITH_TUTOR = "chat_with_tutor"
    SET_GOALS = "set_goals"
    UPLOAD_MATERIAL = "upload_material"
    VIEW_OWN_DASHBOARD = "view_own_dashboard"
    VIEW_STUDENT_ANALYTICS = "view_student_analytics"
    CONFIGURE_CONTENT = "configure_content"
    VIEW_CHILD_SUMMARY = "view_child_summary"
    MANAGE_USERS = "manage_users"
    CONFIGURE_MODELS = "configure_models"


# Every (role, action) pair is listed; absence of a pair can only mean a typo,
# and lookups fall back to deny anyway.
DEFAULT_MATRIX: dict[tuple[Role, Action], bool] = {
    (role, action): False for role in Role for action in Action
}
DEFAULT_MATRIX.update({
    (Role.LEARNER, Action.VIEW_OWN_PATH): True,
    (Role.LEARNER, Action.CHAT_WITH_TUTOR): True,
    (Role.LEARNER, Action.SET_GOALS): True,
    (Role.LEARNER, Action.UPLOAD_MATERIAL): True,
    (Role.LEARNER, Action.VIEW_OWN_DASHBOARD): True,
    (Role.TEACHER, Action.VIEW_STUDENT_ANALYTICS): True,
    (Role.TEACHER, Action.CONFIGURE_CONTENT): True,
    (Role.PARENT, Action.VIEW_CHILD_SUMMARY): True,
    (Role.ADMINISTRATOR, Action.MANAGE_USERS): True,
    (Role.ADMINISTRATOR, Action.CONFIGURE_MODELS): True,
})

# Actions a learner may only perform against their own resources.
LEARNER_SELF_ACTIONS = frozenset({
    Action.VIEW_OWN_PATH, Action.CHAT_WITH_TUTOR, Action.SET_GOALS,
    Action.UPLOAD_MATERIAL, Action.VIEW_OWN_DASHBOARD,
})


def load_matrix(text: str) -> dict[tuple[Role, Action], bool]:
    """Parse a {"Role": ["action", ...]} JSON config into a full matrix."""
    raw = json.loads(text)
    matrix = {(role, action): False for role in Role for action in Action}
    for role_name, actions in raw.items():
        role = Role(role_name)
        for action_name in actions:
            matrix[(role, Action(action_name))] = True
    return matrix


class DenyReason(str, Enum):
    EXPIRED = "Expired"
    BAD_SIGNATURE = "BadSignature"
    FORBIDDEN = "Forbidden"
    NOT_LINKED = "NotLinked"


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: DenyReason | None = None

    def __bool__(self) -> bool:
        return self.allowed


ALLOW = Decision(True)


@dataclass(frozen=True)
class TokenClaims:
    subject: str
    role: Role
    issued_at: int  # UTC ms
    expires_at: int  # UTC ms


class InvalidTtl(Exception):
    pass


class UnknownSubject(Exception):
    pass


class NotLinked(Exception):
    pass


def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def _unb64(text: str) -> bytes:
    pad = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + pad)


def now_ms() -> int:
    return int(time.time() * 1000)


class AccessControl:
    """Token issuing plus (role, action, ownership) authorization.

    links maps a parent subject to the set of child learner ids that parent
    may see. The matrix is read-only after construction.
    """

    def __init__(
        self,
        secret: bytes,
        matrix: dict[tuple[Role, Action], bool] | None = None,
        links: dict[str, set[str]] | None = None,
        clock=now_ms,
    ):
        if not secret:
            raise ValueError("secret must be non-empty")
        self._secret = secret
        self._matrix = dict(matrix if matrix is not None else DEFAULT_MATRIX)
        self._links = {k: set(v) for k, v in (links or {}).items()}
        self._clock = clock

    def allowed_actions(self, role: Role) -> list[Action]:
        return [a for a in Action if self._matrix.get((role, a), False)]

    def link_child(self, parent_subject: str, child_subject: str) -> None:
        self._links.setdefault(parent_subject, set()).add(child_subject)

    def linked_children(self, parent_subject: str) -> set[str]:
        return set(self._links.get(parent_subject, set()))

    # -- tokens ------------------------------------------------------------

    def _sign(self, payload_b64: str) -> str:
        mac = hmac.new(self._secret, payload_b64.encode("ascii"), hashlib.sha256)
        return _b64(mac.digest())

    def issue_token(self, subject: str, role: Role, ttl_ms: int) -> str:
        if not subject:
            raise UnknownSubject("subject must be non-empty")
        if ttl_ms <= 0:
            raise InvalidTtl(f"ttl_ms must be positive, got {ttl_ms}")
        now = self._clock()
        payload = {
            "sub": subject,
            "role": role.value,
            "iat": now,
            "exp": now + ttl_ms,
        }
        payload_b64 = _b64(json.dumps(payload, separators=(",", ":"), sort_keys=True).encode("utf-8"))
        return f"{payload_b64}.{self._sign(payload_b64)}"

    def verify_token(self, token: str) -> tuple[TokenClaims | None, DenyReason | None]:
        """Check integrity and expiry; returns (claims, None) or (None, reason)."""
        parts = token.split(".")
        if len(parts) != 2:
            return None, DenyReason.BAD_SIGNATURE
        payload_b64, sig = parts
        if not hmac.compare_digest(sig, self._sign(payload_b64)):
            return None, DenyReason.BAD_SIGNATURE
        try:
            payload = json.loads(_unb64(payload_b64))
            claims = TokenClaims(
                subject=payload["sub"],
                role=Role(payload["role"]),
                issued_at=int(payload["iat"]),
                expires_at=int(payload["exp"]),
            )
        except (ValueError, KeyError, TypeError):
            return None, DenyReason.BAD_SIGNATURE
        if self._clock() >= claims.expires_at:
            return None, DenyReason.EXPIRED
        return claims, None

    # -- authorization -----------------------------------------------------

    def authorize(self, token: str, action: Action | str,
                  resource_owner: str | None = None) -> Decision:
        """Decide one request: token integrity, matrix lookup, ownership scope.

        Unknown action names deny rather than raise, so an undeclared action
        can never slip through as allowed.
        """
        claims, reason = self.verify_token(token)
        if claims is None:
            return Decision(False, reason)
        if not isinstance(action, Action):
            try:
                action = Action(action)
            except ValueError:
                return Decision(False, DenyReason.FORBIDDEN)
        if not self._matrix.get((claims.role, action), False):
            return Decision(False, DenyReason.FORBIDDEN)
        if claims.role is Role.LEARNER and action in LEARNER_SELF_ACTIONS:
            if resource_owner != claims.subject:
                return Decision(False, DenyReason.FORBIDDEN)
        if claims.role is Role.PARENT and action is Action.VIEW_CHILD_SUMMARY:
            if resource_owner is None or resource_owner not in self._links.get(claims.subject, set()):
                return Decision(False, DenyReason.NOT_LINKED)
        return ALLOW

    def parent_scope_filter(self, parent_subject: str, dashboard) -> dict:
        """Reduce a full dashboard to the aggregates a parent may see.

        Keeps the engagement score, path progress, session counts, and bare
        quiz scores. Chat text, quiz answer text, and event-level logs are
        dropped entirely.
        """
        if dashboard.learner_id not in self._links.get(parent_subject, set()):
            raise NotLinked(f"{parent_subject} is not linked to {dashboard.learner_id}")
        return {
            "schema_version": 1,
            "learner_id": dashboard.learner_id,
            "engagement_total": dashboard.engagement.total,
            "engagement_sub_scores": dict(dashboard.engagement.sub_scores),
            "path": [dict(p) for p in dashboard.path],
            "session_count": dashboard.session_count,
            "quiz_scores": [q["score"] for q in dashboard.quiz_history],
        }
