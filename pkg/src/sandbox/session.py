"""Per-(f-unit, user) sessions and their authenticated identity digest."""
from __future__ import annotations

import hashlib
import hmac
import time
from dataclasses import dataclass, field

SEPARATOR = b"\x1f"


def identity_digest(uid: str, funit: str, secret_key: str) -> str:
    """Lowercase hex SHA-256 over uid, funit and the secret key joined by 0x1F."""
    payload = SEPARATOR.join(part.encode("utf-8") for part in (uid, funit, secret_key))
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class Session:
    funit: str
    uid: str
    uid_h: str
    opened_at: float = field(default_factory=time.monotonic, compare=False)

    def __repr__(self) -> str:
        return f"Session(funit={self.funit!r}, uid={self.uid!r})"


class IdentityBinder:
    """Issues and verifies session digests. The key never leaves this object."""

    def __init__(self, secret_key: str):
        self.__secret_key = secret_key

    def bind(self, funit: str, uid: str) -> Session:
        return Session(funit=funit, uid=uid, uid_h=identity_digest(uid, funit, self.__secret_key))

    def verify(self, session: Session, claimed_funit: str) -> bool:
        expected = identity_digest(session.uid, claimed_funit, self.__secret_key)
        return hmac.compare_digest(expected, session.uid_h)
