"""
Signature primitives for the ledger.

The default scheme is a keyed hash (HMAC-SHA-256). It stands in for a real
asymmetric scheme: the verification key equals the signing key, so it is only
suitable inside a simulation.
"""

import hashlib
import hmac
import logging
from typing import Protocol, Union

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

SIGNATURE_SIZE = 32


class SignatureScheme(Protocol):
    name: str

    def sign(self, key: bytes, message: bytes) -> bytes:
        ...

    def verify(self, verification_key: bytes, message: bytes, signature: bytes) -> bool:
        ...

    def verification_key(self, key: bytes) -> bytes:
        ...


class KeyedHashScheme:
    """sign(key, m) = HMAC-SHA-256(key, m)."""

    name = "hmac-sha256"

    def sign(self, key: bytes, message: bytes) -> bytes:
        return hmac.new(key, message, hashlib.sha256).digest()

    def verify(self, verification_key: bytes, message: bytes, signature: bytes) -> bool:
        expected = self.sign(verification_key, message)
        return hmac.compare_digest(expected, signature)

    def verification_key(self, key: bytes) -> bytes:
        return key


DEFAULT_SCHEME = KeyedHashScheme()


def derive_key(stakeholder_id: str, seed: Union[int, str] = 0) -> bytes:
    """Deterministic simulation key for a stakeholder."""
    return hashlib.sha256(f"chainfis-key:{seed}:{stakeholder_id}".encode("utf-8")).digest()
