"""Digests, addresses and Ed25519 key pairs."""

import hashlib
from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .errors import EmptySeed

__all__ = [
    "Hash256",
    "Address",
    "ZERO_HASH",
    "hash_data",
    "address_of",
    "KeyPair",
    "verify_signature",
]


class Hash256(bytes):
    """A 32-byte SHA-256 digest."""

    def __new__(cls, value):
        value = bytes(value)
        if len(value) != 32:
            raise ValueError(f"Hash256 needs 32 bytes, got {len(value)}")
        return super().__new__(cls, value)

    def __repr__(self):
        return f"Hash256({self.hex()[:16]}...)"


class Address(bytes):
    """A 20-byte account or contract identifier."""

    def __new__(cls, value):
        if isinstance(value, str):
            value = bytes.fromhex(value.removeprefix("0x"))
        value = bytes(value)
        if len(value) != 20:
            raise ValueError(f"Address needs 20 bytes, got {len(value)}")
        return super().__new__(cls, value)

    def __repr__(self):
        return f"Address(0x{self.hex()})"

    def __str__(self):
        return "0x" + self.hex()


ZERO_HASH = Hash256(bytes(32))


def hash_data(data: bytes) -> Hash256:
    return Hash256(hashlib.sha256(data).digest())


def address_of(public_key: bytes) -> Address:
    return Address(hash_data(public_key)[-20:])


@lru_cache(maxsize=4096)
def _public_key(raw: bytes) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(raw)


def verify_signature(public_key: bytes, message: bytes, signature: bytes) -> bool:
    if len(public_key) != 32 or len(signature) != 64:
        return False
    try:
        _public_key(bytes(public_key)).verify(bytes(signature), message)
    except (InvalidSignature, ValueError):
        return False
    return True


class KeyPair:
    """Ed25519 key pair derived deterministically from a seed."""

    def __init__(self, private_key: Ed25519PrivateKey):
        self._private = private_key
        self.public_key = private_key.public_key().public_bytes(
            Encoding.Raw, PublicFormat.Raw
        )
        self.address = address_of(self.public_key)

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        if isinstance(seed, str):
            seed = seed.encode("utf-8")
        if not seed:
            raise EmptySeed("seed must be non-empty")
        return cls(Ed25519PrivateKey.from_private_bytes(hashlib.sha256(seed).digest()))

    def sign(self, message: bytes) -> bytes:
        return self._private.sign(message)

    def verify(self, message: bytes, signature: bytes) -> bool:
        return verify_signature(self.public_key, message, signature)

    def sign_tx(self, tx):
        from .tx import sign_tx

        return sign_tx(tx, self)

    def __repr__(self):
        return f"KeyPair({self.address})"
