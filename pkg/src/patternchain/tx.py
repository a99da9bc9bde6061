"""Transactions, receipts and their canonical serialization."""

from dataclasses import dataclass, field, replace
from functools import cached_property

from .codec import decode_value, encode_value, lp, u32, u64
from .crypto import Address, Hash256, address_of, hash_data, verify_signature
from .errors import SenderKeyMismatch

__all__ = [
    "Transfer",
    "Deploy",
    "Call",
    "Transaction",
    "Event",
    "Receipt",
    "sign_tx",
    "verify_tx",
]


def _check_amount(n):
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise ValueError(f"token amounts are non-negative integers, got {n!r}")


@dataclass(frozen=True)
class Transfer:
    to: Address
    amount: int
    data: bytes = b""

    kind = "transfer"

    def __post_init__(self):
        _check_amount(self.amount)

    def serialize(self) -> bytes:
        return b"\x01" + lp(self.to) + lp(self.amount.to_bytes(32, "big")) + lp(self.data)

    @property
    def value(self) -> int:
        return self.amount


@dataclass(frozen=True)
class Deploy:
    code_id: str
    version: str
    args: dict = field(default_factory=dict)
    value: int = 0

    kind = "deploy"

    def __post_init__(self):
        _check_amount(self.value)

    def serialize(self) -> bytes:
        return (
            b"\x02"
            + lp(self.code_id.encode())
            + lp(self.version.encode())
            + lp(encode_value(self.args))
            + lp(self.value.to_bytes(32, "big"))
        )


@dataclass(frozen=True)
class Call:
    contract: Address
    function: str
    args: dict = field(default_factory=dict)
    value: int = 0

    kind = "call"

    def __post_init__(self):
        _check_amount(self.value)

    def serialize(self) -> bytes:
        return (
            b"\x03"
            + lp(self.contract)
            + lp(self.function.encode())
            + lp(encode_value(self.args))
            + lp(self.value.to_bytes(32, "big"))
        )


@dataclass(frozen=True)
class Transaction:
    sender: Address
    nonce: int
    payload: object
    gas_limit: int
    public_key: bytes = b""
    signature: bytes = b""

    @cached_property
    def payload_bytes(self) -> bytes:
        return self.payload.serialize()

    @cached_property
    def signing_bytes(self) -> bytes:
        return (
            b"PCTX"
            + lp(self.sender)
            + u64(self.nonce)
            + lp(self.payload_bytes)
            + u64(self.gas_limit)
        )

    @cached_property
    def tx_id(self) -> Hash256:
        # Covers every field except the signature, so an unsigned rendering
        # and its signed form share one id.
        return hash_data(self.signing_bytes)

    def serialize(self) -> bytes:
        return self.signing_bytes + lp(self.public_key) + lp(self.signature)

    @property
    def value(self) -> int:
        return self.payload.value


def sign_tx(tx: Transaction, key) -> Transaction:
    if tx.sender != key.address:
        raise SenderKeyMismatch(f"tx sender {tx.sender} is not {key.address}")
    unsigned = replace(tx, public_key=b"", signature=b"")
    return replace(unsigned, public_key=key.public_key, signature=key.sign(unsigned.signing_bytes))


def verify_tx(tx: Transaction) -> bool:
    if not tx.public_key or address_of(tx.public_key) != tx.sender:
        return False
    return verify_signature(tx.public_key, tx.signing_bytes, tx.signature)


@dataclass(frozen=True)
class Event:
    contract: Address
    name: str
    payload: bytes

    @property
    def data(self):
        return decode_value(self.payload)


@dataclass
class Receipt:
    tx_id: Hash256
    success: bool
    gas_used: int
    return_value: bytes = b""
    events: list = field(default_factory=list)
    error: str | None = None
    detail: str = ""
    height: int = -1

    @property
    def result(self):
        return decode_value(self.return_value) if self.return_value else None

    def serialize(self) -> bytes:
        out = lp(self.tx_id) + (b"\x01" if self.success else b"\x00") + u64(self.gas_used)
        out += lp(self.return_value) + u32(len(self.events))
        for ev in self.events:
            out += lp(ev.contract) + lp(ev.name.encode()) + lp(ev.payload)
        return out + lp((self.error or "").encode())
