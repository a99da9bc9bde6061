"""Deterministic single-producer ledger.

A :class:`Chain` owns the block list, the world state and the mempool.
Blocks are produced on demand by :meth:`Chain.advance_block`; there is no
consensus and no forking, only ordering and confirmation depth.
"""

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .codec import lp, u32, u64
from .crypto import ZERO_HASH, Address, Hash256, KeyPair, hash_data
from .errors import (
    BadNonce,
    BadSignature,
    EmbedTooLarge,
    InsufficientBalance,
    InsufficientGas,
    OversizeTransaction,
    ProfileError,
)
from .runtime import GAS, Executor, GasSchedule
from .state import WorldState
from .tx import Receipt, Transaction, Transfer, verify_tx

__all__ = [
    "ChainProfile",
    "ETHEREUM_LIKE",
    "BITCOIN_LIKE",
    "PROFILES",
    "get_profile",
    "Block",
    "Confirmations",
    "Chain",
    "DEFAULT_CALL_GAS",
]

DEFAULT_CALL_GAS = 1_000_000


@dataclass(frozen=True)
class ChainProfile:
    name: str
    block_interval_ticks: int
    confirmation_depth: int
    block_gas_limit: int
    max_tx_bytes: int
    max_embed_bytes: int
    # Built-in profiles only; not part of the JSON file format.
    contract_allowlist: frozenset | None = None

    _JSON_KEYS = (
        "name",
        "block_interval_ticks",
        "confirmation_depth",
        "block_gas_limit",
        "max_tx_bytes",
        "max_embed_bytes",
    )

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ProfileError("profile name must be a non-empty string")
        for f in self._JSON_KEYS[1:]:
            v = getattr(self, f)
            if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
                raise ProfileError(f"{f} must be a positive integer, got {v!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "ChainProfile":
        keys = set(data)
        expected = set(cls._JSON_KEYS)
        if keys != expected:
            raise ProfileError(
                f"profile keys must be exactly {sorted(expected)}; "
                f"missing {sorted(expected - keys)}, unexpected {sorted(keys - expected)}"
            )
        return cls(**{k: data[k] for k in cls._JSON_KEYS})

    @classmethod
    def from_json(cls, path) -> "ChainProfile":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self._JSON_KEYS}


ETHEREUM_LIKE = ChainProfile(
    name="ethereum-like",
    block_interval_ticks=14,
    confirmation_depth=11,
    block_gas_limit=8_000_000,
    max_tx_bytes=128 * 1024,
    max_embed_bytes=128 * 1024,
)

BITCOIN_LIKE = ChainProfile(
    name="bitcoin-like",
    block_interval_ticks=600,
    confirmation_depth=5,
    block_gas_limit=8_000_000,
    max_tx_bytes=100_000,
    max_embed_bytes=40,
    contract_allowlist=frozenset({"hashlock-escrow", "multisig-wallet", "channel"}),
)

PROFILES = {p.name: p for p in (ETHEREUM_LIKE, BITCOIN_LIKE)}


def get_profile(name_or_profile) -> ChainProfile:
    if isinstance(name_or_profile, ChainProfile):
        return name_or_profile
    try:
        return PROFILES[name_or_profile]
    except KeyError:
        raise ProfileError(f"unknown profile {name_or_profile!r}; known: {sorted(PROFILES)}") from None


@dataclass(frozen=True)
class Block:
    height: int
    parent_hash: Hash256
    transactions: tuple
    gas_used: int
    timestamp: int

    def serialize(self) -> bytes:
        out = [b"PCBK", u64(self.height), lp(self.parent_hash), u32(len(self.transactions))]
        out.extend(lp(tx.serialize()) for tx in self.transactions)
        out += [u64(self.gas_used), u64(self.timestamp)]
        return b"".join(out)

    @cached_property
    def hash(self) -> Hash256:
        return hash_data(self.serialize())


@dataclass(frozen=True)
class Confirmations:
    count: int
    committed: bool
    height: int


class Chain:
    """Simulated blockchain with one exclusive writer.

    Parameters
    ----------
    profile:
        A :class:`ChainProfile` or the name of a built-in one.
    gas_price:
        Token units charged per gas unit; fees leave circulation into
        :attr:`WorldState.fees`.
    """

    def __init__(self, profile="ethereum-like", gas_price: int = 1, schedule: GasSchedule = GAS):
        self.profile = get_profile(profile)
        self.gas_price = gas_price
        self.schedule = schedule
        self.state = WorldState()
        self.executor = Executor(self.state, self.profile, schedule)
        self.blocks: list[Block] = []
        self.mempool: list[Transaction] = []
        self.receipts: dict[Hash256, Receipt] = {}
        self.transactions: dict[Hash256, Transaction] = {}
        self.public_keys: dict[Address, bytes] = {}
        self.mint_log: list[tuple[int, Address, int]] = []
        self.observers = []
        self.tick = 0
        self._pending_by_sender: dict[Address, int] = {}
        self._append(Block(0, ZERO_HASH, (), 0, self.tick))

    # -- accounts --------------------------------------------------------
    def create_account(self, seed: bytes) -> tuple[KeyPair, Address]:
        key = KeyPair.from_seed(seed)
        self.state.account(key.address)
        self.state.commit()
        self.public_keys[key.address] = key.public_key
        return key, key.address

    def mint(self, addr: Address, amount: int):
        """Faucet: create ``amount`` new units at ``addr`` (genesis/testing only)."""
        if not isinstance(amount, int) or amount < 0:
            raise ValueError("mint amount must be a non-negative integer")
        self.state.mint(Address(addr), amount)
        self.state.commit()
        self.mint_log.append((self.height, Address(addr), amount))
        self._notify("mint", address=Address(addr), amount=amount)

    def get_balance(self, addr: Address) -> int:
        return self.state.balance_of(addr)

    def next_nonce(self, addr: Address) -> int:
        return self.state.nonce_of(addr) + self._pending_by_sender.get(addr, 0)

    # -- transactions ----------------------------------------------------
    def build_tx(self, sender: Address, payload, gas_limit: int | None = None) -> Transaction:
        if gas_limit is None:
            if isinstance(payload, Transfer):
                gas_limit = self.schedule.intrinsic(len(payload.serialize()))
            else:
                gas_limit = DEFAULT_CALL_GAS
        return Transaction(Address(sender), self.next_nonce(sender), payload, gas_limit)

    def submit(self, tx: Transaction) -> Hash256:
        if not verify_tx(tx):
            raise BadSignature(f"tx {tx.tx_id.hex()[:16]} from {tx.sender}")
        expected = self.next_nonce(tx.sender)
        if tx.nonce != expected:
            raise BadNonce(f"nonce {tx.nonce}, expected {expected}")
        size = len(tx.payload_bytes)
        if size > self.profile.max_tx_bytes:
            raise OversizeTransaction(f"{size} bytes > {self.profile.max_tx_bytes}")
        if isinstance(tx.payload, Transfer) and len(tx.payload.data) > self.profile.max_embed_bytes:
            raise EmbedTooLarge(f"{len(tx.payload.data)} bytes > {self.profile.max_embed_bytes}")
        intrinsic = self.schedule.intrinsic(size)
        if tx.gas_limit < intrinsic:
            raise InsufficientGas(f"gas limit {tx.gas_limit} < intrinsic {intrinsic}")
        if tx.gas_limit > self.profile.block_gas_limit:
            raise InsufficientGas(f"gas limit {tx.gas_limit} exceeds block gas limit")
        need = tx.value + tx.gas_limit * self.gas_price
        have = self.state.balance_of(tx.sender)
        if have < need:
            raise InsufficientBalance(f"{tx.sender} holds {have}, needs {need}")
        self.mempool.append(tx)
        self.transactions[tx.tx_id] = tx
        self.public_keys.setdefault(tx.sender, tx.public_key)
        self._pending_by_sender[tx.sender] = self._pending_by_sender.get(tx.sender, 0) + 1
        self._notify("submitted", tx=tx)
        return tx.tx_id

    def sign_and_submit(self, signer, payload, gas_limit: int | None = None) -> Hash256:
        tx = self.build_tx(signer.address, payload, gas_limit)
        return self.submit(signer.sign_tx(tx))

    def transact(self, signer, payload, gas_limit: int | None = None) -> Receipt:
        """Sign, submit and mine until included; return the receipt."""
        tx_id = self.sign_and_submit(signer, payload, gas_limit)
        while tx_id not in self.receipts:
            self.advance_block()
        return self.receipts[tx_id]

    # -- blocks ----------------------------------------------------------
    def advance_block(self) -> Block:
        height = self.height + 1
        ex = self.executor
        ex.height, ex.tick = height, self.tick
        included, gas_used, budget = [], 0, self.profile.block_gas_limit
        while self.mempool and self.mempool[0].gas_limit <= budget:
            tx = self.mempool.pop(0)
            budget -= tx.gas_limit
            pending = self._pending_by_sender[tx.sender] - 1
            if pending:
                self._pending_by_sender[tx.sender] = pending
            else:
                del self._pending_by_sender[tx.sender]
            receipt = ex.apply(tx, self.gas_price)
            receipt.height = height
            gas_used += receipt.gas_used
            self.receipts[tx.tx_id] = receipt
            included.append(tx)
        block = Block(height, self.head.hash, tuple(included), gas_used, self.tick)
        self._append(block)
        for tx in included:
            self._notify("receipt", tx=tx, receipt=self.receipts[tx.tx_id])
        self._notify("block", block=block)
        return block

    def advance_to(self, height: int):
        while self.height < height:
            self.advance_block()

    def _append(self, block: Block):
        self.blocks.append(block)
        self.tick += self.profile.block_interval_ticks

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    # -- queries ---------------------------------------------------------
    def receipt(self, tx_id) -> Receipt | None:
        return self.receipts.get(tx_id)

    def get_transaction(self, tx_id) -> Transaction | None:
        return self.transactions.get(tx_id)

    def confirmations_of(self, tx_id) -> Confirmations | None:
        receipt = self.receipts.get(tx_id)
        if receipt is None:
            return None
        count = self.height - receipt.height + 1
        return Confirmations(count, count >= self.profile.confirmation_depth, receipt.height)

    def state_digest(self) -> Hash256:
        return hash_data(self.head.hash + self.state.digest() + u64(len(self.mempool)))

    def supply_report(self) -> dict:
        return {
            "minted": self.state.minted,
            "fees": self.state.fees,
            "holdings": self.state.total_holdings(),
        }

    # -- observers -------------------------------------------------------
    def _notify(self, kind, **info):
        for observer in self.observers:
            observer(kind, **info)
