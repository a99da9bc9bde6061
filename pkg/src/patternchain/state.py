"""Journaled world state: accounts, contract instances and supply counters.

Every mutation appends an undo record so a call frame can be rolled back
to a checkpoint without copying the state.
"""

from dataclasses import dataclass, field

from .codec import lp, u64
from .crypto import Address, hash_data

__all__ = ["ContractCode", "Account", "ContractInstance", "WorldState", "InsufficientFunds"]


class InsufficientFunds(Exception):
    pass


@dataclass(frozen=True)
class ContractCode:
    code_id: str
    version: str = ""

    @property
    def code_hash(self):
        return hash_data(lp(self.code_id.encode()) + lp(self.version.encode()))


@dataclass
class Account:
    balance: int = 0
    nonce: int = 0


@dataclass
class ContractInstance:
    address: Address
    code: ContractCode
    owner: Address | None = None
    storage: dict = field(default_factory=dict)
    balance: int = 0
    terminated: bool = False
    nonce: int = 0
    created_at: int = 0


class WorldState:
    def __init__(self):
        self.accounts: dict[Address, Account] = {}
        self.contracts: dict[Address, ContractInstance] = {}
        self.minted = 0
        self.fees = 0
        self._journal = []

    # -- journal ---------------------------------------------------------
    def checkpoint(self) -> int:
        return len(self._journal)

    def revert(self, checkpoint: int):
        while len(self._journal) > checkpoint:
            undo = self._journal.pop()
            undo()

    def commit(self):
        self._journal.clear()

    def _set_attr(self, obj, name, value):
        old = getattr(obj, name)
        self._journal.append(lambda: setattr(obj, name, old))
        setattr(obj, name, value)

    # -- accounts --------------------------------------------------------
    def account(self, addr: Address) -> Account:
        acct = self.accounts.get(addr)
        if acct is None:
            acct = self.accounts[addr] = Account()
            self._journal.append(lambda: self.accounts.pop(addr, None))
        return acct

    def balance_of(self, addr: Address) -> int:
        inst = self.contracts.get(addr)
        if inst is not None:
            return inst.balance
        acct = self.accounts.get(addr)
        return acct.balance if acct else 0

    def _holder(self, addr):
        inst = self.contracts.get(addr)
        return inst if inst is not None else self.account(addr)

    def credit(self, addr: Address, amount: int):
        if amount:
            holder = self._holder(addr)
            self._set_attr(holder, "balance", holder.balance + amount)

    def debit(self, addr: Address, amount: int):
        if amount:
            holder = self._holder(addr)
            if holder.balance < amount:
                raise InsufficientFunds(f"{addr} holds {holder.balance} < {amount}")
            self._set_attr(holder, "balance", holder.balance - amount)

    def move(self, src: Address, dst: Address, amount: int):
        self.debit(src, amount)
        self.credit(dst, amount)

    def bump_nonce(self, addr: Address):
        holder = self._holder(addr)
        self._set_attr(holder, "nonce", holder.nonce + 1)

    def nonce_of(self, addr: Address) -> int:
        inst = self.contracts.get(addr)
        if inst is not None:
            return inst.nonce
        acct = self.accounts.get(addr)
        return acct.nonce if acct else 0

    def mint(self, addr: Address, amount: int):
        self.credit(addr, amount)
        self._set_attr(self, "minted", self.minted + amount)

    def add_fees(self, amount: int):
        self._set_attr(self, "fees", self.fees + amount)

    # -- contracts -------------------------------------------------------
    def create_contract(self, inst: ContractInstance):
        self.contracts[inst.address] = inst
        self._journal.append(lambda: self.contracts.pop(inst.address, None))

    def storage_set(self, inst: ContractInstance, key: bytes, value: bytes | None):
        store = inst.storage
        had, old = key in store, store.get(key)

        def undo():
            if had:
                store[key] = old
            else:
                store.pop(key, None)

        self._journal.append(undo)
        if value is None:
            store.pop(key, None)
        else:
            store[key] = bytes(value)

    def set_terminated(self, inst: ContractInstance):
        self._set_attr(inst, "terminated", True)

    # -- audit -----------------------------------------------------------
    def total_holdings(self) -> int:
        return sum(a.balance for a in self.accounts.values()) + sum(
            c.balance for c in self.contracts.values()
        )

    def digest(self):
        parts = [u64(self.minted), u64(self.fees)]
        for addr in sorted(self.accounts):
            acct = self.accounts[addr]
            parts.append(lp(addr) + lp(acct.balance.to_bytes(32, "big")) + u64(acct.nonce))
        for addr in sorted(self.contracts):
            c = self.contracts[addr]
            parts.append(
                lp(addr)
                + lp(c.code.code_hash)
                + lp(c.balance.to_bytes(32, "big"))
                + u64(c.nonce)
                + (b"\x01" if c.terminated else b"\x00")
            )
            for k in sorted(c.storage):
                parts.append(lp(k) + lp(c.storage[k]))
        return hash_data(b"".join(parts))
