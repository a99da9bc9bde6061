"""Security patterns: on-chain encryption, multiple authorization (M-of-N
multisig), dynamic authorization (hashlock escrow) and embedded
permission guards, including a deliberately unguarded library that
reproduces the killable-library hazard.
"""

import os
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .codec import lp
from .crypto import Address, Hash256
from .errors import AuthFailure, BadKeyLength
from .runtime import (
    ANYONE,
    OWNER,
    Behavior,
    Guard,
    Reject,
    call_contract,
    deploy_contract,
    mutating,
    register,
    view,
)

__all__ = [
    "MultisigWallet",
    "HashlockEscrow",
    "WalletLibrary",
    "LibraryWallet",
    "SealedPayload",
    "encrypt_payload",
    "decrypt_payload",
    "share_key",
    "transfer_action",
    "update_owners_action",
    "call_action",
    "ApprovalStatus",
    "multisig_deploy",
    "multisig_propose",
    "multisig_approve",
    "hashlock_lock",
    "hashlock_claim",
    "hashlock_refund",
]


def _check_owners(owners, threshold):
    if not isinstance(owners, list) or not owners:
        raise Reject("BadOwners", "owners must be a non-empty list")
    if any(not isinstance(o, bytes) or len(o) != 20 for o in owners):
        raise Reject("BadOwners", "owners must be 20-byte addresses")
    if len(set(owners)) != len(owners):
        raise Reject("BadOwners", "duplicate owner")
    if not isinstance(threshold, int) or not 1 <= threshold <= len(owners):
        raise Reject("BadThreshold", f"need 1 <= M <= {len(owners)}, got {threshold!r}")


@register
class MultisigWallet(Behavior):
    """M-of-N wallet. A proposal runs in the same call that brings its
    distinct owner approvals up to the threshold."""

    code_id = "multisig-wallet"
    _owner_guard = Guard.member("owners", code="NotAnOwner")

    def init(self, ctx, owners, threshold):
        _check_owners(owners, threshold)
        ctx.set("owners", owners)
        ctx.set("threshold", threshold)
        ctx.set("next_id", 0)

    @mutating(_owner_guard)
    def propose(self, ctx, action):
        ctx.require(isinstance(action, dict) and action.get("kind") in
                    ("transfer", "update_owners", "call"), "BadAction", repr(action))
        pid = ctx.get("next_id")
        ctx.set("next_id", pid + 1)
        ctx.set(("proposal", pid), {"action": action, "approvals": [ctx.caller],
                                    "executed": False, "proposer": ctx.caller})
        ctx.emit("ProposalCreated", proposal=pid, proposer=ctx.caller, kind=action["kind"])
        return {"proposal": pid, **self._settle(ctx, pid)}

    @mutating(_owner_guard)
    def approve(self, ctx, proposal):
        record = ctx.get(("proposal", proposal))
        ctx.require(record is not None, "NoSuchProposal", str(proposal))
        ctx.require(not record["executed"], "AlreadyExecuted", str(proposal))
        if ctx.caller not in record["approvals"]:
            record["approvals"].append(ctx.caller)
            ctx.set(("proposal", proposal), record)
            ctx.emit("Approved", proposal=proposal, owner=ctx.caller)
        return {"proposal": proposal, **self._settle(ctx, proposal)}

    def _settle(self, ctx, pid):
        record = ctx.get(("proposal", pid))
        owners = ctx.get("owners")
        threshold = ctx.get("threshold")
        count = len(set(record["approvals"]) & set(owners))
        if count < threshold:
            return {"executed": False, "approvals": count, "threshold": threshold}
        record["executed"] = True
        ctx.set(("proposal", pid), record)
        result = self._execute(ctx, record["action"])
        ctx.emit("Executed", proposal=pid, kind=record["action"]["kind"])
        return {"executed": True, "approvals": count, "threshold": threshold, "result": result}

    def _execute(self, ctx, action):
        kind = action["kind"]
        if kind == "transfer":
            ctx.send(action["to"], action["amount"])
            return None
        if kind == "update_owners":
            _check_owners(action["owners"], action["threshold"])
            ctx.set("owners", action["owners"])
            ctx.set("threshold", action["threshold"])
            return None
        return ctx.call(action["target"], action["function"], action.get("value", 0),
                        **action.get("args", {}))

    @view
    def owners(self, ctx):
        return ctx.get("owners")

    @view
    def threshold(self, ctx):
        return ctx.get("threshold")

    @view
    def proposal(self, ctx, proposal):
        record = ctx.get(("proposal", proposal))
        ctx.require(record is not None, "NoSuchProposal", str(proposal))
        return record


@register
class HashlockEscrow(Behavior):
    """Escrow released to whoever reveals a preimage of the stored digest.

    Optional ``claimant`` additionally requires the claim to be signed by
    that address; optional ``timeout_height`` opens a refund path for the
    funder and closes the claim path at that height.
    """

    code_id = "hashlock-escrow"

    def init(self, ctx, digest, claimant=None, timeout_height=None):
        ctx.require(isinstance(digest, bytes) and len(digest) == 32, "BadDigest")
        ctx.require(ctx.value > 0, "BadAmount", "lock needs a positive attached value")
        ctx.require(claimant is None or (isinstance(claimant, bytes) and len(claimant) == 20),
                    "BadClaimant")
        ctx.require(timeout_height is None or isinstance(timeout_height, int), "BadTimeout")
        ctx.set("funder", ctx.owner)
        ctx.set("digest", digest)
        ctx.set("amount", ctx.value)
        ctx.set("claimant", claimant)
        ctx.set("timeout", timeout_height)
        ctx.set("state", "locked")
        ctx.emit("Locked", digest=digest, amount=ctx.value, funder=ctx.owner)

    def _open(self, ctx):
        state = ctx.get("state")
        ctx.require(state != "claimed", "AlreadyClaimed")
        ctx.require(state != "refunded", "AlreadyRefunded")

    @mutating(ANYONE)
    def claim(self, ctx, preimage):
        self._open(ctx)
        timeout = ctx.get("timeout")
        ctx.require(timeout is None or ctx.height < timeout, "TimedOut",
                    f"height {ctx.height} >= timeout {timeout}")
        ctx.require(isinstance(preimage, bytes), "WrongPreimage")
        ctx.require(ctx.hash(preimage) == ctx.get("digest"), "WrongPreimage")
        claimant = ctx.get("claimant")
        ctx.require(claimant is None or ctx.caller == claimant, "WrongClaimant")
        amount = ctx.get("amount")
        ctx.set("state", "claimed")
        ctx.set("preimage", preimage)
        ctx.send(ctx.caller, amount)
        ctx.emit("Claimed", claimant=ctx.caller, preimage=preimage, amount=amount)
        return amount

    @mutating(Guard.stored("funder"))
    def refund(self, ctx):
        self._open(ctx)
        timeout = ctx.get("timeout")
        ctx.require(timeout is not None, "NoTimeout", "lock has no refund path")
        ctx.require(ctx.height >= timeout, "TooEarly", f"refund opens at {timeout}")
        amount = ctx.get("amount")
        ctx.set("state", "refunded")
        ctx.send(ctx.get("funder"), amount)
        ctx.emit("Refunded", funder=ctx.get("funder"), amount=amount)
        return amount

    @view
    def digest(self, ctx):
        return ctx.get("digest")

    @view
    def preimage(self, ctx):
        value = ctx.get("preimage")
        ctx.require(value is not None, "NoSuchKey", "preimage not revealed")
        return value

    @view
    def status(self, ctx):
        return {"state": ctx.get("state"), "amount": ctx.get("amount"),
                "timeout": ctx.get("timeout"), "claimant": ctx.get("claimant")}


@register
class WalletLibrary(Behavior):
    """Shared authorization library whose termination is left open to
    anyone, the hazard an embedded permission would have prevented."""

    code_id = "wallet-library"
    terminate_guard = ANYONE

    @view
    def authorize(self, ctx, owner, caller):
        return owner == caller


@register
class LibraryWallet(Behavior):
    """Wallet delegating its authorization check to a WalletLibrary."""

    code_id = "library-wallet"

    def init(self, ctx, library):
        ctx.set("library", library)

    @mutating(ANYONE)
    def deposit(self, ctx):
        return ctx.balance

    @mutating(OWNER)
    def withdraw(self, ctx, amount):
        ok = ctx.view(ctx.get("library"), "authorize", owner=ctx.owner, caller=ctx.caller)
        ctx.require(ok, "NotAuthorized")
        ctx.send(ctx.caller, amount)
        return amount


# -- multisig / hashlock operations --------------------------------------


def transfer_action(to, amount):
    return {"kind": "transfer", "to": Address(to), "amount": amount}


def update_owners_action(owners, threshold):
    return {"kind": "update_owners", "owners": [Address(o) for o in owners], "threshold": threshold}


def call_action(target, function, args=None, value=0):
    return {"kind": "call", "target": Address(target), "function": function,
            "args": dict(args or {}), "value": value}


@dataclass(frozen=True)
class ApprovalStatus:
    proposal: int
    executed: bool
    approvals: int
    threshold: int

    @classmethod
    def from_result(cls, res):
        return cls(res["proposal"], res["executed"], res["approvals"], res["threshold"])


def multisig_deploy(chain, creator, owners, threshold, value=0) -> Address:
    return deploy_contract(chain, creator, "multisig-wallet",
                           {"owners": [Address(o) for o in owners], "threshold": threshold}, value)


def multisig_propose(chain, owner, wallet, action) -> int:
    return call_contract(chain, owner, wallet, "propose", {"action": action}).result["proposal"]


def multisig_approve(chain, owner, wallet, proposal) -> ApprovalStatus:
    receipt = call_contract(chain, owner, wallet, "approve", {"proposal": proposal})
    return ApprovalStatus.from_result(receipt.result)


def hashlock_lock(chain, funder, digest, amount, claimant=None, timeout_height=None) -> Address:
    args = {"digest": Hash256(digest),
            "claimant": Address(claimant) if claimant is not None else None,
            "timeout_height": timeout_height}
    return deploy_contract(chain, funder, "hashlock-escrow", args, value=amount)


def hashlock_claim(chain, claimant, lock, preimage, check=True):
    return call_contract(chain, claimant, lock, "claim", {"preimage": bytes(preimage)}, check=check)


def hashlock_refund(chain, funder, lock, check=True):
    return call_contract(chain, funder, lock, "refund", check=check)


# -- on-chain encryption -------------------------------------------------

KEY_BYTES = 32
NONCE_BYTES = 12
TAG_BYTES = 16


@dataclass(frozen=True)
class SealedPayload:
    ciphertext: bytes
    nonce: bytes
    tag: bytes

    def to_bytes(self) -> bytes:
        return lp(self.nonce) + lp(self.tag) + lp(self.ciphertext)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SealedPayload":
        parts, pos = [], 0
        for _ in range(3):
            n = int.from_bytes(data[pos:pos + 4], "big")
            parts.append(bytes(data[pos + 4:pos + 4 + n]))
            pos += 4 + n
        if pos != len(data):
            raise ValueError("malformed sealed payload")
        nonce, tag, ct = parts
        return cls(ct, nonce, tag)


def _aead(key: bytes) -> AESGCM:
    if not isinstance(key, (bytes, bytearray)) or len(key) != KEY_BYTES:
        raise BadKeyLength(f"key must be {KEY_BYTES} bytes")
    return AESGCM(bytes(key))


def encrypt_payload(plaintext: bytes, key: bytes, nonce: bytes | None = None) -> SealedPayload:
    """AES-256-GCM seal. Pass ``nonce`` for reproducible output; never
    reuse a nonce under the same key."""
    aead = _aead(key)
    if nonce is None:
        nonce = os.urandom(NONCE_BYTES)
    if len(nonce) != NONCE_BYTES:
        raise ValueError(f"nonce must be {NONCE_BYTES} bytes")
    sealed = aead.encrypt(bytes(nonce), bytes(plaintext), None)
    return SealedPayload(sealed[:-TAG_BYTES], bytes(nonce), sealed[-TAG_BYTES:])


def decrypt_payload(sealed: SealedPayload, key: bytes) -> bytes:
    aead = _aead(key)
    try:
        return aead.decrypt(sealed.nonce, sealed.ciphertext + sealed.tag, None)
    except InvalidTag:
        raise AuthFailure("authentication failed") from None


def share_key(bus, sender: str, recipient: str, key: bytes):
    """Hand a symmetric key to another actor off-chain."""
    return bus.send(sender, recipient, "key-exchange", bytes(key))
