"""Data management patterns: tokenisation, off-chain data storage
(hash anchoring), state channels and legal/smart contract pairing."""

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path

from .codec import lp, u64
from .crypto import Address, Hash256, hash_data, verify_signature
from .errors import EmbedTooLarge, MissingSignature, NoSuchAnchor, NoSuchKey, Overdraft
from .runtime import (
    ANYONE,
    OWNER,
    Behavior,
    Guard,
    call_contract,
    deploy_contract,
    mutating,
    query_state,
    register,
    view,
)
from .structural import kv_put
from .tx import Call, Transfer

__all__ = [
    "Token",
    "Channel",
    "PairAnchor",
    "token_deploy",
    "token_mint",
    "token_burn",
    "token_transfer",
    "token_approve",
    "token_transfer_from",
    "token_balance",
    "Anchor",
    "AnchorStatus",
    "anchor_store",
    "anchor_verify",
    "read_anchor_record",
    "ChannelState",
    "channel_open",
    "channel_update_offchain",
    "channel_close_cooperative",
    "channel_dispute_open",
    "channel_challenge",
    "channel_finalize",
    "PairStatus",
    "pair_bind",
    "pair_attach",
    "pair_verify",
    "render_contract_reference",
]


def _amount(ctx, amount):
    ctx.require(isinstance(amount, int) and not isinstance(amount, bool) and amount >= 0,
                "BadAmount", repr(amount))


# -- tokenisation --------------------------------------------------------


@register
class Token(Behavior):
    """Fungible token with allowances. Issuance and redemption belong to a
    single guarded minter (the asset custodian)."""

    code_id = "token"

    def init(self, ctx, name="Token", symbol="TKN", minter=None):
        ctx.set("meta", {"name": name, "symbol": symbol})
        ctx.set("minter", minter if minter is not None else ctx.owner)
        ctx.set("supply", 0)
        ctx.set("holders", [])

    def _balance(self, ctx, holder):
        return ctx.get(("bal", holder), 0)

    def _set_balance(self, ctx, holder, amount):
        if ctx.get(("bal", holder)) is None:
            ctx.set("holders", ctx.get("holders") + [holder])
        ctx.set(("bal", holder), amount)

    def _move(self, ctx, src, dst, amount):
        have = self._balance(ctx, src)
        ctx.require(have >= amount, "InsufficientBalance", f"holds {have}, moving {amount}")
        self._set_balance(ctx, src, have - amount)
        self._set_balance(ctx, dst, self._balance(ctx, dst) + amount)
        ctx.emit("Transfer", src=src, dst=dst, amount=amount)

    @mutating(Guard.stored("minter"))
    def mint(self, ctx, to, amount):
        _amount(ctx, amount)
        self._set_balance(ctx, to, self._balance(ctx, to) + amount)
        ctx.set("supply", ctx.get("supply") + amount)
        ctx.emit("Mint", to=to, amount=amount)

    @mutating(Guard.stored("minter"))
    def burn(self, ctx, amount):
        _amount(ctx, amount)
        have = self._balance(ctx, ctx.caller)
        ctx.require(have >= amount, "InsufficientBalance", f"holds {have}, burning {amount}")
        self._set_balance(ctx, ctx.caller, have - amount)
        ctx.set("supply", ctx.get("supply") - amount)
        ctx.emit("Burn", holder=ctx.caller, amount=amount)

    @mutating(ANYONE)
    def transfer(self, ctx, to, amount):
        _amount(ctx, amount)
        self._move(ctx, ctx.caller, to, amount)
        return True

    @mutating(ANYONE)
    def approve(self, ctx, spender, amount):
        _amount(ctx, amount)
        ctx.set(("allow", ctx.caller, spender), amount)
        ctx.emit("Approval", holder=ctx.caller, spender=spender, amount=amount)
        return True

    @mutating(ANYONE)
    def transfer_from(self, ctx, holder, to, amount):
        _amount(ctx, amount)
        allowed = ctx.get(("allow", holder, ctx.caller), 0)
        ctx.require(allowed >= amount, "InsufficientAllowance", f"allowance {allowed} < {amount}")
        self._move(ctx, holder, to, amount)
        ctx.set(("allow", holder, ctx.caller), allowed - amount)
        return True

    @mutating(Guard.stored("minter"))
    def set_minter(self, ctx, minter):
        ctx.set("minter", minter)

    @view
    def balance_of(self, ctx, holder):
        return self._balance(ctx, holder)

    @view
    def allowance(self, ctx, holder, spender):
        return ctx.get(("allow", holder, spender), 0)

    @view
    def total_supply(self, ctx):
        return ctx.get("supply")

    @view
    def holders(self, ctx):
        return ctx.get("holders")


def token_deploy(chain, creator, name="Token", symbol="TKN", minter=None) -> Address:
    args = {"name": name, "symbol": symbol}
    if minter is not None:
        args["minter"] = Address(minter)
    return deploy_contract(chain, creator, "token", args)


def token_mint(chain, minter, token, to, amount):
    return call_contract(chain, minter, token, "mint", {"to": Address(to), "amount": amount})


def token_burn(chain, minter, token, amount):
    return call_contract(chain, minter, token, "burn", {"amount": amount})


def token_transfer(chain, holder, token, to, amount):
    return call_contract(chain, holder, token, "transfer", {"to": Address(to), "amount": amount})


def token_approve(chain, holder, token, spender, amount):
    return call_contract(chain, holder, token, "approve", {"spender": Address(spender), "amount": amount})


def token_transfer_from(chain, spender, token, holder, to, amount):
    return call_contract(chain, spender, token, "transfer_from",
                         {"holder": Address(holder), "to": Address(to), "amount": amount})


def token_balance(chain, token, holder) -> int:
    return query_state(chain, token, "balance_of", {"holder": Address(holder)})


# -- off-chain data storage ----------------------------------------------


class AnchorStatus(str, enum.Enum):
    INTACT = "intact"
    TAMPERED = "tampered"


@dataclass(frozen=True)
class Anchor:
    """Reference to a digest+locator record kept on-chain."""

    digest: Hash256
    uri: str
    anchored_at: int
    mode: str
    tx_id: Hash256
    store: Address | None = None
    key: Hash256 | None = None

    @property
    def record(self) -> bytes:
        return bytes(self.digest) + self.uri.encode("utf-8")

    @property
    def onchain_bytes(self) -> int:
        return len(self.record)

    def to_json(self) -> dict:
        return {
            "digest": self.digest.hex(),
            "uri": self.uri,
            "anchored_at": self.anchored_at,
            "mode": self.mode,
            "tx_id": self.tx_id.hex(),
            "store": self.store.hex() if self.store else None,
            "key": self.key.hex() if self.key else None,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Anchor":
        return cls(
            Hash256(bytes.fromhex(data["digest"])),
            data["uri"],
            data["anchored_at"],
            data["mode"],
            Hash256(bytes.fromhex(data["tx_id"])),
            Address(bytes.fromhex(data["store"])) if data.get("store") else None,
            Hash256(bytes.fromhex(data["key"])) if data.get("key") else None,
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Anchor":
        return cls.from_json(json.loads(Path(path).read_text()))


def anchor_store(chain, caller, raw_data: bytes, uri: str, mode="tx-embed", store=None) -> Anchor:
    """Record ``hash(raw_data) || uri`` on-chain; the raw bytes stay off-chain.

    ``tx-embed`` puts the record in a zero-value self-transfer's data
    field, bounded by the profile's ``max_embed_bytes``.
    ``contract-storage`` writes it to a KvStore under ``hash(uri)``.
    """
    digest = hash_data(bytes(raw_data))
    record = bytes(digest) + uri.encode("utf-8")
    if mode == "tx-embed":
        limit = chain.profile.max_embed_bytes
        if len(record) > limit:
            raise EmbedTooLarge(f"{len(record)} bytes > {limit} on {chain.profile.name}")
        receipt = chain.transact(caller, Transfer(caller.address, 0, record))
        return Anchor(digest, uri, receipt.height, mode, receipt.tx_id)
    if mode == "contract-storage":
        if store is None:
            raise ValueError("contract-storage anchoring needs a kv-store address")
        key = hash_data(uri.encode("utf-8"))
        receipt = kv_put(chain, caller, store, key, record)
        return Anchor(digest, uri, receipt.height, mode, receipt.tx_id, Address(store), key)
    raise ValueError(f"unknown anchoring mode {mode!r}")


def read_anchor_record(chain, tx_id) -> bytes | None:
    """The digest||uri record a successful transaction put on-chain, if any."""
    tx = chain.get_transaction(tx_id)
    receipt = chain.receipt(tx_id)
    if tx is None or receipt is None or not receipt.success:
        return None
    p = tx.payload
    if isinstance(p, Transfer) and len(p.data) >= 32:
        return p.data
    if isinstance(p, Call) and p.function == "put":
        value = p.args.get("value")
        if isinstance(value, (bytes, bytearray)) and len(value) >= 32:
            return bytes(value)
    return None


def anchor_verify(chain, anchor, candidate: bytes) -> AnchorStatus:
    """Compare ``candidate`` against the digest read back from the chain.

    Only detects tampering; nothing here can recover original bytes.
    """
    if isinstance(anchor, Anchor) and anchor.mode == "contract-storage":
        try:
            record = query_state(chain, anchor.store, "get", {"key": anchor.key})
        except NoSuchKey:
            raise NoSuchAnchor(anchor.key.hex()) from None
    else:
        tx_id = anchor.tx_id if isinstance(anchor, Anchor) else Hash256(anchor)
        record = read_anchor_record(chain, tx_id)
        if record is None:
            raise NoSuchAnchor(tx_id.hex())
    if hash_data(bytes(candidate)) == record[:32]:
        return AnchorStatus.INTACT
    return AnchorStatus.TAMPERED


# -- state channel -------------------------------------------------------


def channel_signing_bytes(channel: bytes, seq: int, balance_a: int, balance_b: int) -> bytes:
    return (b"PCCH" + lp(channel) + u64(seq)
            + lp(balance_a.to_bytes(32, "big")) + lp(balance_b.to_bytes(32, "big")))


@dataclass(frozen=True)
class ChannelState:
    """An off-chain balance split, valid once both parties have signed."""

    channel: Address
    seq: int
    balance_a: int
    balance_b: int
    sig_a: bytes = b""
    sig_b: bytes = b""

    @property
    def signing_bytes(self) -> bytes:
        return channel_signing_bytes(self.channel, self.seq, self.balance_a, self.balance_b)

    @property
    def total(self) -> int:
        return self.balance_a + self.balance_b

    def signed(self, key_a=None, key_b=None) -> "ChannelState":
        msg = self.signing_bytes
        return replace(
            self,
            sig_a=key_a.sign(msg) if key_a is not None else self.sig_a,
            sig_b=key_b.sign(msg) if key_b is not None else self.sig_b,
        )

    def verify(self, pubkey_a: bytes, pubkey_b: bytes) -> bool:
        msg = self.signing_bytes
        return verify_signature(pubkey_a, msg, self.sig_a) and verify_signature(pubkey_b, msg, self.sig_b)

    def to_args(self) -> dict:
        return {"channel": self.channel, "seq": self.seq, "a": self.balance_a,
                "b": self.balance_b, "sig_a": self.sig_a, "sig_b": self.sig_b}


@register
class Channel(Behavior):
    """Two-party payment channel with cooperative and disputed close.

    Party A deploys with its deposit; if ``deposit_b`` is non-zero the
    channel opens once B funds it. A dispute starts a challenge window in
    which a state with a higher sequence number replaces the candidate.
    """

    code_id = "channel"
    _parties = Guard.member("parties")

    def init(self, ctx, party_b, pubkey_a, pubkey_b, deposit_b=0, challenge_window=20):
        ctx.require(ctx.hash(pubkey_a)[-20:] == ctx.owner, "BadPartyKey", "pubkey_a is not the deployer's")
        ctx.require(ctx.hash(pubkey_b)[-20:] == party_b, "BadPartyKey", "pubkey_b is not party_b's")
        ctx.require(party_b != ctx.owner, "BadParty", "parties must differ")
        ctx.require(isinstance(challenge_window, int) and challenge_window >= 1, "BadWindow")
        _amount(ctx, deposit_b)
        ctx.set("parties", [ctx.owner, party_b])
        ctx.set("keys", [pubkey_a, pubkey_b])
        ctx.set("deposits", [ctx.value, 0])
        ctx.set("expected_b", deposit_b)
        ctx.set("window", challenge_window)
        ctx.set("status", "open" if deposit_b == 0 else "funding")
        if deposit_b == 0:
            ctx.emit("Opened", deposit_a=ctx.value, deposit_b=0)

    @mutating(Guard.where("party-b", lambda ctx, args: ctx.caller == ctx.get("parties")[1]))
    def fund(self, ctx):
        ctx.require(ctx.get("status") == "funding", "NotFunding")
        ctx.require(ctx.value == ctx.get("expected_b"), "BadDeposit",
                    f"expected {ctx.get('expected_b')}, got {ctx.value}")
        deposits = ctx.get("deposits")
        ctx.set("deposits", [deposits[0], ctx.value])
        ctx.set("status", "open")
        ctx.emit("Opened", deposit_a=deposits[0], deposit_b=ctx.value)

    def _accept(self, ctx, state):
        ctx.require(isinstance(state, dict), "BadState")
        ctx.require(state.get("channel") == ctx.this, "WrongChannel")
        seq, a, b = state.get("seq"), state.get("a"), state.get("b")
        ctx.require(all(isinstance(v, int) and v >= 0 for v in (seq, a, b)), "BadState")
        deposits = ctx.get("deposits")
        ctx.require(a + b == sum(deposits), "SplitMismatch", f"{a}+{b} != {sum(deposits)}")
        if seq == 0 and [a, b] == deposits:
            return state  # opening split, agreed by funding the channel
        key_a, key_b = ctx.get("keys")
        msg = channel_signing_bytes(ctx.this, seq, a, b)
        ok = (ctx.verify_signature(key_a, msg, state.get("sig_a", b""))
              and ctx.verify_signature(key_b, msg, state.get("sig_b", b"")))
        ctx.require(ok, "BadSignatures")
        return state

    def _payout(self, ctx, state):
        a_addr, b_addr = ctx.get("parties")
        ctx.set("status", "closed")
        ctx.set("settled", [state["seq"], state["a"], state["b"]])
        ctx.send(a_addr, state["a"])
        ctx.send(b_addr, state["b"])

    @mutating(_parties)
    def close(self, ctx, state):
        ctx.require(ctx.get("status") == "open", "NotOpen", ctx.get("status"))
        self._accept(ctx, state)
        self._payout(ctx, state)
        ctx.emit("Closed", seq=state["seq"], a=state["a"], b=state["b"], cooperative=True)
        return [state["a"], state["b"]]

    @mutating(_parties)
    def dispute(self, ctx, state):
        ctx.require(ctx.get("status") == "open", "NotOpen", ctx.get("status"))
        self._accept(ctx, state)
        deadline = ctx.height + ctx.get("window")
        ctx.set("candidate", [state["seq"], state["a"], state["b"]])
        ctx.set("deadline", deadline)
        ctx.set("status", "disputing")
        ctx.emit("DisputeOpened", by=ctx.caller, seq=state["seq"], deadline=deadline)
        return deadline

    @mutating(_parties)
    def challenge(self, ctx, state):
        ctx.require(ctx.get("status") == "disputing", "NotDisputing", ctx.get("status"))
        deadline = ctx.get("deadline")
        ctx.require(ctx.height < deadline, "DeadlinePassed", f"deadline was {deadline}")
        self._accept(ctx, state)
        current = ctx.get("candidate")
        ctx.require(state["seq"] > current[0], "StaleState", f"seq {state['seq']} <= {current[0]}")
        ctx.set("candidate", [state["seq"], state["a"], state["b"]])
        ctx.emit("Challenged", by=ctx.caller, seq=state["seq"])
        return True

    @mutating(ANYONE)
    def finalize(self, ctx):
        ctx.require(ctx.get("status") == "disputing", "NotDisputing", ctx.get("status"))
        deadline = ctx.get("deadline")
        ctx.require(ctx.height >= deadline, "TooEarly", f"deadline {deadline}, now {ctx.height}")
        seq, a, b = ctx.get("candidate")
        self._payout(ctx, {"seq": seq, "a": a, "b": b})
        ctx.emit("Closed", seq=seq, a=a, b=b, cooperative=False)
        return [a, b]

    @view
    def status(self, ctx):
        return {"status": ctx.get("status"), "deposits": ctx.get("deposits"),
                "candidate": ctx.get("candidate"), "deadline": ctx.get("deadline"),
                "settled": ctx.get("settled")}


def channel_open(chain, key_a, key_b, deposit_a, deposit_b, challenge_window=20) -> Address:
    addr = deploy_contract(chain, key_a, "channel", {
        "party_b": key_b.address, "pubkey_a": key_a.public_key, "pubkey_b": key_b.public_key,
        "deposit_b": deposit_b, "challenge_window": challenge_window}, value=deposit_a)
    if deposit_b:
        call_contract(chain, key_b, addr, "fund", value=deposit_b)
    return addr


def channel_initial_state(channel, deposit_a, deposit_b) -> ChannelState:
    return ChannelState(Address(channel), 0, deposit_a, deposit_b)


def channel_update_offchain(prev: ChannelState, delta: int, key_a, key_b) -> ChannelState:
    """Move ``delta`` units from A to B (negative moves B to A); both sign."""
    if key_a is None or key_b is None:
        raise MissingSignature("both parties must sign a channel update")
    a, b = prev.balance_a - delta, prev.balance_b + delta
    if a < 0 or b < 0:
        raise Overdraft(f"update leaves split {a}/{b}")
    return ChannelState(prev.channel, prev.seq + 1, a, b).signed(key_a, key_b)


def channel_close_cooperative(chain, party, channel, final: ChannelState, check=True):
    return call_contract(chain, party, channel, "close", {"state": final.to_args()}, check=check)


def channel_dispute_open(chain, party, channel, candidate: ChannelState) -> int:
    return call_contract(chain, party, channel, "dispute", {"state": candidate.to_args()}).result


def channel_challenge(chain, party, channel, newer: ChannelState, check=True):
    return call_contract(chain, party, channel, "challenge", {"state": newer.to_args()}, check=check)


def channel_finalize(chain, caller, channel, check=True):
    return call_contract(chain, caller, channel, "finalize", check=check)


# -- legal and smart contract pair ---------------------------------------


class PairStatus(str, enum.Enum):
    BOUND = "bound"
    MISMATCH = "mismatch"


@register
class PairAnchor(Behavior):
    """Write-once slot for the digest of the paired legal agreement."""

    code_id = "pair-anchor"

    def init(self, ctx):
        ctx.set("agreement", None)

    @mutating(OWNER)
    def bind(self, ctx, agreement_hash):
        ctx.require(ctx.get("agreement") is None, "AlreadyBound")
        ctx.require(isinstance(agreement_hash, bytes) and len(agreement_hash) == 32, "BadDigest")
        ctx.set("agreement", agreement_hash)
        ctx.set("bound_at", ctx.height)
        ctx.emit("Bound", agreement=agreement_hash)

    @view
    def agreement(self, ctx):
        return {"hash": ctx.get("agreement"), "bound_at": ctx.get("bound_at")}


def render_contract_reference(contract) -> bytes:
    return f"\n\nSmart contract address: {Address(contract)}\n".encode("ascii")


def pair_attach(chain, caller, contract, document: bytes) -> bytes:
    """Embed ``contract``'s address in ``document`` and bind the result's digest."""
    finalized = bytes(document) + render_contract_reference(contract)
    call_contract(chain, caller, contract, "bind", {"agreement_hash": hash_data(finalized)})
    return finalized


def pair_bind(chain, caller, document: bytes) -> tuple[Address, bytes]:
    contract = deploy_contract(chain, caller, "pair-anchor")
    return contract, pair_attach(chain, caller, contract, document)


def pair_verify(chain, contract, candidate: bytes) -> PairStatus:
    stored = query_state(chain, contract, "agreement")["hash"]
    if stored is not None and hash_data(bytes(candidate)) == stored:
        return PairStatus.BOUND
    return PairStatus.MISMATCH
