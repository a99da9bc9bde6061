"""Interaction-with-the-external-world patterns: centralized oracle,
decentralized oracle committee, on-chain voting and reverse oracle."""

import enum
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .codec import decode_value, encode_value
from .crypto import Address, Hash256, hash_data
from .data import read_anchor_record
from .errors import AuthFailure
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
from .security import SealedPayload, decrypt_payload
from .tx import Call

__all__ = [
    "ExternalWorld",
    "OracleConsumer",
    "OracleCommittee",
    "Voting",
    "aggregate_reports",
    "Resolution",
    "Tally",
    "ReverseStatus",
    "ExternalSystem",
    "consumer_deploy",
    "oracle_register",
    "oracle_inject",
    "committee_deploy",
    "committee_report",
    "committee_resolve",
    "voting_deploy",
    "vote_propose",
    "vote_cast",
    "vote_commit",
    "vote_reveal",
    "vote_tally",
    "reverse_validate",
]


# -- external world (off-chain test double) ------------------------------


class ExternalWorld:
    """Facts an off-chain oracle can observe.

    ``overrides`` maps an oracle identity to facts it sees differently,
    which is how scenarios model a faulty or dishonest oracle. Unknown
    queries resolve to a value derived from (seed, query).
    """

    def __init__(self, facts=None, overrides=None, seed: int = 0):
        self.facts = {k: _as_bytes(v) for k, v in (facts or {}).items()}
        self.overrides = {o: {k: _as_bytes(v) for k, v in f.items()} for o, f in (overrides or {}).items()}
        self.seed = seed

    @classmethod
    def from_json(cls, path, seed: int = 0) -> "ExternalWorld":
        data = json.loads(Path(path).read_text())
        return cls(data.get("facts"), data.get("overrides"), seed)

    def observe(self, query: str, oracle: str | None = None) -> bytes:
        if oracle is not None and query in self.overrides.get(oracle, {}):
            return self.overrides[oracle][query]
        if query in self.facts:
            return self.facts[query]
        return hash_data(f"{self.seed}:{query}".encode()).hex()[:16].encode()


def _as_bytes(v) -> bytes:
    return v if isinstance(v, bytes) else str(v).encode("utf-8")


# -- centralized oracle --------------------------------------------------


@register
class OracleConsumer(Behavior):
    """Accepts facts only from registered oracles and settles conditional
    payouts against them. The value itself is never checked."""

    code_id = "oracle-consumer"
    _active = Guard.where("active-oracle", lambda ctx, args: ctx.caller in ctx.get("oracles"))

    def init(self, ctx, admins=None):
        ctx.set("admins", admins if admins is not None else [ctx.owner])
        ctx.set("oracles", [])
        ctx.set("payouts", 0)

    @mutating(Guard.member("admins"))
    def register_oracle(self, ctx, oracle):
        oracles = ctx.get("oracles")
        ctx.require(oracle not in oracles, "AlreadyRegistered")
        ctx.set("oracles", oracles + [oracle])
        ctx.emit("OracleRegistered", oracle=oracle)

    @mutating(Guard.member("admins"))
    def deactivate_oracle(self, ctx, oracle):
        oracles = ctx.get("oracles")
        ctx.require(oracle in oracles, "NotRegistered")
        ctx.set("oracles", [o for o in oracles if o != oracle])

    @mutating(_active)
    def inject(self, ctx, query, value):
        ctx.require(isinstance(query, str) and isinstance(value, bytes), "BadFact")
        ctx.set(("fact", query), value)
        ctx.emit("Injected", oracle=ctx.caller, query=query, value=value)

    @mutating(OWNER)
    def set_payout(self, ctx, query, expected, beneficiary):
        ctx.require(ctx.value > 0, "BadAmount")
        pid = ctx.get("payouts")
        ctx.set("payouts", pid + 1)
        ctx.set(("payout", pid), {"query": query, "expected": expected, "beneficiary": beneficiary,
                                  "amount": ctx.value, "settled": False})
        return pid

    @mutating(ANYONE)
    def settle_payout(self, ctx, payout):
        record = ctx.get(("payout", payout))
        ctx.require(record is not None, "NoSuchPayout")
        ctx.require(not record["settled"], "AlreadySettled")
        fact = ctx.get(("fact", record["query"]))
        ctx.require(fact is not None, "NoData", record["query"])
        met = fact == record["expected"]
        record["settled"] = True
        ctx.set(("payout", payout), record)
        ctx.send(record["beneficiary"] if met else ctx.owner, record["amount"])
        ctx.emit("PayoutSettled", payout=payout, condition_met=met)
        return met

    @view
    def fact(self, ctx, query):
        value = ctx.get(("fact", query))
        ctx.require(value is not None, "NoSuchKey", query)
        return value

    @view
    def oracles(self, ctx):
        return ctx.get("oracles")


# -- decentralized oracles -----------------------------------------------


def aggregate_reports(reports, n, quorum, mode, window_closed):
    """Committee decision over ``reports`` (a list of (value, weight)).

    Returns ``("pending", None)``, ``("resolved", value)`` or
    ``("unresolved", None)``. Majority mode resolves early once one value
    has more than half of all N committee members behind it; otherwise
    (and always in stake-weighted mode) the decision waits for the
    window to close and takes the strict maximum, a tie being unresolved.
    """
    if len(reports) < quorum:
        return "pending", None
    totals = defaultdict(int)
    for value, weight in reports:
        totals[value] += weight
    if mode == "majority":
        for value, count in totals.items():
            if count >= n // 2 + 1:
                return "resolved", value
    if not window_closed:
        return "pending", None
    best = max(totals.values())
    leaders = [v for v, w in totals.items() if w == best]
    if len(leaders) == 1:
        return "resolved", leaders[0]
    return "unresolved", None


@register
class OracleCommittee(Behavior):
    """N oracles report per query; resolve() aggregates. With a consumer
    configured, a resolved value is injected into it."""

    code_id = "oracle-committee"
    MODES = ("majority", "stake-weighted")

    def init(self, ctx, oracles, quorum, aggregation="majority", window=10, token=None, consumer=None):
        ctx.require(isinstance(oracles, list) and oracles and len(set(oracles)) == len(oracles),
                    "BadCommittee")
        n = len(oracles)
        ctx.require(aggregation in self.MODES, "BadAggregation", str(aggregation))
        ctx.require(isinstance(quorum, int) and 1 <= quorum <= n, "BadQuorum")
        ctx.require(aggregation != "majority" or quorum >= n // 2 + 1, "BadQuorum",
                    f"majority mode needs quorum >= {n // 2 + 1}")
        ctx.require(aggregation != "stake-weighted" or token is not None, "BadAggregation",
                    "stake-weighted aggregation needs a token")
        ctx.require(isinstance(window, int) and window >= 1, "BadWindow")
        ctx.set("config", {"oracles": oracles, "quorum": quorum, "mode": aggregation,
                           "window": window, "token": token, "consumer": consumer})
        ctx.set("oracles", oracles)

    @mutating(Guard.member("oracles", code="NotInCommittee"))
    def report(self, ctx, query, value):
        ctx.require(isinstance(value, bytes), "BadFact")
        ctx.require(ctx.get(("outcome", query)) is None, "AlreadyResolved", query)
        cfg = ctx.get("config")
        entry = ctx.get(("reports", query)) or {"start": ctx.height, "votes": {}}
        weight = 1
        if cfg["mode"] == "stake-weighted":
            weight = ctx.view(cfg["token"], "balance_of", holder=ctx.caller)
        entry["votes"][ctx.caller.hex()] = [value, weight]
        ctx.set(("reports", query), entry)
        ctx.emit("Reported", oracle=ctx.caller, query=query, value=value, weight=weight)

    def _evaluate(self, ctx, query):
        cfg = ctx.get("config")
        entry = ctx.get(("reports", query)) or {"start": ctx.height, "votes": {}}
        closed = ctx.height >= entry["start"] + cfg["window"]
        reports = [tuple(v) for v in entry["votes"].values()]
        return aggregate_reports(reports, len(cfg["oracles"]), cfg["quorum"], cfg["mode"], closed)

    @mutating(ANYONE)
    def resolve(self, ctx, query):
        stored = ctx.get(("outcome", query))
        if stored is not None:
            return stored
        status, value = self._evaluate(ctx, query)
        outcome = {"status": status, "value": value}
        if status != "pending":
            ctx.set(("outcome", query), outcome)
            ctx.emit("Resolved", query=query, status=status, value=value)
            consumer = ctx.get("config")["consumer"]
            if status == "resolved" and consumer is not None:
                ctx.call(consumer, "inject", query=query, value=value)
        return outcome

    @view
    def outcome(self, ctx, query):
        stored = ctx.get(("outcome", query))
        if stored is not None:
            return stored
        status, value = self._evaluate(ctx, query)
        return {"status": status, "value": value}

    @view
    def reports(self, ctx, query):
        entry = ctx.get(("reports", query))
        return entry["votes"] if entry else {}


# -- voting --------------------------------------------------------------


@register
class Voting(Behavior):
    """Stake-weighted voting on disputed states.

    Each question collects alternatives while its window is open; a voter
    stakes attached value behind one alternative and only their latest
    vote counts. After the window, the strictly heaviest alternative wins;
    a tie extends the window once, a second tie is final. All stakes are
    released at a final outcome.

    With ``secret=True`` ballots are sealed payloads committed during the
    window and opened by revealing the key during the following
    ``reveal_window`` blocks; ties are final immediately.
    """

    code_id = "voting"

    def init(self, ctx, window=10, secret=False, reveal_window=None):
        ctx.require(isinstance(window, int) and window >= 1, "BadWindow")
        ctx.set("config", {"window": window, "secret": bool(secret),
                           "reveal_window": reveal_window or window})
        ctx.set("count", 0)

    def _get(self, ctx, proposal):
        record = ctx.get(("proposal", proposal))
        ctx.require(record is not None, "NoSuchProposal", str(proposal))
        return record

    def _voting_open(self, ctx, record):
        ctx.require(record["status"] == "open" and ctx.height < record["window_end"],
                    "WindowClosed", f"window ended at {record['window_end']}")

    @mutating(ANYONE)
    def propose(self, ctx, question, alternative):
        ctx.require(isinstance(question, str) and isinstance(alternative, bytes), "BadProposal")
        pid = ctx.get(("question", question))
        if pid is None:
            pid = ctx.get("count")
            ctx.set("count", pid + 1)
            ctx.set(("question", question), pid)
            record = {"question": question, "alternatives": [alternative], "votes": {},
                      "window_end": ctx.height + ctx.get("config")["window"],
                      "status": "open", "value": None, "extended": False}
            ctx.set(("proposal", pid), record)
            ctx.emit("Proposed", proposal=pid, question=question, alternative=alternative)
            return pid
        record = self._get(ctx, pid)
        self._voting_open(ctx, record)
        if alternative not in record["alternatives"]:
            record["alternatives"].append(alternative)
            ctx.set(("proposal", pid), record)
            ctx.emit("Proposed", proposal=pid, question=question, alternative=alternative)
        return pid

    def _release(self, ctx, voter_hex, vote):
        if vote["stake"]:
            ctx.send(bytes.fromhex(voter_hex), vote["stake"])

    @mutating(ANYONE)
    def cast(self, ctx, proposal, alternative):
        record = self._get(ctx, proposal)
        ctx.require(not ctx.get("config")["secret"], "SecretBallot", "use commit/reveal")
        self._voting_open(ctx, record)
        ctx.require(isinstance(alternative, int) and 0 <= alternative < len(record["alternatives"]),
                    "NoSuchAlternative", str(alternative))
        ctx.require(ctx.value > 0, "BadStake", "a vote needs a positive stake")
        voter = ctx.caller.hex()
        prior = record["votes"].get(voter)
        record["votes"][voter] = {"alt": alternative, "stake": ctx.value}
        ctx.set(("proposal", proposal), record)
        if prior is not None:
            self._release(ctx, voter, prior)
        ctx.emit("VoteCast", proposal=proposal, voter=ctx.caller, alternative=alternative,
                 stake=ctx.value, replaced=prior is not None)

    @mutating(ANYONE)
    def commit(self, ctx, proposal, sealed):
        record = self._get(ctx, proposal)
        ctx.require(ctx.get("config")["secret"], "NotSecret")
        self._voting_open(ctx, record)
        ctx.require(isinstance(sealed, bytes), "BadBallot")
        ctx.require(ctx.value > 0, "BadStake")
        voter = ctx.caller.hex()
        prior = record["votes"].get(voter)
        record["votes"][voter] = {"alt": None, "stake": ctx.value, "sealed": sealed}
        ctx.set(("proposal", proposal), record)
        if prior is not None:
            self._release(ctx, voter, prior)
        ctx.emit("BallotCommitted", proposal=proposal, voter=ctx.caller, stake=ctx.value)

    @mutating(ANYONE)
    def reveal(self, ctx, proposal, key):
        record = self._get(ctx, proposal)
        cfg = ctx.get("config")
        ctx.require(cfg["secret"], "NotSecret")
        end = record["window_end"]
        ctx.require(end <= ctx.height < end + cfg["reveal_window"], "NotRevealPhase")
        vote = record["votes"].get(ctx.caller.hex())
        ctx.require(vote is not None, "NoBallot")
        try:
            plain = decrypt_payload(SealedPayload.from_bytes(vote["sealed"]), key)
            choice = decode_value(plain)
        except (AuthFailure, ValueError) as e:
            raise Reject("BadReveal", str(e)) from None
        ctx.require(isinstance(choice, int) and 0 <= choice < len(record["alternatives"]),
                    "NoSuchAlternative", str(choice))
        vote["alt"] = choice
        ctx.set(("proposal", proposal), record)
        ctx.emit("BallotRevealed", proposal=proposal, voter=ctx.caller, alternative=choice)

    @staticmethod
    def _weights(record):
        weights = [0] * len(record["alternatives"])
        for vote in record["votes"].values():
            if vote["alt"] is not None:
                weights[vote["alt"]] += vote["stake"]
        return weights

    def _summary(self, record):
        return {"status": record["status"], "value": record["value"],
                "weights": self._weights(record), "extended": record["extended"],
                "window_end": record["window_end"]}

    @mutating(ANYONE)
    def tally(self, ctx, proposal):
        record = self._get(ctx, proposal)
        if record["status"] != "open":
            return self._summary(record)
        cfg = ctx.get("config")
        end = record["window_end"] + (cfg["reveal_window"] if cfg["secret"] else 0)
        if ctx.height < end:
            return self._summary(record)
        weights = self._weights(record)
        best = max(weights)
        leaders = [i for i, w in enumerate(weights) if w == best]
        if len(leaders) == 1:
            record["status"], record["value"] = "resolved", record["alternatives"][leaders[0]]
        elif not record["extended"] and not cfg["secret"]:
            record["extended"] = True
            record["window_end"] += cfg["window"]
            ctx.set(("proposal", proposal), record)
            ctx.emit("TallyTied", proposal=proposal, extended_to=record["window_end"])
            return {**self._summary(record), "status": "tied"}
        else:
            record["status"] = "tied"
        for voter, vote in record["votes"].items():
            self._release(ctx, voter, vote)
        ctx.set(("proposal", proposal), record)
        ctx.emit("TallyFinal", proposal=proposal, status=record["status"], value=record["value"])
        return self._summary(record)

    @view
    def proposal(self, ctx, proposal):
        return self._get(ctx, proposal)

    @view
    def weights(self, ctx, proposal):
        return self._weights(self._get(ctx, proposal))


# -- operations ----------------------------------------------------------


@dataclass(frozen=True)
class Resolution:
    status: str
    value: bytes | None = None


@dataclass(frozen=True)
class Tally:
    status: str
    value: bytes | None
    weights: list = field(default_factory=list)
    extended: bool = False
    window_end: int = 0

    @classmethod
    def from_result(cls, res):
        return cls(res["status"], res["value"], res["weights"], res["extended"], res["window_end"])


def consumer_deploy(chain, creator, admins=None) -> Address:
    args = {"admins": [Address(a) for a in admins]} if admins is not None else {}
    return deploy_contract(chain, creator, "oracle-consumer", args)


def oracle_register(chain, admin, consumer, oracle):
    return call_contract(chain, admin, consumer, "register_oracle", {"oracle": Address(oracle)})


def oracle_inject(chain, oracle, consumer, query, value: bytes, check=True):
    return call_contract(chain, oracle, consumer, "inject", {"query": query, "value": bytes(value)},
                         check=check)


def committee_deploy(chain, creator, oracles, quorum, aggregation="majority", window=10,
                     token=None, consumer=None) -> Address:
    return deploy_contract(chain, creator, "oracle-committee", {
        "oracles": [Address(o) for o in oracles], "quorum": quorum, "aggregation": aggregation,
        "window": window, "token": Address(token) if token is not None else None,
        "consumer": Address(consumer) if consumer is not None else None})


def committee_report(chain, oracle, committee, query, value: bytes, check=True):
    return call_contract(chain, oracle, committee, "report", {"query": query, "value": bytes(value)},
                         check=check)


def committee_resolve(chain, caller, committee, query) -> Resolution:
    res = call_contract(chain, caller, committee, "resolve", {"query": query}).result
    return Resolution(res["status"], res["value"])


def voting_deploy(chain, creator, window=10, secret=False, reveal_window=None) -> Address:
    return deploy_contract(chain, creator, "voting",
                           {"window": window, "secret": secret, "reveal_window": reveal_window})


def vote_propose(chain, proposer, voting, question, alternative: bytes) -> int:
    return call_contract(chain, proposer, voting, "propose",
                         {"question": question, "alternative": bytes(alternative)}).result


def vote_cast(chain, voter, voting, proposal, alternative, stake, check=True):
    return call_contract(chain, voter, voting, "cast",
                         {"proposal": proposal, "alternative": alternative}, value=stake, check=check)


def vote_commit(chain, voter, voting, proposal, sealed: SealedPayload, stake):
    return call_contract(chain, voter, voting, "commit",
                         {"proposal": proposal, "sealed": sealed.to_bytes()}, value=stake)


def vote_reveal(chain, voter, voting, proposal, key: bytes, check=True):
    return call_contract(chain, voter, voting, "reveal", {"proposal": proposal, "key": bytes(key)},
                         check=check)


def vote_tally(chain, caller, voting, proposal) -> Tally:
    return Tally.from_result(call_contract(chain, caller, voting, "tally", {"proposal": proposal}).result)


def ballot(alternative: int) -> bytes:
    """Plaintext of a secret ballot for ``alternative``."""
    return encode_value(alternative)


# -- reverse oracle ------------------------------------------------------


class ReverseStatus(str, enum.Enum):
    MATCH = "match"
    MISMATCH = "mismatch"
    NOT_FOUND = "not-found"


def reverse_validate(chain, tx_id, external_record: bytes) -> ReverseStatus:
    """Check an off-chain record against what transaction ``tx_id`` put
    on-chain: an anchored digest, or a value injected into a consumer.
    Reads only."""
    try:
        tx_id = Hash256(tx_id)
    except ValueError:
        return ReverseStatus.NOT_FOUND
    tx = chain.get_transaction(tx_id)
    receipt = chain.receipt(tx_id)
    if tx is None or receipt is None or not receipt.success:
        return ReverseStatus.NOT_FOUND
    digest = hash_data(bytes(external_record))
    p = tx.payload
    if isinstance(p, Call) and p.function == "inject":
        onchain = hash_data(bytes(p.args.get("value", b"")))
    else:
        record = read_anchor_record(chain, tx_id)
        if record is None:
            return ReverseStatus.MISMATCH
        onchain = record[:32]
    return ReverseStatus.MATCH if digest == onchain else ReverseStatus.MISMATCH


class ExternalSystem:
    """Off-chain record store that keeps a transaction id per record and
    validates records against the chain on demand."""

    def __init__(self, chain):
        self.chain = chain
        self.records: dict[str, tuple[bytes, Hash256]] = {}

    def insert(self, record_id: str, record: bytes, tx_id):
        self.records[record_id] = (bytes(record), Hash256(tx_id))

    def tamper(self, record_id: str, record: bytes):
        _, tx_id = self.records[record_id]
        self.records[record_id] = (bytes(record), tx_id)

    def validate(self, record_id: str) -> ReverseStatus:
        record, tx_id = self.records[record_id]
        return reverse_validate(self.chain, tx_id, record)
