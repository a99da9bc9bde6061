"""Operations a scenario step can perform.

Each op receives the runner, the acting actor's signer (or None) and its
evaluated arguments, and returns a value the step may ``save``.
"""

from .. import data, oracles, security, structural
from ..crypto import Address, hash_data
from ..errors import ChainError
from ..runtime import call_contract, deploy_contract, expect_success, query_state, terminate_contract
from ..state import ContractCode
from ..tx import Transfer
from .script import ParseError

OPS = {}


def op(name):
    def wrap(fn):
        OPS[name] = fn
        return fn

    return wrap


def _need_actor(signer, name):
    if signer is None:
        raise ParseError(f"op {name} needs an actor")
    return signer


def _nonce(rt, signer, label: str) -> bytes:
    # AES-GCM nonces derived from the run so traces stay reproducible
    who = signer.actor.name if signer else ""
    return hash_data(f"{rt.seed}:{rt.step.index}:{who}:{label}".encode())[:12]


# -- chain ---------------------------------------------------------------


@op("transfer")
def _transfer(rt, s, a):
    _need_actor(s, "transfer")
    r = rt.chain.transact(s, Transfer(Address(a["to"]), a["amount"], bytes(a.get("data", b""))))
    return expect_success(r)


@op("advance")
def _advance(rt, s, a):
    rt.chain.advance_to(rt.chain.height + a.get("blocks", 1))
    return rt.chain.height


@op("let")
def _let(rt, s, a):
    return a["value"]


@op("deploy")
def _deploy(rt, s, a):
    code = a["code"]
    if "@" in code:
        code = ContractCode(*code.split("@", 1))
    return deploy_contract(rt.chain, _need_actor(s, "deploy"), code, a.get("args"), a.get("value", 0))


@op("call")
def _call(rt, s, a):
    return call_contract(rt.chain, _need_actor(s, "call"), a["contract"], a["function"], a.get("args"),
                         a.get("value", 0))


@op("terminate")
def _terminate(rt, s, a):
    return terminate_contract(rt.chain, _need_actor(s, "terminate"), a["contract"])


@op("query")
def _query(rt, s, a):
    return query_state(rt.chain, a["contract"], a.get("function", a.get("key")), a.get("args"))


# -- security ------------------------------------------------------------


def _action(spec):
    (kind, body), = spec.items()
    if kind == "transfer":
        return security.transfer_action(body["to"], body["amount"])
    if kind == "update_owners":
        return security.update_owners_action(body["owners"], body["threshold"])
    if kind == "call":
        return security.call_action(body["target"], body["function"], body.get("args"), body.get("value", 0))
    raise ParseError(f"unknown multisig action {kind!r}")


@op("multisig.deploy")
def _ms_deploy(rt, s, a):
    return security.multisig_deploy(rt.chain, s, a["owners"], a["threshold"], a.get("value", 0))


@op("multisig.propose")
def _ms_propose(rt, s, a):
    return security.multisig_propose(rt.chain, s, a["wallet"], _action(a["action"]))


@op("multisig.approve")
def _ms_approve(rt, s, a):
    return security.multisig_approve(rt.chain, s, a["wallet"], a["proposal"])


@op("hashlock.lock")
def _hl_lock(rt, s, a):
    timeout = a.get("timeout_height")
    if "timeout_blocks" in a:
        timeout = rt.chain.height + a["timeout_blocks"]
    return security.hashlock_lock(rt.chain, s, a["digest"], a["amount"], a.get("claimant"), timeout)


@op("hashlock.claim")
def _hl_claim(rt, s, a):
    return security.hashlock_claim(rt.chain, s, a["lock"], a["preimage"])


@op("hashlock.refund")
def _hl_refund(rt, s, a):
    return security.hashlock_refund(rt.chain, s, a["lock"])


@op("encrypt")
def _encrypt(rt, s, a):
    return security.encrypt_payload(bytes(a["plaintext"]), bytes(a["key"]), _nonce(rt, s, "encrypt")).to_bytes()


@op("decrypt")
def _decrypt(rt, s, a):
    return security.decrypt_payload(security.SealedPayload.from_bytes(bytes(a["sealed"])), bytes(a["key"]))


@op("share_key")
def _share_key(rt, s, a):
    return security.share_key(rt.bus, _need_actor(s, "share_key").actor.name, a["to"], bytes(a["key"])).seq


@op("inbox")
def _inbox(rt, s, a):
    msg = rt.bus.latest(_need_actor(s, "inbox").actor.name, a["kind"])
    if msg is None:
        raise ParseError(f"{s.actor.name} has no {a['kind']} message")
    return msg.payload


# -- data ----------------------------------------------------------------


@op("token.deploy")
def _tok_deploy(rt, s, a):
    return data.token_deploy(rt.chain, s, a.get("name", "Token"), a.get("symbol", "TKN"), a.get("minter"))


@op("token.mint")
def _tok_mint(rt, s, a):
    return data.token_mint(rt.chain, s, a["token"], a["to"], a["amount"])


@op("token.burn")
def _tok_burn(rt, s, a):
    return data.token_burn(rt.chain, s, a["token"], a["amount"])


@op("token.transfer")
def _tok_transfer(rt, s, a):
    return data.token_transfer(rt.chain, s, a["token"], a["to"], a["amount"])


@op("token.approve")
def _tok_approve(rt, s, a):
    return data.token_approve(rt.chain, s, a["token"], a["spender"], a["amount"])


@op("token.transfer_from")
def _tok_transfer_from(rt, s, a):
    return data.token_transfer_from(rt.chain, s, a["token"], a["holder"], a["to"], a["amount"])


@op("token.balance")
def _tok_balance(rt, s, a):
    return data.token_balance(rt.chain, a["token"], a["holder"])


@op("anchor.store")
def _anchor_store(rt, s, a):
    return data.anchor_store(rt.chain, s, bytes(a["data"]), a["uri"], a.get("mode", "tx-embed"),
                             a.get("store"))


@op("anchor.verify")
def _anchor_verify(rt, s, a):
    return data.anchor_verify(rt.chain, a["anchor"], bytes(a["data"]))


@op("channel.open")
def _ch_open(rt, s, a):
    peer = rt.signer(a["peer"])
    addr = data.channel_open(rt.chain, s, peer, a["deposit"], a.get("peer_deposit", 0), a.get("window", 20))
    rt.channels[bytes(addr)] = (s.actor.name, peer.actor.name)
    return addr


@op("channel.initial")
def _ch_initial(rt, s, a):
    deposits = query_state(rt.chain, a["channel"], "status")["deposits"]
    return data.channel_initial_state(a["channel"], *deposits)


def _parties(rt, channel):
    names = rt.channels.get(bytes(channel))
    if names is None:
        raise ParseError(f"channel {Address(channel)} was not opened in this scenario")
    return [rt.signer(n) for n in names]


@op("channel.update")
def _ch_update(rt, s, a):
    """Off-chain: both parties sign the next split; the sender forwards it."""
    state = a["state"]
    key_a, key_b = _parties(rt, state.channel)
    deltas = a["deltas"] if "deltas" in a else [a["delta"]]
    for delta in deltas:
        state = data.channel_update_offchain(state, delta, key_a, key_b)
        sender = s.actor.name if s else key_a.actor.name
        recipient = key_b.actor.name if sender == key_a.actor.name else key_a.actor.name
        rt.bus.send(sender, recipient, "channel-state", state)
    return state


@op("channel.close")
def _ch_close(rt, s, a):
    return data.channel_close_cooperative(rt.chain, s, a["channel"], a["state"])


@op("channel.dispute")
def _ch_dispute(rt, s, a):
    return data.channel_dispute_open(rt.chain, s, a["channel"], a["state"])


@op("channel.challenge")
def _ch_challenge(rt, s, a):
    return data.channel_challenge(rt.chain, s, a["channel"], a["state"])


@op("channel.finalize")
def _ch_finalize(rt, s, a):
    return data.channel_finalize(rt.chain, s, a["channel"])


@op("pair.bind")
def _pair_bind(rt, s, a):
    contract, document = data.pair_bind(rt.chain, s, bytes(a["document"]))
    return {"contract": contract, "document": document}


@op("pair.verify")
def _pair_verify(rt, s, a):
    return data.pair_verify(rt.chain, a["contract"], bytes(a["document"]))


# -- structural ----------------------------------------------------------


@op("registry.deploy")
def _reg_deploy(rt, s, a):
    return structural.registry_deploy(rt.chain, s, a.get("admins"))


@op("registry.register")
def _reg_register(rt, s, a):
    return structural.registry_register(rt.chain, s, a["registry"], a["name"], a["target"], a.get("writer"))


@op("registry.update")
def _reg_update(rt, s, a):
    return structural.registry_update(rt.chain, s, a["registry"], a["name"], a["target"])


@op("registry.lookup")
def _reg_lookup(rt, s, a):
    return structural.registry_lookup(rt.chain, a["registry"], a["name"], a.get("version"))


@op("kv.deploy")
def _kv_deploy(rt, s, a):
    return structural.kv_deploy(rt.chain, s, a.get("writers"))


@op("kv.put")
def _kv_put(rt, s, a):
    return structural.kv_put(rt.chain, s, a["store"], a["key"], bytes(a["value"]))


@op("kv.get")
def _kv_get(rt, s, a):
    return structural.kv_get(rt.chain, a["store"], a["key"])


@op("factory.deploy")
def _fac_deploy(rt, s, a):
    return structural.factory_deploy(rt.chain, s, a["templates"])


@op("factory.instantiate")
def _fac_instantiate(rt, s, a):
    return structural.factory_instantiate(rt.chain, s, a["factory"], a["template"], a.get("params"),
                                          a.get("value", 0))


@op("incentive.deploy")
def _inc_deploy(rt, s, a):
    due = a["due_height"] if "due_height" in a else rt.chain.height + a["due_in"]
    return structural.incentive_deploy(rt.chain, s, due, a["reward"], a.get("funding", 0),
                                       a.get("work", "noop"), a.get("target"), a.get("function"),
                                       a.get("args"))


@op("incentive.invoke")
def _inc_invoke(rt, s, a):
    return expect_success(structural.incentive_invoke(rt.chain, s, a["job"]))


@op("deposit.stake")
def _dep_stake(rt, s, a):
    return structural.stake_deposit(rt.chain, s, a["amount"], a["beneficiary"], a["arbiter"])


@op("deposit.resolve")
def _dep_resolve(rt, s, a):
    return expect_success(structural.resolve_deposit(rt.chain, s, a["escrow"], a["verdict"]))


# -- oracles -------------------------------------------------------------


def _observed(rt, s, a):
    if "value" in a:
        return bytes(a["value"])
    return rt.world.observe(a["query"], s.actor.name)


@op("consumer.deploy")
def _cons_deploy(rt, s, a):
    return oracles.consumer_deploy(rt.chain, s, a.get("admins"))


@op("oracle.register")
def _or_register(rt, s, a):
    return oracles.oracle_register(rt.chain, s, a["consumer"], a["oracle"])


@op("oracle.inject")
def _or_inject(rt, s, a):
    return oracles.oracle_inject(rt.chain, s, a["consumer"], a["query"], _observed(rt, s, a))


@op("committee.deploy")
def _com_deploy(rt, s, a):
    return oracles.committee_deploy(rt.chain, s, a["oracles"], a["quorum"], a.get("aggregation", "majority"),
                                    a.get("window", 10), a.get("token"), a.get("consumer"))


@op("committee.report")
def _com_report(rt, s, a):
    return oracles.committee_report(rt.chain, s, a["committee"], a["query"], _observed(rt, s, a))


@op("committee.resolve")
def _com_resolve(rt, s, a):
    return oracles.committee_resolve(rt.chain, s, a["committee"], a["query"])


@op("payout.set")
def _payout_set(rt, s, a):
    return call_contract(rt.chain, s, a["consumer"], "set_payout",
                         {"query": a["query"], "expected": bytes(a["expected"]),
                          "beneficiary": a["beneficiary"]}, value=a["amount"]).result


@op("payout.settle")
def _payout_settle(rt, s, a):
    return call_contract(rt.chain, s, a["consumer"], "settle_payout", {"payout": a["payout"]}).result


@op("vote.deploy")
def _vote_deploy(rt, s, a):
    return oracles.voting_deploy(rt.chain, s, a.get("window", 10), a.get("secret", False),
                                 a.get("reveal_window"))


@op("vote.propose")
def _vote_propose(rt, s, a):
    return oracles.vote_propose(rt.chain, s, a["voting"], a["question"], bytes(a["alternative"]))


@op("vote.cast")
def _vote_cast(rt, s, a):
    return oracles.vote_cast(rt.chain, s, a["voting"], a["proposal"], a["alternative"], a["stake"])


@op("vote.commit")
def _vote_commit(rt, s, a):
    sealed = security.encrypt_payload(oracles.ballot(a["alternative"]), bytes(a["key"]),
                                      _nonce(rt, s, "ballot"))
    return oracles.vote_commit(rt.chain, s, a["voting"], a["proposal"], sealed, a["stake"])


@op("vote.reveal")
def _vote_reveal(rt, s, a):
    return oracles.vote_reveal(rt.chain, s, a["voting"], a["proposal"], bytes(a["key"]))


@op("vote.tally")
def _vote_tally(rt, s, a):
    return oracles.vote_tally(rt.chain, s, a["voting"], a["proposal"])


@op("reverse.record")
def _rev_record(rt, s, a):
    rt.external.insert(a["id"], bytes(a["record"]), a["tx"])
    return a["id"]


@op("reverse.tamper")
def _rev_tamper(rt, s, a):
    rt.external.tamper(a["id"], bytes(a["record"]))


@op("reverse.validate")
def _rev_validate(rt, s, a):
    if "id" in a:
        return rt.external.validate(a["id"])
    return oracles.reverse_validate(rt.chain, a["tx"], bytes(a["record"]))


# -- providers -----------------------------------------------------------


@op("provider.outage")
def _outage(rt, s, a):
    name = _need_actor(s, "provider.outage").actor.name
    if a.get("down", True):
        rt.unavailable.add(name)
    else:
        rt.unavailable.discard(name)


@op("provider.misappropriate")
def _misappropriate(rt, s, a):
    """The provider drains a custodied account with the key it holds."""
    provider = _need_actor(s, "provider.misappropriate").actor.name
    victim = rt.actors[a["user"]]
    if victim.custody != provider:
        raise ChainError(f"{provider} does not hold {victim.name}'s key")
    to = a.get("to", s.address)
    fee = rt.chain.schedule.intrinsic(len(Transfer(Address(to), 0).serialize())) * rt.chain.gas_price
    amount = rt.chain.get_balance(victim.address) - fee
    return expect_success(rt.chain.transact(rt.signer(victim.name), Transfer(Address(to), amount)))
