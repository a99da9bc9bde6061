import pytest

from conftest import funded
from patternchain import Chain, Transfer
from patternchain.codec import decode_value, skey
from patternchain.errors import ContractError, NoSuchContract, NoSuchKey, UnknownCodeId
from patternchain.runtime import (ANYONE, MAX_CALL_DEPTH, OWNER, Behavior, Guard, call_contract,
                                  contract_address, deploy_contract, mutating, query_state, register,
                                  registered_behaviors, terminate_contract, view)


@register
class Counter(Behavior):
    code_id = "test-counter"

    def init(self, ctx, start=0):
        ctx.set("n", start)

    @mutating(ANYONE)
    def bump(self, ctx, by=1, fail=False):
        ctx.set("n", ctx.get("n") + by)
        ctx.emit("Bumped", n=ctx.get("n"))
        ctx.require(not fail, "Boom")
        return ctx.get("n")

    @mutating(ANYONE)
    def seen_balance(self, ctx):
        return ctx.balance

    @mutating(ANYONE)
    def take_and_fail(self, ctx):
        raise ctx.require(False, "Nope")

    @mutating(ANYONE)
    def burn_gas(self, ctx):
        while True:
            ctx.store(b"k", b"v")

    @mutating(ANYONE)
    def recurse(self, ctx, target, depth=0):
        return ctx.call(target, "recurse", target=target, depth=depth + 1)

    @mutating(OWNER)
    def owner_only(self, ctx):
        return True

    @view
    def n(self, ctx):
        return ctx.get("n")

    @view
    def try_write(self, ctx):
        ctx.set("n", 99)


@register
class Caller(Behavior):
    code_id = "test-caller"

    @mutating(ANYONE)
    def bump_then_fail(self, ctx, target):
        ctx.call(target, "bump", by=5)
        ctx.set("touched", True)
        ctx.require(False, "OuterFail")

    @mutating(ANYONE)
    def bump_catching(self, ctx, target):
        from patternchain.runtime import Reject

        try:
            ctx.call(target, "bump", by=5, fail=True)
        except Reject as e:
            ctx.set("caught", e.code)
        return ctx.view(target, "n")

    @mutating(ANYONE)
    def view_mutator(self, ctx, target):
        return ctx.view(target, "bump")


def test_guard_completeness_enforced():
    with pytest.raises(TypeError):
        @register
        class Unguarded(Behavior):
            code_id = "test-unguarded"

            def withdraw(self, ctx):
                pass


def test_mutating_needs_explicit_guard():
    with pytest.raises(TypeError):
        mutating(None)


def test_every_builtin_function_is_guarded_or_view():
    for (code_id, _), behavior in registered_behaviors().items():
        for name, entry in behavior.functions.items():
            assert entry.is_view or isinstance(entry.guard, Guard), (code_id, name)


def test_deploy_fresh_address(chain, alice):
    a1 = deploy_contract(chain, alice, "kv-store")
    a2 = deploy_contract(chain, alice, "kv-store")
    assert a1 != a2
    assert chain.state.contracts[a1].storage.get(b"d" + bytes(32)) is None
    assert a1 == contract_address(alice.address, 0)


def test_unknown_code_id(chain, alice):
    with pytest.raises(UnknownCodeId):
        deploy_contract(chain, alice, "no-such-thing")


def test_call_and_query(chain, alice):
    c = deploy_contract(chain, alice, "test-counter", {"start": 3})
    r = call_contract(chain, alice, c, "bump", {"by": 2})
    assert r.result == 5 and [e.name for e in r.events] == ["Bumped"]
    assert query_state(chain, c, "n") == 5


def test_failed_call_rolls_back(chain, alice):
    c = deploy_contract(chain, alice, "test-counter")
    digest = chain.state.contracts[c].storage.copy()
    r = call_contract(chain, alice, c, "bump", {"fail": True}, check=False)
    assert not r.success and r.error == "Boom" and r.events == []
    assert chain.state.contracts[c].storage == digest
    assert query_state(chain, c, "n") == 0


def test_nested_failure_keeps_outer_state(chain, alice):
    c = deploy_contract(chain, alice, "test-counter")
    outer = deploy_contract(chain, alice, "test-caller")
    r = call_contract(chain, alice, outer, "bump_then_fail", {"target": c}, check=False)
    assert r.error == "OuterFail"
    assert query_state(chain, c, "n") == 0


def test_caught_inner_failure_reverts_only_inner(chain, alice):
    c = deploy_contract(chain, alice, "test-counter")
    outer = deploy_contract(chain, alice, "test-caller")
    r = call_contract(chain, alice, outer, "bump_catching", {"target": c})
    assert r.result == 0
    assert decode_value(query_state(chain, outer, skey("caught"))) == "Boom"


def test_value_visible_to_body_and_reverted(chain, alice):
    c = deploy_contract(chain, alice, "test-counter")
    r = call_contract(chain, alice, c, "seen_balance", value=77)
    assert r.result == 77
    before = chain.get_balance(alice.address)
    r = call_contract(chain, alice, c, "take_and_fail", value=50, check=False)
    assert not r.success
    assert chain.get_balance(c) == 77
    assert chain.get_balance(alice.address) == before - r.gas_used


def test_out_of_gas(chain, alice):
    c = deploy_contract(chain, alice, "test-counter")
    r = call_contract(chain, alice, c, "burn_gas", gas_limit=200_000, check=False)
    assert r.error == "InsufficientGas" and r.gas_used == 200_000


def test_depth_limit(chain, alice):
    c = deploy_contract(chain, alice, "test-counter")
    r = call_contract(chain, alice, c, "recurse", {"target": c}, gas_limit=8_000_000, check=False)
    assert r.error == "DepthLimit"
    assert MAX_CALL_DEPTH == 64


def test_views_cannot_write(chain, alice):
    c = deploy_contract(chain, alice, "test-counter")
    with pytest.raises(ContractError) as e:
        query_state(chain, c, "try_write")
    assert e.value.code == "ReadOnly"
    outer = deploy_contract(chain, alice, "test-caller")
    r = call_contract(chain, alice, outer, "view_mutator", {"target": c}, check=False)
    assert r.error == "ReadOnly"


def test_query_errors(chain, alice):
    c = deploy_contract(chain, alice, "test-counter")
    with pytest.raises(NoSuchKey):
        query_state(chain, c, b"missing")
    with pytest.raises(NoSuchContract):
        query_state(chain, alice.address, "n")


def test_query_does_not_change_state(chain, alice):
    c = deploy_contract(chain, alice, "test-counter")
    before = chain.state_digest()
    query_state(chain, c, "n")
    assert chain.state_digest() == before


def test_owner_guard(chain, alice, mallory):
    c = deploy_contract(chain, alice, "test-counter")
    with pytest.raises(ContractError) as e:
        call_contract(chain, mallory, c, "owner_only")
    assert e.value.code == "NotAuthorized"
    assert call_contract(chain, alice, c, "owner_only").result is True


def test_terminate(chain, alice, mallory):
    c = deploy_contract(chain, alice, "test-counter")
    call_contract(chain, alice, c, "seen_balance", value=500)
    with pytest.raises(ContractError) as e:
        terminate_contract(chain, mallory, c)
    assert e.value.code == "NotAuthorized"
    before = chain.get_balance(alice.address)
    r = terminate_contract(chain, alice, c)
    assert chain.get_balance(alice.address) == before + 500 - r.gas_used
    assert chain.state.contracts[c].terminated
    with pytest.raises(ContractError) as e:
        call_contract(chain, alice, c, "bump")
    assert e.value.code == "ContractTerminated"
    r = chain.transact(alice, Transfer(c, 1))
    assert r.error == "ContractTerminated"
    assert query_state(chain, c, "n") == 0


def test_unguarded_terminate_hazard(chain, alice, mallory):
    lib = deploy_contract(chain, alice, "wallet-library")
    assert terminate_contract(chain, mallory, lib).success


def test_constructor_rejection(chain, alice):
    with pytest.raises(ContractError) as e:
        deploy_contract(chain, alice, "test-counter", {"bogus": 1})
    assert e.value.code == "BadArguments"
    with pytest.raises(ContractError) as e:
        deploy_contract(chain, alice, "multisig-wallet", {"owners": [alice.address], "threshold": 5})
    assert e.value.code == "ConstructorRejected"


def test_bitcoin_like_allowlist(btc):
    a = funded(btc, "a")
    with pytest.raises(ContractError) as e:
        deploy_contract(btc, a, "token", {"name": "T", "symbol": "T"})
    assert e.value.code == "CodeNotAllowed"
    deploy_contract(btc, a, "hashlock-escrow", {"digest": bytes(32)}, value=10)


def test_code_hash_immutable(chain, alice):
    c = deploy_contract(chain, alice, "test-counter")
    h = chain.state.contracts[c].code.code_hash
    for _ in range(3):
        call_contract(chain, alice, c, "bump")
    assert chain.state.contracts[c].code.code_hash == h


def test_replay_gives_identical_receipts():
    def run():
        c = Chain()
        a = funded(c, "a")
        addr = deploy_contract(c, a, "test-counter")
        out = [call_contract(c, a, addr, "bump", {"by": i}, check=False).serialize() for i in range(4)]
        out.append(call_contract(c, a, addr, "bump", {"fail": True}, check=False).serialize())
        return out, c.state_digest()

    assert run() == run()
