import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import funded
from patternchain import Chain, ChainProfile, Transfer, sign_tx
from patternchain.crypto import ZERO_HASH, KeyPair, hash_data
from patternchain.errors import (BadNonce, BadSignature, EmbedTooLarge, InsufficientBalance,
                                 InsufficientGas, OversizeTransaction, ProfileError)
from patternchain.ledger import BITCOIN_LIKE, ETHEREUM_LIKE, get_profile
from patternchain.runtime import GAS


def test_profile_numbers():
    assert (ETHEREUM_LIKE.block_interval_ticks, ETHEREUM_LIKE.confirmation_depth) == (14, 11)
    assert (BITCOIN_LIKE.block_interval_ticks, BITCOIN_LIKE.confirmation_depth) == (600, 5)
    assert BITCOIN_LIKE.max_embed_bytes == 40


def test_profile_json_round_trip(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps(ETHEREUM_LIKE.to_dict()))
    assert ChainProfile.from_json(path) == replace(ETHEREUM_LIKE)


@pytest.mark.parametrize("bad", [
    {"name": "x"},
    {**ETHEREUM_LIKE.to_dict(), "extra": 1},
    {**ETHEREUM_LIKE.to_dict(), "block_gas_limit": 0},
    {**ETHEREUM_LIKE.to_dict(), "confirmation_depth": -1},
    {**ETHEREUM_LIKE.to_dict(), "max_tx_bytes": "big"},
])
def test_profile_validation(bad):
    with pytest.raises(ProfileError):
        ChainProfile.from_dict(bad)


def test_unknown_profile():
    with pytest.raises(ProfileError):
        get_profile("dogecoin-like")


def test_new_account_balance_zero(chain):
    _, addr = chain.create_account(b"fresh")
    assert chain.get_balance(addr) == 0
    assert chain.get_balance(KeyPair.from_seed(b"never").address) == 0


def test_mint(chain):
    k = funded(chain, "m", 100)
    assert chain.get_balance(k.address) == 100


def test_transfer_moves_value_and_charges_gas(chain, alice, bob):
    before_a, before_b = chain.get_balance(alice.address), chain.get_balance(bob.address)
    tx_id = chain.sign_and_submit(alice, Transfer(bob.address, 30))
    assert len(chain.mempool) == 1
    chain.advance_block()
    r = chain.receipt(tx_id)
    assert r.success and r.gas_used == GAS.intrinsic(len(Transfer(bob.address, 30).serialize()))
    assert chain.get_balance(bob.address) == before_b + 30
    assert chain.get_balance(alice.address) == before_a - 30 - r.gas_used
    assert chain.state.fees == r.gas_used


def test_plain_transfer_arithmetic(chain):
    a = funded(chain, "a", 100 + 30_000)
    b = funded(chain, "b", 0)
    r = chain.transact(a, Transfer(b.address, 30))
    assert chain.get_balance(b.address) == 30
    assert chain.get_balance(a.address) == 100 + 30_000 - 30 - r.gas_used


def test_nonce_gap_rejected(chain, alice, bob):
    tx = chain.build_tx(alice.address, Transfer(bob.address, 1))
    with pytest.raises(BadNonce):
        chain.submit(sign_tx(replace(tx, nonce=tx.nonce + 1), alice))


def test_replay_rejected(chain, alice, bob):
    signed = sign_tx(chain.build_tx(alice.address, Transfer(bob.address, 1)), alice)
    chain.submit(signed)
    chain.advance_block()
    with pytest.raises(BadNonce):
        chain.submit(signed)


def test_tampered_payload_fails_signature(chain, alice, bob, mallory):
    signed = sign_tx(chain.build_tx(alice.address, Transfer(bob.address, 1)), alice)
    with pytest.raises(BadSignature):
        chain.submit(replace(signed, payload=Transfer(mallory.address, 1)))
    with pytest.raises(BadSignature):
        chain.submit(replace(signed, public_key=mallory.public_key))
    with pytest.raises(BadSignature):
        chain.submit(replace(signed, signature=b""))


def test_oversize_transaction(chain, alice, bob):
    limit = chain.profile.max_tx_bytes
    overhead = len(Transfer(bob.address, 0, b"").serialize())
    payload = Transfer(bob.address, 0, b"x" * (limit - overhead + 1))
    assert len(payload.serialize()) == limit + 1
    with pytest.raises(OversizeTransaction):
        chain.sign_and_submit(alice, payload, gas_limit=7_000_000)


def test_embed_limit(btc):
    a = funded(btc, "a")
    with pytest.raises(EmbedTooLarge):
        btc.sign_and_submit(a, Transfer(a.address, 0, b"x" * 41))
    btc.transact(a, Transfer(a.address, 0, b"x" * 40))


def test_gas_limit_bounds(chain, alice, bob):
    with pytest.raises(InsufficientGas):
        chain.sign_and_submit(alice, Transfer(bob.address, 1), gas_limit=20_999)
    with pytest.raises(InsufficientGas):
        chain.sign_and_submit(alice, Transfer(bob.address, 1), gas_limit=chain.profile.block_gas_limit + 1)


def test_insufficient_balance_at_submit(chain, bob):
    poor = funded(chain, "poor", 25_000)
    with pytest.raises(InsufficientBalance):
        chain.sign_and_submit(poor, Transfer(bob.address, 10**6))


def test_block_cadence(chain):
    for i in range(1, 4):
        chain.advance_block()
        assert chain.tick == 14 * (i + 1)
        assert chain.head.timestamp == 14 * i


def test_empty_block(chain):
    b = chain.advance_block()
    assert b.height == 1 and b.transactions == () and b.gas_used == 0


def test_block_gas_limit_packing(chain, alice, bob):
    half = chain.profile.block_gas_limit // 2
    for _ in range(3):
        chain.sign_and_submit(alice, Transfer(bob.address, 1), gas_limit=half)
    b1 = chain.advance_block()
    assert len(b1.transactions) == 2 and len(chain.mempool) == 1
    b2 = chain.advance_block()
    assert len(b2.transactions) == 1 and not chain.mempool


def test_confirmations(btc):
    a = funded(btc, "a")
    btc.advance_to(9)
    tx_id = btc.sign_and_submit(a, Transfer(a.address, 1))
    btc.advance_block()
    assert btc.receipt(tx_id).height == 10
    btc.advance_to(14)
    c = btc.confirmations_of(tx_id)
    assert (c.count, c.committed) == (5, True)


def test_not_committed_below_depth(chain, alice):
    tx_id = chain.sign_and_submit(alice, Transfer(alice.address, 1))
    chain.advance_to(chain.height + 10)
    c = chain.confirmations_of(tx_id)
    assert (c.count, c.committed) == (10, False)
    assert chain.confirmations_of(hash_data(b"nope")) is None


def test_genesis_and_chaining(chain, alice, bob):
    for _ in range(5):
        chain.sign_and_submit(alice, Transfer(bob.address, 1))
        chain.advance_block()
    assert chain.blocks[0].parent_hash == ZERO_HASH
    for prev, cur in zip(chain.blocks, chain.blocks[1:]):
        assert cur.parent_hash == hash_data(prev.serialize())


def test_same_history_same_digest():
    def build():
        c = Chain()
        a, b = funded(c, "a"), funded(c, "b")
        for i in range(5):
            c.transact(a, Transfer(b.address, i))
        return c.state_digest()

    assert build() == build()


ops = st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 2_000_000),
                         st.booleans()), min_size=1, max_size=40)


@settings(max_examples=40, deadline=None)
@given(ops)
def test_ledger_invariants(plan):
    c = Chain()
    keys = [funded(c, f"k{i}", 5_000_000) for i in range(4)]
    snapshots = []
    for src, dst, amount, mine in plan:
        try:
            c.sign_and_submit(keys[src], Transfer(keys[dst].address, amount))
        except InsufficientBalance:
            pass
        if mine:
            c.advance_block()
            snapshots.append([b.serialize() for b in c.blocks])
        report = c.supply_report()
        assert report["holdings"] + report["fees"] == report["minted"]
    c.advance_block()
    for snap in snapshots:
        assert [b.serialize() for b in c.blocks[:len(snap)]] == snap
    for b in c.blocks:
        assert b.gas_used <= c.profile.block_gas_limit
    for k in keys:
        nonces = [tx.nonce for b in c.blocks for tx in b.transactions if tx.sender == k.address]
        assert nonces == list(range(len(nonces)))
