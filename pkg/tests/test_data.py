import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import funded
from patternchain import Chain
from patternchain.crypto import hash_data
from patternchain.data import (AnchorStatus, ChannelState, PairStatus, anchor_store, anchor_verify,
                               channel_challenge, channel_close_cooperative, channel_dispute_open,
                               channel_finalize, channel_initial_state, channel_open,
                               channel_update_offchain, pair_attach, pair_bind, pair_verify,
                               read_anchor_record, token_approve, token_balance, token_burn,
                               token_deploy, token_mint, token_transfer, token_transfer_from)
from patternchain.errors import (ContractError, EmbedTooLarge, InsufficientBalance, MissingSignature,
                                 NoSuchAnchor, Overdraft)
from patternchain.runtime import call_contract, query_state
from patternchain.structural import kv_deploy


# -- token ---------------------------------------------------------------

def test_mint_and_transfer(chain, alice, bob):
    tok = token_deploy(chain, alice)
    token_mint(chain, alice, tok, alice.address, 1000)
    token_transfer(chain, alice, tok, bob.address, 300)
    assert token_balance(chain, tok, alice.address) == 700
    assert token_balance(chain, tok, bob.address) == 300
    assert query_state(chain, tok, "total_supply") == 1000


def test_allowance_is_enforced_and_consumed(chain, alice, bob, carol):
    tok = token_deploy(chain, alice)
    token_mint(chain, alice, tok, alice.address, 100)
    token_approve(chain, alice, tok, bob.address, 50)
    with pytest.raises(ContractError) as e:
        token_transfer_from(chain, bob, tok, alice.address, carol.address, 60)
    assert e.value.code == "InsufficientAllowance"
    token_transfer_from(chain, bob, tok, alice.address, carol.address, 20)
    assert query_state(chain, tok, "allowance", {"holder": alice.address, "spender": bob.address}) == 30
    assert token_balance(chain, tok, carol.address) == 20


def test_full_balance_transfer_and_overdraw(chain, alice, bob):
    tok = token_deploy(chain, alice)
    token_mint(chain, alice, tok, bob.address, 10)
    token_transfer(chain, bob, tok, alice.address, 10)
    assert token_balance(chain, tok, bob.address) == 0
    with pytest.raises(ContractError) as e:
        token_transfer(chain, bob, tok, alice.address, 1)
    assert e.value.code == "InsufficientBalance"


def test_only_custodian_mints_and_burns(chain, alice, bob):
    tok = token_deploy(chain, alice)
    with pytest.raises(ContractError) as e:
        token_mint(chain, bob, tok, bob.address, 5)
    assert e.value.code == "NotAuthorized"
    token_mint(chain, alice, tok, alice.address, 5)
    token_burn(chain, alice, tok, 2)
    assert query_state(chain, tok, "total_supply") == 3


op = st.tuples(st.sampled_from(["mint", "transfer", "approve", "transfer_from", "burn"]),
               st.integers(0, 3), st.integers(0, 3), st.integers(0, 3), st.integers(0, 120))


@settings(max_examples=20, deadline=None)
@given(st.lists(op, max_size=12))
def test_token_conservation(ops):
    chain = Chain()
    keys = [funded(chain, f"h{i}") for i in range(4)]
    tok = token_deploy(chain, keys[0])
    for kind, i, j, k, amount in ops:
        a, b, c = keys[i], keys[j], keys[k]
        args = {"mint": {"to": b.address, "amount": amount},
                "transfer": {"to": b.address, "amount": amount},
                "approve": {"spender": b.address, "amount": amount},
                "transfer_from": {"holder": b.address, "to": c.address, "amount": amount},
                "burn": {"amount": amount}}[kind]
        call_contract(chain, a, tok, kind, args, check=False)
        holders = query_state(chain, tok, "holders")
        total = sum(token_balance(chain, tok, h) for h in holders)
        assert total == query_state(chain, tok, "total_supply")
        assert all(token_balance(chain, tok, h) >= 0 for h in holders)


# -- anchoring -----------------------------------------------------------

def test_large_document_costs_fixed_bytes(chain, alice):
    doc = random.Random(1).randbytes(1 << 20)
    uri = "file://fixtures/scan.pdf"
    anchor = anchor_store(chain, alice, doc, uri)
    record = read_anchor_record(chain, anchor.tx_id)
    assert record == hash_data(doc) + uri.encode()
    assert len(record) == 32 + len(uri)
    assert anchor_verify(chain, anchor, doc) is AnchorStatus.INTACT


def test_empty_document(chain, alice):
    anchor = anchor_store(chain, alice, b"", "u")
    assert anchor.digest == hash_data(b"")
    assert anchor_verify(chain, anchor, b"") is AnchorStatus.INTACT


def test_flipped_byte_detected(chain, alice):
    doc = b"invoice 42: total 1000"
    anchor = anchor_store(chain, alice, doc, "u")
    bad = bytes([doc[0] ^ 1]) + doc[1:]
    assert anchor_verify(chain, anchor, bad) is AnchorStatus.TAMPERED


def test_bitcoin_embed_limit(btc):
    key = funded(btc, "alice")
    ok = anchor_store(btc, key, b"doc", "u" * 8)
    assert ok.onchain_bytes == 40
    with pytest.raises(EmbedTooLarge):
        anchor_store(btc, key, b"doc", "u" * 9)


def test_contract_storage_mode(chain, alice):
    store = kv_deploy(chain, alice)
    anchor = anchor_store(chain, alice, b"report", "ipfs://report", mode="contract-storage", store=store)
    assert anchor_verify(chain, anchor, b"report") is AnchorStatus.INTACT
    assert anchor_verify(chain, anchor, b"Report") is AnchorStatus.TAMPERED


def test_unknown_anchor(chain):
    with pytest.raises(NoSuchAnchor):
        anchor_verify(chain, bytes(32), b"x")


def test_anchor_json_round_trip(chain, alice, tmp_path):
    anchor = anchor_store(chain, alice, b"x", "u")
    path = tmp_path / "a.json"
    anchor.save(path)
    assert type(anchor).load(path) == anchor


@settings(max_examples=60, deadline=None)
@given(st.binary(max_size=64), st.binary(max_size=64))
def test_anchor_soundness(original, candidate):
    chain = Chain()
    key = funded(chain, "a")
    anchor = anchor_store(chain, key, original, "u")
    expected = AnchorStatus.INTACT if candidate == original else AnchorStatus.TAMPERED
    assert anchor_verify(chain, anchor, candidate) is expected


# -- state channel -------------------------------------------------------

def test_open_locks_deposits(chain, alice, bob):
    a0, b0 = chain.get_balance(alice.address), chain.get_balance(bob.address)
    ch = channel_open(chain, alice, bob, 100, 100)
    assert chain.get_balance(ch) == 200
    assert a0 - chain.get_balance(alice.address) > 100
    assert b0 - chain.get_balance(bob.address) > 100
    assert query_state(chain, ch, "status")["status"] == "open"


def test_one_sided_open(chain, alice, bob):
    ch = channel_open(chain, alice, bob, 100, 0)
    assert query_state(chain, ch, "status")["deposits"] == [100, 0]


def test_deposit_beyond_balance(chain, alice):
    poor = funded(chain, "poor", 50_000)
    with pytest.raises(InsufficientBalance):
        channel_open(chain, alice, poor, 100, 10**6)


def test_offchain_updates_and_cooperative_close(chain, alice, bob):
    ch = channel_open(chain, alice, bob, 100, 100)
    height = chain.height
    s1 = channel_update_offchain(channel_initial_state(ch, 100, 100), 25, alice, bob)
    s2 = channel_update_offchain(s1, -10, alice, bob)
    assert (s1.balance_a, s1.balance_b) == (75, 125)
    assert (s2.seq, s2.balance_a, s2.balance_b) == (2, 85, 115)
    assert chain.height == height
    a0, b0 = chain.get_balance(alice.address), chain.get_balance(bob.address)
    receipt = channel_close_cooperative(chain, bob, ch, s2)
    assert receipt.result == [85, 115]
    assert chain.get_balance(alice.address) == a0 + 85
    assert chain.get_balance(bob.address) == b0 + 115 - receipt.gas_used
    assert chain.get_balance(ch) == 0


def test_update_errors(chain, alice, bob):
    s0 = channel_initial_state(bytes(20), 10, 10)
    with pytest.raises(Overdraft):
        channel_update_offchain(s0, 11, alice, bob)
    with pytest.raises(MissingSignature):
        channel_update_offchain(s0, 1, alice, None)


def test_close_rejects_forgery_and_bad_split(chain, alice, bob, mallory):
    ch = channel_open(chain, alice, bob, 100, 100)
    s1 = channel_update_offchain(channel_initial_state(ch, 100, 100), 30, alice, bob)
    forged = ChannelState(ch, 1, 70, 130).signed(alice, mallory)
    assert channel_close_cooperative(chain, alice, ch, forged, check=False).error == "BadSignatures"
    skewed = ChannelState(ch, 2, 70, 129).signed(alice, bob)
    assert channel_close_cooperative(chain, alice, ch, skewed, check=False).error == "SplitMismatch"
    channel_close_cooperative(chain, alice, ch, s1)
    assert channel_close_cooperative(chain, alice, ch, s1, check=False).error == "NotOpen"


def test_stale_state_is_overridden(chain, alice, bob):
    ch = channel_open(chain, alice, bob, 100, 100, challenge_window=5)
    stale = ChannelState(ch, 3, 60, 140).signed(alice, bob)
    newest = ChannelState(ch, 5, 40, 160).signed(alice, bob)
    deadline = channel_dispute_open(chain, alice, ch, stale)
    assert channel_challenge(chain, bob, ch, newest).success
    assert channel_challenge(chain, alice, ch, stale, check=False).error == "StaleState"
    assert channel_finalize(chain, alice, ch, check=False).error == "TooEarly"
    chain.advance_to(deadline)
    assert channel_challenge(chain, bob, ch, newest, check=False).error == "DeadlinePassed"
    assert channel_finalize(chain, alice, ch).result == [40, 160]


def test_finalize_without_challenge(chain, alice, bob, carol):
    ch = channel_open(chain, alice, bob, 100, 100, challenge_window=3)
    s1 = channel_update_offchain(channel_initial_state(ch, 100, 100), 40, alice, bob)
    deadline = channel_dispute_open(chain, bob, ch, s1)
    chain.advance_to(deadline)
    assert channel_finalize(chain, carol, ch).result == [60, 140]
    assert query_state(chain, ch, "status")["settled"] == [1, 60, 140]


def test_outsider_cannot_dispute(chain, alice, bob, mallory):
    ch = channel_open(chain, alice, bob, 100, 100)
    s0 = channel_initial_state(ch, 100, 100)
    receipt = call_contract(chain, mallory, ch, "dispute", {"state": s0.to_args()}, check=False)
    assert receipt.error == "NotAuthorized"


# -- legal pair ----------------------------------------------------------

AGREEMENT = b"Service agreement between A and B.\nFee: 100 per month."


def test_bind_and_verify(chain, alice):
    contract, finalized = pair_bind(chain, alice, AGREEMENT)
    assert str(contract).encode() in finalized
    assert pair_verify(chain, contract, finalized) is PairStatus.BOUND
    edited = finalized.replace(b"100", b"101")
    assert pair_verify(chain, contract, edited) is PairStatus.MISMATCH
    assert pair_verify(chain, contract, AGREEMENT) is PairStatus.MISMATCH


def test_bind_is_write_once_and_owner_only(chain, alice, mallory):
    contract, _ = pair_bind(chain, alice, AGREEMENT)
    with pytest.raises(ContractError) as e:
        pair_attach(chain, alice, contract, b"other")
    assert e.value.code == "AlreadyBound"
    other, _ = pair_bind(chain, alice, AGREEMENT)
    with pytest.raises(ContractError) as e:
        pair_attach(chain, mallory, other, AGREEMENT)
    assert e.value.code == "NotAuthorized"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 255))
def test_pair_edits_never_verify(pos, flip):
    chain = Chain()
    key = funded(chain, "a")
    contract, finalized = pair_bind(chain, key, AGREEMENT)
    i = pos % len(finalized)
    edited = finalized[:i] + bytes([finalized[i] ^ flip]) + finalized[i + 1:]
    assert pair_verify(chain, contract, edited) is PairStatus.MISMATCH
