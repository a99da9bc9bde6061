import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patternchain.codec import decode_value, encode_value, lp, u32, u64
from patternchain.crypto import Address, Hash256, KeyPair, address_of, hash_data, verify_signature
from patternchain.errors import EmptySeed

# FIPS 180-2 published vectors
SHA256_VECTORS = {
    b"abc": "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
    b"": "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
    b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq":
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1",
}

# RFC 8032 section 7.1, tests 1 and 2
ED25519_VECTORS = [
    ("d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a", "",
     "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46b"
     "d25bf5f0595bbe24655141438e7a100b"),
    ("3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c", "72",
     "92a009a9f0d4cab8720e820b5f642540a2b27b5416503f8fb3762223ebdb69da085ac1e43e15996e458f3613d0f11d8c"
     "387b2eaeb4302aeeb00d291612bb0c00"),
]


@pytest.mark.parametrize("data,digest", SHA256_VECTORS.items())
def test_sha256_vectors(data, digest):
    assert hash_data(data).hex() == digest


def test_hash_is_32_bytes():
    assert len(hash_data(b"x" * 1000)) == 32
    with pytest.raises(ValueError):
        Hash256(b"short")


def test_single_bit_flip_changes_digest():
    rnd = os.urandom
    for _ in range(100):
        d = bytearray(rnd(64))
        flipped = bytearray(d)
        flipped[len(d) // 2] ^= 1
        assert hash_data(bytes(d)) != hash_data(bytes(flipped))


@pytest.mark.parametrize("pub,msg,sig", ED25519_VECTORS)
def test_ed25519_rfc_vectors(pub, msg, sig):
    pub, msg, sig = bytes.fromhex(pub), bytes.fromhex(msg), bytes.fromhex(sig)
    assert verify_signature(pub, msg, sig)
    assert not verify_signature(pub, msg + b"\x00", sig)


def test_address_is_last_20_bytes_of_pubkey_digest():
    k = KeyPair.from_seed(b"alice")
    assert k.address == hash_data(k.public_key)[-20:]
    assert address_of(k.public_key) == k.address
    assert len(k.address) == 20


def test_same_seed_same_address():
    assert KeyPair.from_seed(b"s").address == KeyPair.from_seed(b"s").address


def test_distinct_seeds_distinct_addresses():
    addrs = {KeyPair.from_seed(i.to_bytes(4, "big") + b"seed").address for i in range(1000)}
    assert len(addrs) == 1000


def test_empty_seed_rejected():
    with pytest.raises(EmptySeed):
        KeyPair.from_seed(b"")


def test_sign_verify():
    a, b = KeyPair.from_seed(b"a"), KeyPair.from_seed(b"b")
    sig = a.sign(b"payload")
    assert a.verify(b"payload", sig)
    assert not verify_signature(b.public_key, b"payload", sig)
    assert not a.verify(b"paylaod", sig)


def test_address_parsing():
    a = Address("0x" + "ab" * 20)
    assert str(a) == "0x" + "ab" * 20
    with pytest.raises(ValueError):
        Address(b"\x00" * 19)


def test_fixed_layout_helpers():
    assert u32(1) == b"\x00\x00\x00\x01"
    assert u64(2**40) == b"\x00\x00\x01\x00\x00\x00\x00\x00"
    assert lp(b"ab") == b"\x00\x00\x00\x02ab"


values = st.recursive(
    st.none() | st.booleans() | st.integers() | st.binary(max_size=40) | st.text(max_size=20),
    lambda inner: st.lists(inner, max_size=5) | st.dictionaries(st.text(max_size=8), inner, max_size=5),
    max_leaves=20,
)


@settings(max_examples=300)
@given(values)
def test_codec_round_trip(v):
    assert decode_value(encode_value(v)) == v


@given(st.dictionaries(st.text(max_size=5), st.integers(), max_size=6))
def test_dict_encoding_is_order_independent(d):
    assert encode_value(d) == encode_value(dict(reversed(list(d.items()))))


def test_codec_rejects_non_string_keys():
    with pytest.raises(TypeError):
        encode_value({1: 2})
