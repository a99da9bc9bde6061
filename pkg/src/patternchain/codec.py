"""Canonical byte encodings.

Two layers: fixed-layout helpers (big-endian fixed-width integers,
length-prefixed byte strings) for transactions and blocks, and a tagged
self-describing encoding for contract arguments, storage values and
return values. Both are bit-exact so that hashes and signatures are
stable across runs.
"""

import struct

__all__ = ["u32", "u64", "lp", "encode_value", "decode_value", "skey"]


def u32(n: int) -> bytes:
    return struct.pack(">I", n)


def u64(n: int) -> bytes:
    return struct.pack(">Q", n)


def lp(data: bytes) -> bytes:
    """Length-prefix ``data`` with a 4-byte big-endian length."""
    return struct.pack(">I", len(data)) + bytes(data)


def _int_bytes(n: int) -> bytes:
    return n.to_bytes(n.bit_length() // 8 + 1, "big", signed=True)


def encode_value(value) -> bytes:
    """Encode None/bool/int/bytes/str/list/tuple/dict into canonical bytes.

    Dict keys must be strings and are emitted in sorted order.
    """
    if value is None:
        return b"N"
    if value is True:
        return b"T"
    if value is False:
        return b"F"
    if isinstance(value, int):
        return b"I" + lp(_int_bytes(value))
    if isinstance(value, (bytes, bytearray)):
        return b"B" + lp(bytes(value))
    if isinstance(value, str):
        return b"S" + lp(value.encode("utf-8"))
    if isinstance(value, (list, tuple)):
        return b"L" + u32(len(value)) + b"".join(encode_value(v) for v in value)
    if isinstance(value, dict):
        parts = []
        for k in sorted(value):
            if not isinstance(k, str):
                raise TypeError(f"dict keys must be str, got {type(k).__name__}")
            parts.append(lp(k.encode("utf-8")) + encode_value(value[k]))
        return b"D" + u32(len(value)) + b"".join(parts)
    raise TypeError(f"cannot encode {type(value).__name__}")


def _decode(buf: bytes, pos: int):
    tag = buf[pos:pos + 1]
    pos += 1
    if tag == b"N":
        return None, pos
    if tag == b"T":
        return True, pos
    if tag == b"F":
        return False, pos
    if tag in (b"I", b"B", b"S"):
        (n,) = struct.unpack_from(">I", buf, pos)
        pos += 4
        raw = buf[pos:pos + n]
        if len(raw) != n:
            raise ValueError("truncated value")
        pos += n
        if tag == b"I":
            return int.from_bytes(raw, "big", signed=True), pos
        if tag == b"B":
            return bytes(raw), pos
        return raw.decode("utf-8"), pos
    if tag == b"L":
        (n,) = struct.unpack_from(">I", buf, pos)
        pos += 4
        items = []
        for _ in range(n):
            item, pos = _decode(buf, pos)
            items.append(item)
        return items, pos
    if tag == b"D":
        (n,) = struct.unpack_from(">I", buf, pos)
        pos += 4
        out = {}
        for _ in range(n):
            (klen,) = struct.unpack_from(">I", buf, pos)
            pos += 4
            key = buf[pos:pos + klen].decode("utf-8")
            pos += klen
            out[key], pos = _decode(buf, pos)
        return out, pos
    raise ValueError(f"bad tag {tag!r} at offset {pos - 1}")


def decode_value(data: bytes):
    value, pos = _decode(bytes(data), 0)
    if pos != len(data):
        raise ValueError("trailing bytes after encoded value")
    return value


def skey(*parts) -> bytes:
    """Build a storage key from a tuple of encodable parts."""
    return encode_value(list(parts))
