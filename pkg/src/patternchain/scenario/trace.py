"""Trace events, their canonical JSON rendering and offline re-checks."""

import dataclasses
import enum
import json
from dataclasses import dataclass, field

TRACE_FORMAT = "patternchain-trace/1"
EVENT_KINDS = ("tx-prepared", "tx-confirmed-by-user", "tx-submitted", "receipt",
               "offchain-message", "assertion")


@dataclass
class TraceEvent:
    step: int
    tick: int
    kind: str
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown trace event kind {self.kind!r}")

    def to_json(self) -> dict:
        return {"step": self.step, "tick": self.tick, "kind": self.kind,
                "payload": to_json_value(self.payload)}


def to_json_value(v):
    """Canonical JSON form: bytes-like values become lowercase ``0x`` hex
    and integers (amounts, balances, heights inside payloads) decimal
    strings so no consumer loses precision."""
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, enum.Enum):
        return to_json_value(v.value)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, (bytes, bytearray, memoryview)):
        return "0x" + bytes(v).hex()
    if isinstance(v, dict):
        return {str(k): to_json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_json_value(x) for x in v]
    if dataclasses.is_dataclass(v):
        return {f.name: to_json_value(getattr(v, f.name)) for f in dataclasses.fields(v)}
    raise TypeError(f"cannot render {type(v).__name__} in a trace")


def export_trace(trace: dict) -> str:
    """Deterministic JSON text for a trace document."""
    return json.dumps(trace, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def load_trace(text: str) -> dict:
    return json.loads(text)


def verify_trace(trace: dict) -> list[str]:
    """Re-check a trace document without the chain; returns problems found."""
    problems = []
    if trace.get("format") != TRACE_FORMAT:
        return [f"unknown trace format {trace.get('format')!r}"]
    chain = trace["chain"]
    blocks = chain["blocks"]
    gas_limit = int(chain["block_gas_limit"])
    prev = None
    for i, b in enumerate(blocks):
        if int(b["height"]) != i:
            problems.append(f"block {i}: height {b['height']}")
        if prev is None:
            if b["parent"] != "0x" + "00" * 32:
                problems.append("genesis parent is not the zero hash")
        else:
            if b["parent"] != prev["hash"]:
                problems.append(f"block {i}: parent hash does not link")
            if int(b["timestamp"]) < int(prev["timestamp"]):
                problems.append(f"block {i}: timestamp went backwards")
        if int(b["gas_used"]) > gas_limit:
            problems.append(f"block {i}: gas {b['gas_used']} over limit {gas_limit}")
        prev = b
    supply = chain["supply"]
    if int(supply["holdings"]) + int(supply["fees"]) != int(supply["minted"]):
        problems.append("supply not conserved")

    included = {tx for b in blocks for tx in b["transactions"]}
    prepared, confirmed = set(), set()
    failed = 0
    for ev in trace["events"]:
        kind, p = ev["kind"], ev["payload"]
        if kind not in EVENT_KINDS:
            problems.append(f"step {ev['step']}: unknown event kind {kind}")
        elif kind == "tx-prepared":
            prepared.add(p["tx_id"])
        elif kind == "tx-confirmed-by-user":
            if p["tx_id"] not in prepared:
                problems.append(f"step {ev['step']}: confirmation before preparation")
            confirmed.add(p["tx_id"])
        elif kind == "tx-submitted":
            tx = p["tx_id"]
            if p["mode"] == "dapp":
                if tx not in confirmed or p["key_holder"] != p["sender_actor"]:
                    problems.append(f"step {ev['step']}: dapp submission {tx[:18]} not user-confirmed")
            elif p["mode"] == "semidapp":
                if tx in confirmed or p["key_holder"] == p["sender_actor"]:
                    problems.append(f"step {ev['step']}: semidapp submission {tx[:18]} not provider-signed")
            if tx not in included:
                problems.append(f"step {ev['step']}: submitted tx {tx[:18]} never included")
        elif kind == "assertion" and not p["passed"]:
            failed += 1
    result = trace["result"]
    if result["passed"] != (failed == 0 and not result.get("error")):
        problems.append("result flag disagrees with assertion events")
    return problems
