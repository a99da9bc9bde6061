"""Step loop that executes a scenario against a fresh chain.

Every transaction an actor signs goes through a :class:`Signer`, which
applies the actor's submission mode. A self-custodied actor (DApp mode)
sees the unsigned transaction rendered, confirms it and signs locally.
A custodial actor (Semi-DApp mode) never sees it: the provider signs with
the key it holds and the user only learns the transaction id.
"""

import dataclasses
import operator
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ..codec import decode_value
from ..crypto import Address, Hash256, KeyPair, hash_data
from ..errors import ChainError
from ..ledger import Chain
from ..offchain import Bus
from ..oracles import ExternalSystem, ExternalWorld
from ..runtime import query_state
from ..tx import Call, Deploy, Transfer
from .script import ParseError, ScenarioScript, Step, load_script
from .trace import TRACE_FORMAT, TraceEvent, to_json_value


class UserRejected(ChainError):
    code = "UserRejected"


class ProviderUnavailable(ChainError):
    code = "ProviderUnavailable"


class AssertionFailed(Exception):
    def __init__(self, step: int, label: str):
        self.step = step
        self.label = label
        super().__init__(f"step {step}: {label}")


@dataclass
class Actor:
    name: str
    key: KeyPair
    custody: str | None = None

    @property
    def address(self) -> Address:
        return self.key.address

    @property
    def mode(self) -> str:
        return "dapp" if self.custody is None else "semidapp"


class Signer:
    """Key access for one actor, routed through its submission mode."""

    def __init__(self, runner: "Runner", actor: Actor):
        self._runner = runner
        self.actor = actor

    @property
    def address(self) -> Address:
        return self.actor.address

    @property
    def public_key(self) -> bytes:
        return self.actor.key.public_key

    def sign(self, message: bytes) -> bytes:
        self._runner._check_custodian(self.actor)
        return self.actor.key.sign(message)

    def sign_tx(self, tx):
        return self._runner._sign(self.actor, tx)


def render_tx(tx) -> dict:
    """What a DApp shows its user before asking for a signature."""
    p = tx.payload
    out = {"tx_id": tx.tx_id, "sender": tx.sender, "nonce": tx.nonce, "kind": p.kind,
           "gas_limit": tx.gas_limit, "value": tx.value}
    if isinstance(p, Transfer):
        out.update(target=p.to, data=p.data)
    elif isinstance(p, Deploy):
        out.update(code_id=p.code_id, version=p.version, args=p.args)
    elif isinstance(p, Call):
        out.update(target=p.contract, function=p.function, args=p.args)
    return out


@dataclass
class ScenarioResult:
    name: str
    passed: bool
    trace: dict
    failures: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def raise_for_failure(self):
        if not self.passed:
            step = next((ev["step"] for ev in self.trace["events"]
                         if ev["kind"] == "assertion" and not ev["payload"]["passed"]), -1)
            raise AssertionFailed(step, "; ".join(self.failures) or self.error or "failed")


_COMPARE = {
    "eq": operator.eq, "ne": operator.ne, "gt": operator.gt, "ge": operator.ge,
    "lt": operator.lt, "le": operator.le,
    "in": lambda a, b: a in b, "not_in": lambda a, b: a not in b,
}


def _plain(v):
    """Comparable form of a value."""
    if isinstance(v, (Address, Hash256, bytearray)):
        return bytes(v)
    if isinstance(v, list):
        return [_plain(x) for x in v]
    return v


def _safe_json(v):
    try:
        return to_json_value(v)
    except TypeError:
        return repr(v)


class Runner:
    def __init__(self, script: ScenarioScript, seed: int | None = None, profile: str | None = None,
                 interactive: bool = False, prompt=None):
        self.script = script
        self.seed = script.seed if seed is None else seed
        self.chain = Chain(profile or script.profile)
        self.interactive = interactive
        self._prompt = prompt or input
        self.bus = Bus()
        self.world = ExternalWorld(**(script.world or {}), seed=self.seed)
        self.external = ExternalSystem(self.chain)
        self.documents = dict(script.documents)
        self.vars: dict = {}
        self.events: list[TraceEvent] = []
        self.unavailable: set[str] = set()
        self.channels: dict[bytes, tuple[str, str]] = {}
        self.step: Step | None = None
        self._modes: dict[bytes, tuple[str, str, str]] = {}
        self.actors: dict[str, Actor] = {}
        for spec in script.actors:
            key, addr = self.chain.create_account(f"{self.seed}:{spec.name}".encode())
            self.actors[spec.name] = Actor(spec.name, key, spec.custody)
            if spec.funds:
                self.chain.mint(addr, spec.funds)
        self.chain.observers.append(self._on_chain)
        self.bus.observers.append(self._on_message)

    # -- trace -----------------------------------------------------------
    def emit(self, kind: str, payload: dict):
        index = self.step.index if self.step is not None else -1
        self.events.append(TraceEvent(index, self.chain.tick, kind, payload))

    def _on_chain(self, kind, **info):
        if kind == "submitted":
            tx = info["tx"]
            actor, mode, holder = self._modes.pop(bytes(tx.tx_id), ("", "external", ""))
            payload = {"tx_id": tx.tx_id, "sender": tx.sender, "sender_actor": actor,
                       "nonce": tx.nonce, "mode": mode, "key_holder": holder}
            if mode == "semidapp":
                payload["returned_to"] = actor
            self.emit("tx-submitted", payload)
        elif kind == "receipt":
            r = info["receipt"]
            self.emit("receipt", {
                "tx_id": r.tx_id, "success": r.success, "gas_used": r.gas_used, "height": r.height,
                "error": r.error, "detail": r.detail,
                "events": [{"contract": e.contract, "name": e.name, "data": e.data} for e in r.events],
            })

    def _on_message(self, msg):
        self.emit("offchain-message", {"seq": msg.seq, "sender": msg.sender,
                                       "recipient": msg.recipient, "message_kind": msg.kind,
                                       "body": _safe_json(msg.payload)})

    # -- signing ---------------------------------------------------------
    def signer(self, name: str) -> Signer:
        if name not in self.actors:
            raise ParseError(f"unknown actor {name!r}")
        return Signer(self, self.actors[name])

    def _check_custodian(self, actor: Actor):
        if actor.custody is not None and actor.custody in self.unavailable:
            raise ProviderUnavailable(f"{actor.custody} is not responding")

    def _confirm(self, rendering: dict) -> bool:
        if self.step is not None and not self.step.confirm:
            return False
        if not self.interactive:
            return True
        print("About to sign:", file=sys.stderr)
        for k, v in to_json_value(rendering).items():
            print(f"  {k}: {v}", file=sys.stderr)
        return self._prompt("Sign and submit? [y/N] ").strip().lower() in ("y", "yes")

    def _sign(self, actor: Actor, tx):
        if actor.mode == "dapp":
            rendering = render_tx(tx)
            self.emit("tx-prepared", {"actor": actor.name, **rendering})
            if not self._confirm(rendering):
                raise UserRejected(f"{actor.name} declined tx {tx.tx_id.hex()[:16]}")
            self.emit("tx-confirmed-by-user", {"actor": actor.name, "tx_id": tx.tx_id})
            holder = actor.name
        else:
            self._check_custodian(actor)
            holder = actor.custody
        self._modes[bytes(tx.tx_id)] = (actor.name, actor.mode, holder)
        return actor.key.sign_tx(tx)

    # -- expressions -----------------------------------------------------
    def lookup(self, ref: str):
        name, *path = ref.split(".")
        if name not in self.vars:
            raise ParseError(f"undefined variable ${name}")
        v = self.vars[name]
        for part in path:
            if isinstance(v, dict):
                v = v[part]
            elif isinstance(v, (list, tuple)) and part.lstrip("-").isdigit():
                v = v[int(part)]
            elif hasattr(v, part):
                v = getattr(v, part)
            else:
                raise ParseError(f"${ref}: no field {part!r}")
        return v

    def ev(self, x):
        """Evaluate a script expression."""
        if isinstance(x, str):
            if x.startswith("@"):
                return self.actors[x[1:]].address if x[1:] in self.actors else _undefined(x)
            if x.startswith("$"):
                return self.lookup(x[1:])
            if x.startswith("0x"):
                try:
                    return bytes.fromhex(x[2:])
                except ValueError:
                    return x
            if x.startswith("b:"):
                return x[2:].encode("utf-8")
            return x[1:] if x.startswith("\\") else x
        if isinstance(x, list):
            return [self.ev(v) for v in x]
        if isinstance(x, dict):
            if len(x) == 1:
                (k, v), = x.items()
                if k.startswith("$"):
                    fn = _SPECIAL.get(k[1:])
                    if fn is None:
                        raise ParseError(f"unknown expression {k}")
                    return fn(self, v)
            return {k: self.ev(v) for k, v in x.items()}
        return x

    # -- steps -----------------------------------------------------------
    def _assert(self, step: Step):
        check = dict(step.check)
        actual = self.ev(check.pop("value"))
        (cmp, expected_raw), = check.items()
        expected = self.ev(expected_raw)
        try:
            passed = bool(_COMPARE[cmp](_plain(actual), _plain(expected)))
        except TypeError:
            passed = False
        self.emit("assertion", {"label": step.label or f"step {step.index}", "comparator": cmp,
                                "actual": _safe_json(actual), "expected": _safe_json(expected),
                                "passed": passed})
        return passed

    def run_step(self, step: Step) -> bool:
        self.step = step
        if step.op == "assert":
            return self._assert(step)
        from .ops import OPS

        fn = OPS.get(step.op)
        if fn is None:
            raise ParseError(f"step {step.index}: unknown op {step.op!r}")
        signer = self.signer(step.actor) if step.actor else None
        try:
            result = fn(self, signer, self.ev(step.args))
        except ChainError as e:
            if step.expect_error is None:
                raise
            passed = e.code == step.expect_error
            self.emit("assertion", {"label": step.label or f"{step.op} rejected", "comparator": "raises",
                                    "expected": step.expect_error, "actual": e.code,
                                    "detail": e.detail, "passed": passed})
            return passed
        except KeyError as e:
            raise ParseError(f"step {step.index} ({step.op}): missing argument {e}") from None
        if step.save:
            self.vars[step.save] = result
        if step.expect_error is not None:
            self.emit("assertion", {"label": step.label or f"{step.op} rejected", "comparator": "raises",
                                    "expected": step.expect_error, "actual": None, "passed": False})
            return False
        return True

    def run(self) -> ScenarioResult:
        failures, error = [], None
        for step in self.script.steps:
            try:
                ok = self.run_step(step)
            except ChainError as e:
                error = f"step {step.index} ({step.op}): {e}"
                self.emit("assertion", {"label": f"step {step.index} ({step.op}) raised",
                                        "comparator": "no-error", "actual": e.code,
                                        "detail": e.detail, "passed": False})
                failures.append(error)
                break
            if not ok:
                failures.append(step.label or f"step {step.index}")
        self.step = None
        passed = not failures
        return ScenarioResult(self.script.name, passed, self.trace(passed, failures, error),
                              failures, error)

    def trace(self, passed: bool, failures: list[str], error: str | None) -> dict:
        chain = self.chain
        blocks = [{"height": b.height, "hash": b.hash, "parent": b.parent_hash,
                   "timestamp": b.timestamp, "gas_used": b.gas_used,
                   "transactions": [tx.tx_id for tx in b.transactions]} for b in chain.blocks]
        doc = {
            "format": TRACE_FORMAT,
            "scenario": self.script.name,
            "seed": self.seed,
            "profile": chain.profile.to_dict(),
            "actors": {a.name: {"address": a.address, "custody": a.custody, "mode": a.mode}
                       for a in self.actors.values()},
            "events": [e.to_json() for e in self.events],
            "chain": {"blocks": blocks, "block_gas_limit": chain.profile.block_gas_limit,
                      "supply": chain.supply_report(), "state_digest": chain.state_digest()},
            "result": {"passed": passed, "assertions": sum(e.kind == "assertion" for e in self.events),
                       "failures": failures, "error": error},
        }
        return to_json_value({k: v for k, v in doc.items() if k != "events"}) | {"events": doc["events"]}


def _undefined(ref):
    raise ParseError(f"unknown actor {ref}")


def _as_bytes(v) -> bytes:
    return v.encode("utf-8") if isinstance(v, str) else bytes(v)


def _x_query(rt, v):
    v = rt.ev(v)
    target = v.get("function", v.get("key"))
    return query_state(rt.chain, v["contract"], target, v.get("args"))


def _x_count_txs(rt, v):
    v = rt.ev(v)
    after, to, fn = v.get("after", -1), v.get("to"), v.get("function")
    n = 0
    for b in rt.chain.blocks[after + 1:]:
        for tx in b.transactions:
            p = tx.payload
            target = p.contract if isinstance(p, Call) else p.to if isinstance(p, Transfer) else None
            if (to is None or target == to) and (fn is None or getattr(p, "function", None) == fn):
                n += 1
    return n


def _x_last_event(rt, kind):
    for e in reversed(rt.events):
        if e.kind == kind:
            return e.payload
    return None


_SPECIAL = {
    "sha256": lambda rt, v: hash_data(_as_bytes(rt.ev(v))),
    "doc": lambda rt, v: rt.documents[v] if v in rt.documents else _undefined(f"document {v}"),
    "utf8": lambda rt, v: str(v).encode("utf-8"),
    "concat": lambda rt, v: b"".join(_as_bytes(x) for x in rt.ev(v)),
    "len": lambda rt, v: len(rt.ev(v)),
    "sum": lambda rt, v: sum(rt.ev(v)),
    "sub": lambda rt, v: (lambda a, b: a - b)(*rt.ev(v)),
    "balance": lambda rt, v: rt.chain.get_balance(rt.ev(v)),
    "height": lambda rt, v: rt.chain.height,
    "nonce": lambda rt, v: rt.chain.next_nonce(rt.ev(v)),
    "query": _x_query,
    "confirmations": lambda rt, v: rt.chain.confirmations_of(Hash256(rt.ev(v))),
    "receipt": lambda rt, v: rt.chain.receipt(Hash256(rt.ev(v))),
    "count_txs": _x_count_txs,
    "count_events": lambda rt, v: sum(e.kind == v for e in rt.events),
    "last_event": _x_last_event,
    "decode": lambda rt, v: decode_value(rt.ev(v)),
    "fields": lambda rt, v: dataclasses.asdict(rt.ev(v)),
    "supply": lambda rt, v: rt.chain.supply_report(),
    "lit": lambda rt, v: v,
}


def run_scenario(path, seed: int | None = None, profile: str | None = None, interactive: bool = False,
                 trace_out=None) -> ScenarioResult:
    """Load and execute a script; optionally write its trace JSON."""
    from .trace import export_trace

    script = load_script(path)
    result = Runner(script, seed, profile, interactive).run()
    if trace_out is not None:
        Path(trace_out).write_text(export_trace(result.trace))
    return result
