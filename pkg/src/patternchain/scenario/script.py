"""Scenario scripts: JSON parsing, validation and fixture loading."""

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from ..ledger import PROFILES

MODES = ("dapp", "semidapp")
COMPARATORS = ("eq", "ne", "gt", "ge", "lt", "le", "in", "not_in")


class ParseError(Exception):
    """Script is malformed or references something that does not exist."""


@dataclass(frozen=True)
class ActorSpec:
    name: str
    funds: int = 0
    custody: str | None = None  # provider actor holding this actor's key


@dataclass(frozen=True)
class Step:
    index: int
    op: str
    actor: str | None = None
    args: dict = field(default_factory=dict)
    mode: str | None = None
    save: str | None = None
    expect_error: str | None = None
    confirm: bool = True
    label: str | None = None
    check: dict | None = None  # assertion body for op == "assert"


@dataclass
class ScenarioScript:
    name: str
    profile: str
    seed: int
    actors: list[ActorSpec]
    steps: list[Step]
    documents: dict[str, bytes] = field(default_factory=dict)
    world: dict | None = None
    description: str = ""
    source: Path | None = None

    def actor(self, name: str) -> ActorSpec:
        for a in self.actors:
            if a.name == name:
                return a
        raise KeyError(name)


def _require(cond, msg):
    if not cond:
        raise ParseError(msg)


def _load_fixture(spec, base: Path, seed: int) -> bytes:
    if isinstance(spec, dict) and "generate" in spec:
        size = spec["generate"]
        _require(isinstance(size, int) and size >= 0, f"bad generated fixture size {size!r}")
        return random.Random(spec.get("seed", seed)).randbytes(size)
    _require(isinstance(spec, str), f"fixture must be a path or a generator, got {spec!r}")
    path = base / spec
    _require(path.is_file(), f"missing fixture {spec}")
    return path.read_bytes()


def parse_script(data: dict, base: Path | None = None, source: Path | None = None) -> ScenarioScript:
    base = base or Path.cwd()
    _require(isinstance(data, dict), "script must be a JSON object")
    for key in ("name", "steps"):
        _require(key in data, f"script lacks {key!r}")
    profile = data.get("profile", "ethereum-like")
    _require(profile in PROFILES, f"unknown profile {profile!r}")
    seed = data.get("seed", 0)
    _require(isinstance(seed, int), "seed must be an integer")

    actors, seen = [], set()
    for raw in data.get("actors", []):
        _require(isinstance(raw, dict) and isinstance(raw.get("name"), str), f"bad actor {raw!r}")
        _require(raw["name"] not in seen, f"duplicate actor {raw['name']}")
        seen.add(raw["name"])
        funds = raw.get("funds", 0)
        _require(isinstance(funds, int) and funds >= 0, f"bad funds for {raw['name']}")
        actors.append(ActorSpec(raw["name"], funds, raw.get("custody")))
    for a in actors:
        _require(a.custody is None or a.custody in seen, f"{a.name}: unknown custodian {a.custody}")
        _require(a.custody != a.name, f"{a.name} cannot be its own custodian")

    fixtures = data.get("fixtures", {})
    _require(isinstance(fixtures, dict), "fixtures must be an object")
    documents = {name: _load_fixture(spec, base, seed)
                 for name, spec in fixtures.get("documents", {}).items()}
    world = None
    if "world" in fixtures:
        path = base / fixtures["world"]
        _require(path.is_file(), f"missing fixture {fixtures['world']}")
        try:
            world = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ParseError(f"world fixture {fixtures['world']}: {e}") from None

    steps = []
    for i, raw in enumerate(data["steps"]):
        _require(isinstance(raw, dict) and isinstance(raw.get("op"), str), f"step {i}: missing op")
        mode = raw.get("mode")
        _require(mode is None or mode in MODES, f"step {i}: unknown mode {mode!r}")
        actor = raw.get("actor")
        _require(actor is None or actor in seen, f"step {i}: unknown actor {actor!r}")
        check = None
        if raw["op"] == "assert":
            check = {k: v for k, v in raw.items() if k in COMPARATORS or k == "value"}
            _require("value" in check, f"step {i}: assertion lacks 'value'")
            _require(len(check) == 2, f"step {i}: assertion needs exactly one comparator")
        if actor is not None:
            custodial = next(a for a in actors if a.name == actor).custody is not None
            _require(not (mode == "semidapp" and not custodial),
                     f"step {i}: semidapp mode needs a custodial actor")
            _require(not (mode == "dapp" and custodial),
                     f"step {i}: {actor}'s key is held by a provider")
        args = raw.get("args", {})
        _require(isinstance(args, dict), f"step {i}: args must be an object")
        steps.append(Step(i, raw["op"], actor, args, mode, raw.get("save"), raw.get("expect_error"),
                          bool(raw.get("confirm", True)), raw.get("label"), check))

    return ScenarioScript(data["name"], profile, seed, actors, steps, documents, world,
                          data.get("description", ""), source)


def load_script(path) -> ScenarioScript:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"no such script {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path.name}: {e}") from None
    return parse_script(data, path.parent, path)
