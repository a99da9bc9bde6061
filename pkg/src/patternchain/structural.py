"""Structural patterns: contract registry, data contract, factory contract,
incentive execution and security deposit."""

from .crypto import Address, Hash256
from .runtime import (
    ANYONE,
    OWNER,
    Behavior,
    Guard,
    Reject,
    call_contract,
    deploy_contract,
    mutating,
    query_state,
    register,
    resolve_code,
    view,
)
from .errors import UnknownCodeId

__all__ = [
    "ContractRegistry",
    "KvStore",
    "AppLogicV1",
    "AppLogicV2",
    "Factory",
    "IncentiveJob",
    "DepositEscrow",
    "registry_deploy",
    "registry_register",
    "registry_update",
    "registry_lookup",
    "registry_history",
    "kv_deploy",
    "kv_put",
    "kv_get",
    "factory_deploy",
    "factory_instantiate",
    "incentive_deploy",
    "incentive_invoke",
    "stake_deposit",
    "resolve_deposit",
]


def _address_list(values, code="BadAddress"):
    if not isinstance(values, list) or any(not isinstance(v, bytes) or len(v) != 20 for v in values):
        raise Reject(code, "expected a list of 20-byte addresses")
    return values


def _writer_or_admin(ctx, args):
    if ctx.caller in (ctx.get("admins") or ()):
        return True
    entry = ctx.get(("entry", args.get("name")))
    return entry is not None and ctx.caller == entry["writer"]


@register
class ContractRegistry(Behavior):
    """Symbolic name -> versioned contract address mapping.

    Versions are dense integers starting at 1 and are never removed.
    New names need an admin; an existing name may be updated by its
    writer (the registering account unless reassigned) or by an admin.
    """

    code_id = "registry"
    _name_guard = Guard.where("writer-or-admin", _writer_or_admin)

    def init(self, ctx, admins=None):
        ctx.set("admins", _address_list(admins) if admins is not None else [ctx.owner])
        ctx.set("names", [])

    @mutating(Guard.member("admins"))
    def register(self, ctx, name, target, writer=None):
        ctx.require(isinstance(name, str) and name, "BadName")
        ctx.require(ctx.get(("entry", name)) is None, "NameTaken", name)
        writer = writer if writer is not None else ctx.caller
        ctx.set(("entry", name), {"writer": writer, "versions": [[1, target]]})
        ctx.set("names", ctx.get("names") + [name])
        ctx.emit("Registered", name=name, version=1, address=target)
        return 1

    @mutating(_name_guard)
    def update(self, ctx, name, target):
        entry = ctx.get(("entry", name))
        ctx.require(entry is not None, "NoSuchName", str(name))
        version = entry["versions"][-1][0] + 1
        entry["versions"].append([version, target])
        ctx.set(("entry", name), entry)
        ctx.emit("Updated", name=name, version=version, address=target)
        return version

    @mutating(_name_guard)
    def set_writer(self, ctx, name, writer):
        entry = ctx.get(("entry", name))
        ctx.require(entry is not None, "NoSuchName", str(name))
        entry["writer"] = writer
        ctx.set(("entry", name), entry)

    @mutating(Guard.member("admins"))
    def set_admins(self, ctx, admins):
        ctx.set("admins", _address_list(admins))
        ctx.emit("AdminsChanged", admins=admins)

    @view
    def lookup(self, ctx, name, version=None):
        entry = ctx.get(("entry", name))
        ctx.require(entry is not None, "NoSuchName", str(name))
        if version is None:
            return entry["versions"][-1][1]
        for v, addr in entry["versions"]:
            if v == version:
                return addr
        raise Reject("NoSuchVersion", f"{name} v{version}")

    @view
    def history(self, ctx, name):
        entry = ctx.get(("entry", name))
        ctx.require(entry is not None, "NoSuchName", str(name))
        return entry["versions"]

    @view
    def names(self, ctx):
        return ctx.get("names")

    @view
    def admins(self, ctx):
        return ctx.get("admins")


@register
class KvStore(Behavior):
    """Generic flat store: 32-byte keys to opaque byte-string values."""

    code_id = "kv-store"

    def init(self, ctx, writers=None):
        ctx.set("writers", _address_list(writers) if writers is not None else [ctx.owner])

    @mutating(Guard.member("writers"))
    def put(self, ctx, key, value):
        ctx.require(isinstance(key, bytes) and len(key) == 32, "BadKey", "keys are 32-byte digests")
        ctx.require(isinstance(value, bytes), "BadValue", "values are byte strings")
        ctx.store(b"d" + key, value)
        ctx.emit("Stored", key=key, size=len(value))

    @view
    def get(self, ctx, key):
        value = ctx.load(b"d" + bytes(key))
        ctx.require(value is not None, "NoSuchKey", bytes(key).hex())
        return value

    @view
    def has(self, ctx, key):
        return ctx.load(b"d" + bytes(key)) is not None

    @mutating(OWNER)
    def set_writers(self, ctx, writers):
        ctx.set("writers", _address_list(writers))

    @view
    def writers(self, ctx):
        return ctx.get("writers")


@register
class AppLogicV1(Behavior):
    """Application logic keeping all its data in a separate KvStore."""

    code_id = "app-logic"
    version = "1"

    def init(self, ctx, store):
        ctx.set("store", store)

    @mutating(OWNER)
    def record(self, ctx, key, value):
        ctx.call(ctx.get("store"), "put", key=key, value=value)

    @view
    def read(self, ctx, key):
        return ctx.view(ctx.get("store"), "get", key=key)

    @view
    def store(self, ctx):
        return ctx.get("store")


@register
class AppLogicV2(AppLogicV1):
    version = "2"

    @view
    def describe(self, ctx, key):
        value = ctx.view(ctx.get("store"), "get", key=key)
        return {"value": value, "size": len(value), "logic_version": self.version}


@register
class Factory(Behavior):
    """Instantiates independent contracts from a fixed set of templates."""

    code_id = "factory"

    def init(self, ctx, templates):
        ctx.require(isinstance(templates, list) and templates, "BadTemplates")
        for t in templates:
            try:
                resolve_code(t)
            except UnknownCodeId:
                raise Reject("UnknownTemplate", str(t)) from None
        ctx.set("templates", templates)
        ctx.set("instances", [])

    @mutating(ANYONE)
    def instantiate(self, ctx, template, params=None):
        ctx.require(template in ctx.get("templates"), "UnknownTemplate", str(template))
        child = ctx.deploy(template, None, ctx.value, ctx.caller, **(params or {}))
        ctx.set("instances", ctx.get("instances") + [child])
        ctx.emit("Instantiated", template=template, instance=child, requester=ctx.caller)
        return child

    @view
    def instances(self, ctx):
        return ctx.get("instances")

    @view
    def templates(self, ctx):
        return ctx.get("templates")


@register
class IncentiveJob(Behavior):
    """Pays a pre-funded reward to whoever first triggers due work.

    ``work`` is one of ``noop``, ``cleanup-expired`` (drop scheduled items
    whose expiry height has passed) or ``call`` (invoke ``function`` on
    ``target`` with ``args``).
    """

    code_id = "incentive-job"
    WORKS = ("noop", "cleanup-expired", "call")

    def init(self, ctx, due_height, reward, work="noop", target=None, function=None, args=None):
        ctx.require(isinstance(due_height, int) and due_height >= 0, "BadDueHeight")
        ctx.require(isinstance(reward, int) and reward > 0, "BadReward")
        ctx.require(work in self.WORKS, "BadWork", str(work))
        ctx.require(work != "call" or (target is not None and function), "BadWork",
                    "call work needs target and function")
        ctx.set("job", {"due": due_height, "reward": reward, "work": work, "target": target,
                        "function": function, "args": args or {}})
        ctx.set("done", False)
        ctx.set("items", [])

    @mutating(ANYONE)
    def fund(self, ctx):
        return ctx.balance

    @mutating(OWNER)
    def schedule(self, ctx, key, expiry):
        ctx.set("items", ctx.get("items") + [[key, expiry]])

    @mutating(ANYONE)
    def invoke(self, ctx):
        job = ctx.get("job")
        ctx.require(not ctx.get("done"), "AlreadyDone")
        ctx.require(ctx.height >= job["due"], "TooEarly", f"due at {job['due']}, now {ctx.height}")
        ctx.require(ctx.balance >= job["reward"], "InsufficientReward",
                    f"holds {ctx.balance}, reward {job['reward']}")
        result = None
        if job["work"] == "cleanup-expired":
            items = ctx.get("items")
            keep = [it for it in items if it[1] > ctx.height]
            ctx.set("items", keep)
            result = len(items) - len(keep)
        elif job["work"] == "call":
            result = ctx.call(job["target"], job["function"], **job["args"])
        ctx.set("done", True)
        ctx.send(ctx.caller, job["reward"])
        ctx.emit("JobExecuted", caller=ctx.caller, reward=job["reward"], work=job["work"])
        return {"reward": job["reward"], "result": result}

    @view
    def status(self, ctx):
        return {**ctx.get("job"), "done": ctx.get("done"), "balance": ctx.balance,
                "items": ctx.get("items")}


@register
class DepositEscrow(Behavior):
    """Holds a deposit until the arbiter rules: honest -> refund to the
    depositor, misbehaved -> pay the beneficiary."""

    code_id = "deposit-escrow"

    def init(self, ctx, beneficiary, arbiter):
        ctx.require(ctx.value > 0, "BadAmount", "deposit needs a positive attached value")
        ctx.set("depositor", ctx.owner)
        ctx.set("beneficiary", beneficiary)
        ctx.set("arbiter", arbiter)
        ctx.set("amount", ctx.value)
        ctx.set("state", "held")

    @mutating(Guard.stored("arbiter"))
    def resolve(self, ctx, verdict):
        ctx.require(ctx.get("state") == "held", "AlreadyResolved")
        ctx.require(verdict in ("honest", "misbehaved"), "BadVerdict", str(verdict))
        amount = ctx.get("amount")
        if verdict == "honest":
            to, state = ctx.get("depositor"), "refunded"
        else:
            to, state = ctx.get("beneficiary"), "slashed"
        ctx.set("state", state)
        ctx.send(to, amount)
        ctx.emit("DepositResolved", verdict=verdict, to=to, amount=amount)
        return state

    @view
    def status(self, ctx):
        return {"state": ctx.get("state"), "amount": ctx.get("amount"),
                "depositor": ctx.get("depositor"), "beneficiary": ctx.get("beneficiary")}


# -- operations ----------------------------------------------------------


def registry_deploy(chain, creator, admins=None) -> Address:
    args = {"admins": [Address(a) for a in admins]} if admins is not None else {}
    return deploy_contract(chain, creator, "registry", args)


def registry_register(chain, caller, registry, name, target, writer=None) -> int:
    args = {"name": name, "target": Address(target)}
    if writer is not None:
        args["writer"] = Address(writer)
    return call_contract(chain, caller, registry, "register", args).result


def registry_update(chain, caller, registry, name, new_target) -> int:
    return call_contract(chain, caller, registry, "update",
                         {"name": name, "target": Address(new_target)}).result


def registry_lookup(chain, registry, name, version=None) -> Address:
    return Address(query_state(chain, registry, "lookup", {"name": name, "version": version}))


def registry_history(chain, registry, name):
    return [(v, Address(a)) for v, a in query_state(chain, registry, "history", {"name": name})]


def kv_deploy(chain, creator, writers=None) -> Address:
    args = {"writers": [Address(w) for w in writers]} if writers is not None else {}
    return deploy_contract(chain, creator, "kv-store", args)


def kv_put(chain, caller, store, key, value: bytes):
    return call_contract(chain, caller, store, "put", {"key": Hash256(key), "value": bytes(value)})


def kv_get(chain, store, key) -> bytes:
    return query_state(chain, store, "get", {"key": bytes(key)})


def factory_deploy(chain, creator, templates) -> Address:
    return deploy_contract(chain, creator, "factory", {"templates": list(templates)})


def factory_instantiate(chain, caller, factory, template, params=None, value=0) -> Address:
    receipt = call_contract(chain, caller, factory, "instantiate",
                            {"template": template, "params": dict(params or {})}, value)
    return Address(receipt.result)


def incentive_deploy(chain, creator, due_height, reward, funding=0, work="noop",
                     target=None, function=None, args=None) -> Address:
    params = {"due_height": due_height, "reward": reward, "work": work}
    if work == "call":
        params.update(target=Address(target), function=function, args=dict(args or {}))
    return deploy_contract(chain, creator, "incentive-job", params, value=funding)


def incentive_invoke(chain, caller, job, check=True):
    return call_contract(chain, caller, job, "invoke", check=check)


def stake_deposit(chain, depositor, amount, beneficiary, arbiter) -> Address:
    return deploy_contract(chain, depositor, "deposit-escrow",
                           {"beneficiary": Address(beneficiary), "arbiter": Address(arbiter)},
                           value=amount)


def resolve_deposit(chain, arbiter, escrow, verdict, check=True):
    return call_contract(chain, arbiter, escrow, "resolve", {"verdict": verdict}, check=check)
