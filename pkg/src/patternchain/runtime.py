"""Contract runtime: built-in behaviors, permission guards and execution.

Contracts are native Python behaviors selected by ``code_id``. A
behavior only sees its own storage, the :class:`CallContext` and the
return values of calls it makes; there is no handle on anything outside
the chain. Every externally callable function must declare either
``@view`` or ``@mutating(guard)``; registration fails otherwise.
"""

import inspect
from dataclasses import dataclass
from types import MappingProxyType

from .codec import decode_value, encode_value, skey, u64
from .crypto import Address, hash_data, verify_signature
from .errors import ContractError, NoSuchContract, NoSuchKey, UnknownCodeId
from .state import ContractCode, ContractInstance, InsufficientFunds, WorldState
from .tx import Call, Deploy, Event, Receipt, Transfer

__all__ = [
    "GasSchedule",
    "GAS",
    "MAX_CALL_DEPTH",
    "Reject",
    "Guard",
    "ANYONE",
    "OWNER",
    "mutating",
    "view",
    "Behavior",
    "register",
    "resolve_code",
    "registered_behaviors",
    "CallContext",
    "Executor",
    "deploy_contract",
    "call_contract",
    "query_state",
    "terminate_contract",
    "expect_success",
]

MAX_CALL_DEPTH = 64
ZERO_ADDRESS = Address(bytes(20))


@dataclass(frozen=True)
class GasSchedule:
    base_tx: int = 21000
    per_payload_byte: int = 68
    storage_write: int = 20000
    storage_read: int = 200
    contract_call: int = 700

    def intrinsic(self, payload_len: int) -> int:
        return self.base_tx + self.per_payload_byte * payload_len


GAS = GasSchedule()


class Reject(Exception):
    """Raised inside a behavior to abort the current call frame."""

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)


class OutOfGas(Reject):
    def __init__(self):
        super().__init__("InsufficientGas", "out of gas")


class GasMeter:
    def __init__(self, limit: int | None):
        self.limit = limit
        self.used = 0

    def charge(self, amount: int):
        self.used += amount
        if self.limit is not None and self.used > self.limit:
            self.used = self.limit
            raise OutOfGas()


# -- guards --------------------------------------------------------------


class Guard:
    """Caller admission check evaluated before a function body runs."""

    def __init__(self, label: str, predicate, code: str = "NotAuthorized"):
        self.label = label
        self.code = code
        self._predicate = predicate

    def admits(self, ctx, args) -> bool:
        return bool(self._predicate(ctx, args))

    def __repr__(self):
        return f"Guard({self.label})"

    @classmethod
    def anyone(cls):
        return cls("anyone", lambda ctx, args: True)

    @classmethod
    def owner(cls):
        return cls("owner-only", lambda ctx, args: ctx.owner is not None and ctx.caller == ctx.owner)

    @classmethod
    def stored(cls, key: str):
        """Caller must equal the address stored under ``key``."""
        return cls(f"stored:{key}", lambda ctx, args: ctx.caller == ctx.get(key))

    @classmethod
    def member(cls, key: str, code: str = "NotAuthorized"):
        """Caller must appear in the address list stored under ``key``."""
        return cls(f"member:{key}", lambda ctx, args: ctx.caller in (ctx.get(key) or ()), code)

    @classmethod
    def where(cls, label: str, predicate, code: str = "NotAuthorized"):
        return cls(label, predicate, code)


ANYONE = Guard.anyone()
OWNER = Guard.owner()


def mutating(guard: Guard):
    if not isinstance(guard, Guard):
        raise TypeError("mutating functions must declare an explicit Guard")

    def wrap(fn):
        fn._guard = guard
        return fn

    return wrap


def view(fn):
    fn._view = True
    return fn


@dataclass(frozen=True)
class _Entry:
    func: object
    guard: Guard | None
    is_view: bool
    signature: inspect.Signature


class Behavior:
    """Base class for built-in contract behaviors."""

    code_id = ""
    version = "1"
    terminate_guard = OWNER
    functions = MappingProxyType({})

    def init(self, ctx, **args):
        if args:
            raise Reject("BadArguments", f"unexpected constructor args {sorted(args)}")


_REGISTRY: dict[tuple[str, str], Behavior] = {}
_LATEST: dict[str, str] = {}
_RESERVED = {"init", "terminate"}


def register(cls):
    """Class decorator adding a behavior to the code registry."""
    if not cls.code_id:
        raise TypeError(f"{cls.__name__} has no code_id")
    if not isinstance(cls.terminate_guard, Guard):
        raise TypeError(f"{cls.__name__}.terminate_guard must be a Guard")
    functions = {}
    for klass in reversed(cls.__mro__):
        if klass is object or klass is Behavior:
            continue
        for name, attr in vars(klass).items():
            if name.startswith("_") or name in _RESERVED or not inspect.isfunction(attr):
                continue
            guard = getattr(attr, "_guard", None)
            is_view = getattr(attr, "_view", False)
            if guard is None and not is_view:
                raise TypeError(
                    f"{cls.code_id}.{name} is neither @view nor @mutating(guard)"
                )
            functions[name] = _Entry(attr, guard, is_view, inspect.signature(attr))
    key = (cls.code_id, cls.version)
    if key in _REGISTRY:
        raise TypeError(f"behavior {cls.code_id} v{cls.version} registered twice")
    inst = cls()
    inst.functions = MappingProxyType(functions)
    _REGISTRY[key] = inst
    _LATEST[cls.code_id] = cls.version
    return cls


def resolve_code(code_id: str, version: str | None = None) -> Behavior:
    if isinstance(code_id, ContractCode):
        code_id, version = code_id.code_id, code_id.version or version
    version = version or _LATEST.get(code_id)
    try:
        return _REGISTRY[(code_id, version)]
    except KeyError:
        raise UnknownCodeId(f"{code_id} v{version}") from None


def registered_behaviors():
    return dict(_REGISTRY)


# -- execution -----------------------------------------------------------


def _normalize(args):
    return decode_value(encode_value(args or {}))


class CallContext:
    """What a running behavior can see and do."""

    def __init__(self, executor, inst: ContractInstance, caller, value: int, readonly: bool, depth: int):
        self._ex = executor
        self._inst = inst
        self.caller = Address(caller)
        self.value = value
        self.readonly = readonly
        self.depth = depth

    this = property(lambda self: self._inst.address)
    owner = property(lambda self: self._inst.owner)
    height = property(lambda self: self._ex.height)
    tick = property(lambda self: self._ex.tick)
    balance = property(lambda self: self._inst.balance)
    code = property(lambda self: self._inst.code)

    hash = staticmethod(hash_data)
    verify_signature = staticmethod(verify_signature)

    @staticmethod
    def require(condition, code: str, detail: str = ""):
        if not condition:
            raise Reject(code, detail)

    # storage
    def load(self, key: bytes):
        self._ex.meter.charge(self._ex.schedule.storage_read)
        return self._inst.storage.get(key)

    def store(self, key: bytes, value: bytes | None):
        if self.readonly:
            raise Reject("ReadOnly", "storage write in a read-only call")
        self._ex.meter.charge(self._ex.schedule.storage_write)
        self._ex.state.storage_set(self._inst, key, value)

    @staticmethod
    def _key(key):
        return skey(*key) if isinstance(key, tuple) else skey(key)

    def get(self, key, default=None):
        raw = self.load(self._key(key))
        return default if raw is None else decode_value(raw)

    def set(self, key, value):
        self.store(self._key(key), None if value is None else encode_value(value))

    # effects
    def emit(self, name: str, /, **payload):
        if not self.readonly:
            self._ex.events.append(Event(self.this, name, encode_value(payload)))

    def send(self, to, amount: int):
        if self.readonly:
            raise Reject("ReadOnly", "value transfer in a read-only call")
        self.require(isinstance(amount, int) and amount >= 0, "BadAmount")
        target = self._ex.state.contracts.get(to)
        if target is not None and target.terminated:
            raise Reject("ContractTerminated", f"{Address(to)}")
        try:
            self._ex.state.move(self.this, Address(to), amount)
        except InsufficientFunds as e:
            raise Reject("InsufficientBalance", str(e)) from None

    def call(self, target, function: str, value: int = 0, /, **args):
        if self.readonly and value:
            raise Reject("ReadOnly", "value transfer in a read-only call")
        return self._ex.call(self.this, Address(target), function, _normalize(args), value,
                             self.depth + 1, self.readonly)

    def view(self, target, function: str, /, **args):
        return self._ex.call(self.this, Address(target), function, _normalize(args), 0,
                             self.depth + 1, True)

    def deploy(self, code_id: str, version: str | None = None, value: int = 0, owner=None, /, **args):
        if self.readonly:
            raise Reject("ReadOnly", "deploy in a read-only call")
        nonce = self._inst.nonce
        self._ex.state.bump_nonce(self.this)
        return self._ex.deploy(self.this, code_id, version, _normalize(args), value,
                               owner, nonce, self.depth + 1)


def contract_address(creator: bytes, nonce: int) -> Address:
    return Address(hash_data(bytes(creator) + u64(nonce))[-20:])


class Executor:
    """Applies transactions to a :class:`WorldState`."""

    def __init__(self, state: WorldState, profile, schedule: GasSchedule = GAS):
        self.state = state
        self.profile = profile
        self.schedule = schedule
        self.height = 0
        self.tick = 0
        self.meter = GasMeter(None)
        self.events = []

    def apply(self, tx, gas_price: int) -> Receipt:
        st = self.state
        sender = tx.sender
        intrinsic = self.schedule.intrinsic(len(tx.payload_bytes))
        self.meter = GasMeter(tx.gas_limit)
        self.events = []
        st.bump_nonce(sender)
        reserve = tx.gas_limit * gas_price
        if st.balance_of(sender) < reserve + tx.value:
            fee = min(st.balance_of(sender), intrinsic * gas_price)
            st.debit(sender, fee)
            st.add_fees(fee)
            st.commit()
            return Receipt(tx.tx_id, False, intrinsic, error="InsufficientBalance",
                           detail="cannot cover gas reserve and attached value")
        st.debit(sender, reserve)
        self.meter.charge(intrinsic)
        checkpoint = st.checkpoint()
        success, error, detail, ret = True, None, "", b""
        try:
            ret = encode_value(self._dispatch(tx))
        except Reject as e:
            st.revert(checkpoint)
            self.events = []
            success, error, detail = False, e.code, e.detail
        used = self.meter.used
        st.credit(sender, (tx.gas_limit - used) * gas_price)
        st.add_fees(used * gas_price)
        st.commit()
        return Receipt(tx.tx_id, success, used, ret, list(self.events), error, detail)

    def _dispatch(self, tx):
        p = tx.payload
        if isinstance(p, Transfer):
            target = self.state.contracts.get(p.to)
            if target is not None and target.terminated:
                raise Reject("ContractTerminated", str(p.to))
            try:
                self.state.move(tx.sender, p.to, p.amount)
            except InsufficientFunds as e:
                raise Reject("InsufficientBalance", str(e)) from None
            return None
        if isinstance(p, Deploy):
            return self.deploy(tx.sender, p.code_id, p.version, _normalize(p.args), p.value,
                               None, tx.nonce, 1)
        if isinstance(p, Call):
            return self.call(tx.sender, p.contract, p.function, _normalize(p.args), p.value, 1, False)
        raise Reject("BadPayload", type(p).__name__)

    def _bind(self, entry_sig, ctx, args):
        try:
            entry_sig.bind(None, ctx, **args)
        except TypeError as e:
            raise Reject("BadArguments", str(e)) from None

    def deploy(self, creator, code_id, version, args, value, owner, nonce, depth) -> Address:
        try:
            behavior = resolve_code(code_id, version or None)
        except UnknownCodeId as e:
            raise Reject("UnknownCodeId", e.detail) from None
        allow = getattr(self.profile, "contract_allowlist", None)
        if allow is not None and code_id not in allow:
            raise Reject("CodeNotAllowed", f"{code_id} on {self.profile.name}")
        if depth > MAX_CALL_DEPTH:
            raise Reject("DepthLimit")
        addr = contract_address(creator, nonce)
        if addr in self.state.contracts:
            raise Reject("AddressCollision", str(addr))
        self.meter.charge(self.schedule.contract_call)
        inst = ContractInstance(addr, ContractCode(behavior.code_id, behavior.version),
                                Address(owner) if owner else Address(creator), created_at=self.height)
        self.state.create_contract(inst)
        try:
            self.state.move(Address(creator), addr, value)
        except InsufficientFunds as e:
            raise Reject("InsufficientBalance", str(e)) from None
        ctx = CallContext(self, inst, creator, value, False, depth)
        self._bind(inspect.signature(type(behavior).init), ctx, args)
        try:
            behavior.init(ctx, **args)
        except OutOfGas:
            raise
        except Reject as e:
            raise Reject("ConstructorRejected", e.code + (f": {e.detail}" if e.detail else "")) from None
        return addr

    def call(self, caller, addr, function, args, value, depth, readonly, allow_terminated=False):
        if depth > MAX_CALL_DEPTH:
            raise Reject("DepthLimit")
        st = self.state
        inst = st.contracts.get(addr)
        if inst is None:
            raise Reject("NoSuchContract", str(Address(addr)))
        if inst.terminated and not allow_terminated:
            raise Reject("ContractTerminated", str(Address(addr)))
        behavior = resolve_code(inst.code)
        self.meter.charge(self.schedule.contract_call)
        checkpoint = st.checkpoint()
        n_events = len(self.events)
        try:
            if value:
                try:
                    st.move(Address(caller), inst.address, value)
                except InsufficientFunds as e:
                    raise Reject("InsufficientBalance", str(e)) from None
            ctx = CallContext(self, inst, caller, value, readonly, depth)
            if function == "terminate":
                if readonly:
                    raise Reject("ReadOnly")
                return self._terminate(ctx, behavior, inst)
            entry = behavior.functions.get(function)
            if entry is None:
                raise Reject("NoSuchFunction", f"{inst.code.code_id}.{function}")
            if readonly and not entry.is_view:
                raise Reject("ReadOnly", f"{function} is not a view")
            self._bind(entry.signature, ctx, args)
            if entry.guard is not None and not entry.guard.admits(ctx, args):
                raise Reject(entry.guard.code, f"{function} requires {entry.guard.label}")
            return entry.func(behavior, ctx, **args)
        except Reject:
            st.revert(checkpoint)
            del self.events[n_events:]
            raise

    def _terminate(self, ctx, behavior, inst):
        if not behavior.terminate_guard.admits(ctx, {}):
            raise Reject("NotAuthorized", f"terminate requires {behavior.terminate_guard.label}")
        swept = inst.balance
        beneficiary = inst.owner or ctx.caller
        self.state.move(inst.address, beneficiary, swept)
        self.state.set_terminated(inst)
        ctx.emit("Terminated", by=ctx.caller, swept=swept, to=beneficiary)
        return swept

    def run_view(self, addr, function, args, height, tick):
        self.height, self.tick = height, tick
        saved_meter, saved_events = self.meter, self.events
        self.meter, self.events = GasMeter(None), []
        checkpoint = self.state.checkpoint()
        try:
            return self.call(ZERO_ADDRESS, addr, function, _normalize(args), 0, 1, True,
                             allow_terminated=True)
        finally:
            self.state.revert(checkpoint)
            self.meter, self.events = saved_meter, saved_events


# -- chain-level operations ----------------------------------------------


def expect_success(receipt: Receipt) -> Receipt:
    if not receipt.success:
        raise ContractError(receipt.error, receipt, receipt.detail)
    return receipt


def deploy_contract(chain, deployer, code, args=None, value=0, gas_limit=None) -> Address:
    """Deploy a built-in behavior and return the new contract address."""
    if isinstance(code, str):
        code = ContractCode(code)
    behavior = resolve_code(code.code_id, code.version or None)
    receipt = chain.transact(
        deployer, Deploy(behavior.code_id, behavior.version, dict(args or {}), value), gas_limit
    )
    expect_success(receipt)
    return Address(receipt.result)


def call_contract(chain, caller, contract, function, args=None, value=0, gas_limit=None, check=True) -> Receipt:
    receipt = chain.transact(caller, Call(Address(contract), function, dict(args or {}), value), gas_limit)
    return expect_success(receipt) if check else receipt


def query_state(chain, contract, key_or_function, args=None):
    """Read a raw storage slot (bytes key) or run a view function (str name).

    Free and side-effect free. Terminated contracts stay readable.
    """
    inst = chain.state.contracts.get(contract)
    if inst is None:
        raise NoSuchContract(str(Address(contract)))
    if isinstance(key_or_function, (bytes, bytearray)):
        try:
            return inst.storage[bytes(key_or_function)]
        except KeyError:
            raise NoSuchKey(bytes(key_or_function).hex()) from None
    try:
        return chain.executor.run_view(inst.address, key_or_function, args or {}, chain.height, chain.tick)
    except Reject as e:
        if e.code == "NoSuchKey":
            raise NoSuchKey(e.detail) from None
        raise ContractError(e.code, None, e.detail) from None


def terminate_contract(chain, caller, contract, check=True) -> Receipt:
    return call_contract(chain, caller, contract, "terminate", check=check)
