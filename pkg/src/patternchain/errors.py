"""Exception types shared by the ledger, the runtime and the pattern modules.

Every error carries a short string ``code``. Contract-level rejections are
reported through a failed receipt and surface as :class:`ContractError`
with the code the behavior raised; ledger-level rejections (before a
transaction reaches the mempool) have their own subclasses.
"""


class ChainError(Exception):
    code = "ChainError"

    def __init__(self, detail=""):
        self.detail = detail
        super().__init__(f"{self.code}: {detail}" if detail else self.code)


class EmptySeed(ChainError):
    code = "EmptySeed"


class SenderKeyMismatch(ChainError):
    code = "SenderKeyMismatch"


class BadSignature(ChainError):
    code = "BadSignature"


class BadNonce(ChainError):
    code = "BadNonce"


class OversizeTransaction(ChainError):
    code = "OversizeTransaction"


class EmbedTooLarge(ChainError):
    code = "EmbedTooLarge"


class InsufficientBalance(ChainError):
    code = "InsufficientBalance"


class InsufficientGas(ChainError):
    code = "InsufficientGas"


class UnknownCodeId(ChainError):
    code = "UnknownCodeId"


class NoSuchContract(ChainError):
    code = "NoSuchContract"


class NoSuchKey(ChainError):
    code = "NoSuchKey"


class BadKeyLength(ChainError):
    code = "BadKeyLength"


class AuthFailure(ChainError):
    code = "AuthFailure"


class ProfileError(ChainError, ValueError):
    code = "ProfileError"


class ContractError(ChainError):
    """A transaction was included but its execution was rejected."""

    def __init__(self, code, receipt=None, detail=""):
        self.code = code
        self.receipt = receipt
        super().__init__(detail)


class Overdraft(ChainError):
    code = "Overdraft"


class MissingSignature(ChainError):
    code = "MissingSignature"


class NoSuchAnchor(ChainError):
    code = "NoSuchAnchor"
