"""Deterministic blockchain simulator with reference implementations of
blockchain application design patterns."""

from .crypto import Address, Hash256, KeyPair, hash_data, verify_signature
from .errors import ChainError, ContractError
from .ledger import BITCOIN_LIKE, ETHEREUM_LIKE, Block, Chain, ChainProfile, get_profile
from .runtime import call_contract, deploy_contract, query_state, terminate_contract
from .state import ContractCode
from .tx import Call, Deploy, Receipt, Transaction, Transfer, sign_tx, verify_tx

from . import security, structural, data, oracles  # noqa: E402,F401  register behaviors

__version__ = "0.1.0"

__all__ = [
    "Address", "Hash256", "KeyPair", "hash_data", "verify_signature",
    "ChainError", "ContractError",
    "BITCOIN_LIKE", "ETHEREUM_LIKE", "Block", "Chain", "ChainProfile", "get_profile",
    "call_contract", "deploy_contract", "query_state", "terminate_contract",
    "ContractCode", "Call", "Deploy", "Receipt", "Transaction", "Transfer", "sign_tx", "verify_tx",
    "security", "structural", "data", "oracles",
]
