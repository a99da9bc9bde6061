import sys

import pytest

from patternchain import Chain

FUNDS = 10**9


def funded(chain, name, amount=FUNDS):
    key, addr = chain.create_account(name.encode())
    if amount:
        chain.mint(addr, amount)
    return key


@pytest.fixture
def chain():
    return Chain("ethereum-like")


@pytest.fixture
def btc():
    return Chain("bitcoin-like")


@pytest.fixture
def alice(chain):
    return funded(chain, "alice")


@pytest.fixture
def bob(chain):
    return funded(chain, "bob")


@pytest.fixture
def carol(chain):
    return funded(chain, "carol")


@pytest.fixture
def dave(chain):
    return funded(chain, "dave")


@pytest.fixture
def mallory(chain):
    return funded(chain, "mallory")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        status, title, seconds = mod.RESULTS[n]
        terminalreporter.line(f"criterion {n:2d}: {status}  {title} ({seconds:.2f}s)")
