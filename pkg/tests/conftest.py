import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from chainport.chain import Bytes, Chain, NumberList, confirm_block, submit_entry  # noqa: E402

FIXTURE_CHAIN_ID = bytes(range(16))


def build_chain(n_blocks, entries_per_block=2, chain_id=FIXTURE_CHAIN_ID, rng=None):
    """Chain of ``n_blocks`` with a deterministic mix of payloads."""
    chain = Chain(chain_id)
    for h in range(n_blocks):
        for i in range(entries_per_block if h else 0):
            key = f"k{(h * 7 + i) % 5}"
            if rng is not None:
                payload = Bytes(rng.randbytes(rng.randint(0, 12))) if rng.random() < 0.5 else NumberList(
                    [rng.randint(-(2**63), 2**63 - 1) for _ in range(rng.randint(0, 3))]
                )
            else:
                payload = Bytes(bytes([h, i])) if i % 2 else NumberList([h, -i])
            submit_entry(chain, key, payload, h * 10 + i)
        confirm_block(chain, h * 10)
    return chain


@pytest.fixture
def chain10():
    return build_chain(10)


def make_app(app_id="app", design="A", change_verification=True, chain=None, replicas=3, registry=None):
    """Ledger on ``chain`` (a fresh chain with a genesis block by default)."""
    from chainport.ledger import AppConfig, StorageDesign, create_app
    from chainport.store import ReplicaSet

    if chain is None:
        chain = Chain(FIXTURE_CHAIN_ID)
        confirm_block(chain, 0)
    config = AppConfig(app_id, StorageDesign(design), change_verification)
    store = ReplicaSet(replicas, config.expected_retention) if design == "B" else None
    return create_app(config, chain, store, registry)


class Clock:
    def __init__(self, start=1):
        self.now = start

    def __call__(self):
        self.now += 1
        return self.now


@pytest.fixture
def clock():
    return Clock()


def fresh_chain(tag, wall_clock=0):
    """Chain with a genesis block and a one-byte-derived id."""
    chain = Chain(bytes([tag]) * 16)
    confirm_block(chain, wall_clock)
    return chain


def run_workload(ledger, rng, n_puts, n_keys, clock, oracle=None, numeric=False):
    """Random puts; mirrors each into ``oracle`` (a ReplayOracle) when given."""
    from chainport.ledger import encode_delta, put_state

    for _ in range(n_puts):
        key = f"key{rng.randrange(n_keys)}"
        value = encode_delta(rng.randint(-1000, 1000)) if numeric else rng.randbytes(rng.randint(0, 8))
        put_state(ledger, key, value, clock())
        if oracle is not None:
            oracle.put(ledger.app_id, key, value)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
