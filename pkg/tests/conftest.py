from __future__ import annotations

import random
from itertools import combinations

import pytest
from hypothesis import strategies as st

from erasable_ledger import (
    Identity,
    Transaction,
    canonicalize_scope,
    make_genesis,
    place_transaction,
)

ORG_X = Identity.org("did:example:org-x")
ORG_Y = Identity.org("did:example:org-y")
ORG_Z = Identity.org("did:example:org-z")
P_A = Identity.person("did:example:p-a")
P_B = Identity.person("did:example:p-b")
P_C = Identity.person("did:example:p-c")

DEMO_FOUR = (ORG_X, ORG_Y, P_A, P_B)
UNIVERSE6 = (ORG_X, ORG_Y, ORG_Z, P_A, P_B, P_C)


def scope(*members):
    return canonicalize_scope(members)


def tx(tx_id, members, payload=None, at=0):
    payload = payload if payload is not None else f"payload:{tx_id}".encode()
    return Transaction(tx_id, payload, scope(*members), at)


def build_tree(txs, network_id="demo"):
    tree = make_genesis(network_id, 0)
    for i, t in enumerate(txs, start=1):
        tree, _ = place_transaction(tree, t, i)
    return tree


def all_subsets(items):
    return [c for r in range(len(items) + 1) for c in combinations(items, r)]


def full_demo_tree():
    """One transaction in each of the 16 scopes over {Org_x, Org_y, p_a, p_b}."""
    return build_tree([tx(f"t{i:02d}", s) for i, s in enumerate(all_subsets(DEMO_FOUR))])


def random_txs(rng: random.Random, n_identities: int = 6, max_txs: int = 40):
    universe = UNIVERSE6[:n_identities]
    out = []
    for i in range(rng.randint(1, max_txs)):
        members = [m for m in universe if rng.random() < 0.4]
        payload = rng.randbytes(rng.randint(0, 24))
        out.append(Transaction(f"r{i}", payload, canonicalize_scope(members), i))
    return out


@st.composite
def tx_streams(draw, max_txs=40):
    """Lists of transactions with scopes drawn from a 6-identity universe."""
    n = draw(st.integers(min_value=1, max_value=max_txs))
    txs = []
    for i in range(n):
        members = draw(st.lists(st.sampled_from(UNIVERSE6), max_size=6))
        payload = draw(st.binary(max_size=16))
        txs.append(Transaction(f"h{i}", payload, canonicalize_scope(members), i))
    return txs


@pytest.fixture
def demo_tree():
    return full_demo_tree()


# (criterion number, title, passed, seconds) rows recorded by test_acceptance
ACCEPTANCE_RESULTS: list[tuple[int, str, bool, float]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, passed, secs in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"AC{n} {'PASS' if passed else 'FAIL'} {title} ({secs:.2f}s)")
