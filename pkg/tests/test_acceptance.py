"""Exit criteria. Each test prints one PASS/FAIL line; the pytest summary repeats them.

Run alone with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
"""

import base64
import random
import time
from contextlib import contextmanager
from itertools import combinations
from pathlib import Path

import pytest

from erasable_ledger import (
    EndorsementPolicy,
    EndorserStrategy,
    Identity,
    PolicyMode,
    Vote,
    VoteDecision,
    apply_deletion,
    chains_affected_by,
    evaluate,
    max_branch_count,
    tree_bytes,
    verify_tree,
)
from erasable_ledger.consensus import DeletionRequest
from erasable_ledger.linear import LinearLedger
from erasable_ledger.scenario import SubmitTx, load_scenario
from erasable_ledger.simnet import check_convergence, run_scenario
from erasable_ledger.storage import save_replica

from conftest import (
    ACCEPTANCE_RESULTS,
    DEMO_FOUR,
    ORG_X,
    ORG_Y,
    P_A,
    all_subsets,
    build_tree,
    full_demo_tree,
    random_txs,
    tx,
)

CORPUS = Path(__file__).resolve().parent.parent / "scenarios"


@contextmanager
def criterion(n: int, title: str, limit_s: float):
    start = time.perf_counter()
    passed = False
    try:
        yield
        elapsed = time.perf_counter() - start
        assert elapsed < limit_s, f"took {elapsed:.2f}s, limit {limit_s}s"
        passed = True
    finally:
        elapsed = time.perf_counter() - start
        ACCEPTANCE_RESULTS.append((n, title, passed, elapsed))
        print(f"\nAC{n} {'PASS' if passed else 'FAIL'} {title} ({elapsed:.2f}s)")


def powerset_count(n: int) -> int:
    items = [Identity.person(f"did:oracle:i{i}") for i in range(n)]
    return sum(1 for r in range(n + 1) for _ in combinations(items, r))


def test_ac1_branch_count():
    with criterion(1, "branch count 2^(k+m) vs powerset oracle, k+m <= 16", 1.0):
        assert max_branch_count(2, 2) == 16
        sizes = {n: powerset_count(n) for n in range(17)}
        for k in range(17):
            for m in range(17 - k):
                assert max_branch_count(k, m) == sizes[k + m], (k, m)


def test_ac2_erasure_classification():
    with criterion(2, "16 scopes, erase p_a -> 8 unaffected / 1 unilateral / 7 consensus", 1.0):
        tree = full_demo_tree()
        assert len(tree.chains) == 16
        part = chains_affected_by(tree, P_A)
        assert (len(part.unaffected), len(part.unilateral), len(part.consensus_required)) == (8, 1, 7)


def _chain_image(chain) -> list[tuple[bytes, bytes]]:
    return [(b.canonical(), b.block_hash) for b in chain.iter_blocks()]


def test_ac3_deletion_isolation():
    with criterion(3, "deletion isolation over 500 random trees", 30.0):
        rng = random.Random(0xC0FFEE)
        violations = 0
        deletions = 0
        for i in range(500):
            tree = build_tree(random_txs(rng, n_identities=6, max_txs=40))
            images = {k: _chain_image(c) for k, c in tree.chains.items()}
            for key in sorted(tree.chains):
                keep = bool(rng.getrandbits(1))
                after = apply_deletion(tree, key, keep_subroot=keep)
                deletions += 1
                if not verify_tree(after).ok:
                    violations += 1
                for other, img in images.items():
                    if other != key and _chain_image(after.chains[other]) != img:
                        violations += 1
                if keep and after.chains[key].blocks:
                    violations += 1
                if not keep and key in after.chains:
                    violations += 1
        assert deletions >= 500
        assert violations == 0


MODES = {
    "silence_is_veto": EndorsementPolicy(PolicyMode.SILENCE_IS_VETO, 10),
    "silence_is_agreement": EndorsementPolicy(PolicyMode.SILENCE_IS_AGREEMENT, 10),
}
CHOICES = [None, "approve", "veto"]


def expected_state(x, y, mode, after_deadline):
    """Truth table written from the rules, not from the implementation."""
    if "veto" in (x, y):
        return "vetoed"
    if x == y == "approve":
        return "approved"
    if not after_deadline:
        return "pending"
    return "vetoed" if mode == "silence_is_veto" else "approved"


def test_ac4_consensus_semantics():
    with criterion(4, "consensus truth table: votes x modes x deadline", 1.0):
        rows = 0
        for x in CHOICES:
            for y in CHOICES:
                for mode, policy in MODES.items():
                    for after in (False, True):
                        req = DeletionRequest("r", P_A, b"\x00" * 32, True,
                                              EndorserStrategy.SCOPE_PLUS_GUARDIANS, policy,
                                              frozenset({ORG_X, ORG_Y}), 0)
                        votes = [Vote(org, "r", VoteDecision(c), 2) for org, c in ((ORG_X, x), (ORG_Y, y)) if c]
                        now = 11 if after else 5
                        got = evaluate(req, votes, now).state.value
                        assert got == expected_state(x, y, mode, after), (x, y, mode, after)
                        rows += 1
        assert rows == 36


def test_ac5_linear_baseline_contrast():
    with criterion(5, "linear chain breaks on p_a removal, context chains do not", 1.0):
        txs = [tx(f"t{i:02d}", s, at=i) for i, s in enumerate(all_subsets(DEMO_FOUR), start=1)]
        linear = LinearLedger.build("demo", txs)
        assert linear.verify()
        cut = linear.without(lambda t: P_A in t.declared_scope)
        assert len(cut.blocks) == len(linear.blocks) - 8
        assert not cut.verify() and len(cut.broken_links()) >= 1

        tree = build_tree(txs)
        part = chains_affected_by(tree, P_A)
        for key in part.unilateral + part.consensus_required:
            tree = apply_deletion(tree, key, keep_subroot=False)
        assert verify_tree(tree).ok
        assert len(tree.chains) == 8


def test_ac6_replication_and_convergence():
    with criterion(6, "4-node replication: approved erasure and veto_all endorser", 5.0):
        _, nodes = run_scenario(load_scenario(CORPUS / "erase_approved.json"))
        assert len(nodes) == 4
        assert check_convergence(nodes)
        assert len({tree_bytes(n.replica) for n in nodes}) == 1
        for n in nodes:
            assert verify_tree(n.replica).ok
            assert not any(P_A in c.scope for c in n.replica.chains.values())

        _, vnodes = run_scenario(load_scenario(CORPUS / "erase_vetoed.json"))
        assert check_convergence(vnodes)
        for n in vnodes:
            kept = [c for c in n.replica.chains.values() if P_A in c.scope]
            assert kept and all(len(c.scope) > 1 and c.blocks for c in kept)
            assert len(kept) == 4


def test_ac7_physical_erasure(tmp_path):
    with criterion(7, "erased payloads and tx_ids absent from replica directories", 5.0):
        scenario = load_scenario(CORPUS / "erase_approved.json")
        erased = [e for e in scenario.events if isinstance(e, SubmitTx) and P_A in e.scope]
        assert erased
        _, nodes = run_scenario(scenario)
        needles = []
        for e in erased:
            needles += [e.payload, e.payload.hex().encode(), base64.b64encode(e.payload), e.tx_id.encode()]
        hits = 0
        for n in nodes:
            root = tmp_path / n.node_id
            save_replica(n.replica, n.journal, root)
            for f in root.rglob("*"):
                if f.is_file():
                    data = f.read_bytes()
                    hits += sum(data.count(x) for x in needles)
        assert hits == 0


def test_ac8_determinism():
    with criterion(8, "same scenario + seed -> byte-identical traces (all corpus)", 10.0):
        paths = sorted(CORPUS.glob("*.json"))
        assert len(paths) >= 5
        for p in paths:
            s = load_scenario(p)
            assert run_scenario(s)[0].to_jsonl() == run_scenario(s)[0].to_jsonl(), p.name


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
