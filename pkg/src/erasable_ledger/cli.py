"""Command-line front end.

    erasable-ledger run SCENARIO [--trace PATH] [--out DIR] [--seed N]
    erasable-ledger verify REPLICA_DIR
    erasable-ledger demo [--policy silence-veto|silence-agree] [--scopes N]
    erasable-ledger branches K M

Exit codes: 0 success, 1 verification failure or replica divergence,
2 invalid input. Set ERASABLE_LEDGER_LOG (debug, info, warning) for logs
on stderr.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import os
import sys
from pathlib import Path
from typing import Sequence, TextIO

from .consensus import (
    EndorsementPolicy,
    EndorserStrategy,
    ErasureMode,
    GuardianRegistry,
    Membership,
    PolicyMode,
    select_endorsers,
)
from .core import Identity, Transaction, make_genesis
from .errors import CorruptLayout, IntegrityFailure, OutOfRange, ScenarioError
from .linear import LinearLedger
from .placement import canonicalize_scope, chains_affected_by, max_branch_count, place_transaction
from .scenario import APPROVE_ALL, SILENT, Erase, NetworkConfig, NodeSpec, Scenario, SubmitTx, load_scenario
from .simnet import check_convergence, decisions, run_scenario
from .storage import load_replica, save_replica

log = logging.getLogger("erasable_ledger")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

POLICY_FLAGS = {"silence-veto": PolicyMode.SILENCE_IS_VETO, "silence-agree": PolicyMode.SILENCE_IS_AGREEMENT}


def cmd_run(scenario_path: str, trace_out: str | None, out_dir: str | None,
            seed: int | None = None, stdout: TextIO = sys.stdout) -> int:
    try:
        scenario = load_scenario(scenario_path)
    except FileNotFoundError:
        print(f"error: no scenario file {scenario_path}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"error: {scenario_path}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    trace, nodes = run_scenario(scenario, seed=seed)
    if trace_out:
        Path(trace_out).write_text(trace.to_jsonl(), encoding="ascii")
    if out_dir:
        for node in nodes:
            save_replica(node.replica, node.journal, Path(out_dir) / node.node_id)

    converged = check_convergence(nodes)
    outcome = decisions(trace)
    print(f"events: {len(trace.records)} trace records", file=stdout)
    for state in ("approved", "vetoed"):
        print(f"{state}: {sum(1 for v in outcome.values() if v == state)}", file=stdout)
    for node in nodes:
        print(f"node {node.node_id}: {len(node.replica.chains)} chains", file=stdout)
    print(f"convergence: {'ok' if converged else 'DIVERGED'}", file=stdout)
    return EXIT_OK if converged else EXIT_FAIL


def cmd_verify(replica_dir: str, stdout: TextIO = sys.stdout) -> int:
    if not Path(replica_dir).is_dir():
        print(f"error: no replica directory {replica_dir}", file=sys.stderr)
        return EXIT_USAGE
    try:
        tree, journal = load_replica(replica_dir)
    except CorruptLayout as exc:
        print(f"corrupt: {exc}", file=stdout)
        return EXIT_FAIL
    except IntegrityFailure as exc:
        print(f"FAILED: {exc}", file=stdout)
        for v in exc.report.violations:
            print(f"  {v}", file=stdout)
        return EXIT_FAIL
    n_blocks = sum(len(c.blocks) for c in tree.chains.values())
    print(f"ok: {len(tree.chains)} chains, {n_blocks} blocks, {len(journal)} journal entries", file=stdout)
    return EXIT_OK


def cmd_branches(k: int, m: int, stdout: TextIO = sys.stdout) -> int:
    try:
        print(max_branch_count(k, m), file=stdout)
    except OutOfRange as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


# -- demo -----------------------------------------------------------------

ORG_X = Identity.org("did:example:org-x")
ORG_Y = Identity.org("did:example:org-y")
P_A = Identity.person("did:example:p-a")
P_B = Identity.person("did:example:p-b")
DEMO_NAMES = {ORG_X: "Org_x", ORG_Y: "Org_y", P_A: "p_a", P_B: "p_b"}
DEMO_GUARDIANS = GuardianRegistry({P_A: frozenset({ORG_X}), P_B: frozenset({ORG_Y})})
DEMO_TIMEOUT = 10


def demo_scopes(count: int | None = None) -> list[tuple[Identity, ...]]:
    """Scopes to materialize, B_1's ``{p_a, p_b}`` first, then by size."""
    universe = sorted(DEMO_NAMES)
    subsets = [c for r in range(len(universe) + 1) for c in itertools.combinations(universe, r)]
    b1 = (P_A, P_B)
    subsets.remove(b1)
    ordered = [b1] + subsets
    return ordered if count is None else ordered[:count]


def _label(members) -> str:
    return "{" + ", ".join(DEMO_NAMES[m] for m in members) + "}"


def demo_scenario(policy: PolicyMode, count: int | None = None) -> Scenario:
    """Two organizations, two persons; Org_y stays silent on every vote."""
    events: list = []
    for i, members in enumerate(demo_scopes(count)):
        tx_id = "B_1" if i == 0 else f"tx-{i:02d}"
        payload = (b"transfer p_a -> p_b" if i == 0
                   else f"statement about {_label(members)}".encode())
        events.append(SubmitTx(i + 1, tx_id, payload, canonicalize_scope(members)))
    events.append(Erase(50, "erase-pa", P_A, ErasureMode.DATA_ONLY,
                        EndorserStrategy.SCOPE_PLUS_GUARDIANS, EndorsementPolicy(policy, DEMO_TIMEOUT)))
    return Scenario(
        network_id="demo",
        organizations=(ORG_X, ORG_Y),
        persons=(P_A, P_B),
        nodes=(NodeSpec("node-x", ORG_X, APPROVE_ALL), NodeSpec("node-y", ORG_Y, SILENT)),
        events=tuple(events),
        guardians=DEMO_GUARDIANS,
        network=NetworkConfig(1, 3),
        seed=7,
    )


def cmd_demo(policy: str | None = None, scopes: int | None = None, stdout: TextIO = sys.stdout) -> int:
    out = lambda *a: print(*a, file=stdout)  # noqa: E731

    if scopes is not None and not 1 <= scopes <= 16:
        print("error: --scopes must be between 1 and 16", file=sys.stderr)
        return EXIT_USAGE

    tree = make_genesis("demo", 0)
    txs = [Transaction(e.tx_id, e.payload, e.scope, e.at)
           for e in demo_scenario(PolicyMode.SILENCE_IS_VETO, scopes).events if isinstance(e, SubmitTx)]
    for tx in txs:
        tree, _ = place_transaction(tree, tx, tx.submitted_at)

    out("identities: " + ", ".join(f"{n}={i.id}" for i, n in DEMO_NAMES.items()))
    out("guardians: p_a->Org_x, p_b->Org_y")
    out(f"B_1: transfer p_a -> p_b placed in chain {_label((P_A, P_B))}")
    out(f"chains materialized: {len(tree.chains)} of max {max_branch_count(2, 2)}")
    part = chains_affected_by(tree, P_A)
    out(f"erase p_a: unaffected={len(part.unaffected)} unilateral={len(part.unilateral)} "
        f"consensus_required={len(part.consensus_required)}")

    b1_scope = canonicalize_scope((P_A, P_B))
    membership = Membership(frozenset({ORG_X, ORG_Y}))
    endorsers = select_endorsers(tree, b1_scope, membership, DEMO_GUARDIANS, EndorserStrategy.SCOPE_PLUS_GUARDIANS)
    out("B_1 deletion endorsers: " + ", ".join(DEMO_NAMES[e] for e in sorted(endorsers))
        + " (Org_y votes as guardian of p_b)")

    linear = LinearLedger.build("demo", txs)
    cut = linear.without(lambda tx: P_A in tx.declared_scope)
    out(f"linear baseline: {len(linear.blocks) - len(cut.blocks)} p_a blocks removed, "
        f"verify={'ok' if cut.verify() else 'FAILED'} ({len(cut.broken_links())} broken links)")

    modes = [POLICY_FLAGS[policy]] if policy else list(POLICY_FLAGS.values())
    flag = {v: k for k, v in POLICY_FLAGS.items()}
    status = EXIT_OK
    for mode in modes:
        trace, nodes = run_scenario(demo_scenario(mode, scopes))
        final = nodes[0].replica
        outcome = decisions(trace)
        approved = sum(1 for s in outcome.values() if s == "approved")
        vetoed = sum(1 for s in outcome.values() if s == "vetoed")
        out(f"policy {flag[mode]}: approved={approved} vetoed={vetoed}")
        surviving = [c for c in final.sorted_chains() if P_A in c.scope and c.blocks]
        out("  p_a chains still holding data: "
            + (", ".join(sorted(_label(c.scope.members) for c in surviving)) or "none"))
        converged = check_convergence(nodes)
        out(f"  replicas converged: {'yes' if converged else 'NO'}")
        if not converged:
            status = EXIT_FAIL
    return status


# -- entry point ------------------------------------------------------------


def _setup_logging() -> None:
    level = os.environ.get("ERASABLE_LEDGER_LOG")
    if level:
        logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="erasable-ledger", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario file")
    run.add_argument("scenario")
    run.add_argument("--trace", help="write the JSONL trace here")
    run.add_argument("--out", help="write one replica directory per node under this directory")
    run.add_argument("--seed", type=int, help="override the scenario seed")

    ver = sub.add_parser("verify", help="load and verify a replica directory")
    ver.add_argument("replica_dir")

    demo = sub.add_parser("demo", help="two-organization, two-person walk-through")
    demo.add_argument("--policy", choices=sorted(POLICY_FLAGS))
    demo.add_argument("--scopes", type=int, help="materialize only the first N scopes (1-16)")

    br = sub.add_parser("branches", help="upper bound on context chains")
    br.add_argument("k", type=int, help="organization count")
    br.add_argument("m", type=int, help="person count")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command == "run":
        if args.seed is not None and not 0 <= args.seed < 2**64:
            print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
            return EXIT_USAGE
        return cmd_run(args.scenario, args.trace, args.out, args.seed)
    if args.command == "verify":
        return cmd_verify(args.replica_dir)
    if args.command == "demo":
        return cmd_demo(args.policy, args.scopes)
    return cmd_branches(args.k, args.m)


if __name__ == "__main__":
    sys.exit(main())
