"""Deterministic discrete-event simulation of a permissioned ledger network.

The lowest ``node_id`` is the coordinator. It sequences every ledger
operation (appends and approved deletions), applies it locally and
broadcasts it. Other nodes apply operations strictly in sequence order and
hold back anything that arrives early. A dropped message is never resent,
so the replica that missed it stalls and the divergence shows in the trace.

Deletion consensus also runs on the coordinator. For each chain of an
erasure plan it sends vote requests to one node per endorsing organization
(the lowest ``node_id`` it operates). It collects the votes and schedules a
deadline check one tick after ``created_at + timeout``. Only an approved
decision is ever broadcast as a deletion.

Events are ordered by ``(tick, insertion sequence)``. The only randomness
is message delay and drop, both drawn from :class:`~.prng.XorShift64Star`.
A run is therefore a pure function of the scenario and seed.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field
from typing import Any

from .consensus import (
    Decision,
    DecisionState,
    DeletionRequest,
    Membership,
    Vote,
    VoteDecision,
    apply_deletion,
    evaluate,
    plan_erasure,
)
from .core import LedgerTree, Transaction, make_genesis, tree_bytes, verify_tree
from .errors import LedgerError
from .placement import place_transaction
from .prng import XorShift64Star
from .scenario import Behavior, CastVote, Erase, MembershipChange, Scenario, SubmitTx
from .storage import JournalEntry, dumps

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TraceRecord:
    tick: int
    node: str
    action: str
    detail: dict[str, Any]

    def to_json(self) -> str:
        return dumps({"tick": self.tick, "node": self.node, "action": self.action, "detail": self.detail})


@dataclass
class Trace:
    records: list[TraceRecord] = field(default_factory=list)

    def add(self, tick: int, node: str, action: str, **detail: Any) -> None:
        self.records.append(TraceRecord(tick, node, action, detail))

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    def actions(self, action: str) -> list[TraceRecord]:
        return [r for r in self.records if r.action == action]


@dataclass
class NodeState:
    node_id: str
    operator: Any
    replica: LedgerTree
    behavior: Behavior
    journal: list[JournalEntry] = field(default_factory=list)
    next_seq: int = 1
    holdback: dict[int, dict] = field(default_factory=dict)


@dataclass
class _Pending:
    request: DeletionRequest
    votes: list[Vote] = field(default_factory=list)
    decision: Decision = Decision(DecisionState.PENDING)


class SimulationError(LedgerError):
    pass


class _Simulator:
    def __init__(self, scenario: Scenario, seed: int | None, debug: bool):
        self.s = scenario
        self.rng = XorShift64Star(scenario.seed if seed is None else seed)
        self.debug = debug
        self.trace = Trace()
        self.queue: list[tuple[int, int, str, dict]] = []
        self.counter = 0
        genesis = make_genesis(scenario.network_id, 0)
        self.nodes = {
            n.node_id: NodeState(n.node_id, n.operator, genesis, n.behavior)
            for n in sorted(scenario.nodes, key=lambda n: n.node_id)
        }
        self.coordinator = min(self.nodes)
        self.voter_node = {}
        for nid, node in self.nodes.items():
            self.voter_node.setdefault(node.operator, nid)
        self.membership = Membership(frozenset(scenario.organizations))
        self.seq = 0
        self.requests: dict[str, _Pending] = {}
        # chain key -> sequence number of its latest deletion; older acks are stale
        self.deleted_at_seq: dict[bytes, int] = {}
        self.now = 0

    # -- queue ------------------------------------------------------------

    def schedule(self, at: int, kind: str, payload: dict) -> None:
        heapq.heappush(self.queue, (at, self.counter, kind, payload))
        self.counter += 1

    def send(self, src: str, dst: str, msg: dict) -> None:
        if src == dst:
            self.schedule(self.now, "deliver_message", {"to": dst, "from": src, "msg": msg})
            return
        cfg = self.s.network
        if self.rng.bernoulli(cfg.drop_probability):
            self.trace.add(self.now, src, "drop", to=dst, kind=msg["kind"])
            return
        at = self.now + self.rng.randint(cfg.delay_min, cfg.delay_max)
        self.trace.add(self.now, src, "send", to=dst, kind=msg["kind"], deliver_at=at)
        self.schedule(at, "deliver_message", {"to": dst, "from": src, "msg": msg})

    def broadcast(self, msg: dict) -> None:
        for nid in self.nodes:
            if nid != self.coordinator:
                self.send(self.coordinator, nid, msg)

    def run(self) -> tuple[Trace, list[NodeState]]:
        for d in self.s.events:
            kind = {SubmitTx: "submit_tx", Erase: "open_deletion",
                    MembershipChange: "membership_change", CastVote: "cast_vote"}[type(d)]
            self.schedule(d.at, kind, {"directive": d})
        while self.queue:
            at, _, kind, payload = heapq.heappop(self.queue)
            self.now = at
            getattr(self, "_on_" + kind)(payload)
            if self.debug:
                self._check_replicas()
        return self.trace, list(self.nodes.values())

    def _check_replicas(self) -> None:
        for node in self.nodes.values():
            report = verify_tree(node.replica)
            if not report.ok:
                raise SimulationError(
                    f"replica {node.node_id} invalid at tick {self.now}: {report.violations[0]}"
                )

    # -- ledger operations --------------------------------------------------

    def _sequence(self, op: dict) -> None:
        self.seq += 1
        op = dict(op, seq=self.seq)
        self.trace.add(self.now, self.coordinator, "sequence", seq=self.seq, op=op["kind"])
        self._apply(self.nodes[self.coordinator], op)
        self.broadcast(op)

    def _apply(self, node: NodeState, op: dict) -> None:
        node.holdback[op["seq"]] = op
        if op["seq"] > node.next_seq:
            self.trace.add(self.now, node.node_id, "hold", seq=op["seq"], waiting_for=node.next_seq)
        while node.next_seq in node.holdback:
            ready = node.holdback.pop(node.next_seq)
            node.next_seq += 1
            if ready["kind"] == "append":
                self._apply_append(node, ready)
            else:
                self._apply_delete(node, ready)

    def _apply_append(self, node: NodeState, op: dict) -> None:
        tx: Transaction = op["tx"]
        node.replica, res = place_transaction(node.replica, tx, op["tick"])
        self.trace.add(
            self.now, node.node_id, "append-applied", seq=op["seq"], tx_id=tx.tx_id,
            chain=res.chain_key.hex(), height=res.block.height,
            block_hash=res.block.block_hash.hex(), created_chain=res.created_chain,
        )
        self.send(node.node_id, self.coordinator,
                  {"kind": "ack", "seq": op["seq"], "chain": res.chain_key, "org": node.operator})

    def _apply_delete(self, node: NodeState, op: dict) -> None:
        key = op["chain"]
        if key not in node.replica.chains:
            self.trace.add(self.now, node.node_id, "delete-skipped", seq=op["seq"],
                           request_id=op["request_id"], chain=key.hex())
            return
        node.replica = apply_deletion(node.replica, key, op["keep_subroot"])
        node.journal.append(JournalEntry(op["request_id"], key.hex(), op["keep_subroot"],
                                         op["decided_at"], op["reason"]))
        self.trace.add(self.now, node.node_id, "delete-applied", seq=op["seq"],
                       request_id=op["request_id"], chain=key.hex(), keep_subroot=op["keep_subroot"])

    # -- event handlers -----------------------------------------------------

    def _on_submit_tx(self, payload: dict) -> None:
        d: SubmitTx = payload["directive"]
        tx = Transaction(d.tx_id, d.payload, d.scope, d.at)
        coord = self.nodes[self.coordinator]
        if d.tx_id in coord.replica.transaction_ids():
            self.trace.add(self.now, self.coordinator, "tx-rejected", tx_id=d.tx_id, reason="duplicate-transaction")
            return
        self.trace.add(self.now, self.coordinator, "tx-accepted", tx_id=d.tx_id, chain=d.scope.key.hex())
        self._sequence({"kind": "append", "tx": tx, "tick": self.now})

    def _on_membership_change(self, payload: dict) -> None:
        d: MembershipChange = payload["directive"]
        if d.action == "join":
            self.membership = self.membership.join(d.organization)
        else:
            self.membership = self.membership.leave(d.organization)
        self.trace.add(self.now, self.coordinator, "membership", organization=d.organization.id, change=d.action)

    def _on_open_deletion(self, payload: dict) -> None:
        d: Erase = payload["directive"]
        coord = self.nodes[self.coordinator]
        plan = plan_erasure(coord.replica, d.subject, d.mode, d.strategy, d.policy,
                            self.membership, self.s.guardians, self.now, id_prefix=d.id)
        self.trace.add(self.now, self.coordinator, "erasure-planned", erase_id=d.id,
                       mode=d.mode.value, strategy=d.strategy.value, policy=d.policy.mode.value,
                       chains=len(plan.per_chain))
        for entry in plan.per_chain:
            if entry.request is None:
                self.trace.add(self.now, self.coordinator, "unguarded-scope", erase_id=d.id,
                               chain=entry.chain_key.hex(), classification=entry.classification)
                continue
            req = entry.request
            if req.request_id in self.requests:
                self.trace.add(self.now, self.coordinator, "request-duplicate", request_id=req.request_id)
                continue
            self.requests[req.request_id] = _Pending(req)
            self.trace.add(self.now, self.coordinator, "request-opened", request_id=req.request_id,
                           chain=req.target_chain.hex(), classification=entry.classification,
                           endorsers=sorted(e.id for e in req.endorsers), deadline=req.deadline,
                           keep_subroot=req.keep_subroot)
            for org in sorted(req.endorsers):
                nid = self.voter_node.get(org)
                if nid is None:
                    self.trace.add(self.now, self.coordinator, "endorser-unreachable",
                                   request_id=req.request_id, organization=org.id)
                    continue
                self.send(self.coordinator, nid, {"kind": "vote_request", "request_id": req.request_id})
            self.schedule(req.deadline + 1, "deadline", {"request_id": req.request_id})
            self._decide(req.request_id)

    def _on_cast_vote(self, payload: dict) -> None:
        d: CastVote = payload["directive"]
        nid = self.voter_node[d.organization]
        self.trace.add(self.now, nid, "vote-cast", request_id=d.request_id, decision=d.decision.value, scripted=True)
        self.send(nid, self.coordinator, {"kind": "vote", "request_id": d.request_id,
                                          "org": d.organization, "decision": d.decision})

    def _on_deadline(self, payload: dict) -> None:
        rid = payload["request_id"]
        self.trace.add(self.now, self.coordinator, "deadline", request_id=rid)
        self._decide(rid)

    def _on_deliver_message(self, payload: dict) -> None:
        node = self.nodes[payload["to"]]
        msg = payload["msg"]
        kind = msg["kind"]
        if kind in ("append", "delete"):
            self._apply(node, msg)
        elif kind == "ack":
            if msg["seq"] > self.deleted_at_seq.get(msg["chain"], 0):
                self.membership = self.membership.record_endorsement(msg["chain"], msg["org"])
        elif kind == "vote_request":
            decision = node.behavior.respond(msg["request_id"])
            if decision is None:
                self.trace.add(self.now, node.node_id, "vote-withheld", request_id=msg["request_id"])
                return
            self.trace.add(self.now, node.node_id, "vote-cast", request_id=msg["request_id"], decision=decision.value)
            self.send(node.node_id, self.coordinator, {"kind": "vote", "request_id": msg["request_id"],
                                                       "org": node.operator, "decision": decision})
        elif kind == "vote":
            self._receive_vote(msg)

    def _receive_vote(self, msg: dict) -> None:
        rid, org = msg["request_id"], msg["org"]
        pending = self.requests.get(rid)
        if pending is None:
            self.trace.add(self.now, self.coordinator, "vote-ignored", request_id=rid,
                           voter=org.id, reason="unknown request")
            return
        if pending.decision.terminal:
            self.trace.add(self.now, self.coordinator, "vote-ignored", request_id=rid,
                           voter=org.id, reason="already " + pending.decision.state.value)
            return
        vote = Vote(org, rid, VoteDecision(msg["decision"]), self.now)
        try:
            evaluate(pending.request, pending.votes + [vote], self.now)
        except LedgerError as exc:
            self.trace.add(self.now, self.coordinator, "vote-ignored", request_id=rid,
                           voter=org.id, reason=type(exc).__name__)
            return
        pending.votes.append(vote)
        self.trace.add(self.now, self.coordinator, "vote-received", request_id=rid,
                       voter=org.id, decision=vote.decision.value)
        self._decide(rid)

    def _decide(self, rid: str) -> None:
        pending = self.requests[rid]
        if pending.decision.terminal:
            return
        decision = evaluate(pending.request, pending.votes, self.now)
        if not decision.terminal:
            return
        pending.decision = decision
        req = pending.request
        self.trace.add(self.now, self.coordinator, "decision", request_id=rid,
                       state=decision.state.value, reason=decision.reason, chain=req.target_chain.hex())
        if decision.state is DecisionState.APPROVED:
            self.membership = self.membership.forget_chain(req.target_chain)
            self.deleted_at_seq[req.target_chain] = self.seq + 1
            self._sequence({"kind": "delete", "request_id": rid, "chain": req.target_chain,
                            "keep_subroot": req.keep_subroot, "decided_at": self.now,
                            "reason": decision.reason})


def run_scenario(
    scenario: Scenario, seed: int | None = None, debug: bool = False
) -> tuple[Trace, list[NodeState]]:
    """Run ``scenario`` to quiescence.

    ``seed`` overrides the scenario's own seed. With ``debug`` every replica
    is verified after every event and the first invalid one raises
    :class:`SimulationError`.
    """
    return _Simulator(scenario, seed, debug).run()


def check_convergence(nodes: list[NodeState]) -> bool:
    """True iff every replica verifies and all replicas are byte-identical."""
    if not nodes:
        return True
    images = set()
    for n in nodes:
        if not verify_tree(n.replica).ok:
            return False
        images.add(tree_bytes(n.replica))
    return len(images) == 1


def decisions(trace: Trace) -> dict[str, str]:
    """request_id -> final state, from a trace."""
    return {r.detail["request_id"]: r.detail["state"] for r in trace.actions("decision")}


def trace_from_jsonl(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line]
