"""Scenario files: declarative input for the network simulator.

A scenario is a JSON object. Structure is checked against :data:`SCHEMA`
(unknown fields are rejected everywhere). Identities, nodes and event
references are then cross-checked. Errors carry a dotted field path such as
``events[2].scope[0]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Union

import jsonschema
from jsonschema.exceptions import best_match

from .consensus import (
    EndorsementPolicy,
    EndorserStrategy,
    ErasureMode,
    GuardianRegistry,
    PolicyMode,
    VoteDecision,
)
from .core import Identity, Scope, is_valid_did
from .errors import ScenarioError
from .placement import canonicalize_scope

_DID = {"type": "string", "pattern": r"^did:[^:\s]+:[^:\s]+$"}
_TICK = {"type": "integer", "minimum": 0}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["network_id", "organizations", "persons", "nodes", "events"],
    "properties": {
        "network_id": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "organizations": {"type": "array", "items": _DID, "minItems": 1},
        "persons": {"type": "array", "items": _DID},
        "guardians": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": _DID, "minItems": 1},
        },
        "nodes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["node_id", "operator"],
                "properties": {
                    "node_id": {"type": "string", "minLength": 1},
                    "operator": _DID,
                    "behavior": {
                        "oneOf": [
                            {"enum": ["approve_all", "veto_all", "silent"]},
                            {
                                "type": "object",
                                "additionalProperties": False,
                                "required": ["scripted"],
                                "properties": {
                                    "scripted": {
                                        "type": "array",
                                        "items": {
                                            "type": "array",
                                            "prefixItems": [
                                                {"type": "string"},
                                                {"enum": ["approve", "veto"]},
                                            ],
                                            "minItems": 2,
                                            "maxItems": 2,
                                        },
                                    }
                                },
                            },
                        ]
                    },
                },
            },
        },
        "network": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "delay_min": _TICK,
                "delay_max": _TICK,
                "drop_probability": {
                    "oneOf": [
                        {"type": "number", "minimum": 0, "maximum": 1},
                        {"type": "string", "pattern": r"^\d+(/\d+)?$"},
                    ]
                },
            },
        },
        "events": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["at", "type"],
                "properties": {"type": {"enum": ["submit_tx", "erase", "membership_change", "cast_vote"]}},
            },
        },
    },
}

# Each event is checked against the schema for its own ``type``.
EVENT_SCHEMAS: dict[str, dict[str, Any]] = {
    "submit_tx": {
        "type": "object",
        "additionalProperties": False,
        "required": ["at", "type", "tx_id", "scope"],
        "oneOf": [{"required": ["payload"]}, {"required": ["payload_hex"]}],
        "properties": {
            "at": _TICK,
            "type": {"const": "submit_tx"},
            "tx_id": {"type": "string", "minLength": 1},
            "payload": {"type": "string"},
            "payload_hex": {"type": "string", "pattern": "^([0-9a-f]{2})*$"},
            "scope": {"type": "array", "items": _DID},
        },
    },
    "erase": {
        "type": "object",
        "additionalProperties": False,
        "required": ["at", "type", "id", "subject", "mode", "strategy", "policy"],
        "properties": {
            "at": _TICK,
            "type": {"const": "erase"},
            "id": {"type": "string", "pattern": r"^[^:\s]+$"},
            "subject": _DID,
            "mode": {"enum": [m.value for m in ErasureMode]},
            "strategy": {"enum": [s.value for s in EndorserStrategy]},
            "policy": {
                "type": "object",
                "additionalProperties": False,
                "required": ["mode", "timeout"],
                "properties": {
                    "mode": {"enum": [m.value for m in PolicyMode]},
                    "timeout": {"type": "integer", "minimum": 1},
                },
            },
        },
    },
    "membership_change": {
        "type": "object",
        "additionalProperties": False,
        "required": ["at", "type", "organization", "action"],
        "properties": {
            "at": _TICK,
            "type": {"const": "membership_change"},
            "organization": _DID,
            "action": {"enum": ["join", "leave"]},
        },
    },
    "cast_vote": {
        "type": "object",
        "additionalProperties": False,
        "required": ["at", "type", "organization", "request_id", "decision"],
        "properties": {
            "at": _TICK,
            "type": {"const": "cast_vote"},
            "organization": _DID,
            "request_id": {"type": "string", "minLength": 1},
            "decision": {"enum": ["approve", "veto"]},
        },
    },
}


@dataclass(frozen=True)
class Behavior:
    kind: str  # approve_all | veto_all | silent | scripted
    script: tuple[tuple[str, VoteDecision], ...] = ()

    def respond(self, request_id: str) -> VoteDecision | None:
        if self.kind == "approve_all":
            return VoteDecision.APPROVE
        if self.kind == "veto_all":
            return VoteDecision.VETO
        for rid, decision in self.script:
            if rid == request_id:
                return decision
        return None

    def to_json(self) -> Any:
        if self.kind == "scripted":
            return {"scripted": [[rid, d.value] for rid, d in self.script]}
        return self.kind


APPROVE_ALL = Behavior("approve_all")
VETO_ALL = Behavior("veto_all")
SILENT = Behavior("silent")


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    operator: Identity
    behavior: Behavior = APPROVE_ALL


@dataclass(frozen=True)
class NetworkConfig:
    delay_min: int = 1
    delay_max: int = 1
    drop_probability: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "drop_probability", Fraction(self.drop_probability))
        if not 0 <= self.delay_min <= self.delay_max:
            raise ScenarioError("network", f"need 0 <= delay_min <= delay_max, got {self.delay_min}, {self.delay_max}")
        if not 0 <= self.drop_probability <= 1:
            raise ScenarioError("network.drop_probability", "must lie in [0, 1]")


@dataclass(frozen=True)
class SubmitTx:
    at: int
    tx_id: str
    payload: bytes
    scope: Scope


@dataclass(frozen=True)
class Erase:
    at: int
    id: str
    subject: Identity
    mode: ErasureMode
    strategy: EndorserStrategy
    policy: EndorsementPolicy


@dataclass(frozen=True)
class MembershipChange:
    at: int
    organization: Identity
    action: str  # join | leave


@dataclass(frozen=True)
class CastVote:
    at: int
    organization: Identity
    request_id: str
    decision: VoteDecision


Directive = Union[SubmitTx, Erase, MembershipChange, CastVote]


@dataclass(frozen=True)
class Scenario:
    network_id: str
    organizations: tuple[Identity, ...]
    persons: tuple[Identity, ...]
    nodes: tuple[NodeSpec, ...]
    events: tuple[Directive, ...]
    guardians: GuardianRegistry = field(default_factory=GuardianRegistry)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    seed: int = 0


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


def _schema_error(data: Any) -> ScenarioError | None:
    def first(schema, instance, prefix):
        err = best_match(jsonschema.Draft202012Validator(schema).iter_errors(instance))
        if err is None:
            return None
        return ScenarioError(_path([*prefix, *err.absolute_path]) or "<root>", err.message)

    top = first(SCHEMA, data, [])
    if top is not None:
        return top
    for i, e in enumerate(data["events"]):
        err = first(EVENT_SCHEMAS[e["type"]], e, ["events", i])
        if err is not None:
            return err
    return None


def parse_scenario(data: Any) -> Scenario:
    """Validate a decoded scenario document and build a :class:`Scenario`.

    Raises:
        ScenarioError: with the path of the first offending field.
    """
    err = _schema_error(data)
    if err is not None:
        raise err

    declared: dict[str, Identity] = {}
    for i, d in enumerate(data["organizations"]):
        if d in declared:
            raise ScenarioError(f"organizations[{i}]", f"{d} declared twice")
        declared[d] = Identity.org(d)
    for i, d in enumerate(data["persons"]):
        if d in declared:
            raise ScenarioError(f"persons[{i}]", f"{d} declared twice")
        declared[d] = Identity.person(d)

    def lookup(did: str, where: str, kind: str | None = None) -> Identity:
        ident = declared.get(did)
        if ident is None:
            raise ScenarioError(where, f"undeclared identity {did}")
        if kind is not None and ident.kind.value != kind:
            raise ScenarioError(where, f"{did} is not a {kind}")
        return ident

    guardians = {}
    for person, orgs in data.get("guardians", {}).items():
        where = f"guardians.{person}"
        if not is_valid_did(person):
            raise ScenarioError(where, f"malformed identifier {person!r}")
        p = lookup(person, where, "person")
        guardians[p] = frozenset(lookup(o, f"{where}[{j}]", "organization") for j, o in enumerate(orgs))

    nodes = []
    seen_nodes: set[str] = set()
    for i, n in enumerate(data["nodes"]):
        if n["node_id"] in seen_nodes:
            raise ScenarioError(f"nodes[{i}].node_id", f"duplicate node id {n['node_id']}")
        seen_nodes.add(n["node_id"])
        operator = lookup(n["operator"], f"nodes[{i}].operator", "organization")
        raw = n.get("behavior", "approve_all")
        if isinstance(raw, dict):
            behavior = Behavior("scripted", tuple((rid, VoteDecision(d)) for rid, d in raw["scripted"]))
        else:
            behavior = Behavior(raw)
        nodes.append(NodeSpec(n["node_id"], operator, behavior))
    operators = {n.operator for n in nodes}

    net = data.get("network", {})
    drop = net.get("drop_probability", 0)
    try:
        drop = Fraction(drop) if isinstance(drop, str) else Fraction(str(drop))
    except ZeroDivisionError:
        raise ScenarioError("network.drop_probability", "zero denominator") from None
    network = NetworkConfig(net.get("delay_min", 1), net.get("delay_max", 1), drop)

    events: list[Directive] = []
    for i, e in enumerate(data["events"]):
        where = f"events[{i}]"
        kind = e["type"]
        if kind == "submit_tx":
            members = [lookup(d, f"{where}.scope[{j}]") for j, d in enumerate(e["scope"])]
            payload = e["payload"].encode("utf-8") if "payload" in e else bytes.fromhex(e["payload_hex"])
            events.append(SubmitTx(e["at"], e["tx_id"], payload, canonicalize_scope(members)))
        elif kind == "erase":
            subject = lookup(e["subject"], f"{where}.subject", "person")
            policy = EndorsementPolicy(PolicyMode(e["policy"]["mode"]), e["policy"]["timeout"])
            events.append(
                Erase(e["at"], e["id"], subject, ErasureMode(e["mode"]), EndorserStrategy(e["strategy"]), policy)
            )
        elif kind == "membership_change":
            org = lookup(e["organization"], f"{where}.organization", "organization")
            events.append(MembershipChange(e["at"], org, e["action"]))
        else:
            org = lookup(e["organization"], f"{where}.organization", "organization")
            if org not in operators:
                raise ScenarioError(f"{where}.organization", f"{org.id} operates no node")
            events.append(CastVote(e["at"], org, e["request_id"], VoteDecision(e["decision"])))

    return Scenario(
        network_id=data["network_id"],
        organizations=tuple(i for i in declared.values() if i.is_organization),
        persons=tuple(i for i in declared.values() if i.is_person),
        nodes=tuple(nodes),
        events=tuple(events),
        guardians=GuardianRegistry(guardians),
        network=network,
        seed=data.get("seed", 0),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}", f"invalid JSON: {exc.msg}") from exc
    return parse_scenario(data)


def scenario_to_json(s: Scenario) -> dict:
    """Inverse of :func:`parse_scenario`, used to write corpus files."""
    events = []
    for e in s.events:
        if isinstance(e, SubmitTx):
            events.append({"at": e.at, "type": "submit_tx", "tx_id": e.tx_id,
                           "payload_hex": e.payload.hex(), "scope": [m.id for m in e.scope.members]})
        elif isinstance(e, Erase):
            events.append({"at": e.at, "type": "erase", "id": e.id, "subject": e.subject.id,
                           "mode": e.mode.value, "strategy": e.strategy.value,
                           "policy": {"mode": e.policy.mode.value, "timeout": e.policy.timeout}})
        elif isinstance(e, MembershipChange):
            events.append({"at": e.at, "type": "membership_change",
                           "organization": e.organization.id, "action": e.action})
        else:
            events.append({"at": e.at, "type": "cast_vote", "organization": e.organization.id,
                           "request_id": e.request_id, "decision": e.decision.value})
    p = s.network.drop_probability
    return {
        "network_id": s.network_id,
        "seed": s.seed,
        "organizations": [o.id for o in s.organizations],
        "persons": [p_.id for p_ in s.persons],
        "guardians": {p_.id: sorted(o.id for o in orgs) for p_, orgs in s.guardians.guardians.items()},
        "nodes": [{"node_id": n.node_id, "operator": n.operator.id, "behavior": n.behavior.to_json()} for n in s.nodes],
        "network": {"delay_min": s.network.delay_min, "delay_max": s.network.delay_max,
                    "drop_probability": f"{p.numerator}/{p.denominator}"},
        "events": events,
    }
