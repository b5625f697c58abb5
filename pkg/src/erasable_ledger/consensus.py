"""Deletion consensus: who must endorse, how votes resolve, and applying the result.

Deletion of a chain that concerns more than its requester needs every
selected endorser to agree. A single veto ends the request. A silent
endorser counts as a veto or as agreement depending on the policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .core import Identity, LedgerTree, Scope
from .errors import (
    DuplicateVote,
    Forbidden,
    InvalidArgument,
    NotAnEndorser,
    NotFound,
    UnguardedScope,
)
from .placement import chains_affected_by


@dataclass(frozen=True)
class GuardianRegistry:
    """Organizations that represent each person during deletion votes."""

    guardians: Mapping[Identity, frozenset[Identity]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        fixed = {}
        for person, orgs in self.guardians.items():
            orgs = frozenset(orgs)
            if not person.is_person:
                raise InvalidArgument(f"guardian key {person.id!r} is not a person")
            if not orgs:
                raise InvalidArgument(f"person {person.id!r} has an empty guardian set")
            bad = [o.id for o in orgs if not o.is_organization]
            if bad:
                raise InvalidArgument(f"guardians of {person.id!r} must be organizations: {bad}")
            fixed[person] = orgs
        object.__setattr__(self, "guardians", fixed)

    def of(self, person: Identity) -> frozenset[Identity]:
        return self.guardians.get(person, frozenset())

    def guards(self, org: Identity, scope: Scope) -> bool:
        return any(org in self.of(p) for p in scope.persons)


@dataclass(frozen=True)
class Membership:
    current: frozenset[Identity] = frozenset()
    endorsement_history: Mapping[bytes, frozenset[Identity]] = field(default_factory=dict)

    def join(self, org: Identity) -> Membership:
        return Membership(self.current | {org}, self.endorsement_history)

    def leave(self, org: Identity) -> Membership:
        return Membership(self.current - {org}, self.endorsement_history)

    def record_endorsement(self, chain_key: bytes, org: Identity) -> Membership:
        hist = dict(self.endorsement_history)
        hist[chain_key] = hist.get(chain_key, frozenset()) | {org}
        return Membership(self.current, hist)

    def forget_chain(self, chain_key: bytes) -> Membership:
        hist = {k: v for k, v in self.endorsement_history.items() if k != chain_key}
        return Membership(self.current, hist)


class EndorserStrategy(str, Enum):
    HISTORICAL_ENDORSERS = "historical_endorsers"
    SCOPE_PLUS_GUARDIANS = "scope_plus_guardians"
    ALL_ORGANIZATIONS = "all_organizations"


class PolicyMode(str, Enum):
    SILENCE_IS_VETO = "silence_is_veto"
    SILENCE_IS_AGREEMENT = "silence_is_agreement"


@dataclass(frozen=True)
class EndorsementPolicy:
    mode: PolicyMode
    timeout: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", PolicyMode(self.mode))
        if self.timeout <= 0:
            raise InvalidArgument(f"timeout must be positive, got {self.timeout}")


class VoteDecision(str, Enum):
    APPROVE = "approve"
    VETO = "veto"


class DecisionState(str, Enum):
    PENDING = "pending"
    APPROVED = "approved"
    VETOED = "vetoed"


@dataclass(frozen=True)
class Decision:
    state: DecisionState
    reason: str = ""

    @property
    def terminal(self) -> bool:
        return self.state is not DecisionState.PENDING


@dataclass(frozen=True)
class DeletionRequest:
    request_id: str
    requester: Identity
    target_chain: bytes
    keep_subroot: bool
    strategy: EndorserStrategy
    policy: EndorsementPolicy
    endorsers: frozenset[Identity]
    created_at: int

    @property
    def deadline(self) -> int:
        return self.created_at + self.policy.timeout


@dataclass(frozen=True)
class Vote:
    voter: Identity
    request_id: str
    decision: VoteDecision
    at: int


def _is_unilateral(scope: Scope) -> bool:
    return len(scope) == 1 and scope.members[0].is_person


def select_endorsers(
    tree: LedgerTree,
    scope: Scope,
    membership: Membership,
    guardians: GuardianRegistry,
    strategy: EndorserStrategy,
) -> frozenset[Identity]:
    """Organizations whose agreement a deletion of ``scope``'s chain needs.

    Departed organizations never endorse. An empty result is only legal for
    a chain whose scope is a single person.
    """
    if scope.key not in tree.chains:
        raise NotFound(f"no chain for scope {scope.key.hex()}")
    strategy = EndorserStrategy(strategy)
    if strategy is EndorserStrategy.HISTORICAL_ENDORSERS:
        chosen = membership.endorsement_history.get(scope.key, frozenset())
    elif strategy is EndorserStrategy.SCOPE_PLUS_GUARDIANS:
        chosen = set(scope.organizations)
        for p in scope.persons:
            chosen |= guardians.of(p)
    else:
        chosen = membership.current
    result = frozenset(chosen) & membership.current
    if not result and not _is_unilateral(scope):
        raise UnguardedScope(
            f"chain {scope.key.hex()[:16]} has no endorser under {strategy.value}"
        )
    return result


def open_deletion_request(
    tree: LedgerTree,
    chain_key: bytes,
    requester: Identity,
    keep_subroot: bool,
    strategy: EndorserStrategy,
    policy: EndorsementPolicy,
    membership: Membership,
    guardians: GuardianRegistry,
    now: int,
    request_id: str | None = None,
) -> DeletionRequest:
    """Form a deletion request with a frozen endorser set.

    A person deleting their own single-person chain needs nobody's consent.
    The request then has no endorsers and :func:`evaluate` approves it at once.
    """
    chain = tree.chains.get(chain_key)
    if chain is None:
        raise NotFound(f"no chain {chain_key.hex()}")
    scope = chain.scope
    if requester not in scope and not (
        requester.is_organization and guardians.guards(requester, scope)
    ):
        raise Forbidden(f"{requester.id} is neither in scope nor a guardian of it")
    if _is_unilateral(scope) and requester == scope.members[0]:
        endorsers: frozenset[Identity] = frozenset()
    else:
        endorsers = select_endorsers(tree, scope, membership, guardians, strategy)
    return DeletionRequest(
        request_id=request_id or f"del-{now}-{chain_key.hex()[:12]}",
        requester=requester,
        target_chain=chain_key,
        keep_subroot=keep_subroot,
        strategy=EndorserStrategy(strategy),
        policy=policy,
        endorsers=endorsers,
        created_at=now,
    )


def _check_votes(request: DeletionRequest, votes: Iterable[Vote]) -> dict[Identity, Vote]:
    by_voter: dict[Identity, Vote] = {}
    for v in votes:
        if v.request_id != request.request_id:
            raise InvalidArgument(f"vote for {v.request_id!r} passed to {request.request_id!r}")
        if v.voter not in request.endorsers:
            raise NotAnEndorser(f"{v.voter.id} is not an endorser of {request.request_id}")
        if v.voter in by_voter:
            raise DuplicateVote(f"{v.voter.id} already voted on {request.request_id}")
        if v.at < request.created_at:
            raise InvalidArgument(f"vote by {v.voter.id} predates the request")
        by_voter[v.voter] = v
    return by_voter


def evaluate(request: DeletionRequest, votes: Iterable[Vote], now: int) -> Decision:
    """Resolve a request from the votes received so far.

    Any veto wins regardless of mode or time. Under silence-is-veto an
    approval only counts if it arrived by the deadline.
    """
    by_voter = _check_votes(request, votes)
    vetoers = sorted(v.voter.id for v in by_voter.values() if v.decision is VoteDecision.VETO)
    if vetoers:
        return Decision(DecisionState.VETOED, "veto by " + ", ".join(vetoers))

    past_deadline = now > request.deadline
    mode = request.policy.mode
    if mode is PolicyMode.SILENCE_IS_VETO:
        approved = {e for e, v in by_voter.items() if v.at <= request.deadline}
        if approved >= request.endorsers:
            return Decision(DecisionState.APPROVED, "all endorsers approved")
        if past_deadline:
            return Decision(DecisionState.VETOED, "silent endorser")
        return Decision(DecisionState.PENDING)

    if set(by_voter) >= request.endorsers:
        return Decision(DecisionState.APPROVED, "all endorsers approved")
    if past_deadline:
        return Decision(DecisionState.APPROVED, "timeout elapsed without veto")
    return Decision(DecisionState.PENDING)


def apply_deletion(tree: LedgerTree, chain_key: bytes, keep_subroot: bool) -> LedgerTree:
    """Drop a chain's blocks, or the whole chain, leaving every other chain as is."""
    chain = tree.chains.get(chain_key)
    if chain is None:
        raise NotFound(f"no chain {chain_key.hex()}")
    chains = dict(tree.chains)
    if keep_subroot:
        chains[chain_key] = type(chain)(chain.scope, chain.subroot, ())
    else:
        del chains[chain_key]
    return tree.with_chains(chains)


class ErasureMode(str, Enum):
    DATA_ONLY = "data_only"
    DELETE_ACCOUNT = "delete_account"


@dataclass(frozen=True)
class PlanEntry:
    chain_key: bytes
    classification: str  # "unilateral" | "consensus_required"
    request: DeletionRequest | None
    error: str | None = None

    @property
    def immediate(self) -> bool:
        return self.request is not None and not self.request.endorsers


@dataclass(frozen=True)
class ErasurePlan:
    subject: Identity
    mode: ErasureMode
    per_chain: tuple[PlanEntry, ...]


def plan_erasure(
    tree: LedgerTree,
    subject: Identity,
    mode: ErasureMode,
    strategy: EndorserStrategy,
    policy: EndorsementPolicy,
    membership: Membership,
    guardians: GuardianRegistry,
    now: int,
    id_prefix: str | None = None,
) -> ErasurePlan:
    """One deletion request per chain that mentions ``subject``.

    Chains whose endorser set comes out empty get an entry carrying the
    error instead of a request; the rest of the plan is unaffected.
    """
    if not subject.is_person:
        raise InvalidArgument(f"erasure subject {subject.id!r} is not a person")
    mode = ErasureMode(mode)
    keep = mode is ErasureMode.DATA_ONLY
    prefix = id_prefix or f"erase-{now}"
    affected = chains_affected_by(tree, subject)
    entries = []
    for cls, keys in (("unilateral", affected.unilateral), ("consensus_required", affected.consensus_required)):
        for key in keys:
            try:
                req = open_deletion_request(
                    tree, key, subject, keep, strategy, policy, membership, guardians, now,
                    request_id=f"{prefix}:{key.hex()[:12]}",
                )
            except UnguardedScope as exc:
                entries.append(PlanEntry(key, cls, None, str(exc)))
            else:
                entries.append(PlanEntry(key, cls, req))
    return ErasurePlan(subject, mode, tuple(entries))
