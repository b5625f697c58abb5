"""Routing transactions into context chains by exact scope match."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .core import Block, ContextChain, Identity, LedgerTree, Scope, Transaction
from .errors import DuplicateTransaction, InvalidArgument, OutOfRange

MAX_BRANCH_IDENTITIES = 62


def canonicalize_scope(identities: Iterable[Identity]) -> Scope:
    """Deduplicate and sort ``identities`` into a :class:`Scope`.

    Raises:
        InvalidArgument: an entry is not an :class:`Identity`, or one id is
            given as both an organization and a person.
    """
    by_id: dict[str, Identity] = {}
    for ident in identities:
        if not isinstance(ident, Identity):
            raise InvalidArgument(f"malformed identifier {ident!r}")
        prior = by_id.setdefault(ident.id, ident)
        if prior.kind is not ident.kind:
            raise InvalidArgument(f"identifier {ident.id!r} given with conflicting kinds")
    return Scope(tuple(sorted(by_id.values())))


@dataclass(frozen=True)
class PlacementResult:
    chain_key: bytes
    created_chain: bool
    block: Block


def find_chain(tree: LedgerTree, scope: Scope) -> ContextChain | None:
    return tree.chains.get(scope.key)


def place_transaction(
    tree: LedgerTree, tx: Transaction, now: int
) -> tuple[LedgerTree, PlacementResult]:
    """Append ``tx`` as a one-transaction block on the chain of its exact scope.

    The chain's subroot is created on first use. Every other chain is carried
    over unchanged.
    """
    scope = tx.declared_scope
    if not isinstance(scope, Scope) or not scope.is_canonical():
        raise InvalidArgument(f"tx {tx.tx_id!r} has a non-canonical scope")
    if tx.tx_id in tree.transaction_ids():
        raise DuplicateTransaction(f"tx {tx.tx_id!r} already on the ledger")

    chain = tree.chains.get(scope.key)
    created = chain is None
    if chain is None:
        subroot = Block.seal(scope.key, 0, tree.genesis.block_hash, (), now)
        chain = ContextChain(scope, subroot, ())
    head = chain.head
    block = Block.seal(scope.key, head.height + 1, head.block_hash, (tx,), now)
    chains = dict(tree.chains)
    chains[scope.key] = ContextChain(chain.scope, chain.subroot, chain.blocks + (block,))
    return tree.with_chains(chains), PlacementResult(scope.key, created, block)


@dataclass(frozen=True)
class AffectedChains:
    """Partition of a tree's chains relative to one identity."""

    unaffected: list[bytes]
    unilateral: list[bytes]
    consensus_required: list[bytes]


def chains_affected_by(tree: LedgerTree, who: Identity) -> AffectedChains:
    unaffected, unilateral, consensus = [], [], []
    for key in sorted(tree.chains):
        members = tree.chains[key].scope.members
        if who not in members:
            unaffected.append(key)
        elif len(members) == 1:
            unilateral.append(key)
        else:
            consensus.append(key)
    return AffectedChains(unaffected, unilateral, consensus)


def max_branch_count(k: int, m: int) -> int:
    """Upper bound on context chains for ``k`` organizations and ``m`` persons.

    Every subset of the k+m identities (the empty one included) can be a
    scope, so the bound is ``2**(k+m)``.
    """
    if k < 0 or m < 0 or k + m > MAX_BRANCH_IDENTITIES:
        raise OutOfRange(f"need k, m >= 0 and k+m <= {MAX_BRANCH_IDENTITIES}, got k={k}, m={m}")
    return 1 << (k + m)
