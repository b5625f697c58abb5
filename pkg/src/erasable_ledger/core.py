"""Content-addressed block and tree primitives.

Every value here is immutable; operations that "change" a tree return a new
one.  Hashing is SHA-256 over a length-prefixed binary encoding:

    field(b)  = uint64_be(len(b)) || b
    int(i)    = int64_be(i)

    canonical(block) = field(chain_key) || int(height) || field(prev_hash)
                    || int(created_at) || int(len(txs))
                    || for each tx: field(utf8(tx_id)) || field(sha256(payload))

The genesis block uses ``sha256(utf8(network_id))`` as its chain key and 32
zero bytes as its predecessor.
"""

from __future__ import annotations

import functools
import hashlib
import re
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .errors import InvalidArgument

DIGEST_SIZE = 32
ZERO_HASH = bytes(DIGEST_SIZE)

_DID_RE = re.compile(r"did:[^:\s]+:[^:\s]+")


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


class IdentityKind(str, Enum):
    ORGANIZATION = "organization"
    PERSON = "person"


def is_valid_did(value: str) -> bool:
    return isinstance(value, str) and _DID_RE.fullmatch(value) is not None


@functools.total_ordering
@dataclass(frozen=True)
class Identity:
    """An organization or person, named by a ``did:<method>:<specific>`` string.

    Identities order by their id alone. Python compares ``str`` by code point,
    which is the same order as comparing the UTF-8 bytes.
    """

    kind: IdentityKind
    id: str

    def __post_init__(self) -> None:
        if not is_valid_did(self.id):
            raise InvalidArgument(f"malformed identifier {self.id!r}")
        object.__setattr__(self, "kind", IdentityKind(self.kind))

    @classmethod
    def org(cls, id: str) -> Identity:
        return cls(IdentityKind.ORGANIZATION, id)

    @classmethod
    def person(cls, id: str) -> Identity:
        return cls(IdentityKind.PERSON, id)

    @property
    def is_person(self) -> bool:
        return self.kind is IdentityKind.PERSON

    @property
    def is_organization(self) -> bool:
        return self.kind is IdentityKind.ORGANIZATION

    def __lt__(self, other: Identity) -> bool:
        if not isinstance(other, Identity):
            return NotImplemented
        return self.id < other.id

    def __str__(self) -> str:
        return self.id


def scope_key(members: Iterable[Identity]) -> bytes:
    return digest(b"\n".join(m.id.encode("utf-8") for m in members))


@dataclass(frozen=True)
class Scope:
    """Canonical (sorted, duplicate-free) member set; keys exactly one chain."""

    members: tuple[Identity, ...] = ()
    key: bytes = field(init=False, repr=False)

    def __post_init__(self) -> None:
        members = tuple(self.members)
        for a, b in zip(members, members[1:]):
            if not a.id < b.id:
                raise InvalidArgument(
                    f"scope members not strictly ascending at {b.id!r}"
                )
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "key", scope_key(members))

    def is_canonical(self) -> bool:
        ms = self.members
        ordered = all(a.id < b.id for a, b in zip(ms, ms[1:]))
        return ordered and self.key == scope_key(ms)

    def __contains__(self, who: object) -> bool:
        return who in self.members

    def __len__(self) -> int:
        return len(self.members)

    @property
    def persons(self) -> tuple[Identity, ...]:
        return tuple(m for m in self.members if m.is_person)

    @property
    def organizations(self) -> tuple[Identity, ...]:
        return tuple(m for m in self.members if m.is_organization)

    @property
    def label(self) -> str:
        return "{" + ", ".join(m.id for m in self.members) + "}"


@dataclass(frozen=True)
class Transaction:
    tx_id: str
    payload: bytes
    declared_scope: Scope
    submitted_at: int = 0


def _field(b: bytes) -> bytes:
    return struct.pack(">Q", len(b)) + b


def _int(i: int) -> bytes:
    return struct.pack(">q", i)


def canonical_bytes(
    chain_key: bytes,
    height: int,
    prev_hash: bytes,
    created_at: int,
    transactions: Iterable[Transaction],
) -> bytes:
    txs = tuple(transactions)
    parts = [
        _field(chain_key),
        _int(height),
        _field(prev_hash),
        _int(created_at),
        _int(len(txs)),
    ]
    for tx in txs:
        parts.append(_field(tx.tx_id.encode("utf-8")))
        parts.append(_field(digest(tx.payload)))
    return b"".join(parts)


def hash_block(
    chain_key: bytes,
    height: int,
    prev_hash: bytes,
    created_at: int,
    transactions: Iterable[Transaction] = (),
) -> bytes:
    """Digest of a block's fields, excluding its own hash."""
    return digest(canonical_bytes(chain_key, height, prev_hash, created_at, transactions))


@dataclass(frozen=True)
class Block:
    chain_key: bytes
    height: int
    prev_hash: bytes
    transactions: tuple[Transaction, ...]
    block_hash: bytes
    created_at: int

    @classmethod
    def seal(
        cls,
        chain_key: bytes,
        height: int,
        prev_hash: bytes,
        transactions: Iterable[Transaction],
        created_at: int,
    ) -> Block:
        txs = tuple(transactions)
        h = hash_block(chain_key, height, prev_hash, created_at, txs)
        return cls(chain_key, height, prev_hash, txs, h, created_at)

    def recompute_hash(self) -> bytes:
        return hash_block(
            self.chain_key, self.height, self.prev_hash, self.created_at, self.transactions
        )

    def canonical(self) -> bytes:
        return canonical_bytes(
            self.chain_key, self.height, self.prev_hash, self.created_at, self.transactions
        )


@dataclass(frozen=True)
class ContextChain:
    scope: Scope
    subroot: Block
    blocks: tuple[Block, ...] = ()

    @property
    def key(self) -> bytes:
        return self.scope.key

    @property
    def head(self) -> Block:
        return self.blocks[-1] if self.blocks else self.subroot

    def iter_blocks(self):
        yield self.subroot
        yield from self.blocks


@dataclass(frozen=True)
class LedgerTree:
    """Genesis block plus one context chain per scope key.

    ``chains`` is never mutated in place; helpers build a fresh dict.
    """

    genesis: Block
    chains: Mapping[bytes, ContextChain]
    network_id: str

    def with_chains(self, chains: Mapping[bytes, ContextChain]) -> LedgerTree:
        return LedgerTree(self.genesis, dict(chains), self.network_id)

    def sorted_chains(self) -> list[ContextChain]:
        return [self.chains[k] for k in sorted(self.chains)]

    def transaction_ids(self) -> set[str]:
        return {
            tx.tx_id
            for chain in self.chains.values()
            for b in chain.blocks
            for tx in b.transactions
        }


def genesis_key(network_id: str) -> bytes:
    return digest(network_id.encode("utf-8"))


def make_genesis(network_id: str, created_at: int = 0) -> LedgerTree:
    if not network_id:
        raise InvalidArgument("network_id must be non-empty")
    g = Block.seal(genesis_key(network_id), 0, ZERO_HASH, (), created_at)
    return LedgerTree(genesis=g, chains={}, network_id=network_id)


@dataclass(frozen=True)
class Violation:
    chain_key: bytes | None
    height: int | None
    kind: str
    detail: str

    def __str__(self) -> str:
        where = "genesis" if self.chain_key is None else self.chain_key.hex()[:16]
        h = "-" if self.height is None else str(self.height)
        return f"{where}@{h} {self.kind}: {self.detail}"


@dataclass(frozen=True)
class VerificationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[tuple[bytes | None, int | None, str]]:
        return {(v.chain_key, v.height, v.kind) for v in self.violations}


# Violation kinds reported by verify_tree.
GENESIS_MALFORMED = "genesis-malformed"
GENESIS_HASH = "genesis-hash-mismatch"
KEY_MISMATCH = "key-mismatch"
DUPLICATE_SCOPE = "duplicate-scope"
SCOPE_INVALID = "scope-invalid"
SUBROOT_LINK = "subroot-link-break"
SUBROOT_MALFORMED = "subroot-malformed"
CHAIN_KEY = "chain-key-mismatch"
HEIGHT_GAP = "height-gap"
LINK_BREAK = "link-break"
HASH_MISMATCH = "hash-mismatch"
EMPTY_BLOCK = "empty-block"
TX_SCOPE = "tx-scope-mismatch"
DUPLICATE_TX = "duplicate-tx"


def verify_tree(tree: LedgerTree) -> VerificationReport:
    """Check every hash, link, height and scope in ``tree``.

    Links are checked against *recomputed* predecessor hashes, so a tampered
    payload shows up both at its own block and at the block after it.
    """
    out: list[Violation] = []
    g = tree.genesis
    if g.height != 0 or g.prev_hash != ZERO_HASH or g.transactions:
        out.append(Violation(None, 0, GENESIS_MALFORMED, "genesis must be an empty height-0 block"))
    genesis_hash = g.recompute_hash()
    if genesis_hash != g.block_hash:
        out.append(Violation(None, 0, GENESIS_HASH, "stored genesis hash does not match contents"))

    seen_scopes: dict[bytes, bytes] = {}
    seen_tx: set[str] = set()
    for map_key in sorted(tree.chains):
        chain = tree.chains[map_key]
        scope = chain.scope
        if not scope.is_canonical():
            out.append(Violation(map_key, None, SCOPE_INVALID, "scope is not canonical"))
        if scope.key != map_key:
            out.append(Violation(map_key, None, KEY_MISMATCH, "map key differs from scope key"))
        if scope.key in seen_scopes:
            out.append(Violation(map_key, None, DUPLICATE_SCOPE, f"scope shared with chain {seen_scopes[scope.key].hex()[:16]}"))
        seen_scopes.setdefault(scope.key, map_key)

        sr = chain.subroot
        if sr.height != 0 or sr.transactions:
            out.append(Violation(map_key, 0, SUBROOT_MALFORMED, "subroot must be an empty height-0 block"))
        if sr.prev_hash != genesis_hash:
            out.append(Violation(map_key, 0, SUBROOT_LINK, "subroot does not link to genesis"))

        prev_actual = None
        for i, b in enumerate(chain.iter_blocks()):
            if b.chain_key != map_key:
                out.append(Violation(map_key, b.height, CHAIN_KEY, "block chain_key differs from chain"))
            actual = b.recompute_hash()
            if actual != b.block_hash:
                out.append(Violation(map_key, b.height, HASH_MISMATCH, "stored hash does not match contents"))
            if i > 0:
                if b.height != i:
                    out.append(Violation(map_key, b.height, HEIGHT_GAP, f"expected height {i}"))
                if b.prev_hash != prev_actual:
                    out.append(Violation(map_key, b.height, LINK_BREAK, "prev_hash does not match predecessor"))
                if not b.transactions:
                    out.append(Violation(map_key, b.height, EMPTY_BLOCK, "non-structural block carries no transactions"))
            for tx in b.transactions:
                if tx.declared_scope.key != map_key or tx.declared_scope.key != scope_key(tx.declared_scope.members):
                    out.append(Violation(map_key, b.height, TX_SCOPE, f"tx {tx.tx_id!r} declares a different scope"))
                if tx.tx_id in seen_tx:
                    out.append(Violation(map_key, b.height, DUPLICATE_TX, f"tx {tx.tx_id!r} appears more than once"))
                seen_tx.add(tx.tx_id)
            prev_actual = actual
    return VerificationReport(tuple(out))


def _identity_json(m: Identity) -> str:
    return m.kind.value[0] + m.id


def tree_bytes(tree: LedgerTree) -> bytes:
    """Full, order-independent byte image of a tree, payloads included.

    Two replicas hold the same ledger iff their images are equal.
    """
    parts = [_field(tree.network_id.encode("utf-8")), _field(tree.genesis.canonical()), _field(tree.genesis.block_hash)]
    for chain in tree.sorted_chains():
        parts.append(_field(chain.key))
        parts.append(_int(len(chain.scope)))
        for m in chain.scope.members:
            parts.append(_field(_identity_json(m).encode("utf-8")))
        for b in chain.iter_blocks():
            parts.append(_field(b.canonical()))
            parts.append(_field(b.block_hash))
            for tx in b.transactions:
                parts.append(_field(tx.payload))
                parts.append(_int(tx.submitted_at))
                parts.append(_field(tx.declared_scope.key))
    return b"".join(parts)
