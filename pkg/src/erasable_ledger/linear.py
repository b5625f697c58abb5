"""Single linear hash chain, the conventional layout context chains replace.

Kept as a baseline: removing one person's blocks from it necessarily breaks
the chaining of whatever follows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from .core import Block, Transaction, ZERO_HASH, genesis_key


@dataclass(frozen=True)
class LinearLedger:
    network_id: str
    blocks: tuple[Block, ...]

    @classmethod
    def build(cls, network_id: str, txs: Iterable[Transaction], created_at: int = 0) -> LinearLedger:
        key = genesis_key(network_id)
        blocks = [Block.seal(key, 0, ZERO_HASH, (), created_at)]
        for tx in txs:
            prev = blocks[-1]
            blocks.append(Block.seal(key, prev.height + 1, prev.block_hash, (tx,), tx.submitted_at))
        return cls(network_id, tuple(blocks))

    def without(self, drop: Callable[[Transaction], bool]) -> LinearLedger:
        """Physically remove blocks holding a matching transaction, re-linking nothing."""
        kept = tuple(b for b in self.blocks if not any(drop(tx) for tx in b.transactions))
        return LinearLedger(self.network_id, kept)

    def broken_links(self) -> list[int]:
        """Indices whose block fails its hash or its link to the previous block."""
        bad = []
        for i, b in enumerate(self.blocks):
            if b.recompute_hash() != b.block_hash:
                bad.append(i)
            elif i == 0 and b.prev_hash != ZERO_HASH:
                bad.append(i)
            elif i > 0 and (b.prev_hash != self.blocks[i - 1].block_hash or b.height != i):
                bad.append(i)
        return bad

    def verify(self) -> bool:
        return not self.broken_links()
