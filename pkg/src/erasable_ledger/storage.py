"""On-disk replica layout.

    <root>/genesis.json
    <root>/chains/<hex scope key>/subroot.json
    <root>/chains/<hex scope key>/blocks.jsonl     one block per line, ascending height
    <root>/deletion_journal.jsonl                  one applied deletion per line

Every JSON document is written with sorted keys, no insignificant whitespace
and ASCII escaping, so equal replicas give byte-equal directories. Binary
values (hashes, payloads) are lowercase hex. ``canonical`` holds the exact
bytes that were hashed. It is informative only; loading recomputes it.

Deleting a chain and saving again removes its directory, so erased payloads
no longer exist anywhere under ``<root>``. The journal stores scope keys and
decision metadata, never identities.
"""

from __future__ import annotations

import json
import logging
import shutil
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

from .core import Block, ContextChain, Identity, LedgerTree, Scope, Transaction, verify_tree
from .errors import CorruptLayout, IntegrityFailure, InvalidArgument

log = logging.getLogger(__name__)

GENESIS_FILE = "genesis.json"
CHAINS_DIR = "chains"
SUBROOT_FILE = "subroot.json"
BLOCKS_FILE = "blocks.jsonl"
JOURNAL_FILE = "deletion_journal.jsonl"


@dataclass(frozen=True)
class JournalEntry:
    request_id: str
    chain_key: str  # hex
    keep_subroot: bool
    decided_at: int
    reason: str = ""


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _identity_row(m: Identity) -> dict:
    return {"id": m.id, "kind": m.kind.value}


def _block_row(b: Block) -> dict:
    return {
        "block_hash": b.block_hash.hex(),
        "canonical": b.canonical().hex(),
        "chain_key": b.chain_key.hex(),
        "created_at": b.created_at,
        "height": b.height,
        "prev_hash": b.prev_hash.hex(),
        "transactions": [
            {
                "declared_scope": [_identity_row(m) for m in tx.declared_scope.members],
                "payload": tx.payload.hex(),
                "submitted_at": tx.submitted_at,
                "tx_id": tx.tx_id,
            }
            for tx in b.transactions
        ],
    }


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="ascii")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def save_replica(tree: LedgerTree, journal: list[JournalEntry], root: str | Path) -> None:
    root = Path(root)
    chains_dir = root / CHAINS_DIR
    try:
        chains_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {chains_dir}: {exc}") from exc

    genesis = _block_row(tree.genesis)
    del genesis["transactions"]
    genesis["network_id"] = tree.network_id
    _write(root / GENESIS_FILE, dumps(genesis) + "\n")

    wanted = {key.hex() for key in tree.chains}
    for stale in sorted(chains_dir.iterdir()):
        if stale.name not in wanted:
            log.debug("removing deleted chain directory %s", stale)
            if stale.is_dir():
                shutil.rmtree(stale)
            else:
                stale.unlink()

    for chain in tree.sorted_chains():
        cdir = chains_dir / chain.key.hex()
        cdir.mkdir(exist_ok=True)
        sub = _block_row(chain.subroot)
        del sub["transactions"]
        sub["scope"] = [_identity_row(m) for m in chain.scope.members]
        _write(cdir / SUBROOT_FILE, dumps(sub) + "\n")
        _write(cdir / BLOCKS_FILE, "".join(dumps(_block_row(b)) + "\n" for b in chain.blocks))

    _write(root / JOURNAL_FILE, "".join(dumps(asdict(e)) + "\n" for e in journal))


# -- loading ---------------------------------------------------------------


def _read_json(path: Path, line: int | None = None, text: str | None = None) -> dict:
    where = f"{path}:{line}" if line is not None else str(path)
    try:
        if text is None:
            text = path.read_text(encoding="ascii")
        obj = json.loads(text)
    except FileNotFoundError as exc:
        raise CorruptLayout(f"missing {path}") from exc
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptLayout(f"unreadable {where}: {exc}") from exc
    if not isinstance(obj, dict):
        raise CorruptLayout(f"{where}: expected a JSON object")
    return obj


def _hex(row: dict, name: str, where: str) -> bytes:
    try:
        return bytes.fromhex(row[name])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptLayout(f"{where}: bad field {name!r}") from exc


def _int(row: dict, name: str, where: str) -> int:
    v = row.get(name)
    if not isinstance(v, int) or isinstance(v, bool):
        raise CorruptLayout(f"{where}: bad field {name!r}")
    return v


def _identities(rows: Any, where: str) -> tuple[Identity, ...]:
    try:
        return tuple(Identity(r["kind"], r["id"]) for r in rows)
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptLayout(f"{where}: bad identity list: {exc}") from exc


def _scope(rows: Any, where: str) -> Scope:
    try:
        return Scope(_identities(rows, where))
    except InvalidArgument as exc:
        raise CorruptLayout(f"{where}: {exc}") from exc


def _block(row: dict, where: str, with_txs: bool = True) -> Block:
    txs = []
    if with_txs:
        raw = row.get("transactions")
        if not isinstance(raw, list):
            raise CorruptLayout(f"{where}: bad field 'transactions'")
        for t in raw:
            if not isinstance(t, dict) or not isinstance(t.get("tx_id"), str):
                raise CorruptLayout(f"{where}: malformed transaction")
            txs.append(
                Transaction(
                    tx_id=t["tx_id"],
                    payload=_hex(t, "payload", where),
                    declared_scope=_scope(t.get("declared_scope"), where),
                    submitted_at=_int(t, "submitted_at", where),
                )
            )
    return Block(
        chain_key=_hex(row, "chain_key", where),
        height=_int(row, "height", where),
        prev_hash=_hex(row, "prev_hash", where),
        transactions=tuple(txs),
        block_hash=_hex(row, "block_hash", where),
        created_at=_int(row, "created_at", where),
    )


def _chain(cdir: Path) -> tuple[bytes, ContextChain]:
    try:
        key = bytes.fromhex(cdir.name)
    except ValueError as exc:
        raise CorruptLayout(f"{cdir}: directory name is not a hex scope key") from exc
    sub_path = cdir / SUBROOT_FILE
    sub_row = _read_json(sub_path)
    subroot = _block(sub_row, str(sub_path), with_txs=False)
    scope = _scope(sub_row.get("scope"), str(sub_path))
    blocks_path = cdir / BLOCKS_FILE
    try:
        lines = blocks_path.read_text(encoding="ascii").splitlines()
    except FileNotFoundError as exc:
        raise CorruptLayout(f"missing {blocks_path}") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise CorruptLayout(f"unreadable {blocks_path}: {exc}") from exc
    blocks = []
    for n, text in enumerate(lines, start=1):
        row = _read_json(blocks_path, n, text)
        blocks.append(_block(row, f"{blocks_path}:{n}"))
    return key, ContextChain(scope, subroot, tuple(blocks))


def load_replica(root: str | Path) -> tuple[LedgerTree, list[JournalEntry]]:
    """Read a replica directory and verify it.

    Raises:
        CorruptLayout: files are missing or unparseable.
        IntegrityFailure: the tree parses but does not verify; the report is
            attached as ``exc.report``.
    """
    root = Path(root)
    if not root.is_dir():
        raise CorruptLayout(f"no replica directory at {root}")
    g_path = root / GENESIS_FILE
    g_row = _read_json(g_path)
    network_id = g_row.get("network_id")
    if not isinstance(network_id, str) or not network_id:
        raise CorruptLayout(f"{g_path}: bad field 'network_id'")
    genesis = _block(g_row, str(g_path), with_txs=False)

    chains_dir = root / CHAINS_DIR
    if not chains_dir.is_dir():
        raise CorruptLayout(f"missing {chains_dir}")
    chains = dict(_chain(d) for d in sorted(chains_dir.iterdir()))

    j_path = root / JOURNAL_FILE
    try:
        j_lines = j_path.read_text(encoding="ascii").splitlines()
    except FileNotFoundError as exc:
        raise CorruptLayout(f"missing {j_path}") from exc
    journal = []
    for n, text in enumerate(j_lines, start=1):
        row = _read_json(j_path, n, text)
        try:
            journal.append(JournalEntry(**row))
        except TypeError as exc:
            raise CorruptLayout(f"{j_path}:{n}: {exc}") from exc

    tree = LedgerTree(genesis, chains, network_id)
    report = verify_tree(tree)
    if not report.ok:
        raise IntegrityFailure(
            f"{root}: {len(report.violations)} integrity violation(s)", report
        )
    return tree, journal
