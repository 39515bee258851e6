import json
import logging
from typing import Any, Dict, List

from rxn.utilities.files import (
    PathLike,
    dump_list_to_file,
    get_file_size_as_string,
    iterate_lines_from_file,
)

from .ledger import (
    Block,
    EventKind,
    LedgerChain,
    PendingTransaction,
    SupplyChainEvent,
)

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


class LedgerFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _transaction_to_dict(tx: PendingTransaction) -> Dict[str, Any]:
    return {
        "id": tx.id,
        "events": [e.to_canonical() for e in tx.events],
        "required_signers": list(tx.required_signers),
        "threshold": tx.threshold,
        "signatures": {s: sig.hex() for s, sig in tx.signatures.items()},
    }


def block_to_dict(block: Block) -> Dict[str, Any]:
    content = block.header()
    content["block_hash"] = block.block_hash
    content["transactions"] = [_transaction_to_dict(tx) for tx in block.transactions]
    return content


def block_to_line(block: Block) -> str:
    """One JSON object, keys sorted, no whitespace."""
    return json.dumps(block_to_dict(block), sort_keys=True, separators=(",", ":"))


def _block_from_dict(content: Dict[str, Any]) -> Block:
    transactions = [
        PendingTransaction(
            id=tx["id"],
            events=[
                SupplyChainEvent(
                    kind=EventKind(e["kind"]),
                    payload=e["payload"],
                    timestamp=e["timestamp"],
                )
                for e in tx["events"]
            ],
            required_signers=tx["required_signers"],
            threshold=tx["threshold"],
            signatures={s: bytes.fromhex(sig) for s, sig in tx["signatures"].items()},
        )
        for tx in content["transactions"]
    ]
    return Block(
        height=content["height"],
        previous_hash=content["previous_hash"],
        timestamp=content["timestamp"],
        transactions=transactions,
        transactions_root=content["transactions_root"],
        signatures_root=content["signatures_root"],
        block_hash=content["block_hash"],
    )


def block_from_line(line: str, line_number: int = 1) -> Block:
    try:
        content = json.loads(line)
    except json.JSONDecodeError as e:
        raise LedgerFormatError(line_number, f"invalid JSON ({e.msg})") from e
    if not isinstance(content, dict):
        raise LedgerFormatError(line_number, "expected a JSON object")
    try:
        return _block_from_dict(content)
    except KeyError as e:
        raise LedgerFormatError(line_number, f"missing key {e}") from e
    except (TypeError, ValueError, AttributeError) as e:
        raise LedgerFormatError(line_number, str(e)) from e


def dump_chain(chain: LedgerChain, path: PathLike) -> None:
    """
    Write a chain as JSON lines, one block per line from genesis.
    """
    dump_list_to_file((block_to_line(b) for b in chain.blocks), path)
    logger.info(
        f'Wrote chain of height {chain.height} to "{path}" '
        f"(size: {get_file_size_as_string(path)})."
    )


def load_chain(path: PathLike) -> LedgerChain:
    """
    Read a chain written by dump_chain.

    The blocks are parsed but not verified; use verify_chain for that.

    Raises:
        LedgerFormatError: naming the first line that cannot be parsed.
    """
    blocks: List[Block] = []
    for line_number, line in enumerate(iterate_lines_from_file(path), 1):
        if not line.strip():
            raise LedgerFormatError(line_number, "empty line")
        blocks.append(block_from_line(line, line_number))
    if not blocks:
        raise LedgerFormatError(1, "no blocks")
    return LedgerChain(blocks)
