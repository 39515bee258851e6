"""
Simulated permissioned ledger with M-of-N transaction approval.

Blocks are hash-linked over a canonical, length-prefixed serialization (see
``canonical_bytes``). A transaction enters a block only once at least K of
its required signers signed its content hash. Signers are registered on the
chain itself, as self-signed FarmRegistration events.
"""

import hashlib
import logging
import numbers
import struct
from enum import Enum
from typing import (
    Any,
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

import attr

from .signing import DEFAULT_SCHEME, SignatureScheme

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

GENESIS_PREVIOUS_HASH = "0" * 64


class LedgerError(ValueError):
    pass


class UnknownSignerError(LedgerError):
    pass


class DuplicateSignerError(LedgerError):
    pass


class MalformedEventError(LedgerError):
    pass


class SignatureError(LedgerError):
    pass


class UnderSignedTransactionError(LedgerError):
    def __init__(self, transaction_id: str, valid: int, threshold: int):
        super().__init__(
            f"Transaction {transaction_id} has {valid} valid signature(s), "
            f"{threshold} required."
        )
        self.transaction_id = transaction_id
        self.valid = valid
        self.threshold = threshold


class StakeholderRole(Enum):
    SUPPLIER = "supplier"
    PRODUCER = "producer"
    DISTRIBUTOR = "distributor"
    RETAILER = "retailer"
    AUDITOR = "auditor"


class EventKind(Enum):
    FARM_REGISTRATION = "FarmRegistration"
    HATCH = "Hatch"
    MEASUREMENT = "Measurement"
    PROCESSING = "Processing"
    DISTRIBUTION = "Distribution"
    RETAIL_DELIVERY = "RetailDelivery"
    REORDER = "Reorder"


REQUIRED_PAYLOAD_KEYS: Dict[EventKind, Tuple[str, ...]] = {
    EventKind.FARM_REGISTRATION: ("stakeholder_id", "role", "verification_key"),
    EventKind.HATCH: ("production_type", "period", "location"),
    EventKind.MEASUREMENT: ("production_type", "period", "location", "validator_id"),
    EventKind.PROCESSING: ("production_type", "period", "location"),
    EventKind.DISTRIBUTION: ("location", "quantity"),
    EventKind.RETAIL_DELIVERY: ("location", "quantity", "price"),
    EventKind.REORDER: ("quantity", "period", "location"),
}


def _length(n: int) -> bytes:
    return struct.pack(">Q", n)


def canonical_bytes(value: Any) -> bytes:
    """
    Canonical serialization used for every hash of the ledger.

    Each value is a one-byte tag followed by its body; lengths and counts
    are 8-byte big-endian integers:

    - ``n``: None (no body)
    - ``b``: bool, one byte 0x00 / 0x01
    - ``i``: integer, length + ASCII decimal
    - ``f``: float, length + ASCII of ``format(x, ".17g")``
    - ``s``: string, length + UTF-8 bytes
    - ``l``: list or tuple, count + items
    - ``d``: mapping with string keys, count + (key as ``s``, value) pairs
      sorted by key
    """
    if value is None:
        return b"n"
    if isinstance(value, bool):
        return b"b" + (b"\x01" if value else b"\x00")
    if isinstance(value, numbers.Integral):
        body = str(int(value)).encode("ascii")
        return b"i" + _length(len(body)) + body
    if isinstance(value, float):
        body = format(value, ".17g").encode("ascii")
        return b"f" + _length(len(body)) + body
    if isinstance(value, str):
        body = value.encode("utf-8")
        return b"s" + _length(len(body)) + body
    if isinstance(value, (list, tuple)):
        return b"l" + _length(len(value)) + b"".join(canonical_bytes(v) for v in value)
    if isinstance(value, Mapping):
        if not all(isinstance(k, str) for k in value):
            raise TypeError("Only string keys can be serialized canonically.")
        parts = [
            canonical_bytes(key) + canonical_bytes(value[key]) for key in sorted(value)
        ]
        return b"d" + _length(len(parts)) + b"".join(parts)
    raise TypeError(f"Cannot serialize {type(value).__name__} canonically.")


def hash_value(value: Any) -> str:
    """Lowercase hex SHA-256 of the canonical serialization."""
    return hashlib.sha256(canonical_bytes(value)).hexdigest()


@attr.s(auto_attribs=True, frozen=True)
class Stakeholder:
    id: str
    role: StakeholderRole
    key: bytes = attr.ib(repr=False)


@attr.s(auto_attribs=True, frozen=True)
class RegisteredSigner:
    id: str
    role: StakeholderRole
    verification_key: bytes = attr.ib(repr=False)
    height: int


@attr.s(auto_attribs=True, frozen=True)
class SupplyChainEvent:
    kind: EventKind
    payload: Dict[str, Any] = attr.ib(converter=dict)
    timestamp: int = 0

    def to_canonical(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "payload": self.payload,
            "timestamp": self.timestamp,
        }


def validate_event(event: SupplyChainEvent) -> None:
    """Raise MalformedEventError if the payload misses keys or has invalid values."""
    missing = [k for k in REQUIRED_PAYLOAD_KEYS[event.kind] if k not in event.payload]
    if missing:
        raise MalformedEventError(
            f"{event.kind.value} event misses payload key(s) {', '.join(missing)}."
        )
    if not isinstance(event.timestamp, numbers.Integral) or event.timestamp < 0:
        raise MalformedEventError(f"Invalid timestamp {event.timestamp!r}.")
    try:
        canonical_bytes(event.payload)
    except TypeError as e:
        raise MalformedEventError(f"{event.kind.value} payload: {e}") from e

    for key in ("quantity", "price"):
        if key not in event.payload:
            continue
        value = event.payload[key]
        if isinstance(value, bool) or not isinstance(value, numbers.Real):
            raise MalformedEventError(f"{event.kind.value} {key} must be a number.")
        if value < 0:
            raise MalformedEventError(f"{event.kind.value} {key} must be >= 0, got {value}.")
    if event.kind is EventKind.REORDER and not event.payload["quantity"] > 0:
        raise MalformedEventError(
            f'Reorder quantity must be > 0, got {event.payload["quantity"]}.'
        )


def _sorted_signers(signers: Iterable[str]) -> Tuple[str, ...]:
    return tuple(sorted(set(signers)))


def compute_transaction_id(
    events: Sequence[SupplyChainEvent], required_signers: Iterable[str], threshold: int
) -> str:
    return hash_value(
        {
            "events": [e.to_canonical() for e in events],
            "required_signers": list(_sorted_signers(required_signers)),
            "threshold": threshold,
        }
    )


@attr.s(auto_attribs=True, frozen=True)
class PendingTransaction:
    """
    Transaction waiting for signatures; ``id`` is its content hash at proposal.
    """

    id: str
    events: Tuple[SupplyChainEvent, ...] = attr.ib(converter=tuple)
    required_signers: Tuple[str, ...] = attr.ib(converter=_sorted_signers)
    threshold: int
    signatures: Dict[str, bytes] = attr.ib(factory=dict, converter=dict)

    def content_id(self) -> str:
        """Id recomputed from the current content."""
        return compute_transaction_id(self.events, self.required_signers, self.threshold)

    def valid_signers(
        self, keys: Mapping[str, bytes], scheme: SignatureScheme = DEFAULT_SCHEME
    ) -> List[str]:
        """Required signers whose signature verifies against the recomputed id."""
        message = self.content_id().encode("ascii")
        return [
            signer
            for signer, signature in sorted(self.signatures.items())
            if signer in self.required_signers
            and signer in keys
            and scheme.verify(keys[signer], message, signature)
        ]


@attr.s(auto_attribs=True, frozen=True)
class Block:
    height: int
    previous_hash: str
    timestamp: int
    transactions: Tuple[PendingTransaction, ...] = attr.ib(converter=tuple)
    transactions_root: str
    signatures_root: str
    block_hash: str

    def header(self) -> Dict[str, Any]:
        return {
            "height": self.height,
            "previous_hash": self.previous_hash,
            "timestamp": self.timestamp,
            "transactions_root": self.transactions_root,
            "signatures_root": self.signatures_root,
        }


def compute_transactions_root(transactions: Sequence[PendingTransaction]) -> str:
    return hash_value([tx.content_id() for tx in transactions])


def compute_signatures_root(transactions: Sequence[PendingTransaction]) -> str:
    return hash_value(
        [
            [tx.id, signer, signature.hex()]
            for tx in transactions
            for signer, signature in sorted(tx.signatures.items())
        ]
    )


def compute_block_hash(block: Block) -> str:
    return hash_value(block.header())


def _make_block(
    height: int,
    previous_hash: str,
    timestamp: int,
    transactions: Sequence[PendingTransaction],
) -> Block:
    partial = Block(
        height=height,
        previous_hash=previous_hash,
        timestamp=timestamp,
        transactions=transactions,
        transactions_root=compute_transactions_root(transactions),
        signatures_root=compute_signatures_root(transactions),
        block_hash="",
    )
    return attr.evolve(partial, block_hash=compute_block_hash(partial))


def _registered_in(
    transactions: Sequence[PendingTransaction], height: int
) -> Iterator[RegisteredSigner]:
    for tx in transactions:
        for event in tx.events:
            if event.kind is EventKind.FARM_REGISTRATION:
                payload = event.payload
                yield RegisteredSigner(
                    id=str(payload["stakeholder_id"]),
                    role=StakeholderRole(payload["role"]),
                    verification_key=bytes.fromhex(str(payload["verification_key"])),
                    height=height,
                )


@attr.s(auto_attribs=True, frozen=True)
class LedgerChain:
    """
    Ordered blocks from genesis; every operation returns a new chain.
    """

    blocks: Tuple[Block, ...] = attr.ib(converter=tuple)
    scheme: SignatureScheme = attr.ib(default=DEFAULT_SCHEME, eq=False, repr=False)

    @classmethod
    def create(
        cls, timestamp: int = 0, scheme: SignatureScheme = DEFAULT_SCHEME
    ) -> "LedgerChain":
        """New chain holding only the (empty) genesis block."""
        return cls((_make_block(0, GENESIS_PREVIOUS_HASH, timestamp, []),), scheme)

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.height

    def registry(self) -> Dict[str, RegisteredSigner]:
        signers: Dict[str, RegisteredSigner] = {}
        for block in self.blocks:
            for signer in _registered_in(block.transactions, block.height):
                signers.setdefault(signer.id, signer)
        return signers

    def verification_keys(self) -> Dict[str, bytes]:
        return {s.id: s.verification_key for s in self.registry().values()}

    def events(
        self, kind: Optional[EventKind] = None
    ) -> Iterator[Tuple[int, SupplyChainEvent]]:
        """(height, event) pairs in chain order, optionally of one kind."""
        for block in self.blocks:
            for tx in block.transactions:
                for event in tx.events:
                    if kind is None or event.kind is kind:
                        yield block.height, event


def _build_transaction(
    events: Sequence[SupplyChainEvent], required: Iterable[str], threshold: int
) -> PendingTransaction:
    required_signers = _sorted_signers(required)
    return PendingTransaction(
        id=compute_transaction_id(events, required_signers, threshold),
        events=events,
        required_signers=required_signers,
        threshold=threshold,
    )


def _check_event_order(events: Sequence[SupplyChainEvent]) -> None:
    for earlier, later in zip(events, events[1:]):
        if later.timestamp < earlier.timestamp:
            raise MalformedEventError(
                f"Event timestamps decrease ({earlier.timestamp} -> {later.timestamp})."
            )


def propose_transaction(
    chain: LedgerChain,
    events: Sequence[SupplyChainEvent],
    required: Iterable[str],
    threshold: int,
) -> PendingTransaction:
    """
    Create a pending transaction; the chain itself is not modified.

    Args:
        chain: chain holding the signer registry.
        events: supply-chain events to commit together.
        required: ids of the stakeholders allowed to sign.
        threshold: number K of signatures needed before sealing.

    Returns:
        Content-addressed transaction with no signatures.
    """
    required_signers = _sorted_signers(required)
    if not required_signers:
        raise LedgerError("A transaction needs at least one required signer.")
    registry = chain.registry()
    unknown = [s for s in required_signers if s not in registry]
    if unknown:
        raise UnknownSignerError(f"Unregistered signer(s): {', '.join(unknown)}.")
    if not 1 <= threshold <= len(required_signers):
        raise LedgerError(
            f"Threshold must be in [1, {len(required_signers)}], got {threshold}."
        )
    if not events:
        raise MalformedEventError("A transaction needs at least one event.")
    for event in events:
        if event.kind is EventKind.FARM_REGISTRATION:
            raise MalformedEventError("Signers are registered with register_signer.")
        validate_event(event)
    _check_event_order(events)
    return _build_transaction(events, required_signers, threshold)


def add_signature(
    tx: PendingTransaction, signer: Stakeholder, scheme: SignatureScheme = DEFAULT_SCHEME
) -> PendingTransaction:
    """Sign the transaction id; returns the transaction with the extra signature."""
    if signer.id not in tx.required_signers:
        raise SignatureError(f'"{signer.id}" is not a required signer of {tx.id}.')
    if signer.id in tx.signatures:
        raise SignatureError(f'"{signer.id}" already signed {tx.id}.')
    signatures = dict(tx.signatures)
    signatures[signer.id] = scheme.sign(signer.key, tx.id.encode("ascii"))
    return attr.evolve(tx, signatures=signatures)


def _seal(
    chain: LedgerChain,
    txs: Sequence[PendingTransaction],
    keys: Mapping[str, bytes],
    timestamp: Optional[int],
) -> LedgerChain:
    for tx in txs:
        if tx.content_id() != tx.id:
            raise SignatureError(f"Transaction {tx.id} was modified after proposal.")
        valid = len(tx.valid_signers(keys, chain.scheme))
        if valid < tx.threshold:
            raise UnderSignedTransactionError(tx.id, valid, tx.threshold)

    all_events = [event for tx in txs for event in tx.events]
    _check_event_order(all_events)
    latest = max([chain.tip.timestamp] + [e.timestamp for e in all_events])
    if timestamp is None:
        timestamp = latest
    elif timestamp < latest:
        raise LedgerError(f"Block timestamp {timestamp} precedes its content ({latest}).")

    block = _make_block(chain.height + 1, chain.tip.block_hash, timestamp, txs)
    logger.debug(f"Sealed block {block.height} with {len(txs)} transaction(s).")
    return attr.evolve(chain, blocks=chain.blocks + (block,))


def seal_block(
    chain: LedgerChain,
    txs: Sequence[PendingTransaction],
    timestamp: Optional[int] = None,
) -> LedgerChain:
    """
    Append a block holding the given transactions.

    Args:
        chain: chain to extend.
        txs: transactions, each with at least K valid signatures.
        timestamp: block timestamp; defaults to the latest event or block time.

    Raises:
        UnderSignedTransactionError: naming the first deficient transaction.
    """
    return _seal(chain, txs, chain.verification_keys(), timestamp)


def register_signer(
    chain: LedgerChain, stakeholder: Stakeholder, timestamp: Optional[int] = None
) -> LedgerChain:
    """
    Register a stakeholder by sealing its self-signed FarmRegistration event.
    """
    if stakeholder.id in chain.registry():
        raise DuplicateSignerError(f'Stakeholder "{stakeholder.id}" is already registered.')
    verification_key = chain.scheme.verification_key(stakeholder.key)
    event = SupplyChainEvent(
        kind=EventKind.FARM_REGISTRATION,
        payload={
            "stakeholder_id": stakeholder.id,
            "role": stakeholder.role.value,
            "verification_key": verification_key.hex(),
        },
        timestamp=chain.tip.timestamp if timestamp is None else timestamp,
    )
    validate_event(event)
    tx = add_signature(
        _build_transaction([event], [stakeholder.id], 1), stakeholder, chain.scheme
    )
    keys = chain.verification_keys()
    keys[stakeholder.id] = verification_key
    logger.info(f'Registering {stakeholder.role.value} "{stakeholder.id}".')
    return _seal(chain, [tx], keys, timestamp)


@attr.s(auto_attribs=True, frozen=True)
class VerificationReport:
    ok: bool
    bad_height: Optional[int] = None
    reason: str = ""

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return f"bad height {self.bad_height}: {self.reason}"


def _verify_block(
    block: Block, index: int, previous: Optional[Block], keys: Dict[str, bytes], scheme
) -> Optional[str]:
    if block.height != index:
        return f"height mismatch (expected {index}, found {block.height})"
    expected_previous = (
        GENESIS_PREVIOUS_HASH if previous is None else compute_block_hash(previous)
    )
    if block.previous_hash != expected_previous:
        return "previous_hash mismatch"
    if block.transactions_root != compute_transactions_root(block.transactions):
        return "transactions_root mismatch"

    for tx in block.transactions:
        if tx.content_id() != tx.id:
            return f"transaction id mismatch for {tx.id}"

    for tx in block.transactions:
        if not 1 <= tx.threshold <= len(tx.required_signers):
            return f"invalid threshold in transaction {tx.id}"
        tx_keys = dict(keys)
        for signer in _registered_in([tx], block.height):
            tx_keys.setdefault(signer.id, signer.verification_key)
        valid = tx.valid_signers(tx_keys, scheme)
        invalid = sorted(set(tx.signatures) - set(valid))
        if invalid:
            return f"invalid signature from {invalid[0]} in transaction {tx.id}"
        if len(valid) < tx.threshold:
            return (
                f"signature threshold not met in transaction {tx.id} "
                f"({len(valid)} of {tx.threshold})"
            )

    if block.signatures_root != compute_signatures_root(block.transactions):
        return "signatures_root mismatch"
    if block.block_hash != compute_block_hash(block):
        return "block_hash mismatch"

    for signer in _registered_in(block.transactions, block.height):
        if signer.id in keys:
            return f'duplicate registration of "{signer.id}"'
        keys[signer.id] = signer.verification_key
    return None


def verify_chain(chain: LedgerChain) -> VerificationReport:
    """
    Walk the chain from genesis and report the first violation.

    Per block, the checks run in this order: height, previous hash,
    transactions root, transaction ids, signatures, signatures root, block hash.
    """
    if not chain.blocks:
        return VerificationReport(False, 0, "empty chain")
    keys: Dict[str, bytes] = {}
    previous: Optional[Block] = None
    for index, block in enumerate(chain.blocks):
        reason = _verify_block(block, index, previous, keys, chain.scheme)
        if reason is not None:
            logger.warning(f"Chain verification failed at height {index}: {reason}")
            return VerificationReport(False, index, reason)
        previous = block
    return VerificationReport(True)


class MonitoringAction(Enum):
    PROPOSED = "proposed"
    SIGNED = "signed"
    SEALED = "sealed"
    REJECTED = "rejected"


@attr.s(auto_attribs=True, frozen=True)
class MonitoringRecord:
    action: MonitoringAction
    transaction_id: str
    detail: str = ""


class SigningWorkflow:
    """
    Propose, sign and seal against one authoritative chain, with a monitoring log.

    Single writer: the workflow owns its chain and is not thread-safe.
    """

    def __init__(self, chain: LedgerChain):
        self.chain = chain
        self.log: List[MonitoringRecord] = []

    def register(self, stakeholder: Stakeholder, timestamp: Optional[int] = None) -> None:
        self.chain = register_signer(self.chain, stakeholder, timestamp)

    def propose(
        self, events: Sequence[SupplyChainEvent], required: Iterable[str], threshold: int
    ) -> PendingTransaction:
        tx = propose_transaction(self.chain, events, required, threshold)
        self.log.append(MonitoringRecord(MonitoringAction.PROPOSED, tx.id))
        return tx

    def sign(self, tx: PendingTransaction, signer: Stakeholder) -> PendingTransaction:
        signed = add_signature(tx, signer, self.chain.scheme)
        self.log.append(MonitoringRecord(MonitoringAction.SIGNED, tx.id, signer.id))
        return signed

    def seal(
        self, txs: Sequence[PendingTransaction], timestamp: Optional[int] = None
    ) -> Block:
        try:
            self.chain = seal_block(self.chain, txs, timestamp)
        except LedgerError as e:
            for tx in txs:
                self.log.append(MonitoringRecord(MonitoringAction.REJECTED, tx.id, str(e)))
            raise
        for tx in txs:
            self.log.append(
                MonitoringRecord(MonitoringAction.SEALED, tx.id, str(self.chain.height))
            )
        return self.chain.tip

    def records(self, action: MonitoringAction) -> List[MonitoringRecord]:
        return [r for r in self.log if r.action is action]
