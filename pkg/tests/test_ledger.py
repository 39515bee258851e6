import itertools
from typing import Dict, List

import attr
import numpy as np
import pytest

from chainfis.ledger import (
    DuplicateSignerError,
    EventKind,
    LedgerChain,
    MalformedEventError,
    MonitoringAction,
    SignatureError,
    SigningWorkflow,
    Stakeholder,
    StakeholderRole,
    SupplyChainEvent,
    UnderSignedTransactionError,
    UnknownSignerError,
    add_signature,
    canonical_bytes,
    hash_value,
    propose_transaction,
    register_signer,
    seal_block,
    verify_chain,
)
from chainfis.signing import DEFAULT_SCHEME, derive_key

SIGNERS = ["retailer", "distributor", "auditor"]


def _stakeholders() -> Dict[str, Stakeholder]:
    return {
        name: Stakeholder(name, StakeholderRole(name), derive_key(name))
        for name in SIGNERS + ["supplier"]
    }


def _reorder(quantity: int = 11, timestamp: int = 100) -> SupplyChainEvent:
    return SupplyChainEvent(
        EventKind.REORDER,
        {"quantity": quantity, "period": 3, "location": "retailer"},
        timestamp=timestamp,
    )


@pytest.fixture
def stakeholders() -> Dict[str, Stakeholder]:
    return _stakeholders()


@pytest.fixture
def chain(stakeholders) -> LedgerChain:
    chain = LedgerChain.create(timestamp=10)
    for name in SIGNERS:
        chain = register_signer(chain, stakeholders[name])
    return chain


def _signed(chain, stakeholders, signers: List[str], event=None):
    tx = propose_transaction(chain, [event or _reorder()], SIGNERS, 2)
    for name in signers:
        tx = add_signature(tx, stakeholders[name])
    return tx


def _three_block_chain(chain, stakeholders) -> LedgerChain:
    for timestamp in (100, 200, 300):
        tx = _signed(chain, stakeholders, ["retailer", "auditor"], _reorder(5, timestamp))
        chain = seal_block(chain, [tx])
    return chain


def test_canonical_bytes():
    assert canonical_bytes(None) == b"n"
    assert canonical_bytes(True) == b"b\x01"
    assert canonical_bytes(12) == b"i" + (2).to_bytes(8, "big") + b"12"
    assert canonical_bytes("é") == b"s" + (2).to_bytes(8, "big") + "é".encode("utf-8")
    assert canonical_bytes(0.5) == b"f" + (3).to_bytes(8, "big") + b"0.5"
    assert canonical_bytes({"b": 1, "a": 2}) == canonical_bytes({"a": 2, "b": 1})
    assert canonical_bytes([1, 2]) != canonical_bytes([12])
    assert canonical_bytes(1) != canonical_bytes(1.0)
    with pytest.raises(TypeError):
        canonical_bytes({1: "a"})
    with pytest.raises(TypeError):
        canonical_bytes(object())


def test_hash_is_lowercase_hex():
    digest = hash_value({"a": [1, "x"]})
    assert len(digest) == 64 and digest == digest.lower()


def test_registration(chain, stakeholders):
    registry = chain.registry()
    assert sorted(registry) == sorted(SIGNERS)
    assert chain.height == 3
    assert registry["auditor"].role is StakeholderRole.AUDITOR
    assert registry["auditor"].height == 3
    assert verify_chain(chain).ok

    with pytest.raises(DuplicateSignerError):
        register_signer(chain, stakeholders["retailer"])


def test_proposal_has_no_signatures_and_is_content_addressed(chain):
    tx = propose_transaction(chain, [_reorder()], SIGNERS, 2)
    assert tx.signatures == {}
    assert tx.required_signers == ("auditor", "distributor", "retailer")
    again = propose_transaction(chain, [_reorder()], reversed(SIGNERS), 2)
    assert again.id == tx.id
    assert propose_transaction(chain, [_reorder(12)], SIGNERS, 2).id != tx.id


@pytest.mark.parametrize(
    "event",
    [
        _reorder(quantity=0),
        _reorder(quantity=-3),
        SupplyChainEvent(EventKind.REORDER, {"quantity": 4, "period": 1}),
        SupplyChainEvent(
            EventKind.RETAIL_DELIVERY, {"location": "x", "quantity": 2, "price": "cheap"}
        ),
        SupplyChainEvent(EventKind.DISTRIBUTION, {"location": "x", "quantity": 1}, -5),
        SupplyChainEvent(
            EventKind.FARM_REGISTRATION,
            {"stakeholder_id": "x", "role": "supplier", "verification_key": "00"},
        ),
    ],
)
def test_malformed_events_are_rejected(chain, event):
    with pytest.raises(MalformedEventError):
        propose_transaction(chain, [event], SIGNERS, 2)


def test_proposal_validation(chain):
    with pytest.raises(UnknownSignerError):
        propose_transaction(chain, [_reorder()], ["retailer", "stranger"], 1)
    with pytest.raises(ValueError):
        propose_transaction(chain, [_reorder()], SIGNERS, 4)
    with pytest.raises(ValueError):
        propose_transaction(chain, [_reorder()], SIGNERS, 0)
    with pytest.raises(MalformedEventError):
        propose_transaction(chain, [], SIGNERS, 1)
    with pytest.raises(MalformedEventError):
        propose_transaction(chain, [_reorder(timestamp=200), _reorder(timestamp=100)], SIGNERS, 1)


def test_signatures(chain, stakeholders):
    tx = propose_transaction(chain, [_reorder()], SIGNERS, 2)
    signed = add_signature(tx, stakeholders["retailer"])
    assert len(signed.signatures) == 1
    assert tx.signatures == {}

    with pytest.raises(SignatureError):
        add_signature(signed, stakeholders["retailer"])
    with pytest.raises(SignatureError):
        add_signature(signed, stakeholders["supplier"])


def test_tampered_payload_invalidates_signatures(chain, stakeholders):
    tx = _signed(chain, stakeholders, ["retailer", "auditor"])
    assert tx.valid_signers(chain.verification_keys()) == ["auditor", "retailer"]

    tampered = attr.evolve(tx, events=[_reorder(quantity=99)])
    assert tampered.content_id() != tampered.id
    assert tampered.valid_signers(chain.verification_keys()) == []
    with pytest.raises(SignatureError):
        seal_block(chain, [tampered])


def test_threshold_is_enforced(chain, stakeholders):
    with pytest.raises(UnderSignedTransactionError) as info:
        seal_block(chain, [_signed(chain, stakeholders, ["retailer"])])
    assert info.value.valid == 1 and info.value.threshold == 2

    sealed = seal_block(chain, [_signed(chain, stakeholders, ["retailer", "distributor"])])
    assert sealed.height == chain.height + 1
    assert chain.height == 3


def test_block_timestamps(chain, stakeholders):
    tx = _signed(chain, stakeholders, ["retailer", "auditor"], _reorder(timestamp=500))
    assert seal_block(chain, [tx]).tip.timestamp == 500
    assert seal_block(chain, [tx], timestamp=600).tip.timestamp == 600
    with pytest.raises(ValueError):
        seal_block(chain, [tx], timestamp=400)


def test_sealed_chain_verifies(chain, stakeholders):
    extended = _three_block_chain(chain, stakeholders)
    assert extended.height == 6
    assert verify_chain(extended).ok
    assert str(verify_chain(extended)) == "ok"
    assert [h for h, _ in extended.events(EventKind.REORDER)] == [4, 5, 6]


def _replace_block(chain: LedgerChain, height: int, block) -> LedgerChain:
    blocks = list(chain.blocks)
    blocks[height] = block
    return attr.evolve(chain, blocks=blocks)


def test_tampered_payload_is_detected(chain, stakeholders):
    extended = _three_block_chain(chain, stakeholders)
    block = extended.blocks[5]
    tx = block.transactions[0]
    tampered_tx = attr.evolve(tx, events=[_reorder(6, tx.events[0].timestamp)])
    report = verify_chain(
        _replace_block(extended, 5, attr.evolve(block, transactions=[tampered_tx]))
    )
    assert not report.ok
    assert report.bad_height == 5
    assert report.reason == "transactions_root mismatch"
    assert str(report).startswith("bad height 5")


def test_removed_signature_is_detected(chain, stakeholders):
    extended = _three_block_chain(chain, stakeholders)
    block = extended.blocks[4]
    tx = block.transactions[0]
    stripped = attr.evolve(tx, signatures={"retailer": tx.signatures["retailer"]})
    report = verify_chain(
        _replace_block(extended, 4, attr.evolve(block, transactions=[stripped]))
    )
    assert report.bad_height == 4
    assert report.reason.startswith("signature threshold not met")


def test_forged_signature_is_detected(chain, stakeholders):
    extended = _three_block_chain(chain, stakeholders)
    block = extended.blocks[4]
    tx = block.transactions[0]
    forged = dict(tx.signatures, retailer=DEFAULT_SCHEME.sign(b"wrong key", tx.id.encode()))
    report = verify_chain(
        _replace_block(extended, 4, attr.evolve(block, transactions=[attr.evolve(tx, signatures=forged)]))
    )
    assert report.bad_height == 4
    assert report.reason.startswith("invalid signature from retailer")


@pytest.mark.parametrize(
    "field, value, reason",
    [
        ("height", 9, "height mismatch"),
        ("previous_hash", "f" * 64, "previous_hash mismatch"),
        ("signatures_root", "0" * 64, "signatures_root mismatch"),
        ("block_hash", "0" * 64, "block_hash mismatch"),
        ("timestamp", 12345, "block_hash mismatch"),
    ],
)
def test_header_mutations_are_detected(chain, stakeholders, field, value, reason):
    extended = _three_block_chain(chain, stakeholders)
    mutated = attr.evolve(extended.blocks[5], **{field: value})
    report = verify_chain(_replace_block(extended, 5, mutated))
    assert report.bad_height == 5
    assert report.reason.startswith(reason)


def test_rehashed_block_breaks_the_link(chain, stakeholders):
    extended = _three_block_chain(chain, stakeholders)
    report = verify_chain(
        _replace_block(extended, 4, attr.evolve(extended.blocks[4], timestamp=150))
    )
    assert report.bad_height == 4


def test_workflow_log(chain, stakeholders):
    workflow = SigningWorkflow(chain)
    workflow.register(stakeholders["supplier"])
    tx = workflow.propose([_reorder()], SIGNERS, 2)
    tx = workflow.sign(tx, stakeholders["retailer"])

    with pytest.raises(UnderSignedTransactionError):
        workflow.seal([tx])
    assert len(workflow.records(MonitoringAction.REJECTED)) == 1

    tx = workflow.sign(tx, stakeholders["auditor"])
    block = workflow.seal([tx])
    assert block.height == workflow.chain.height == 5
    assert [r.action for r in workflow.log] == [
        MonitoringAction.PROPOSED,
        MonitoringAction.SIGNED,
        MonitoringAction.REJECTED,
        MonitoringAction.SIGNED,
        MonitoringAction.SEALED,
    ]
    assert "supplier" in workflow.chain.registry()
    assert verify_chain(workflow.chain).ok


ALL_SIGNERS = ("retailer", "distributor", "auditor", "producer", "supplier")
HEADER_FIELDS = (
    "height",
    "previous_hash",
    "timestamp",
    "transactions_root",
    "signatures_root",
    "block_hash",
)
TRANSACTION_FIELDS = ("payload", "event_timestamp", "threshold", "signature")


def test_seal_needs_k_of_n_signatures():
    stakeholders = {
        name: Stakeholder(name, StakeholderRole(name), derive_key(name)) for name in ALL_SIGNERS
    }
    chain = LedgerChain.create(timestamp=10)
    for name in ALL_SIGNERS:
        chain = register_signer(chain, stakeholders[name])

    for n in range(1, len(ALL_SIGNERS) + 1):
        required = ALL_SIGNERS[:n]
        for k in range(1, n + 1):
            tx = propose_transaction(chain, [_reorder()], required, k)
            for size in range(n + 1):
                for subset in itertools.combinations(required, size):
                    signed = tx
                    for name in subset:
                        signed = add_signature(signed, stakeholders[name])
                    if size >= k:
                        assert seal_block(chain, [signed]).height == chain.height + 1
                    else:
                        with pytest.raises(UnderSignedTransactionError):
                            seal_block(chain, [signed])


def _other_hex(rng: np.random.Generator, current: str) -> str:
    value = current
    while value == current:
        value = rng.bytes(32).hex()
    return value


def _mutate_transaction(tx, field: str, rng: np.random.Generator):
    if field == "threshold":
        return attr.evolve(tx, threshold=tx.threshold + int(rng.integers(1, 4)))
    if field == "signature":
        signer = sorted(tx.signatures)[int(rng.integers(len(tx.signatures)))]
        signature = bytearray(tx.signatures[signer])
        signature[int(rng.integers(len(signature)))] ^= int(rng.integers(1, 256))
        signatures = dict(tx.signatures)
        signatures[signer] = bytes(signature)
        return attr.evolve(tx, signatures=signatures)

    event = tx.events[0]
    if field == "event_timestamp":
        event = attr.evolve(event, timestamp=event.timestamp + int(rng.integers(1, 100)))
    else:
        key = sorted(event.payload)[int(rng.integers(len(event.payload)))]
        payload = dict(event.payload)
        payload[key] = f"tampered-{key}"
        event = attr.evolve(event, payload=payload)
    return attr.evolve(tx, events=[event] + list(tx.events[1:]))


def _mutate_block(block, rng: np.random.Generator):
    fields = HEADER_FIELDS + (TRANSACTION_FIELDS if block.transactions else ())
    field = fields[int(rng.integers(len(fields)))]
    if field in ("height", "timestamp"):
        return attr.evolve(block, **{field: getattr(block, field) + int(rng.integers(1, 1000))})
    if field in HEADER_FIELDS:
        return attr.evolve(block, **{field: _other_hex(rng, getattr(block, field))})
    transactions = list(block.transactions)
    index = int(rng.integers(len(transactions)))
    transactions[index] = _mutate_transaction(transactions[index], field, rng)
    return attr.evolve(block, transactions=transactions)


def test_random_single_field_mutations_are_detected(chain, stakeholders):
    extended = _three_block_chain(chain, stakeholders)
    rng = np.random.default_rng(2024)
    for _ in range(100):
        height = int(rng.integers(len(extended.blocks)))
        mutated = _replace_block(extended, height, _mutate_block(extended.blocks[height], rng))
        report = verify_chain(mutated)
        assert not report.ok
        assert report.bad_height == height
