"""The item-tracking smart contract and its client.

Four methods (register_item, ship_item, get_challenges, verify_item) run
deterministically inside committed-transaction application on every node.
Every outcome, alerts included, is a write-once store entry attributable to
its caller by the transaction signature.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import crypto, puf
from .crypto import canonical_decode, canonical_encode
from .ledger import CommitTimeout, KeyExists, Transaction, make_transaction

TAGS = (
    "crd",
    "shipped",
    "no_ship",
    "no_crd",
    "declare_verification",
    "verification_succeeded",
    "verification_failed",
)


class NoDeclaration(Exception):
    """verify_item invoked without a prior declaration on the ledger."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ItemId:
    producer: int
    counter: int


@dataclass(frozen=True)
class ContractConfig:
    challenges: int = 10  # pairs sent per verification
    threshold: int = 9  # matches required for success
    n_parties: int = 4

    def validate(self, require_byzantine_margin: bool = False) -> None:
        if not 1 <= self.threshold <= self.challenges:
            raise ConfigError("threshold must be within [1, challenges]")
        if self.n_parties < 1:
            raise ConfigError("need at least one party")
        if require_byzantine_margin and self.n_parties < 4:
            raise ConfigError("tolerating one byzantine node requires >= 4 parties")


def key_crd(item: ItemId) -> tuple:
    return ("crd", item.producer, item.counter)


def key_shipped(supplier: int, buyer: int, item: ItemId) -> tuple:
    return ("shipped", supplier, buyer, item.producer, item.counter)


def key_alert(tag: str, supplier: int, buyer: int, item: ItemId) -> tuple:
    return (tag, supplier, buyer, item.producer, item.counter)


def encode_crd(crd: puf.ChallengeResponseData) -> bytes:
    item = crd.item_id
    return canonical_encode(
        item.producer, item.counter, [(s.recipient, s.ciphertext) for s in crd.subsets]
    )


def decode_crd(blob: bytes) -> puf.ChallengeResponseData:
    producer, counter, subsets = canonical_decode(blob)
    return puf.ChallengeResponseData(
        item_id=ItemId(producer, counter),
        subsets=tuple(crypto.Sealed(recipient=r, ciphertext=bytes(ct)) for r, ct in subsets),
    )


@dataclass(frozen=True)
class VerificationRecord:
    supplier: int
    verifier: int
    item: ItemId
    expected: puf.ChallengeResponseVector
    measured: puf.ChallengeResponseVector
    match_count: int
    outcome: str  # "succeeded" | "failed"


@dataclass(frozen=True)
class Alert:
    kind: str  # "no_ship" | "no_crd"
    supplier: int
    buyer: int
    item: ItemId


class TrackingContract:
    """Deterministic apply function over the replicated write-once store."""

    def __init__(self, config: ContractConfig):
        config.validate()
        self.config = config

    def apply(self, store, txn: Transaction, seq: int):
        """Returns (result tag, writes); writes is the list of (key, value)
        this transaction added. Must be pure in (store state, txn)."""
        try:
            args = canonical_decode(txn.args)
        except ValueError:
            return "bad_args", []
        handler = getattr(self, f"_do_{txn.method}", None)
        if handler is None:
            return "unknown_method", []
        try:
            return handler(store, txn.submitter, seq, args)
        except (ValueError, IndexError, TypeError):
            return "bad_args", []

    def _set(self, store, key, value, submitter, seq, writes):
        store.set(key, value, submitter, seq)
        writes.append((key, value))

    def _do_register_item(self, store, caller, seq, args):
        producer, counter, crd_blob = args
        item = ItemId(producer, counter)
        writes = []
        try:
            # value keeps the (producer, crd) pair so reads can project either
            self._set(store, key_crd(item), canonical_encode(caller, crd_blob), caller, seq, writes)
        except KeyExists:
            return "key_exists", writes
        return "ok", writes

    def _do_ship_item(self, store, caller, seq, args):
        buyer, producer, counter = args
        item = ItemId(producer, counter)
        writes = []
        try:
            self._set(store, key_shipped(caller, buyer, item), canonical_encode(producer, counter), caller, seq, writes)
        except KeyExists:
            return "key_exists", writes
        return "ok", writes

    def _do_get_challenges(self, store, caller, seq, args):
        supplier, producer, counter, crv_blob = args
        item = ItemId(producer, counter)
        writes = []
        if store.get(key_shipped(supplier, caller, item)) is None:
            try:
                self._set(store, key_alert("no_ship", supplier, caller, item),
                          canonical_encode(producer, counter), caller, seq, writes)
            except KeyExists:
                return "key_exists", writes
            return "no_ship", writes
        if store.get(key_crd(item)) is None:
            try:
                self._set(store, key_alert("no_crd", supplier, caller, item),
                          canonical_encode(producer, counter), caller, seq, writes)
            except KeyExists:
                return "key_exists", writes
            return "no_crd", writes
        if crv_blob is None:
            return "missing_crv", writes
        pairs = puf.decode_pairs(bytes(crv_blob))
        if len(pairs) != self.config.challenges:
            return "bad_args", writes
        try:
            self._set(store, key_alert("declare_verification", supplier, caller, item),
                      bytes(crv_blob), caller, seq, writes)
        except KeyExists:
            return "key_exists", writes
        return "challenges_declared", writes

    def _do_verify_item(self, store, caller, seq, args):
        supplier, producer, counter, crv_blob, measured_blob = args
        item = ItemId(producer, counter)
        writes = []
        declared = store.get(key_alert("declare_verification", supplier, caller, item))
        if declared is None:
            return "no_declaration", writes
        if declared != bytes(crv_blob):
            return "declaration_mismatch", writes
        expected = puf.ChallengeResponseVector(puf.decode_pairs(bytes(crv_blob)))
        measured = puf.ChallengeResponseVector(puf.decode_pairs(bytes(measured_blob)))
        try:
            r = puf.match_count(expected, measured)
        except puf.ChallengeMismatch:
            return "challenge_mismatch", writes
        if r >= self.config.threshold:
            key = key_alert("verification_succeeded", supplier, caller, item)
            value = bytes(crv_blob)
            result = "succeeded"
        else:
            key = key_alert("verification_failed", supplier, caller, item)
            value = canonical_encode(bytes(crv_blob), bytes(measured_blob))
            result = "failed"
        try:
            self._set(store, key, value, caller, seq, writes)
        except KeyExists:
            return "key_exists", writes
        return result, writes


def stored_crd(store, item: ItemId) -> tuple[int, puf.ChallengeResponseData] | None:
    """Read back a registered (producer, crd) pair, or None."""
    raw = store.get(key_crd(item))
    if raw is None:
        return None
    caller, crd_blob = canonical_decode(raw)
    return caller, decode_crd(bytes(crd_blob))


class ContractClient:
    """Party-side driver: signs method invocations, submits them through the
    co-located node, and waits for commitment before reading results."""

    def __init__(self, party: int, keypair: crypto.KeyPair, node, network, config: ContractConfig,
                 retries: int = 3, horizon: float = 3000.0):
        self.party = party
        self.keypair = keypair
        self.node = node
        self.network = network
        self.config = config
        self.retries = retries
        self.horizon = horizon

    @property
    def store(self):
        return self.node.store

    def _invoke(self, method: str, args: bytes) -> str:
        txn = make_transaction(self.party, method, args, self.keypair)
        for _ in range(self.retries):
            self.network.send_all(self.node.local_submit(txn))
            self.network.run(
                max_time=self.network.now + self.horizon,
                until=lambda: txn.txn_id in self.node.applied,
            )
            result = self.node.applied.get(txn.txn_id)
            if result is not None:
                return result
        raise CommitTimeout(f"{method} by party {self.party}")

    def register_item(self, item: ItemId, crd: puf.ChallengeResponseData) -> str:
        result = self._invoke("register_item", canonical_encode(item.producer, item.counter, encode_crd(crd)))
        if result == "key_exists":
            raise KeyExists(f"item {item} already registered")
        return result

    def ship_item(self, buyer: int, item: ItemId) -> str:
        result = self._invoke("ship_item", canonical_encode(buyer, item.producer, item.counter))
        if result == "key_exists":
            raise KeyExists(f"shipment ({self.party}, {buyer}, {item}) already recorded")
        return result

    def get_challenges(self, supplier: int, item: ItemId):
        """Returns the party's ChallengeResponseVector, or an Alert that has
        been persisted to the ledger."""
        for attempt in range(self.retries):
            # drain in-flight traffic so the local replica reflects what the
            # cluster has committed before reading
            self.network.run(max_time=self.network.now + self.horizon)
            crv = None
            crv_blob = None
            if self.store.get(key_shipped(supplier, self.party, item)) is not None:
                found = stored_crd(self.store, item)
                if found is not None:
                    _, crd = found
                    crv = puf.open_subset(crd, self.party, self.keypair)
                    crv_blob = puf.encode_pairs(crv.pairs)
            result = self._invoke(
                "get_challenges",
                canonical_encode(supplier, item.producer, item.counter, crv_blob),
            )
            if result in ("no_ship", "no_crd"):
                return Alert(kind=result, supplier=supplier, buyer=self.party, item=item)
            if result == "challenges_declared":
                return crv
            if result == "missing_crv":
                continue  # replica lagged; sync and retry with the fresh view
            raise KeyExists(f"get_challenges for ({supplier}, {self.party}, {item}): {result}")
        raise CommitTimeout("local replica never caught up with committed state")

    def verify_item(
        self,
        supplier: int,
        item: ItemId,
        expected: puf.ChallengeResponseVector,
        measured: puf.ChallengeResponseVector,
    ) -> VerificationRecord:
        result = self._invoke(
            "verify_item",
            canonical_encode(
                supplier,
                item.producer,
                item.counter,
                puf.encode_pairs(expected.pairs),
                puf.encode_pairs(measured.pairs),
            ),
        )
        if result == "no_declaration":
            raise NoDeclaration(f"({supplier}, {self.party}, {item})")
        if result == "key_exists":
            raise KeyExists(f"verification outcome for ({supplier}, {self.party}, {item}) already recorded")
        if result not in ("succeeded", "failed"):
            raise ValueError(f"verify_item result {result!r}")
        return VerificationRecord(
            supplier=supplier,
            verifier=self.party,
            item=item,
            expected=expected,
            measured=measured,
            match_count=puf.match_count(expected, measured),
            outcome=result,
        )
