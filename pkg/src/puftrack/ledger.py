"""Replicated write-once ledger over a simulated byzantine-tolerant protocol.

N nodes (one per party) totally order client transactions with a three-phase
prepare/commit protocol using 2f+1 quorums, f = (N-1)//3. Leadership rotates
round-robin per sequence slot; a slot whose leader stalls is voted into a
skip (no-op) by quorum after a timeout, so there is no full view change.
A node that has sent a commit for a slot never votes to skip it and vice
versa, which keeps commit and skip certificates mutually exclusive.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import crypto
from .crypto import canonical_encode
from .network import ChannelAuthenticator, NetworkMessage

# Must exceed the worst-case simulated message delay (adversarial policies and
# byzantine delaying top out near 400), or an honest node can skip-vote a slot
# that another honest node has already committed: with N=4 that splits the
# votes 2/2 and neither certificate can reach quorum.
DEFAULT_TIMEOUT = 800.0


class KeyExists(Exception):
    """Overwrite attempt on a write-once key."""


class RejectedSignature(Exception):
    """Transaction signature does not verify against its claimed submitter."""


class CommitTimeout(Exception):
    """Transaction was not committed within the simulation horizon."""


@dataclass(frozen=True)
class StoreEntry:
    value: bytes
    submitter: int
    seq: int


class WriteOnceStore:
    """Key-value state where each key accepts exactly one committed set."""

    def __init__(self):
        self._entries: dict[tuple, StoreEntry] = {}

    def set(self, key: tuple, value: bytes, submitter: int, seq: int) -> None:
        if key in self._entries:
            raise KeyExists(repr(key))
        self._entries[key] = StoreEntry(value, submitter, seq)

    def get(self, key: tuple) -> bytes | None:
        entry = self._entries.get(key)
        return entry.value if entry is not None else None

    def entry(self, key: tuple) -> StoreEntry | None:
        return self._entries.get(key)

    def items(self):
        """(key, entry) pairs in commit order."""
        return list(self._entries.items())

    def keys_with_tag(self, tag: str) -> list[tuple]:
        return [k for k in self._entries if k and k[0] == tag]


@dataclass(frozen=True)
class Transaction:
    submitter: int
    method: str
    args: bytes
    signature: bytes

    @property
    def txn_id(self) -> bytes:
        return crypto.blake(b"txn", canonical_encode(self.submitter, self.method, self.args))

    def verify(self, registry: crypto.PkiRegistry) -> bool:
        signed = crypto.Signed(
            payload=canonical_encode(self.method, self.args),
            signer=self.submitter,
            signature=self.signature,
        )
        try:
            public = registry.public_key(self.submitter)
        except crypto.UnknownParty:
            return False
        return crypto.verify_signed(signed, public)


def make_transaction(submitter: int, method: str, args: bytes, keypair: crypto.KeyPair) -> Transaction:
    signed = crypto.sign_bytes(canonical_encode(method, args), submitter, keypair)
    return Transaction(submitter=submitter, method=method, args=args, signature=signed.signature)


@dataclass
class _Slot:
    preprepare_txn: Transaction | None = None
    preprepare_digest: bytes | None = None
    prepares: dict = field(default_factory=dict)  # digest -> set of node ids
    commits: dict = field(default_factory=dict)
    skips: set = field(default_factory=set)
    sent_prepare: bytes | None = None
    sent_commit: bytes | None = None
    sent_skip: bool = False
    certified_digest: bytes | None = None
    fetch_sent: bool = False
    timer_armed: bool = False


@dataclass(frozen=True)
class LogEntry:
    seq: int
    txn: Transaction
    result: str
    writes: tuple  # of (key, value) actually written by this transaction


class BftNode:
    """One replica: protocol state machine plus the replicated store."""

    def __init__(
        self,
        node_id: int,
        n_nodes: int,
        registry: crypto.PkiRegistry,
        auth: ChannelAuthenticator,
        contract,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        self.node_id = node_id
        self.n = n_nodes
        self.f = (n_nodes - 1) // 3
        self.quorum = 2 * self.f + 1
        self.registry = registry
        self.auth = auth
        self.contract = contract
        self.timeout = timeout
        self.network = None  # set on attach

        self.store = WriteOnceStore()
        self.log: list[LogEntry] = []
        self.decided: dict[int, tuple] = {}  # seq -> ("txn", Transaction) | ("skip",)
        self.applied: dict[bytes, str] = {}  # txn_id -> result tag
        self.pending: dict[bytes, Transaction] = {}
        self.committed_ids: set[bytes] = set()
        self.slots: dict[int, _Slot] = {}
        self.next_exec = 0
        self._ts = 0
        self._seen: set[tuple] = set()

    # -- message plumbing ---------------------------------------------------

    def _msg(self, receiver: int, body: tuple, extra_delay: float = 0.0) -> NetworkMessage:
        self._ts += 1
        return NetworkMessage(
            sender=self.node_id,
            receiver=receiver,
            ts=self._ts,
            body=body,
            mac=self.auth.stamp(receiver, self._ts, body),
            extra_delay=extra_delay,
        )

    def _broadcast(self, body: tuple) -> list[NetworkMessage]:
        return [self._msg(peer, body) for peer in range(self.n) if peer != self.node_id]

    def leader_of(self, seq: int) -> int:
        return seq % self.n

    def _slot(self, seq: int) -> _Slot:
        return self.slots.setdefault(seq, _Slot())

    def lowest_undecided(self) -> int:
        s = self.next_exec
        while s in self.decided:
            s += 1
        return s

    # -- client entry point -------------------------------------------------

    def local_submit(self, txn: Transaction) -> list[NetworkMessage]:
        """Accept a transaction from the co-located client and broadcast it."""
        if not txn.verify(self.registry):
            raise RejectedSignature(f"submitter {txn.submitter}")
        self.pending.setdefault(txn.txn_id, txn)
        out = self._broadcast(("submit",) + _txn_fields(txn))
        out += self._progress()
        return out

    # -- receive path -------------------------------------------------------

    def receive(self, msg: NetworkMessage) -> list[NetworkMessage]:
        if not self.auth.check(msg):
            return []
        if (msg.sender, msg.ts) in self._seen:
            return []
        self._seen.add((msg.sender, msg.ts))
        out: list[NetworkMessage] = []
        kind = msg.body[0]
        if kind == "submit":
            txn = _txn_from_fields(msg.body[1:])
            if txn is not None and txn.verify(self.registry) and txn.txn_id not in self.committed_ids:
                self.pending.setdefault(txn.txn_id, txn)
        elif kind == "preprepare":
            self._on_preprepare(msg.sender, msg.body)
        elif kind == "prepare":
            _, seq, digest = msg.body
            self._slot(seq).prepares.setdefault(digest, set()).add(msg.sender)
        elif kind == "commit":
            _, seq, digest = msg.body
            self._slot(seq).commits.setdefault(digest, set()).add(msg.sender)
        elif kind == "skip":
            _, seq = msg.body
            self._slot(seq).skips.add(msg.sender)
        elif kind == "fetch":
            _, seq, digest = msg.body
            out += self._serve_fetch(msg.sender, seq, digest)
        elif kind == "txn":
            self._on_fetched_txn(msg.body)
        out += self._progress()
        return out

    def on_timer(self, tag) -> list[NetworkMessage]:
        kind, seq = tag
        out: list[NetworkMessage] = []
        if kind == "skiptimer":
            slot = self._slot(seq)
            slot.timer_armed = False
            undecided = seq not in self.decided
            if undecided and slot.sent_commit is None and not slot.sent_skip:
                slot.sent_skip = True
                slot.skips.add(self.node_id)
                out += self._broadcast(("skip", seq))
        out += self._progress()
        return out

    # -- protocol steps -----------------------------------------------------

    def _on_preprepare(self, sender: int, body: tuple) -> None:
        _, seq = body[0], body[1]
        if sender != self.leader_of(seq) or seq in self.decided:
            return
        txn = _txn_from_fields(body[2:])
        if txn is None or not txn.verify(self.registry):
            return
        if txn.txn_id in self.committed_ids:
            return
        slot = self._slot(seq)
        if slot.preprepare_digest is not None:
            return  # first valid proposal for the slot wins locally
        slot.preprepare_txn = txn
        slot.preprepare_digest = txn.txn_id
        slot.prepares.setdefault(txn.txn_id, set()).add(sender)
        self.pending.setdefault(txn.txn_id, txn)

    def _serve_fetch(self, requester: int, seq: int, digest: bytes) -> list[NetworkMessage]:
        txn = None
        slot = self.slots.get(seq)
        if slot is not None and slot.preprepare_digest == digest:
            txn = slot.preprepare_txn
        decided = self.decided.get(seq)
        if txn is None and decided is not None and decided[0] == "txn" and decided[1].txn_id == digest:
            txn = decided[1]
        if txn is None:
            txn = self.pending.get(digest)
        if txn is None:
            return []
        return [self._msg(requester, ("txn", seq) + _txn_fields(txn))]

    def _on_fetched_txn(self, body: tuple) -> None:
        seq = body[1]
        txn = _txn_from_fields(body[2:])
        if txn is None or not txn.verify(self.registry):
            return
        slot = self._slot(seq)
        # a commit-certified body overrides whatever this node saw locally
        if slot.certified_digest == txn.txn_id:
            slot.preprepare_txn = txn
            slot.preprepare_digest = txn.txn_id

    def _progress(self) -> list[NetworkMessage]:
        out: list[NetworkMessage] = []
        advanced = True
        while advanced:
            advanced = False
            s = self.lowest_undecided()
            slot = self._slot(s)
            out += self._maybe_propose(s, slot)
            out += self._maybe_vote(s, slot)
            if self._maybe_decide(s, slot):
                advanced = True
        out += self.request_missing()
        self._execute_ready()
        self._arm_timer()
        return out

    def _proposable(self) -> Transaction | None:
        for txn_id in sorted(self.pending):
            if txn_id not in self.committed_ids:
                return self.pending[txn_id]
        return None

    def _maybe_propose(self, s: int, slot: _Slot) -> list[NetworkMessage]:
        if self.leader_of(s) != self.node_id or slot.preprepare_digest is not None:
            return []
        txn = self._proposable()
        if txn is None:
            return []
        slot.preprepare_txn = txn
        slot.preprepare_digest = txn.txn_id
        slot.prepares.setdefault(txn.txn_id, set()).add(self.node_id)
        return self._broadcast(("preprepare", s) + _txn_fields(txn))

    def _maybe_vote(self, s: int, slot: _Slot) -> list[NetworkMessage]:
        out: list[NetworkMessage] = []
        if slot.sent_skip:
            return out
        digest = slot.preprepare_digest
        if digest is None:
            return out
        if slot.sent_prepare is None and self.leader_of(s) != self.node_id:
            slot.sent_prepare = digest
            slot.prepares.setdefault(digest, set()).add(self.node_id)
            out += self._broadcast(("prepare", s, digest))
        prepared = slot.prepares.get(digest, set())
        if slot.sent_commit is None and len(prepared) >= self.quorum:
            slot.sent_commit = digest
            slot.commits.setdefault(digest, set()).add(self.node_id)
            out += self._broadcast(("commit", s, digest))
        return out

    def _maybe_decide(self, s: int, slot: _Slot) -> bool:
        if s in self.decided:
            return False
        for digest, voters in slot.commits.items():
            if len(voters) >= self.quorum:
                slot.certified_digest = digest
                if slot.preprepare_digest != digest and digest in self.pending:
                    slot.preprepare_txn = self.pending[digest]
                    slot.preprepare_digest = digest
                if slot.preprepare_digest == digest and slot.preprepare_txn is not None:
                    self.decided[s] = ("txn", slot.preprepare_txn)
                    return True
        if len(slot.skips) >= self.quorum:
            self.decided[s] = ("skip",)
            return True
        return False

    def _execute_ready(self) -> None:
        while self.next_exec in self.decided:
            seq = self.next_exec
            entry = self.decided[seq]
            if entry[0] == "txn" and entry[1].txn_id not in self.committed_ids:
                # the same transaction can get decided in two slots when a
                # second leader proposes it before learning the first slot
                # committed; only the first decision executes
                txn = entry[1]
                if not txn.verify(self.registry):
                    raise RejectedSignature("invalid signature reached execution")
                result, writes = self.contract.apply(self.store, txn, seq)
                self.log.append(LogEntry(seq=seq, txn=txn, result=result, writes=tuple(writes)))
                self.applied[txn.txn_id] = result
                self.committed_ids.add(txn.txn_id)
                self.pending.pop(txn.txn_id, None)
            self.next_exec += 1

    def _arm_timer(self) -> None:
        if self.network is None:
            return
        s = self.lowest_undecided()
        slot = self._slot(s)
        has_work = self._proposable() is not None or slot.preprepare_digest is not None
        if has_work and not slot.timer_armed and not slot.sent_skip:
            slot.timer_armed = True
            self.network.set_timer(self.node_id, self.timeout, ("skiptimer", s))

    # -- fetch trigger: run from _progress via decide attempt ---------------

    def request_missing(self) -> list[NetworkMessage]:
        """Ask peers for a commit-certified transaction body we never saw."""
        out = []
        s = self.lowest_undecided()
        slot = self._slot(s)
        if (
            slot.certified_digest is not None
            and s not in self.decided
            and (slot.preprepare_txn is None or slot.preprepare_digest != slot.certified_digest)
            and not slot.fetch_sent
        ):
            slot.fetch_sent = True
            out += self._broadcast(("fetch", s, slot.certified_digest))
        return out


def _txn_fields(txn: Transaction) -> tuple:
    return (txn.submitter, txn.method, txn.args, txn.signature)


def _txn_from_fields(fields: tuple) -> Transaction | None:
    if len(fields) != 4:
        return None
    submitter, method, args, signature = fields
    if not isinstance(submitter, int) or not isinstance(method, str):
        return None
    if not isinstance(args, (bytes, bytearray)) or not isinstance(signature, (bytes, bytearray)):
        return None
    return Transaction(submitter=submitter, method=method, args=bytes(args), signature=bytes(signature))


class ByzantineNode(BftNode):
    """Protocol-deviating replica bounded to a named strategy.

    Strategies only use this node's own channel keys; honest pairwise keys
    and honest signing keys are never reachable from here.
    """

    STRATEGIES = ("silent", "equivocate", "delay_selective", "corrupt_payload")

    def __init__(self, *args, strategy: str = "silent", **kwargs):
        super().__init__(*args, **kwargs)
        if strategy not in self.STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        self.strategy = strategy

    def local_submit(self, txn: Transaction) -> list[NetworkMessage]:
        if self.strategy == "silent":
            return []
        return super().local_submit(txn)

    def receive(self, msg: NetworkMessage) -> list[NetworkMessage]:
        if self.strategy == "silent":
            return []
        out = super().receive(msg)
        return self._mangle(out)

    def on_timer(self, tag) -> list[NetworkMessage]:
        if self.strategy == "silent":
            return []
        return self._mangle(super().on_timer(tag))

    def _mangle(self, out: list[NetworkMessage]) -> list[NetworkMessage]:
        if self.strategy == "delay_selective":
            mangled = []
            for m in out:
                if m.receiver < self.n // 2:
                    body = m.body
                    self._ts += 1
                    mangled.append(
                        NetworkMessage(
                            sender=self.node_id,
                            receiver=m.receiver,
                            ts=self._ts,
                            body=body,
                            mac=self.auth.stamp(m.receiver, self._ts, body),
                            extra_delay=400.0,
                        )
                    )
                else:
                    mangled.append(m)
            return mangled
        if self.strategy == "corrupt_payload":
            mangled = []
            for m in out:
                if m.body[0] == "preprepare":
                    seq = m.body[1]
                    submitter, method, args, signature = m.body[2:]
                    bad_args = bytes([args[0] ^ 0xFF]) + args[1:] if args else b"\x01"
                    body = ("preprepare", seq, submitter, method, bad_args, signature)
                    mangled.append(self._msg(m.receiver, body))
                else:
                    mangled.append(m)
            return mangled
        if self.strategy == "equivocate":
            mangled = []
            candidates = [t for t in self.pending.values() if t.txn_id not in self.committed_ids]
            for m in out:
                if m.body[0] == "preprepare" and len(candidates) >= 2 and m.receiver % 2 == 1:
                    seq = m.body[1]
                    first = _txn_from_fields(m.body[2:])
                    alt = next((t for t in candidates if t.txn_id != first.txn_id), None)
                    if alt is not None:
                        mangled.append(self._msg(m.receiver, ("preprepare", seq) + _txn_fields(alt)))
                        continue
                mangled.append(m)
            # vote for every digest it has seen in the lowest open slot
            s = self.lowest_undecided()
            slot = self.slots.get(s)
            if slot is not None:
                for digest in list(slot.prepares):
                    mangled += self._broadcast(("prepare", s, digest))
                    mangled += self._broadcast(("commit", s, digest))
            return mangled
        return out


def export_ledger_lines(node: BftNode) -> list[str]:
    """Committed transactions as JSON lines, deterministic for a fixed run."""
    lines = []
    for entry in node.log:
        key, value = (None, None)
        if entry.writes:
            key, value = entry.writes[0]
        lines.append(
            json.dumps(
                {
                    "seq": entry.seq,
                    "submitter": entry.txn.submitter,
                    "method": entry.txn.method,
                    "result": entry.result,
                    "key": list(key) if key is not None else None,
                    "value": value.hex() if value is not None else None,
                    "key_signature_valid": entry.txn.verify(node.registry),
                },
                sort_keys=True,
            )
        )
    return lines
