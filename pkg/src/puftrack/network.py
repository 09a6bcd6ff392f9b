"""Deterministic discrete-event message transport.

Nodes exchange authenticated, timestamped messages over a simulated
asynchronous network. Delivery policies may delay and reorder arbitrarily
but never drop a message, so eventual delivery holds by construction.
Everything runs off one priority queue, so a fixed seed replays exactly.
"""
from __future__ import annotations

import heapq
import hmac
from dataclasses import dataclass, field

import numpy as np

from .crypto import blake, canonical_encode


@dataclass(frozen=True)
class NetworkMessage:
    sender: int
    receiver: int
    ts: int  # per-sender monotone counter, replay protection
    body: tuple
    mac: bytes
    extra_delay: float = 0.0  # set by byzantine senders, honored by transport


class ChannelAuthenticator:
    """Pairwise MAC keys for one node.

    Built from the scenario's network master key; each node only ever holds
    its own row, so a byzantine node cannot authenticate as an honest pair.
    """

    def __init__(self, master_key: bytes, own_id: int, n_nodes: int):
        self.own_id = own_id
        self._keys = {
            peer: blake(
                b"chan",
                master_key,
                min(own_id, peer).to_bytes(4, "big"),
                max(own_id, peer).to_bytes(4, "big"),
            )
            for peer in range(n_nodes)
            if peer != own_id
        }

    def _tag(self, sender: int, receiver: int, ts: int, body: tuple, key: bytes) -> bytes:
        return hmac.new(key, canonical_encode(sender, receiver, ts, body), "sha256").digest()

    def stamp(self, receiver: int, ts: int, body: tuple) -> bytes:
        return self._tag(self.own_id, receiver, ts, body, self._keys[receiver])

    def check(self, msg: NetworkMessage) -> bool:
        if msg.receiver != self.own_id or msg.sender == self.own_id:
            return False
        key = self._keys.get(msg.sender)
        if key is None:
            return False
        expect = self._tag(msg.sender, msg.receiver, msg.ts, msg.body, key)
        return hmac.compare_digest(expect, msg.mac)


class DeliveryPolicy:
    def delay(self, msg: NetworkMessage, rng: np.random.Generator) -> float:
        raise NotImplementedError


class FifoPolicy(DeliveryPolicy):
    """Constant unit latency; per-link FIFO order."""

    def delay(self, msg, rng):
        return 1.0


class RandomDelayPolicy(DeliveryPolicy):
    def __init__(self, max_delay: float = 8.0):
        self.max_delay = max_delay

    def delay(self, msg, rng):
        return float(rng.uniform(0.1, self.max_delay))


class AdversarialReorderPolicy(DeliveryPolicy):
    """Heavy jitter: wide independent delays reorder aggressively while
    still delivering everything within a bounded horizon."""

    def __init__(self, max_delay: float = 20.0):
        self.max_delay = max_delay

    def delay(self, msg, rng):
        return float(rng.uniform(0.0, self.max_delay))


POLICIES = {
    "fifo": FifoPolicy,
    "random": RandomDelayPolicy,
    "reorder": AdversarialReorderPolicy,
}


@dataclass(order=True)
class _Event:
    time: float
    order: int
    kind: str = field(compare=False)
    payload: object = field(compare=False)


class SimNetwork:
    """Priority-queue event loop delivering messages and firing timers."""

    def __init__(self, policy: DeliveryPolicy, rng: np.random.Generator):
        self.policy = policy
        self.rng = rng
        self.now = 0.0
        self._heap: list[_Event] = []
        self._order = 0
        self.nodes: dict[int, object] = {}
        self.delivered = 0

    def attach(self, node) -> None:
        self.nodes[node.node_id] = node
        node.network = self

    def _push(self, time: float, kind: str, payload) -> None:
        self._order += 1
        heapq.heappush(self._heap, _Event(time, self._order, kind, payload))

    def send(self, msg: NetworkMessage) -> None:
        delay = self.policy.delay(msg, self.rng) + msg.extra_delay
        self._push(self.now + delay, "deliver", msg)

    def send_all(self, msgs) -> None:
        for m in msgs:
            self.send(m)

    def set_timer(self, node_id: int, delay: float, tag) -> None:
        self._push(self.now + delay, "timer", (node_id, tag))

    def run(self, max_time: float = 10_000.0, until=None, max_events: int | None = None) -> None:
        """Drain events until quiescent, a deadline, or a predicate holds."""
        events = 0
        while self._heap:
            if until is not None and until():
                return
            ev = self._heap[0]
            if ev.time > max_time:
                return
            heapq.heappop(self._heap)
            self.now = max(self.now, ev.time)
            if ev.kind == "deliver":
                msg = ev.payload
                node = self.nodes.get(msg.receiver)
                if node is not None:
                    self.delivered += 1
                    self.send_all(node.receive(msg))
            else:
                node_id, tag = ev.payload
                node = self.nodes.get(node_id)
                if node is not None:
                    self.send_all(node.on_timer(tag))
            events += 1
            if max_events is not None and events >= max_events:
                return
