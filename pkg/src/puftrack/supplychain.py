"""Supply-chain model and item-lifecycle orchestration.

Parties form a DAG of supplier-buyer edges where every edge spans exactly
one stage. A World wires the PKI, devices, the replicated ledger, and one
contract client per party, then drives the three lifecycle events: new item
at stage 0, shipment along an edge, delivery with integrity verification.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import crypto, puf
from .contract import (
    Alert,
    ContractClient,
    ContractConfig,
    ItemId,
    TrackingContract,
)
from .ledger import DEFAULT_TIMEOUT, BftNode, ByzantineNode, export_ledger_lines
from .network import POLICIES, ChannelAuthenticator, SimNetwork


class CycleDetected(Exception):
    pass


class Violation(Exception):
    """Graph breaks the one-stage-per-edge constraint."""


class EdgeAbsent(Exception):
    pass


@dataclass(frozen=True)
class SupplyChainGraph:
    n_parties: int
    edges: frozenset

    @classmethod
    def from_edges(cls, n_parties: int, edges) -> "SupplyChainGraph":
        edges = frozenset((int(s), int(b)) for s, b in edges)
        for s, b in edges:
            if s == b:
                raise Violation(f"self-edge at party {s}")
            if not (0 <= s < n_parties and 0 <= b < n_parties):
                raise Violation(f"edge ({s}, {b}) outside party range")
        return cls(n_parties=n_parties, edges=edges)

    def suppliers_of(self, p: int) -> list[int]:
        return sorted(s for s, b in self.edges if b == p)

    def buyers_of(self, p: int) -> list[int]:
        return sorted(b for s, b in self.edges if s == p)

    def stage(self, p: int) -> int:
        """Depth of a party: 0 with no suppliers, else 1 + deepest supplier."""
        if not 0 <= p < self.n_parties:
            raise ValueError(f"unknown party {p}")
        memo: dict[int, int] = {}
        in_progress: set[int] = set()

        def rec(q: int) -> int:
            if q in memo:
                return memo[q]
            if q in in_progress:
                raise CycleDetected(f"cycle through party {q}")
            in_progress.add(q)
            sups = self.suppliers_of(q)
            memo[q] = 0 if not sups else 1 + max(rec(s) for s in sups)
            in_progress.discard(q)
            return memo[q]

        return rec(p)

    def stages(self) -> dict[int, int]:
        return {p: self.stage(p) for p in range(self.n_parties)}

    def n_stages(self) -> int:
        return 1 + max(self.stages().values()) if self.n_parties else 0

    def validate(self) -> None:
        """Acyclic (via stage computation) and every edge spans one stage."""
        stages = self.stages()
        for s, b in sorted(self.edges):
            if stages[b] - stages[s] != 1:
                raise Violation(
                    f"edge ({s}, {b}) spans stages {stages[s]} -> {stages[b]}"
                )


@dataclass
class ItemInstance:
    item: ItemId
    device: puf.PufDevice
    holder: int | None
    stage_history: list = field(default_factory=list)
    in_transit_from: int | None = None
    in_transit_to: int | None = None
    crd: puf.ChallengeResponseData | None = None


@dataclass
class PufParams:
    width: int = puf.DEFAULT_WIDTH
    noise_rate: float = puf.DEFAULT_NOISE
    measure_repeats: int = 5  # repeated measurements per challenge at delivery


def _party_key_seed(master_seed: int, party: int) -> int:
    return int.from_bytes(
        crypto.blake(b"party-key", master_seed.to_bytes(8, "big", signed=True), party.to_bytes(4, "big")),
        "big",
    ) % (2**63)


class World:
    """One scenario instance: graph, PKI, ledger cluster, clients, items."""

    def __init__(
        self,
        graph: SupplyChainGraph,
        config: ContractConfig | None = None,
        puf_params: PufParams | None = None,
        seed: int = 0,
        policy: str = "fifo",
        byzantine: dict[int, str] | None = None,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        graph.validate()
        self.graph = graph
        n = graph.n_parties
        self.config = config or ContractConfig(n_parties=n)
        self.puf_params = puf_params or PufParams()
        self.seed = seed
        byzantine = byzantine or {}

        self.keypairs = {p: crypto.generate_keypair(_party_key_seed(seed, p)) for p in range(n)}
        self.registry = crypto.PkiRegistry()
        for p in range(n):
            self.registry.register(p, self.keypairs[p].public)
        self.registry.freeze()

        seed_root = np.random.SeedSequence(seed)
        net_ss, dev_ss, chal_ss = seed_root.spawn(3)
        self.network = SimNetwork(POLICIES[policy](), np.random.default_rng(net_ss))
        self._device_rng = np.random.default_rng(dev_ss)
        self.challenge_rng = np.random.default_rng(chal_ss)

        master_net_key = crypto.blake(b"net", seed.to_bytes(8, "big", signed=True))
        contract = TrackingContract(self.config)
        self.nodes: dict[int, BftNode] = {}
        for p in range(n):
            auth = ChannelAuthenticator(master_net_key, p, n)
            if p in byzantine:
                node = ByzantineNode(p, n, self.registry, auth, contract,
                                     timeout=timeout, strategy=byzantine[p])
            else:
                node = BftNode(p, n, self.registry, auth, contract, timeout=timeout)
            self.network.attach(node)
            self.nodes[p] = node
        self.byzantine = dict(byzantine)
        self.clients = {
            p: ContractClient(p, self.keypairs[p], self.nodes[p], self.network, self.config)
            for p in range(n)
        }
        self._item_counters = {p: 0 for p in range(n)}

    # -- helpers ------------------------------------------------------------

    def honest_nodes(self) -> list[BftNode]:
        return [self.nodes[p] for p in sorted(self.nodes) if p not in self.byzantine]

    def create_device(self) -> puf.PufDevice:
        dev_seed = int(self._device_rng.integers(0, 2**63))
        child = np.random.default_rng(int(self._device_rng.integers(0, 2**63)))
        return puf.PufDevice(
            dev_seed,
            self.puf_params.width,
            self.puf_params.noise_rate,
            rng=child,
        )

    def next_item_id(self, producer: int) -> ItemId:
        counter = self._item_counters[producer]
        self._item_counters[producer] += 1
        return ItemId(producer=producer, counter=counter)

    def measure(self, device: puf.PufDevice, crv: puf.ChallengeResponseVector) -> puf.ChallengeResponseVector:
        """Query the physical device for each challenge of a vector."""
        repeats = self.puf_params.measure_repeats
        return puf.ChallengeResponseVector(
            tuple(
                puf.ChallengeResponsePair(p.challenge, device.query_denoised(p.challenge, repeats))
                for p in crv.pairs
            )
        )

    # -- lifecycle events ---------------------------------------------------

    def new_item(self, producer: int, device: puf.PufDevice | None = None,
                 register: bool = True) -> ItemInstance:
        """Event 1: produce, enrol, and register a PUF-equipped item."""
        if self.graph.stage(producer) != 0:
            raise Violation(f"party {producer} is not at stage 0")
        if device is None:
            device = self.create_device()
        item = self.next_item_id(producer)
        crd = puf.enroll(
            device, item, self.graph.n_parties, self.config.challenges,
            self.registry, self.challenge_rng,
        )
        if register:
            self.clients[producer].register_item(item, crd)
        inst = ItemInstance(item=item, device=device, holder=producer,
                            stage_history=[(0, producer)], crd=crd)
        return inst

    def ship(self, supplier: int, buyer: int, inst: ItemInstance, track: bool = True) -> None:
        """Event 2: record the shipment and hand the item to the carrier."""
        if (supplier, buyer) not in self.graph.edges:
            raise EdgeAbsent(f"({supplier}, {buyer})")
        if inst.holder != supplier:
            raise Violation(f"party {supplier} does not hold item {inst.item}")
        if track:
            self.clients[supplier].ship_item(buyer, inst.item)
        inst.holder = None
        inst.in_transit_from = supplier
        inst.in_transit_to = buyer

    def deliver(self, buyer: int, inst: ItemInstance):
        """Event 3: take delivery and verify integrity against the CRD.

        Returns a VerificationRecord, or the Alert persisted when the
        shipment or the CRD is missing from the ledger.
        """
        if inst.in_transit_to != buyer:
            raise Violation(f"item {inst.item} is not in transit to {buyer}")
        supplier = inst.in_transit_from
        inst.holder = buyer
        inst.in_transit_from = None
        inst.in_transit_to = None
        inst.stage_history.append((self.graph.stage(buyer), buyer))
        got = self.clients[buyer].get_challenges(supplier, inst.item)
        if isinstance(got, Alert):
            return got
        measured = self.measure(inst.device, got)
        return self.clients[buyer].verify_item(supplier, inst.item, got, measured)

    def export_ledger(self) -> list[str]:
        return export_ledger_lines(self.honest_nodes()[0])
