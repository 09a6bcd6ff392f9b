"""Deterministic simulator of a blockchain + PUF supply-chain tracking
system: simulated device enrolment and verification, a byzantine-tolerant
replicated write-once ledger hosting the tracking contract, an adversary
harness, and experiment runners."""

from .contract import (
    Alert,
    ContractClient,
    ContractConfig,
    ItemId,
    TrackingContract,
    VerificationRecord,
)
from .crypto import KeyPair, OpenDenied, PkiRegistry, generate_keypair
from .ledger import BftNode, ByzantineNode, KeyExists, Transaction, WriteOnceStore
from .puf import (
    ChallengeResponseData,
    ChallengeResponsePair,
    ChallengeResponseVector,
    CloneDenied,
    PufDevice,
    clone,
    enroll,
    match_count,
    tamper,
)
from .supplychain import ItemInstance, PufParams, SupplyChainGraph, World

__version__ = "0.1.0"
