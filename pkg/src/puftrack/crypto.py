"""Simulated PKI for scenario parties.

Each party owns a deterministic key pair (Ed25519 for signing, X25519 for
sealed delivery). Public halves live in an immutable registry populated at
scenario setup; secret halves stay inside the owning party's KeyPair object,
which is the capability boundary the adversary harness must respect.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

PartyId = int


class OpenDenied(Exception):
    """Sealed blob opened with a key pair other than the recipient's."""


class UnknownParty(KeyError):
    """Party id not present in the registry."""


class RegistryFrozen(RuntimeError):
    """Attempted registration after the registry was frozen."""


def blake(*parts: bytes, size: int = 32) -> bytes:
    h = hashlib.blake2b(digest_size=size)
    for p in parts:
        h.update(len(p).to_bytes(4, "big"))
        h.update(p)
    return h.digest()


def canonical_encode(*fields) -> bytes:
    """Length-prefixed concatenation in argument order.

    Injective over the supported field types (int, str, bytes, None,
    nested tuples/lists), so it is safe as signing input and as a store key
    serialization.
    """
    out = bytearray()
    for f in fields:
        if f is None:
            body = b"n"
        elif isinstance(f, bool):
            body = b"o" + (b"\x01" if f else b"\x00")
        elif isinstance(f, int):
            body = b"i" + f.to_bytes(16, "big", signed=True)
        elif isinstance(f, str):
            body = b"s" + f.encode("utf-8")
        elif isinstance(f, (bytes, bytearray)):
            body = b"b" + bytes(f)
        elif isinstance(f, (tuple, list)):
            body = b"t" + canonical_encode(*f)
        else:
            raise TypeError(f"cannot canonically encode {type(f)!r}")
        out += len(body).to_bytes(4, "big") + body
    return bytes(out)


def canonical_decode(blob: bytes) -> list:
    """Inverse of canonical_encode (tuples come back as lists)."""
    out = []
    i = 0
    n = len(blob)
    while i < n:
        if i + 4 > n:
            raise ValueError("truncated field header")
        length = int.from_bytes(blob[i : i + 4], "big")
        i += 4
        if i + length > n or length < 1:
            raise ValueError("truncated field body")
        tag, body = blob[i : i + 1], blob[i + 1 : i + length]
        i += length
        if tag == b"n":
            out.append(None)
        elif tag == b"o":
            out.append(body == b"\x01")
        elif tag == b"i":
            out.append(int.from_bytes(body, "big", signed=True))
        elif tag == b"s":
            out.append(body.decode("utf-8"))
        elif tag == b"b":
            out.append(body)
        elif tag == b"t":
            out.append(canonical_decode(body))
        else:
            raise ValueError(f"unknown field tag {tag!r}")
    return out


@dataclass(frozen=True)
class PublicIdentity:
    """Public half of a party's key pair: verification + sealing keys."""

    verify_key: bytes
    seal_key: bytes


class KeyPair:
    """Deterministic key pair derived from an integer seed.

    The secret halves are private attributes; nothing outside this module
    should reach them, and adversary code never holds an honest KeyPair.
    """

    def __init__(self, seed: int):
        self.seed = seed
        seed_bytes = seed.to_bytes(16, "big", signed=True)
        self._signing = Ed25519PrivateKey.from_private_bytes(
            blake(b"sign", seed_bytes)
        )
        self._exchange = X25519PrivateKey.from_private_bytes(
            blake(b"seal", seed_bytes)
        )
        self.public = PublicIdentity(
            verify_key=self._signing.public_key().public_bytes(
                Encoding.Raw, PublicFormat.Raw
            ),
            seal_key=self._exchange.public_key().public_bytes(
                Encoding.Raw, PublicFormat.Raw
            ),
        )

    def __eq__(self, other):
        return isinstance(other, KeyPair) and other.public == self.public

    def __hash__(self):
        return hash(self.public)


def generate_keypair(seed: int) -> KeyPair:
    return KeyPair(seed)


@dataclass(frozen=True)
class Signed:
    """A payload with a signature attributable to one party."""

    payload: bytes
    signer: PartyId
    signature: bytes


def sign_bytes(message: bytes, signer: PartyId, keypair: KeyPair) -> Signed:
    sig = keypair._signing.sign(canonical_encode(signer, message))
    return Signed(payload=message, signer=signer, signature=sig)


def verify_signed(signed: Signed, public: PublicIdentity) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public.verify_key).verify(
            signed.signature, canonical_encode(signed.signer, signed.payload)
        )
        return True
    except InvalidSignature:
        return False


@dataclass(frozen=True)
class Sealed:
    """Ciphertext only the recipient's key pair can open."""

    recipient: PartyId
    ciphertext: bytes


_SEAL_NONCE = b"\x00" * 12  # safe: the box key is unique per message


class PkiRegistry:
    """PartyId -> PublicIdentity map, immutable once frozen."""

    def __init__(self):
        self._entries: dict[PartyId, PublicIdentity] = {}
        self._frozen = False

    def register(self, party: PartyId, public: PublicIdentity) -> None:
        if self._frozen:
            raise RegistryFrozen("membership is fixed for the scenario")
        self._entries[party] = public

    def freeze(self) -> None:
        self._frozen = True

    def public_key(self, party: PartyId) -> PublicIdentity:
        try:
            return self._entries[party]
        except KeyError:
            raise UnknownParty(party) from None

    def parties(self) -> list[PartyId]:
        return sorted(self._entries)


def seal(message: bytes, recipient: PartyId, registry: PkiRegistry) -> Sealed:
    """Encrypt so that only the recipient's key pair can recover message.

    The ephemeral key is derived from (recipient key, message), which makes
    sealing deterministic; scenario replay then yields byte-identical CRDs.
    """
    pk = registry.public_key(recipient)
    eph = X25519PrivateKey.from_private_bytes(blake(b"eph", pk.seal_key, message))
    eph_pub = eph.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    shared = eph.exchange(X25519PublicKey.from_public_bytes(pk.seal_key))
    box_key = blake(b"box", shared, eph_pub, pk.seal_key)
    ct = ChaCha20Poly1305(box_key).encrypt(_SEAL_NONCE, message, None)
    return Sealed(recipient=recipient, ciphertext=eph_pub + ct)


def open_sealed(sealed: Sealed, holder: KeyPair) -> bytes:
    eph_pub = sealed.ciphertext[:32]
    ct = sealed.ciphertext[32:]
    my_seal_key = holder.public.seal_key
    shared = holder._exchange.exchange(X25519PublicKey.from_public_bytes(eph_pub))
    box_key = blake(b"box", shared, eph_pub, my_seal_key)
    try:
        return ChaCha20Poly1305(box_key).decrypt(_SEAL_NONCE, ct, None)
    except InvalidTag:
        raise OpenDenied(
            f"holder is not party {sealed.recipient}'s key pair"
        ) from None
