"""Simulated physically unclonable functions.

A device computes a W-bit pseudo-random response per challenge, keyed by a
device seed that stands in for manufacturing variation. Query-time noise
flips each response bit independently with a small probability. Tampering
reseeds the function; cloning replays observed pairs and answers anything
else from a fresh seed.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

DEFAULT_WIDTH = 8
DEFAULT_NOISE = 0.002
DEFAULT_CLONE_THRESHOLD = 1000
ENROLL_REPEATS = 9

_PAIR = struct.Struct("<QQ")


class ChallengeMismatch(Exception):
    """match_count called on vectors with different challenge sequences."""


class CloneDenied(Exception):
    """Fewer observed pairs than the clone threshold requires."""


def _response(seed: int, challenge: int, width: int) -> int:
    h = hashlib.blake2b(
        challenge.to_bytes(8, "big"),
        digest_size=8,
        key=seed.to_bytes(16, "big", signed=True),
    )
    return int.from_bytes(h.digest(), "big") & ((1 << width) - 1)


class PufDevice:
    """One physical function: seeded response map plus a noise stream.

    Queries draw noise from a per-device random stream, so access to one
    device must be serialized; distinct devices are independent.
    """

    def __init__(
        self,
        device_seed: int,
        response_width: int = DEFAULT_WIDTH,
        noise_rate: float = DEFAULT_NOISE,
        *,
        tampered: bool = False,
        tamper_seed: int | None = None,
        rng: np.random.Generator | None = None,
    ):
        if not 0.0 <= noise_rate < 1.0:
            raise ValueError("noise_rate must be in [0, 1)")
        self.device_seed = device_seed
        self.response_width = response_width
        self.noise_rate = noise_rate
        self.tampered = tampered
        self.tamper_seed = tamper_seed
        if tampered and tamper_seed == device_seed:
            raise ValueError("tamper_seed must differ from device_seed")
        self._rng = rng if rng is not None else np.random.default_rng(device_seed & (2**63 - 1))

    @property
    def active_seed(self) -> int:
        return self.tamper_seed if self.tampered else self.device_seed

    def ideal_response(self, challenge: int) -> int:
        return _response(self.active_seed, challenge, self.response_width)

    def query(self, challenge: int) -> int:
        """Measure once; each bit flips independently with the noise rate."""
        r = self.ideal_response(challenge)
        if self.noise_rate > 0.0:
            flips = self._rng.random(self.response_width) < self.noise_rate
            for bit in np.flatnonzero(flips):
                r ^= 1 << int(bit)
        return r

    def query_denoised(self, challenge: int, repeats: int = 5) -> int:
        """Bitwise majority over repeated measurements."""
        if self.noise_rate == 0.0 or repeats <= 1:
            return self.query(challenge)
        counts = [0] * self.response_width
        for _ in range(repeats):
            r = self.query(challenge)
            for bit in range(self.response_width):
                if r >> bit & 1:
                    counts[bit] += 1
        out = 0
        for bit, ones in enumerate(counts):
            if 2 * ones > repeats:
                out |= 1 << bit
        return out


def tamper(device: PufDevice) -> PufDevice:
    """Return the device after tampering: same package, fresh function."""
    while True:
        fresh = int(device._rng.integers(0, 2**63))
        if fresh not in (device.device_seed, device.tamper_seed):
            break
    return PufDevice(
        device.device_seed,
        device.response_width,
        device.noise_rate,
        tampered=True,
        tamper_seed=fresh,
        rng=device._rng,
    )


class ClonedPufDevice(PufDevice):
    """Replays observed pairs exactly; unknown challenges use a fresh seed."""

    def __init__(self, replay: dict[int, int], fresh_seed: int, width: int, noise_rate: float):
        super().__init__(fresh_seed, width, noise_rate)
        self._replay = dict(replay)

    def ideal_response(self, challenge: int) -> int:
        got = self._replay.get(challenge)
        if got is not None:
            return got
        return super().ideal_response(challenge)


def clone(
    pairs_observed,
    threshold: int = DEFAULT_CLONE_THRESHOLD,
    *,
    fresh_seed: int,
    response_width: int = DEFAULT_WIDTH,
    noise_rate: float = DEFAULT_NOISE,
) -> ClonedPufDevice:
    """Build a replay clone if enough pairs were observed, else deny."""
    pairs = list(pairs_observed)
    if len(pairs) < threshold:
        raise CloneDenied(f"observed {len(pairs)} pairs, need {threshold}")
    return ClonedPufDevice(
        {p.challenge: p.response for p in pairs}, fresh_seed, response_width, noise_rate
    )


@dataclass(frozen=True)
class ChallengeResponsePair:
    challenge: int
    response: int


@dataclass(frozen=True)
class ChallengeResponseVector:
    """The C pairs one party uses for a single verification."""

    pairs: tuple[ChallengeResponsePair, ...]

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class ChallengeResponseData:
    """Per-item enrolment record: one sealed C-pair subset per party."""

    item_id: object
    subsets: tuple  # of crypto.Sealed, entry w openable by party w only


def encode_pairs(pairs) -> bytes:
    return b"".join(_PAIR.pack(p.challenge, p.response) for p in pairs)


def decode_pairs(blob: bytes) -> tuple[ChallengeResponsePair, ...]:
    if len(blob) % _PAIR.size:
        raise ValueError("pair blob length is not a multiple of the pair size")
    return tuple(
        ChallengeResponsePair(*_PAIR.unpack_from(blob, off))
        for off in range(0, len(blob), _PAIR.size)
    )


def enroll(
    device: PufDevice,
    item_id,
    n_parties: int,
    per_party: int,
    registry,
    rng: np.random.Generator,
) -> ChallengeResponseData:
    """Collect C*N distinct pairs and seal C of them for each party.

    Enrolment responses are denoised (majority over repeated measurements)
    so the stored data is the ground truth for the enrolled function.
    """
    from . import crypto

    total = n_parties * per_party
    challenges: list[int] = []
    seen: set[int] = set()
    while len(challenges) < total:
        draw = rng.integers(0, 2**63, size=total - len(challenges))
        for c in draw:
            c = int(c)
            if c not in seen:
                seen.add(c)
                challenges.append(c)
    pairs = [
        ChallengeResponsePair(c, device.query_denoised(c, repeats=ENROLL_REPEATS))
        for c in challenges
    ]
    subsets = []
    for w in range(n_parties):
        chunk = pairs[w * per_party : (w + 1) * per_party]
        subsets.append(crypto.seal(encode_pairs(chunk), w, registry))
    return ChallengeResponseData(item_id=item_id, subsets=tuple(subsets))


def open_subset(crd: ChallengeResponseData, party: int, keypair) -> ChallengeResponseVector:
    """Decrypt the holder's own subset of an item's enrolment data."""
    from . import crypto

    blob = crypto.open_sealed(crd.subsets[party], keypair)
    return ChallengeResponseVector(pairs=decode_pairs(blob))


def match_count(expected: ChallengeResponseVector, measured: ChallengeResponseVector) -> int:
    """Number of positions whose responses are exactly equal."""
    if len(expected) != len(measured) or any(
        a.challenge != b.challenge for a, b in zip(expected.pairs, measured.pairs)
    ):
        raise ChallengeMismatch("vectors carry different challenge sequences")
    return sum(a.response == b.response for a, b in zip(expected.pairs, measured.pairs))
