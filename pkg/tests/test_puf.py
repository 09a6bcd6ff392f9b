import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from puftrack import crypto, puf
from puftrack.contract import ItemId


def make_device(seed=7, width=8, noise=0.0):
    return puf.PufDevice(seed, width, noise, rng=np.random.default_rng(seed))


def test_ideal_response_deterministic_and_masked():
    dev = make_device(width=4)
    for c in range(100):
        r = dev.ideal_response(c)
        assert r == dev.ideal_response(c)
        assert 0 <= r < 16


def test_distinct_devices_disagree():
    a, b = make_device(1), make_device(2)
    assert any(a.ideal_response(c) != b.ideal_response(c) for c in range(20))


def test_noiseless_query_equals_ideal():
    dev = make_device(noise=0.0)
    assert all(dev.query(c) == dev.ideal_response(c) for c in range(200))


def test_noise_rate_oracle():
    # per-query survival probability is (1 - eps)^W; check the measured
    # exact-match rate against the closed form
    eps, width, n = 0.01, 32, 10_000
    dev = make_device(seed=3, width=width, noise=eps)
    hits = sum(dev.query(c) == dev.ideal_response(c) for c in range(n))
    expect = (1 - eps) ** width  # ~0.7250
    assert abs(hits / n - expect) < 0.02


def test_cross_device_collision_rate_matches_width():
    # two independent W-bit functions agree on a challenge w.p. 2^-W
    width, n = 8, 10_000
    a, b = make_device(10, width), make_device(11, width)
    hits = sum(a.ideal_response(c) == b.ideal_response(c) for c in range(n))
    p = 2.0**-width
    sigma = math.sqrt(n * p * (1 - p))
    assert abs(hits - n * p) <= 3 * sigma


def test_query_denoised_recovers_ideal_under_default_noise():
    dev = make_device(seed=5, noise=puf.DEFAULT_NOISE)
    # P(majority-of-5 flips a bit) ~ 10 * eps^3, negligible over 1000 queries
    assert all(dev.query_denoised(c, repeats=5) == dev.ideal_response(c) for c in range(1000))


def test_tamper_changes_function_but_keeps_package():
    dev = make_device(seed=9)
    before = [dev.ideal_response(c) for c in range(50)]
    tampered = puf.tamper(dev)
    assert tampered.tampered and tampered.device_seed == dev.device_seed
    assert tampered.active_seed != dev.device_seed
    after = [tampered.ideal_response(c) for c in range(50)]
    assert before != after


def test_tampered_collision_rate_is_two_to_minus_width():
    # after reseeding, old and new responses collide at the chance rate
    width, n = 8, 10_000
    dev = make_device(seed=13, width=width)
    tampered = puf.tamper(make_device(seed=13, width=width))
    hits = sum(dev.ideal_response(c) == tampered.ideal_response(c) for c in range(n))
    p = 2.0**-width
    sigma = math.sqrt(n * p * (1 - p))
    assert abs(hits - n * p) <= 3 * sigma


def test_clone_denied_below_threshold():
    pairs = [puf.ChallengeResponsePair(c, 0) for c in range(10)]
    with pytest.raises(puf.CloneDenied):
        puf.clone(pairs, threshold=11, fresh_seed=1)


def test_clone_replays_observed_pairs_only():
    dev = make_device(seed=21)
    pairs = [puf.ChallengeResponsePair(c, dev.ideal_response(c)) for c in range(50)]
    cloned = puf.clone(pairs, threshold=50, fresh_seed=999, noise_rate=0.0)
    assert all(cloned.query(c) == dev.ideal_response(c) for c in range(50))
    # outside the replay set it behaves like an unrelated fresh device
    unseen = range(1000, 1100)
    agree = sum(cloned.ideal_response(c) == dev.ideal_response(c) for c in unseen)
    assert agree < 10


# -- enrolment --------------------------------------------------------------

@pytest.fixture
def pki():
    kp = {p: crypto.generate_keypair(50 + p) for p in range(4)}
    reg = crypto.PkiRegistry()
    for p, k in kp.items():
        reg.register(p, k.public)
    reg.freeze()
    return reg, kp


def test_enroll_seals_one_subset_per_party(pki):
    reg, kp = pki
    dev = make_device(seed=31, noise=puf.DEFAULT_NOISE)
    crd = puf.enroll(dev, ItemId(0, 0), 4, 10, reg, np.random.default_rng(0))
    assert len(crd.subsets) == 4
    challenges = set()
    for party in range(4):
        crv = puf.open_subset(crd, party, kp[party])
        assert len(crv) == 10
        for pair in crv.pairs:
            assert pair.response == dev.ideal_response(pair.challenge)
            challenges.add(pair.challenge)
    assert len(challenges) == 40  # all distinct across subsets


def test_enrolled_subset_unreadable_by_other_party(pki):
    reg, kp = pki
    dev = make_device(seed=32)
    crd = puf.enroll(dev, ItemId(0, 0), 4, 10, reg, np.random.default_rng(1))
    with pytest.raises(crypto.OpenDenied):
        crypto.open_sealed(crd.subsets[2], kp[3])


def test_pair_codec_roundtrip():
    pairs = tuple(puf.ChallengeResponsePair(c * 17, c % 256) for c in range(30))
    assert puf.decode_pairs(puf.encode_pairs(pairs)) == pairs
    with pytest.raises(ValueError):
        puf.decode_pairs(b"\x00" * 7)


# -- match counting ---------------------------------------------------------

@given(st.lists(st.tuples(st.integers(0, 255), st.integers(0, 255)), min_size=1, max_size=30))
def test_match_count_agrees_with_brute_force(responses):
    expected = puf.ChallengeResponseVector(
        tuple(puf.ChallengeResponsePair(i, a) for i, (a, _) in enumerate(responses))
    )
    measured = puf.ChallengeResponseVector(
        tuple(puf.ChallengeResponsePair(i, b) for i, (_, b) in enumerate(responses))
    )
    brute = 0
    for a, b in responses:
        if a == b:
            brute += 1
    assert puf.match_count(expected, measured) == brute


def test_match_count_rejects_different_challenges():
    a = puf.ChallengeResponseVector((puf.ChallengeResponsePair(1, 0),))
    b = puf.ChallengeResponseVector((puf.ChallengeResponsePair(2, 0),))
    with pytest.raises(puf.ChallengeMismatch):
        puf.match_count(a, b)
    with pytest.raises(puf.ChallengeMismatch):
        puf.match_count(a, puf.ChallengeResponseVector(()))
