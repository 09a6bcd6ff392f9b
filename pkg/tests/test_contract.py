import math

import numpy as np
import pytest

from puftrack import crypto, puf
from puftrack.contract import (
    ContractConfig,
    ConfigError,
    ItemId,
    TrackingContract,
    decode_crd,
    encode_crd,
    key_alert,
    key_crd,
    key_shipped,
    stored_crd,
)
from puftrack.crypto import canonical_decode, canonical_encode
from puftrack.ledger import WriteOnceStore, make_transaction


@pytest.fixture
def env():
    kps = {p: crypto.generate_keypair(700 + p) for p in range(4)}
    reg = crypto.PkiRegistry()
    for p, k in kps.items():
        reg.register(p, k.public)
    reg.freeze()
    contract = TrackingContract(ContractConfig(challenges=10, threshold=9, n_parties=4))
    return reg, kps, contract, WriteOnceStore()


def enrolled_item(reg, seed=1, noise=0.0, width=8):
    rng = np.random.default_rng(seed)
    dev = puf.PufDevice(seed, width, noise, rng=np.random.default_rng(seed + 1))
    item = ItemId(0, 0)
    crd = puf.enroll(dev, item, 4, 10, reg, rng)
    return item, dev, crd


def apply_txn(contract, store, kps, caller, method, *args, seq=0):
    txn = make_transaction(caller, method, canonical_encode(*args), kps[caller])
    return contract.apply(store, txn, seq)


def test_config_validation():
    with pytest.raises(ConfigError):
        ContractConfig(challenges=10, threshold=11).validate()
    with pytest.raises(ConfigError):
        ContractConfig(threshold=0).validate()
    with pytest.raises(ConfigError):
        ContractConfig(n_parties=3).validate(require_byzantine_margin=True)
    ContractConfig(n_parties=3).validate()  # plain replication is allowed


def test_crd_codec_roundtrip(env):
    reg, kps, _, _ = env
    item, _, crd = enrolled_item(reg)
    back = decode_crd(encode_crd(crd))
    assert back.item_id == item
    assert back.subsets == crd.subsets


def test_register_is_write_once(env):
    reg, kps, contract, store = env
    item, _, crd = enrolled_item(reg)
    result, writes = apply_txn(contract, store, kps, 0, "register_item",
                               item.producer, item.counter, encode_crd(crd))
    assert result == "ok" and [k for k, _ in writes] == [key_crd(item)]
    assert stored_crd(store, item)[0] == 0
    result, writes = apply_txn(contract, store, kps, 1, "register_item",
                               item.producer, item.counter, encode_crd(crd), seq=1)
    assert result == "key_exists" and writes == []


def test_ship_records_edge_and_is_write_once(env):
    reg, kps, contract, store = env
    result, writes = apply_txn(contract, store, kps, 0, "ship_item", 1, 0, 0)
    assert result == "ok"
    assert store.get(key_shipped(0, 1, ItemId(0, 0))) is not None
    result, _ = apply_txn(contract, store, kps, 0, "ship_item", 1, 0, 0, seq=1)
    assert result == "key_exists"


def test_get_challenges_without_shipment_raises_alert(env):
    reg, kps, contract, store = env
    result, writes = apply_txn(contract, store, kps, 1, "get_challenges", 0, 0, 0, None)
    assert result == "no_ship"
    assert [k for k, _ in writes] == [key_alert("no_ship", 0, 1, ItemId(0, 0))]
    # the alert itself is write-once
    result, _ = apply_txn(contract, store, kps, 1, "get_challenges", 0, 0, 0, None, seq=1)
    assert result == "key_exists"


def test_get_challenges_without_crd_raises_alert(env):
    reg, kps, contract, store = env
    apply_txn(contract, store, kps, 0, "ship_item", 1, 0, 0)
    result, writes = apply_txn(contract, store, kps, 1, "get_challenges", 0, 0, 0, None, seq=1)
    assert result == "no_crd"
    assert [k for k, _ in writes] == [key_alert("no_crd", 0, 1, ItemId(0, 0))]


def full_honest_flow(env, noise=0.0, corrupt_measure=False):
    reg, kps, contract, store = env
    item, dev, crd = enrolled_item(reg, noise=noise)
    apply_txn(contract, store, kps, 0, "register_item", item.producer, item.counter, encode_crd(crd))
    apply_txn(contract, store, kps, 0, "ship_item", 1, 0, 0, seq=1)
    crv = puf.open_subset(crd, 1, kps[1])
    crv_blob = puf.encode_pairs(crv.pairs)
    result, _ = apply_txn(contract, store, kps, 1, "get_challenges", 0, 0, 0, crv_blob, seq=2)
    assert result == "challenges_declared"
    measured = tuple(
        puf.ChallengeResponsePair(p.challenge, dev.query(p.challenge) ^ (0xFF if corrupt_measure else 0))
        for p in crv.pairs
    )
    result, writes = apply_txn(
        contract, store, kps, 1, "verify_item",
        0, 0, 0, crv_blob, puf.encode_pairs(measured), seq=3,
    )
    return store, item, crv_blob, result, writes


def test_verification_succeeds_for_intact_device(env):
    store, item, crv_blob, result, writes = full_honest_flow(env)
    assert result == "succeeded"
    key = key_alert("verification_succeeded", 0, 1, item)
    assert store.get(key) == crv_blob


def test_verification_failure_records_both_vectors(env):
    store, item, crv_blob, result, writes = full_honest_flow(env, corrupt_measure=True)
    assert result == "failed"
    value = store.get(key_alert("verification_failed", 0, 1, item))
    declared, measured = canonical_decode(value)
    assert bytes(declared) == crv_blob
    assert bytes(measured) != crv_blob


def test_verify_requires_matching_declaration(env):
    reg, kps, contract, store = env
    item, dev, crd = enrolled_item(reg)
    crv = puf.open_subset(crd, 1, kps[1])
    blob = puf.encode_pairs(crv.pairs)
    # no declaration on the ledger yet
    result, _ = apply_txn(contract, store, kps, 1, "verify_item", 0, 0, 0, blob, blob)
    assert result == "no_declaration"
    apply_txn(contract, store, kps, 0, "register_item", item.producer, item.counter, encode_crd(crd), seq=1)
    apply_txn(contract, store, kps, 0, "ship_item", 1, 0, 0, seq=2)
    apply_txn(contract, store, kps, 1, "get_challenges", 0, 0, 0, blob, seq=3)
    other = puf.encode_pairs(tuple(puf.ChallengeResponsePair(p.challenge, p.response ^ 1) for p in crv.pairs))
    result, _ = apply_txn(contract, store, kps, 1, "verify_item", 0, 0, 0, other, other, seq=4)
    assert result == "declaration_mismatch"


def test_malformed_calls_are_inert(env):
    reg, kps, contract, store = env
    assert apply_txn(contract, store, kps, 0, "melt_item", 1)[0] == "unknown_method"
    assert apply_txn(contract, store, kps, 0, "ship_item", 1)[0] == "bad_args"
    txn = make_transaction(0, "ship_item", b"\xff\xff", kps[0])
    assert contract.apply(store, txn, 0) == ("bad_args", [])
    assert store.items() == []


def test_wrong_size_challenge_vector_rejected(env):
    reg, kps, contract, store = env
    item, dev, crd = enrolled_item(reg)
    apply_txn(contract, store, kps, 0, "register_item", item.producer, item.counter, encode_crd(crd))
    apply_txn(contract, store, kps, 0, "ship_item", 1, 0, 0, seq=1)
    crv = puf.open_subset(crd, 1, kps[1])
    short = puf.encode_pairs(crv.pairs[:5])
    result, _ = apply_txn(contract, store, kps, 1, "get_challenges", 0, 0, 0, short, seq=2)
    assert result == "bad_args"


# -- acceptance-threshold oracles ------------------------------------------

def _success_rate(expected_dev, measuring_dev, trials, rng, challenges=10, threshold=9):
    wins = 0
    for _ in range(trials):
        batch = [int(c) for c in rng.integers(0, 2**62, size=challenges)]
        matches = sum(
            expected_dev.ideal_response(c) == measuring_dev.query(c) for c in batch
        )
        wins += matches >= threshold
    return wins / trials


def test_false_accept_rate_matches_binomial_oracle():
    # wrong device, W=8: per-challenge hit chance 2^-8, so
    # P(>= 9 of 10) = C(10,9) p^9 (1-p) + p^10 ~ 3.9e-21; 3 sigma over
    # 1000 trials rounds to exactly zero accepts
    rng = np.random.default_rng(5)
    enrolled = puf.PufDevice(1, 8, 0.0, rng=np.random.default_rng(2))
    wrong = puf.PufDevice(2, 8, 0.0, rng=np.random.default_rng(3))
    p = 2.0**-8
    analytic = 10 * p**9 * (1 - p) + p**10
    assert analytic < 1e-20
    assert _success_rate(enrolled, wrong, 1000, rng) == 0.0


def test_true_accept_rate_matches_binomial_oracle():
    # single-shot queries with noise chosen so a pair matches w.p. 0.98:
    # success rate is P(Binomial(10, 0.98) >= 9) ~ 0.9838
    width = 8
    eps = 1.0 - 0.98 ** (1.0 / width)
    dev = puf.PufDevice(9, width, eps, rng=np.random.default_rng(4))
    clean = puf.PufDevice(9, width, 0.0, rng=np.random.default_rng(5))
    rng = np.random.default_rng(6)
    q = 0.98
    analytic = 10 * q**9 * (1 - q) + q**10
    rate = _success_rate(clean, dev, 1000, rng)
    sigma = math.sqrt(analytic * (1 - analytic) / 1000)
    assert abs(rate - analytic) <= 3 * sigma + 1e-9
