import pytest
from hypothesis import given, strategies as st

from puftrack import crypto


@pytest.fixture
def registry_pair():
    kp = {p: crypto.generate_keypair(1000 + p) for p in range(3)}
    reg = crypto.PkiRegistry()
    for p, k in kp.items():
        reg.register(p, k.public)
    reg.freeze()
    return reg, kp


def test_sign_verify_roundtrip(registry_pair):
    reg, kp = registry_pair
    signed = crypto.sign_bytes(b"hello", 1, kp[1])
    assert crypto.verify_signed(signed, reg.public_key(1))


def test_verify_rejects_tampered_payload(registry_pair):
    reg, kp = registry_pair
    signed = crypto.sign_bytes(b"hello", 1, kp[1])
    forged = crypto.Signed(payload=b"hellp", signer=1, signature=signed.signature)
    assert not crypto.verify_signed(forged, reg.public_key(1))


def test_verify_rejects_reattributed_signer(registry_pair):
    # the signer id is bound into the signed bytes, so a valid signature
    # cannot be replayed under another party's name
    reg, kp = registry_pair
    signed = crypto.sign_bytes(b"hello", 1, kp[1])
    forged = crypto.Signed(payload=b"hello", signer=2, signature=signed.signature)
    assert not crypto.verify_signed(forged, reg.public_key(2))
    assert not crypto.verify_signed(forged, reg.public_key(1))


def test_keypair_deterministic():
    assert crypto.generate_keypair(42) == crypto.generate_keypair(42)
    assert crypto.generate_keypair(42) != crypto.generate_keypair(43)


def test_seal_open_roundtrip(registry_pair):
    reg, kp = registry_pair
    sealed = crypto.seal(b"secret payload", 2, reg)
    assert sealed.recipient == 2
    assert crypto.open_sealed(sealed, kp[2]) == b"secret payload"


def test_open_denied_for_wrong_holder(registry_pair):
    reg, kp = registry_pair
    sealed = crypto.seal(b"secret payload", 2, reg)
    with pytest.raises(crypto.OpenDenied):
        crypto.open_sealed(sealed, kp[1])


def test_sealing_is_deterministic(registry_pair):
    reg, _ = registry_pair
    a = crypto.seal(b"same bytes", 0, reg)
    b = crypto.seal(b"same bytes", 0, reg)
    assert a == b
    assert crypto.seal(b"other bytes", 0, reg) != a


def test_registry_freeze_and_unknown_party(registry_pair):
    reg, kp = registry_pair
    with pytest.raises(crypto.RegistryFrozen):
        reg.register(9, kp[0].public)
    with pytest.raises(crypto.UnknownParty):
        reg.public_key(9)
    assert reg.parties() == [0, 1, 2]


# -- canonical serialization ------------------------------------------------

_scalar = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(min_value=-(2**120), max_value=2**120),
    st.text(max_size=40),
    st.binary(max_size=40),
)
_field = st.recursive(_scalar, lambda inner: st.lists(inner, max_size=4), max_leaves=12)


def _norm(f):
    # decode maps tuples to lists and bytearrays to bytes
    if isinstance(f, (tuple, list)):
        return [_norm(x) for x in f]
    if isinstance(f, bytearray):
        return bytes(f)
    return f


@given(st.lists(_field, max_size=6))
def test_canonical_roundtrip(fields):
    blob = crypto.canonical_encode(*fields)
    assert crypto.canonical_decode(blob) == [_norm(f) for f in fields]


@given(st.lists(_scalar, max_size=4), st.lists(_scalar, max_size=4))
def test_canonical_injective(a, b):
    if [_norm(f) for f in a] != [_norm(f) for f in b]:
        assert crypto.canonical_encode(*a) != crypto.canonical_encode(*b)


def test_canonical_distinguishes_ambiguous_concatenations():
    assert crypto.canonical_encode("ab", "c") != crypto.canonical_encode("a", "bc")
    assert crypto.canonical_encode(b"1") != crypto.canonical_encode("1")
    assert crypto.canonical_encode([1, 2]) != crypto.canonical_encode(1, 2)


def test_canonical_decode_rejects_garbage():
    with pytest.raises(ValueError):
        crypto.canonical_decode(b"\x00\x00\x00\x05ab")
    with pytest.raises(ValueError):
        crypto.canonical_decode(b"\x00\x00\x00\x01?")
    with pytest.raises(TypeError):
        crypto.canonical_encode(1.5)
