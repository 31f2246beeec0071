import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryptomips.tdes import (
    PARITY_MASK,
    PC2,
    KeySet,
    des_decrypt,
    des_encrypt,
    format_hex64,
    key_schedule,
    parse_hex64,
    permute,
    tdes_decrypt,
    tdes_encrypt,
)
from helpers import PAPER_KEYS, reference_des

u64 = st.integers(min_value=0, max_value=2**64 - 1)

# (key, plaintext, ciphertext): classic published DES known-answer vectors
KATS = [
    (0x133457799BBCDFF1, 0x0123456789ABCDEF, 0x85E813540F0AB405),
    (0x0E329232EA6D0D73, 0x8787878787878787, 0x0000000000000000),
    (0x0123456789ABCDEF, 0x4E6F772069732074, 0x3FA40E8A984D4815),
    (0x0101010101010101, 0x95F8A5E5DD31D900, 0x8000000000000000),
    (0x0101010101010101, 0x0000000000000000, 0x8CA64DE9C1B123A7),
    (0xFFFFFFFFFFFFFFFF, 0xFFFFFFFFFFFFFFFF, 0x7359B2163E4EDC58),
    (0x3000000000000000, 0x1000000000000001, 0x958E6E627A05557B),
    (0x1111111111111111, 0x1111111111111111, 0xF40379AB9E0EC533),
]


@pytest.fixture(scope="module")
def oracle():
    return reference_des()


class TestKeySchedule:
    def test_zero_key_gives_zero_subkeys(self):
        assert key_schedule(0) == (0,) * 16

    def test_round_one_subkey(self):
        assert key_schedule(0x133457799BBCDFF1)[0] == 0x1B02EFFC7072

    def test_sixteen_48_bit_entries(self):
        sched = key_schedule(0x133457799BBCDFF1)
        assert len(sched) == 16
        assert all(0 <= k < 2**48 for k in sched)

    def test_parity_bits_are_ignored(self):
        assert key_schedule(0x0101010101010101) == key_schedule(0)

    def test_last_round_subkey(self):
        # round 16 from the same worked example
        assert key_schedule(0x133457799BBCDFF1)[15] == 0xCB3D8B0E17F5

    def test_pc2_of_first_rotation(self):
        # round 1 of the worked example: C1D1 after one left rotation
        cd = 0xE19955FAACCF1E
        assert permute(cd, PC2, 56) == 0x1B02EFFC7072


class TestDesKnownAnswers:
    @pytest.mark.parametrize("key,plain,cipher", KATS)
    def test_encrypt(self, key, plain, cipher):
        assert des_encrypt(plain, key) == cipher

    @pytest.mark.parametrize("key,plain,cipher", KATS)
    def test_decrypt(self, key, plain, cipher):
        assert des_decrypt(cipher, key) == plain

    @pytest.mark.parametrize("key,plain,cipher", KATS)
    def test_vectors_agree_with_reference_library(self, oracle, key, plain, cipher):
        enc, _ = oracle
        assert enc(plain, key) == cipher

    def test_reference_single_des_vector(self):
        assert des_encrypt(0x38, 0x4B4952415450414C) == 0x2542B17039A61551
        assert des_decrypt(0x2542B17039A61551, 0x4B4952415450414C) == 0x38

    @settings(max_examples=200, deadline=None)
    @given(block=u64, key=u64)
    def test_matches_reference_library(self, oracle, block, key):
        enc, dec = oracle
        assert des_encrypt(block, key) == enc(block, key)
        assert des_decrypt(block, key) == dec(block, key)


class TestTripleDes:
    def test_reference_keys_encrypt(self):
        assert tdes_encrypt(0x38, PAPER_KEYS) == 0x2542B17039A61551

    def test_reference_keys_decrypt_roundtrip(self):
        assert tdes_decrypt(0x2542B17039A61551, PAPER_KEYS) == 0x38

    def test_reference_keys_decrypt_of_plain_value(self):
        assert tdes_decrypt(0x38, PAPER_KEYS) == 0x2C824FE86704FD6E

    def test_tuple_and_keyset_agree(self):
        assert tdes_encrypt(7, (1, 2, 3)) == tdes_encrypt(7, KeySet(1, 2, 3))

    def test_ede_order(self):
        k1, k2, k3 = 0x0123456789ABCDEF, 0x23456789ABCDEF01, 0x456789ABCDEF0123
        expect = des_encrypt(des_decrypt(des_encrypt(0x5A, k1), k2), k3)
        assert tdes_encrypt(0x5A, (k1, k2, k3)) == expect

    @settings(max_examples=1000, deadline=None)
    @given(block=u64, k1=u64, k2=u64, k3=u64)
    def test_roundtrip(self, block, k1, k2, k3):
        keys = (k1, k2, k3)
        assert tdes_decrypt(tdes_encrypt(block, keys), keys) == block
        assert tdes_encrypt(tdes_decrypt(block, keys), keys) == block

    @settings(max_examples=1000, deadline=None)
    @given(block=u64, k=u64, k3=u64)
    def test_ede_collapse(self, block, k, k3):
        assert tdes_encrypt(block, (k, k, k3)) == des_encrypt(block, k3)
        assert tdes_decrypt(block, (k, k, k3)) == des_decrypt(block, k3)

    @settings(max_examples=200, deadline=None)
    @given(block=u64, k=u64)
    def test_all_keys_equal_is_single_des(self, block, k):
        assert tdes_encrypt(block, (k, k, k)) == des_encrypt(block, k)

    @settings(max_examples=200, deadline=None)
    @given(block=u64, keys=st.tuples(u64, u64, u64),
           which=st.integers(0, 2), parity=st.integers(0, 255))
    def test_parity_independence(self, block, keys, which, parity):
        spread = sum(((parity >> i) & 1) << (8 * i) for i in range(8))
        assert spread & ~PARITY_MASK == 0
        flipped = list(keys)
        flipped[which] ^= spread
        assert tdes_encrypt(block, keys) == tdes_encrypt(block, tuple(flipped))


class TestAvalanche:
    def test_single_bit_flip_changes_about_half(self):
        import random

        rng = random.Random(2024)
        total = 0
        trials = 1000
        for _ in range(trials):
            block, key = rng.getrandbits(64), rng.getrandbits(64)
            bit = 1 << rng.randrange(64)
            total += bin(des_encrypt(block, key) ^ des_encrypt(block ^ bit, key)).count("1")
        assert 24 <= total / trials <= 40


class TestKeySet:
    def test_lower_then_upper_fills_first_key(self):
        ks = KeySet()
        ks.write_half(False, 0x54504C41)
        assert ks.k1 == 0x0000000054504C41 and ks.fill_ptr == 0
        ks.write_half(True, 0x4B495241)
        assert ks.k1 == 0x4B49524154504C41 and ks.fill_ptr == 1

    def test_six_writes_fill_all_three_and_wrap(self):
        ks = KeySet()
        for i, k in enumerate((0x1111111122222222, 0x3333333344444444, 0x5555555566666666)):
            ks.write_half(False, k & 0xFFFFFFFF)
            ks.write_half(True, k >> 32)
        assert ks.keys == (0x1111111122222222, 0x3333333344444444, 0x5555555566666666)
        assert ks.fill_ptr == 0

    def test_fingerprint_distinguishes_keys(self):
        assert KeySet(0, 0, 1).fingerprint() != KeySet(0, 0, 2).fingerprint()
        assert KeySet(1, 2, 3).fingerprint() == KeySet(1, 2, 3).fingerprint()

    def test_copy_is_independent(self):
        ks = KeySet(1, 2, 3)
        cp = ks.copy()
        cp.write_half(True, 9)
        assert ks.keys == (1, 2, 3)


class TestHex:
    @pytest.mark.parametrize("text,value", [
        ("4b4952415450414c", 0x4B4952415450414C),
        ("0x4B4952415450414C", 0x4B4952415450414C),
        ("0", 0),
    ])
    def test_parse(self, text, value):
        assert parse_hex64(text) == value

    @pytest.mark.parametrize("bad", ["", "xyz", "1" * 17])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_hex64(bad)

    def test_format(self):
        assert format_hex64(0x38) == "0000000000000038"
