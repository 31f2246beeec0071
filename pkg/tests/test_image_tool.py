import logging
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryptomips.assembler import ProgramImage, assemble
from cryptomips.image_tool import (
    EncryptedImage,
    ImageToolError,
    decrypt_image,
    encrypt_image,
    illegal_ratio,
    paper_keys,
    read_keyfile,
)
from cryptomips.tdes import KeySet, des_encrypt, tdes_encrypt

u64 = st.integers(0, 2**64 - 1)


class TestEncrypt:
    def test_all_nop_body(self):
        image = assemble("nop\ncrypt 1\n" + "nop\n" * 6)
        enc = encrypt_image(image, paper_keys())
        body = enc.blocks[1:]
        assert len(body) == 3
        assert body == [des_encrypt(0, 0x4B4952415450414C)] * 3

    def test_preamble_untouched(self):
        image = assemble("addi $r1, $r0, 104\nlklw 0($r1)\nnop\ncrypt 1\naddi $r2, $r0, 1\n")
        enc = encrypt_image(image, KeySet(1, 2, 3))
        assert enc.blocks[:2] == image.blocks[:2]
        assert enc.blocks[2] == tdes_encrypt(image.blocks[2], (1, 2, 3))
        assert enc.crypt_marker == 16

    def test_missing_marker(self):
        with pytest.raises(ImageToolError, match="crypt 1"):
            encrypt_image(assemble("nop\n"), KeySet())

    def test_empty_body_is_identity(self):
        image = assemble("nop\ncrypt 1\n")
        enc = encrypt_image(image, KeySet(1, 2, 3))
        assert enc.blocks == image.blocks
        assert decrypt_image(enc, KeySet(1, 2, 3)).blocks == image.blocks

    def test_identical_blocks_encrypt_identically(self):
        image = assemble("nop\ncrypt 1\n" + "addi $r1, $r0, 1\n" * 4)
        enc = encrypt_image(image, KeySet(5, 6, 7))
        assert enc.blocks[1] == enc.blocks[2]


class TestRoundtrip:
    @settings(max_examples=50, deadline=None)
    @given(pre=st.lists(u64, max_size=4), body=st.lists(u64, max_size=8),
           keys=st.tuples(u64, u64, u64))
    def test_decrypt_of_encrypt(self, pre, body, keys):
        ks = KeySet(*keys)
        image = ProgramImage(blocks=pre + body, crypt_marker=8 * len(pre))
        assert decrypt_image(encrypt_image(image, ks), ks).blocks == image.blocks

    @settings(max_examples=50, deadline=None)
    @given(pre=st.lists(u64, max_size=4), body=st.lists(u64, max_size=8),
           keys=st.tuples(u64, u64, u64))
    def test_encrypt_of_decrypt(self, pre, body, keys):
        ks = KeySet(*keys)
        enc = EncryptedImage(pre + body, 8 * len(pre))
        again = encrypt_image(decrypt_image(enc, ks), ks)
        assert again.blocks == enc.blocks

    def test_text_roundtrip(self):
        image = assemble("nop\ncrypt 1\naddi $r1, $r0, 1\n")
        enc = encrypt_image(image, paper_keys())
        back = EncryptedImage.from_text(enc.to_text())
        assert back == enc

    def test_from_text_requires_marker(self):
        with pytest.raises(ImageToolError, match="marker"):
            EncryptedImage.from_text("0000000000000000\n")


class TestWrongKeys:
    def test_fingerprint_mismatch_warns(self, caplog):
        image = assemble("nop\ncrypt 1\naddi $r1, $r0, 1\n")
        enc = encrypt_image(image, KeySet(1, 2, 3))
        with caplog.at_level(logging.WARNING):
            decrypt_image(enc, KeySet(4, 5, 6))
        assert "fingerprint" in caplog.text

    def test_mostly_illegal(self):
        body = "".join(f"addi $r{i % 31 + 1}, $r1, {i}\nsw $r1, {8 * i}($r0)\n" for i in range(32))
        image = assemble("nop\ncrypt 1\n" + body)
        good = KeySet(1, 2, 3)
        enc = encrypt_image(image, good)
        rng = random.Random(99)
        ratios = []
        for _ in range(50):
            wrong = KeySet(*(rng.getrandbits(64) for _ in range(3)))
            ratios.append(illegal_ratio(decrypt_image(enc, wrong), enc.crypt_marker))
        assert sum(ratios) / len(ratios) > 0.5
        assert min(ratios) > 0.5
        assert illegal_ratio(decrypt_image(enc, good), enc.crypt_marker) == 0.0


class TestKeyFile:
    def test_three_lines_with_comments(self, tmp_path):
        path = tmp_path / "keys.txt"
        path.write_text("# reference keys\n0000000000000000\n0000000000000000\n4b4952415450414c\n")
        assert read_keyfile(path).keys == (0, 0, 0x4B4952415450414C)

    def test_wrong_count(self, tmp_path):
        path = tmp_path / "keys.txt"
        path.write_text("0000000000000000\n")
        with pytest.raises(ImageToolError, match="expected 3"):
            read_keyfile(path)
