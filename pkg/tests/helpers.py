"""Shared builders for the test-suite."""

import warnings
from typing import Dict, Optional, Tuple

from cryptomips.assembler import assemble
from cryptomips.image_tool import encrypt_image
from cryptomips.memory import Memory
from cryptomips.tdes import KeySet

PAPER_KEYS = KeySet(0, 0, 0x4B4952415450414C)


def build(source: str, data: Optional[Dict[int, int]] = None,
          keys: Optional[KeySet] = None) -> Tuple[Memory, Memory]:
    """Assemble ``source`` into fresh memories; encrypt the body if ``keys`` given."""
    image = assemble(source)
    blocks = encrypt_image(image, keys).blocks if keys is not None else image.blocks
    imem = Memory(kind="instruction")
    imem.load_blocks({8 * i: b for i, b in enumerate(blocks)})
    dmem = Memory()
    dmem.load_blocks(dict(image.data_blocks))
    if data:
        dmem.load_blocks(data)
    return imem, dmem


def key_data(keys: KeySet, base: int = 104) -> Dict[int, int]:
    """Zero-padded key words: lo, hi for each key at an 8-byte stride."""
    out = {}
    for i, k in enumerate(keys.keys):
        out[base + 16 * i] = k & 0xFFFFFFFF
        out[base + 16 * i + 8] = k >> 32
    return out


def key_preamble(base: int = 104) -> str:
    """Six key loads from ``base`` followed by crypt 1."""
    lines = []
    for i in range(3):
        lines.append(f"lklw {base + 16 * i}($r0)")
        lines.append(f"lkuw {base + 16 * i + 8}($r0)")
    lines.append("crypt 1")
    return "\n".join(lines) + "\n"


def reference_des():
    """Independent single-DES encryptor from the ``cryptography`` package."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            from cryptography.hazmat.decrepit.ciphers.algorithms import TripleDES
        except ImportError:  # older releases
            from cryptography.hazmat.primitives.ciphers.algorithms import TripleDES
        from cryptography.hazmat.primitives.ciphers import Cipher, modes

    def _cipher(key: int):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return Cipher(TripleDES(key.to_bytes(8, "big") * 3), modes.ECB())

    def encrypt(block: int, key: int) -> int:
        enc = _cipher(key).encryptor()
        return int.from_bytes(enc.update(block.to_bytes(8, "big")) + enc.finalize(), "big")

    def decrypt(block: int, key: int) -> int:
        dec = _cipher(key).decryptor()
        return int.from_bytes(dec.update(block.to_bytes(8, "big")) + dec.finalize(), "big")

    return encrypt, decrypt
