"""Offline ECB encryption of the post-marker region of instruction images."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

from . import isa
from .assembler import ProgramImage
from .memory import Memory, format_image, iter_slots, parse_image
from .tdes import KeySet, parse_hex64, tdes_decrypt, tdes_encrypt

log = logging.getLogger(__name__)


class ImageToolError(Exception):
    pass


@dataclass
class EncryptedImage:
    blocks: List[int] = field(default_factory=list)
    crypt_marker: int = 0
    key_fingerprint: Optional[str] = None

    def to_text(self) -> str:
        return format_image({8 * i: b for i, b in enumerate(self.blocks)},
                            self.crypt_marker, self.key_fingerprint)

    def to_memory(self, size: int = 1024) -> Memory:
        mem = Memory(size, "instruction")
        mem.load_blocks({8 * i: b for i, b in enumerate(self.blocks)})
        return mem

    @classmethod
    def from_text(cls, text: str) -> "EncryptedImage":
        img = parse_image(text)
        if img.crypt_marker is None:
            raise ImageToolError("image carries no '# @crypt <byte>' marker")
        prog = ProgramImage.from_image_file(img)
        return cls(prog.blocks, img.crypt_marker, img.key_fingerprint)


def _require_marker(marker: Optional[int], top: int) -> int:
    if marker is None:
        raise ImageToolError("program never enables crypto (no 'crypt 1'), so there is nothing to encrypt")
    if marker % 8 or not 0 <= marker <= top:
        raise ImageToolError(f"crypt marker {marker} is not a block boundary inside the image")
    return marker


def encrypt_image(image: ProgramImage, keys: KeySet) -> EncryptedImage:
    marker = _require_marker(image.crypt_marker, image.top)
    first = marker // 8
    blocks = image.blocks[:first] + [tdes_encrypt(b, keys) for b in image.blocks[first:]]
    return EncryptedImage(blocks, marker, keys.fingerprint())


def decrypt_image(image: EncryptedImage, keys: KeySet) -> ProgramImage:
    marker = _require_marker(image.crypt_marker, 8 * len(image.blocks))
    if image.key_fingerprint and image.key_fingerprint != keys.fingerprint():
        log.warning("key fingerprint %s does not match the image's %s; body will decode to garbage",
                    keys.fingerprint(), image.key_fingerprint)
    first = marker // 8
    blocks = image.blocks[:first] + [tdes_decrypt(b, keys) for b in image.blocks[first:]]
    return ProgramImage(blocks=blocks, crypt_marker=marker)


def illegal_ratio(image: ProgramImage, start: int = 0) -> float:
    """Fraction of instruction slots at or after byte ``start`` that decode as Illegal."""
    slots = [w for addr, w in iter_slots(image.blocks) if addr >= start]
    if not slots:
        return 0.0
    bad = sum(isinstance(isa.decode(w), isa.Illegal) for w in slots)
    return bad / len(slots)


def read_keyfile(path: Union[str, Path]) -> KeySet:
    """Three 16-hex-digit lines: k1, k2, k3.  ``#`` comments allowed."""
    values = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            values.append(parse_hex64(line))
    if len(values) != 3:
        raise ImageToolError(f"{path}: expected 3 keys, found {len(values)}")
    return KeySet(*values)


def paper_keys() -> KeySet:
    """Key1 = Key2 = 0, Key3 = "KIRATPAL"."""
    return KeySet(0, 0, 0x4B4952415450414C)
