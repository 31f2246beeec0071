"""Byte-addressed memories with 64-bit accesses, and the text image format.

Image files hold one 16-hex-digit block per line.  ``@<decimal>`` lines move
the load address; addresses otherwise advance by 8.  ``#`` starts a comment.
Two header comments are understood: ``# @crypt <byte>`` (encryption-start
marker of an instruction image) and ``# @keys <fingerprint>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Set, Tuple, Union

MASK32 = 0xFFFFFFFF
MASK64 = (1 << 64) - 1
DEFAULT_SIZE = 1024


class MemoryFault(Exception):
    """Unaligned or out-of-range access.  ``addr`` is the offending address."""

    def __init__(self, kind: str, addr: int, msg: str):
        super().__init__(msg)
        self.kind = kind
        self.addr = addr


class ImageFormatError(ValueError):
    pass


class Memory:
    """A zero-initialized byte array accessed in aligned 8-byte blocks.

    ``sealed`` holds the addresses of blocks last written through a
    store-side crypto core; loads of those blocks take the crypto path while
    everything else bypasses it.  ``top`` is one past the highest block ever
    loaded or written, which the fetch unit uses as the end of the program.
    """

    def __init__(self, size: int = DEFAULT_SIZE, kind: str = "data"):
        if size <= 0 or size & (size - 1) or size % 8:
            raise ValueError(f"memory size must be a power of two >= 8, got {size}")
        self.size = size
        self.kind = kind
        self.bytes = bytearray(size)
        self.sealed: Set[int] = set()
        self.top = 0

    def _check(self, addr: int, width: int = 8) -> None:
        if addr % 8:
            raise MemoryFault("unaligned", addr, f"{self.kind} memory: unaligned access at byte {addr}")
        if addr < 0 or addr + width > self.size:
            raise MemoryFault("range", addr, f"{self.kind} memory: address {addr} outside 0..{self.size - 1}")

    def read_block(self, addr: int) -> int:
        self._check(addr)
        return int.from_bytes(self.bytes[addr:addr + 8], "big")

    def write_block(self, addr: int, value: int, sealed: bool = False) -> None:
        self._check(addr)
        self.bytes[addr:addr + 8] = (value & MASK64).to_bytes(8, "big")
        if sealed:
            self.sealed.add(addr)
        else:
            self.sealed.discard(addr)
        self.top = max(self.top, addr + 8)

    # 32-bit words live zero-padded in the low half of their slot.
    def read_word(self, addr: int) -> int:
        return self.read_block(addr) & MASK32

    def write_word(self, addr: int, value: int) -> None:
        self.write_block(addr, value & MASK32)

    def load_blocks(self, blocks: Dict[int, int]) -> None:
        for addr, value in sorted(blocks.items()):
            self.write_block(addr, value)

    def blocks(self, lo: int = 0, hi: Optional[int] = None) -> Dict[int, int]:
        hi = self.size if hi is None else hi
        return {a: self.read_block(a) for a in range(lo - lo % 8, hi, 8)}

    def dump(self, lo: int = 0, hi: Optional[int] = None) -> str:
        """Dense image text for blocks starting in [lo, hi)."""
        hi = self.top if hi is None else hi
        return format_image(self.blocks(lo, hi))

    def copy(self) -> "Memory":
        m = Memory(self.size, self.kind)
        m.bytes[:] = self.bytes
        m.sealed = set(self.sealed)
        m.top = self.top
        return m

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Memory):
            return NotImplemented
        return self.bytes == other.bytes and self.sealed == other.sealed


@dataclass
class ImageFile:
    blocks: Dict[int, int] = field(default_factory=dict)
    crypt_marker: Optional[int] = None
    key_fingerprint: Optional[str] = None


_HEX16 = re.compile(r"[0-9a-fA-F]{16}")


def parse_image(text: str) -> ImageFile:
    img = ImageFile()
    addr = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "@crypt":
                img.crypt_marker = _parse_addr(parts[1], lineno)
            elif len(parts) == 2 and parts[0] == "@keys":
                img.key_fingerprint = parts[1]
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@crypt"):
            img.crypt_marker = _parse_addr(line[len("@crypt"):].strip(), lineno)
            continue
        if line.startswith("@"):
            addr = _parse_addr(line[1:], lineno)
            continue
        if not _HEX16.fullmatch(line):
            raise ImageFormatError(f"line {lineno}: expected 16 hex digits, got {raw.strip()!r}")
        img.blocks[addr] = int(line, 16)
        addr += 8
    return img


def _parse_addr(text: str, lineno: int) -> int:
    try:
        addr = int(text)
    except ValueError:
        raise ImageFormatError(f"line {lineno}: bad address marker {text!r}") from None
    if addr < 0 or addr % 8:
        raise ImageFormatError(f"line {lineno}: address marker {addr} is not 8-byte aligned")
    return addr


def format_image(blocks: Dict[int, int], crypt_marker: Optional[int] = None,
                 key_fingerprint: Optional[str] = None) -> str:
    lines = []
    if crypt_marker is not None:
        lines.append(f"# @crypt {crypt_marker}")
    if key_fingerprint is not None:
        lines.append(f"# @keys {key_fingerprint}")
    expect = 0
    for addr in sorted(blocks):
        if addr != expect:
            lines.append(f"@{addr}")
        lines.append(f"{blocks[addr] & MASK64:016x}")
        expect = addr + 8
    return "".join(line + "\n" for line in lines)


def load_image(source: Union[str, Path, ImageFile], size: int = DEFAULT_SIZE,
               kind: str = "data") -> Memory:
    """Build a Memory from an image file path or a parsed ImageFile."""
    img = source if isinstance(source, ImageFile) else parse_image(Path(source).read_text())
    mem = Memory(size, kind)
    for addr in img.blocks:
        if addr + 8 > size:
            raise ImageFormatError(f"image block at byte {addr} exceeds {size}-byte memory")
    mem.load_blocks(img.blocks)
    return mem


def parse_range(text: str) -> Tuple[int, int]:
    """Parse ``lo..hi`` (inclusive byte range) into a half-open [lo, hi+1)."""
    lo, sep, hi = text.partition("..")
    if not sep:
        raise ValueError(f"expected lo..hi, got {text!r}")
    return int(lo, 0), int(hi, 0) + 1


def iter_slots(blocks: Iterable[int]):
    """Yield (byte address, 32-bit word) for each instruction slot, MS half first."""
    for i, block in enumerate(blocks):
        yield 8 * i, (block >> 32) & MASK32
        yield 8 * i + 4, block & MASK32
