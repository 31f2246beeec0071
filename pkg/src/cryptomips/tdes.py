"""DES and three-key Triple-DES (EDE) over 64-bit integers.

Blocks and keys are plain Python ints, bit 63 being DES bit 1.  Parity
bits of the keys are dropped by PC-1 and never checked.

The permutations are applied through per-byte lookup tables built once at
import time, and the S-boxes are pre-combined with the P permutation, so a
round is a handful of table lookups.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Tuple

MASK64 = (1 << 64) - 1
MASK32 = 0xFFFFFFFF

# FIPS 46-3 tables, 1-based bit numbers counted from the MSB.
IP = (
    58, 50, 42, 34, 26, 18, 10, 2,
    60, 52, 44, 36, 28, 20, 12, 4,
    62, 54, 46, 38, 30, 22, 14, 6,
    64, 56, 48, 40, 32, 24, 16, 8,
    57, 49, 41, 33, 25, 17, 9, 1,
    59, 51, 43, 35, 27, 19, 11, 3,
    61, 53, 45, 37, 29, 21, 13, 5,
    63, 55, 47, 39, 31, 23, 15, 7,
)

FP = (
    40, 8, 48, 16, 56, 24, 64, 32,
    39, 7, 47, 15, 55, 23, 63, 31,
    38, 6, 46, 14, 54, 22, 62, 30,
    37, 5, 45, 13, 53, 21, 61, 29,
    36, 4, 44, 12, 52, 20, 60, 28,
    35, 3, 43, 11, 51, 19, 59, 27,
    34, 2, 42, 10, 50, 18, 58, 26,
    33, 1, 41, 9, 49, 17, 57, 25,
)

E = (
    32, 1, 2, 3, 4, 5,
    4, 5, 6, 7, 8, 9,
    8, 9, 10, 11, 12, 13,
    12, 13, 14, 15, 16, 17,
    16, 17, 18, 19, 20, 21,
    20, 21, 22, 23, 24, 25,
    24, 25, 26, 27, 28, 29,
    28, 29, 30, 31, 32, 1,
)

P = (
    16, 7, 20, 21, 29, 12, 28, 17,
    1, 15, 23, 26, 5, 18, 31, 10,
    2, 8, 24, 14, 32, 27, 3, 9,
    19, 13, 30, 6, 22, 11, 4, 25,
)

PC1 = (
    57, 49, 41, 33, 25, 17, 9,
    1, 58, 50, 42, 34, 26, 18,
    10, 2, 59, 51, 43, 35, 27,
    19, 11, 3, 60, 52, 44, 36,
    63, 55, 47, 39, 31, 23, 15,
    7, 62, 54, 46, 38, 30, 22,
    14, 6, 61, 53, 45, 37, 29,
    21, 13, 5, 28, 20, 12, 4,
)

PC2 = (
    14, 17, 11, 24, 1, 5,
    3, 28, 15, 6, 21, 10,
    23, 19, 12, 4, 26, 8,
    16, 7, 27, 20, 13, 2,
    41, 52, 31, 37, 47, 55,
    30, 40, 51, 45, 33, 48,
    44, 49, 39, 56, 34, 53,
    46, 42, 50, 36, 29, 32,
)

SHIFTS = (1, 1, 2, 2, 2, 2, 2, 2, 1, 2, 2, 2, 2, 2, 2, 1)

SBOXES = (
    (14, 4, 13, 1, 2, 15, 11, 8, 3, 10, 6, 12, 5, 9, 0, 7,
     0, 15, 7, 4, 14, 2, 13, 1, 10, 6, 12, 11, 9, 5, 3, 8,
     4, 1, 14, 8, 13, 6, 2, 11, 15, 12, 9, 7, 3, 10, 5, 0,
     15, 12, 8, 2, 4, 9, 1, 7, 5, 11, 3, 14, 10, 0, 6, 13),
    (15, 1, 8, 14, 6, 11, 3, 4, 9, 7, 2, 13, 12, 0, 5, 10,
     3, 13, 4, 7, 15, 2, 8, 14, 12, 0, 1, 10, 6, 9, 11, 5,
     0, 14, 7, 11, 10, 4, 13, 1, 5, 8, 12, 6, 9, 3, 2, 15,
     13, 8, 10, 1, 3, 15, 4, 2, 11, 6, 7, 12, 0, 5, 14, 9),
    (10, 0, 9, 14, 6, 3, 15, 5, 1, 13, 12, 7, 11, 4, 2, 8,
     13, 7, 0, 9, 3, 4, 6, 10, 2, 8, 5, 14, 12, 11, 15, 1,
     13, 6, 4, 9, 8, 15, 3, 0, 11, 1, 2, 12, 5, 10, 14, 7,
     1, 10, 13, 0, 6, 9, 8, 7, 4, 15, 14, 3, 11, 5, 2, 12),
    (7, 13, 14, 3, 0, 6, 9, 10, 1, 2, 8, 5, 11, 12, 4, 15,
     13, 8, 11, 5, 6, 15, 0, 3, 4, 7, 2, 12, 1, 10, 14, 9,
     10, 6, 9, 0, 12, 11, 7, 13, 15, 1, 3, 14, 5, 2, 8, 4,
     3, 15, 0, 6, 10, 1, 13, 8, 9, 4, 5, 11, 12, 7, 2, 14),
    (2, 12, 4, 1, 7, 10, 11, 6, 8, 5, 3, 15, 13, 0, 14, 9,
     14, 11, 2, 12, 4, 7, 13, 1, 5, 0, 15, 10, 3, 9, 8, 6,
     4, 2, 1, 11, 10, 13, 7, 8, 15, 9, 12, 5, 6, 3, 0, 14,
     11, 8, 12, 7, 1, 14, 2, 13, 6, 15, 0, 9, 10, 4, 5, 3),
    (12, 1, 10, 15, 9, 2, 6, 8, 0, 13, 3, 4, 14, 7, 5, 11,
     10, 15, 4, 2, 7, 12, 9, 5, 6, 1, 13, 14, 0, 11, 3, 8,
     9, 14, 15, 5, 2, 8, 12, 3, 7, 0, 4, 10, 1, 13, 11, 6,
     4, 3, 2, 12, 9, 5, 15, 10, 11, 14, 1, 7, 6, 0, 8, 13),
    (4, 11, 2, 14, 15, 0, 8, 13, 3, 12, 9, 7, 5, 10, 6, 1,
     13, 0, 11, 7, 4, 9, 1, 10, 14, 3, 5, 12, 2, 15, 8, 6,
     1, 4, 11, 13, 12, 3, 7, 14, 10, 15, 6, 8, 0, 5, 9, 2,
     6, 11, 13, 8, 1, 4, 10, 7, 9, 5, 0, 15, 14, 2, 3, 12),
    (13, 2, 8, 4, 6, 15, 11, 1, 10, 9, 3, 14, 5, 0, 12, 7,
     1, 15, 13, 8, 10, 3, 7, 4, 12, 5, 6, 11, 0, 14, 9, 2,
     7, 11, 4, 1, 9, 12, 14, 2, 0, 6, 10, 13, 15, 3, 5, 8,
     2, 1, 14, 7, 4, 10, 8, 13, 15, 12, 9, 0, 3, 5, 6, 11),
)


def permute(value: int, table: Sequence[int], in_width: int) -> int:
    """Reference (bit-by-bit) permutation; output bit i takes input bit table[i]."""
    out = 0
    for src in table:
        out = (out << 1) | ((value >> (in_width - src)) & 1)
    return out


def _byte_tables(table: Sequence[int], in_width: int) -> Tuple[Tuple[int, ...], ...]:
    # One 256-entry table per input byte; OR-ing the lookups applies `table`.
    nbytes = in_width // 8
    tables = []
    for pos in range(nbytes):
        shift = in_width - 8 * (pos + 1)
        tables.append(tuple(permute(b << shift, table, in_width) for b in range(256)))
    return tuple(tables)


def _apply(tables: Tuple[Tuple[int, ...], ...], value: int, in_width: int) -> int:
    out = 0
    shift = in_width - 8
    for t in tables:
        out |= t[(value >> shift) & 0xFF]
        shift -= 8
    return out


_IP_T = _byte_tables(IP, 64)
_FP_T = _byte_tables(FP, 64)
_E_T = _byte_tables(E, 32)
_PC1_T = _byte_tables(PC1, 64)
_PC2_T = _byte_tables(PC2, 56)


def _sbox_lookup(box: int, six: int) -> int:
    row = ((six >> 4) & 2) | (six & 1)
    col = (six >> 1) & 0xF
    return SBOXES[box][row * 16 + col]


# S-box output already routed through P, indexed by the raw 6-bit chunk.
_SP_T = tuple(
    tuple(permute(_sbox_lookup(box, six) << (28 - 4 * box), P, 32) for six in range(64))
    for box in range(8)
)


def _feistel(right: int, subkey: int) -> int:
    e0, e1, e2, e3 = _E_T
    x = (e0[right >> 24] | e1[(right >> 16) & 0xFF] | e2[(right >> 8) & 0xFF] | e3[right & 0xFF]) ^ subkey
    return (
        _SP_T[0][(x >> 42) & 0x3F] | _SP_T[1][(x >> 36) & 0x3F]
        | _SP_T[2][(x >> 30) & 0x3F] | _SP_T[3][(x >> 24) & 0x3F]
        | _SP_T[4][(x >> 18) & 0x3F] | _SP_T[5][(x >> 12) & 0x3F]
        | _SP_T[6][(x >> 6) & 0x3F] | _SP_T[7][x & 0x3F]
    )


def _rotl28(v: int, n: int) -> int:
    return ((v << n) | (v >> (28 - n))) & 0x0FFFFFFF


@lru_cache(maxsize=256)
def _schedule(effective_key: int) -> Tuple[int, ...]:
    cd = _apply(_PC1_T, effective_key, 64)
    c, d = cd >> 28, cd & 0x0FFFFFFF
    subkeys = []
    for n in SHIFTS:
        c, d = _rotl28(c, n), _rotl28(d, n)
        subkeys.append(_apply(_PC2_T, (c << 28) | d, 56))
    return tuple(subkeys)


PARITY_MASK = 0x0101010101010101


def key_schedule(key: int) -> Tuple[int, ...]:
    """Return the 16 48-bit round subkeys of ``key`` (parity bits ignored).

    Schedules are memoized by effective key value, so rewriting a key
    register naturally selects a different cache entry.
    """
    return _schedule(key & MASK64 & ~PARITY_MASK)


def _crypt(block: int, subkeys: Sequence[int]) -> int:
    x = _apply(_IP_T, block & MASK64, 64)
    left, right = x >> 32, x & MASK32
    for k in subkeys:
        left, right = right, left ^ _feistel(right, k)
    return _apply(_FP_T, (right << 32) | left, 64)


def des_encrypt(block: int, key: int) -> int:
    return _crypt(block, key_schedule(key))


def des_decrypt(block: int, key: int) -> int:
    return _crypt(block, key_schedule(key)[::-1])


@dataclass
class KeySet:
    """The three T-DES key registers plus the LKLW/LKUW fill pointer.

    ``fill_ptr`` names the key slot the next lower/upper word pair lands in;
    it advances only when an upper word is written.
    """

    k1: int = 0
    k2: int = 0
    k3: int = 0
    fill_ptr: int = 0

    @property
    def keys(self) -> Tuple[int, int, int]:
        return (self.k1, self.k2, self.k3)

    def write_half(self, upper: bool, data: int) -> None:
        name = ("k1", "k2", "k3")[self.fill_ptr]
        old = getattr(self, name)
        data &= MASK32
        if upper:
            setattr(self, name, (data << 32) | (old & MASK32))
            self.fill_ptr = (self.fill_ptr + 1) % 3
        else:
            setattr(self, name, (old & ~MASK32 & MASK64) | data)

    def copy(self) -> "KeySet":
        return KeySet(self.k1, self.k2, self.k3, self.fill_ptr)

    def fingerprint(self) -> str:
        """Short non-secret tag used to spot key mismatches between tools."""
        raw = b"".join(k.to_bytes(8, "big") for k in self.keys)
        return hashlib.sha256(raw).hexdigest()[:16]


def _key_tuple(keys) -> Tuple[int, int, int]:
    if isinstance(keys, KeySet):
        return keys.keys
    k1, k2, k3 = keys
    return (k1, k2, k3)


@lru_cache(maxsize=4096)
def _ede_encrypt(block: int, k1: int, k2: int, k3: int) -> int:
    return des_encrypt(des_decrypt(des_encrypt(block, k1), k2), k3)


@lru_cache(maxsize=4096)
def _ede_decrypt(block: int, k1: int, k2: int, k3: int) -> int:
    return des_decrypt(des_encrypt(des_decrypt(block, k3), k2), k1)


def tdes_encrypt(block: int, keys) -> int:
    """EDE encryption: E(k3) . D(k2) . E(k1).  ``keys`` is a KeySet or a 3-tuple."""
    return _ede_encrypt(block & MASK64, *_key_tuple(keys))


def tdes_decrypt(block: int, keys) -> int:
    return _ede_decrypt(block & MASK64, *_key_tuple(keys))


def parse_hex64(text: str) -> int:
    """Parse a key/block given as up to 16 hex digits (``0x`` prefix optional)."""
    s = text.strip().lower()
    if s.startswith("0x"):
        s = s[2:]
    s = s.replace("_", "")
    if not s or len(s) > 16:
        raise ValueError(f"not a 64-bit hex value: {text!r}")
    return int(s, 16)


def format_hex64(value: int) -> str:
    return f"{value & MASK64:016x}"
