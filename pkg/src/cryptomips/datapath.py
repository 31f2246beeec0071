"""Configuration, faults and the crypto-aware fetch/memory paths.

Both the pipeline and the reference interpreter route every instruction
fetch and every data access through the functions here, so the two can only
disagree on timing, never on what a fetch or a load returns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .memory import MASK32, Memory, MemoryFault
from .tdes import KeySet, tdes_decrypt, tdes_encrypt

VARIANTS = ("plain", "encrypted", "decrypted")
PAPER_LATENCY = 21


class SimulationError(Exception):
    def __init__(self, msg: str, pc: Optional[int] = None, cycle: Optional[int] = None):
        where = []
        if pc is not None:
            where.append(f"pc=0x{pc:04x}")
        if cycle is not None:
            where.append(f"cycle={cycle}")
        super().__init__(f"{msg} ({', '.join(where)})" if where else msg)
        self.pc = pc
        self.cycle = cycle


class ArchitecturalFault(SimulationError):
    """The program did something the machine cannot execute."""


class IllegalInstruction(ArchitecturalFault):
    pass


class KeyHazard(ArchitecturalFault):
    """CRYPT reached decode while a key-register write was still in flight."""


class KeyLocked(ArchitecturalFault):
    """A key-register write retired after crypto was enabled."""


class DelaySlotFault(ArchitecturalFault):
    """A control-transfer instruction sits in the delay slot of a taken jump."""


class CycleBudgetExceeded(SimulationError):
    pass


@dataclass
class PipelineConfig:
    variant: str = "plain"
    forwarding: bool = True
    auto_stall_keys: bool = True
    jump_policy: str = "flush"
    crypto_latency: int = 0
    max_cycles: int = 200_000

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.crypto_latency < 0:
            raise ValueError("crypto_latency must be >= 0")
        self.delay_slots  # validates jump_policy

    @property
    def delay_slots(self) -> int:
        """0 for the flush policy, n for ``delayed:n``."""
        if self.jump_policy == "flush":
            return 0
        kind, _, n = self.jump_policy.partition(":")
        if kind != "delayed" or n not in ("1", "2"):
            raise ValueError(f"jump_policy must be 'flush', 'delayed:1' or 'delayed:2', got {self.jump_policy!r}")
        return int(n)


def fetch_transformed(config: PipelineConfig, crypt_flag: bool) -> bool:
    """True when the executed fetch path goes through the decryption core."""
    return crypt_flag and config.variant == "encrypted"


def fetch_block(imem: Memory, addr: int, keys: KeySet, config: PipelineConfig, crypt_flag: bool) -> int:
    raw = imem.read_block(addr)
    if fetch_transformed(config, crypt_flag):
        return tdes_decrypt(raw, keys)
    return raw


def fetch_tap(raw: int, keys: KeySet, config: PipelineConfig, crypt_flag: bool) -> Optional[int]:
    """Output of the fetch-side encryption core of the decrypted variant.

    That variant executes the raw instruction path; the core output is only
    observable, never executed.
    """
    if crypt_flag and config.variant == "decrypted":
        return tdes_encrypt(raw, keys)
    return None


def _cores(config: PipelineConfig):
    # (store core, load core) of the memory stage
    if config.variant == "encrypted":
        return tdes_encrypt, tdes_decrypt
    return tdes_decrypt, tdes_encrypt


def load_uses_crypto(dmem: Memory, addr: int, config: PipelineConfig, crypt_flag: bool) -> bool:
    dmem.read_block(addr)  # fault check before deciding
    return crypt_flag and config.variant != "plain" and addr in dmem.sealed


def store_uses_crypto(dmem: Memory, addr: int, config: PipelineConfig, crypt_flag: bool) -> bool:
    dmem.read_block(addr)
    return crypt_flag and config.variant != "plain"


def mem_load(dmem: Memory, addr: int, keys: KeySet, config: PipelineConfig, crypt_flag: bool) -> int:
    """32-bit load from the low half of the slot at ``addr``."""
    block = dmem.read_block(addr)
    if load_uses_crypto(dmem, addr, config, crypt_flag):
        block = _cores(config)[1](block, keys)
    return block & MASK32


def mem_store(dmem: Memory, addr: int, value: int, keys: KeySet, config: PipelineConfig, crypt_flag: bool) -> None:
    block = value & MASK32
    if store_uses_crypto(dmem, addr, config, crypt_flag):
        dmem.write_block(addr, _cores(config)[0](block, keys), sealed=True)
    else:
        dmem.write_block(addr, block)


def plain_view(dmem: Memory, keys: KeySet, config: PipelineConfig) -> Memory:
    """Copy of ``dmem`` with every sealed slot run back through the load core."""
    view = dmem.copy()
    if config.variant == "plain":
        return view
    load_core = _cores(config)[1]
    for addr in sorted(dmem.sealed):
        view.write_block(addr, load_core(dmem.read_block(addr), keys))
    return view


def fault_from(exc: MemoryFault, pc: Optional[int], cycle: Optional[int] = None) -> ArchitecturalFault:
    return ArchitecturalFault(str(exc), pc=pc, cycle=cycle)


def split_block(block: int) -> Tuple[int, int]:
    return (block >> 32) & MASK32, block & MASK32
