"""One-instruction-at-a-time reference interpreter (no timing).

Used as the equivalence oracle for the pipeline: same fetch path, same
memory crypto, same key-register protocol, same delay-slot semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from . import isa
from .datapath import (
    CycleBudgetExceeded,
    DelaySlotFault,
    IllegalInstruction,
    KeyLocked,
    PipelineConfig,
    fault_from,
    fetch_block,
    mem_load,
    mem_store,
)
from .isa import Illegal
from .memory import Memory, MemoryFault
from .tdes import KeySet


@dataclass
class ArchState:
    gpr: List[int] = field(default_factory=lambda: [0] * 32)
    keys: KeySet = field(default_factory=KeySet)
    crypt_flag: bool = False
    pc: int = 0
    retired: int = 0
    dmem: Optional[Memory] = None


def interpret(imem: Memory, dmem: Memory, config: Optional[PipelineConfig] = None) -> ArchState:
    """Execute the image in ``imem`` against a copy of ``dmem``."""
    config = config or PipelineConfig()
    st = ArchState(dmem=dmem.copy())
    top = imem.top
    delay = config.delay_slots
    pending: Optional[int] = None  # target of a taken jump awaiting its delay slots
    remaining = 0

    while True:
        if pending is not None and (remaining == 0 or st.pc >= top):
            st.pc, pending = pending, None
        if st.pc >= top:
            return st
        if st.retired >= config.max_cycles:
            raise CycleBudgetExceeded(
                f"no halt after {st.retired} instructions; probable infinite loop "
                "(an unconditional backward jump never exits)", pc=st.pc)
        pc = st.pc
        in_delay_slot = pending is not None
        try:
            block = fetch_block(imem, pc & ~7, st.keys, config, st.crypt_flag)
        except MemoryFault as exc:
            raise fault_from(exc, pc) from None
        word = (block >> 32) if pc & 4 == 0 else block
        ins = isa.decode(word)
        if isinstance(ins, Illegal):
            raise IllegalInstruction(f"illegal instruction word 0x{ins.word:08x}", pc=pc)
        if in_delay_slot and ins.mnemonic in isa.CONTROL:
            raise DelaySlotFault(f"{ins.mnemonic} in a delay slot", pc=pc)

        next_pc = pc + 4
        m = ins.mnemonic
        g = st.gpr
        try:
            if m in isa.BRANCHES or m == "j":
                if isa.branch_taken(ins, g[ins.rs], g[ins.rt]):
                    target = isa.control_target(ins, pc)
                    if delay:
                        pending, remaining = target, delay
                    else:
                        next_pc = target
            elif m == "crypt":
                st.crypt_flag = ins.target != 0
            elif m in isa.MEMORY_OPS:
                addr = (g[ins.rs] + ins.imm) & isa.MASK32
                if m == "sw":
                    mem_store(st.dmem, addr, g[ins.rt], st.keys, config, st.crypt_flag)
                else:
                    value = mem_load(st.dmem, addr, st.keys, config, st.crypt_flag)
                    if m == "lw":
                        if ins.rt:
                            g[ins.rt] = value
                    elif st.crypt_flag:
                        raise KeyLocked(f"{m} after crypto was enabled", pc=pc)
                    else:
                        st.keys.write_half(m == "lkuw", value)
            else:
                dest = ins.dest()
                value = isa.alu(ins, g[ins.rs], g[ins.rt])
                if dest:
                    g[dest] = value
        except MemoryFault as exc:
            raise fault_from(exc, pc) from None

        st.retired += 1
        if in_delay_slot:
            remaining -= 1
        st.pc = next_pc
