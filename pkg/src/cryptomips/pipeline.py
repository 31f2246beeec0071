"""Cycle-accurate five-stage pipeline with crypto cores in IF and MEM.

Timing model
------------
* IF fetches a 64-bit block into a two-slot issue buffer and issues one
  instruction per cycle; the buffered slot issues without another fetch.
* ID reads registers (written earlier in the same cycle by WB), detects
  hazards and acts on CRYPT.
* EX runs the ALU and resolves branches and jumps.
* MEM accesses data memory, through the crypto cores when enabled.
* WB writes a GPR or a key-register half.

Each ``step`` evaluates WB, MEM, EX, ID, IF in that order from the latches
of the previous cycle.  Every cycle in which WB does not retire an
instruction is charged to the bubble it received, which gives the identity

    cycles = retired + stalls + flushes + fetch/mem crypto waits + 4

where 4 is the initial fill.  Bubbles still in flight behind the last
instruction are never charged: the machine halts the cycle that instruction
retires.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

from . import isa
from .datapath import (
    CycleBudgetExceeded,
    DelaySlotFault,
    IllegalInstruction,
    KeyHazard,
    KeyLocked,
    PipelineConfig,
    SimulationError,
    fault_from,
    fetch_block,
    fetch_tap,
    fetch_transformed,
    load_uses_crypto,
    mem_load,
    mem_store,
    store_uses_crypto,
)
from .isa import Decoded, Illegal, Instruction
from .memory import MASK32, Memory, MemoryFault
from .tdes import KeySet

FILL_DEPTH = 4


@dataclass
class Slot:
    """An instruction in flight."""

    pc: int
    word: int
    ins: Decoded
    a: int = 0
    b: int = 0
    result: int = 0
    delay: bool = False
    crypt: bool = False  # crypt flag in effect when this instruction was decoded
    mem_wait: Optional[int] = None

    def label(self) -> str:
        return f"{self.pc:04x}:{isa.disassemble(self.word)}"


@dataclass(frozen=True)
class Bubble:
    """An empty latch.  ``cause`` is what WB charges the cycle to."""

    cause: str

    def label(self) -> str:
        return "--"


Latch = Union[Slot, Bubble]

FILL = Bubble("fill")
IDLE = Bubble("idle")
STALL = Bubble("stall")
FLUSH = Bubble("flush")
FETCH_WAIT = Bubble("fetch_crypto")
MEM_WAIT = Bubble("mem_crypto")


@dataclass
class RunStats:
    cycles: int = 0
    instructions_retired: int = 0
    stall_cycles: int = 0
    flush_bubbles: int = 0
    fetch_crypto_stalls: int = 0
    mem_crypto_stalls: int = 0
    fill_cycles: int = 0

    @property
    def cpi(self) -> float:
        return self.cycles / self.instructions_retired if self.instructions_retired else 0.0

    def identity_holds(self) -> bool:
        return self.cycles == (self.instructions_retired + self.stall_cycles + self.flush_bubbles
                               + self.fetch_crypto_stalls + self.mem_crypto_stalls + FILL_DEPTH)

    def as_dict(self) -> Dict[str, float]:
        return {
            "cycles": self.cycles,
            "retired": self.instructions_retired,
            "stalls": self.stall_cycles,
            "flushes": self.flush_bubbles,
            "fetch_crypto_stalls": self.fetch_crypto_stalls,
            "mem_crypto_stalls": self.mem_crypto_stalls,
            "cpi": round(self.cpi, 6),
        }


_CHARGE = {
    "stall": "stall_cycles",
    "flush": "flush_bubbles",
    "fetch_crypto": "fetch_crypto_stalls",
    "mem_crypto": "mem_crypto_stalls",
    "fill": "fill_cycles",
}


class Pipeline:
    """The machine state plus the clock.

    ``trace`` receives one formatted line per cycle when given.
    """

    def __init__(self, imem: Memory, dmem: Memory, config: Optional[PipelineConfig] = None,
                 trace: Optional[Callable[[str], None]] = None):
        self.imem = imem
        self.dmem = dmem
        self.config = config or PipelineConfig()
        self.trace = trace
        self.reset()

    def reset(self) -> None:
        self.pc = 0
        self.gpr = [0] * 32
        self.keys = KeySet()
        self.crypt_flag = False
        self.if_id: Latch = FILL
        self.id_ex: Latch = FILL
        self.ex_mem: Latch = FILL
        self.mem_wb: Latch = FILL
        self.buffer: Optional[Tuple[int, int]] = None  # (block address, block)
        self.fetch_wait: Optional[Tuple[int, int]] = None  # (block address, cycles left)
        self.pending_target: Optional[int] = None
        self.delay_remaining = 0
        self.halted = False
        self.stats = RunStats()
        self.keys_at_crypt: Optional[KeySet] = None
        self.last_fetch_tap: Optional[int] = None

    # -- helpers ---------------------------------------------------------

    @property
    def cycle(self) -> int:
        return self.stats.cycles

    def _fault(self, exc: MemoryFault, pc: int) -> SimulationError:
        return fault_from(exc, pc, self.cycle)

    def _fetch_exhausted(self) -> bool:
        return self.pending_target is None and self.pc >= self.imem.top

    def _latches(self) -> Tuple[Latch, Latch, Latch, Latch]:
        return (self.if_id, self.id_ex, self.ex_mem, self.mem_wb)

    # -- stages ----------------------------------------------------------

    def _writeback(self, item: Latch) -> None:
        if isinstance(item, Bubble):
            attr = _CHARGE.get(item.cause)
            if attr is None:
                raise AssertionError(f"uncharged {item.cause} bubble reached WB at cycle {self.cycle}")
            setattr(self.stats, attr, getattr(self.stats, attr) + 1)
            return
        ins = item.ins
        m = ins.mnemonic
        if m in isa.KEY_LOADS:
            if item.crypt:
                raise KeyLocked(f"{m} after crypto was enabled", pc=item.pc, cycle=self.cycle)
            self.keys.write_half(m == "lkuw", item.result)
        else:
            dest = ins.dest()
            if dest:
                self.gpr[dest] = item.result
        self.stats.instructions_retired += 1

    def _memory(self, item: Latch) -> Tuple[Latch, bool]:
        """Returns (item for MEM/WB, freeze younger stages)."""
        if isinstance(item, Bubble) or item.ins.mnemonic not in isa.MEMORY_OPS:
            return item, False
        m = item.ins.mnemonic
        addr = item.result
        try:
            if item.mem_wait is None:
                if m == "sw":
                    crypto = store_uses_crypto(self.dmem, addr, self.config, item.crypt)
                else:
                    crypto = load_uses_crypto(self.dmem, addr, self.config, item.crypt)
                item.mem_wait = self.config.crypto_latency if crypto else 0
            if item.mem_wait > 0:
                item.mem_wait -= 1
                return MEM_WAIT, True
            if m == "sw":
                mem_store(self.dmem, addr, item.b, self.keys, self.config, item.crypt)
            else:
                item.result = mem_load(self.dmem, addr, self.keys, self.config, item.crypt)
        except MemoryFault as exc:
            raise self._fault(exc, item.pc) from None
        return item, False

    def _operand(self, reg: int, latched: int, mem_stage: Latch) -> int:
        if not reg:
            return 0
        if not self.config.forwarding:
            return latched
        # EX/MEM path first; the MEM/WB path is the register file itself,
        # since WB has already written it this cycle.
        if isinstance(mem_stage, Slot) and mem_stage.ins.dest() == reg:
            if mem_stage.ins.mnemonic == "lw":
                raise AssertionError(f"load-use hazard escaped detection at cycle {self.cycle}")
            return mem_stage.result
        return self.gpr[reg]

    def _execute(self, item: Latch, mem_stage: Latch) -> Optional[int]:
        """Run EX on ``item``; returns the redirect target of a taken branch."""
        if isinstance(item, Bubble):
            return None
        ins = item.ins
        srcs = ins.sources()
        a = self._operand(ins.rs, item.a, mem_stage) if ins.rs in srcs else 0
        b = self._operand(ins.rt, item.b, mem_stage) if ins.rt in srcs else 0
        m = ins.mnemonic
        if m in isa.BRANCHES or m == "j":
            if isa.branch_taken(ins, a, b):
                return isa.control_target(ins, item.pc)
        elif m in isa.MEMORY_OPS:
            item.result = (a + ins.imm) & MASK32
            item.b = b
        elif m != "crypt":
            item.result = isa.alu(ins, a, b)
        return None

    def _hazard(self, ins: Instruction) -> Optional[str]:
        ex, mem = self.id_ex, self.ex_mem
        if ins.mnemonic == "crypt":
            if any(isinstance(s, Slot) and s.ins.mnemonic in isa.KEY_LOADS for s in (ex, mem)):
                return "keys"
            return None
        srcs = ins.sources()
        if not srcs:
            return None
        if self.config.forwarding:
            if isinstance(ex, Slot) and ex.ins.mnemonic == "lw" and ex.ins.dest() in srcs:
                return "load-use"
            return None
        for s in (ex, mem):
            if isinstance(s, Slot) and s.ins.dest() in srcs:
                return "raw"
        return None

    def _redirect(self, target: int) -> None:
        self.pc = target
        self.buffer = None
        self.fetch_wait = None
        self.pending_target = None
        self.delay_remaining = 0

    def _fetch(self) -> Latch:
        if self.pending_target is not None and (self.delay_remaining == 0 or self.pc >= self.imem.top):
            self._redirect(self.pending_target)
        pc = self.pc
        if pc >= self.imem.top:
            return IDLE
        addr = pc & ~7
        if self.buffer is None or self.buffer[0] != addr:
            try:
                if fetch_transformed(self.config, self.crypt_flag) and self.config.crypto_latency:
                    if self.fetch_wait is None or self.fetch_wait[0] != addr:
                        self.imem.read_block(addr)
                        self.fetch_wait = (addr, self.config.crypto_latency)
                    if self.fetch_wait[1] > 0:
                        self.fetch_wait = (addr, self.fetch_wait[1] - 1)
                        return FETCH_WAIT
                self.fetch_wait = None
                block = fetch_block(self.imem, addr, self.keys, self.config, self.crypt_flag)
                self.last_fetch_tap = fetch_tap(block, self.keys, self.config, self.crypt_flag)
            except MemoryFault as exc:
                raise self._fault(exc, pc) from None
            self.buffer = (addr, block)
        block = self.buffer[1]
        word = (block >> 32) & MASK32 if pc & 4 == 0 else block & MASK32
        slot = Slot(pc, word, isa.decode(word))
        if self.pending_target is not None:
            slot.delay = True
            self.delay_remaining -= 1
        self.pc = pc + 4
        return slot

    # -- clock -----------------------------------------------------------

    def step(self) -> None:
        if self.halted:
            raise SimulationError("step() on a halted machine", pc=self.pc, cycle=self.cycle)
        shown = [None, self.if_id, self.id_ex, self.ex_mem, self.mem_wb]
        flags: List[str] = []

        self._writeback(self.mem_wb)

        new_mem_wb, freeze = self._memory(self.ex_mem)
        if freeze:
            flags.append("WAIT(mem-crypto)")
            new_ex_mem, new_id_ex, new_if_id = self.ex_mem, self.id_ex, self.if_id
            fetched: Latch = IDLE
        else:
            new_ex_mem = self.id_ex
            target = self._execute(self.id_ex, self.ex_mem)
            new_id_ex, new_if_id, fetched = self._decode_and_fetch(target, flags)

        self.if_id, self.id_ex, self.ex_mem, self.mem_wb = new_if_id, new_id_ex, new_ex_mem, new_mem_wb
        shown[0] = fetched if isinstance(fetched, Slot) else None
        self.stats.cycles += 1

        if self.gpr[0] != 0:
            raise AssertionError("r0 was written")
        if self.trace is not None:
            self.trace(self._trace_line(shown, flags))
        if (self._fetch_exhausted()
                and not any(isinstance(s, Slot) or s.cause == "fill" for s in self._latches())):
            self.halted = True

    def _decode_and_fetch(self, target: Optional[int], flags: List[str]) -> Tuple[Latch, Latch, Latch]:
        """ID and IF for a non-frozen cycle; returns (id_ex, if_id, fetched)."""
        item = self.if_id
        delay = self.config.delay_slots

        if target is not None:
            if delay == 0:
                squashed = 1 + isinstance(item, Slot)
                flags.append(f"FLUSH(jump):{squashed}")
                self._redirect(target)
                return (FLUSH if isinstance(item, Slot) or item == IDLE else item), FLUSH, FLUSH
            if isinstance(item, Slot):
                item.delay = True
                delay -= 1
            elif item == IDLE:
                item = FLUSH
            self.pending_target, self.delay_remaining = target, delay

        if isinstance(item, Bubble):
            new_id_ex: Latch = item
        else:
            ins = item.ins
            if isinstance(ins, Illegal):
                raise IllegalInstruction(f"illegal instruction word 0x{ins.word:08x}",
                                         pc=item.pc, cycle=self.cycle)
            if item.delay and ins.mnemonic in isa.CONTROL:
                raise DelaySlotFault(f"{ins.mnemonic} in a delay slot", pc=item.pc, cycle=self.cycle)
            reason = self._hazard(ins)
            if reason == "keys" and not self.config.auto_stall_keys:
                raise KeyHazard("crypt issued before all key writes retired; add nops or enable auto_stall_keys",
                                pc=item.pc, cycle=self.cycle)
            if reason is not None:
                flags.append(f"STALL({reason})")
                if self.pending_target is not None and self.delay_remaining == 0:
                    self._redirect(self.pending_target)
                return STALL, item, IDLE
            item.a = self.gpr[ins.rs]
            item.b = self.gpr[ins.rt]
            item.crypt = self.crypt_flag
            new_id_ex = item
            if ins.mnemonic == "crypt" and (ins.target != 0) != self.crypt_flag:
                # The IF stage fetched this cycle under the old flag: squash it
                # and refetch sequentially once the flag has switched.
                flags.append("FLUSH(crypt):1")
                self._redirect(item.pc + 4)
                self.crypt_flag = ins.target != 0
                if self.crypt_flag:
                    self.keys_at_crypt = self.keys.copy()
                return new_id_ex, FLUSH, FLUSH

        if self.pending_target is not None and self.delay_remaining == 0 and target is not None:
            # no delay slot left to fill: this cycle's fetch is wrong-path
            flags.append("FLUSH(jump):1")
            self._redirect(self.pending_target)
            return new_id_ex, FLUSH, FLUSH

        fetched = self._fetch()
        if fetched is FETCH_WAIT:
            flags.append("WAIT(fetch-crypto)")
        return new_id_ex, fetched, fetched

    def _trace_line(self, shown: List[Optional[Latch]], flags: List[str]) -> str:
        names = ("IF", "ID", "EX", "MEM", "WB")
        parts = [f"C{self.cycle - 1}"]
        for name, item in zip(names, shown):
            parts.append(f"{name}:{item.label() if isinstance(item, Slot) else '--'}")
        parts.extend(flags)
        parts.append(f"crypt={int(self.crypt_flag)}")
        return " ".join(parts)

    def run(self) -> RunStats:
        while not self.halted:
            if self.cycle >= self.config.max_cycles:
                raise CycleBudgetExceeded(
                    f"no halt within {self.config.max_cycles} cycles; probable infinite loop "
                    "(an unconditional backward jump never exits)", pc=self.pc, cycle=self.cycle)
            self.step()
        return self.stats


def run_program(imem: Memory, dmem: Memory, config: Optional[PipelineConfig] = None,
                trace: Optional[Callable[[str], None]] = None) -> Pipeline:
    """Run a fresh pipeline on copies of the given memories."""
    machine = Pipeline(imem.copy(), dmem.copy(), config, trace)
    machine.run()
    return machine
