"""Instruction words for the MIPS subset plus the key/crypt extensions.

Layouts (MSB first)::

    R:  op[31:26] rs[25:21] rt[20:16] rd[15:11] shamt[10:6] funct[5:0]
    I:  op[31:26] rs[25:21] rt[20:16] immediate[15:0]
    J:  op[31:26] target[25:0]

Fields that a mnemonic does not use must be zero; any other word decodes to
:class:`Illegal`, which keeps encode/decode a bijection on legal words.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

MASK32 = 0xFFFFFFFF

R_FUNCT: Dict[str, int] = {
    "sll": 0x00,
    "add": 0x20,
    "sub": 0x22,
    "and": 0x24,
    "or": 0x25,
    "slt": 0x2A,
}

I_OPCODES: Dict[str, int] = {
    "beq": 0x04,
    "bne": 0x05,
    "addi": 0x08,
    "lw": 0x23,
    "sw": 0x2B,
    "lklw": 0x30,
    "lkuw": 0x31,
}

J_OPCODES: Dict[str, int] = {
    "j": 0x02,
    "crypt": 0x3F,
}

MNEMONICS = tuple(R_FUNCT) + tuple(I_OPCODES) + tuple(J_OPCODES)

_FUNCT_TO_R = {v: k for k, v in R_FUNCT.items()}
_OP_TO_I = {v: k for k, v in I_OPCODES.items()}
_OP_TO_J = {v: k for k, v in J_OPCODES.items()}

BRANCHES = frozenset({"beq", "bne"})
LOADS = frozenset({"lw", "lklw", "lkuw"})
KEY_LOADS = frozenset({"lklw", "lkuw"})
MEMORY_OPS = frozenset({"lw", "sw", "lklw", "lkuw"})
CONTROL = frozenset({"beq", "bne", "j", "crypt"})


class EncodingError(ValueError):
    """A field does not fit its width (an assembler bug if it ever escapes)."""


def sign_extend16(v: int) -> int:
    v &= 0xFFFF
    return v - 0x10000 if v & 0x8000 else v


def to_signed32(v: int) -> int:
    v &= MASK32
    return v - 0x100000000 if v & 0x80000000 else v


def fmt_of(mnemonic: str) -> str:
    if mnemonic in R_FUNCT:
        return "R"
    if mnemonic in I_OPCODES:
        return "I"
    if mnemonic in J_OPCODES:
        return "J"
    raise KeyError(mnemonic)


@dataclass(frozen=True)
class Instruction:
    """A decoded legal instruction.

    ``imm`` is held sign-extended; ``target`` is the raw 26-bit field (for
    ``j`` a word index, for ``crypt`` the enable value).
    """

    mnemonic: str
    rs: int = 0
    rt: int = 0
    rd: int = 0
    shamt: int = 0
    imm: int = 0
    target: int = 0

    @property
    def fmt(self) -> str:
        return fmt_of(self.mnemonic)

    @property
    def op(self) -> int:
        if self.mnemonic in R_FUNCT:
            return 0
        return I_OPCODES.get(self.mnemonic, J_OPCODES.get(self.mnemonic, 0))

    @property
    def funct(self) -> int:
        return R_FUNCT.get(self.mnemonic, 0)

    @property
    def is_nop(self) -> bool:
        return self == NOP

    def dest(self) -> Optional[int]:
        """GPR written at write-back, or None (register 0 counts as none)."""
        if self.fmt == "R":
            r = self.rd
        elif self.mnemonic in ("addi", "lw"):
            r = self.rt
        else:
            return None
        return r or None

    def sources(self) -> Tuple[int, ...]:
        """GPRs read by this instruction (register 0 omitted)."""
        m = self.mnemonic
        if m == "sll":
            regs: Tuple[int, ...] = (self.rt,)
        elif self.fmt == "R" or m in BRANCHES or m == "sw":
            regs = (self.rs, self.rt)
        elif self.fmt == "I":
            regs = (self.rs,)
        else:
            regs = ()
        return tuple(r for r in regs if r)


@dataclass(frozen=True)
class Illegal:
    """A word that decodes to no implemented instruction."""

    word: int
    mnemonic: str = "illegal"


Decoded = Union[Instruction, Illegal]

NOP = Instruction("sll")


def _check(name: str, value: int, bits: int) -> int:
    if not 0 <= value < (1 << bits):
        raise EncodingError(f"{name}={value} does not fit in {bits} bits")
    return value


def encode(instr: Instruction) -> int:
    m = instr.mnemonic
    fmt = fmt_of(m)
    if fmt == "R":
        return (
            _check("rs", instr.rs, 5) << 21
            | _check("rt", instr.rt, 5) << 16
            | _check("rd", instr.rd, 5) << 11
            | _check("shamt", instr.shamt, 5) << 6
            | R_FUNCT[m]
        )
    if fmt == "I":
        if not -0x8000 <= instr.imm <= 0x7FFF:
            raise EncodingError(f"immediate {instr.imm} out of 16-bit signed range")
        return (
            I_OPCODES[m] << 26
            | _check("rs", instr.rs, 5) << 21
            | _check("rt", instr.rt, 5) << 16
            | (instr.imm & 0xFFFF)
        )
    return J_OPCODES[m] << 26 | _check("target", instr.target, 26)


def decode(word: int) -> Decoded:
    word &= MASK32
    op = word >> 26
    rs = (word >> 21) & 0x1F
    rt = (word >> 16) & 0x1F
    rd = (word >> 11) & 0x1F
    shamt = (word >> 6) & 0x1F
    if op == 0:
        name = _FUNCT_TO_R.get(word & 0x3F)
        if name is None:
            return Illegal(word)
        if name == "sll":
            if rs:
                return Illegal(word)
        elif shamt:
            return Illegal(word)
        return Instruction(name, rs=rs, rt=rt, rd=rd, shamt=shamt)
    if op in _OP_TO_I:
        name = _OP_TO_I[op]
        if name in KEY_LOADS and rt:
            return Illegal(word)
        return Instruction(name, rs=rs, rt=rt, imm=sign_extend16(word))
    if op in _OP_TO_J:
        return Instruction(_OP_TO_J[op], target=word & 0x3FFFFFF)
    return Illegal(word)


def reg(n: int) -> str:
    return f"$r{n}"


def disassemble(word: int) -> str:
    """Render ``word`` in the assembler's own syntax."""
    ins = decode(word)
    if isinstance(ins, Illegal):
        return f".word 0x{ins.word:08x}"
    return format_instruction(ins)


def format_instruction(ins: Instruction) -> str:
    m = ins.mnemonic
    if ins.is_nop:
        return "nop"
    if m == "sll":
        return f"sll {reg(ins.rd)}, {reg(ins.rt)}, {ins.shamt}"
    if m in R_FUNCT:
        return f"{m} {reg(ins.rd)}, {reg(ins.rs)}, {reg(ins.rt)}"
    if m == "addi":
        return f"addi {reg(ins.rt)}, {reg(ins.rs)}, {ins.imm}"
    if m in ("lw", "sw"):
        return f"{m} {reg(ins.rt)}, {ins.imm}({reg(ins.rs)})"
    if m in KEY_LOADS:
        return f"{m} {ins.imm}({reg(ins.rs)})"
    if m in BRANCHES:
        return f"{m} {reg(ins.rs)}, {reg(ins.rt)}, {ins.imm}"
    if m == "j":
        return f"j 0x{ins.target << 2:x}"
    return f"crypt {ins.target}"


def alu(ins: Instruction, a: int, b: int) -> int:
    """Result of an ALU-class instruction given its two operand values.

    ``a`` is the rs value and ``b`` the rt value; add/addi/sub wrap.
    """
    m = ins.mnemonic
    if m == "add":
        return (a + b) & MASK32
    if m == "sub":
        return (a - b) & MASK32
    if m == "and":
        return a & b
    if m == "or":
        return a | b
    if m == "slt":
        return int(to_signed32(a) < to_signed32(b))
    if m == "sll":
        return (b << ins.shamt) & MASK32
    if m == "addi":
        return (a + ins.imm) & MASK32
    raise ValueError(f"{m} is not an ALU instruction")


def branch_taken(ins: Instruction, a: int, b: int) -> bool:
    if ins.mnemonic == "beq":
        return a == b
    if ins.mnemonic == "bne":
        return a != b
    return ins.mnemonic == "j"


def control_target(ins: Instruction, pc: int) -> int:
    """Byte address a taken branch/jump at ``pc`` transfers to."""
    if ins.mnemonic == "j":
        return ins.target << 2
    return pc + 4 + (ins.imm << 2)
