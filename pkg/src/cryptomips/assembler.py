"""Two-pass assembler producing 64-bit instruction blocks.

Dialect::

    label:  mnemonic op, op, op     # comment
            .text | .data
            .org <byte>             (.data only)
            .word64 <hex16>         (.data only)
            .word32 <hex8>          (.data only; zero-padded, value in low half)
            .ascii8 "XXXXXXXX"      (.data only; first char is the MS byte)
            .word <int>             (.text only; raw 32-bit instruction slot)

Registers are ``$r<n>`` or ``$<n>``.  Instruction ``i`` sits at byte ``4*i``;
the instruction at ``8k`` is the high half of block ``k``.  A nonzero
``crypt`` is moved to the high slot boundary by inserting a ``nop`` in front
of it when needed, so that everything after it starts on a fresh block.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from . import isa
from .isa import Instruction, NOP
from .memory import ImageFile, format_image, iter_slots, parse_image

MASK32 = 0xFFFFFFFF


class AssemblyError(Exception):
    """One or more diagnostics, each a (line number, message) pair."""

    def __init__(self, diagnostics: List[Tuple[int, str]], filename: str = "<source>"):
        self.diagnostics = diagnostics
        self.filename = filename
        super().__init__("\n".join(f"{filename}:{n}: {msg}" for n, msg in diagnostics))


@dataclass
class ProgramImage:
    blocks: List[int] = field(default_factory=list)
    symbols: Dict[str, int] = field(default_factory=dict)
    crypt_marker: Optional[int] = None
    data_blocks: Dict[int, int] = field(default_factory=dict)

    @property
    def top(self) -> int:
        return 8 * len(self.blocks)

    def words(self) -> List[int]:
        return [w for _, w in iter_slots(self.blocks)]

    @classmethod
    def from_words(cls, words: List[int], crypt_marker: Optional[int] = None) -> "ProgramImage":
        words = list(words)
        if len(words) % 2:
            words.append(0)
        blocks = [(words[i] << 32) | words[i + 1] for i in range(0, len(words), 2)]
        return cls(blocks=blocks, crypt_marker=crypt_marker)

    def imem_text(self) -> str:
        return format_image({8 * i: b for i, b in enumerate(self.blocks)}, self.crypt_marker)

    def dmem_text(self) -> str:
        return format_image(self.data_blocks)

    @classmethod
    def from_image_file(cls, img: ImageFile) -> "ProgramImage":
        top = max(img.blocks) + 8 if img.blocks else 0
        return cls(blocks=[img.blocks.get(a, 0) for a in range(0, top, 8)],
                   crypt_marker=img.crypt_marker)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ProgramImage":
        return cls.from_image_file(parse_image(Path(path).read_text()))


@dataclass
class SourceLine:
    lineno: int
    labels: List[str]
    mnemonic: Optional[str] = None
    operands: List[str] = field(default_factory=list)
    directive: Optional[str] = None


_LABEL = re.compile(r"^\s*([A-Za-z_.][\w.]*)\s*:")
_REG = re.compile(r"^\$(?:r)?(\d+)$", re.IGNORECASE)
_MEM = re.compile(r"^(.*)\(\s*(\$\w+)\s*\)$")

_OPERAND_SHAPES = {
    "add": "rrr", "sub": "rrr", "and": "rrr", "or": "rrr", "slt": "rrr",
    "sll": "rri", "addi": "rri",
    "lw": "rm", "sw": "rm",
    "lklw": "m", "lkuw": "m",
    "beq": "rrb", "bne": "rrb",
    "j": "t", "crypt": "i",
    "nop": "",
}


def split_operands(text: str) -> List[str]:
    text = text.strip()
    if not text:
        return []
    return [op.strip() for op in text.split(",")]


def parse_line(lineno: int, raw: str) -> SourceLine:
    text = raw.split("#", 1)[0]
    labels = []
    while True:
        m = _LABEL.match(text)
        if not m:
            break
        labels.append(m.group(1))
        text = text[m.end():]
    text = text.strip()
    line = SourceLine(lineno, labels)
    if not text:
        return line
    head, *rest_parts = text.split(None, 1)
    rest = rest_parts[0] if rest_parts else ""
    if head.startswith("."):
        line.directive = head.lower()
        line.operands = [rest.strip()] if line.directive == ".ascii8" else split_operands(rest)
    else:
        line.mnemonic = head.lower()
        line.operands = split_operands(rest)
    return line


def parse_register(text: str) -> int:
    m = _REG.match(text.strip())
    if not m or int(m.group(1)) > 31:
        raise ValueError(f"bad register {text!r}")
    return int(m.group(1))


def _parse_int(text: str) -> int:
    return int(text.strip(), 0)


@dataclass
class _TextItem:
    line: SourceLine
    addr: int = 0
    padded: bool = False


def assemble(source: str, filename: str = "<source>") -> ProgramImage:
    lines = [parse_line(n, raw) for n, raw in enumerate(source.splitlines(), 1)]
    diags: List[Tuple[int, str]] = []
    symbols: Dict[str, int] = {}

    text_items, data_blocks, pending = _first_pass(lines, symbols, diags)
    crypt_marker = _layout_text(text_items, symbols, pending, diags)

    words: List[int] = []
    for item in text_items:
        if item.padded:
            words.append(0)
        try:
            words.append(_encode_line(item.line, item.addr, symbols))
        except (ValueError, KeyError) as exc:
            diags.append((item.line.lineno, exc.args[0] if exc.args else str(exc)))
            words.append(0)

    if diags:
        raise AssemblyError(sorted(diags), filename)
    image = ProgramImage.from_words(words, crypt_marker)
    image.symbols = symbols
    image.data_blocks = data_blocks
    return image


def _first_pass(lines, symbols, diags):
    """Collect text lines, lay out .data, and record label placements."""
    section = "text"
    text_items: List[_TextItem] = []
    data_blocks: Dict[int, int] = {}
    data_addr = 0
    # labels waiting for the next text item: (name, lineno, index into text_items)
    pending: List[Tuple[str, int, int]] = []

    def define(name: str, lineno: int, value: int) -> None:
        if name in symbols or any(p[0] == name for p in pending):
            diags.append((lineno, f"duplicate label {name!r}"))
        else:
            symbols[name] = value

    for line in lines:
        if section == "data":
            for name in line.labels:
                define(name, line.lineno, data_addr)
        else:
            for name in line.labels:
                if name in symbols or any(p[0] == name for p in pending):
                    diags.append((line.lineno, f"duplicate label {name!r}"))
                else:
                    pending.append((name, line.lineno, len(text_items)))

        if line.directive is not None:
            d = line.directive
            try:
                if d == ".text":
                    section = "text"
                elif d == ".data":
                    section = "data"
                elif d == ".word" and section == "text":
                    _expect_arity(line, 1)
                    value = _parse_int(line.operands[0])
                    if not 0 <= value <= MASK32:
                        raise ValueError(f".word value {value} does not fit in 32 bits")
                    text_items.append(_TextItem(line))
                elif section != "data":
                    raise ValueError(f"directive {d} is only allowed in .data")
                elif d == ".org":
                    _expect_arity(line, 1)
                    data_addr = _parse_int(line.operands[0])
                    if data_addr < 0 or data_addr % 8:
                        raise ValueError(f".org {data_addr} is not 8-byte aligned")
                elif d in (".word64", ".word32", ".ascii8"):
                    _expect_arity(line, 1)
                    data_blocks[data_addr] = _data_value(d, line.operands[0])
                    data_addr += 8
                else:
                    raise ValueError(f"unknown directive {d}")
            except ValueError as exc:
                diags.append((line.lineno, str(exc)))
        elif line.mnemonic is not None:
            if section != "text":
                diags.append((line.lineno, f"instruction {line.mnemonic!r} in .data section"))
            else:
                text_items.append(_TextItem(line))
    return text_items, data_blocks, pending


def _data_value(directive: str, operand: str) -> int:
    if directive == ".ascii8":
        m = re.fullmatch(r'"(.*)"', operand.strip())
        if not m or len(m.group(1)) != 8:
            raise ValueError(".ascii8 needs exactly 8 characters in double quotes")
        return int.from_bytes(m.group(1).encode("latin-1"), "big")
    digits = operand.strip().lower()
    digits = digits[2:] if digits.startswith("0x") else digits
    width = 16 if directive == ".word64" else 8
    if not re.fullmatch(r"[0-9a-f]+", digits) or len(digits) > width:
        raise ValueError(f"{directive} needs up to {width} hex digits, got {operand!r}")
    return int(digits, 16)


def _expect_arity(line: SourceLine, n: int) -> None:
    if len(line.operands) != n:
        what = line.mnemonic or line.directive
        raise ValueError(f"{what} takes {n} operand(s), got {len(line.operands)}")


def _crypt_value(line: SourceLine) -> Optional[int]:
    if line.mnemonic != "crypt" or len(line.operands) != 1:
        return None
    try:
        return _parse_int(line.operands[0])
    except ValueError:
        return None


def _layout_text(items: List[_TextItem], symbols, pending, diags) -> Optional[int]:
    """Assign addresses, pad nonzero ``crypt`` into a high slot, bind labels."""
    marker = None
    enabled_at: Optional[int] = None
    slot = 0
    for item in items:
        value = _crypt_value(item.line)
        if value is not None:
            if value and enabled_at is not None:
                diags.append((item.line.lineno,
                              f"second enabling crypt (first on line {enabled_at}); only one transition is supported"))
            elif not value and enabled_at is not None:
                diags.append((item.line.lineno, "crypt 0 after crypt is enabled is not supported"))
            elif value:
                enabled_at = item.line.lineno
                if slot % 2 == 0:
                    item.padded = True
                    slot += 1
                marker = 4 * slot + 4
        item.addr = 4 * slot
        slot += 1
    for name, _, index in pending:
        symbols[name] = items[index].addr if index < len(items) else 4 * slot
    return marker


def _resolve(text: str, symbols: Dict[str, int]) -> int:
    text = text.strip()
    if text in symbols:
        return symbols[text]
    try:
        return _parse_int(text)
    except ValueError:
        if re.fullmatch(r"[A-Za-z_.][\w.]*", text):
            raise ValueError(f"undefined label {text!r}") from None
        raise ValueError(f"bad operand {text!r}") from None


def _imm16(value: int) -> int:
    if not -0x8000 <= value <= 0x7FFF:
        raise ValueError(f"immediate {value} out of 16-bit signed range")
    return value


def _memory_operand(text: str, symbols) -> Tuple[int, int]:
    m = _MEM.match(text.strip())
    if not m:
        raise ValueError(f"expected imm($reg), got {text!r}")
    offset = m.group(1).strip()
    return _imm16(_resolve(offset, symbols) if offset else 0), parse_register(m.group(2))


def _encode_line(line: SourceLine, addr: int, symbols: Dict[str, int]) -> int:
    if line.directive == ".word":
        return _parse_int(line.operands[0])
    m = line.mnemonic
    if m not in _OPERAND_SHAPES:
        raise ValueError(f"unknown mnemonic {m!r}")
    ops = line.operands
    if m in isa.KEY_LOADS and len(ops) == 2:
        raise ValueError(f"{m} takes no destination register")
    shape = _OPERAND_SHAPES[m]
    if len(ops) != len(shape):
        raise ValueError(f"{m} takes {len(shape)} operand(s), got {len(ops)}")
    if m == "nop":
        return isa.encode(NOP)
    if shape == "rrr":
        rd, rs, rt = (parse_register(o) for o in ops)
        return isa.encode(Instruction(m, rs=rs, rt=rt, rd=rd))
    if m == "sll":
        rd, rt = parse_register(ops[0]), parse_register(ops[1])
        shamt = _resolve(ops[2], symbols)
        if not 0 <= shamt < 32:
            raise ValueError(f"shift amount {shamt} out of range 0..31")
        return isa.encode(Instruction(m, rt=rt, rd=rd, shamt=shamt))
    if m == "addi":
        rt, rs = parse_register(ops[0]), parse_register(ops[1])
        return isa.encode(Instruction(m, rs=rs, rt=rt, imm=_imm16(_resolve(ops[2], symbols))))
    if shape == "rm":
        rt = parse_register(ops[0])
        imm, rs = _memory_operand(ops[1], symbols)
        return isa.encode(Instruction(m, rs=rs, rt=rt, imm=imm))
    if shape == "m":
        imm, rs = _memory_operand(ops[0], symbols)
        return isa.encode(Instruction(m, rs=rs, imm=imm))
    if shape == "rrb":
        rs, rt = parse_register(ops[0]), parse_register(ops[1])
        if ops[2].strip() in symbols:
            disp = (symbols[ops[2].strip()] - (addr + 4)) // 4
        else:
            disp = _resolve(ops[2], symbols)
        return isa.encode(Instruction(m, rs=rs, rt=rt, imm=_imm16(disp)))
    if m == "j":
        target = _resolve(ops[0], symbols)
        if target % 4 or not 0 <= target < (1 << 28):
            raise ValueError(f"jump target {target} is not a reachable word address")
        return isa.encode(Instruction(m, target=target >> 2))
    value = _resolve(ops[0], symbols)
    if not 0 <= value < (1 << 26):
        raise ValueError(f"crypt argument {value} does not fit in 26 bits")
    return isa.encode(Instruction(m, target=value))


def emit_listing(image: ProgramImage) -> str:
    """Address / word / disassembly, one row per instruction slot."""
    return "".join(
        f"{addr:04x}  {word:08x}  {isa.disassemble(word)}\n"
        for addr, word in iter_slots(image.blocks)
    )


def disassemble_image(image: ProgramImage) -> str:
    """Re-assemblable source for the instruction slots of ``image``."""
    return "".join(isa.disassemble(w) + "\n" for w in image.words())
