"""Random terminating programs for equivalence testing.

Programs are emitted as assembly text so they also exercise the assembler.
Termination comes from construction: loops count a reserved register down
from a small constant, and every other branch or jump goes forward.  Each
control instruction is followed by two non-control fillers that never touch
the loop counter, so the programs are valid under every jump policy.

Reserved registers: ``$r28`` loop counter, ``$r29`` memory base pointer.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List

LOOP_REG = 28
BASE_REG = 29
DATA_SLOTS = 48  # data words live at bytes 0 .. 8*DATA_SLOTS-8
KEY_BASE = 512


@dataclass
class RandomProgram:
    source: str
    keys: tuple
    data_words: Dict[int, int] = field(default_factory=dict)
    seed: int = 0


class _Gen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.lines: List[str] = []
        self.recent: List[int] = [1]
        self.labels = 0

    def label(self, stem: str) -> str:
        self.labels += 1
        return f"{stem}{self.labels}"

    def src(self) -> int:
        r = self.rng
        if self.recent and r.random() < 0.6:
            return r.choice(self.recent[-3:])
        return r.randrange(0, 28)

    def dest(self) -> int:
        d = self.rng.randrange(1, 28)
        self.recent.append(d)
        return d

    def op(self) -> None:
        r = self.rng
        kind = r.choices(
            ["rrr", "addi", "sll", "lw", "sw", "lw_base", "sw_base", "nop"],
            weights=[30, 20, 5, 15, 12, 5, 4, 3],
        )[0]
        if kind == "rrr":
            m = r.choice(["add", "sub", "and", "or", "slt"])
            a, b = self.src(), self.src()
            self.lines.append(f"{m} $r{self.dest()}, $r{a}, $r{b}")
        elif kind == "addi":
            a = self.src()
            imm = r.choice([r.randint(-20, 20), r.randint(-32768, 32767)])
            self.lines.append(f"addi $r{self.dest()}, $r{a}, {imm}")
        elif kind == "sll":
            a = self.src()
            self.lines.append(f"sll $r{self.dest()}, $r{a}, {r.randrange(32)}")
        elif kind == "lw":
            self.lines.append(f"lw $r{self.dest()}, {8 * r.randrange(DATA_SLOTS)}($r0)")
        elif kind == "sw":
            self.lines.append(f"sw $r{self.src()}, {8 * r.randrange(DATA_SLOTS)}($r0)")
        elif kind in ("lw_base", "sw_base"):
            base = r.randrange(DATA_SLOTS // 2)
            off = r.randrange(DATA_SLOTS - base)
            self.lines.append(f"addi $r{BASE_REG}, $r0, {8 * base}")
            if kind == "lw_base":
                self.lines.append(f"lw $r{self.dest()}, {8 * off}($r{BASE_REG})")
            else:
                self.lines.append(f"sw $r{self.src()}, {8 * off}($r{BASE_REG})")
        else:
            self.lines.append("nop")

    def filler(self) -> None:
        # covers up to two delay slots
        self.op()
        self.op()

    def straight(self, lo: int = 1, hi: int = 6) -> None:
        for _ in range(self.rng.randint(lo, hi)):
            self.op()

    def skip(self) -> None:
        r = self.rng
        target = self.label("Skip")
        if r.random() < 0.7:
            m = r.choice(["beq", "bne"])
            self.lines.append(f"{m} $r{self.src()}, $r{self.src()}, {target}")
        else:
            self.lines.append(f"j {target}")
        self.filler()
        self.straight(0, 4)
        self.lines.append(f"{target}:")

    def loop(self) -> None:
        r = self.rng
        top = self.label("Loop")
        self.lines.append(f"addi $r{LOOP_REG}, $r0, {r.randint(1, 4)}")
        self.lines.append(f"{top}:")
        self.straight(1, 4)
        if r.random() < 0.4:
            self.skip()
        self.lines.append(f"addi $r{LOOP_REG}, $r{LOOP_REG}, -1")
        self.lines.append(f"bne $r{LOOP_REG}, $r0, {top}")
        self.filler()


def random_program(seed: int, crypt: bool = True, max_segments: int = 6) -> RandomProgram:
    """Build a random program; ``crypt`` adds the key-load + CRYPT preamble."""
    rng = random.Random(seed)
    g = _Gen(rng)
    keys = tuple(rng.getrandbits(64) for _ in range(3))
    if crypt:
        for i, k in enumerate(keys):
            g.lines.append(f"lklw {KEY_BASE + 16 * i}($r0)")
            if rng.random() < 0.3:
                g.op()
            g.lines.append(f"lkuw {KEY_BASE + 16 * i + 8}($r0)")
        g.lines.extend(["nop"] * rng.randint(0, 2))
        g.lines.append("crypt 1")
    for _ in range(rng.randint(1, max_segments)):
        kind = rng.choices(["straight", "loop", "skip"], weights=[4, 3, 3])[0]
        getattr(g, kind)()

    data = {8 * i: rng.getrandbits(32) for i in range(DATA_SLOTS)}
    for i, k in enumerate(keys):
        data[KEY_BASE + 16 * i] = k & 0xFFFFFFFF
        data[KEY_BASE + 16 * i + 8] = k >> 32
    source = "\n".join(f"        {line}" if not line.endswith(":") else line for line in g.lines) + "\n"
    return RandomProgram(source, keys, data, seed)
