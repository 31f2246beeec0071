"""Differential checks between the pipeline, the interpreter and the variants."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

from .assembler import assemble
from .datapath import PipelineConfig, SimulationError, plain_view
from .image_tool import encrypt_image
from .interpreter import interpret
from .memory import Memory
from .pipeline import run_program
from .randprog import RandomProgram, random_program
from .tdes import KeySet


def oracle_configs(variant: str = "encrypted", jump_policies=("flush", "delayed:1"),
                   latencies=(0, 3), max_cycles: int = 20_000) -> List[PipelineConfig]:
    """Forwarding x jump policy x crypto latency grid."""
    return [
        PipelineConfig(variant=variant, forwarding=fwd, jump_policy=pol,
                       crypto_latency=lat, max_cycles=max_cycles)
        for fwd, pol, lat in itertools.product((True, False), jump_policies, latencies)
    ]


def memories(prog: RandomProgram, encrypted: bool) -> Tuple[Memory, Memory]:
    """Instruction and data memories for ``prog``, body encrypted on request."""
    image = assemble(prog.source, f"<seed {prog.seed}>")
    blocks = image.blocks
    if encrypted and image.crypt_marker is not None:
        blocks = encrypt_image(image, KeySet(*prog.keys)).blocks
    imem = Memory(kind="instruction")
    imem.load_blocks({8 * i: b for i, b in enumerate(blocks)})
    dmem = Memory()
    dmem.load_blocks(prog.data_words)
    return imem, dmem


@dataclass
class Mismatch:
    seed: int
    config: PipelineConfig
    detail: str

    def __str__(self) -> str:
        c = self.config
        return (f"seed {self.seed} [{c.variant} fwd={int(c.forwarding)} {c.jump_policy} "
                f"lat={c.crypto_latency}]: {self.detail}")


def check_oracle(seed: int, configs: Optional[Iterable[PipelineConfig]] = None) -> List[Mismatch]:
    """Run vs interpret for one random program under every config."""
    configs = list(configs) if configs is not None else oracle_configs()
    prog = random_program(seed)
    found = []
    for cfg in configs:
        imem, dmem = memories(prog, encrypted=cfg.variant == "encrypted")
        try:
            ref = interpret(imem, dmem, cfg)
        except SimulationError as exc:
            ref = exc
        try:
            got = run_program(imem, dmem, cfg)
        except SimulationError as exc:
            got = exc
        if isinstance(ref, Exception) or isinstance(got, Exception):
            if type(ref) is not type(got):
                found.append(Mismatch(seed, cfg, f"interpret {ref!r} vs run {got!r}"))
            continue
        if ref.gpr != got.gpr:
            found.append(Mismatch(seed, cfg, "gpr differ"))
        if ref.dmem != got.dmem:
            found.append(Mismatch(seed, cfg, "data memory differs"))
        if ref.retired != got.stats.instructions_retired:
            found.append(Mismatch(seed, cfg, f"retired {ref.retired} vs {got.stats.instructions_retired}"))
        if not got.stats.identity_holds():
            found.append(Mismatch(seed, cfg, f"cycle identity broken: {got.stats}"))
    return found


def check_system(seed: int, forwarding: bool = True, jump_policy: str = "flush") -> List[Mismatch]:
    """Plain run of P against the encrypted run of encrypt_image(P)."""
    prog = random_program(seed)
    plain_cfg = PipelineConfig(variant="plain", forwarding=forwarding, jump_policy=jump_policy)
    enc_cfg = PipelineConfig(variant="encrypted", forwarding=forwarding, jump_policy=jump_policy)
    plain = run_program(*memories(prog, encrypted=False), plain_cfg)
    enc = run_program(*memories(prog, encrypted=True), enc_cfg)
    found = []
    if plain.gpr != enc.gpr:
        found.append(Mismatch(seed, enc_cfg, "gpr differ"))
    view = plain_view(enc.dmem, enc.keys, enc_cfg)
    if view.bytes != plain.dmem.bytes:
        found.append(Mismatch(seed, enc_cfg, "decrypted data view differs from plain run"))
    return found
