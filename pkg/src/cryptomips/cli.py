"""Command-line entry point: ``cryptomips <command> ...``.

Exit codes: 0 success, 1 bad input (assembly, image or key errors),
2 cycle budget exhausted, 3 architectural fault.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path
from typing import List, Optional

from .assembler import AssemblyError, ProgramImage, assemble, disassemble_image, emit_listing
from .datapath import (
    PAPER_LATENCY,
    VARIANTS,
    ArchitecturalFault,
    CycleBudgetExceeded,
    PipelineConfig,
)
from .equivalence import check_oracle, check_system, oracle_configs
from .image_tool import (
    EncryptedImage,
    ImageToolError,
    decrypt_image,
    encrypt_image,
    illegal_ratio,
    paper_keys,
    read_keyfile,
)
from .memory import ImageFormatError, Memory, MemoryFault, load_image, parse_image, parse_range
from .pipeline import Pipeline
from .tdes import KeySet, parse_hex64

log = logging.getLogger("cryptomips")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BUDGET = 2
EXIT_FAULT = 3


class UsageError(Exception):
    pass


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _add_key_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--keys", metavar="FILE", help="key file: three 16-hex-digit lines k1, k2, k3")
    for k in ("k1", "k2", "k3"):
        p.add_argument(f"--{k}", metavar="HEX", help=f"{k} as hex (missing keys default to 0)")


def _keys_from(args: argparse.Namespace, required: bool = True) -> Optional[KeySet]:
    inline = [getattr(args, k) for k in ("k1", "k2", "k3")]
    if args.keys and any(v is not None for v in inline):
        raise UsageError("give either --keys or --k1/--k2/--k3, not both")
    if args.keys:
        return read_keyfile(args.keys)
    if any(v is not None for v in inline):
        try:
            return KeySet(*(parse_hex64(v) if v is not None else 0 for v in inline))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if required:
        raise UsageError("keys required: --keys FILE or --k1/--k2/--k3")
    return None


def paper_program() -> ProgramImage:
    """The bundled array-sum program, assembled."""
    src = resources.files("cryptomips").joinpath("programs/paper_sum.s").read_text()
    return assemble(src, "paper_sum.s")


# -- commands ---------------------------------------------------------------

def cmd_asm(args: argparse.Namespace) -> int:
    source = Path(args.source).read_text()
    image = assemble(source, args.source)
    out = args.output or str(Path(args.source).with_suffix(".imem"))
    _write(out, image.imem_text())
    if args.data:
        _write(args.data, image.dmem_text())
    if args.listing:
        _write(args.listing, emit_listing(image))
    return EXIT_OK


def cmd_encrypt(args: argparse.Namespace) -> int:
    keys = _keys_from(args)
    image = ProgramImage.load(args.imem)
    _write(args.output, encrypt_image(image, keys).to_text())
    return EXIT_OK


def cmd_decrypt(args: argparse.Namespace) -> int:
    keys = _keys_from(args)
    enc = EncryptedImage.from_text(Path(args.imem).read_text())
    plain = decrypt_image(enc, keys)
    ratio = illegal_ratio(plain, plain.crypt_marker)
    if ratio > 0:
        print(f"illegal slots after the marker: {ratio:.1%}", file=sys.stderr)
    _write(args.output, plain.imem_text())
    return EXIT_OK


def cmd_disasm(args: argparse.Namespace) -> int:
    text = Path(args.imem).read_text()
    image = ProgramImage.from_image_file(parse_image(text))
    keys = _keys_from(args, required=False)
    if keys is not None:
        if image.crypt_marker is None:
            raise UsageError("--keys given but the image has no crypt marker")
        image = decrypt_image(EncryptedImage.from_text(text), keys)
    _write(args.output, emit_listing(image) if args.listing else disassemble_image(image))
    return EXIT_OK


def _config_from(args: argparse.Namespace) -> PipelineConfig:
    latency = args.crypto_latency
    latency = PAPER_LATENCY if latency == "paper" else int(latency)
    variant = args.variant or ("encrypted" if args.preset == "paper" else "plain")
    return PipelineConfig(
        variant=variant,
        forwarding=not args.no_forwarding,
        auto_stall_keys=not args.no_auto_stall_keys,
        jump_policy=args.jump_policy,
        crypto_latency=latency,
        max_cycles=args.max_cycles,
    )


def _run_memories(args: argparse.Namespace) -> tuple:
    if args.imem is None:
        if args.preset != "paper":
            raise UsageError("an instruction image is required (or use --preset paper)")
        image = paper_program()
        enc = encrypt_image(image, paper_keys())
        imem = enc.to_memory()
        dmem = Memory()
        dmem.load_blocks(image.data_blocks)
        return imem, dmem
    imem = load_image(args.imem, kind="instruction")
    dmem = load_image(args.dmem) if args.dmem else Memory()
    return imem, dmem


def format_state(machine: Pipeline, dump: List[int]) -> str:
    lines = [f"r{i}={v:08x}" for i, v in enumerate(machine.gpr)]
    lines += [f"k{i + 1}={k:016x}" for i, k in enumerate(machine.keys.keys)]
    lines.append(f"crypt={int(machine.crypt_flag)}")
    for name, value in machine.stats.as_dict().items():
        lines.append(f"{name}={value:.6f}" if name == "cpi" else f"{name}={value}")
    lines += [f"dmem[{a}]={machine.dmem.read_block(a):016x}" for a in dump]
    return "".join(line + "\n" for line in lines)


def state_json(machine: Pipeline, dump: List[int]) -> dict:
    doc = dict(machine.stats.as_dict())
    doc.update(
        variant=machine.config.variant,
        gpr=list(machine.gpr),
        keys=[f"{k:016x}" for k in machine.keys.keys],
        crypt=int(machine.crypt_flag),
        dmem={str(a): f"{machine.dmem.read_block(a):016x}" for a in dump},
    )
    return doc


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from(args)
    imem, dmem = _run_memories(args)
    dump: List[int] = []
    if args.dump_dmem:
        lo, hi = parse_range(args.dump_dmem)
        dump = list(range(lo - lo % 8, min(hi, dmem.size), 8))

    trace_lines: List[str] = []
    machine = Pipeline(imem, dmem, config, trace_lines.append if args.trace else None)
    try:
        machine.run()
    finally:
        if args.trace:
            _write(args.trace, "".join(line + "\n" for line in trace_lines))
    if args.json:
        sys.stdout.write(json.dumps(state_json(machine, dump), sort_keys=True) + "\n")
    else:
        sys.stdout.write(format_state(machine, dump))
    return EXIT_OK


def _fuzz_one(seed: int) -> List[str]:
    found = check_oracle(seed, oracle_configs())
    found += check_system(seed)
    return [str(m) for m in found]


def cmd_fuzz(args: argparse.Namespace) -> int:
    seeds = range(args.start, args.start + args.seeds)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_fuzz_one, seeds))
    else:
        results = [_fuzz_one(s) for s in seeds]
    bad = [line for r in results for line in r]
    for line in bad:
        print(line)
    print(f"{len(seeds)} programs, {len(bad)} mismatches")
    return EXIT_OK if not bad else EXIT_FAULT


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cryptomips",
                                     description="T-DES encrypted MIPS toolchain and pipeline simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("asm", help="assemble a source file into image files")
    p.add_argument("source")
    p.add_argument("-o", "--output", help="instruction image (default: SOURCE.imem, '-' for stdout)")
    p.add_argument("--data", metavar="PATH", help="also write the .data image")
    p.add_argument("--listing", metavar="PATH", help="also write an address/word/disassembly listing")
    p.set_defaults(func=cmd_asm)

    for name, func, what in (("encrypt", cmd_encrypt, "encrypt"), ("decrypt", cmd_decrypt, "decrypt")):
        p = sub.add_parser(name, help=f"{what} the post-marker body of an instruction image")
        p.add_argument("imem")
        p.add_argument("-o", "--output")
        _add_key_args(p)
        p.set_defaults(func=func)

    p = sub.add_parser("run", help="simulate an image on the pipeline")
    p.add_argument("imem", nargs="?")
    p.add_argument("dmem", nargs="?")
    p.add_argument("--preset", choices=["paper"],
                   help="built-in array-sum program, encrypted with the reference keys")
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--no-forwarding", action="store_true")
    p.add_argument("--no-auto-stall-keys", action="store_true",
                   help="fault instead of stalling when CRYPT races a key load")
    p.add_argument("--jump-policy", default="flush", help="flush | delayed:1 | delayed:2")
    p.add_argument("--crypto-latency", default="0", help=f"cycles per T-DES core use, or 'paper' ({PAPER_LATENCY})")
    p.add_argument("--max-cycles", type=int, default=200_000)
    p.add_argument("--trace", metavar="PATH", help="per-cycle stage trace ('-' for stdout)")
    p.add_argument("--dump-dmem", metavar="LO..HI", help="print data blocks in this byte range")
    p.add_argument("--json", action="store_true", help="final state as one JSON object")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("disasm", help="disassemble an instruction image")
    p.add_argument("imem")
    p.add_argument("-o", "--output")
    p.add_argument("--listing", action="store_true", help="include address and word columns")
    _add_key_args(p)
    p.set_defaults(func=cmd_disasm)

    p = sub.add_parser("fuzz", help="pipeline/interpreter and plain/encrypted equivalence on random programs")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_fuzz)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except AssemblyError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except (UsageError, ImageFormatError, ImageToolError, MemoryFault, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CycleBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ArchitecturalFault as exc:
        print(f"fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
