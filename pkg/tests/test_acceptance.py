"""Acceptance criteria, one marked group per criterion.

A pass/fail line per criterion is printed in the terminal summary.
"""

import random
import time
from importlib import resources

import pytest

from cryptomips.assembler import assemble
from cryptomips.datapath import PAPER_LATENCY, PipelineConfig
from cryptomips.equivalence import check_oracle, check_system, memories, oracle_configs
from cryptomips.image_tool import encrypt_image, paper_keys
from cryptomips.memory import Memory
from cryptomips.pipeline import run_program
from cryptomips.randprog import random_program
from cryptomips.tdes import des_decrypt, des_encrypt, tdes_decrypt, tdes_encrypt
from helpers import build, reference_des
from test_tdes import KATS

REF_CIPHER = 0x2542B17039A61551
REF_DECRYPTED = 0x2C824FE86704FD6E


@pytest.fixture(scope="module")
def oracle():
    return reference_des()


def sum_run(latency=0):
    src = resources.files("cryptomips").joinpath("programs/paper_sum.s").read_text()
    image = assemble(src, "paper_sum.s")
    enc = encrypt_image(image, paper_keys())
    dmem = Memory()
    dmem.load_blocks(image.data_blocks)
    cfg = PipelineConfig(variant="encrypted", crypto_latency=latency)
    return image, run_program(enc.to_memory(), dmem, cfg)


@pytest.mark.acceptance(1, "cipher conformance")
def test_criterion_1_cipher_conformance(oracle):
    enc, dec = oracle
    start = time.perf_counter()
    assert len(KATS) >= 5
    assert (0x133457799BBCDFF1, 0x0123456789ABCDEF, 0x85E813540F0AB405) in KATS
    for key, plain, cipher in KATS:
        assert des_encrypt(plain, key) == cipher == enc(plain, key)
        assert des_decrypt(cipher, key) == plain == dec(cipher, key)
    rng = random.Random(1)
    for _ in range(1000):
        p, k1, k2, k3 = (rng.getrandbits(64) for _ in range(4))
        assert tdes_decrypt(tdes_encrypt(p, (k1, k2, k3)), (k1, k2, k3)) == p
        assert tdes_encrypt(p, (k1, k1, k3)) == des_encrypt(p, k3)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"{elapsed:.2f}s"


@pytest.mark.acceptance(2, "end-to-end encrypted run of the array-sum program")
def test_criterion_2_array_sum_end_to_end(oracle, record_property):
    enc, dec = oracle
    start = time.perf_counter()
    image, m = sum_run()
    data = image.data_blocks
    assert sum(data[a] for a in range(0, 56, 8)) == 0x38
    assert [data[a] for a in range(104, 152, 8)] == [0, 0, 0, 0, 0x5450414C, 0x4B495241]
    assert m.halted
    assert m.gpr[4] == 0x00000038
    assert m.dmem.read_block(56) == tdes_encrypt(0x38, paper_keys())
    # reference vectors against the independent library; k1 = k2 collapses EDE to DES under k3
    k3 = paper_keys().k3
    assert enc(0x38, k3) == REF_CIPHER == m.dmem.read_block(56)
    assert dec(0x38, k3) == REF_DECRYPTED
    elapsed = time.perf_counter() - start
    record_property("note", f"r4=0x{m.gpr[4]:08x} dmem[56]=0x{m.dmem.read_block(56):016x}")
    assert elapsed < 1.0, f"{elapsed:.2f}s"


@pytest.mark.acceptance(3, "pipeline/interpreter equivalence, 100 programs x 8 configs")
def test_criterion_3_oracle_equivalence(record_property):
    start = time.perf_counter()
    configs = oracle_configs()
    assert len(configs) == 8
    mismatches = [m for seed in range(100) for m in check_oracle(seed, configs)]
    elapsed = time.perf_counter() - start
    assert not mismatches, "\n".join(map(str, mismatches[:10]))
    record_property("note", "800 runs, 0 mismatches")
    assert elapsed < 30.0, f"{elapsed:.2f}s"


@pytest.mark.acceptance(4, "timing contracts")
class TestCriterion4:
    @pytest.mark.parametrize("n", [2, 6, 10, 40])
    def test_straight_line(self, n):
        src = "".join(f"addi $r{1 + i % 31}, $r0, {i}\n" for i in range(n))
        m = run_program(*build(src), PipelineConfig())
        assert m.stats.cycles == n + 4

    @pytest.mark.parametrize("forwarding,stalls", [(True, 1), (False, 2)])
    def test_load_use(self, forwarding, stalls):
        imem, dmem = build("lw $r1, 8($r0)\nadd $r2, $r1, $r1\n", data={8: 3})
        m = run_program(imem, dmem, PipelineConfig(forwarding=forwarding))
        assert m.stats.stall_cycles == stalls

    def test_identity_on_corpus(self):
        runs = 0
        src = resources.files("cryptomips").joinpath("programs/paper_sum.s").read_text()
        image = assemble(src)
        for variant in ("plain", "encrypted", "decrypted"):
            blocks = encrypt_image(image, paper_keys()).blocks if variant == "encrypted" else image.blocks
            imem = Memory(kind="instruction")
            imem.load_blocks({8 * i: b for i, b in enumerate(blocks)})
            dmem = Memory()
            dmem.load_blocks(image.data_blocks)
            for fwd in (True, False):
                for lat in (0, 3, PAPER_LATENCY):
                    m = run_program(imem, dmem, PipelineConfig(variant=variant, forwarding=fwd,
                                                                crypto_latency=lat))
                    assert m.stats.identity_holds(), (variant, fwd, lat, m.stats)
                    runs += 1
        for seed in range(100):
            prog = random_program(seed)
            for cfg in oracle_configs():
                m = run_program(*memories(prog, True), cfg)
                assert m.stats.identity_holds(), (seed, cfg, m.stats)
                runs += 1
        assert runs == 18 + 800


@pytest.mark.acceptance(5, "plain run of P equals encrypted run of encrypt_image(P)")
def test_criterion_5_system_theorem():
    mismatches = [m for seed in range(25) for m in check_system(seed)]
    assert not mismatches, "\n".join(map(str, mismatches))


@pytest.mark.acceptance(6, "hardware figures not reproducible; latency preset reported only")
def test_criterion_6_latency_preset_reported(record_property):
    _, base = sum_run(0)
    _, slow = sum_run(PAPER_LATENCY)
    assert slow.gpr == base.gpr and slow.dmem == base.dmem
    assert slow.stats.identity_holds()
    record_property("note", f"CPI {base.stats.cpi:.3f} at latency 0, "
                            f"{slow.stats.cpi:.3f} at latency {PAPER_LATENCY} (reported, not asserted)")
