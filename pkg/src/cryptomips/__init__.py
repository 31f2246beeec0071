"""Triple-DES encrypted MIPS: cipher, assembler, image tool and pipeline simulator."""

from .assembler import AssemblyError, ProgramImage, assemble
from .datapath import PipelineConfig
from .image_tool import EncryptedImage, decrypt_image, encrypt_image
from .interpreter import interpret
from .memory import Memory
from .pipeline import Pipeline, RunStats, run_program
from .tdes import KeySet, des_decrypt, des_encrypt, tdes_decrypt, tdes_encrypt

__all__ = [
    "AssemblyError", "EncryptedImage", "KeySet", "Memory", "Pipeline", "PipelineConfig",
    "ProgramImage", "RunStats", "assemble", "decrypt_image", "des_decrypt", "des_encrypt",
    "encrypt_image", "interpret", "run_program", "tdes_decrypt", "tdes_encrypt",
]
__version__ = "0.1.0"
