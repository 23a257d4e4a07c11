"""Classical separate source and channel coding benchmark."""

from .chain import SeparationScheme, run_chain
from .huffman import HuffmanCodebook
from .turbo import TurboCodeConfig

__all__ = ["HuffmanCodebook", "SeparationScheme", "TurboCodeConfig", "run_chain"]
