"""
🧭 Pipeline Enumerations - the switches that steer the classifier!

This module holds the small fixed vocabularies used across the package:
which network variant runs, whether a layer is training or evaluating,
how convolutions are padded and which family an error belongs to.
"""

from enum import Enum, auto


class Variant(Enum):
    """
    🧠 Network variants compared in the ablation study

    - OESCN: band generator + band attention + CNN classifier
    - OESCN_A1: attention removed, the classifier sees S directly
    - OESCN_A2: band generator removed too, the classifier sees the PSD F
    """
    OESCN = "OESCN"
    OESCN_A1 = "OESCN_a1"
    OESCN_A2 = "OESCN_a2"

    @classmethod
    def parse(cls, text: str) -> "Variant":
        """
        🔎 Looks a variant up by name, case-insensitively ("oescn_a1" works)
        """
        wanted = text.strip().lower()
        for variant in cls:
            if variant.value.lower() == wanted or variant.name.lower() == wanted:
                return variant
        raise ValueError(f"unknown variant: {text!r}")

    @property
    def uses_bands(self) -> bool:
        return self is not Variant.OESCN_A2

    @property
    def uses_attention(self) -> bool:
        return self is Variant.OESCN


class Mode(Enum):
    """
    🔀 Train or eval behaviour for BN and dropout
    """
    TRAIN = auto()  # batch statistics, random dropout
    EVAL = auto()   # running statistics, dropout off


class Padding(Enum):
    """
    🧱 Convolution padding rules
    """
    SAME = "same"    # output keeps (h, w)
    VALID = "valid"  # no padding


class ErrorCategory(Enum):
    """
    🚦 Error families, each mapped to a CLI exit code
    """
    CONFIG = 2
    DATA = 3
    NUMERIC = 4

    @property
    def exit_code(self) -> int:
        return self.value


class Provenance(Enum):
    """
    🏷️ Where a dataset came from
    """
    FILE = "file"
    SYNTHETIC = "synthetic"
