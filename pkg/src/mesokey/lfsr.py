"""Fibonacci LFSR used to expand a K_M-bit key block into a basis stream."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeedError, DomainError

# Exponents of primitive feedback polynomials (x^w + ... + 1), widths 3..16.
# Maximal length is checked exhaustively in the test suite.
PRIMITIVE_TAPS = {
    3: (3, 1),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 11, 10, 4),
    13: (13, 12, 11, 8),
    14: (14, 13, 12, 2),
    15: (15, 14),
    16: (16, 15, 13, 4),
}


def bits_to_int(bits) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


@dataclass(frozen=True)
class LfsrSpec:
    width: int
    seed: tuple[int, ...]
    taps: tuple[int, ...] = ()

    def __post_init__(self):
        if self.width not in PRIMITIVE_TAPS:
            raise DomainError(f"LFSR width must be in 3..16, got {self.width}")
        seed = tuple(int(b) for b in self.seed)
        if len(seed) != self.width or any(b not in (0, 1) for b in seed):
            raise DomainError(f"seed must be {self.width} bits, got {self.seed!r}")
        if not any(seed):
            raise DegenerateSeedError("all-zero LFSR seed never leaves the zero state")
        object.__setattr__(self, "seed", seed)
        if not self.taps:
            object.__setattr__(self, "taps", PRIMITIVE_TAPS[self.width])
        elif tuple(self.taps) != PRIMITIVE_TAPS[self.width]:
            raise DomainError(
                f"taps {self.taps} are not the tabulated primitive polynomial for width {self.width}")

    @property
    def mask(self) -> int:
        m = 0
        for t in self.taps:
            m |= 1 << (t - 1)
        return m

    @property
    def period(self) -> int:
        return (1 << self.width) - 1


def lfsr_expand(spec: LfsrSpec, count: int) -> np.ndarray:
    """Emit ``count`` successive register states, starting with the seed."""
    if count < 0:
        raise DomainError(f"count must be non-negative, got {count}")
    full = (1 << spec.width) - 1
    mask = spec.mask
    state = bits_to_int(spec.seed)
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        out[i] = state
        fb = (state & mask).bit_count() & 1
        state = ((state << 1) | fb) & full
    return out
