"""Key verification and privacy amplification by Toeplitz hashing."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import DomainError

DEFAULT_CHECK_BITS = 64


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise DomainError("bit sequences must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise DomainError("bit sequences may only contain 0 and 1")
    return arr


def toeplitz_seed_bits(hash_seed, input_length: int, output_length: int) -> np.ndarray:
    """Expand ``hash_seed`` into the m + n - 1 bits defining a Toeplitz matrix.

    An explicit bit array of the right length is used as-is; an integer is
    expanded with a Philox stream.
    """
    needed = input_length + output_length - 1
    if isinstance(hash_seed, (int, np.integer)):
        rng = np.random.Generator(np.random.Philox(int(hash_seed)))
        return rng.integers(0, 2, size=needed, dtype=np.uint8)
    seed = _as_bits(hash_seed)
    if seed.size != needed:
        raise DomainError(f"explicit Toeplitz seed needs {needed} bits, got {seed.size}")
    return seed


def toeplitz_hash(key, output_length: int, seed_bits: np.ndarray) -> np.ndarray:
    """y = T key (mod 2) with T[i, j] = seed[i - j + n - 1]."""
    key = _as_bits(key)
    n = key.size
    if output_length == 0 or n == 0:
        return np.zeros(output_length, dtype=np.uint8)
    if n * output_length <= 4_000_000:
        full = np.convolve(seed_bits.astype(np.int64), key.astype(np.int64))
    else:
        full = np.rint(fftconvolve(seed_bits.astype(float), key.astype(float))).astype(np.int64)
    return (full[n - 1:n - 1 + output_length] & 1).astype(np.uint8)


def privacy_amplify(key, output_length: int, hash_seed) -> np.ndarray:
    """Compress ``key`` to ``output_length`` bits with a seeded Toeplitz hash."""
    key = _as_bits(key)
    if output_length < 0 or output_length > key.size:
        raise DomainError(f"output length {output_length} must lie in [0, {key.size}]")
    seed_bits = toeplitz_seed_bits(hash_seed, key.size, output_length)
    return toeplitz_hash(key, output_length, seed_bits)


@dataclass(frozen=True)
class Verification:
    verified: bool
    digest_a: bytes
    digest_b: bytes
    check_bits: int

    @property
    def report(self) -> str:
        if self.verified:
            return f"verified ({self.check_bits}-bit digest {self.digest_a.hex() or '-'})"
        return (f"ABORT: digest mismatch ({self.check_bits} bits) "
                f"A={self.digest_a.hex()} B={self.digest_b.hex()}")


def key_digest(key, check_bits: int, hash_seed) -> bytes:
    key = _as_bits(key)
    if check_bits > key.size:
        raise DomainError(f"check_bits {check_bits} exceeds key length {key.size}")
    seed_bits = toeplitz_seed_bits(hash_seed, key.size, check_bits)
    return np.packbits(toeplitz_hash(key, check_bits, seed_bits)).tobytes()


def reconcile_and_verify(key_a, key_b, check_bits: int = DEFAULT_CHECK_BITS,
                         hash_seed: int = 0) -> Verification:
    """Compare t-bit universal-hash digests of both keys.

    Two distinct keys collide with probability 2**-t over the hash seed.
    No error correction is attempted.
    """
    key_a, key_b = _as_bits(key_a), _as_bits(key_b)
    if key_a.size != key_b.size:
        raise DomainError(f"key lengths differ: {key_a.size} vs {key_b.size}")
    if check_bits < 0:
        raise DomainError(f"check_bits must be non-negative, got {check_bits}")
    if check_bits == 0:
        warnings.warn("check_bits=0 verifies nothing", stacklevel=2)
        return Verification(True, b"", b"", 0)
    da = key_digest(key_a, check_bits, hash_seed)
    db = key_digest(key_b, check_bits, hash_seed)
    return Verification(da == db, da, db, check_bits)
