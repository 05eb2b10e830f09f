"""Chained key-distribution protocol between stations A and B.

Each cycle the sender draws L0 fresh bits, ciphers them on the wheel bases
selected by the running key, and both stations adopt the fresh sequence as
the next running key. The receiver adopts what it decoded, so an undetected
channel error desynchronises every later cycle.
"""

from __future__ import annotations

import math
import secrets
from dataclasses import dataclass, field

import numpy as np

from .distill import DEFAULT_CHECK_BITS, Verification, reconcile_and_verify
from .errors import ConfigurationError, DomainError
from .lfsr import LfsrSpec, lfsr_expand
from .mry import SystemParams, circular_distance, wheel_phases, wrap_phase

ROLES = ("A", "B")


def as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or (arr.size and arr.max() > 1):
        raise DomainError("expected a one-dimensional sequence of 0/1 bits")
    return arr


def bits_from_hex(text: str) -> np.ndarray:
    text = text.strip().lower().removeprefix("0x")
    try:
        raw = bytes.fromhex(text if len(text) % 2 == 0 else "0" + text)
    except ValueError as exc:
        raise ConfigurationError(f"not a hex string: {text[:16]!r}...") from exc
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    # an odd digit count was left-padded with a zero nibble
    return bits[4:] if len(text) % 2 else bits


def bits_to_hex(bits) -> str:
    bits = as_bits(bits)
    if bits.size % 4:
        raise DomainError("hex encoding needs a multiple of 4 bits")
    nibbles = bits.reshape(-1, 4) @ np.array([8, 4, 2, 1])
    return "".join("0123456789abcdef"[v] for v in nibbles)


def key_block_to_basis(block, key_bits: int | None = None) -> int:
    """Big-endian value of a K_M-bit block."""
    block = as_bits(block)
    if block.size == 0:
        raise DomainError("empty key block")
    if key_bits is not None and block.size != key_bits:
        raise DomainError(f"block has {block.size} bits, expected K_M={key_bits}")
    return int(block @ (1 << np.arange(block.size - 1, -1, -1)))


def blocks_to_bases(key, key_bits: int) -> np.ndarray:
    key = as_bits(key)
    if key_bits < 1 or key.size % key_bits:
        raise ConfigurationError(f"key length {key.size} is not divisible by K_M={key_bits}")
    weights = 1 << np.arange(key_bits - 1, -1, -1)
    return key.reshape(-1, key_bits).astype(np.int64) @ weights


def modulate(bit, k, m: int):
    """Total phase bit*pi + phi_k, reduced to [0, 2*pi). Vectorises over bit and k."""
    bit, k = np.asarray(bit), np.asarray(k)
    if np.any((k < 0) | (k >= m)):
        raise DomainError(f"basis index outside [0, {m})")
    return wrap_phase(np.pi * bit + wheel_phases(m)[k])


def demodulate(measured_phase, k, m: int):
    """Undo the basis rotation and pick the nearer of 0 and pi; a tie reads as 0."""
    k = np.asarray(k)
    if np.any((k < 0) | (k >= m)):
        raise DomainError(f"basis index outside [0, {m})")
    residual = np.asarray(measured_phase) - wheel_phases(m)[k]
    bits = (np.asarray(circular_distance(residual, 0.0)) > 0.5 * np.pi).astype(np.uint8)
    if bits.ndim == 0:
        return int(bits)
    return bits


class BitSource:
    """Stand-in for the physical random generator: yields fresh bits per cycle."""

    def bits(self, count: int, cycle_index: int) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class SeededBitSource(BitSource):
    """Counter-based Philox stream keyed by (seed, cycle).

    Statistically good but fully determined by the 64-bit seed, which is the
    point for reproducible runs and the opposite of a physical generator.
    """

    seed: int

    def bits(self, count, cycle_index):
        ss = np.random.SeedSequence([self.seed & (2**64 - 1), cycle_index, 0x5EED])
        rng = np.random.Generator(np.random.Philox(ss))
        return rng.integers(0, 2, size=count, dtype=np.uint8)


class OsEntropySource(BitSource):
    def bits(self, count, cycle_index):
        raw = np.frombuffer(secrets.token_bytes((count + 7) // 8), dtype=np.uint8)
        return np.unpackbits(raw)[:count]


@dataclass
class StationState:
    role: str
    running_key: np.ndarray
    rng_seed: int
    cycle_index: int = 0
    source: BitSource | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise DomainError(f"role must be 'A' or 'B', got {self.role!r}")
        self.running_key = as_bits(self.running_key).copy()
        if self.source is None:
            self.source = SeededBitSource(self.rng_seed)


@dataclass
class CycleRecord:
    cycle_index: int
    sender_role: str
    plain_bits: np.ndarray
    bases_used: np.ndarray
    pulses: object  # channel.PulseRecords
    receiver_bits: np.ndarray
    receiver_ber: float
    key_bases: np.ndarray = field(repr=False, default=None)  # per-bit basis, both modes
    verification: Verification | None = None


def _cipher_bases(key: np.ndarray, params: SystemParams, use_lfsr: bool):
    """Return (bases recorded in the cycle record, basis for each fresh bit)."""
    kb = params.key_bits
    block_bases = blocks_to_bases(key, kb)
    if not use_lfsr:
        return block_bases, np.repeat(block_bases, kb)
    if kb < 3:
        raise ConfigurationError("LFSR ciphering needs K_M >= 3 (M >= 8)")
    nonzero = np.flatnonzero(block_bases)
    if nonzero.size == 0:
        raise ConfigurationError("running key has no non-zero block to seed the LFSR")
    seed_block = key.reshape(-1, kb)[nonzero[0]]
    stream = lfsr_expand(LfsrSpec(kb, tuple(seed_block)), key.size)
    per_bit = np.bitwise_xor(np.repeat(block_bases, kb), stream)
    return per_bit, per_bit


def run_cycle(sender: StationState, receiver: StationState, params: SystemParams,
              channel, use_lfsr: bool = False, check_bits: int = 0,
              hash_seed: int = 0) -> CycleRecord:
    """One sender -> receiver exchange; updates both stations in place."""
    if sender.cycle_index != receiver.cycle_index:
        raise ConfigurationError("stations disagree on the cycle index")
    key_bits = params.key_bits
    l0 = sender.running_key.size
    if l0 == 0 or l0 % key_bits:
        raise ConfigurationError(f"L0={l0} is not a positive multiple of K_M={key_bits}")
    if receiver.running_key.size != l0:
        raise ConfigurationError("stations hold running keys of different lengths")
    cycle = sender.cycle_index
    m = params.num_bases

    fresh = sender.source.bits(l0, cycle)
    recorded, send_bases = _cipher_bases(sender.running_key, params, use_lfsr)
    _, recv_bases = _cipher_bases(receiver.running_key, params, use_lfsr)

    pulses = channel.transmit(modulate(fresh, send_bases, m), cycle, observer="receiver")
    decoded = demodulate(pulses.combined_phase(), recv_bases, m)
    ber = float(np.mean(decoded != fresh))

    verification = None
    if check_bits:
        verification = reconcile_and_verify(fresh, decoded, check_bits, hash_seed + cycle)

    sender.running_key = fresh.copy()
    receiver.running_key = decoded.copy()
    sender.cycle_index += 1
    receiver.cycle_index += 1
    return CycleRecord(cycle, sender.role, fresh, recorded, pulses, decoded, ber,
                       send_bases, verification)


@dataclass(frozen=True)
class ProtocolSeeds:
    k0: np.ndarray
    seed_a: int
    seed_b: int
    hash_seed: int = 0


@dataclass
class Transcript:
    params: SystemParams
    records: list[CycleRecord]
    final_key_a: np.ndarray
    final_key_b: np.ndarray
    diverged: bool = False
    aborted: bool = False
    abort_report: str = ""

    @property
    def keys_match(self) -> bool:
        return bool(np.array_equal(self.final_key_a, self.final_key_b))


def make_stations(seeds: ProtocolSeeds, start_cycle: int = 0, key_a=None, key_b=None):
    k0 = as_bits(seeds.k0)
    a = StationState("A", k0 if key_a is None else key_a, seeds.seed_a, start_cycle)
    b = StationState("B", k0 if key_b is None else key_b, seeds.seed_b, start_cycle)
    return a, b


def run_protocol(cycles: int, params: SystemParams, channel, seeds: ProtocolSeeds,
                 use_lfsr: bool = False, check_bits: int = DEFAULT_CHECK_BITS,
                 start_cycle: int = 0, key_a=None, key_b=None) -> Transcript:
    """Run ``cycles`` exchanges, alternating the sender and starting with A on
    even cycle indices. A failed digest check stops the run and flags it."""
    if cycles < 1:
        raise DomainError(f"cycles must be >= 1, got {cycles}")
    a, b = make_stations(seeds, start_cycle, key_a, key_b)
    records: list[CycleRecord] = []
    aborted, report, diverged = False, "", False
    for _ in range(cycles):
        sender, receiver = (a, b) if a.cycle_index % 2 == 0 else (b, a)
        rec = run_cycle(sender, receiver, params, channel, use_lfsr, check_bits, seeds.hash_seed)
        records.append(rec)
        if not np.array_equal(a.running_key, b.running_key):
            diverged = True
        if rec.verification is not None and not rec.verification.verified:
            aborted, report = True, f"cycle {rec.cycle_index}: {rec.verification.report}"
            break
    return Transcript(params, records, a.running_key, b.running_key, diverged, aborted, report)


def rerun_cycle(transcript: Transcript, index: int, channel, seeds: ProtocolSeeds,
                use_lfsr: bool = False) -> CycleRecord:
    """Restart cycle ``index`` of a transcript from the last shared sequence."""
    records = transcript.records
    if not 0 <= index < len(records):
        raise DomainError(f"cycle {index} not in transcript")
    if index == 0:
        key_a = key_b = seeds.k0
    else:
        prev = records[index - 1]
        sent, got = prev.plain_bits, prev.receiver_bits
        key_a, key_b = (sent, got) if prev.sender_role == "A" else (got, sent)
    start = records[index].cycle_index
    a, b = make_stations(seeds, start, key_a, key_b)
    sender, receiver = (a, b) if start % 2 == 0 else (b, a)
    check = records[index].verification.check_bits if records[index].verification else 0
    return run_cycle(sender, receiver, transcript.params, channel, use_lfsr, check, seeds.hash_seed)


def distilled_length(l0: int, ratio: float) -> int:
    if not 0.0 < ratio <= 1.0:
        raise DomainError(f"ratio must lie in (0, 1], got {ratio}")
    return int(math.floor(l0 * ratio))
