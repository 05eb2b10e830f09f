"""Shot-noise phase channel and eavesdropper strategies.

Phase noise is the Gaussian approximation eps ~ N(0, 1/n_eff): the receiver
sees n_eff = eta * <n>, Eve taps at the source and sees n_eff = <n>. Each bit
is carried by r pulses with independent noise, combined by circular mean.

Random streams are Philox generators keyed by (seed, cycle or chunk,
observer) so that every number is reproducible and Monte Carlo totals do not
depend on how chunks are spread over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .mry import SystemParams, circular_distance, wrap_phase
from .protocol import demodulate, modulate

STRATEGIES = ("nearest", "map", "keyed")
CHUNK_TRIALS = 1 << 16
_OBSERVER_TAG = {"receiver": 1, "eve": 2}


def derived_rng(seed: int, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed & (2**64 - 1), *path])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class MeasurementRecord:
    true_phase: float
    measured_phase: float
    pulse_index: int
    repetition_index: int


@dataclass(frozen=True)
class PulseRecords:
    """Struct-of-arrays view of many MeasurementRecords, bit-major."""

    true_phase: np.ndarray
    measured_phase: np.ndarray
    repetition: int

    def __len__(self):
        return self.true_phase.size

    def __getitem__(self, i) -> MeasurementRecord:
        return MeasurementRecord(float(self.true_phase[i]), float(self.measured_phase[i]),
                                 int(i) // self.repetition, int(i) % self.repetition)

    @property
    def num_bits(self) -> int:
        return self.true_phase.size // self.repetition

    def combined_phase(self) -> np.ndarray:
        """Circular mean of each bit's r measured phases."""
        if self.repetition == 1:
            return self.measured_phase
        return circular_mean(self.measured_phase.reshape(-1, self.repetition), axis=1)


def phase_noise_std(params: SystemParams, observer: str = "receiver") -> float:
    if observer == "receiver":
        return 1.0 / math.sqrt(params.receiver_photon_number)
    if observer == "eve":
        return 1.0 / math.sqrt(params.mean_photon_number)
    raise DomainError(f"unknown observer {observer!r}")


def transmit_many(true_phases, params: SystemParams, rng: np.random.Generator,
                  observer: str = "receiver", noiseless: bool = False) -> PulseRecords:
    """Send each bit phase as r pulses and return the noisy readings."""
    true = np.repeat(np.asarray(true_phases, dtype=float), params.repetition)
    if noiseless:
        measured = true.copy()
    else:
        measured = wrap_phase(true + rng.normal(0.0, phase_noise_std(params, observer), true.size))
    return PulseRecords(true, np.atleast_1d(measured), params.repetition)


def transmit(true_phase: float, params: SystemParams, rng: np.random.Generator,
             observer: str = "receiver", noiseless: bool = False) -> list[MeasurementRecord]:
    recs = transmit_many([true_phase], params, rng, observer, noiseless)
    return [recs[i] for i in range(len(recs))]


@dataclass(frozen=True)
class ShotNoiseChannel:
    """Channel object handed to :func:`mesokey.protocol.run_cycle`."""

    params: SystemParams
    seed: int = 0
    noiseless: bool = False

    def transmit(self, true_phases, cycle_index: int, observer: str = "receiver") -> PulseRecords:
        rng = derived_rng(self.seed, cycle_index, _OBSERVER_TAG[observer])
        return transmit_many(true_phases, self.params, rng, observer, self.noiseless)


def _phases(record_or_phase) -> np.ndarray:
    if isinstance(record_or_phase, MeasurementRecord):
        return np.asarray(record_or_phase.measured_phase)
    if isinstance(record_or_phase, PulseRecords):
        return record_or_phase.combined_phase()
    return np.asarray(record_or_phase, dtype=float)


def _scalar_or_array(bits):
    return int(bits) if np.ndim(bits) == 0 else bits


def wheel_grid(m: int) -> tuple[np.ndarray, np.ndarray]:
    """The 2M points {phi_k, phi_k + pi} with the bit each one encodes."""
    k = np.arange(m)
    phases = np.concatenate([modulate(0, k, m), modulate(1, k, m)])
    bits = np.concatenate([np.zeros(m, np.uint8), np.ones(m, np.uint8)])
    return phases, bits


def _grid_bit(j: np.ndarray, m: int) -> np.ndarray:
    j = np.mod(j, 2 * m)
    k = j % m
    return (j != (k + m * (k % 2)) % (2 * m)).astype(np.uint8)


def eve_nearest_level(record, m: int):
    """Snap to the nearest of the 2M wheel points and read off its bit.

    The grid is exactly {j pi / M}; point j belongs to basis j mod M and
    encodes bit 0 iff it coincides with phi_{j mod M}.
    """
    phi = _phases(record)
    return _scalar_or_array(_grid_bit(np.rint(phi * m / np.pi).astype(np.int64), m))


def eve_map_guess(record, m: int, n: float):
    """Maximum-likelihood bit under Gaussian phase noise of variance 1/n, summed
    over all M bases; ties read as 0.

    Grid points further than 12 sigma contribute below exp(-72) relative to
    the nearest one and are skipped.
    """
    if not n > 0:
        raise DomainError(f"photon number must be positive, got {n}")
    raw = _phases(record)
    u = np.atleast_1d(raw) * m / np.pi
    half_width = int(math.ceil(12.0 / math.sqrt(n) * m / np.pi)) + 1
    if 2 * half_width + 2 >= 2 * m:
        offsets = np.arange(2 * m)
        base = np.zeros(u.size, dtype=np.int64)
    else:
        offsets = np.arange(-half_width, half_width + 2)
        base = np.floor(u).astype(np.int64)
    j_lo = int(base.min(initial=0)) + int(offsets[0])
    j_hi = int(base.max(initial=0)) + int(offsets[-1])
    bit_lut = _grid_bit(np.arange(j_lo, j_hi + 1), m) == 1
    out = np.empty(u.size, dtype=np.uint8)
    step = max(1, 4_000_000 // offsets.size)
    spacing = np.pi / m
    for s in range(0, u.size, step):
        j = base[s:s + step, None] + offsets[None, :]
        t = np.abs(u[s:s + step, None] - j)
        t = np.minimum(t, 2 * m - t)
        ll = -0.5 * n * (t * spacing) ** 2
        w = np.exp(ll - ll.max(axis=1, keepdims=True))
        ones = bit_lut[j - j_lo]
        out[s:s + step] = np.where(ones, w, 0.0).sum(axis=1) > np.where(ones, 0.0, w).sum(axis=1)
    return _scalar_or_array(out if np.ndim(raw) else out[0])


def eve_keyed_replay(records: PulseRecords, key_bases, m: int) -> np.ndarray:
    """Demodulate stored pulses with the key once it becomes known."""
    key_bases = np.asarray(key_bases, dtype=np.int64)
    if len(records) == 0 and key_bases.size == 0:
        return np.zeros(0, dtype=np.uint8)
    if records.num_bits != key_bases.size or len(records) != key_bases.size * records.repetition:
        raise DomainError(
            f"{len(records)} records do not align with {key_bases.size} bases x r={records.repetition}")
    return np.atleast_1d(demodulate(records.combined_phase(), key_bases, m)).astype(np.uint8)


@dataclass(frozen=True)
class BerEstimate:
    ber: float
    std_error: float
    trials: int
    errors: int = 0

    @classmethod
    def from_counts(cls, errors: int, trials: int) -> BerEstimate:
        p = errors / trials
        return cls(p, math.sqrt(p * (1.0 - p) / trials), trials, errors)


def _chunk_errors(strategy: str, params: SystemParams, seed: int, chunk: int, size: int) -> int:
    rng = derived_rng(seed, chunk, 0xE5E)
    m = params.num_bases
    bits = rng.integers(0, 2, size=size, dtype=np.uint8)
    bases = rng.integers(0, m, size=size)
    recs = transmit_many(modulate(bits, bases, m), params, rng, observer="eve")
    if strategy == "nearest":
        guess = eve_nearest_level(recs.combined_phase(), m)
    elif strategy == "map":
        guess = eve_map_guess(recs.combined_phase(), m, params.eve_photon_number)
    else:
        guess = eve_keyed_replay(recs, bases, m)
    return int(np.count_nonzero(np.atleast_1d(guess) != bits))


def monte_carlo_ber(strategy: str, params: SystemParams, trials: int, seed: int = 0,
                    workers: int = 1) -> BerEstimate:
    """Eve's bit error rate for one strategy over ``trials`` random bits.

    Trials are cut into fixed chunks of CHUNK_TRIALS with per-chunk seeds, so
    the estimate is identical for any worker count.
    """
    if strategy not in STRATEGIES:
        raise DomainError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if trials < 1000:
        raise DomainError(f"need at least 1000 trials, got {trials}")
    sizes = [min(CHUNK_TRIALS, trials - s) for s in range(0, trials, CHUNK_TRIALS)]
    jobs = list(enumerate(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            counts = list(pool.map(lambda job: _chunk_errors(strategy, params, seed, *job), jobs))
    else:
        counts = [_chunk_errors(strategy, params, seed, c, s) for c, s in jobs]
    return BerEstimate.from_counts(sum(counts), trials)


@dataclass(frozen=True)
class XorMismatch:
    rate: float
    single_read_ber: float
    std_error: float
    trials: int

    @property
    def expected(self) -> float:
        p = self.single_read_ber
        return 2.0 * p * (1.0 - p)


def keyless_xor_mismatch(params: SystemParams, trials: int, seed: int = 0,
                         noiseless: bool = False, bit: int | None = None,
                         basis: int | None = None) -> XorMismatch:
    """Send one fixed bit in one fixed basis over and over; a keyless reader
    decodes two pulses per trial and XORs them.

    Both reads share the true phase, so each is wrong with the same p
    independently and they disagree at rate 2p(1-p). The bit and basis are
    drawn once from the seed unless given. Mixing positions would not do:
    p varies around the wheel and the mixture falls below 2p(1-p).
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    rng = derived_rng(seed, 0x0A0B)
    m = params.num_bases
    if bit is None:
        bit = int(rng.integers(0, 2))
    if basis is None:
        basis = int(rng.integers(0, m))
    phase = np.full(trials, modulate(bit, basis, m))
    first = transmit_many(phase, params, rng, "eve", noiseless)
    second = transmit_many(phase, params, rng, "eve", noiseless)
    r1 = np.atleast_1d(eve_nearest_level(first.combined_phase(), m))
    r2 = np.atleast_1d(eve_nearest_level(second.combined_phase(), m))
    rate = float(np.mean(r1 != r2))
    p = float(np.mean(np.concatenate([r1 != bit, r2 != bit])))
    return XorMismatch(rate, p, math.sqrt(rate * (1.0 - rate) / trials), trials)


def circular_mean(phases, axis=-1) -> np.ndarray:
    return wrap_phase(np.angle(np.exp(1j * np.asarray(phases)).sum(axis=axis)))

