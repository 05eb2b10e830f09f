import math

import numpy as np
import pytest

from mesokey.channel import (BerEstimate, CHUNK_TRIALS, MeasurementRecord, PulseRecords,
                             ShotNoiseChannel, circular_mean, derived_rng, eve_keyed_replay,
                             eve_map_guess, eve_nearest_level, keyless_xor_mismatch,
                             monte_carlo_ber, phase_noise_std, transmit, transmit_many,
                             wheel_grid)
from mesokey.errors import DomainError
from mesokey.helstrom import min_error_probability
from mesokey.mry import SystemParams
from mesokey.protocol import demodulate, modulate


def test_noiseless_transmit():
    p = SystemParams(100, 8)
    recs = transmit(1.0, p, derived_rng(0), noiseless=True)
    assert len(recs) == 1 and recs[0].measured_phase == 1.0
    assert isinstance(recs[0], MeasurementRecord)


def test_repetition_records():
    p = SystemParams(100, 8, repetition=3)
    recs = transmit(2.0, p, derived_rng(0))
    assert [r.repetition_index for r in recs] == [0, 1, 2]
    assert all(0 <= r.measured_phase < 2 * math.pi for r in recs)


def test_noise_std_moment():
    p = SystemParams(100, 8)
    rec = transmit_many(np.full(100_000, math.pi), p, derived_rng(1))
    eps = rec.measured_phase - rec.true_phase
    s = eps.std()
    assert abs(s - 0.1) <= 3 * 0.1 / math.sqrt(2 * 100_000)


def test_repetition_average_std():
    p = SystemParams(100, 8, repetition=4)
    rec = transmit_many(np.full(100_000, math.pi), p, derived_rng(2))
    s = (rec.combined_phase() - math.pi).std()
    assert abs(s - 0.05) <= 3 * 0.05 / math.sqrt(2 * 100_000)


def test_transmittance_only_hits_receiver():
    p = SystemParams(100, 8, transmittance=0.25)
    assert phase_noise_std(p, "receiver") == pytest.approx(0.2)
    assert phase_noise_std(p, "eve") == pytest.approx(0.1)
    with pytest.raises(DomainError):
        phase_noise_std(p, "bob")


def test_channel_streams_are_keyed():
    p = SystemParams(10, 8)
    ch = ShotNoiseChannel(p, 3)
    a = ch.transmit([0.0] * 10, 0).measured_phase
    assert np.array_equal(a, ch.transmit([0.0] * 10, 0).measured_phase)
    assert not np.array_equal(a, ch.transmit([0.0] * 10, 1).measured_phase)
    assert not np.array_equal(a, ch.transmit([0.0] * 10, 0, observer="eve").measured_phase)


def test_pulse_records_indexing():
    pr = PulseRecords(np.arange(6.0), np.arange(6.0), 2)
    assert len(pr) == 6 and pr.num_bits == 3
    r = pr[3]
    assert (r.pulse_index, r.repetition_index) == (1, 1)


def test_circular_mean_wraps():
    assert circular_mean([2 * math.pi - 0.1, 0.1]) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("m", [1, 2, 8, 32])
def test_nearest_level_on_grid(m):
    phases, bits = wheel_grid(m)
    assert np.array_equal(eve_nearest_level(phases, m), bits)
    assert eve_nearest_level(MeasurementRecord(phases[1], phases[1], 0, 0), m) == bits[1]


@pytest.mark.parametrize("m", [2, 8, 32])
def test_map_on_grid(m):
    phases, bits = wheel_grid(m)
    assert np.array_equal(eve_map_guess(phases, m, 1e4), bits)


def test_map_brute_force_oracle():
    m, n = 8, 3.0
    rng = np.random.default_rng(0)
    phi = rng.uniform(0, 2 * math.pi, 2000)
    phases, bits = wheel_grid(m)
    d = np.abs(phi[:, None] - phases[None, :])
    d = np.minimum(d, 2 * math.pi - d)
    w = np.exp(-0.5 * n * d ** 2)
    want = (w[:, bits == 1].sum(1) > w[:, bits == 0].sum(1)).astype(np.uint8)
    assert np.array_equal(eve_map_guess(phi, m, n), want)
    with pytest.raises(DomainError):
        eve_map_guess(phi, m, 0.0)


def test_nearest_m1_n100_is_clean():
    est = monte_carlo_ber("nearest", SystemParams(100, 1), 100_000, seed=1)
    assert est.ber == 0.0


def test_keyed_replay():
    p = SystemParams(100, 32)
    rng = derived_rng(4)
    bits = rng.integers(0, 2, 100_000, dtype=np.uint8)
    bases = rng.integers(0, 32, 100_000)
    recs = transmit_many(modulate(bits, bases, 32), p, rng)
    assert np.array_equal(eve_keyed_replay(recs, bases, 32), demodulate(recs.combined_phase(), bases, 32))
    wrong = rng.integers(0, 32, 100_000)
    ber = np.mean(eve_keyed_replay(recs, wrong, 32) != bits)
    assert abs(ber - 0.5) < 0.01
    empty = PulseRecords(np.zeros(0), np.zeros(0), 1)
    assert eve_keyed_replay(empty, [], 32).size == 0
    with pytest.raises(DomainError):
        eve_keyed_replay(recs, bases[:-1], 32)


def test_monte_carlo_frozen_and_deterministic():
    p = SystemParams(1, 8)
    a = monte_carlo_ber("nearest", p, 100_000, seed=7)
    assert a == monte_carlo_ber("nearest", p, 100_000, seed=7)
    assert a.errors == 48848
    assert monte_carlo_ber("map", p, 100_000, seed=7).errors == 45466
    assert monte_carlo_ber("keyed", p, 100_000, seed=7).errors == 11831


def test_monte_carlo_workers_independent():
    p = SystemParams(10, 16)
    trials = 3 * CHUNK_TRIALS + 123
    a = monte_carlo_ber("map", p, trials, seed=2, workers=1)
    b = monte_carlo_ber("map", p, trials, seed=2, workers=4)
    assert a == b


def test_monte_carlo_errors():
    p = SystemParams(10, 16)
    with pytest.raises(DomainError):
        monte_carlo_ber("guess", p, 10_000)
    with pytest.raises(DomainError):
        monte_carlo_ber("nearest", p, 999)


def test_ber_estimate_std():
    e = BerEstimate.from_counts(250, 1000)
    assert e.std_error == pytest.approx(math.sqrt(0.25 * 0.75 / 1000))


def test_keyed_zero_at_n100():
    assert monte_carlo_ber("keyed", SystemParams(100, 64), 1_000_000, seed=1).ber == 0.0


def test_map_not_worse_than_nearest():
    p = SystemParams(100, 32)
    a = monte_carlo_ber("nearest", p, 200_000, seed=3)
    b = monte_carlo_ber("map", p, 200_000, seed=3)
    assert b.ber <= a.ber + 3 * math.hypot(a.std_error, b.std_error)


@pytest.mark.parametrize("m,n", [(8, 1), (16, 10), (32, 100)])
def test_strategies_above_helstrom(m, n):
    p = SystemParams(n, m)
    floor = min_error_probability(p).pe
    for s in ("nearest", "map"):
        est = monte_carlo_ber(s, p, 200_000, seed=5)
        assert est.ber >= floor - 3 * est.std_error


@pytest.mark.parametrize("m,n", [(32, 100), (64, 100), (16, 10)])
def test_key_advantage(m, n):
    p = SystemParams(n, m)
    assert m / (math.pi * math.sqrt(n)) >= 1
    a = monte_carlo_ber("nearest", p, 100_000, seed=6)
    k = monte_carlo_ber("keyed", p, 100_000, seed=6)
    assert a.ber - k.ber > 5 * math.hypot(a.std_error, k.std_error)


def test_repetition_matches_single_shot():
    rep = monte_carlo_ber("nearest", SystemParams(25, 16, repetition=4), 200_000, seed=8)
    one = monte_carlo_ber("nearest", SystemParams(100, 16), 200_000, seed=9)
    assert abs(rep.ber - one.ber) <= 3 * math.hypot(rep.std_error, one.std_error)


def test_xor_mismatch():
    x = keyless_xor_mismatch(SystemParams(100, 32), 100_000, seed=3)
    assert x.rate == pytest.approx(0.49801)
    seam = keyless_xor_mismatch(SystemParams(100, 32), 100_000, seed=3, bit=1, basis=0)
    assert abs(seam.rate - seam.expected) <= 3 * seam.std_error and seam.single_read_ber < 0.4
    assert abs(x.rate - x.expected) <= 3 * x.std_error
    assert keyless_xor_mismatch(SystemParams(100, 32), 1000, noiseless=True).rate == 0.0
    big = keyless_xor_mismatch(SystemParams(1, 4096), 100_000, seed=1)
    assert abs(big.rate - 0.5) < 0.01
    with pytest.raises(DomainError):
        keyless_xor_mismatch(SystemParams(1, 4), 0)
