import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mesokey.bessel import log_scaled_bessel
from mesokey.errors import DomainError, TruncationError
from mesokey.helstrom import (TruncationSpec, binary_entropy, build_delta_rho, cipher_sum,
                              cipher_sums, eve_mutual_information, information_balance,
                              min_error_probability, pe_curve, positive_eigenvalue_sum,
                              repetition_equivalent_pe, sector_orders, truncation_order)
from mesokey.mry import SystemParams, wheel_phases


def closed_form(n):
    return 0.5 * (1 - math.sqrt(1 - math.exp(-2 * n)))


def scan_oracle(n, eps):
    q = 0
    while math.exp(-n) * float(__import__("mpmath").besseli(2 * q, n)) >= eps:
        q += 1
    return q


@pytest.mark.parametrize("n,q", [(1, 7), (10, 15), (100, 39), (1000, 119)])
def test_truncation_order_frozen(n, q):
    assert truncation_order(n).max_order == q


@pytest.mark.parametrize("n", [0.3, 1, 10, 100])
def test_truncation_order_matches_scan(n):
    assert truncation_order(n).max_order == scan_oracle(n, 1e-14)


def test_truncation_order_zero_when_eps_large():
    n = 2.0
    w0 = math.exp(log_scaled_bessel(0, n))
    assert truncation_order(n, eps=w0 * 1.01).max_order == 0


def test_truncation_spec_validation():
    with pytest.raises(DomainError):
        TruncationSpec(-1)
    with pytest.raises(DomainError):
        TruncationSpec(3, 0.0)
    assert TruncationSpec(3).doubled().max_order == 6
    assert TruncationSpec(0).doubled().max_order == 1


def test_cipher_sum_examples():
    assert cipher_sum(0, 17) == pytest.approx(1.0)
    assert cipher_sum(1, 2) == pytest.approx(0.5 - 0.5j, abs=1e-15)
    for m in (2, 4, 8, 32):
        for d in range(2, 4 * m, 2):
            if d % (2 * m):
                assert abs(cipher_sum(d, m)) < 1e-12


def test_cipher_sum_direct_oracle():
    rng = random.Random(5)
    for _ in range(50):
        m = rng.randint(1, 64)
        d = rng.randint(-200, 200) + rng.choice([0, 0.5])
        want = sum(np.exp(1j * p * d) for p in wheel_phases(m)) / m
        assert cipher_sum(d, m) == pytest.approx(want, abs=1e-12)


def test_cipher_sum_bounded_sampled():
    rng = np.random.default_rng(1)
    for m in rng.integers(1, 4097, size=20):
        ds = rng.integers(-480, 481, size=200)
        assert np.all(np.abs(cipher_sums(ds, int(m))) <= 1 + 1e-12)


def test_sector_orders():
    t = TruncationSpec(2)
    assert list(sector_orders("integer", t)) == [-2, -1, 0, 1, 2]
    assert list(sector_orders("half", t)) == [-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]
    assert len(sector_orders("full", t)) == 11
    with pytest.raises(DomainError):
        sector_orders("odd", t)


@pytest.mark.parametrize("sector", ["integer", "half", "full"])
@pytest.mark.parametrize("m,n", [(1, 1), (4, 10), (32, 100), (7, 3)])
def test_delta_rho_invariants(sector, m, n):
    mat = build_delta_rho(SystemParams(n, m), sector=sector)
    assert mat.hermiticity_error() <= 1e-12
    assert abs(mat.trace()) <= 1e-10
    q = mat.orders
    even_diff = (np.subtract.outer(q, q) % 2) == 0
    assert np.all(mat.entries[even_diff] == 0)


def test_delta_rho_entry_lookup():
    mat = build_delta_rho(SystemParams(1, 4))
    assert mat.entry(0, 2) == 0
    assert mat.entry(1, 0) == np.conj(mat.entry(0, 1))
    with pytest.raises(DomainError):
        mat.entry(0.5, 0)


def test_delta_rho_entry_formula():
    # spot check one entry against the closed expression
    n, m = 3.0, 4
    mat = build_delta_rho(SystemParams(n, m))
    q, qp = -1, 2
    d = qp - q
    w = math.exp(0.5 * (log_scaled_bessel(2, n) + log_scaled_bessel(4, n)))
    want = (1 - np.exp(1j * math.pi * d)) * w * cipher_sum(d, m)
    assert mat.entry(q, qp) == pytest.approx(want, abs=1e-14)


def test_insufficient_truncation_raises():
    with pytest.raises(TruncationError):
        build_delta_rho(SystemParams(100, 4), TruncationSpec(5))


def test_full_sector_m1_closed_form():
    mat = build_delta_rho(SystemParams(1, 1), sector="full")
    assert positive_eigenvalue_sum(mat) == pytest.approx(math.sqrt(1 - math.exp(-2)), abs=1e-12)


@pytest.mark.parametrize("n", [0.1, 1, 10])
def test_coherent_model_m1_closed_form(n):
    res = min_error_probability(SystemParams(n, 1), model="coherent")
    assert res.pe == pytest.approx(closed_form(n), abs=1e-12)


@pytest.mark.parametrize("n", [0.1, 1, 10])
def test_decohered_model_m1_value(n):
    # the two photon-number-parity sectors each discriminate perfectly up to vacuum-like overlap
    assert min_error_probability(SystemParams(n, 1)).pe == pytest.approx(0.5 * math.exp(-2 * n), abs=1e-12)


@pytest.mark.parametrize("m,n,pe", [
    (2, 1, 0.173750893423042),
    (4, 1, 0.37624514589358526),
    (8, 1, 0.4445260229711469),
    (16, 10, 0.4669850856773726),
    (32, 100, 0.4757769915097179),
    (64, 100, 0.4919317201597645),
    (8, 100, 0.009526472512893736),
])
def test_pe_frozen(m, n, pe):
    assert min_error_probability(SystemParams(n, m)).pe == pytest.approx(pe, abs=1e-12)


@pytest.mark.parametrize("m,n", [(1, 1), (3, 2), (8, 10), (32, 100), (17, 40)])
def test_dense_and_split_paths_agree(m, n):
    p = SystemParams(n, m)
    a = min_error_probability(p, method="dense").positive_eigenvalue_sum
    b = min_error_probability(p, method="split").positive_eigenvalue_sum
    assert a == pytest.approx(b, abs=1e-10)


def test_split_needs_single_sector():
    mat = build_delta_rho(SystemParams(1, 2), sector="full")
    with pytest.raises(DomainError):
        positive_eigenvalue_sum(mat, method="split")


def test_eigen_sum_relations():
    mat = build_delta_rho(SystemParams(10, 8), sector="full")
    lam = np.linalg.eigvalsh(mat.entries)
    assert lam[lam > 0].sum() == pytest.approx(-lam[lam < 0].sum(), abs=1e-10)
    assert lam[lam > 0].sum() <= 1 + 1e-10


def test_pe_result_consistency():
    res = min_error_probability(SystemParams(10, 8))
    assert res.pe == pytest.approx(0.5 * (1 - res.positive_eigenvalue_sum), abs=1e-12)
    assert 0 <= res.pe <= 0.5


def test_unknown_model():
    with pytest.raises(DomainError):
        min_error_probability(SystemParams(1, 2), model="quantum")


@pytest.mark.parametrize("m,n", [(2, 1), (8, 10), (32, 100), (5, 3)])
def test_doubling_truncation_is_stable(m, n):
    p = SystemParams(n, m)
    t = truncation_order(n)
    a = min_error_probability(p, t).pe
    b = min_error_probability(p, t.doubled()).pe
    assert abs(a - b) < 1e-8


def test_repetition_identity():
    p = SystemParams(100, 32, 10)
    assert repetition_equivalent_pe(p).pe == min_error_probability(SystemParams(1000, 32)).pe
    q = SystemParams(7, 6)
    assert repetition_equivalent_pe(q).pe == min_error_probability(q).pe


def test_pe_curve_shape_small():
    curve = pe_curve([2, 4, 8, 16], 1.0)
    assert curve.ms == [2, 4, 8, 16]
    assert all(a <= b + 1e-6 for a, b in zip(curve.pes, curve.pes[1:]))
    assert all(a >= b - 1e-6 for a, b in zip(curve.mis, curve.mis[1:]))
    with pytest.raises(DomainError):
        pe_curve([], 1.0)


def test_mutual_information():
    assert eve_mutual_information(0.5) == 0.0
    assert eve_mutual_information(0.0) == 1.0
    assert eve_mutual_information(0.476) == pytest.approx(0.00166, abs=1e-5)
    with pytest.raises(DomainError):
        eve_mutual_information(1.2)


@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_mutual_information_monotone_and_symmetric(a, b):
    lo, hi = min(a, b), max(a, b)
    if hi - lo > 1e-9:
        assert eve_mutual_information(lo) > eve_mutual_information(hi)
    assert eve_mutual_information(a) == pytest.approx(eve_mutual_information(1 - a), abs=1e-12)


def test_information_balance():
    assert information_balance(0.0, 0.5, 1024) == 1024
    assert information_balance(0.2, 0.2, 50) == 0.0
    assert information_balance(0.0, 0.476, 10 ** 6) == pytest.approx(998_337.3765, abs=1e-3)
    assert information_balance(0.5, 0.0, 8) == -8
    with pytest.raises(DomainError):
        information_balance(0.0, 0.5, 0)
    assert binary_entropy(0.5) == 1.0


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 40), st.floats(0.2, 30.0))
def test_pe_in_range(m, n):
    res = min_error_probability(SystemParams(n, m))
    assert 0.0 <= res.pe <= 0.5
