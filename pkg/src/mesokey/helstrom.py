"""Eve's minimum bit-error probability for the M-ry phase wheel.

The phase-ciphered two-mode coherent states are expanded in the
angular-momentum basis ``|Phi_q>``, where q = (n2 - n1)/2 and the weight of
``|Phi_q>`` is ``exp(-x) I_{2|q|}(x)`` with x the photon number. Integer q is
the even-total-photon sector and half-integer q the odd sector.

A wheel rotation by ``phi`` multiplies ``|Phi_q>`` by ``exp(i phi q)``. Since
phi and phi + 2*pi are the same modulator setting but differ by
``(-1)**N`` on the state, the two photon-number parity sectors carry no
mutual coherence. Eve's error is therefore computed sector by sector
(``model="decohered"``, the default). ``model="coherent"`` keeps the
cross-sector terms, i.e. treats the states as pure with a fixed half-angle
lift. It reproduces the two-pure-state Helstrom formula at M=1 but
saturates well below 1/2 at large M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bessel import log_scaled_bessel, log_scaled_bessel_orders
from .errors import DomainError, NumericalError, TruncationError
from .mry import SystemParams, wheel_phases

DEFAULT_TAIL_EPSILON = 1e-14
EIGEN_FLOOR = 1e-13
MODELS = ("decohered", "coherent")
SECTORS = ("integer", "half", "full")


@dataclass(frozen=True)
class TruncationSpec:
    """q runs over [-max_order, max_order] (half-integer sector: up to max_order + 1/2)."""

    max_order: int
    tail_epsilon: float = DEFAULT_TAIL_EPSILON

    def __post_init__(self):
        if self.max_order < 0:
            raise DomainError(f"max_order must be non-negative, got {self.max_order}")
        if not self.tail_epsilon > 0:
            raise DomainError(f"tail_epsilon must be positive, got {self.tail_epsilon}")

    def doubled(self) -> TruncationSpec:
        return replace(self, max_order=max(1, 2 * self.max_order))

    def holds_for(self, x: float) -> bool:
        return log_scaled_bessel(2 * self.max_order, x) < math.log(self.tail_epsilon)


def truncation_order(n: float, eps: float = DEFAULT_TAIL_EPSILON) -> TruncationSpec:
    """Smallest Q with exp(-n) I_{2Q}(n) < eps."""
    if not n > 0:
        raise DomainError(f"photon number must be positive, got {n}")
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    log_eps = math.log(eps)
    # the weights decay like exp(-(2q)^2 / 2n) past the peak; start near the answer
    guess = max(0, int(0.5 * math.sqrt(2.0 * n * max(0.0, -log_eps))) - 2)
    q = guess
    while q > 0 and log_scaled_bessel(2 * q - 2, n) < log_eps:
        q -= 1
    while log_scaled_bessel(2 * q, n) >= log_eps:
        q += 1
    return TruncationSpec(q, eps)


def cipher_sum(d: float, m: int) -> complex:
    """(1/M) sum_k exp(i phi_k d) over the M wheel phases."""
    return complex(cipher_sums(np.asarray([d], dtype=float), m)[0])


def cipher_sums(ds: np.ndarray, m: int) -> np.ndarray:
    if m < 1:
        raise DomainError(f"M must be >= 1, got {m}")
    phases = wheel_phases(m)
    ds = np.asarray(ds, dtype=float)
    out = np.empty(ds.shape, dtype=complex)
    flat = ds.ravel()
    # chunk to bound the (len(d), M) temporary
    step = max(1, 2_000_000 // m)
    res = out.reshape(-1)
    for start in range(0, flat.size, step):
        block = flat[start:start + step]
        res[start:start + step] = np.exp(1j * np.outer(block, phases)).mean(axis=1)
    return out


def _bit_flip_factor(twice_d: np.ndarray) -> np.ndarray:
    # -2i sin(pi d/2) exp(i pi d/2) = 1 - exp(i pi d) = 1 - i**(2d), exact per residue
    table = np.array([0.0, 1.0 - 1.0j, 2.0, 1.0 + 1.0j])
    return table[np.mod(twice_d, 4)]


def sector_orders(sector: str, trunc: TruncationSpec) -> np.ndarray:
    """Angular-momentum indices q retained in a sector, ascending."""
    q = trunc.max_order
    integer = np.arange(-q, q + 1, dtype=float)
    half = np.arange(-q - 1, q + 1, dtype=float) + 0.5
    if sector == "integer":
        return integer
    if sector == "half":
        return half
    if sector == "full":
        return np.sort(np.concatenate([integer, half]))
    raise DomainError(f"unknown sector {sector!r}; expected one of {SECTORS}")


@dataclass(frozen=True)
class DeltaRhoMatrix:
    """rho_1 - rho_0 restricted to one sector of the |Phi_q> basis."""

    params: SystemParams
    truncation: TruncationSpec
    sector: str
    orders: np.ndarray = field(repr=False)
    entries: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def entry(self, q: float, q_prime: float) -> complex:
        i = int(np.searchsorted(self.orders, q))
        j = int(np.searchsorted(self.orders, q_prime))
        if self.orders[i] != q or self.orders[j] != q_prime:
            raise DomainError(f"({q}, {q_prime}) not in the retained index set")
        return complex(self.entries[i, j])

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0))

    def trace(self) -> complex:
        return complex(np.trace(self.entries))


def build_delta_rho(params: SystemParams, trunc: TruncationSpec | None = None,
                    sector: str = "integer") -> DeltaRhoMatrix:
    """Assemble the truncated Delta-rho for Eve's photon number r * <n>.

    Entries are ``(1 - exp(i pi d)) * exp(-x) sqrt(I_{2|q|} I_{2|q'|}) * c(d)``
    with d = q' - q and c the cipher sum; the Bessel product is formed in log
    space.
    """
    x = params.eve_photon_number
    if trunc is None:
        trunc = truncation_order(x)
    if not trunc.holds_for(x):
        raise TruncationError(
            f"Q={trunc.max_order} leaves weight >= {trunc.tail_epsilon:g} at x={x:g}")
    qs = sector_orders(sector, trunc)
    log_w = 0.5 * log_scaled_bessel_orders(2.0 * np.abs(qs), x)
    twice = np.rint(2.0 * qs).astype(np.int64)
    twice_d = twice[None, :] - twice[:, None]
    uniq, inverse = np.unique(twice_d, return_inverse=True)
    c = cipher_sums(uniq / 2.0, params.num_bases)
    factor = _bit_flip_factor(uniq) * c
    entries = factor[inverse.reshape(twice_d.shape)] * np.exp(log_w[:, None] + log_w[None, :])
    mat = DeltaRhoMatrix(params, trunc, sector, qs, entries)
    if abs(mat.trace()) > 1e-10:
        raise TruncationError(f"trace {mat.trace():.3e} is not zero")
    return mat


def positive_eigenvalue_sum(mat: DeltaRhoMatrix, method: str = "auto") -> float:
    """Sum of eigenvalues above the noise floor.

    Within a single parity sector only odd q' - q couple, so the matrix is
    bipartite between alternate q and its positive eigenvalues are the
    singular values of the off-diagonal block (``method="split"``).
    """
    if method == "auto":
        method = "dense" if mat.sector == "full" else "split"
    try:
        if method == "dense":
            lam = np.linalg.eigvalsh(mat.entries)
            return float(np.sum(lam[lam > EIGEN_FLOOR]))
        if method == "split":
            if mat.sector == "full":
                raise DomainError("the parity split needs a single-sector matrix")
            even = np.arange(0, mat.dimension, 2)
            odd = np.arange(1, mat.dimension, 2)
            sv = np.linalg.svd(mat.entries[np.ix_(even, odd)], compute_uv=False)
            return float(np.sum(sv[sv > EIGEN_FLOOR]))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    raise DomainError(f"unknown eigen method {method!r}")


@dataclass(frozen=True)
class PeResult:
    pe: float
    positive_eigenvalue_sum: float
    truncation: TruncationSpec
    model: str = "decohered"


def min_error_probability(params: SystemParams, trunc: TruncationSpec | None = None,
                          model: str = "decohered", method: str = "auto") -> PeResult:
    """Eve's minimum bit error, (1 - sum of positive eigenvalues) / 2, equal priors."""
    if model not in MODELS:
        raise DomainError(f"unknown model {model!r}; expected one of {MODELS}")
    x = params.eve_photon_number
    if trunc is None:
        trunc = truncation_order(x)
    sectors = ("integer", "half") if model == "decohered" else ("full",)
    total = sum(positive_eigenvalue_sum(build_delta_rho(params, trunc, s), method) for s in sectors)
    if total > 1.0 + 1e-10:
        raise NumericalError(f"positive eigenvalue sum {total!r} exceeds 1")
    pe = min(0.5, max(0.0, 0.5 * (1.0 - total)))
    return PeResult(pe, total, trunc, model)


def repetition_equivalent_pe(params: SystemParams, **kwargs) -> PeResult:
    """r repetitions at <n> are worth one shot at r<n>."""
    single = SystemParams(params.mean_photon_number * params.repetition, params.num_bases,
                          1, params.transmittance)
    return min_error_probability(single, **kwargs)


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def eve_mutual_information(pe: float) -> float:
    """Bits per bit Eve learns from a bit-by-bit attack with error ``pe``."""
    return 1.0 - binary_entropy(pe)


def information_balance(ber_bob: float, ber_eve: float, l0: int) -> float:
    """L0 * (h(ber_eve) - h(ber_bob)), clamped to [-L0, L0]."""
    if l0 < 1:
        raise DomainError(f"L0 must be >= 1, got {l0}")
    delta = l0 * (binary_entropy(ber_eve) - binary_entropy(ber_bob))
    return max(-float(l0), min(float(l0), delta))


@dataclass(frozen=True)
class PePoint:
    m: int
    n: float
    pe: float

    @property
    def mi(self) -> float:
        return eve_mutual_information(self.pe)


@dataclass(frozen=True)
class PeCurve:
    n: float
    points: tuple[PePoint, ...]

    @property
    def ms(self) -> list[int]:
        return [p.m for p in self.points]

    @property
    def pes(self) -> list[float]:
        return [p.pe for p in self.points]

    @property
    def mis(self) -> list[float]:
        return [p.mi for p in self.points]


def pe_curve(m_values, n: float, repetition: int = 1, eps: float = DEFAULT_TAIL_EPSILON,
             model: str = "decohered") -> PeCurve:
    m_values = [int(m) for m in m_values]
    if not m_values:
        raise DomainError("M list is empty")
    trunc = truncation_order(n * repetition, eps)
    points = []
    for m in m_values:
        res = min_error_probability(SystemParams(n, m, repetition), trunc, model=model)
        points.append(PePoint(m, n, res.pe))
    return PeCurve(n, tuple(points))
