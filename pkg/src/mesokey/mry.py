"""Closed-form geometry of the M-ry cipher wheel.

Phases live in radians and are reduced into ``[0, 2*pi)``. Overlaps are the
squared moduli of two-mode coherent-state inner products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, DomainError

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-9


def wrap_phase(phi):
    """Reduce a phase (scalar or array) into ``[0, 2*pi)``."""
    out = np.mod(phi, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def circular_distance(a, b):
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), TWO_PI))
    d = np.minimum(d, TWO_PI - d)
    if np.ndim(d) == 0:
        return float(d)
    return d


def angles_equal(a: float, b: float, tol: float = ANGLE_TOL) -> bool:
    return circular_distance(a, b) <= tol


@dataclass(frozen=True)
class SystemParams:
    """The (<n>, M, r, eta) operating point.

    ``mean_photon_number`` is photons per bit, ``num_bases`` the number of
    wheel bases, ``repetition`` how many pulses carry each bit and
    ``transmittance`` the channel efficiency seen by the legitimate receiver.
    """

    mean_photon_number: float
    num_bases: int
    repetition: int = 1
    transmittance: float = 1.0

    def __post_init__(self):
        if not (self.mean_photon_number > 0) or not math.isfinite(self.mean_photon_number):
            raise DomainError(f"mean_photon_number must be positive, got {self.mean_photon_number}")
        if int(self.num_bases) != self.num_bases or self.num_bases < 1:
            raise DomainError(f"num_bases must be a positive integer, got {self.num_bases}")
        if int(self.repetition) != self.repetition or self.repetition < 1:
            raise DomainError(f"repetition must be a positive integer, got {self.repetition}")
        if not (0.0 < self.transmittance <= 1.0):
            raise DomainError(f"transmittance must lie in (0, 1], got {self.transmittance}")
        object.__setattr__(self, "num_bases", int(self.num_bases))
        object.__setattr__(self, "repetition", int(self.repetition))

    @property
    def alpha(self) -> float:
        return math.sqrt(self.mean_photon_number)

    @property
    def is_power_of_two(self) -> bool:
        m = self.num_bases
        return m >= 2 and (m & (m - 1)) == 0

    @property
    def key_bits(self) -> int:
        """K_M = log2(M); only defined for power-of-two M >= 2."""
        if not self.is_power_of_two:
            raise ConfigurationError(
                f"protocol operations need M to be a power of two >= 2, got M={self.num_bases}")
        return self.num_bases.bit_length() - 1

    @property
    def eve_photon_number(self) -> float:
        # Eve samples at the source, so transmittance never helps or hurts her.
        return self.repetition * self.mean_photon_number

    @property
    def receiver_photon_number(self) -> float:
        return self.transmittance * self.mean_photon_number


@dataclass(frozen=True)
class WheelPhase:
    basis_index: int
    phase: float


@dataclass(frozen=True)
class PoincarePoint:
    theta: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise DomainError(f"theta must lie in [0, pi], got {self.theta}")
        object.__setattr__(self, "phi", wrap_phase(self.phi))


def _check_basis(k: int, m: int) -> None:
    if m < 1:
        raise DomainError(f"M must be >= 1, got {m}")
    if not (0 <= k < m):
        raise DomainError(f"basis index {k} outside [0, {m})")


def cipher_phase(k: int, m: int) -> WheelPhase:
    """Wheel position of basis ``k``: odd bases sit half a turn away so that
    neighbouring positions carry opposite bit values."""
    _check_basis(k, m)
    odd = k % 2
    return WheelPhase(k, wrap_phase(math.pi * (k / m + odd)))


def wheel_phases(m: int) -> np.ndarray:
    """All M wheel phases as an array, same values as :func:`cipher_phase`."""
    if m < 1:
        raise DomainError(f"M must be >= 1, got {m}")
    k = np.arange(m)
    return wrap_phase(np.pi * (k / m + (k % 2)))


def bases_overlap(delta_phi: float, n: float) -> float:
    """|<psi(phi)|psi(phi + delta_phi)>|^2 for states on one great circle."""
    if n < 0:
        raise DomainError(f"photon number must be non-negative, got {n}")
    return math.exp(-2.0 * n * (1.0 - math.cos(delta_phi / 2.0)))


def angle_sigma(n: float) -> float:
    """Poincare-angle standard deviation, taken as 1/sqrt(n).

    Expanding :func:`bases_overlap` to second order gives an exponent of
    ``-n*dphi**2/4`` (variance 2/n); the 1/n convention is kept because the
    base-coverage figures are quoted with it.
    """
    if not n > 0:
        raise DomainError(f"photon number must be positive, got {n}")
    return 1.0 / math.sqrt(n)


def bases_within_sigma(params: SystemParams) -> float:
    """N_sigma = M / (pi sqrt(n_eff)), with n_eff = r * eta * <n>. Not rounded."""
    n_eff = params.repetition * params.transmittance * params.mean_photon_number
    return params.num_bases / (math.pi * math.sqrt(n_eff))


def apriori_parity_probs(m: int) -> tuple[Fraction, Fraction]:
    """Probabilities that a uniformly drawn basis index is even or odd."""
    if m < 1:
        raise DomainError(f"M must be >= 1, got {m}")
    sign = 1 if m % 2 == 0 else -1
    p_even = Fraction(1 - sign + 2 * m, 4 * m)
    p_odd = Fraction(-1 + sign + 2 * m, 4 * m)
    return p_even, p_odd


@dataclass(frozen=True)
class PhaseLimits:
    """Smallest detectable phase shifts for a pulse of ``photons`` photons."""

    photons: float
    sql: float
    squeezed: float
    heisenberg: float

    def heisenberg_fraction(self, m: int) -> float:
        # only the 1/M slice of the pulse that lands on the right basis counts
        return m / self.photons

    def indistinguishable(self, m: int) -> bool:
        """True when M > sqrt(pi N), i.e. the Heisenberg resolution of a 1/M
        pulse slice is coarser than the basis spacing pi/M."""
        return m * m > math.pi * self.photons


def phase_limits(photons: float) -> PhaseLimits:
    if not photons > 0:
        raise DomainError(f"photon number must be positive, got {photons}")
    return PhaseLimits(
        photons=photons,
        sql=1.0 / math.sqrt(photons),
        squeezed=photons ** -0.75,
        heisenberg=1.0 / photons,
    )


def heisenberg_min_bases(photons: float) -> int:
    """Smallest integer M with M > sqrt(pi N)."""
    if not photons > 0:
        raise DomainError(f"photon number must be positive, got {photons}")
    root = math.sqrt(math.pi * photons)
    nearest = round(root)
    if abs(root - nearest) <= 1e-9 * max(1.0, root):
        return int(nearest) + 1
    return math.floor(root) + 1


def _mode_amplitudes(p: PoincarePoint, n: float) -> tuple[complex, complex]:
    half = p.phi / 2.0
    c, s = math.cos(p.theta / 2.0), math.sin(p.theta / 2.0)
    e_plus, e_minus = complex(math.cos(half), math.sin(half)), complex(math.cos(half), -math.sin(half))
    gamma = (1 - 1j) * e_plus * c + (1 + 1j) * e_minus * s
    delta = (1 + 1j) * e_plus * c + (1 - 1j) * e_minus * s
    # |gamma|^2 + |delta|^2 == 4 identically; rescale so the pulse holds n photons
    scale = math.sqrt(n) / 2.0
    return scale * gamma, scale * delta


def polarization_overlap(a: PoincarePoint, b: PoincarePoint, n: float) -> float:
    """Squared overlap of the two-mode states at Poincare points ``a`` and ``b``."""
    if n < 0:
        raise DomainError(f"photon number must be non-negative, got {n}")
    ux, uy = _mode_amplitudes(a, n)
    vx, vy = _mode_amplitudes(b, n)
    return math.exp(-(abs(ux - vx) ** 2) - abs(uy - vy) ** 2)
