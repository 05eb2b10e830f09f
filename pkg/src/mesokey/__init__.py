"""Key distribution with M-ry ciphered mesoscopic coherent states.

Submodules: ``mry`` (wheel geometry and system parameters), ``helstrom``
(Eve's minimum error probability), ``protocol`` (chained key exchange),
``channel`` (shot-noise channel and eavesdroppers), ``distill``
(verification and privacy amplification), ``cli``.
"""

from .errors import (ConfigurationError, DegenerateSeedError, DomainError, MesokeyError,
                     NumericalError, TruncationError)
from .helstrom import (eve_mutual_information, information_balance, min_error_probability,
                       pe_curve, repetition_equivalent_pe)
from .mry import SystemParams, bases_overlap, bases_within_sigma, cipher_phase, wheel_phases

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DegenerateSeedError", "DomainError", "MesokeyError",
    "NumericalError", "TruncationError", "SystemParams", "bases_overlap",
    "bases_within_sigma", "cipher_phase", "wheel_phases", "eve_mutual_information",
    "information_balance", "min_error_probability", "pe_curve", "repetition_equivalent_pe",
]
