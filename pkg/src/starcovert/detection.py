"""Radiometer detection at the warden under bounded noise uncertainty.

The warden compares its average received power with a threshold. Its own
noise power is log-uniform on ``[s/rho, rho*s]`` (``s`` the nominal power),
so the detection error probability (false alarm plus miss) has a closed form
in the threshold, and so does the threshold that minimizes it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .noma import StarBeamformer, reflected_exposure

# relative slack when checking a threshold against its admissible interval
_RANGE_RTOL = 1e-12


@dataclass(frozen=True)
class WardenObservables:
    """Received-signal power terms at the warden.

    ``phi1`` is the public-signal-only term, ``phi2`` the public-plus-covert term.
    """

    phi1: float
    phi2: float

    def __post_init__(self):
        if not (self.phi1 >= 0 and self.phi2 >= self.phi1):
            raise DomainError(f"need 0 <= phi1 <= phi2, got phi1={self.phi1}, phi2={self.phi2}")

    @property
    def phi(self) -> float:
        return self.phi2 - self.phi1


def threshold_range(obs: WardenObservables, noise) -> tuple[float, float]:
    lo, hi = noise.support
    return obs.phi1 + lo, obs.phi1 + hi


def dep(tau, obs: WardenObservables, noise) -> float:
    """Detection error probability ``P_FA + P_MD`` at threshold ``tau``."""
    t_lo, t_hi = threshold_range(obs, noise)
    slack = _RANGE_RTOL * t_hi
    if not (t_lo - slack <= tau <= t_hi + slack):
        raise DomainError(f"threshold {tau} outside [{t_lo}, {t_hi}]")
    lo = noise.support[0]
    upper = max(tau - obs.phi1, lo)
    # ties go to the noise floor branch
    lower = tau - obs.phi2 if tau - obs.phi2 > lo else lo
    pe = 1.0 - (math.log(upper) - math.log(lower)) / (2.0 * math.log(noise.uncertainty))
    return min(1.0, max(0.0, pe))


def optimal_threshold(obs: WardenObservables, noise) -> float:
    lo, hi = noise.support
    return min(obs.phi2 + lo, obs.phi1 + hi)


def dep_boundary(noise) -> float:
    """Covert power above which the warden detects without error: ``(rho^2 - 1) s / rho``."""
    r = noise.uncertainty
    return (r * r - 1.0) * noise.nominal_warden / r


def min_dep(phi, noise) -> float:
    """Minimum detection error probability for covert power term ``phi``."""
    if not phi >= 0:
        raise DomainError(f"phi must be nonnegative, got {phi}")
    if phi > dep_boundary(noise):
        return 0.0
    r = noise.uncertainty
    pe = 1.0 - math.log1p(r * phi / noise.nominal_warden) / (2.0 * math.log(r))
    return min(1.0, max(0.0, pe))


def covert_lambda_bound(epsilon, noise) -> float:
    """Largest average covert exposure keeping the minimum DEP at or above ``1 - epsilon``."""
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    r = noise.uncertainty
    return math.expm1(2.0 * epsilon * math.log(r)) * noise.nominal_warden / r


def expected_phi(p_b, beam: StarBeamformer, h_ar, l_rw) -> float:
    """Mean of the covert power term over the warden's Rayleigh channel.

    ``|h_rw^H Theta_r h_ar|^2`` is exponential with mean
    ``l_rw * ||Theta_r h_ar||^2``.
    """
    return float(p_b) * float(l_rw) * reflected_exposure(beam, np.asarray(h_ar))
