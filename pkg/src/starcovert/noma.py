"""STAR-RIS coefficients, cascaded channel gains and NOMA decoding rates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

TWO_PI = 2.0 * np.pi
_ATOL = 1e-9


def canonical_phase(phi):
    """Wrap phases into [0, 2*pi)."""
    out = np.mod(np.asarray(phi, dtype=float), TWO_PI)
    # mod can return exactly 2*pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StarBeamformer:
    """Per-element amplitudes and phases of the reflected and transmitted beams.

    Amplitudes are power-splitting factors: ``beta_r + beta_t == 1`` element-wise.
    """

    beta_r: np.ndarray
    beta_t: np.ndarray
    phase_r: np.ndarray
    phase_t: np.ndarray

    def __post_init__(self):
        br, bt = np.atleast_1d(self.beta_r), np.atleast_1d(self.beta_t)
        pr, pt = np.atleast_1d(self.phase_r), np.atleast_1d(self.phase_t)
        if not (br.shape == bt.shape == pr.shape == pt.shape) or br.ndim != 1:
            raise InvalidParameterError("beamformer vectors must be 1-D with equal length")
        if np.any(br < -_ATOL) or np.any(bt < -_ATOL) or np.any(np.abs(br + bt - 1.0) > _ATOL):
            raise InvalidParameterError("amplitudes must be in [0, 1] with beta_r + beta_t = 1")
        br = np.clip(br, 0.0, 1.0)
        object.__setattr__(self, "beta_r", _readonly(br))
        object.__setattr__(self, "beta_t", _readonly(1.0 - br))
        object.__setattr__(self, "phase_r", _readonly(canonical_phase(pr)))
        object.__setattr__(self, "phase_t", _readonly(canonical_phase(pt)))

    @classmethod
    def from_split(cls, beta_r, phase_r, phase_t):
        beta_r = np.asarray(beta_r, dtype=float)
        return cls(beta_r, 1.0 - beta_r, phase_r, phase_t)

    @property
    def element_count(self) -> int:
        return self.beta_r.shape[0]

    def coefficients(self, side: str) -> np.ndarray:
        """Diagonal of the reflection (``"reflect"``) or transmission (``"transmit"``) matrix."""
        if side in ("reflect", "r"):
            return np.sqrt(self.beta_r) * np.exp(1j * self.phase_r)
        if side in ("transmit", "t"):
            return np.sqrt(self.beta_t) * np.exp(1j * self.phase_t)
        raise InvalidParameterError(f"unknown side {side!r}")


@dataclass(frozen=True)
class PowerSplit:
    p_b: float
    p_c: float

    def __post_init__(self):
        if not (self.p_b >= 0 and self.p_c >= 0):
            raise InvalidParameterError(f"powers must be nonnegative, got {self.p_b}, {self.p_c}")
        if self.p_c < self.p_b * (1 - 1e-12):
            raise InvalidParameterError("public power must be at least the covert power")

    @property
    def total(self) -> float:
        return self.p_b + self.p_c


@dataclass(frozen=True)
class RateTriple:
    r_bb: float
    r_bc: float
    r_cc: float


def effective_gain(h_user, side, beam: StarBeamformer, h_ar) -> float:
    """Cascaded power gain ``|h_user^H Theta h_ar|**2`` through one side of the surface."""
    h_user, h_ar = np.asarray(h_user), np.asarray(h_ar)
    theta = beam.coefficients(side)
    if not (h_user.shape == h_ar.shape == theta.shape):
        raise InvalidParameterError(
            f"length mismatch: user {h_user.shape}, ar {h_ar.shape}, beam {theta.shape}")
    return float(np.abs(np.sum(np.conj(h_user) * theta * h_ar)) ** 2)


def _log2_ratio(num, den):
    if num <= 0:
        return 0.0
    return float(np.log2(1.0 + num / den))


def rates_from_gains(g_b, g_c, p: PowerSplit, noise) -> RateTriple:
    return RateTriple(
        r_bb=_log2_ratio(p.p_b * g_b, noise.bob),
        r_bc=_log2_ratio(p.p_c * g_b, p.p_b * g_b + noise.bob),
        r_cc=_log2_ratio(p.p_c * g_c, p.p_b * g_c + noise.carol),
    )


def rates(ch, beam: StarBeamformer, p: PowerSplit, noise) -> RateTriple:
    g_b = effective_gain(ch.h_rb, "reflect", beam, ch.h_ar)
    g_c = effective_gain(ch.h_rc, "transmit", beam, ch.h_ar)
    return rates_from_gains(g_b, g_c, p, noise)


def warden_avg_power(h_rw, beam: StarBeamformer, p: PowerSplit, sigma_w2, hypothesis, h_ar) -> float:
    """Asymptotic (infinitely many samples) average power seen by the warden.

    ``hypothesis`` is ``"H0"`` (public signal only) or ``"H1"`` (public plus covert).
    """
    g = effective_gain(h_rw, "reflect", beam, h_ar)
    if hypothesis == "H0":
        return p.p_c * g + sigma_w2
    if hypothesis == "H1":
        return (p.p_b + p.p_c) * g + sigma_w2
    raise InvalidParameterError(f"hypothesis must be 'H0' or 'H1', got {hypothesis!r}")


def reflected_exposure(beam: StarBeamformer, h_ar) -> float:
    """``||Theta_r h_ar||**2 = sum(beta_r * |h_ar|**2)``; phases drop out."""
    h_ar = np.asarray(h_ar)
    if h_ar.shape != beam.beta_r.shape:
        raise InvalidParameterError("length mismatch between beam and h_ar")
    return float(np.dot(beam.beta_r, np.abs(h_ar) ** 2))
