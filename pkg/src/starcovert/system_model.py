"""Physical parameters, unit conversions, channel generation and config files.

Everything inside the package works in watts and linear gains. Decibel
values only appear at the configuration boundary (:func:`convert_db`,
:func:`parse_config`).

Random streams
--------------
All randomness flows through ``numpy.random.Generator`` with the PCG64 bit
generator. A trial's stream is derived from ``SeedSequence([base_seed,
trial_index])`` (see :func:`trial_seed`), so every Monte-Carlo trial has an
independent, reproducible stream no matter which worker runs it.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class SystemParams:
    element_count: int = 8
    d_ar: float = 100.0
    d_rb: float = 20.0
    d_rc: float = 15.0
    d_rw: float = 25.0
    path_loss_exponent: float = 2.0
    reference_gain: float = 0.01
    max_transmit_power: float = 0.1
    covertness_level: float = 0.2
    qos_rate: float = 1.0

    def __post_init__(self):
        if int(self.element_count) != self.element_count or self.element_count < 1:
            raise InvalidParameterError(f"element_count must be a positive integer, got {self.element_count}")
        object.__setattr__(self, "element_count", int(self.element_count))
        for name in ("d_ar", "d_rb", "d_rc", "d_rw", "path_loss_exponent",
                     "reference_gain", "max_transmit_power"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidParameterError(f"{name} must be positive, got {v}")
        if not 0.0 < self.covertness_level < 1.0:
            raise InvalidParameterError(f"covertness_level must lie in (0, 1), got {self.covertness_level}")
        if not (np.isfinite(self.qos_rate) and self.qos_rate >= 0):
            raise InvalidParameterError(f"qos_rate must be >= 0, got {self.qos_rate}")

    def link_gain(self, link: str) -> float:
        """Large-scale gain of ``link`` in {"ar", "rb", "rc", "rw"}."""
        return path_loss(getattr(self, f"d_{link}"), self.path_loss_exponent, self.reference_gain)


@dataclass(frozen=True)
class NoiseModel:
    """Receiver noise powers and the warden's noise-uncertainty model.

    The warden's actual noise power is log-uniform on
    ``[nominal_warden / uncertainty, uncertainty * nominal_warden]``.
    """

    bob: float = 1e-11
    carol: float = 1e-11
    nominal_warden: float = 1e-11
    uncertainty: float = 10 ** 0.3

    def __post_init__(self):
        for name in ("bob", "carol", "nominal_warden"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidParameterError(f"noise power {name} must be positive, got {v}")
        if not (np.isfinite(self.uncertainty) and self.uncertainty > 1):
            raise InvalidParameterError(f"uncertainty factor must exceed 1, got {self.uncertainty}")

    @property
    def support(self) -> tuple[float, float]:
        return self.nominal_warden / self.uncertainty, self.uncertainty * self.nominal_warden


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelSet:
    """One realization of the instantaneous channels.

    Only statistics of the RIS-to-warden link are stored (``l_rw``); the
    transmitter never sees its instantaneous value.
    """

    h_ar: np.ndarray
    h_rb: np.ndarray
    h_rc: np.ndarray
    l_rw: float

    def __post_init__(self):
        for name in ("h_ar", "h_rb", "h_rc"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        m = self.h_ar.shape
        if len(m) != 1 or self.h_rb.shape != m or self.h_rc.shape != m:
            raise InvalidParameterError("channel vectors must be 1-D with equal length")
        if not self.l_rw > 0:
            raise InvalidParameterError(f"l_rw must be positive, got {self.l_rw}")

    @property
    def element_count(self) -> int:
        return self.h_ar.shape[0]

    def subset(self, idx) -> "ChannelSet":
        return ChannelSet(self.h_ar[idx], self.h_rb[idx], self.h_rc[idx], self.l_rw)


def path_loss(d, alpha, rho0):
    """Large-scale power gain ``rho0 / d**alpha``."""
    for name, v in (("distance", d), ("exponent", alpha), ("reference gain", rho0)):
        if not np.all(np.asarray(v) > 0):
            raise InvalidParameterError(f"{name} must be positive, got {v}")
    return rho0 / np.power(d, alpha)


def convert_db(value_db, kind="ratio"):
    """Convert a dB power ratio (``kind="ratio"``) or a dBm level (``kind="dBm"``) to linear.

    dBm values come back in watts.
    """
    lin = np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)
    if kind in ("ratio", "dB", "db"):
        out = lin
    elif kind in ("dBm", "dbm"):
        out = lin * 1e-3
    else:
        raise InvalidParameterError(f"unknown decibel kind {kind!r}")
    return float(out) if out.ndim == 0 else out


def to_db(value, kind="ratio"):
    """Inverse of :func:`convert_db`."""
    v = np.asarray(value, dtype=float)
    if kind in ("dBm", "dbm"):
        v = v / 1e-3
    elif kind not in ("ratio", "dB", "db"):
        raise InvalidParameterError(f"unknown decibel kind {kind!r}")
    out = 10.0 * np.log10(v)
    return float(out) if out.ndim == 0 else out


def trial_seed(base_seed: int, trial_index: int) -> np.random.SeedSequence:
    """Stream-splitting rule: trial ``k`` of a run seeded ``s`` uses ``SeedSequence([s, k])``."""
    return np.random.SeedSequence([int(base_seed) & _U64, int(trial_index) & _U64])


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & _U64)))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Zero-mean, unit-variance circularly-symmetric complex Gaussian samples."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    z = rng.standard_normal(shape + (2,)) * math.sqrt(0.5)
    return z[..., 0] + 1j * z[..., 1]


def sample_channels(params: SystemParams, seed) -> ChannelSet:
    rng = make_rng(seed)
    m = params.element_count
    g = complex_gaussian(rng, (3, m))
    return ChannelSet(
        h_ar=math.sqrt(params.link_gain("ar")) * g[0],
        h_rb=math.sqrt(params.link_gain("rb")) * g[1],
        h_rc=math.sqrt(params.link_gain("rc")) * g[2],
        l_rw=float(params.link_gain("rw")),
    )


# ---------------------------------------------------------------------------
# Config files
#
# Plain ``key = value [unit]`` lines; ``#`` starts a comment. Units:
#   dB   power ratio (reference_gain, uncertainty_factor)
#   dBm  power level (max_transmit_power and the noise powers)
#   W    watts; no unit means the linear value as written.
# ---------------------------------------------------------------------------

CONFIG_KEYS = {
    "element_count": ("system", "element_count"),
    "d_ar": ("system", "d_ar"),
    "d_rb": ("system", "d_rb"),
    "d_rc": ("system", "d_rc"),
    "d_rw": ("system", "d_rw"),
    "path_loss_exponent": ("system", "path_loss_exponent"),
    "reference_gain": ("system", "reference_gain"),
    "max_transmit_power": ("system", "max_transmit_power"),
    "covertness_level": ("system", "covertness_level"),
    "qos_rate": ("system", "qos_rate"),
    "noise_bob": ("noise", "bob"),
    "noise_carol": ("noise", "carol"),
    "noise_warden_nominal": ("noise", "nominal_warden"),
    "uncertainty_factor": ("noise", "uncertainty"),
}

_VALUE_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*(dBm|dB|W)?\s*$", re.IGNORECASE)


def parse_value(text: str) -> float:
    m = _VALUE_RE.match(text)
    if not m:
        raise InvalidParameterError(f"cannot parse value {text!r}")
    x = float(m.group(1))
    unit = (m.group(2) or "").lower()
    if unit == "dbm":
        return convert_db(x, "dBm")
    if unit == "db":
        return convert_db(x, "ratio")
    return x


def parse_config(text: str, base: tuple[SystemParams, NoiseModel] | None = None):
    """Parse config text into ``(SystemParams, NoiseModel)``, starting from ``base`` or the defaults."""
    system, noise = base or (default_system(), default_noise())
    updates = {"system": {}, "noise": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameterError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise InvalidParameterError(f"line {lineno}: unknown key {key!r}")
        group, attr = CONFIG_KEYS[key]
        updates[group][attr] = parse_value(val)
    return replace(system, **updates["system"]), replace(noise, **updates["noise"])


def load_config(path) -> tuple[SystemParams, NoiseModel]:
    return parse_config(Path(path).read_text())


def format_config(system: SystemParams, noise: NoiseModel) -> str:
    lines = []
    for key, (group, attr) in CONFIG_KEYS.items():
        v = getattr(system if group == "system" else noise, attr)
        lines.append(f"{key} = {v!r}")
    return "\n".join(lines) + "\n"


def default_system(**overrides) -> SystemParams:
    """Simulation defaults: rho0 = -20 dB, alpha = 2, d = 100/20/15/25 m, desk-scale M = 8."""
    base = dict(
        element_count=8,
        d_ar=100.0, d_rb=20.0, d_rc=15.0, d_rw=25.0,
        path_loss_exponent=2.0,
        reference_gain=convert_db(-20.0),
        max_transmit_power=convert_db(20.0, "dBm"),
        covertness_level=0.2,
        qos_rate=1.0,
    )
    base.update(overrides)
    return SystemParams(**base)


def default_noise(**overrides) -> NoiseModel:
    """All noise powers -80 dBm, uncertainty factor 3 dB."""
    base = dict(
        bob=convert_db(-80.0, "dBm"),
        carol=convert_db(-80.0, "dBm"),
        nominal_warden=convert_db(-80.0, "dBm"),
        uncertainty=convert_db(3.0),
    )
    base.update(overrides)
    return NoiseModel(**base)
