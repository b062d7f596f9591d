"""System parameters, Rayleigh uplink channels, the radar echo channel and noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "SPEED_OF_LIGHT",
    "SystemParams",
    "ChannelRealization",
    "RadarChannel",
    "NoiseModel",
    "db_to_linear",
    "dbm_to_watt",
    "watt_to_dbm",
    "sample_comm_channel",
    "sample_comm_channels",
    "radar_channel",
    "noise_model",
]

SPEED_OF_LIGHT = 299_792_458.0


def db_to_linear(db):
    out = 10.0 ** (np.asarray(db, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def dbm_to_watt(dbm):
    out = 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)
    return float(out) if out.ndim == 0 else out


def watt_to_dbm(watt):
    return 10.0 * math.log10(watt) + 30.0


@dataclass(frozen=True)
class SystemParams:
    """Physical and link constants, stored in linear SI units.

    Gains and RCS are kept in dB as given and converted by the properties
    below. Powers are in watts, distances in metres.
    """

    alpha: float = 3.5
    f_c: float = 5.8e9
    bandwidth: float = 10e6
    T: float = 10e-6
    noise_density: float = -174.0  # dBm/Hz
    M: int = 5
    K: int = 2
    G_t: float = 2.0  # dB
    G_r: float = 2.0  # dB
    rcs: float = 0.0  # dBsm
    theta_o: float = math.pi / 4
    theta_r: float = math.pi / 2
    c0: float = SPEED_OF_LIGHT
    d1: float = 50.0
    d2: float = 60.0
    R: float = 30.0
    v: float = 10.0
    P_com: float = 1e-3
    power_split: float = 0.5
    P_r: float = 1e-3

    def __post_init__(self):
        problems = []
        if not self.alpha > 0:
            problems.append("alpha must be > 0")
        if self.K != 2:
            problems.append("K must be 2")
        if self.M < self.K:
            problems.append(f"M must be >= K (M={self.M}, K={self.K})")
        if not 0 < self.power_split < 1:
            problems.append("power_split must lie in (0, 1)")
        if self.P_com < 0 or self.P_r < 0:
            problems.append("powers must be >= 0")
        if not (self.d1 > 0 and self.d2 > 0 and self.R > 0):
            problems.append("distances d1, d2, R must be > 0")
        if not (self.bandwidth > 0 and self.f_c > 0 and self.T > 0):
            problems.append("bandwidth, f_c and T must be > 0")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def P1(self):
        return self.power_split * self.P_com

    @property
    def P2(self):
        return (1.0 - self.power_split) * self.P_com

    @property
    def powers(self):
        return (self.P1, self.P2)

    @property
    def distances(self):
        return (self.d1, self.d2)

    @property
    def beta(self):
        """Large-scale gains ``d_k ** -alpha`` for both UEs."""
        return (self.d1 ** -self.alpha, self.d2 ** -self.alpha)

    @property
    def noise_var(self):
        """Per-period, per-antenna noise variance in watts."""
        return dbm_to_watt(self.noise_density) * self.bandwidth

    @property
    def wavelength(self):
        return self.c0 / self.f_c

    def power(self, ue):
        return self.powers[ue - 1]

    def gain(self, ue):
        return self.beta[ue - 1]


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the ``M x 2`` uplink channel matrix."""

    H: np.ndarray
    beta: tuple


@dataclass(frozen=True)
class RadarChannel:
    """Two-way radar echo coefficient for one symbol-pair index."""

    g_prime: float
    Theta: float
    f_d: float
    mu: int
    g: complex

    def vector(self, M):
        # the echo coefficient is the same on every antenna
        return np.full(M, self.g, dtype=complex)


def _complex_gaussian(rng, shape, var):
    scale = np.sqrt(np.asarray(var) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_comm_channel(rng, params):
    """Draw ``H`` with column ``k`` i.i.d. CN(0, beta_k)."""
    beta = params.beta
    H = _complex_gaussian(rng, (params.M, 2), np.array(beta))
    return ChannelRealization(H=H, beta=beta)


def sample_comm_channels(rng, params, n):
    """Batch of ``n`` channel matrices, shape ``(n, M, 2)``."""
    return _complex_gaussian(rng, (n, params.M, 2), np.array(params.beta))


def radar_channel(params, mu=0):
    """Deterministic radar coefficient ``g' exp(-j2 pi Theta) exp(j2 pi f_d mu T)``.

    ``Theta = 2R/c0`` enters the phase as written, without a carrier factor.
    """
    if not params.R > 0:
        raise DomainError("target distance R must be > 0")
    if not params.f_c > 0:
        raise DomainError("carrier frequency must be > 0")
    lam = params.wavelength
    gains = db_to_linear(params.G_t) * db_to_linear(params.G_r) * db_to_linear(params.rcs)
    g_prime = lam / (8.0 * params.R**2) * math.sqrt(gains / math.pi**3)
    theta = 2.0 * params.R / params.c0
    f_d = 2.0 * params.v * params.f_c / params.c0
    phase = -2.0 * math.pi * theta + 2.0 * math.pi * f_d * mu * params.T
    g = g_prime * complex(math.cos(phase), math.sin(phase))
    return RadarChannel(g_prime=g_prime, Theta=theta, f_d=f_d, mu=int(mu), g=g)


@dataclass(frozen=True)
class NoiseModel:
    variance: float

    @property
    def combined_variance(self):
        return 2.0 * self.variance

    def sample(self, rng, shape):
        return _complex_gaussian(rng, shape, self.variance)


def noise_model(params):
    """Noise variance ``N0 * B`` (watts) and a circular Gaussian sampler."""
    if not params.bandwidth > 0:
        raise DomainError("bandwidth must be > 0")
    return NoiseModel(variance=params.noise_var)
