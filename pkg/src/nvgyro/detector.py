"""Fluorescence readout model and the photon-shot-noise budget.

Populations map to voltage between the low and high readout levels
V_L = V0*(1 - C/2) and V_H = V0*(1 + C/2).  The readout distinguishes the
|m_I = 0| population from the |+-1> manifold: projection = 1 - p_zero, so
a freshly pumped |+1> ensemble reads bright (V_pump = V_H) and an ideal
Ramsey fringe spans the full V_L..V_H range at tau = 0.

Shot noise is Gaussian (the detected photoelectron number is ~1e10 per
readout); balanced detection doubles the photon shot-noise variance
(sqrt(2) in amplitude) without adding signal.  Slow technical noise can
be injected through NoiseHooks (white + random walk on the normalized
signal) -- by default the floor is photoelectron shot noise only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .spin import ELEMENTARY_CHARGE


@dataclass(frozen=True)
class DetectorConfig:
    """Photodetector and timing parameters of a single optical readout.

    V0: mean fluorescence voltage (V); G: transimpedance gain (V/A);
    contrast: full fringe contrast C; t_R: signal-bearing readout window
    (s) inside the pump pulse; balanced: balanced photodiode flag;
    T2star: coherence time used by the sensitivity budget (s); t_meas:
    duration of one measurement (s).
    """

    V0: float = 15.0
    G: float = 1.75e5
    contrast: float = 0.015
    t_R: float = 17e-6
    balanced: bool = True
    T2star: float = 1.95e-3
    t_meas: float = 1.92e-3

    def __post_init__(self):
        for name in ("V0", "G", "t_R", "T2star", "t_meas"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 < self.contrast < 1.0:
            raise ValueError("contrast must be in (0, 1)")

    @property
    def v_high(self) -> float:
        return self.V0 * (1.0 + self.contrast / 2.0)

    @property
    def v_low(self) -> float:
        return self.V0 * (1.0 - self.contrast / 2.0)

    @property
    def v_pump(self) -> float:
        """Reference level after optical pumping (bright state)."""
        return self.v_high

    def replace(self, **kwargs) -> "DetectorConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class NoiseHooks:
    """Optional technical-noise injection on the normalized signal S.

    white_sigma: std of extra white noise per combined sample;
    random_walk_sigma: random-walk increment std per sqrt(second).
    """

    white_sigma: float = 0.0
    random_walk_sigma: float = 0.0

    def __post_init__(self):
        if self.white_sigma < 0 or self.random_walk_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")


def photoelectron_count(d: DetectorConfig, n_meas: int,
                        q_e: float = ELEMENTARY_CHARGE) -> float:
    """Detected photoelectrons in n_meas readout windows: (V0/(G*q_e))*t_R*n_meas."""
    if n_meas < 1:
        raise ValueError("n_meas must be >= 1")
    return (d.V0 / (d.G * q_e)) * d.t_R * n_meas


def psn_fractional_uncertainty(d: DetectorConfig, n_meas: int = 1,
                               q_e: float = ELEMENTARY_CHARGE) -> float:
    """Photon-shot-noise fractional voltage uncertainty delta_V/V0.

    sqrt(2)/sqrt(N_p) for balanced detection, 1/sqrt(N_p) otherwise.
    """
    factor = math.sqrt(2.0) if d.balanced else 1.0
    return factor / math.sqrt(photoelectron_count(d, n_meas, q_e))


def readout_voltage(projection, d: DetectorConfig,
                    rng: np.random.Generator | None = None,
                    n_meas: int = 1):
    """Fluorescence voltage for a bright-manifold projection in [0, 1].

    Mean interpolates linearly V_L..V_H; with an rng, adds Gaussian photon
    shot noise for a single measurement (or n_meas averaged ones).
    Accepts scalar or array projections.
    """
    projection = np.asarray(projection, dtype=float)
    mean = d.v_low + projection * (d.V0 * d.contrast)
    if rng is not None:
        sigma = d.V0 * psn_fractional_uncertainty(d, n_meas)
        mean = mean + rng.normal(0.0, sigma, size=projection.shape)
    return float(mean) if mean.ndim == 0 else mean


def normalize_contrast(v, v_pump: float):
    """Fractional fluorescence S = V / V_pump (V_pump noiseless by assumption)."""
    if v_pump <= 0:
        raise ValueError("v_pump must be > 0")
    v = np.asarray(v, dtype=float)
    out = v / v_pump
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RotationSensitivity:
    """Photon-shot-noise-limited rotation sensitivity in both unit systems."""

    hz_per_rt_hz: float
    dps_per_rt_s: float


def psn_rotation_sensitivity(d: DetectorConfig, tau: float,
                             q_e: float = ELEMENTARY_CHARGE) -> RotationSensitivity:
    """Shot-noise-limited rotation sensitivity of the working-point protocol.

    delta_nu * sqrt(t) =
        (1/2pi) * 1/(tau*exp(-tau/T2*)) * (1/C)
        * sqrt(n_b * G * q_e / (V0 * t_R)) * sqrt(t_meas),

    with n_b = 2 for balanced detection (1 otherwise).  The leading 1/2
    converts the frequency uncertainty on the DQ splitting into a rotation
    uncertainty (each |+-1> level shifts by +-nu).  Degrees-per-root-second
    is the same number times 360.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    noise_factor = 2.0 if d.balanced else 1.0
    hz = (
        (1.0 / (2.0 * math.pi))
        * (1.0 / (tau * math.exp(-tau / d.T2star)))
        * (1.0 / d.contrast)
        * math.sqrt(noise_factor * d.G * q_e / (d.V0 * d.t_R))
        * math.sqrt(d.t_meas)
    )
    return RotationSensitivity(hz_per_rt_hz=hz, dps_per_rt_s=hz * 360.0)


def rotation_unit_conversion(hz_per_rt_hz: float) -> float:
    """Hz/sqrt(Hz) -> (deg/s)/sqrt(Hz) == deg/sqrt(s): exact factor 360."""
    return hz_per_rt_hz * 360.0
