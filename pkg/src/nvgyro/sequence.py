"""DQ Ramsey / 4-Ramsey experiments, fringe sweeps, and gyro streaming.

One Ramsey shot: optical pump reset into |+1>, SQ pi pulse on f1 moving
the population to |0>, two-tone DQ pulse creating the |+-1> coherence,
free precession for tau, a second DQ pulse with configurable tone phases
projecting the accumulated phase back into populations, and an optical
readout through the detector model.

The 4-Ramsey protocol repeats the shot with the second pulse's phases
cycled through a 4-entry table and combines R = (R1 - R2 + R3 - R4)/4.
With the default table (0,0), (pi,0), (pi,pi), (0,pi) the per-tone phase
factors e^{i*phi1} and e^{i*phi2} sum to zero over the signed
combination, cancelling residual single-quantum signals from imperfect
pulse areas exactly, while the DQ term alternates sign and survives.

Imperfect RF (gradient across the sensing volume) is a weighted mixture
of sub-ensembles with different common area scales; the detector reads
the ensemble-averaged projection once per shot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .detector import DetectorConfig, NoiseHooks, psn_fractional_uncertainty
from .spin import (
    ABSOLUTE_FRAME,
    FieldEnvironment,
    PhysicalConstants,
    PulseKind,
    PulseSpec,
    RotatingFrame,
    SpinState,
    dq_splitting,
    evolution_factor,
    pulse_unitary,
)

#: Second-pulse (phase_f1, phase_f2) table; signs in the combination are +,-,+,-.
DEFAULT_PHASE_TABLE = (
    (0.0, 0.0),
    (math.pi, 0.0),
    (math.pi, math.pi),
    (0.0, math.pi),
)

_COMBINE_SIGNS = (1.0, -1.0, 1.0, -1.0)

#: Measured DQ coherence time used as the default for both decay channels.
DEFAULT_T2_DQ = 1.95e-3


@dataclass(frozen=True)
class SequenceConfig:
    """Timing, phase cycling, imperfections and readout of the experiment.

    rf_gradient is a tuple of (weight, area_scale) sub-ensembles with
    weights summing to one.  frame=None selects the phase-reset
    convention (fringes at absolute transition frequencies); pass a
    RotatingFrame for synchronized synthesizers.
    """

    tau: float = 1.428e-3
    tau_wp: float = 1.428e-3
    pump_duration: float = 300e-6
    readout_window: float = 17e-6
    cycle_period: float = 7e-3
    pump_fidelity: float = 1.0
    rf_gradient: tuple[tuple[float, float], ...] = ((1.0, 1.0),)
    phase_table: tuple[tuple[float, float], ...] = DEFAULT_PHASE_TABLE
    t2_dq: float = DEFAULT_T2_DQ
    t2_sq: float | None = None
    frame: RotatingFrame | None = None
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    noise: NoiseHooks = field(default_factory=NoiseHooks)

    def __post_init__(self):
        if len(self.phase_table) != 4:
            raise ValueError("phase_table must have exactly 4 entries")
        weights = [w for w, _ in self.rf_gradient]
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError("rf_gradient weights must sum to 1")
        if any(s <= 0 for _, s in self.rf_gradient):
            raise ValueError("rf_gradient area scales must be > 0")
        if not 0.0 <= self.pump_fidelity <= 1.0:
            raise ValueError("pump_fidelity must be in [0, 1]")
        if self.t2_dq <= 0 or (self.t2_sq is not None and self.t2_sq <= 0):
            raise ValueError("coherence times must be > 0")
        if self.cycle_period <= self.pump_duration + self.tau:
            raise ValueError("cycle_period must exceed pump_duration + tau")
        if self.detector.t_R > self.pump_duration:
            raise ValueError("detector t_R must fit inside the pump pulse")

    @property
    def effective_frame(self) -> RotatingFrame:
        return ABSOLUTE_FRAME if self.frame is None else self.frame

    @property
    def effective_t2_sq(self) -> float:
        return self.t2_dq if self.t2_sq is None else self.t2_sq

    def replace(self, **kwargs) -> "SequenceConfig":
        return replace(self, **kwargs)


@dataclass
class FringeSeries:
    """(tau, signal) fringe scan with an optional per-point noise sigma."""

    taus: np.ndarray
    values: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.taus.ndim != 1 or self.taus.shape != self.values.shape:
            raise ValueError("taus and values must be equal-length 1-D arrays")
        if len(self.taus) > 1 and np.any(np.diff(self.taus) <= 0):
            raise ValueError("taus must be strictly increasing")
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != self.taus.shape:
                raise ValueError("sigma must match taus in length")

    def __len__(self) -> int:
        return len(self.taus)


@dataclass
class GyroTimeSeries:
    """Working-point stream: timestamps, combined signal, calibrated rate."""

    t: np.ndarray
    S: np.ndarray
    nu_hat: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.S = np.asarray(self.S, dtype=float)
        if self.t.shape != self.S.shape:
            raise ValueError("t and S must have equal lengths")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("t must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)


def pump_state(fidelity: float = 1.0) -> SpinState:
    """Optical pump reset: fidelity into |+1>, remainder maximally mixed."""
    rho = fidelity * SpinState.pure(+1).rho + (1.0 - fidelity) * np.eye(3) / 3.0
    return SpinState(rho)


def bright_projection(state: SpinState) -> float:
    """Fraction of population outside |0> (the optically bright manifold)."""
    return float(1.0 - np.real(state.rho[1, 1]))


def _prepared_state(cfg: SequenceConfig, scale: float) -> np.ndarray:
    """Density matrix after pump, SQ pi and the first DQ pulse (phases 0,0)."""
    rho = pump_state(cfg.pump_fidelity).rho
    u_pi = pulse_unitary(PulseSpec(PulseKind.SQ_PI_F1, area_scale=scale))
    u_dq = pulse_unitary(PulseSpec(PulseKind.DQ_TWO_TONE, area_scale=scale))
    rho = u_pi @ rho @ u_pi.conj().T
    return u_dq @ rho @ u_dq.conj().T


def _projection_operators(cfg: SequenceConfig, scale: float) -> np.ndarray:
    """W[j] = U2_j^dag |0><0| U2_j for the 4 second-pulse phase entries."""
    p0 = np.zeros((3, 3), dtype=complex)
    p0[1, 1] = 1.0
    out = np.empty((4, 3, 3), dtype=complex)
    for j, (ph1, ph2) in enumerate(cfg.phase_table):
        u2 = pulse_unitary(
            PulseSpec(PulseKind.DQ_TWO_TONE, phase_f1=ph1, phase_f2=ph2,
                      area_scale=scale)
        )
        out[j] = u2.conj().T @ p0 @ u2
    return out


def _detunings(env: FieldEnvironment, c: PhysicalConstants,
               frame: RotatingFrame, b=None, nu=None, delta_q=None,
               delta_b=None):
    """Per-tone phase rates; scalar or arrays (overrides broadcast over env)."""
    b = env.B if b is None else b
    nu = env.nu if nu is None else nu
    delta_q = env.delta_Q if delta_q is None else delta_q
    delta_b = env.delta_B if delta_b is None else delta_b
    f_dq = dq_splitting(np.asarray(b) + np.asarray(delta_b), c)
    center = c.Q + np.asarray(delta_q)
    f1 = center + f_dq / 2.0
    f2 = center - f_dq / 2.0
    return f1 + nu - frame.f1, f2 - nu - frame.f2


def _ensemble_projections(cfg: SequenceConfig, env: FieldEnvironment,
                          c: PhysicalConstants, tau: float) -> np.ndarray:
    """Noise-free bright projections for the 4 phase entries, averaged
    over the rf_gradient sub-ensembles."""
    d1, d2 = _detunings(env, c, cfg.effective_frame)
    factor = evolution_factor(tau, d1, d2, cfg.t2_dq, cfg.effective_t2_sq)
    pbar = np.zeros(4)
    for weight, scale in cfg.rf_gradient:
        rho_ev = _prepared_state(cfg, scale) * factor
        w = _projection_operators(cfg, scale)
        p_zero = np.real(np.einsum("jab,ba->j", w, rho_ev))
        pbar += weight * (1.0 - p_zero)
    return pbar


def run_dq_ramsey(cfg: SequenceConfig, env: FieldEnvironment,
                  c: PhysicalConstants, tau: float,
                  second_pulse_phases: tuple[float, float],
                  rng: np.random.Generator | None = None) -> float:
    """Normalized signal S of a single DQ Ramsey shot at delay tau.

    Deterministic without an rng; with one, a single photon-shot-noise
    draw is added to the ensemble-averaged readout.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    d = cfg.detector
    d1, d2 = _detunings(env, c, cfg.effective_frame)
    factor = evolution_factor(tau, d1, d2, cfg.t2_dq, cfg.effective_t2_sq)
    proj = 0.0
    for weight, scale in cfg.rf_gradient:
        rho_ev = _prepared_state(cfg, scale) * factor
        ph1, ph2 = second_pulse_phases
        u2 = pulse_unitary(
            PulseSpec(PulseKind.DQ_TWO_TONE, phase_f1=ph1, phase_f2=ph2,
                      area_scale=scale)
        )
        rho_out = u2 @ rho_ev @ u2.conj().T
        proj += weight * (1.0 - float(np.real(rho_out[1, 1])))
    volts = d.v_low + proj * d.V0 * d.contrast
    if rng is not None:
        volts += rng.normal(0.0, d.V0 * psn_fractional_uncertainty(d))
    return volts / d.v_pump


def run_4ramsey_point(cfg: SequenceConfig, env: FieldEnvironment,
                      c: PhysicalConstants, tau: float,
                      rng: np.random.Generator | None = None) -> float:
    """Combined signal R = (R1 - R2 + R3 - R4)/4 over the phase table."""
    total = 0.0
    for sign, phases in zip(_COMBINE_SIGNS, cfg.phase_table):
        total += sign * run_dq_ramsey(cfg, env, c, tau, phases, rng)
    return total / 4.0


def combined_sigma(cfg: SequenceConfig) -> float:
    """Photon-shot-noise std of one combined 4-Ramsey sample (S units)."""
    d = cfg.detector
    sigma_s = d.V0 * psn_fractional_uncertainty(d) / d.v_pump
    return sigma_s / 2.0


def sweep_fringes(cfg: SequenceConfig, env: FieldEnvironment,
                  c: PhysicalConstants, tau_grid: Sequence[float],
                  rng: np.random.Generator | None = None) -> FringeSeries:
    """One 4-Ramsey point per tau on a strictly increasing grid."""
    taus = np.asarray(tau_grid, dtype=float)
    if taus.size == 0:
        raise ValueError("tau grid must be nonempty")
    if taus.size > 1 and np.any(np.diff(taus) <= 0):
        raise ValueError("tau grid must be strictly increasing")
    if cfg.cycle_period <= cfg.pump_duration + taus[-1]:
        raise ValueError("cycle_period must exceed pump_duration + max tau")
    values = np.array([run_4ramsey_point(cfg, env, c, t, rng) for t in taus])
    sigma = None
    if rng is not None:
        sigma = np.full(taus.shape, combined_sigma(cfg))
    return FringeSeries(taus=taus, values=values, sigma=sigma)


def sweep_single_ramsey(cfg: SequenceConfig, env: FieldEnvironment,
                        c: PhysicalConstants, tau_grid: Sequence[float],
                        phase_entry: int,
                        rng: np.random.Generator | None = None) -> FringeSeries:
    """Sweep of one of the four Ramsey variants (phase_table[phase_entry])."""
    taus = np.asarray(tau_grid, dtype=float)
    phases = cfg.phase_table[phase_entry]
    values = np.array(
        [run_dq_ramsey(cfg, env, c, t, phases, rng) for t in taus]
    )
    sigma = None
    if rng is not None:
        d = cfg.detector
        sigma = np.full(taus.shape, d.V0 * psn_fractional_uncertainty(d) / d.v_pump)
    return FringeSeries(taus=taus, values=values, sigma=sigma)


EnvSource = FieldEnvironment | Callable[[float], FieldEnvironment]


def rotating_environment(base: FieldEnvironment,
                         rate_dps_fn: Callable[[float], float]) -> Callable[[float], FieldEnvironment]:
    """Environment source with nu(t) taken from a table rate in deg/s."""

    def source(t: float) -> FieldEnvironment:
        return base.replace(nu=float(rate_dps_fn(t)) / 360.0)

    return source


def run_gyro_stream(cfg: SequenceConfig, env_source: EnvSource,
                    c: PhysicalConstants, duration: float,
                    rng: np.random.Generator | None = None) -> GyroTimeSeries:
    """Working-point stream: one combined 4-Ramsey sample per cycle.

    The environment is sampled once per cycle start and held constant
    over the cycle.  The per-cycle physics is evaluated vectorized but is
    numerically the 4-Ramsey sequence at tau_wp (cross-checked against
    run_4ramsey_point in the test suite).  With an rng, draw order is:
    photon shot noise (n_cycles x 4), extra white noise, random walk.
    """
    if duration <= 0:
        raise ValueError("duration must be > 0")
    if cfg.cycle_period <= cfg.pump_duration + cfg.tau_wp:
        raise ValueError("cycle_period must exceed pump_duration + tau_wp")
    n = int(math.floor(duration / cfg.cycle_period))
    if n < 1:
        raise ValueError("duration shorter than one cycle")
    ts = np.arange(n) * cfg.cycle_period

    if isinstance(env_source, FieldEnvironment):
        envs = None
        base = env_source
        b = np.full(n, base.B)
        nu = np.full(n, base.nu)
        dq = np.full(n, base.delta_Q)
        db = np.full(n, base.delta_B)
    else:
        envs = [env_source(float(t)) for t in ts]
        base = envs[0]
        b = np.array([e.B for e in envs])
        nu = np.array([e.nu for e in envs])
        dq = np.array([e.delta_Q for e in envs])
        db = np.array([e.delta_B for e in envs])

    d1, d2 = _detunings(base, c, cfg.effective_frame, b=b, nu=nu,
                        delta_q=dq, delta_b=db)
    factor = evolution_factor(cfg.tau_wp, d1, d2, cfg.t2_dq, cfg.effective_t2_sq)

    # Ensemble-averaged bright projection per cycle and phase entry.
    pbar = np.zeros((n, 4))
    for weight, scale in cfg.rf_gradient:
        rho_mid = _prepared_state(cfg, scale)
        w = _projection_operators(cfg, scale)
        p_zero = np.real(np.einsum("jab,ba,kba->kj", w, rho_mid, factor))
        pbar += weight * (1.0 - p_zero)

    det = cfg.detector
    volts = det.v_low + pbar * det.V0 * det.contrast
    if rng is not None:
        volts = volts + rng.normal(
            0.0, det.V0 * psn_fractional_uncertainty(det), size=(n, 4)
        )
    s = volts / det.v_pump
    combined = (s[:, 0] - s[:, 1] + s[:, 2] - s[:, 3]) / 4.0

    if rng is not None:
        if cfg.noise.white_sigma > 0:
            combined = combined + rng.normal(0.0, cfg.noise.white_sigma, size=n)
        if cfg.noise.random_walk_sigma > 0:
            step = cfg.noise.random_walk_sigma * math.sqrt(cfg.cycle_period)
            combined = combined + np.cumsum(rng.normal(0.0, step, size=n))

    meta = {
        "tau_wp": cfg.tau_wp,
        "cycle_period": cfg.cycle_period,
        "n_cycles": n,
    }
    return GyroTimeSeries(t=ts, S=combined, meta=meta)
