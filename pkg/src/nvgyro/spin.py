"""Spin-1 nuclear state, transition frequencies, RF pulses, free evolution.

The 14N nucleus intrinsic to an NV center is modeled as a bare spin-1 in
the m_S = 0 electron manifold, basis ordered (m_I = +1, 0, -1).  Level
model (all frequencies in Hz): both |+-1> sit a quadrupole splitting Q
above |0>, split from each other by the double-quantum (DQ) interval

    f_DQ = 2*B*gamma_n * (1 - (gamma_e/gamma_n) * A_perp**2 / (D**2 - gamma_e**2 B**2)),

so the two single-quantum (SQ) transitions are f1 = Q + f_DQ/2
(|0> <-> |+1>) and f2 = Q - f_DQ/2 (|0> <-> |-1>).  Assigning f1 to the
|0> <-> |+1> branch follows from f1 > f2 at the 482 G operating field;
this sign convention is recorded here, not asserted as a measured fact.

Sample rotation at rate nu about the NV axis (clockwise positive) shifts
the |+-1> levels by +-nu, so the DQ coherence precesses at f_DQ + 2*nu
while the mid-level quadrupole shift (temperature) cancels out of it.

RF pulses are hard pulses: instantaneous rotations characterized only by
area and phase.  Phase bookkeeping between pulses uses an explicit
RotatingFrame of per-tone reference frequencies; the default references
of zero model synthesizers whose phase restarts at each pulse, which
makes fringes appear at the absolute transition frequencies.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SingularSplittingError

# Elementary charge in A*s, used by the photodetector shot-noise budget.
ELEMENTARY_CHARGE = 1.602176634e-19

# Basis index for each nuclear spin projection.
M_INDEX = {+1: 0, 0: 1, -1: 2}


@dataclass(frozen=True)
class PhysicalConstants:
    """Literature constants of the NV / 14N system.

    gamma_e, gamma_n in Hz/G, D (zero-field splitting), A_perp (transverse
    hyperfine) and Q (quadrupole splitting) in Hz, q_e in A*s.
    """

    gamma_e: float = 2.8025e6
    gamma_n: float = 307.7
    D: float = 2.870e9
    A_perp: float = 2.62e6
    Q: float = 4.9425e6
    q_e: float = ELEMENTARY_CHARGE

    def __post_init__(self):
        for name in ("gamma_e", "gamma_n", "D", "Q", "q_e"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.gamma_e / self.gamma_n <= 1.0:
            raise ValueError("gamma_e/gamma_n must be >> 1")

    def replace(self, **kwargs) -> "PhysicalConstants":
        return replace(self, **kwargs)


#: Default constants profile (overridable; Q back-derived from the
#: ~5.089/4.796 MHz carrier pair at 482 G).
LITERATURE_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class FieldEnvironment:
    """Bias field and slow perturbations seen by the nucleus.

    B: bias field (G); nu: rotation rate about the NV axis (Hz, clockwise
    positive); delta_Q: quadrupole perturbation (Hz, temperature drift
    proxy); delta_B: bias-field drift (G).
    """

    B: float = 482.0
    nu: float = 0.0
    delta_Q: float = 0.0
    delta_B: float = 0.0

    def __post_init__(self):
        if self.B < 0:
            raise ValueError("B must be >= 0")

    def replace(self, **kwargs) -> "FieldEnvironment":
        return replace(self, **kwargs)


class PulseKind(enum.Enum):
    SQ_PI_F1 = "sq_pi_f1"
    DQ_TWO_TONE = "dq_two_tone"


_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PulseSpec:
    """Hard RF pulse: kind, tone phases (rad), and a common area scale.

    area_scale multiplies the nominal pulse area (pi for the SQ pulse,
    pi/sqrt(2) per tone for the two-tone DQ pulse) and models RF-gradient
    miscalibration.  detuning_f1/f2 are carried for completeness; an
    instantaneous hard pulse has no duration over which a detuning can
    act, so they do not enter the unitary.
    """

    kind: PulseKind
    phase_f1: float = 0.0
    phase_f2: float = 0.0
    area_scale: float = 1.0
    detuning_f1: float = 0.0
    detuning_f2: float = 0.0

    def __post_init__(self):
        if self.area_scale <= 0:
            raise ValueError("area_scale must be > 0")
        object.__setattr__(self, "phase_f1", self.phase_f1 % _TWO_PI)
        object.__setattr__(self, "phase_f2", self.phase_f2 % _TWO_PI)


@dataclass(frozen=True)
class RotatingFrame:
    """Per-tone phase reference frequencies (Hz) for free evolution.

    f1/f2 = 0 reproduces pulse-phase-reset hardware: coherences accumulate
    phase at their absolute transition frequencies.  Setting f1/f2 to the
    synthesizer frequencies gives phase-synchronized operation where only
    detunings accumulate.
    """

    f1: float = 0.0
    f2: float = 0.0

    @property
    def dq_reference(self) -> float:
        return self.f1 - self.f2

    @classmethod
    def on_resonance(cls, env: FieldEnvironment, c: PhysicalConstants) -> "RotatingFrame":
        f1, f2 = transition_frequencies(env, c)
        return cls(f1=f1, f2=f2)

    @classmethod
    def dq_detuned(cls, env: FieldEnvironment, c: PhysicalConstants,
                   dq_detuning: float) -> "RotatingFrame":
        """On-resonance frame offset so the DQ fringe appears at dq_detuning."""
        f1, f2 = transition_frequencies(env, c)
        return cls(f1=f1 - dq_detuning / 2.0, f2=f2 + dq_detuning / 2.0)


#: Phase-reset convention: fringes at absolute transition frequencies.
ABSOLUTE_FRAME = RotatingFrame(0.0, 0.0)


@dataclass
class SpinState:
    """3x3 density matrix over (m_I = +1, 0, -1)."""

    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (3, 3):
            raise ValueError("rho must be 3x3")

    @classmethod
    def pure(cls, m: int) -> "SpinState":
        rho = np.zeros((3, 3), dtype=complex)
        rho[M_INDEX[m], M_INDEX[m]] = 1.0
        return cls(rho)

    @classmethod
    def maximally_mixed(cls) -> "SpinState":
        return cls(np.eye(3, dtype=complex) / 3.0)

    def validate(self, atol: float = 1e-12) -> None:
        if np.linalg.norm(self.rho - self.rho.conj().T) >= atol:
            raise ValueError("rho is not Hermitian")
        if abs(np.trace(self.rho).real - 1.0) >= atol:
            raise ValueError("trace(rho) != 1")
        if np.linalg.eigvalsh(self.rho).min() < -1e-10:
            raise ValueError("rho has a negative eigenvalue")

    def copy(self) -> "SpinState":
        return SpinState(self.rho.copy())


def populations(state: SpinState) -> tuple[float, float, float]:
    """Diagonal of rho as (p_plus, p_zero, p_minus)."""
    d = np.real(np.diag(state.rho))
    return float(d[0]), float(d[1]), float(d[2])


def dq_splitting(B, c: PhysicalConstants = LITERATURE_CONSTANTS):
    """Splitting between |+1> and |-1> at bias field B (G). Array-friendly.

    Raises SingularSplittingError near the ground-state level anticrossing
    where the denominator D**2 - (gamma_e*B)**2 vanishes.
    """
    B = np.asarray(B, dtype=float)
    if np.any(B < 0):
        raise ValueError("B must be >= 0")
    denom = c.D**2 - (c.gamma_e * B) ** 2
    if np.any(np.abs(denom) < 1e-6 * c.D**2):
        raise SingularSplittingError(
            "D**2 - (gamma_e*B)**2 is near zero (level anticrossing regime)"
        )
    out = 2.0 * B * c.gamma_n * (1.0 - (c.gamma_e / c.gamma_n) * c.A_perp**2 / denom)
    return float(out) if out.ndim == 0 else out


def transition_frequencies(env: FieldEnvironment,
                           c: PhysicalConstants = LITERATURE_CONSTANTS):
    """(f1, f2) of the |0><->|+1| and |0><->|-1| transitions in Hz.

    f1 - f2 equals dq_splitting at B + delta_B; (f1 + f2)/2 = Q + delta_Q,
    so a quadrupole perturbation moves both carriers common-mode and
    leaves the DQ interval untouched.
    """
    f_dq = dq_splitting(env.B + env.delta_B, c)
    center = c.Q + env.delta_Q
    return center + f_dq / 2.0, center - f_dq / 2.0


def pulse_unitary(p: PulseSpec,
                  env: FieldEnvironment | None = None,
                  c: PhysicalConstants | None = None) -> np.ndarray:
    """Unitary of a hard RF pulse in the (+1, 0, -1) basis.

    env and c are accepted for interface symmetry with free evolution but
    are unused: hard pulses depend only on areas and phases.

    SQ_PI_F1 rotates the {+1, 0} two-level subspace by pi*area_scale about
    the axis set by phase_f1.  DQ_TWO_TONE drives both SQ subspaces
    simultaneously with per-tone area (pi/sqrt(2))*area_scale; the bright
    superposition of |+-1> then sees an effective angle pi*area_scale, so
    the ideal pulse maps |0> onto an equal |+-1> superposition.
    """
    del env, c
    if p.kind is PulseKind.SQ_PI_F1:
        half = 0.5 * math.pi * p.area_scale
        ch, sh = math.cos(half), math.sin(half)
        e1 = np.exp(-1j * p.phase_f1)
        return np.array(
            [
                [ch, -1j * sh * e1, 0.0],
                [-1j * sh / e1, ch, 0.0],
                [0.0, 0.0, 1.0],
            ],
            dtype=complex,
        )
    if p.kind is PulseKind.DQ_TWO_TONE:
        # Per-tone area (pi/sqrt(2))*scale -> bright-state angle pi*scale.
        half = 0.5 * math.pi * p.area_scale
        ch, sh = math.cos(half), math.sin(half)
        e1 = np.exp(-1j * p.phase_f1)
        e2 = np.exp(-1j * p.phase_f2)
        s2 = math.sqrt(2.0)
        return np.array(
            [
                [(1.0 + ch) / 2.0, -1j * sh * e1 / s2, (ch - 1.0) / 2.0 * e1 / e2],
                [-1j * sh / (e1 * s2), ch, -1j * sh / (e2 * s2)],
                [(ch - 1.0) / 2.0 * e2 / e1, -1j * sh * e2 / s2, (1.0 + ch) / 2.0],
            ],
            dtype=complex,
        )
    raise ValueError(f"unknown pulse kind {p.kind!r}")


def apply_pulse(state: SpinState, p: PulseSpec) -> SpinState:
    U = pulse_unitary(p)
    return SpinState(U @ state.rho @ U.conj().T)


def frame_detunings(env: FieldEnvironment, c: PhysicalConstants,
                    frame: RotatingFrame) -> tuple[float, float]:
    """Per-tone phase accumulation rates (Hz) including the rotation shift."""
    f1, f2 = transition_frequencies(env, c)
    return f1 + env.nu - frame.f1, f2 - env.nu - frame.f2


def evolve_free(state: SpinState, tau: float, env: FieldEnvironment,
                c: PhysicalConstants, t2star: float, *,
                t2_sq: float | None = None,
                frame: RotatingFrame = ABSOLUTE_FRAME) -> SpinState:
    """Free precession for tau seconds with exponential dephasing.

    Populations are untouched.  The DQ coherence <+1|rho|-1> turns at
    (f_DQ + 2*nu) - frame.dq_reference and decays with t2star; the SQ
    coherences turn at their own detunings and decay with t2_sq
    (defaulting to the same t2star).
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if t2star <= 0:
        raise ValueError("t2star must be > 0")
    t2_sq = t2star if t2_sq is None else t2_sq
    d1, d2 = frame_detunings(env, c, frame)
    phases = np.array(
        [np.exp(-2j * np.pi * d1 * tau), 1.0, np.exp(-2j * np.pi * d2 * tau)]
    )
    damp_sq = math.exp(-tau / t2_sq)
    damp_dq = math.exp(-tau / t2star)
    decay = np.array(
        [
            [1.0, damp_sq, damp_dq],
            [damp_sq, 1.0, damp_sq],
            [damp_dq, damp_sq, 1.0],
        ]
    )
    rho = state.rho * np.outer(phases, phases.conj()) * decay
    return SpinState(rho)


def evolution_factor(tau: float, delta1, delta2, t2_dq: float,
                     t2_sq: float) -> np.ndarray:
    """Elementwise factor applied to rho by evolve_free; broadcasts over
    arrays of detunings (leading axes), returning (..., 3, 3)."""
    delta1 = np.asarray(delta1, dtype=float)
    delta2 = np.asarray(delta2, dtype=float)
    ones = np.ones_like(delta1)
    phases = np.stack(
        [np.exp(-2j * np.pi * delta1 * tau), ones.astype(complex),
         np.exp(-2j * np.pi * delta2 * tau)], axis=-1
    )
    damp_sq = math.exp(-tau / t2_sq)
    damp_dq = math.exp(-tau / t2_dq)
    decay = np.array(
        [
            [1.0, damp_sq, damp_dq],
            [damp_sq, 1.0, damp_sq],
            [damp_dq, damp_sq, 1.0],
        ]
    )
    return phases[..., :, None] * phases[..., None, :].conj() * decay
