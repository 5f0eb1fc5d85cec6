"""Physical parameterization of the driven two-level model.

Unit policy
-----------
Every public interface speaks ordinary frequencies in MHz and times in ns
(dephasing times in us where noted).  All internal dynamics use angular
frequency in rad/ns.  Since 1 MHz is exactly one cycle per microsecond, the
conversion is ``omega = 2e-3 * pi * f_mhz`` and is lossless both ways.

The effective Hamiltonian in the frame rotating at the qubit frequency is

    H(t) = eps(t)/2 * sigma_z + delta/2 * sigma_x        (angular units)

where eps(t) is a symmetric triangle wave of amplitude eps_m and period T,
starting at -eps_m, and delta is the drive-induced coupling (the gap of the
avoided crossing at eps = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateDriveError

#: rad/ns per MHz; exactly 2*pi*1e-3.
RAD_PER_NS_PER_MHZ = 2.0e-3 * math.pi


def mhz_to_angular(f_mhz):
    """Ordinary frequency in MHz -> angular frequency in rad/ns."""
    return RAD_PER_NS_PER_MHZ * f_mhz


def angular_to_mhz(omega):
    """Angular frequency in rad/ns -> ordinary frequency in MHz."""
    return omega / RAD_PER_NS_PER_MHZ


class Basis(str, Enum):
    """Basis tag for states and trajectories."""

    DIABATIC = "diabatic"
    ADIABATIC = "adiabatic"


@dataclass(frozen=True)
class DriveParameters:
    """Triangle-wave frequency-modulated drive.

    delta_mhz      coupling (avoided-crossing gap) in MHz; >= 0
    epsilon_m_mhz  triangle amplitude in MHz (detuning sweeps -eps_m..+eps_m)
    period_ns      triangle period T in ns
    n_periods      number of drive periods in the simulated window
    t_offset_ns    shift of the triangle's origin; 0 starts at eps = -eps_m
    """

    delta_mhz: float
    epsilon_m_mhz: float
    period_ns: float
    n_periods: int = 1
    t_offset_ns: float = 0.0

    def __post_init__(self):
        # Several operations (pure dephasing runs, sweep-rate limits) need
        # delta = 0, so zero is allowed even though a real drive has delta > 0.
        if self.delta_mhz < 0:
            raise ValueError(f"delta_mhz must be >= 0, got {self.delta_mhz}")
        if self.epsilon_m_mhz < 0:
            raise ValueError(f"epsilon_m_mhz must be >= 0, got {self.epsilon_m_mhz}")
        if self.period_ns <= 0:
            raise ValueError(f"period_ns must be positive, got {self.period_ns}")
        if self.n_periods < 1:
            raise ValueError(f"n_periods must be >= 1, got {self.n_periods}")

    @property
    def delta_ang(self) -> float:
        return mhz_to_angular(self.delta_mhz)

    @property
    def epsilon_m_ang(self) -> float:
        return mhz_to_angular(self.epsilon_m_mhz)

    @property
    def total_time_ns(self) -> float:
        return self.n_periods * self.period_ns


@dataclass(frozen=True)
class NVParameters:
    """Ground-state level-structure constants of an NV center.

    d_zfs_mhz   zero-field splitting D (MHz)
    gamma_e     electron gyromagnetic ratio (MHz/G)
    a_zz_mhz    hyperfine coupling to the host 15N nucleus (MHz)
    b_field_g   static field along the symmetry axis (G)
    i_z         nuclear spin projection; exactly +1/2 or -1/2 (I = 1/2)
    """

    d_zfs_mhz: float = 2870.0
    gamma_e_mhz_per_g: float = 2.8
    a_zz_mhz: float = -3.05
    b_field_g: float = 510.0
    i_z: float = -0.5

    def __post_init__(self):
        if self.i_z not in (-0.5, 0.5):
            raise ValueError(f"i_z must be exactly +-1/2, got {self.i_z}")


@dataclass(frozen=True)
class QubitState:
    """Normalized two-component state (amp0, amp1) in the tagged basis."""

    amp0: complex
    amp1: complex
    basis: Basis = Basis.DIABATIC

    def __post_init__(self):
        norm_sq = abs(self.amp0) ** 2 + abs(self.amp1) ** 2
        if abs(norm_sq - 1.0) > 1e-9:
            raise ValueError(f"state not normalized: |amp|^2 = {norm_sq!r}")

    @classmethod
    def ket0(cls, basis: Basis = Basis.DIABATIC) -> "QubitState":
        return cls(1.0 + 0.0j, 0.0j, basis)

    @classmethod
    def ket1(cls, basis: Basis = Basis.DIABATIC) -> "QubitState":
        return cls(0.0j, 1.0 + 0.0j, basis)

    def as_array(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    @property
    def populations(self) -> tuple[float, float]:
        return abs(self.amp0) ** 2, abs(self.amp1) ** 2


def epsilon_at(p: DriveParameters, t):
    """Instantaneous detuning eps(t) in MHz; t in ns (scalar or array).

    Piecewise linear: rises from -eps_m at the period start to +eps_m at T/2,
    then falls back.  Periodic for all t >= 0; breakpoints are exact.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("epsilon_at requires t >= 0")
    T = p.period_ns
    em = p.epsilon_m_mhz
    u = np.mod(t_arr + p.t_offset_ns, T)
    value = np.where(u < T / 2, -em + 4 * em * u / T, em - 4 * em * (u - T / 2) / T)
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(value)
    return value


def epsilon_integral(p: DriveParameters, t):
    """Phase-style integral of the detuning, int_0^t eps(u) du, in MHz*ns.

    Used for the lab-frame drive phase.  The triangle has zero mean, so the
    integral is periodic; it is evaluated in closed form per branch.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("epsilon_integral requires t >= 0")
    T = p.period_ns
    em = p.epsilon_m_mhz

    def antiderivative(u):
        # F(u) = int_0^u triangle, for u in [0, T); F(0) = F(T/2) = 0.
        u = np.mod(u, T)
        first = -em * u + 2 * em * u**2 / T
        v = u - T / 2
        second = em * v - 2 * em * v**2 / T
        return np.where(u < T / 2, first, second)

    result = antiderivative(t_arr + p.t_offset_ns) - antiderivative(p.t_offset_ns)
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(result)
    return result


def crossing_times(p: DriveParameters) -> list[float]:
    """Times in [0, n_periods*T] where eps(t) = 0, sorted ascending.

    The triangle crosses zero twice per period, at T/4 and 3T/4 relative to
    the period start.  Returns an empty list when epsilon_m = 0.
    """
    if p.epsilon_m_mhz == 0:
        return []
    T = p.period_ns
    t_end = p.total_time_ns
    # eps(t) = 0 when (t + t_offset) = T/4 mod T/2
    first = math.fmod(T / 4 - p.t_offset_ns, T / 2)
    if first < 0:
        first += T / 2
    times = []
    k = 0
    while True:
        t = first + k * (T / 2)
        if t > t_end + 1e-12:
            break
        times.append(t)
        k += 1
    return times


def sweep_rate(p: DriveParameters) -> float:
    """Detuning sweep rate at a crossing, v = 4*eps_m/T, in MHz/ns."""
    if p.epsilon_m_mhz == 0:
        raise DegenerateDriveError("sweep rate undefined for epsilon_m = 0")
    return 4 * p.epsilon_m_mhz / p.period_ns


def nv_transition_frequency(nv: NVParameters) -> float:
    """|ms=0> -> |ms=+1> transition frequency in MHz: D + gamma_e*B + A_zz*I_z."""
    return nv.d_zfs_mhz + nv.gamma_e_mhz_per_g * nv.b_field_g + nv.a_zz_mhz * nv.i_z


def mixing_angle_at(p: DriveParameters, t, epsilon_offset_mhz: float = 0.0):
    """Instantaneous mixing angle theta(t) in [0, pi].

    cos(theta) = eps/Omega and sin(theta) = delta/Omega with
    Omega = sqrt(eps^2 + delta^2); theta -> pi for eps -> -inf and theta -> 0
    for eps -> +inf, continuous through the crossing.
    """
    eps = np.asarray(epsilon_at(p, t), dtype=float) + epsilon_offset_mhz
    return np.arctan2(p.delta_mhz, eps)


def eigenbasis_at(p: DriveParameters, t: float, epsilon_offset_mhz: float = 0.0) -> np.ndarray:
    """Columns (|g>, |e>) of the instantaneous eigenbasis at time t.

    |g> = (-sin(theta/2), cos(theta/2)), |e> = (cos(theta/2), sin(theta/2)).
    The column phases are continuous along the sweep, which keeps transfer
    matrices extracted at successive crossings mutually consistent.
    """
    th = float(mixing_angle_at(p, t, epsilon_offset_mhz))
    c, s = math.cos(th / 2), math.sin(th / 2)
    return np.array([[-s, c], [c, s]], dtype=complex)
