"""Trajectory post-processing: basis conversion, frequency extraction, fits.

All operations are pure functions over immutable trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .errors import FitFailureError, NoOscillationError
from .model import Basis, DriveParameters, crossing_times, eigenbasis_at, epsilon_at
from .propagator import Trajectory


@dataclass(frozen=True)
class AdiabaticMask:
    """Samples where |eps(t)| > threshold_ratio * delta.

    Outside the mask the diabatic and adiabatic bases differ by more than
    (1 - cos(theta))/2 evaluated at the threshold (2.57% for the default
    ratio of 3), so population relabeling between the bases stops being
    harmless there.
    """

    threshold_ratio: float = 3.0
    kept_indices: tuple[int, ...] = ()

    def __post_init__(self):
        if self.threshold_ratio <= 0:
            raise ValueError("threshold_ratio must be positive")

    @classmethod
    def build(cls, traj: Trajectory, p: DriveParameters, threshold_ratio: float = 3.0) -> "AdiabaticMask":
        eps = np.asarray(epsilon_at(p, traj.times))
        kept = np.nonzero(np.abs(eps) > threshold_ratio * p.delta_mhz)[0]
        return cls(threshold_ratio, tuple(int(i) for i in kept))


@dataclass(frozen=True)
class FitResult:
    """Extracted oscillation parameters; the residual is always reported."""

    frequency_mhz: float
    amplitude: float
    residual_rms: float
    decay_time_us: float | None = None

    def __post_init__(self):
        if self.frequency_mhz <= 0:
            raise ValueError("frequency_mhz must be positive")


def basis_discrepancy(ratio: float) -> float:
    """Wrong-branch weight (1 - cos(theta))/2 at |eps| = ratio * delta."""
    return (1.0 - ratio / math.hypot(ratio, 1.0)) / 2.0


def to_adiabatic(traj: Trajectory, p: DriveParameters, mask: AdiabaticMask | None = None) -> Trajectory:
    """Rotate a diabatic trajectory into the instantaneous eigenbasis.

    Samples failing |eps(t)| > threshold_ratio * delta are dropped; the
    remaining states are rotated exactly (amplitudes required), so total
    probability is preserved sample by sample and the conversion is
    invertible via `to_diabatic`.
    """
    if traj.basis is not Basis.DIABATIC:
        raise ValueError("trajectory is already in the adiabatic basis")
    if traj.amplitudes is None:
        raise ValueError("basis conversion needs per-sample amplitudes")
    if mask is None or not mask.kept_indices:
        ratio = mask.threshold_ratio if mask is not None else 3.0
        mask = AdiabaticMask.build(traj, p, ratio)
    idx = np.array(mask.kept_indices, dtype=int)
    if idx.size == 0:
        raise ValueError("mask keeps no samples; drive never leaves the crossing region")
    times = traj.times[idx]
    amps = np.empty((idx.size, 2), dtype=complex)
    for j, i in enumerate(idx):
        v = eigenbasis_at(p, traj.times[i])
        amps[j] = v.conj().T @ traj.amplitudes[i]
    return Trajectory(times, np.abs(amps) ** 2, Basis.ADIABATIC, amplitudes=amps)


def to_diabatic(traj: Trajectory, p: DriveParameters) -> Trajectory:
    """Inverse of `to_adiabatic` on whatever samples the trajectory carries."""
    if traj.basis is not Basis.ADIABATIC:
        raise ValueError("trajectory is not in the adiabatic basis")
    if traj.amplitudes is None:
        raise ValueError("basis conversion needs per-sample amplitudes")
    amps = np.empty_like(traj.amplitudes)
    for i, t in enumerate(traj.times):
        amps[i] = eigenbasis_at(p, t) @ traj.amplitudes[i]
    return Trajectory(traj.times, np.abs(amps) ** 2, Basis.DIABATIC, amplitudes=amps)


def _uniform_signal(traj: Trajectory) -> tuple[np.ndarray, float]:
    """P0 samples on a uniform grid; a trailing partial sample is dropped."""
    t = traj.times
    if t.size < 8:
        raise ValueError("trajectory too short for spectral analysis")
    dt = np.diff(t)
    x = traj.p0
    if not math.isclose(dt[-1], dt[0], rel_tol=1e-6):
        t, x, dt = t[:-1], x[:-1], dt[:-1]
    if not np.allclose(dt, dt[0], rtol=1e-6):
        raise ValueError("spectral analysis requires uniform sampling")
    return np.asarray(x, dtype=float), float(dt[0])


def _spectral_peak(x: np.ndarray, dt_ns: float, k_min: int) -> tuple[float, float, float]:
    """Dominant frequency (MHz) via Hann-windowed DFT + quadratic interpolation.

    Returns (frequency_mhz, peak_magnitude, median_floor); bins below k_min
    are excluded, which also enforces a minimum cycle count in the window.
    """
    x = x - np.mean(x)
    # anything below ~1e-9 is integrator truncation noise, not an oscillation
    if float(np.std(x)) < 1e-9:
        raise NoOscillationError("signal is constant")
    w = np.hanning(x.size)
    mag = np.abs(np.fft.rfft(x * w))
    if k_min + 1 >= mag.size - 1:
        raise ValueError("too few samples for the requested minimum frequency")
    k = int(np.argmax(mag[k_min:]) + k_min)
    floor = float(np.median(mag[k_min:]))
    peak = float(mag[k])
    if peak <= 3.0 * floor or peak == 0.0:
        raise NoOscillationError(
            f"no spectral peak above 3x the median floor (peak {peak:.3g}, floor {floor:.3g})"
        )
    if 1 <= k < mag.size - 1 and mag[k - 1] > 0 and mag[k + 1] > 0:
        la, l0, lb = np.log(mag[k - 1]), np.log(mag[k]), np.log(mag[k + 1])
        denom = la - 2 * l0 + lb
        dk = 0.5 * (la - lb) / denom if denom != 0 else 0.0
    else:
        dk = 0.0
    df_mhz = 1e3 / (x.size * dt_ns)
    return (k + dk) * df_mhz, peak, floor


def rabi_frequency(traj: Trajectory, min_cycles: int = 3) -> FitResult:
    """Dominant oscillation frequency of P0 from a uniformly sampled trajectory.

    Windowed DFT with local quadratic peak interpolation; the amplitude and
    residual come from a linear least-squares cosine fit at the found
    frequency, so offsets and time shifts do not bias the estimate.
    """
    x, dt = _uniform_signal(traj)
    f_mhz, _, _ = _spectral_peak(x, dt, k_min=min_cycles)
    t = np.arange(x.size) * dt
    ph = 2e-3 * math.pi * f_mhz * t
    basis = np.column_stack([np.cos(ph), np.sin(ph), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(basis, x, rcond=None)
    resid = x - basis @ coef
    amplitude = float(math.hypot(coef[0], coef[1]))
    return FitResult(
        frequency_mhz=float(f_mhz),
        amplitude=amplitude,
        residual_rms=float(np.sqrt(np.mean(resid**2))),
    )


def ramsey_fit(traj: Trajectory) -> FitResult:
    """Least-squares fit of A exp[-(t/T*)^2] cos(2 pi f t) + c to P0(t).

    Times are fitted in us, so the returned decay time is in us and the
    frequency in MHz.
    """
    t_us = traj.times / 1000.0
    x = np.asarray(traj.p0, dtype=float)
    if float(np.std(x)) < 1e-12:
        raise FitFailureError("signal is constant; nothing to fit")

    xs, dt = _uniform_signal(traj)
    try:
        f0, _, _ = _spectral_peak(xs, dt, k_min=1)
    except NoOscillationError as exc:
        raise FitFailureError(f"no fringe to fit: {exc}") from exc

    def model(t, a, t_star, f, c):
        return a * np.exp(-((t / t_star) ** 2)) * np.cos(2 * math.pi * f * t) + c

    c0 = float(np.mean(x))
    a0 = float(x[0] - c0)
    if a0 == 0.0:
        a0 = float((np.max(x) - np.min(x)) / 2)
    span = float(t_us[-1] - t_us[0])
    p0 = [a0, span / 2, f0, c0]
    try:
        popt, _ = curve_fit(
            model, t_us, x, p0=p0,
            bounds=([-2.0, 1e-3, 1e-6, -1.0], [2.0, 1e4, 1e4, 2.0]),
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise FitFailureError(f"fit did not converge from f0={f0:.4g} MHz: {exc}") from exc
    resid = x - model(t_us, *popt)
    return FitResult(
        frequency_mhz=float(popt[2]),
        amplitude=float(abs(popt[0])),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        decay_time_us=float(popt[1]),
    )


@dataclass(frozen=True)
class StepEvent:
    """Population change across one crossing window."""

    time_ns: float
    jump: float
    complete: bool


def detect_steps(traj: Trajectory, p: DriveParameters, window_fraction: float = 0.1) -> list[StepEvent]:
    """Signed P0 change across a window of width T*window_fraction at each crossing.

    Windows clipped by the trajectory bounds yield a partial result flagged
    ``complete=False``.  The window width is a reporting choice, not physics;
    it is recorded by callers that serialize results.
    """
    if traj.basis is not Basis.DIABATIC:
        raise ValueError("step detection expects diabatic populations")
    half = p.period_ns * window_fraction / 2
    t0, t1 = traj.times[0], traj.times[-1]
    events = []
    for tc in crossing_times(p):
        if tc < t0 or tc > t1:
            continue
        lo, hi = tc - half, tc + half
        complete = lo >= t0 and hi <= t1
        lo, hi = max(lo, t0), min(hi, t1)
        p_lo = float(np.interp(lo, traj.times, traj.p0))
        p_hi = float(np.interp(hi, traj.times, traj.p0))
        events.append(StepEvent(tc, p_hi - p_lo, complete))
    return events
