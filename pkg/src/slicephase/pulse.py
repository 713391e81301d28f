"""Slice-phase control pulses with a finite phase-modulator response time.

A pulse is ``N`` consecutive slices; slice ``k`` has duration ``dt_k`` and
commanded phase ``phi_k``.  With a response time ``tau`` the modulator moves
linearly from ``phi_{k-1}`` to ``phi_k`` during the first ``tau`` of every
slice ``k >= 2``; the first slice starts settled at ``phi_1``.  Ramps use the
stored phases in ``[0, 2 pi)`` as they are, without shortest-path unwrapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi
DEFAULT_RAMP_SUBSTEPS = 16


class InvalidScheduleError(ValueError):
    """A slice schedule violates its duration or response-time constraints."""


@dataclass(frozen=True)
class SliceSchedule:
    """Immutable slice-phase pulse.

    Attributes
    ----------
    durations : np.ndarray
        Slice durations in seconds.
    phases : np.ndarray
        Commanded phases, wrapped into ``[0, 2 pi)`` on construction.
    tau_resp : float
        Modulator response time in seconds.
    symmetric : bool
        Whether durations and phases are mirror symmetric about the center.
    """

    durations: np.ndarray
    phases: np.ndarray
    tau_resp: float = 0.0
    symmetric: bool = False
    total_T: float = field(init=False)

    def __post_init__(self):
        durations = np.array(self.durations, dtype=float).reshape(-1)
        phases = np.mod(np.array(self.phases, dtype=float).reshape(-1), TWO_PI)
        # mod can round up to exactly 2 pi
        phases[phases >= TWO_PI] = 0.0
        if durations.size == 0:
            raise InvalidScheduleError("schedule needs at least one slice")
        if durations.shape != phases.shape:
            raise InvalidScheduleError(
                f"{durations.size} durations but {phases.size} phases")
        if not (np.all(np.isfinite(durations)) and np.all(np.isfinite(phases))):
            raise InvalidScheduleError("durations and phases must be finite")
        if np.any(durations <= 0):
            raise InvalidScheduleError("slice durations must be positive")
        tau = float(self.tau_resp)
        if not math.isfinite(tau) or tau < 0:
            raise InvalidScheduleError(f"tau_resp must be >= 0, got {tau}")
        if tau > durations.min() * (1 + 1e-12):
            raise InvalidScheduleError(
                f"tau_resp={tau:g} s exceeds the shortest slice ({durations.min():g} s)")
        if self.symmetric and not (np.array_equal(durations, durations[::-1])
                                   and np.array_equal(phases, phases[::-1])):
            raise InvalidScheduleError("symmetric flag set on a non-mirrored schedule")
        durations.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "durations", durations)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "tau_resp", tau)
        object.__setattr__(self, "symmetric", bool(self.symmetric))
        object.__setattr__(self, "total_T", math.fsum(durations))

    @property
    def n_slices(self) -> int:
        return int(self.durations.size)

    @property
    def boundaries(self) -> np.ndarray:
        """Slice start times ``t_0 = 0, ..., t_{N-1}`` followed by ``T``."""
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    def with_tau(self, tau_resp: float) -> "SliceSchedule":
        return SliceSchedule(self.durations, self.phases, tau_resp, self.symmetric)

    def check_bounds(self, dt_min: float, dt_max: float, rtol: float = 1e-12) -> None:
        """Raise if any slice lies outside ``[dt_min, dt_max]``."""
        lo = dt_min * (1 - rtol)
        hi = dt_max * (1 + rtol)
        if np.any(self.durations < lo) or np.any(self.durations > hi):
            raise InvalidScheduleError(
                f"slice durations outside [{dt_min:g}, {dt_max:g}] s")


class Segment(NamedTuple):
    phase: float
    duration: float


def phase_at(schedule: SliceSchedule, t: float) -> float:
    """Phase seen by the atoms at time ``t`` (seconds)."""
    if not 0.0 <= t < schedule.total_T:
        raise ValueError(f"t={t} outside [0, {schedule.total_T})")
    starts = schedule.boundaries[:-1]
    k = int(np.searchsorted(starts, t, side="right")) - 1
    k = min(k, schedule.n_slices - 1)
    phi_k = schedule.phases[k]
    tau = schedule.tau_resp
    if k == 0 or tau == 0.0:
        return float(phi_k)
    into = t - starts[k]
    if into < tau:
        phi_prev = schedule.phases[k - 1]
        return float(phi_prev + (phi_k - phi_prev) * into / tau)
    return float(phi_k)


class SegmentTable(NamedTuple):
    """Constant-phase pieces of a schedule plus their parameter Jacobians.

    ``phase_jac[m, k]`` is the derivative of segment ``m``'s phase with
    respect to slice phase ``k`` and ``duration_jac[m, k]`` the derivative of
    its duration with respect to slice duration ``k``.  Flat parts can have
    zero length here; :func:`segmentize` drops them.
    """

    phases: np.ndarray
    durations: np.ndarray
    phase_jac: np.ndarray
    duration_jac: np.ndarray


def segment_table(schedule: SliceSchedule,
                  ramp_substeps: int = DEFAULT_RAMP_SUBSTEPS) -> SegmentTable:
    """Flatten a schedule into constant-phase segments.

    Each ramp becomes ``ramp_substeps`` equal pieces whose phase is the ramp
    value at the piece midpoint.
    """
    if ramp_substeps < 1:
        raise ValueError("ramp_substeps must be >= 1")
    n = schedule.n_slices
    tau = schedule.tau_resp
    phi = schedule.phases
    dur = schedule.durations
    ramped = tau > 0.0 and n > 1
    m = ramp_substeps if ramped else 0
    n_seg = n + (n - 1) * m
    phases = np.empty(n_seg)
    durations = np.empty(n_seg)
    phase_jac = np.zeros((n_seg, n))
    duration_jac = np.zeros((n_seg, n))

    frac = (np.arange(m) + 0.5) / m if m else np.empty(0)
    sub = tau / m if m else 0.0
    ramp_total = sub * m

    phases[0] = phi[0]
    durations[0] = dur[0]
    phase_jac[0, 0] = 1.0
    duration_jac[0, 0] = 1.0
    pos = 1
    for k in range(1, n):
        if m:
            sl = slice(pos, pos + m)
            phases[sl] = phi[k - 1] + (phi[k] - phi[k - 1]) * frac
            durations[sl] = sub
            phase_jac[sl, k - 1] = 1.0 - frac
            phase_jac[sl, k] = frac
            pos += m
        phases[pos] = phi[k]
        durations[pos] = max(dur[k] - ramp_total, 0.0)
        phase_jac[pos, k] = 1.0
        duration_jac[pos, k] = 1.0
        pos += 1
    return SegmentTable(phases, durations, phase_jac, duration_jac)


def segmentize(schedule: SliceSchedule,
               ramp_substeps: int = DEFAULT_RAMP_SUBSTEPS) -> list[Segment]:
    """Constant-phase segments of ``schedule`` in time order."""
    table = segment_table(schedule, ramp_substeps)
    return [Segment(float(p), float(d))
            for p, d in zip(table.phases, table.durations) if d > 0.0]


def rectangular_pi(omega0: float, phase: float = -np.pi / 2) -> SliceSchedule:
    """Single-slice pi pulse of duration ``pi / omega0``.

    The default phase ``-pi/2`` makes the on-resonance transfer amplitude
    ``<e|U|g>`` exactly ``+1``.
    """
    if not omega0 > 0:
        raise ValueError(f"omega0 must be positive, got {omega0}")
    return SliceSchedule([np.pi / omega0], [phase])


def mirror(half: Sequence[float], n: int) -> np.ndarray:
    """Mirror the first ``ceil(n/2)`` entries about the center of ``n``."""
    half = np.asarray(half, dtype=float)
    if half.size != (n + 1) // 2:
        raise ValueError(f"expected {(n + 1) // 2} values for N={n}, got {half.size}")
    return np.concatenate([half, half[: n // 2][::-1]])


def expand_symmetric(half_durations, half_phases, n: int, total_T: float | None = None,
                     tau_resp: float = 0.0) -> SliceSchedule:
    """Build a mirror-symmetric schedule from its first half."""
    durations = mirror(half_durations, n)
    phases = mirror(np.mod(half_phases, TWO_PI), n)
    sched = SliceSchedule(durations, phases, tau_resp, symmetric=True)
    if total_T is not None and not math.isclose(sched.total_T, total_T, rel_tol=1e-12):
        raise InvalidScheduleError(
            f"mirrored durations sum to {sched.total_T:g} s, expected {total_T:g} s")
    return sched
