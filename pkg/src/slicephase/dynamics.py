"""Propagation of ensemble members through a slice-phase pulse.

Every sample starts in ``|g>``; the figure of merit is the transfer
amplitude ``<e|U|g>``, i.e. the ``b`` entry of the Cayley-Klein pair of the
full propagator.  Work is vectorized over samples and segments; products
along the time axis use log-depth scans.  Per-sample results never depend on
how samples are chunked across workers and all weighted sums are exact-rounded
(``math.fsum``), so results are identical for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, Sequence

import numpy as np

from .ensemble import SampleSet
from .pulse import (DEFAULT_RAMP_SUBSTEPS, Segment, SliceSchedule, segment_table)
from .su2 import cayley_klein, ck_mul, ck_to_matrix


class FidelityPair(NamedTuple):
    f_real: float
    f_imag: float


class FidelityTrace(NamedTuple):
    times: np.ndarray
    values: np.ndarray


def resolve_threads(threads: int | None) -> int:
    """``0`` or ``None`` means one worker per CPU."""
    if not threads:
        return os.cpu_count() or 1
    return max(1, int(threads))


# Chunk boundaries are fixed multiples of this size whatever the worker
# count: numpy's vectorized kernels can round differently in loop tails.
CHUNK = 128


def _map_chunks(func, n: int, threads: int | None):
    """Apply ``func(lo, hi)`` over fixed sample chunks and return results in order."""
    spans = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)] or [(0, 0)]
    workers = min(resolve_threads(threads), len(spans))
    if workers == 1:
        return [func(lo, hi) for lo, hi in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda span: func(*span), spans))


def segment_unitaries(phases, durations, delta, omega):
    """Cayley-Klein pairs of shape ``(S, M)`` for ``S`` samples, ``M`` segments."""
    phases = np.asarray(phases, dtype=float)[None, :]
    durations = np.asarray(durations, dtype=float)[None, :]
    omega = np.asarray(omega, dtype=float)[:, None]
    delta = np.asarray(delta, dtype=float)[:, None]
    return cayley_klein(omega * np.cos(phases), omega * np.sin(phases), delta, durations)


def _tree_product(a, b):
    """Time-ordered product along the last axis (later segments on the left)."""
    while a.shape[-1] > 1:
        if a.shape[-1] % 2:
            a = np.concatenate([a, np.ones_like(a[..., :1])], axis=-1)
            b = np.concatenate([b, np.zeros_like(b[..., :1])], axis=-1)
        a, b = ck_mul(a[..., 1::2], b[..., 1::2], a[..., 0::2], b[..., 0::2])
    return a[..., 0], b[..., 0]


def prefix_products(a, b):
    """Inclusive scan: entry ``j`` holds ``U_j ... U_0`` (Hillis-Steele)."""
    a = a.copy()
    b = b.copy()
    m = a.shape[-1]
    d = 1
    while d < m:
        na, nb = ck_mul(a[..., d:], b[..., d:], a[..., :-d], b[..., :-d])
        a[..., d:] = na
        b[..., d:] = nb
        d *= 2
    return a, b


def suffix_products(a, b):
    """Inclusive reverse scan: entry ``j`` holds ``U_{M-1} ... U_j``."""
    a = a.copy()
    b = b.copy()
    m = a.shape[-1]
    d = 1
    while d < m:
        na, nb = ck_mul(a[..., d:], b[..., d:], a[..., :-d], b[..., :-d])
        a[..., :-d] = na
        b[..., :-d] = nb
        d *= 2
    return a, b


def propagate(segments: Sequence[Segment], delta_eff: float, omega_R: float) -> np.ndarray:
    """Full 2x2 propagator of one atom through a list of segments."""
    if len(segments) == 0:
        return np.eye(2, dtype=complex)
    phases = np.array([s.phase for s in segments], dtype=float)
    durations = np.array([s.duration for s in segments], dtype=float)
    if np.any(durations < 0) or not np.all(np.isfinite(durations)):
        raise ValueError("segment durations must be finite and non-negative")
    a, b = segment_unitaries(phases, durations, [delta_eff], [omega_R])
    a, b = _tree_product(a, b)
    return ck_to_matrix(a[0], b[0])


def excited_population(u: np.ndarray) -> float:
    """``|<e|U|g>|^2``."""
    return float(abs(np.asarray(u)[0, 1]) ** 2)


def fidelity_single(u: np.ndarray) -> FidelityPair:
    amp = complex(np.asarray(u)[0, 1])
    return FidelityPair(amp.real, amp.imag)


def transfer_amplitudes(schedule: SliceSchedule, samples: SampleSet,
                        ramp_substeps: int = DEFAULT_RAMP_SUBSTEPS,
                        threads: int | None = 1) -> np.ndarray:
    """Complex ``<e|U(T,0)|g>`` for every sample, in sample order."""
    table = segment_table(schedule, ramp_substeps)

    def work(lo, hi):
        a, b = segment_unitaries(table.phases, table.durations,
                                 samples.delta[lo:hi], samples.omega[lo:hi])
        return _tree_product(a, b)[1]

    return np.concatenate(_map_chunks(work, len(samples), threads))


def weighted_mean(weights, values) -> float:
    """Order-independent, exactly rounded ``sum(w * v)``."""
    return math.fsum(np.asarray(weights) * np.asarray(values))


def ensemble_fidelity(schedule: SliceSchedule, samples: SampleSet,
                      ramp_substeps: int = DEFAULT_RAMP_SUBSTEPS,
                      threads: int | None = 1) -> float:
    """Weighted mean of ``Re <e|U|g>`` over the ensemble."""
    amps = transfer_amplitudes(schedule, samples, ramp_substeps, threads)
    return weighted_mean(samples.weight, amps.real)


def ensemble_population(schedule: SliceSchedule, samples: SampleSet,
                        ramp_substeps: int = DEFAULT_RAMP_SUBSTEPS,
                        threads: int | None = 1) -> float:
    """Weighted mean of the excited population over the ensemble."""
    amps = transfer_amplitudes(schedule, samples, ramp_substeps, threads)
    return weighted_mean(samples.weight, np.abs(amps) ** 2)


def fidelity_trace(schedule: SliceSchedule, samples: SampleSet, n_times: int = 201,
                   ramp_substeps: int = DEFAULT_RAMP_SUBSTEPS,
                   threads: int | None = 1) -> FidelityTrace:
    """Ensemble fidelity of the truncated propagator ``U(t, 0)``.

    Times are uniform on ``[0, T]``; a time inside a segment propagates
    exactly through the elapsed part of it.
    """
    if n_times < 2:
        raise ValueError("n_times must be >= 2")
    table = segment_table(schedule, ramp_substeps)
    keep = table.durations > 0
    phases = table.phases[keep]
    durations = table.durations[keep]
    starts = np.concatenate([[0.0], np.cumsum(durations)[:-1]])
    times = np.linspace(0.0, schedule.total_T, n_times)
    # segment active at each time; t = T sits at the end of the last segment
    idx = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(durations) - 1)
    elapsed = np.clip(times - starts[idx], 0.0, durations[idx])

    def work(lo, hi):
        delta = samples.delta[lo:hi]
        omega = samples.omega[lo:hi]
        a, b = segment_unitaries(phases, durations, delta, omega)
        pa, pb = prefix_products(a, b)
        # product of the segments completed before segment idx
        ones = np.ones_like(pa[:, :1])
        zeros = np.zeros_like(pb[:, :1])
        pa = np.concatenate([ones, pa], axis=1)[:, idx]
        pb = np.concatenate([zeros, pb], axis=1)[:, idx]
        ua, ub = cayley_klein(omega[:, None] * np.cos(phases[idx])[None, :],
                              omega[:, None] * np.sin(phases[idx])[None, :],
                              delta[:, None], elapsed[None, :])
        return ck_mul(ua, ub, pa, pb)[1].real

    values = np.concatenate(_map_chunks(work, len(samples), threads), axis=0)
    trace = np.array([weighted_mean(samples.weight, values[:, j]) for j in range(n_times)])
    return FidelityTrace(times, trace)


class SegmentGradient(NamedTuple):
    """Ensemble fidelity and its derivatives with respect to segment controls."""

    fidelity: float
    d_phase: np.ndarray
    d_duration: np.ndarray


def segment_gradient(phases, durations, samples: SampleSet,
                     threads: int | None = 1) -> SegmentGradient:
    """Exact derivatives of the ensemble fidelity per segment.

    For segment ``s`` with forward product ``P`` (up to and including ``s``)
    and backward product ``Q`` (after ``s``):

    * duration: ``dU_s/dd = -i H_s U_s`` so ``dF/dd = Re(-i (Q H_s P)_{eg})``;
    * phase: ``U_s(phi) = Rz(phi) U_s(0) Rz(-phi)`` so
      ``dU_s/dphi = -(i/2) [sz, U_s]``, which telescopes into the difference
      of ``(Q sz P)_{eg}`` at the segment's two boundaries.
    """
    phases = np.asarray(phases, dtype=float)
    durations = np.asarray(durations, dtype=float)
    cos_p = np.cos(phases)
    sin_p = np.sin(phases)

    def work(lo, hi):
        delta = samples.delta[lo:hi]
        omega = samples.omega[lo:hi]
        a, b = segment_unitaries(phases, durations, delta, omega)
        pa, pb = prefix_products(a, b)
        qa, qb = suffix_products(a, b)
        s = a.shape[0]
        one = np.ones((s, 1), dtype=complex)
        zero = np.zeros((s, 1), dtype=complex)
        # boundary j = 0..M: P^(j) = first j segments, Q^(j) = segments j..M-1
        Pa = np.concatenate([one, pa], axis=1)
        Pb = np.concatenate([zero, pb], axis=1)
        Qa = np.concatenate([qa, one], axis=1)
        Qb = np.concatenate([qb, zero], axis=1)
        g = Qa * Pb - Qb * np.conj(Pa)
        d_phase = (-0.5j * (g[:, 1:] - g[:, :-1])).real
        # H at segment s sandwiched between Q^(s+1) and P^(s+1)
        qa1, qb1 = Qa[:, 1:], Qb[:, 1:]
        pa1, pb1 = Pa[:, 1:], Pb[:, 1:]
        cx = omega[:, None] * cos_p[None, :]
        cy = omega[:, None] * sin_p[None, :]
        cz = delta[:, None] * np.ones_like(phases)[None, :]
        row0 = qa1 * cz + qb1 * (cx + 1j * cy)
        row1 = qa1 * (cx - 1j * cy) - qb1 * cz
        k = 0.5 * (row0 * pb1 + row1 * np.conj(pa1))
        d_duration = (-1j * k).real
        return Pb[:, -1].real, d_phase, d_duration

    parts = _map_chunks(work, len(samples), threads)
    fid = np.concatenate([p[0] for p in parts])
    d_phase = np.concatenate([p[1] for p in parts], axis=0)
    d_duration = np.concatenate([p[2] for p in parts], axis=0)
    w = samples.weight
    return SegmentGradient(weighted_mean(w, fid), w @ d_phase, w @ d_duration)
