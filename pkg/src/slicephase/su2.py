"""Closed-form SU(2) algebra for a two-level atom.

Basis convention: ``|e> = (1, 0)`` and ``|g> = (0, 1)``.  A generator
``(cx, cy, cz)`` stands for the Hamiltonian ``H = (cx sx + cy sy + cz sz) / 2``
in units of hbar, so a laser phase ``phi`` with Rabi frequency ``Omega`` and
detuning ``delta`` maps to ``(Omega cos phi, Omega sin phi, delta)``.

Two representations are used.  Public functions take and return plain
``(2, 2)`` complex arrays.  The propagation hot path works on Cayley-Klein
pairs ``(a, b)`` with ``U = [[a, b], [-conj(b), conj(a)]]``, which is exact
for the traceless generators used here and makes batched products cheap.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

KET_E = np.array([1, 0], dtype=complex)
KET_G = np.array([0, 1], dtype=complex)

# below this rotation angle sin(x)/x is replaced by its Taylor series
_SMALL_ANGLE = 1e-8


class GeneratorCoeffs(NamedTuple):
    """Pauli coefficients of ``2 H / hbar`` in rad/s."""

    cx: float
    cy: float
    cz: float

    @classmethod
    def from_control(cls, omega: float, phase: float, delta: float) -> "GeneratorCoeffs":
        return cls(omega * np.cos(phase), omega * np.sin(phase), delta)

    @property
    def rabi(self) -> float:
        """Generalized Rabi frequency ``sqrt(cx^2 + cy^2 + cz^2)``."""
        return float(np.sqrt(self.cx**2 + self.cy**2 + self.cz**2))

    def matrix(self) -> np.ndarray:
        """Hamiltonian ``H / hbar`` as a 2x2 matrix."""
        return 0.5 * (self.cx * SIGMA_X + self.cy * SIGMA_Y + self.cz * SIGMA_Z)


def _check_finite(*values) -> None:
    for v in values:
        if not np.all(np.isfinite(np.asarray(v, dtype=complex))):
            raise ValueError(f"non-finite input: {v!r}")


def _sinc_terms(x):
    """Return ``sin(x)/x`` and ``(x cos x - sin x)/x^3`` with small-x series."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SMALL_ANGLE
    xs = np.where(small, 1.0, x)
    x2 = x * x
    s = np.where(small, 1.0 - x2 / 6.0, np.sin(xs) / xs)
    ds = np.where(small, -1.0 / 3.0 + x2 / 30.0, (xs * np.cos(xs) - np.sin(xs)) / xs**3)
    return s, ds


def cayley_klein(cx, cy, cz, dt):
    """Vectorized ``exp(-i dt H)`` as Cayley-Klein parameters ``(a, b)``.

    All arguments broadcast against each other.
    """
    hx = 0.5 * np.asarray(cx, dtype=float) * dt
    hy = 0.5 * np.asarray(cy, dtype=float) * dt
    hz = 0.5 * np.asarray(cz, dtype=float) * dt
    angle = np.sqrt(hx * hx + hy * hy + hz * hz)
    s, _ = _sinc_terms(angle)
    c = np.cos(angle)
    a = c - 1j * s * hz
    b = -1j * s * (hx - 1j * hy)
    return a, b


def ck_to_matrix(a, b) -> np.ndarray:
    """Expand Cayley-Klein pairs into ``(..., 2, 2)`` matrices."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    out = np.empty(np.broadcast(a, b).shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 0, 1] = b
    out[..., 1, 0] = -np.conj(b)
    out[..., 1, 1] = np.conj(a)
    return out


def ck_mul(a2, b2, a1, b1):
    """Cayley-Klein product ``U2 @ U1``."""
    return a2 * a1 - b2 * np.conj(b1), a2 * b1 + b2 * np.conj(a1)


def expm_constant(gen: GeneratorCoeffs, dt: float) -> np.ndarray:
    """Propagator of a constant-generator segment.

    ``U = cos(theta/2) I - i sin(theta/2) n.sigma`` with ``theta = W dt``.

    Parameters
    ----------
    gen : GeneratorCoeffs
        Pauli coefficients in rad/s.
    dt : float
        Segment duration in seconds, ``dt >= 0``.

    Returns
    -------
    np.ndarray
        2x2 unitary.
    """
    _check_finite(*gen, dt)
    if dt < 0:
        raise ValueError(f"duration must be non-negative, got {dt}")
    a, b = cayley_klein(gen.cx, gen.cy, gen.cz, dt)
    return ck_to_matrix(a, b)


def expm_derivative(gen: GeneratorCoeffs, dgen: GeneratorCoeffs, dt: float) -> np.ndarray:
    """Exact derivative of :func:`expm_constant` along ``dgen``.

    With ``v = gen * dt / 2`` and ``U = cos|v| I - i sinc|v| (v.sigma)`` the
    directional derivative along ``w = dgen * dt / 2`` is differentiated in
    closed form, which stays regular at ``|v| = 0``.
    """
    _check_finite(*gen, *dgen, dt)
    if dt < 0:
        raise ValueError(f"duration must be non-negative, got {dt}")
    v = 0.5 * dt * np.asarray(gen, dtype=float)
    w = 0.5 * dt * np.asarray(dgen, dtype=float)
    angle = float(np.sqrt(v @ v))
    s, ds = _sinc_terms(angle)
    vw = float(v @ w)
    v_sigma = v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z
    w_sigma = w[0] * SIGMA_X + w[1] * SIGMA_Y + w[2] * SIGMA_Z
    # d(cos a) = -sinc(a) (v.w);  d(sinc a) = ds * (v.w)
    return -s * vw * IDENTITY - 1j * (ds * vw * v_sigma + s * w_sigma)


def apply(u: np.ndarray, state: np.ndarray) -> np.ndarray:
    """Return ``u @ state`` for a 2-component state ``(amp_e, amp_g)``."""
    _check_finite(u, state)
    return np.asarray(u, dtype=complex) @ np.asarray(state, dtype=complex)


def compose(u2: np.ndarray, u1: np.ndarray) -> np.ndarray:
    """Time-ordered product: ``u1`` acts first."""
    return np.asarray(u2, dtype=complex) @ np.asarray(u1, dtype=complex)


def unitarity_error(u: np.ndarray) -> float:
    """Max-entry deviation of ``U^dagger U`` from the identity."""
    u = np.asarray(u, dtype=complex)
    return float(np.max(np.abs(np.swapaxes(u.conj(), -1, -2) @ u - IDENTITY)))
