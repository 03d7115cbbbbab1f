"""Fundamental solutions of ``-y'' + U y = z y`` on a single edge.

Potentials are piecewise constant, so every segment is crossed by an exact
2x2 transfer matrix and no ODE integrator is involved. The state vector is
``(y, y')``; the cumulative matrix ``[[c, s], [c', s']]`` collects both
solutions at once.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .roots import sign_change_roots

SINC_SERIES_CUTOFF = 1e-4
DIRICHLET_SCAN_STEPS = 2048
DIRICHLET_XTOL = 1e-10


@dataclass(frozen=True)
class EdgeProfile:
    """Edge length and piecewise-constant potential.

    ``segments`` is a tuple of ``(width, value)`` pairs listed from ``t=0``.
    """

    length: float
    segments: tuple

    def __post_init__(self):
        segs = tuple((float(w), float(v)) for w, v in self.segments)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "length", float(self.length))
        if not self.length > 0:
            raise InputError(f"edge length must be positive, got {self.length}")
        if not segs:
            raise InputError("edge profile needs at least one segment")
        for w, v in segs:
            if not w > 0:
                raise InputError(f"segment width must be positive, got {w}")
            if not np.isfinite(v):
                raise InputError(f"segment potential must be finite, got {v}")
        total = sum(w for w, _ in segs)
        if abs(total - self.length) > 1e-12 * self.length:
            raise InputError(
                f"segment widths sum to {total}, expected length {self.length}"
            )

    @classmethod
    def constant(cls, length, value=0.0):
        return cls(length, ((length, value),))

    @property
    def breakpoints(self):
        """Segment boundaries ``0 = x_0 < x_1 < ... < x_K = length``."""
        x = np.concatenate([[0.0], np.cumsum([w for w, _ in self.segments])])
        x[-1] = self.length
        return x

    def potential(self, t):
        t = np.asarray(t, dtype=float)
        values = np.array([v for _, v in self.segments])
        k = np.clip(np.searchsorted(self.breakpoints, t, side="right") - 1,
                    0, len(self.segments) - 1)
        return values[k]


def _cos_sinc(w2):
    """Return ``cos(w)`` and ``sin(w)/w`` as functions of ``w**2``.

    Both are even in ``w``, so the branch of the square root is irrelevant.
    """
    w2 = np.asarray(w2, dtype=complex)
    w = np.sqrt(w2)
    small = np.abs(w) < SINC_SERIES_CUTOFF
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(small, 1.0, np.sin(w) / np.where(small, 1.0, w))
    sinc = np.where(small, 1.0 - w2 / 6.0 + w2 * w2 / 120.0, sinc)
    return np.cos(w), sinc


def segment_transfer(width, value, z):
    """Transfer matrix of one constant segment, shape ``z.shape + (2, 2)``."""
    width, value, z = np.broadcast_arrays(
        np.asarray(width, dtype=float), np.asarray(value, dtype=float),
        np.asarray(z, dtype=complex))
    q = z - value
    cw, sinc = _cos_sinc(q * width * width)
    out = np.empty(z.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = cw
    out[..., 0, 1] = width * sinc
    out[..., 1, 0] = -q * width * sinc
    out[..., 1, 1] = cw
    return out


def _cumulative_transfer(profile, z):
    """Matrices at every breakpoint, shape ``(K+1,) + z.shape + (2, 2)``."""
    z = np.asarray(z, dtype=complex)
    mats = [np.broadcast_to(np.eye(2, dtype=complex), z.shape + (2, 2))]
    for width, value in profile.segments:
        mats.append(segment_transfer(width, value, z) @ mats[-1])
    return np.stack(mats)


@dataclass(frozen=True)
class EdgeBasis:
    """Solutions ``s`` and ``c`` of one edge at a fixed energy ``z``."""

    profile: EdgeProfile
    z: complex
    cumulative: np.ndarray = field(repr=False)

    @property
    def s_end(self):
        return self.cumulative[-1, 0, 1]

    @property
    def sp_end(self):
        return self.cumulative[-1, 1, 1]

    @property
    def c_end(self):
        return self.cumulative[-1, 0, 0]

    @property
    def cp_end(self):
        return self.cumulative[-1, 1, 0]

    @property
    def hill(self):
        return self.c_end + self.sp_end

    def wronskian(self):
        """``s'(l) c(l) - s(l) c'(l)``; equals 1 for an exact propagation."""
        return self.sp_end * self.c_end - self.s_end * self.cp_end

    def evaluate(self, t):
        """Values ``(s, s', c, c')`` at points ``t`` in ``[0, length]``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-14) or np.any(t > self.profile.length * (1 + 1e-14)):
            raise InputError("evaluation point outside the edge")
        x = self.profile.breakpoints
        k = np.clip(np.searchsorted(x, t, side="right") - 1,
                    0, len(self.profile.segments) - 1)
        values = np.array([v for _, v in self.profile.segments])
        partial = segment_transfer(t - x[k], values[k], self.z)
        mat = partial @ self.cumulative[k]
        return mat[..., 0, 1], mat[..., 1, 1], mat[..., 0, 0], mat[..., 1, 0]


def solve_edge(profile, z):
    """Propagate ``s`` and ``c`` across ``profile`` at energy ``z``.

    ``s(0)=0, s'(0)=1`` and ``c(0)=1, c'(0)=0``.

    Examples
    --------
    >>> b = solve_edge(EdgeProfile.constant(1.0), 0.0)
    >>> complex(b.s_end), complex(b.c_end)
    ((1+0j), (1+0j))
    """
    if not isinstance(profile, EdgeProfile):
        raise InputError("profile must be an EdgeProfile")
    z = complex(z)
    return EdgeBasis(profile, z, _cumulative_transfer(profile, np.array(z)))


def hill_discriminant(profile, z):
    """``eta(z) = c(l; z) + s'(l; z)``."""
    return solve_edge(profile, z).hill


def end_data(profile, z):
    """Vectorized ``(s(l; z), eta(z))`` for an array of energies."""
    mats = _cumulative_transfer(profile, z)[-1]
    return mats[..., 0, 1], mats[..., 0, 0] + mats[..., 1, 1]


def dirichlet_spectrum(profile, window, n_steps=DIRICHLET_SCAN_STEPS,
                       xtol=DIRICHLET_XTOL):
    """Zeros of ``lambda -> s(l; lambda)`` inside ``window``.

    The zeros are simple, so each is detected by a sign change provided
    the scan step ``(b - a) / n_steps`` is smaller than the spacing of
    consecutive Dirichlet eigenvalues in the window.
    """
    a, b = map(float, window)
    if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
        raise InputError(f"window must be a bounded interval, got {window}")
    if n_steps < 1:
        raise InputError("n_steps must be positive")

    def s_end(lam):
        return end_data(profile, np.asarray(lam, dtype=float))[0].real

    return [float(r) for r in sign_change_roots(s_end, a, b, n_steps, xtol=xtol)]
