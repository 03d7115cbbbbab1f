"""The Z^d quantum-graph lattice with Maryland-type vertex couplings.

Vertices are identified with ``Z^d``; the edge ``(m, j)`` joins ``m`` to
``m + h_j`` and carries a copy of ``EdgeProfile`` number ``j``. The lattice
operator ``M(z)`` is nearest-neighbour with hopping ``1/s_j(l_j; z)`` and
diagonal ``-sum_j eta_j(z)/s_j(l_j; z)``; the couplings
``alpha(m) = -g tan(pi <omega, m> + phi)`` sit on the diagonal of ``A``.
"""
from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from .edge_solver import EdgeProfile, dirichlet_spectrum, end_data
from .errors import DegeneratePhaseError, InputError, NearDirichletError, RationalityError

MAX_DIMENSION = 3
NEAR_DIRICHLET_THRESHOLD = 1e-9
GAP_GUARD = 1e-6
PHASE_MARGIN = 1e-8
RATIONALITY_TOL = 1e-12
DEFAULT_CHECK_RADIUS = 64


@dataclass(frozen=True)
class GraphModel:
    """Edge profiles, one per lattice direction."""

    profiles: tuple

    def __post_init__(self):
        profiles = tuple(self.profiles)
        object.__setattr__(self, "profiles", profiles)
        if not 1 <= len(profiles) <= MAX_DIMENSION:
            raise InputError(f"lattice dimension must be in 1..{MAX_DIMENSION}, got {len(profiles)}")
        for p in profiles:
            if not isinstance(p, EdgeProfile):
                raise InputError("profiles must be EdgeProfile instances")

    @classmethod
    def free(cls, lengths):
        """Model with zero potential on every edge."""
        return cls(tuple(EdgeProfile.constant(l) for l in lengths))

    @property
    def d(self):
        return len(self.profiles)

    @property
    def lengths(self):
        return tuple(p.length for p in self.profiles)


@dataclass(frozen=True)
class MarylandParams:
    """Coupling strength ``g``, frequency vector ``omega`` and phase ``phi``."""

    g: float
    omega: tuple
    phi: float = 0.0

    def __post_init__(self):
        omega = tuple(float(w) for w in np.atleast_1d(self.omega))
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "g", float(self.g))
        object.__setattr__(self, "phi", float(self.phi))
        if not self.g > 0:
            raise InputError(f"coupling strength g must be positive, got {self.g}")
        if not all(np.isfinite(omega)) or not np.isfinite(self.phi):
            raise InputError("omega and phi must be finite")

    @property
    def d(self):
        return len(self.omega)

    @property
    def chi(self):
        return complex(np.exp(2j * self.phi))


@dataclass
class DiophantineReport:
    """Finite-radius estimates for ``|<omega, m> - r| >= C |m|^-beta``.

    ``c_est`` and ``beta_est`` depend on the scan radius and are not the true
    constants of an infinite lattice.
    """

    radius_checked: int
    c_est: float
    beta_est: float
    worst_pair: tuple
    min_phase_margin: float
    indices: np.ndarray = field(repr=False)
    margins: np.ndarray = field(repr=False)

    def best_approximations(self):
        """Indices whose margin is a new minimum in order of increasing norm.

        Returns a list of ``(norm, m, margin)``; only one of ``m`` and ``-m``
        is kept.
        """
        norms = np.abs(self.indices).max(axis=1)
        order = np.lexsort((np.arange(len(norms)), norms))
        best = []
        current = np.inf
        for i in order:
            if self.margins[i] < current * (1 - 1e-12):
                current = self.margins[i]
                best.append((int(norms[i]), tuple(int(v) for v in self.indices[i]), float(current)))
        return best


def as_index(m, d):
    """Normalize a lattice index to a tuple of ``d`` ints."""
    idx = tuple(int(v) for v in np.atleast_1d(m))
    if len(idx) != d:
        raise InputError(f"lattice index {m!r} does not have dimension {d}")
    return idx


def box_indices(radius, d):
    """All ``n`` with ``|n|_inf <= radius`` in C order, shape ``(K, d)``."""
    axis = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def phase_argument(params, idx):
    """``pi <omega, m> + phi`` for an index array of shape ``(..., d)``."""
    idx = np.asarray(idx)
    return math.pi * (idx @ np.asarray(params.omega)) + params.phi


def phase_margin(params, idx):
    """Distance of ``pi <omega, m> + phi`` to the poles ``pi/2 + pi Z``."""
    x = phase_argument(params, idx) - math.pi / 2
    return np.abs(x - math.pi * np.round(x / math.pi))


def couplings(params, idx):
    """Vectorized ``alpha(m)`` for an index array of shape ``(..., d)``."""
    idx = np.asarray(idx)
    if idx.shape[-1] != params.d:
        raise InputError(f"index dimension {idx.shape[-1]} != {params.d}")
    margin = phase_margin(params, idx)
    if np.any(margin <= PHASE_MARGIN):
        bad = tuple(int(v) for v in idx.reshape(-1, params.d)[np.argmin(margin.ravel())])
        raise DegeneratePhaseError(
            f"pi<omega,m>+phi is within {PHASE_MARGIN} of pi/2 mod pi at m={bad}", m=bad
        )
    return -params.g * np.tan(phase_argument(params, idx))


def coupling(params, m):
    """``alpha(m) = -g tan(pi <omega, m> + phi)``.

    >>> coupling(MarylandParams(1.0, (0.6180339887,)), 0)
    -0.0
    """
    return float(couplings(params, np.array(as_index(m, params.d)))[()])


def validate_params(params, radius=DEFAULT_CHECK_RADIUS):
    """Scan ``0 < |m|_inf <= radius`` for small margins ``|<omega,m> - r|``.

    Raises
    ------
    RationalityError
        If ``<omega, m>`` is an integer (to ``1e-12``) for some scanned ``m``.
    DegeneratePhaseError
        If some ``|m|_inf <= radius`` puts the coupling on a pole.
    """
    if radius < 1:
        raise InputError("radius must be >= 1")
    d = params.d
    idx = box_indices(radius, d)
    all_idx = idx
    nonzero = np.any(idx != 0, axis=1)
    idx = idx[nonzero]
    dots = idx @ np.asarray(params.omega)
    nearest = np.round(dots)
    margins = np.abs(dots - nearest)
    norms = np.abs(idx).max(axis=1).astype(float)
    exact = np.flatnonzero(margins <= RATIONALITY_TOL)
    if exact.size:
        i = int(exact[np.argmin(norms[exact])])
        bad = idx[i]
        # m and -m are equivalent; report the one whose leading entry is positive
        if bad[np.flatnonzero(bad)[0]] < 0:
            bad = -bad
        bad = tuple(int(v) for v in bad)
        raise RationalityError(
            f"<omega, m> = {int(round(float(np.dot(bad, params.omega))))} is an integer at "
            f"m={bad}; omega must be irrational",
            m=bad,
        )
    i = int(np.argmin(margins))
    worst = (tuple(int(v) for v in idx[i]), int(nearest[i]), float(margins[i]))
    margins_phase = phase_margin(params, all_idx)
    k = int(np.argmin(margins_phase))
    if margins_phase[k] <= PHASE_MARGIN:
        bad = tuple(int(v) for v in all_idx[k])
        raise DegeneratePhaseError(
            f"phi = pi/2 - pi<omega,m> mod pi at m={bad} (margin {margins_phase[k]:.3e})", m=bad
        )
    report = DiophantineReport(radius, 0.0, 0.0, worst, float(margins_phase.min()), idx, margins)
    best = report.best_approximations()
    if len(best) >= 2:
        x = np.log([b[0] for b in best])
        y = np.log([b[2] for b in best])
        slope = np.polyfit(x, y, 1)[0]
        beta = max(float(-slope), 0.0)
    else:
        beta = 0.0
    report.beta_est = beta
    report.c_est = float(np.min(margins * norms**beta))
    return report


def edge_data(model, z):
    """Per-direction ``s_j(l_j; z)`` and ``eta_j(z)`` with the near-Dirichlet guard."""
    s = np.empty(model.d, dtype=complex)
    eta = np.empty(model.d, dtype=complex)
    for j, p in enumerate(model.profiles):
        s[j], eta[j] = end_data(p, np.array(complex(z)))
    if np.any(np.abs(s) < NEAR_DIRICHLET_THRESHOLD):
        j = int(np.argmin(np.abs(s)))
        raise NearDirichletError(
            f"|s_{j}(l; z)| = {abs(s[j]):.3e} below {NEAR_DIRICHLET_THRESHOLD} at z={z}"
        )
    if np.isreal(z):
        return s.real, eta.real
    return s, eta


def symbol(model, z, theta):
    """Fourier symbol ``M(z, theta)``.

    ``theta`` has shape ``(..., d)``; for ``d = 1`` a plain array is accepted.
    """
    s, eta = edge_data(model, z)
    theta = np.asarray(theta, dtype=complex)
    if model.d == 1 and (theta.ndim == 0 or theta.shape[-1] != 1):
        theta = theta[..., None]
    out = np.sum((theta + 1.0 / theta) / s, axis=-1) - np.sum(eta / s)
    if np.isreal(z) and np.allclose(np.abs(theta), 1.0, rtol=0, atol=1e-14):
        return out.real
    return out


def apply_box(model, params, lam, arr, s_eta=None):
    """``(M(lam) - A) arr`` for ``arr`` on the box ``|n|_inf <= R`` centred at 0.

    Values outside the box are treated as zero and couplings leaving the box
    are dropped, i.e. this is the truncated operator applied to ``arr``.
    """
    d = model.d
    arr = np.asarray(arr)
    radius = (arr.shape[0] - 1) // 2
    s, eta = edge_data(model, lam) if s_eta is None else s_eta
    alpha = couplings(params, box_indices(radius, d)).reshape(arr.shape)
    out = (-np.sum(eta / s) - alpha) * arr
    for j in range(d):
        shifted = np.zeros_like(out)
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[j] = slice(0, -1)
        hi[j] = slice(1, None)
        # xi(m - h_j) and xi(m + h_j)
        shifted[tuple(hi)] += arr[tuple(lo)]
        shifted[tuple(lo)] += arr[tuple(hi)]
        out = out + shifted / s[j]
    return out


def apply_M_minus_A(model, params, lam, xi):
    """``(M(lam) - A) xi`` for a finitely supported sequence.

    ``xi`` maps lattice indices (tuples, or ints when ``d = 1``) to values.
    The result is returned on the bounding box of the support grown by one
    shell, including zero entries.
    """
    d = model.d
    if not xi:
        return {}
    keys = [as_index(k, d) for k in xi]
    radius = max(max(abs(v) for v in k) for k in keys) + 1
    arr = np.zeros((2 * radius + 1,) * d, dtype=np.result_type(*xi.values(), float))
    for k, v in zip(keys, xi.values()):
        arr[tuple(np.asarray(k) + radius)] += v
    out = apply_box(model, params, lam, arr)
    return {tuple(int(v) for v in n): out[tuple(n + radius)]
            for n in box_indices(radius, d)}


def spectral_gaps(model, window, eps_gap=GAP_GUARD, n_steps=2048):
    """Components of ``window`` minus the Dirichlet spectrum, shrunk by ``eps_gap``."""
    a, b = map(float, window)
    points = sorted(itertools.chain.from_iterable(
        dirichlet_spectrum(p, (a, b), n_steps=n_steps) for p in model.profiles))
    merged = []
    for x in points:
        if not merged or x - merged[-1] > 2 * eps_gap:
            merged.append(x)
    edges = [a] + merged + [b]
    gaps = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo > 2 * eps_gap:
            gaps.append((lo + eps_gap, hi - eps_gap))
    return gaps
