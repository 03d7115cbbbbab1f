"""Eigenvalues ``lambda(m)``, lattice eigenvectors and graph eigenfunctions.

An energy ``lam`` in a gap of the Dirichlet spectrum is an eigenvalue iff
``sigma(lam) + phi + pi <omega, m> = 0 (mod pi)`` for some ``m``. Since
``sigma`` is strictly increasing with values in ``(-pi/2, pi/2)``, each ``m``
contributes at most one eigenvalue per gap, located by bisection.

The lattice eigenvector is ``u = (1 + chi U) e^{t} theta^m`` evaluated on the
torus and transformed back to ``Z^d``.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .edge_solver import solve_edge
from .errors import ConvergenceError, InputError, NumericalError
from .lattice_model import (
    apply_box, as_index, box_indices, couplings, edge_data, phase_margin, PHASE_MARGIN,
)
from .roots import bisect
from .torus_analysis import conjugator_coeffs, sigma

log = logging.getLogger(__name__)

DEFAULT_BOX = {1: 24, 2: 12, 3: 6}
MAX_CERTIFY_BOX = {1: 1024, 2: 96, 3: 24}
RESIDUAL_TOL = 1e-6
LAMBDA_TOL = 1e-12
SIGMA_MATCH_TOL = 1e-10
MIN_DECAY_SHELLS = 6
DECAY_FLOOR = 1e-12


@dataclass
class EigenRecord:
    m: tuple
    lam: float
    gap: tuple
    gap_id: int
    target: float
    sigma_at_lambda: float
    residual: float = math.nan
    box_radius: int = 0


@dataclass
class LatticeVector:
    """Amplitudes ``u(n)`` on the box ``|n|_inf <= box_radius``.

    ``amplitudes`` is indexed by ``n + box_radius`` along every axis.
    """

    box_radius: int
    amplitudes: np.ndarray = field(repr=False)
    center: tuple
    phase_aligned: bool = False
    decay_slope: float = math.nan
    decay_r2: float = math.nan
    decay_shells: int = 0
    warnings: list = field(default_factory=list)

    @property
    def d(self):
        return self.amplitudes.ndim

    def __getitem__(self, n):
        n = np.atleast_1d(n)
        if np.max(np.abs(n)) > self.box_radius:
            return 0.0
        return self.amplitudes[tuple(n + self.box_radius)]

    def as_dict(self):
        return {tuple(int(v) for v in n): self.amplitudes[tuple(n + self.box_radius)]
                for n in box_indices(self.box_radius, self.d)}

    def imag_ratio(self):
        a = np.abs(self.amplitudes)
        return float(np.max(np.abs(self.amplitudes.imag)) / a.max())

    def shell_maxima(self):
        """``max |u(n)|`` over the shells ``|n - center|_inf = k`` fully inside the box."""
        idx = box_indices(self.box_radius, self.d)
        dist = np.abs(idx - np.asarray(self.center)).max(axis=1)
        k_max = self.box_radius - int(np.max(np.abs(self.center)))
        mags = np.abs(self.amplitudes.ravel())
        return np.array([mags[dist == k].max() for k in range(k_max + 1)])


def fold_target(params, m):
    """Representative of ``-phi - pi <omega, m>`` modulo ``pi`` in ``[-pi/2, pi/2)``."""
    x = -params.phi - math.pi * float(np.dot(params.omega, m))
    return x - math.pi * math.floor(x / math.pi + 0.5)


def _sigma_kw(sigma_tol, n_max):
    kw = {}
    if sigma_tol is not None:
        kw["tol"] = sigma_tol
    if n_max is not None:
        kw["n_max"] = n_max
    return kw


def resolved_bracket(model, params, gap, sigma_tol=None, n_max=None):
    """Largest sub-interval of ``gap`` whose end values of ``sigma`` converge.

    Next to a Dirichlet point ``arctan(M/g)`` becomes nearly a step function
    on the torus and the quadrature grid cap is reached. The ends are moved
    inward (by ``1e-6`` of the gap width, then growing fourfold) until the
    quadrature converges. Returns ``(a, b, sigma(a), sigma(b))``.
    """
    a, b = map(float, gap)
    width = b - a
    kw = _sigma_kw(sigma_tol, n_max)

    def settle(edge, direction):
        offset = 0.0
        while True:
            lam = edge + direction * offset
            try:
                return lam, sigma(model, params, lam, **kw).sigma
            except ConvergenceError:
                offset = 1e-6 * width if offset == 0.0 else 4 * offset
                if offset > 0.25 * width:
                    raise
    a2, s_a = settle(a, +1)
    b2, s_b = settle(b, -1)
    if (a2, b2) != (a, b):
        log.info("gap (%.10g, %.10g) resolved on (%.10g, %.10g)", a, b, a2, b2)
    return a2, b2, s_a, s_b


def eigenvalue_for_index(model, params, gap, m, tol=LAMBDA_TOL, gap_id=0,
                         sigma_tol=None, certify=False, box_radius=None,
                         bracket=None, n_max=None):
    """Solve ``sigma(lam) = target(m)`` inside ``gap``; ``None`` if out of range.

    ``gap`` is a guarded interval from :func:`spectral_gaps`. ``bracket`` may
    pass a precomputed :func:`resolved_bracket`. With ``certify=True`` the
    record's ``residual`` is filled in from the lattice eigenvector.
    """
    m = as_index(m, model.d)
    if phase_margin(params, np.array(m)) <= PHASE_MARGIN:
        couplings(params, np.array(m))  # raises DegeneratePhaseError
    if bracket is None:
        bracket = resolved_bracket(model, params, gap, sigma_tol, n_max)
    a, b, s_a, s_b = bracket
    target = fold_target(params, m)
    kw = _sigma_kw(sigma_tol, n_max)

    def h(lam):
        return sigma(model, params, lam, **kw).sigma - target

    h_a, h_b = s_a - target, s_b - target
    if not (h_a < 0 < h_b):
        # a trimmed end may hide this eigenvalue in the unresolved sliver
        if (h_b <= 0 and b < gap[1]) or (h_a >= 0 and a > gap[0]):
            log.warning("m=%s: target %.6g falls in the unresolved part of the gap "
                        "outside (%.10g, %.10g)", m, target, a, b)
        return None
    lam = bisect(h, a, b, xtol=tol, max_iter=200, f_lo=h_a, f_hi=h_b)
    sig = sigma(model, params, lam, **kw).sigma
    if abs(sig - target) > SIGMA_MATCH_TOL:
        raise ConvergenceError(
            f"bisection for m={m} ended at sigma-target={sig - target:.3e}"
        )
    record = EigenRecord(m, lam, tuple(map(float, gap)), gap_id, target, sig)
    if certify:
        certify_record(model, params, record, box_radius)
    return record


def certify_record(model, params, record, box_radius=None, tol=RESIDUAL_TOL):
    """Fill in ``record.residual`` and return the lattice eigenvector.

    Starting from ``box_radius`` (default per dimension) the box is doubled
    until ``||(M - A) u|| / ||u|| < tol`` or the cap for the dimension is
    reached; slowly decaying states near Dirichlet points need large boxes.
    """
    d = model.d
    box = DEFAULT_BOX[d] if box_radius is None else box_radius
    box = max(box, int(np.max(np.abs(record.m))) + 1)
    conj = conjugator_coeffs(model, params, record.lam)
    while True:
        u = lattice_eigenvector(model, params, record, box, conj=conj)
        record.residual = lattice_residual(model, params, record.lam, u)
        record.box_radius = box
        if record.residual < tol or 2 * box > MAX_CERTIFY_BOX[d]:
            break
        box *= 2
    if record.residual >= tol:
        log.warning("m=%s: residual %.2e at box %d exceeds %.0e",
                    record.m, record.residual, box, tol)
    return u


def index_range(d, radius):
    return [tuple(int(v) for v in n) for n in box_indices(radius, d)]


def enumerate_eigenvalues(model, params, gap, index_radius, gap_id=0,
                          certify=True, box_radius=None, tol=LAMBDA_TOL):
    """All ``lambda(m)`` in ``gap`` for ``|m|_inf <= index_radius``, sorted by energy."""
    records = []
    bracket = resolved_bracket(model, params, gap)
    for m in index_range(model.d, index_radius):
        rec = eigenvalue_for_index(model, params, gap, m, tol=tol, gap_id=gap_id,
                                   certify=certify, box_radius=box_radius,
                                   bracket=bracket)
        if rec is not None:
            records.append(rec)
    records.sort(key=lambda r: r.lam)
    for r1, r2 in zip(records, records[1:]):
        if r2.lam - r1.lam <= 1e-9:
            raise NumericalError(
                f"eigenvalues for m={r1.m} and m={r2.m} coincide ({r1.lam!r}, {r2.lam!r})"
            )
    return records


def decay_envelope(shells):
    """Monotone envelope ``max_{j >= k} shells[j]`` of the shell maxima."""
    return np.maximum.accumulate(shells[::-1])[::-1]


def _decay_fit(shells):
    """Least-squares slope and R^2 of the log decay envelope against ``k``.

    Shells below ``DECAY_FLOOR`` times the peak are dropped; they sit at
    the round-off floor of the Fourier inversion.
    """
    shells = decay_envelope(shells)
    peak = shells.max()
    keep = np.flatnonzero(shells > DECAY_FLOOR * peak)
    # stop at the first shell under the floor; later ones are noise
    cut = np.flatnonzero(shells <= DECAY_FLOOR * peak)
    if cut.size:
        keep = keep[keep < cut[0]]
    if keep.size < 2:
        return math.nan, math.nan, int(keep.size)
    x = keep.astype(float)
    y = np.log(shells[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2), int(keep.size)


def lattice_eigenvector(model, params, record, box_radius=None, conj=None):
    """Lattice eigenvector ``u`` of ``M(lambda) - A`` for ``record``.

    ``v = theta^m`` is the eigenfunction of the shift ``U``; then
    ``u(theta) = w(theta) + chi w(e^{2 pi i omega} theta)`` with
    ``w = e^{t(lambda, theta)} theta^m``. The result is rotated so that its
    largest entry is real and positive.
    """
    d = model.d
    m = np.asarray(record.m)
    if box_radius is None:
        box_radius = DEFAULT_BOX[d]
    if box_radius <= np.max(np.abs(m)):
        raise InputError(f"box radius {box_radius} does not contain the centre m={record.m}")
    if conj is None:
        conj = conjugator_coeffs(model, params, record.lam)
    # grid must resolve e^t theta^m and its shift without aliasing into the box
    needed = 2 * (box_radius + int(np.max(np.abs(m))) + conj.radius) + 1
    n = max(conj.grid_points, 1 << int(math.ceil(math.log2(needed))))
    angles = 2 * np.pi * np.arange(n) / n
    phase_m = np.ones((n,) * d, dtype=complex)
    for j in range(d):
        shape = [1] * d
        shape[j] = n
        phase_m = phase_m * np.exp(1j * m[j] * angles).reshape(shape)
    w = np.exp(conj.on_grid(n)) * phase_m
    w_shift = (np.exp(conj.on_grid(n, shifted=True)) * phase_m
               * np.exp(2j * np.pi * float(np.dot(m, params.omega))))
    u_theta = w + params.chi * w_shift
    u_hat = np.fft.fftn(u_theta) / u_theta.size
    idx = box_indices(box_radius, d)
    amps = u_hat[tuple((idx % n).T)].reshape((2 * box_radius + 1,) * d)

    k = np.argmax(np.abs(amps))
    amps = amps * np.conj(amps.flat[k]) / np.abs(amps.flat[k])
    vec = LatticeVector(box_radius, amps, tuple(int(v) for v in m), phase_aligned=True)
    slope, r2, n_shells = _decay_fit(vec.shell_maxima())
    vec.decay_slope, vec.decay_r2, vec.decay_shells = slope, r2, n_shells
    if n_shells < MIN_DECAY_SHELLS:
        vec.warnings.append(f"decay fit uses only {n_shells} shells")
    if vec.imag_ratio() > 1e-6:
        vec.warnings.append(f"imaginary part ratio {vec.imag_ratio():.2e} after alignment")
    return vec


def lattice_residual(model, params, lam, u):
    """``||(M(lam) - A) u||_2 / ||u||_2`` on the box of ``u``."""
    r = apply_box(model, params, lam, u.amplitudes)
    return float(np.linalg.norm(r) / np.linalg.norm(u.amplitudes))


@dataclass
class GraphEigenfunction:
    """Eigenfunction of the graph operator built from lattice values ``u``.

    On the edge ``(n, j)`` the function is
    ``[u(n + h_j) s_j(t) + u(n) (s_j(l) c_j(t) - c_j(l) s_j(t))] / s_j(l)``.
    Only edges with both ends in the box are represented.
    """

    lam: float
    u: LatticeVector
    bases: tuple = field(repr=False)
    params: object = field(repr=False)

    @property
    def d(self):
        return self.u.d

    @property
    def vertex_values(self):
        return self.u.amplitudes

    def edge_indices(self, j):
        """Initial vertices ``n`` of edges ``(n, j)`` inside the box, shape ``(K, d)``."""
        idx = box_indices(self.u.box_radius, self.d)
        return idx[idx[:, j] < self.u.box_radius]

    def end_values(self, j):
        idx = self.edge_indices(j)
        r = self.u.box_radius
        start = self.u.amplitudes[tuple((idx + r).T)]
        h = np.zeros(self.d, dtype=int)
        h[j] = 1
        stop = self.u.amplitudes[tuple((idx + h + r).T)]
        return start, stop

    def edge_values(self, j, t):
        """Values and derivatives on every edge of direction ``j``.

        Returns two arrays of shape ``(K, len(t))`` ordered like
        :meth:`edge_indices`.
        """
        basis = self.bases[j]
        s, sp, c, cp = basis.evaluate(np.atleast_1d(np.asarray(t, dtype=float)))
        s_l, c_l = basis.s_end, basis.c_end
        start, stop = self.end_values(j)
        start, stop = start[:, None], stop[:, None]
        f = (stop * s + start * (s_l * c - c_l * s)) / s_l
        fp = (stop * sp + start * (s_l * cp - c_l * sp)) / s_l
        return f, fp

    def continuity_residual(self):
        """Largest relative mismatch between edge end values and vertex values."""
        worst = 0.0
        scale = np.max(np.abs(self.u.amplitudes))
        for j in range(self.d):
            f, _ = self.edge_values(j, [0.0, self.bases[j].profile.length])
            start, stop = self.end_values(j)
            worst = max(worst, np.max(np.abs(f[:, 0] - start)), np.max(np.abs(f[:, 1] - stop)))
        return float(worst / scale)

    def fluxes(self):
        """``f'(n)`` on interior vertices ``|n|_inf <= box_radius - 1``.

        Returns ``(indices, flux)`` with ``flux(n) = sum_j f'_{n,j}(0) - sum_j f'_{n-h_j,j}(l_j)``.
        """
        r = self.u.box_radius
        shape = (2 * r + 1,) * self.d
        flux = np.zeros(shape, dtype=self.u.amplitudes.dtype)
        for j in range(self.d):
            _, fp = self.edge_values(j, [0.0, self.bases[j].profile.length])
            idx = self.edge_indices(j)
            out_grid = np.zeros(shape, dtype=flux.dtype)
            out_grid[tuple((idx + r).T)] = fp[:, 0]
            h = np.zeros(self.d, dtype=int)
            h[j] = 1
            in_grid = np.zeros(shape, dtype=flux.dtype)
            in_grid[tuple((idx + h + r).T)] = fp[:, 1]
            flux = flux + out_grid - in_grid
        interior = box_indices(r - 1, self.d)
        return interior, flux[tuple((interior + r).T)]

    def flux_residual(self):
        """``max |f'(n) - alpha(n) f(n)| / max |f'(n)|`` over interior vertices."""
        idx, flux = self.fluxes()
        r = self.u.box_radius
        values = self.u.amplitudes[tuple((idx + r).T)]
        alpha = couplings(self.params, idx)
        return float(np.max(np.abs(flux - alpha * values)) / np.max(np.abs(flux)))

    def ode_residual(self, h=1e-4, samples=9):
        """Relative residual of ``-f'' + U f - lam f`` by centered second differences.

        Sample points are interior to every segment and at least ``h`` away
        from breakpoints.
        """
        worst = 0.0
        scale = np.max(np.abs(self.u.amplitudes))
        for j, basis in enumerate(self.bases):
            profile = basis.profile
            x = profile.breakpoints
            pts = []
            for a, b in zip(x[:-1], x[1:]):
                if b - a > 4 * h:
                    pts.extend(np.linspace(a + 2 * h, b - 2 * h, samples))
            t = np.array(pts)
            f0, _ = self.edge_values(j, t)
            fp, _ = self.edge_values(j, t + h)
            fm, _ = self.edge_values(j, t - h)
            second = (fp - 2 * f0 + fm) / h**2
            res = -second + (profile.potential(t) - self.lam) * f0
            worst = max(worst, float(np.max(np.abs(res))))
        return worst / scale


def graph_eigenfunction(model, params, record, u):
    """Assemble the graph eigenfunction from lattice amplitudes ``u``."""
    edge_data(model, record.lam)  # near-Dirichlet guard
    bases = tuple(solve_edge(p, record.lam) for p in model.profiles)
    return GraphEigenfunction(record.lam, u, bases, params)
