"""Torus averages of the Weyl symbol and the conjugating function.

On the real axis ``f(lam, theta) = 2i arctan(M(lam, theta)/g)`` is purely
imaginary, its torus mean is ``2i sigma(lam)``, and ``t = (1 - U)^{-1}(f - f0)``
with ``(U t)(theta) = t(e^{2 pi i omega} theta)`` is obtained mode by mode:
``t_hat(n) = f_hat(n) / (1 - exp(2 pi i <omega, n>))``.

All torus integrals use the uniform grid ``theta_k = exp(2 pi i k / N)`` per
dimension (the trapezoid rule), which converges geometrically for analytic
periodic integrands.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConvergenceError, InputError, NumericalError, SmallDivisorError
from .lattice_model import box_indices, edge_data

N_START = 64
N_MAX = 4096
MAX_GRID_POINTS = 2**24
SIGMA_TOL = 1e-12
SMALL_DIVISOR_FLOOR = 1e-8
COEFF_FLOOR = 1e-15


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform ``N^d`` grid on the torus."""

    points_per_dim: int
    d: int = 1

    def __post_init__(self):
        n = self.points_per_dim
        if n < 16 or n & (n - 1):
            raise InputError(f"points_per_dim must be a power of two >= 16, got {n}")
        if not 1 <= self.d <= 3:
            raise InputError(f"torus dimension must be 1..3, got {self.d}")
        if n**self.d > MAX_GRID_POINTS:
            raise InputError(f"grid of {n}^{self.d} points exceeds {MAX_GRID_POINTS}")

    @property
    def angles(self):
        return 2 * np.pi * np.arange(self.points_per_dim) / self.points_per_dim

    @property
    def nodes(self):
        """Unit-circle nodes ``exp(2 pi i k / N)`` of one dimension."""
        return np.exp(1j * self.angles)

    def mean(self, values):
        # numpy reductions use pairwise summation, so the result does not
        # depend on how the grid was produced
        return np.mean(values)


@dataclass(frozen=True)
class SigmaValue:
    lam: float
    sigma: float
    error_estimate: float
    grid_used: int


@dataclass
class ConjugatorCoeffs:
    """Fourier coefficients ``t_hat(n)`` for ``|n|_inf <= radius``.

    ``coeffs`` is indexed by ``n + radius`` along every axis. ``f0`` is the
    torus mean of ``f`` (``2i sigma``) and ``grid_points`` the per-dimension
    size of the grid ``f`` was sampled on.
    """

    lam: float
    radius: int
    coeffs: np.ndarray = field(repr=False)
    min_divisor: float
    f0: complex
    grid_points: int
    omega: tuple

    @property
    def d(self):
        return self.coeffs.ndim

    def coeff(self, n):
        n = np.atleast_1d(n)
        if np.max(np.abs(n)) > self.radius:
            return 0j
        return complex(self.coeffs[tuple(n + self.radius)])

    def on_grid(self, n_points, shifted=False):
        """Values of ``t`` (or of ``U t`` if ``shifted``) on an ``n_points^d`` grid."""
        if n_points < 2 * self.radius + 1:
            raise InputError(f"grid of {n_points} points cannot resolve radius {self.radius}")
        idx = box_indices(self.radius, self.d)
        c = self.coeffs.ravel()
        if shifted:
            c = c * np.exp(2j * np.pi * (idx @ np.asarray(self.omega)))
        full = np.zeros((n_points,) * self.d, dtype=complex)
        full[tuple((idx % n_points).T)] = c
        return np.fft.ifftn(full) * n_points**self.d

    def shell_maxima(self):
        """``max |t_hat(n)|`` over each shell ``|n|_inf = k``, ``k = 0..radius``."""
        norms = np.abs(box_indices(self.radius, self.d)).max(axis=1)
        mags = np.abs(self.coeffs.ravel())
        return np.array([mags[norms == k].max() for k in range(self.radius + 1)])


def symbol_grid(model, lam, n_points):
    """``M(lam, theta)`` on the ``n_points^d`` torus grid (real ``lam``)."""
    s, eta = edge_data(model, lam)
    if np.iscomplexobj(s):
        raise InputError("symbol_grid expects a real energy")
    angles = 2 * np.pi * np.arange(n_points) / n_points
    out = np.full((n_points,) * model.d, -np.sum(eta / s))
    for j in range(model.d):
        shape = [1] * model.d
        shape[j] = n_points
        out = out + (2.0 / s[j]) * np.cos(angles).reshape(shape)
    return out


def _check_grid_cap(n_points, d, n_max):
    return n_points <= n_max and n_points**d <= MAX_GRID_POINTS


def sigma(model, params, lam, tol=SIGMA_TOL, n_start=N_START, n_max=N_MAX):
    """``sigma(lam)``: torus mean of ``arctan(M(lam, theta)/g)``.

    The grid is doubled from ``n_start`` until two successive means differ
    by less than ``tol``.

    Raises
    ------
    ConvergenceError
        If the per-dimension cap ``n_max`` (or the total point cap) is hit
        first.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    lam = float(lam)
    n = n_start // 2
    prev = float(np.mean(np.arctan(symbol_grid(model, lam, n) / params.g)))
    err = math.inf
    while True:
        n *= 2
        if not _check_grid_cap(n, model.d, n_max):
            raise ConvergenceError(
                f"sigma({lam}) not converged to {tol} before grid cap {n_max}; "
                f"last change {err:.3e}"
            )
        cur = float(np.mean(np.arctan(symbol_grid(model, lam, n) / params.g)))
        err = abs(cur - prev)
        if err < tol:
            return SigmaValue(lam, cur, err, n)
        prev = cur


def _symbol_derivative_grid(model, lam, n_points, step):
    """Centered-difference ``dM/dlam`` on the torus grid."""
    s_p, eta_p = edge_data(model, lam + step)
    s_m, eta_m = edge_data(model, lam - step)
    d_inv = (1.0 / s_p - 1.0 / s_m) / (2 * step)
    d_ratio = (eta_p / s_p - eta_m / s_m) / (2 * step)
    angles = 2 * np.pi * np.arange(n_points) / n_points
    out = np.full((n_points,) * model.d, -np.sum(d_ratio))
    for j in range(model.d):
        shape = [1] * model.d
        shape[j] = n_points
        out = out + 2.0 * d_inv[j] * np.cos(angles).reshape(shape)
    return out


def sigma_prime(model, params, lam, gap=None, step=None, rtol=1e-10,
                n_start=N_START, n_max=N_MAX):
    """``sigma'(lam)`` as the torus mean of ``g M' / (M^2 + g^2)``.

    ``M'`` comes from centered differences of ``1/s_j`` and ``eta_j/s_j``
    with step ``1e-6`` times the gap width (or times ``max(1, |lam|)`` when
    no gap is given).
    """
    lam = float(lam)
    if step is None:
        scale = (gap[1] - gap[0]) if gap is not None else max(1.0, abs(lam))
        step = 1e-6 * scale
    g = params.g

    def mean_at(n):
        m = symbol_grid(model, lam, n)
        dm = _symbol_derivative_grid(model, lam, n, step)
        return float(np.mean(g * dm / (m * m + g * g)))

    n = n_start // 2
    prev = mean_at(n)
    while True:
        n *= 2
        if not _check_grid_cap(n, model.d, n_max):
            raise ConvergenceError(f"sigma'({lam}) not converged before grid cap {n_max}")
        cur = mean_at(n)
        if abs(cur - prev) <= rtol * abs(cur):
            break
        prev = cur
    if not cur > 0:
        raise NumericalError(
            f"sigma'({lam}) = {cur:.3e} is not positive; the symbol is not increasing"
        )
    return cur


def phase_grid(model, params, lam, n_points):
    """``f(lam, theta) = 2i arctan(M/g)`` on the torus grid."""
    return 2j * np.arctan(symbol_grid(model, lam, n_points) / params.g)


def _fourier(values):
    """Coefficients ``c_n`` of ``sum_n c_n theta^n`` from grid samples."""
    return np.fft.fftn(values) / values.size


def _mode_norms(n_points, d):
    freq = np.abs(np.fft.fftfreq(n_points, 1.0 / n_points)).astype(int)
    norms = np.zeros((n_points,) * d, dtype=int)
    for j in range(d):
        shape = [1] * d
        shape[j] = n_points
        norms = np.maximum(norms, freq.reshape(shape))
    return norms


def resolve_phase(model, params, lam, n_start=N_START, n_max=N_MAX, floor=COEFF_FLOOR):
    """Sample ``f`` on a grid fine enough that modes with ``|n| >= N/4`` are below ``floor``.

    Returns ``(n_points, f_values, f_hat)``.
    """
    n = n_start
    while True:
        if not _check_grid_cap(n, model.d, n_max):
            raise ConvergenceError(
                f"Fourier coefficients of f({lam}, .) do not decay below {floor} "
                f"within grid cap {n_max}"
            )
        f = phase_grid(model, params, lam, n)
        fh = _fourier(f)
        tail = np.abs(fh[_mode_norms(n, model.d) >= n // 4])
        if tail.max() < floor:
            return n, f, fh
        n *= 2


def conjugator_coeffs(model, params, lam, radius=None, grid=None,
                      divisor_floor=SMALL_DIVISOR_FLOOR):
    """Coefficients of ``t = (1 - U)^{-1}(f - f0)`` at real energy ``lam``.

    Parameters
    ----------
    radius : int, optional
        Fourier truncation ``|n|_inf <= radius``. By default the smallest
        radius beyond which every coefficient of ``f`` is below ``1e-15``.
    grid : QuadratureGrid, optional
        Sampling grid for ``f``. By default it is refined until the upper
        half of the spectrum is below ``1e-15``.

    Raises
    ------
    SmallDivisorError
        If ``|1 - exp(2 pi i <omega, n>)| < divisor_floor`` for a kept mode.
    """
    lam = float(lam)
    d = model.d
    if params.d != d:
        raise InputError("params and model dimensions differ")
    if grid is None:
        n_points, f, fh = resolve_phase(model, params, lam)
        if radius is not None and 2 * radius + 1 > n_points:
            n_points = 1 << int(math.ceil(math.log2(2 * radius + 2)))
            f = phase_grid(model, params, lam, n_points)
            fh = _fourier(f)
    else:
        if grid.d != d:
            raise InputError("grid dimension differs from the model")
        n_points = grid.points_per_dim
        f = phase_grid(model, params, lam, n_points)
        fh = _fourier(f)
    norms = _mode_norms(n_points, d)
    if radius is None:
        significant = norms[np.abs(fh) >= COEFF_FLOOR]
        radius = int(significant.max()) if significant.size else 1
        radius = max(radius, 1)
    if 2 * radius + 1 > n_points:
        raise InputError(f"radius {radius} needs more than {n_points} grid points per dimension")

    idx = box_indices(radius, d)
    f_sel = fh[tuple((idx % n_points).T)]
    divisors = 1.0 - np.exp(2j * np.pi * (idx @ np.asarray(params.omega)))
    nonzero = np.any(idx != 0, axis=1)
    min_div = float(np.abs(divisors[nonzero]).min())
    if min_div < divisor_floor:
        k = np.flatnonzero(nonzero)[np.argmin(np.abs(divisors[nonzero]))]
        raise SmallDivisorError(
            f"|1 - exp(2 pi i <omega, n>)| = {min_div:.3e} at n={tuple(idx[k])}"
        )
    coeffs = np.zeros(len(idx), dtype=complex)
    coeffs[nonzero] = f_sel[nonzero] / divisors[nonzero]
    return ConjugatorCoeffs(
        lam=lam,
        radius=radius,
        coeffs=coeffs.reshape((2 * radius + 1,) * d),
        min_divisor=min_div,
        f0=complex(fh.flat[0]),
        grid_points=n_points,
        omega=params.omega,
    )


def reconstruction_residual(model, params, conj):
    """``max |t - U t + f0 - f|`` over the nodes of the grid ``conj`` was built on."""
    n = conj.grid_points
    f = phase_grid(model, params, conj.lam, n)
    t = conj.on_grid(n)
    ut = conj.on_grid(n, shifted=True)
    return float(np.max(np.abs(t - ut + conj.f0 - f)))
