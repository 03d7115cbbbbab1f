"""Brute-force certification on finite boxes.

The restriction of ``M(lam) - A`` to ``|n|_inf <= N`` is assembled as a dense
matrix (couplings leaving the box are dropped) and diagonalized directly.
Nothing here uses the torus machinery, so agreement with
:mod:`qgmaryland.spectral_solver` is an independent check.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DegeneratePhaseError, InputError, NumericalError, ResourceError
from .lattice_model import apply_M_minus_A, box_indices, couplings, edge_data

MAX_DIMENSION = 4096
JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-12
JACOBI_AUTO_LIMIT = 256
KREIN_COND_LIMIT = 1e12


@dataclass
class TruncatedOperator:
    """Dense real symmetric (or complex symmetric, off the real axis) box matrix.

    Row ``k`` corresponds to ``indices[k]``, the C-ordered enumeration of the box.
    """

    box_radius: int
    indices: np.ndarray = field(repr=False)
    matrix: np.ndarray = field(repr=False)
    lam: complex = None

    @property
    def dimension(self):
        return self.matrix.shape[0]

    @property
    def d(self):
        return self.indices.shape[1]

    def position(self, n):
        """Row of lattice index ``n``."""
        n = np.atleast_1d(n)
        side = 2 * self.box_radius + 1
        return int(np.ravel_multi_index(tuple(n + self.box_radius), (side,) * self.d))

    def matvec(self, x):
        return self.matrix @ x


@dataclass
class DefectCurve:
    lambdas: np.ndarray
    defects: np.ndarray

    def local_minima(self):
        """Grid energies at which the defect has a strict interior local minimum."""
        d = self.defects
        k = np.flatnonzero((d[1:-1] < d[:-2]) & (d[1:-1] < d[2:])) + 1
        return self.lambdas[k]


def _assemble(indices, radius, hopping, diagonal):
    d = indices.shape[1]
    dim = len(indices)
    side = 2 * radius + 1
    mat = np.zeros((dim, dim), dtype=np.result_type(hopping, diagonal))
    mat[np.arange(dim), np.arange(dim)] = diagonal
    for j in range(d):
        src = np.flatnonzero(indices[:, j] < radius)
        step = side ** (d - 1 - j)
        dst = src + step
        mat[src, dst] = hopping[j]
        mat[dst, src] = hopping[j]
    return mat


def build_truncated(model, params, lam, N):
    """Dense ``M(lam) - A`` on ``|n|_inf <= N`` with plain restriction.

    ``lam`` may be complex; the matrix is then complex symmetric.
    """
    d = model.d
    dim = (2 * N + 1) ** d
    if dim > MAX_DIMENSION:
        raise ResourceError(f"box of dimension {dim} exceeds {MAX_DIMENSION}")
    s, eta = edge_data(model, lam)
    idx = box_indices(N, d)
    diag = -np.sum(eta / s) - couplings(params, idx)
    return TruncatedOperator(N, idx, _assemble(idx, N, 1.0 / s, diag), lam)


def _round_robin(n):
    """Pairings of ``0..n-1`` (``n`` even) into ``n-1`` rounds of disjoint pairs."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[::-1][:half])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(matrix, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi eigendecomposition of a real symmetric matrix.

    Each sweep visits all index pairs in round-robin order; the ``n/2``
    rotations of one round act on disjoint pairs and are applied together.
    Stops when the off-diagonal Frobenius norm is below ``tol`` times the
    norm of the matrix.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise InputError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-14 * max(1.0, np.abs(a).max())):
        raise InputError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    if n == 1:
        return a.diagonal().copy(), np.ones((1, 1))
    size = n + (n % 2)
    if size != n:
        # pad with an isolated dummy row; its pairs are skipped
        a = np.pad(a, ((0, 1), (0, 1)))
    v = np.eye(size)
    rounds = _round_robin(size)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), np.eye(n)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > 1e-18 * scale
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            app, aqq = a[p, p], a[q, q]
            tau = (aqq - app) / (2.0 * apq)
            # tangent of the smaller rotation angle; hypot avoids overflow
            t = np.where(tau == 0, 1.0, np.sign(tau) / (np.abs(tau) + np.hypot(1.0, tau)))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # rows then columns; pairs are disjoint so updates do not interfere
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = ap * c - aq * s
            a[:, q] = ap * s + aq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c
    else:
        raise NumericalError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    w = np.diag(a)[:n]
    v = v[:n, :n]
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def symmetric_eigen(op, method="auto"):
    """All eigenvalues (ascending) and orthonormal eigenvectors.

    ``method`` is ``"jacobi"``, ``"lapack"`` or ``"auto"`` (Jacobi up to
    dimension 256, LAPACK beyond).
    """
    matrix = op.matrix if isinstance(op, TruncatedOperator) else np.asarray(op)
    if matrix.shape[0] > MAX_DIMENSION:
        raise ResourceError(f"dimension {matrix.shape[0]} exceeds {MAX_DIMENSION}")
    if np.iscomplexobj(matrix):
        if np.abs(matrix.imag).max() > 0:
            raise InputError("symmetric_eigen needs a real matrix")
        matrix = matrix.real
    if method == "auto":
        method = "jacobi" if matrix.shape[0] <= JACOBI_AUTO_LIMIT else "lapack"
    if method == "jacobi":
        return jacobi_eigh(matrix)
    if method == "lapack":
        return np.linalg.eigh(matrix)
    raise InputError(f"unknown method {method!r}")


def nearest_zero(op, method="auto"):
    """Eigenvalue of smallest magnitude and its unit eigenvector."""
    w, v = symmetric_eigen(op, method)
    k = int(np.argmin(np.abs(w)))
    return float(w[k]), v[:, k]


def defect(model, params, lam, N, method="auto"):
    """Smallest singular value of the truncated ``M(lam) - A``."""
    return abs(nearest_zero(build_truncated(model, params, lam, N), method)[0])


def count_near_zero(op, factor=10.0, method="auto"):
    """Number of eigenvalues within ``factor`` times the smallest magnitude."""
    w, _ = symmetric_eigen(op, method)
    a = np.abs(w)
    return int(np.sum(a <= factor * a.min()))


def defect_scan(model, params, gap, grid_size, N, method="auto"):
    """Defect on ``grid_size`` uniform energies spanning the closed gap."""
    lams = np.linspace(gap[0], gap[1], grid_size)
    defects = np.array([defect(model, params, lam, N, method) for lam in lams])
    return DefectCurve(lams, defects)


def discrete_maryland(coupling_strength, omega, phase, N):
    """Classical Maryland matrix on ``[-N, N]`` with Dirichlet ends.

    Off-diagonal entries are 1 and the diagonal is
    ``coupling_strength * tan(omega * n - phase)``.
    """
    n = np.arange(-N, N + 1)
    x = omega * n - phase - math.pi / 2
    margin = np.abs(x - math.pi * np.round(x / math.pi))
    if np.any(margin < 1e-8):
        bad = int(n[np.argmin(margin)])
        raise DegeneratePhaseError(f"tan(omega n - phase) has a pole at n={bad}", m=(bad,))
    diag = coupling_strength * np.tan(omega * n - phase)
    idx = n[:, None]
    return TruncatedOperator(N, idx, _assemble(idx, N, np.array([1.0]), diag))


def inverse_participation_ratio(vectors):
    """``sum |psi|^4 / (sum |psi|^2)^2`` for each column."""
    p = np.abs(np.asarray(vectors)) ** 2
    return np.sum(p * p, axis=0) / np.sum(p, axis=0) ** 2


def resolvent_column(model, params, z, m_probe, N):
    """Solve the truncated ``(M(z) - A) x = delta_{m_probe}``."""
    op = build_truncated(model, params, z, N)
    cond = np.linalg.cond(op.matrix)
    if not cond < KREIN_COND_LIMIT:
        raise NumericalError(f"truncated M(z) - A is ill-conditioned (cond {cond:.2e})")
    rhs = np.zeros(op.dimension, dtype=complex)
    rhs[op.position(m_probe)] = 1.0
    return op, np.linalg.solve(op.matrix, rhs)


def krein_check(model, params, z, m_probe, N):
    """Round trip of the box resolvent through the full lattice operator.

    ``x`` solves the truncated system; applying the untruncated ``M(z) - A``
    to ``x`` (support grows by one shell) and subtracting ``delta_{m_probe}``
    leaves only the couplings cut by the box. Returns the 2-norm of that
    defect, which tends to zero as the box grows when ``Im z != 0``.
    """
    z = complex(z)
    if z.imag < 0.1:
        raise InputError("krein_check needs Im z >= 0.1")
    op, x = resolvent_column(model, params, z, m_probe, N)
    xi = {tuple(int(v) for v in n): x[k] for k, n in enumerate(op.indices)}
    out = apply_M_minus_A(model, params, z, xi)
    probe = tuple(int(v) for v in np.atleast_1d(m_probe))
    out[probe] = out[probe] - 1.0
    return float(np.sqrt(sum(abs(v) ** 2 for v in out.values())))
