"""Bracketing root finders shared by the edge solver and the eigenvalue solver."""
import numpy as np

from .errors import ConvergenceError


def bisect(func, lo, hi, xtol=1e-12, max_iter=200, f_lo=None, f_hi=None):
    """Find a sign change of ``func`` inside ``[lo, hi]`` by plain bisection.

    Parameters
    ----------
    func : callable
        Real-valued function of one real variable.
    lo, hi : float
        Bracket with ``func(lo) * func(hi) <= 0``.
    xtol : float
        Absolute tolerance on the abscissa.
    max_iter : int
        Maximum number of halvings.
    f_lo, f_hi : float, optional
        Already known function values at the bracket ends.

    Returns
    -------
    float
        Midpoint of the final bracket (or an exact zero if one was hit).
    """
    f_lo = func(lo) if f_lo is None else f_lo
    f_hi = func(hi) if f_hi is None else f_hi
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        if hi - lo <= xtol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket exhausted at floating point resolution
            return mid
        f_mid = func(mid)
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    if hi - lo <= xtol:
        return 0.5 * (lo + hi)
    raise ConvergenceError(
        f"bisection did not reach xtol={xtol} in {max_iter} steps "
        f"(bracket width {hi - lo:.3e})"
    )


def sign_change_roots(func, a, b, n_steps, xtol=1e-10):
    """All roots of ``func`` on ``[a, b]`` detected by a uniform sign scan.

    Only roots at which ``func`` changes sign between consecutive scan
    nodes are found; roots closer together than the scan step may be
    missed. ``func`` must accept a numpy array.
    """
    xs = np.linspace(a, b, n_steps + 1)
    fs = np.asarray(func(xs), dtype=float)
    roots = []
    for i in range(n_steps):
        f0, f1 = fs[i], fs[i + 1]
        if f0 == 0.0:
            roots.append(float(xs[i]))
            continue
        if f0 * f1 < 0.0:
            roots.append(bisect(lambda x: float(func(np.array([x]))[0]),
                                xs[i], xs[i + 1], xtol=xtol,
                                f_lo=f0, f_hi=f1))
    if fs[-1] == 0.0:
        roots.append(float(xs[-1]))
    return sorted(roots)
