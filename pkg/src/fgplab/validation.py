"""Input validation helpers.

Everything in the package represents simplex points, tangent vectors and
paths as plain numpy arrays whose last axis indexes the stocks. These
helpers check and lightly repair such arrays at the API boundary.
"""

import numpy as np

from .exceptions import DomainError

SIMPLEX_TOL = 1e-12


def check_simplex(x, open=True, tol=SIMPLEX_TOL, renormalize=True):
    """Validate points of the unit simplex.

    Parameters
    ----------
    x : array_like, shape (..., n)
        One point or a batch of points.
    open : bool
        If True every coordinate must be strictly positive, otherwise
        nonnegative.
    tol : float
        Allowed deviation of each coordinate sum from 1.
    renormalize : bool
        Divide by the coordinate sum so that rows sum to 1 up to rounding.

    Returns
    -------
    ndarray of float, same shape as ``x``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] < 2:
        raise DomainError(f"simplex points need at least 2 coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("simplex point has non-finite coordinates")
    s = x.sum(axis=-1)
    if np.any(np.abs(s - 1.0) > tol):
        bad = float(np.max(np.abs(s - 1.0)))
        raise DomainError(f"coordinates must sum to 1 (max deviation {bad:.3g})")
    if open:
        if np.any(x <= 0):
            raise DomainError("point is not in the open simplex (nonpositive coordinate)")
    elif np.any(x < 0):
        raise DomainError("point is not in the closed simplex (negative coordinate)")
    if renormalize:
        x = x / s[..., None]
    return x


def check_tangent(v, n=None, tol=SIMPLEX_TOL):
    """Validate tangent vectors (coordinates summing to zero)."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        raise DomainError("tangent vector must be at least one-dimensional")
    if n is not None and v.shape[-1] != n:
        raise DomainError(f"tangent vector has {v.shape[-1]} coordinates, expected {n}")
    scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
    if np.any(np.abs(v.sum(axis=-1)) > tol * scale * v.shape[-1]):
        raise DomainError("tangent vector coordinates must sum to 0")
    return v


def check_path(points, min_length=2):
    """Validate a market path: an array of shape (T+1, n) of open-simplex points."""
    pts = check_simplex(points, open=True)
    if pts.ndim != 2:
        raise DomainError(f"a path must be a 2-D array of shape (T+1, n), got {pts.shape}")
    if pts.shape[0] < min_length:
        raise DomainError(f"a path needs at least {min_length} points, got {pts.shape[0]}")
    return pts


def check_cycle(points, tol=1e-12):
    """Validate a closed path (first point equals last point)."""
    pts = check_path(points)
    if np.max(np.abs(pts[0] - pts[-1])) > tol:
        raise ValueError("cycle is not closed: first and last points differ")
    return pts


def apply_rowwise(func, x, out_shape=None):
    """Call ``func`` on a batch, falling back to one call per row.

    ``out_shape`` is the expected result shape; by default the shape of ``x``.
    """
    x = np.asarray(x, dtype=float)
    expected = x.shape if out_shape is None else out_shape
    try:
        out = np.asarray(func(x), dtype=float)
        if out.shape == expected:
            return out
    except (TypeError, ValueError, IndexError):
        pass
    flat = x.reshape(-1, x.shape[-1])
    rows = np.array([np.asarray(func(r), dtype=float) for r in flat])
    return rows.reshape(expected)
