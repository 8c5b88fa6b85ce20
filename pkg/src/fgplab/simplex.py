"""Coordinates and inner products on the unit simplex.

Points are numpy arrays with the stock index on the last axis. Exponential
coordinates drop the last stock: ``theta_i = log(mu_i / mu_n)``.
"""

import numpy as np

from .exceptions import DomainError
from .validation import check_simplex, check_tangent


def to_exponential(mu):
    """Map open-simplex points to exponential coordinates, shape (..., n-1)."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0):
        raise DomainError("exponential coordinates need strictly positive weights")
    mu = check_simplex(mu, open=True)
    logmu = np.log(mu)
    return logmu[..., :-1] - logmu[..., -1:]


def psi(theta):
    """Log-partition ``log(1 + sum_i exp(theta_i))``, overflow safe.

    >>> round(float(psi([0.0])), 6)
    0.693147
    """
    theta = np.asarray(theta, dtype=float)
    top = np.maximum(np.max(theta, axis=-1), 0.0)
    s = np.exp(-top) + np.sum(np.exp(theta - top[..., None]), axis=-1)
    return top + np.log(s)


def from_exponential(theta):
    """Inverse of :func:`to_exponential`; returns strictly positive weights."""
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 0:
        theta = theta[None]
    if not np.all(np.isfinite(theta)):
        raise DomainError("exponential coordinates must be finite")
    full = np.concatenate([theta, np.zeros(theta.shape[:-1] + (1,))], axis=-1)
    full = full - np.max(full, axis=-1, keepdims=True)
    w = np.exp(full)
    return w / w.sum(axis=-1, keepdims=True)


def fisher_inner(p, u, v):
    """Fisher information inner product ``0.5 * sum(u * v / p)`` at ``p``."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise DomainError("Fisher metric is defined on the open simplex only")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return 0.5 * np.sum(u * v / p, axis=-1)


def project_to_tangent(x):
    """Subtract the coordinate mean so that the result sums to zero."""
    x = np.asarray(x, dtype=float)
    return x - x.mean(axis=-1, keepdims=True)


def tangent_basis(n):
    """Orthonormal basis of the tangent space, shape (n-1, n)."""
    # QR of the centred identity gives n-1 orthonormal columns orthogonal to 1
    m = np.eye(n)[:, :-1] - 1.0 / n
    q, _ = np.linalg.qr(m)
    return q.T


def tangent_directions(n, count):
    """``count`` unit tangent vectors spread around the unit circle of a 2-plane.

    For ``n == 3`` these are evenly spaced directions of the whole tangent plane.
    """
    basis = tangent_basis(n)
    e1 = basis[0]
    e2 = basis[1] if n > 2 else basis[0]
    ang = 2 * np.pi * np.arange(count) / count
    return np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2


def interior_grid(n_per_side, n=3):
    """Interior lattice points ``(i/(k+1), j/(k+1), ...)`` of the simplex.

    With ``n == 3`` and ``n_per_side == k`` the candidate grid is k x k and
    only points with every coordinate positive are kept.
    """
    if n != 3:
        raise ValueError("interior_grid is implemented for n == 3")
    k = n_per_side + 1
    pts = []
    for i in range(1, k):
        for j in range(1, k):
            if i + j < k:
                pts.append((i / k, j / k, (k - i - j) / k))
    return np.array(pts)


def as_tangent(v, n=None):
    return check_tangent(v, n=n)
