"""Second-order structure of portfolio maps, line integrals and conservativeness.

Differential operators use central finite differences with fixed steps
(``1e-5`` for first derivatives of portfolio maps, ``1e-4`` for the
Hessian of a generating function). Steps are halved until the stencil fits
inside the open simplex.
"""

import numpy as np

from .exceptions import DomainError, NotAGradientError
from .simplex import fisher_inner
from .validation import check_simplex

FIRST_STEP = 1e-5
SECOND_STEP = 1e-4
QUAD_TOL = 1e-10
QUAD_MAX_DEPTH = 20
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


class PortfolioMap:
    """A portfolio function ``mu -> pi(mu)`` from the open simplex to the closed simplex.

    Parameters
    ----------
    func : callable
        Maps an array of shape ``(..., n)`` to weights of the same shape when
        ``vectorized`` is True, otherwise a single point to its weights.
    smooth : bool
        Hint that finite differences of ``func`` are meaningful.
    breakpoints : callable, optional
        ``breakpoints(a, b)`` returns parameters in (0, 1) where the map may
        jump along the segment from ``a`` to ``b``; quadrature splits there.
    name : str, optional
    """

    def __init__(self, func, smooth=True, vectorized=True, breakpoints=None, name=None):
        self.func = func
        self.smooth = smooth
        self.vectorized = vectorized
        self._breakpoints = breakpoints
        self.name = name or getattr(func, "__name__", "portfolio")

    def __call__(self, mu):
        mu = np.asarray(mu, dtype=float)
        if self.vectorized:
            return np.asarray(self.func(mu), dtype=float)
        flat = mu.reshape(-1, mu.shape[-1])
        out = np.array([self.func(x) for x in flat], dtype=float)
        return out.reshape(mu.shape)

    def weight_ratio(self, mu):
        mu = np.asarray(mu, dtype=float)
        return self(mu) / mu

    def breakpoints(self, a, b):
        if self._breakpoints is None:
            return np.empty(0)
        return np.asarray(self._breakpoints(a, b), dtype=float)

    def __repr__(self):
        return f"PortfolioMap({self.name})"


def market_portfolio():
    return PortfolioMap(lambda mu: np.array(mu, dtype=float), name="market")


def constant_portfolio(weights):
    w = check_simplex(weights, open=False)
    return PortfolioMap(lambda mu: np.broadcast_to(w, np.shape(mu)).copy(), name="constant")


def generated_portfolio(phi):
    """The portfolio generated by a :class:`~fgplab.generators.GeneratingFunction`."""
    return PortfolioMap(
        phi.portfolio,
        smooth=phi.kind != "min_affine",
        breakpoints=phi.kinks,
        name=f"generated[{phi.kind}]",
    )


def counterexample_portfolio(lam):
    """Three-stock portfolio whose weight ratio is ``lam*A*mu + alpha(mu)*1``.

    ``A`` is the upper-triangular matrix of -1's. For small ``lam`` the
    weight ratio satisfies the curvature inequality, yet the field is not
    conservative, so the portfolio is not functionally generated.
    """
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    a = np.array([[-1.0, -1.0, -1.0], [0.0, -1.0, -1.0], [0.0, 0.0, -1.0]])

    def pi(mu):
        mu = np.asarray(mu, dtype=float)
        if mu.shape[-1] != 3:
            raise DomainError("the counterexample portfolio is defined for three stocks")
        alpha = 1.0 + lam * (mu[..., 0] + mu[..., 1] * (mu[..., 1] + mu[..., 2]) + mu[..., 2] ** 2)
        w = lam * (mu @ a.T) + alpha[..., None]
        return mu * w

    return PortfolioMap(pi, name=f"counterexample[{lam:g}]")


def _fit_step(p, v, h):
    """Largest ``h / 2**k`` such that ``p +- h v`` stays in the open simplex."""
    for _ in range(60):
        if np.all(p + h * v > 0) and np.all(p - h * v > 0):
            return h
        h /= 2.0
    raise DomainError("finite-difference stencil does not fit inside the simplex")


def _as_point(p):
    p = check_simplex(p, open=True)
    if p.ndim != 1:
        raise DomainError("expected a single simplex point")
    return p


def excess_growth_form(pi, p, v):
    """``0.5 * sum_ij pi_i (delta_ij - pi_j) v_i v_j / (p_i p_j)``."""
    pi = np.asarray(pi, dtype=float)
    p = np.asarray(p, dtype=float)
    x = np.asarray(v, dtype=float) / p
    return 0.5 * (np.sum(pi * x * x, axis=-1) - np.sum(pi * x, axis=-1) ** 2)


def drift_form(phi, p, v):
    """Drift quadratic form ``-Hess Phi(p)(v, v) / (2 Phi(p))``."""
    p = _as_point(p)
    v = np.asarray(v, dtype=float)
    h = _fit_step(p, v, SECOND_STEP)
    f0 = phi.value(p)
    hess = (phi.value(p + h * v) - 2.0 * f0 + phi.value(p - h * v)) / h**2
    return -hess / (2.0 * f0)


def _directional(f, p, v, step=FIRST_STEP):
    h = _fit_step(p, v, step)
    return (f(p + h * v) - f(p - h * v)) / (2.0 * h)


def curvature_gap(pi, p, v):
    """``Gamma_pi(p)(v, v) - <<D_v pi(p), v>>_p``; nonnegative for generated portfolios."""
    p = _as_point(p)
    v = np.asarray(v, dtype=float)
    dpi = _directional(pi, p, v)
    return excess_growth_form(pi(p), p, v) - fisher_inner(p, dpi, v)


def weight_ratio_curvature(pi, p, v):
    """``<v, D_v w(p)> + <w(p), v>**2`` with ``w = pi / mu``; nonpositive for generated portfolios."""
    p = _as_point(p)
    v = np.asarray(v, dtype=float)
    dw = _directional(pi.weight_ratio, p, v)
    return float(v @ dw + (pi.weight_ratio(p) @ v) ** 2)


def _gauss_legendre(f, lo, hi):
    half = 0.5 * (hi - lo)
    t = lo + half * (_GL_NODES + 1.0)
    return half * np.dot(_GL_WEIGHTS, f(t))


def _adaptive(f, lo, hi, tol, depth=0, whole=None):
    if whole is None:
        whole = _gauss_legendre(f, lo, hi)
    mid = 0.5 * (lo + hi)
    left = _gauss_legendre(f, lo, mid)
    right = _gauss_legendre(f, mid, hi)
    if abs(left + right - whole) <= tol or depth >= QUAD_MAX_DEPTH:
        return left + right
    return (_adaptive(f, lo, mid, tol / 2, depth + 1, left)
            + _adaptive(f, mid, hi, tol / 2, depth + 1, right))


def _segment_integral(pi, a, b, tol):
    d = b - a

    def integrand(t):
        mu = a + t[:, None] * d
        return pi.weight_ratio(mu) @ d

    cuts = np.concatenate([[0.0], np.sort(pi.breakpoints(a, b)), [1.0]])
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            total += _adaptive(integrand, lo, hi, tol * (hi - lo))
    return total


def line_integral(pi, gamma, tol=QUAD_TOL):
    """Integral of the weight ratio ``pi(mu)/mu`` along a polyline.

    ``gamma`` is an array of vertices, shape ``(k, n)``, all in the open
    simplex. Each segment is integrated with adaptive Gauss-Legendre.
    """
    gamma = check_simplex(gamma, open=True)
    if gamma.ndim == 1:
        return 0.0
    total = 0.0
    for a, b in zip(gamma[:-1], gamma[1:]):
        if np.array_equal(a, b):
            continue
        total += _segment_integral(pi, a, b, tol)
    return total


def loop_defect(pi, loop, tol=QUAD_TOL):
    """Line integral around a closed polyline; zero for conservative weight ratios."""
    loop = check_simplex(loop, open=True)
    if loop.ndim != 2 or np.max(np.abs(loop[0] - loop[-1])) > 1e-12:
        raise ValueError("loop must be a polyline whose first and last vertices coincide")
    return line_integral(pi, loop, tol)


def reconstruct_log_phi(pi, p0, p, checks=8, check_tol=1e-8, seed=0):
    """Recover ``log Phi(p) - log Phi(p0)`` by integrating the weight ratio.

    Before integrating, ``checks`` random triangles through ``p0`` and ``p``
    are tested for a vanishing loop integral; a failure raises
    :class:`NotAGradientError`.
    """
    p0 = _as_point(p0)
    p = _as_point(p)
    if np.array_equal(p0, p):
        return 0.0
    rng = np.random.default_rng(seed)
    for _ in range(checks):
        lam = rng.dirichlet(np.ones(3))
        r = lam[0] * p0 + lam[1] * p + lam[2] * rng.dirichlet(np.ones(p.size))
        defect = loop_defect(pi, np.array([p0, r, p, p0]))
        if abs(defect) > check_tol:
            raise NotAGradientError(
                f"weight ratio is not conservative: loop integral {defect:.3g}"
            )
    return line_integral(pi, np.array([p0, p]))


def two_stock_q(pi):
    """Express a two-stock portfolio as ``q(y) = pi_1`` where ``y = log(mu_1 / mu_2)``."""

    def q(y):
        y = np.asarray(y, dtype=float)
        mu1 = 1.0 / (1.0 + np.exp(-y))
        return pi(np.stack([mu1, 1.0 - mu1], axis=-1))[..., 0]

    return q


def two_stock_drift_condition(q, y_grid=None, step=FIRST_STEP):
    """Worst value of ``q'(y) - q(y)(1 - q(y))`` over a grid; ``<= 0`` means satisfied."""
    y = np.linspace(-5.0, 5.0, 1001) if y_grid is None else np.asarray(y_grid, dtype=float)

    def qv(x):
        try:
            out = np.asarray(q(x), dtype=float)
            if out.shape == x.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.array([float(q(xi)) for xi in x])

    deriv = (qv(y + step) - qv(y - step)) / (2 * step)
    qy = qv(y)
    return float(np.max(deriv - qy * (1.0 - qy)))
