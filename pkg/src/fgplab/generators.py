"""Positive concave generating functions and the portfolios they generate.

A generating function ``Phi`` maps the open simplex to ``(0, inf)`` and is
concave. Its portfolio has weights ``pi_i = p_i * (1 + D_{e(i)-p} log Phi(p))``
where ``D`` is the one-sided directional derivative. All evaluators are
vectorized over leading axes: ``p`` may have shape ``(..., n)``.
"""

import warnings

import numpy as np

from .exceptions import DomainError, InvalidGeneratorError
from .validation import check_simplex

NEGATIVE_WEIGHT_TOL = 1e-9
ACTIVE_TOL = 1e-12
CONCAVITY_TOL = 1e-10


def _clean_weights(pi):
    """Abort on genuinely negative weights, clamp float noise and renormalize."""
    if np.any(pi < -NEGATIVE_WEIGHT_TOL):
        raise InvalidGeneratorError(
            f"generated weight {float(np.min(pi)):.3g} is negative; the generator is not concave"
        )
    if np.any(pi < 0):
        pi = np.where(pi < 0, 0.0, pi)
    return pi / pi.sum(axis=-1, keepdims=True)


def _validation_points(n, count, rng):
    pts = rng.dirichlet(np.ones(n), size=count)
    # push towards the boundary as well as the bulk
    edge = rng.dirichlet(np.full(n, 0.2), size=count)
    pts = np.concatenate([pts, edge])
    pts = np.clip(pts, 1e-9, None)
    return pts / pts.sum(axis=-1, keepdims=True)


class GeneratingFunction:
    """Base class. Subclasses implement ``value`` and one of the derivative hooks.

    Parameters common to all kinds are the dimension ``n`` (``None`` when the
    formula works in every dimension).
    """

    kind = "custom"
    n = None

    def __call__(self, p):
        return self.value(p)

    def value(self, p):
        raise NotImplementedError

    def log_value(self, p):
        return np.log(self.value(p))

    def log_gradient(self, p):
        """Euclidean gradient of ``log Phi`` for smooth kinds, else ``None``."""
        return None

    def dir_derivative(self, p, v):
        """One-sided directional derivative ``D_v Phi(p)``."""
        g = self.log_gradient(p)
        return self.value(p) * np.sum(g * np.asarray(v, dtype=float), axis=-1)

    def portfolio(self, p):
        p = np.asarray(p, dtype=float)
        g = self.log_gradient(p)
        # D_{e(i)-p} log Phi = g_i - <g, p>
        pi = p * (1.0 + g - np.sum(g * p, axis=-1, keepdims=True))
        return _clean_weights(pi)

    def kinks(self, a, b):
        """Parameters ``t`` in (0, 1) where ``Phi`` may fail to be smooth on ``[a, b]``."""
        return np.empty(0)

    def to_spec(self):
        raise TypeError(f"{type(self).__name__} has no JSON representation")

    def _dims_to_check(self):
        return (self.n,) if self.n is not None else (2, 3)

    def validate(self, samples=1000, seed=0):
        """Randomized positivity and midpoint-concavity check.

        Concavity of a black-box function cannot be proven; this checks
        ``samples`` random midpoints at tolerance ``1e-10``.
        """
        rng = np.random.default_rng(seed)
        for n in self._dims_to_check():
            pts = _validation_points(n, samples, rng)
            vals = self.value(pts)
            if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
                raise InvalidGeneratorError(f"{type(self).__name__} is not positive on the simplex")
            q = _validation_points(n, samples, rng)
            mid = 0.5 * (pts + q)
            gap = self.value(mid) - 0.5 * (vals + self.value(q))
            if np.any(gap < -CONCAVITY_TOL):
                raise InvalidGeneratorError(
                    f"{type(self).__name__} fails midpoint concavity by {float(-gap.min()):.3g}"
                )
        return self


class GeometricMean(GeneratingFunction):
    """``Phi(p) = prod p_i ** w_i``; generates the constant-weighted portfolio ``w``."""

    kind = "geometric_mean"

    def __init__(self, weights, validate=True):
        w = np.asarray(weights, dtype=float)
        try:
            self.weights = check_simplex(w, open=False)
        except DomainError as exc:
            raise InvalidGeneratorError(f"geometric mean weights: {exc}") from None
        self.n = self.weights.shape[-1]
        if validate:
            self.validate()

    def log_value(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0) & (self.weights > 0)):
            raise DomainError("geometric mean is zero on this face of the simplex")
        with np.errstate(divide="ignore"):
            logp = np.log(p)
        return np.sum(np.where(self.weights > 0, self.weights * logp, 0.0), axis=-1)

    def value(self, p):
        return np.exp(self.log_value(p))

    def log_gradient(self, p):
        return self.weights / np.asarray(p, dtype=float)

    def portfolio(self, p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(self.weights, p.shape).copy()

    def to_spec(self):
        return {"kind": self.kind, "weights": self.weights.tolist()}


class DiversityPower(GeneratingFunction):
    """``Phi(p) = (sum c_i p_i ** alpha) ** (1 / alpha)`` with ``0 < alpha < 1``.

    ``c`` defaults to all ones (the diversity-weighted portfolio
    ``pi_i = p_i**alpha / sum_j p_j**alpha``). Positive tilts ``c`` give the
    weighted variant ``pi_i ∝ c_i p_i**alpha`` produced by Gaussian two-stock
    transport.
    """

    kind = "diversity"

    def __init__(self, alpha, weights=None, validate=True):
        alpha = float(alpha)
        if not 0.0 < alpha < 1.0:
            raise InvalidGeneratorError(f"diversity exponent must lie in (0, 1), got {alpha}")
        self.alpha = alpha
        if weights is None:
            self.weights = None
        else:
            self.weights = np.asarray(weights, dtype=float)
            if np.any(self.weights <= 0):
                raise InvalidGeneratorError("diversity tilts must be positive")
            self.n = self.weights.shape[-1]
        if validate:
            self.validate()

    def _terms(self, p):
        t = np.asarray(p, dtype=float) ** self.alpha
        return t if self.weights is None else self.weights * t

    def value(self, p):
        return np.sum(self._terms(p), axis=-1) ** (1.0 / self.alpha)

    def log_value(self, p):
        return np.log(np.sum(self._terms(p), axis=-1)) / self.alpha

    def log_gradient(self, p):
        p = np.asarray(p, dtype=float)
        t = self._terms(p)
        return t / p / np.sum(t, axis=-1, keepdims=True)

    def portfolio(self, p):
        t = self._terms(p)
        return t / np.sum(t, axis=-1, keepdims=True)

    def to_spec(self):
        spec = {"kind": self.kind, "alpha": self.alpha}
        if self.weights is not None:
            spec["weights"] = self.weights.tolist()
        return spec


class Affine(GeneratingFunction):
    """``Phi(p) = <a, p>`` with every ``a_i > 0``; generates the buy-and-hold portfolio."""

    kind = "affine"

    def __init__(self, coeffs, validate=True):
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.ndim != 1 or self.coeffs.size < 2:
            raise InvalidGeneratorError("affine coefficients must be a vector of length >= 2")
        if np.min(self.coeffs) <= 0:
            raise InvalidGeneratorError("affine generator must be positive on the simplex")
        self.n = self.coeffs.size
        if validate:
            self.validate()

    def value(self, p):
        return np.asarray(p, dtype=float) @ self.coeffs

    def log_gradient(self, p):
        return self.coeffs / self.value(p)[..., None]

    def dir_derivative(self, p, v):
        return np.asarray(v, dtype=float) @ self.coeffs + 0.0 * self.value(p)

    def portfolio(self, p):
        p = np.asarray(p, dtype=float)
        t = p * self.coeffs
        return t / t.sum(axis=-1, keepdims=True)

    def to_spec(self):
        return {"kind": self.kind, "coeffs": self.coeffs.tolist()}


class MinOfAffines(GeneratingFunction):
    """``Phi(p) = min_k <a_k, p>``, each piece nonnegative and not identically zero.

    Where several pieces are active the generated portfolio uses the
    lowest-index active piece, which is one valid supergradient selection.
    """

    kind = "min_affine"

    def __init__(self, pieces, validate=True):
        self.pieces = np.atleast_2d(np.asarray(pieces, dtype=float))
        if self.pieces.shape[0] < 1 or self.pieces.shape[1] < 2:
            raise InvalidGeneratorError("min_affine needs at least one piece of length >= 2")
        if np.any(self.pieces < 0) or np.any(self.pieces.max(axis=1) <= 0):
            raise InvalidGeneratorError("every affine piece must be positive on the open simplex")
        self.n = self.pieces.shape[1]
        if validate:
            self.validate()

    def _piece_values(self, p):
        return np.asarray(p, dtype=float) @ self.pieces.T

    def value(self, p):
        return np.min(self._piece_values(p), axis=-1)

    def _active(self, vals):
        m = vals.min(axis=-1, keepdims=True)
        return vals <= m + ACTIVE_TOL * np.maximum(1.0, np.abs(m))

    def dir_derivative(self, p, v):
        vals = self._piece_values(p)
        slopes = np.asarray(v, dtype=float) @ self.pieces.T
        return np.min(np.where(self._active(vals), slopes, np.inf), axis=-1)

    def selected_piece(self, p):
        return np.argmax(self._active(self._piece_values(p)), axis=-1)

    def portfolio(self, p):
        p = np.asarray(p, dtype=float)
        t = p * self.pieces[self.selected_piece(p)]
        return t / t.sum(axis=-1, keepdims=True)

    def kinks(self, a, b):
        f0 = self._piece_values(a)
        slope = self._piece_values(b) - f0
        df0 = f0[:, None] - f0[None, :]
        dslope = slope[None, :] - slope[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = df0 / dslope
        t = t[np.isfinite(t)]
        return np.unique(t[(t > 0) & (t < 1)])

    def to_spec(self):
        return {"kind": self.kind, "pieces": self.pieces.tolist()}


class Custom(GeneratingFunction):
    """User-supplied generating function.

    Parameters
    ----------
    func : callable
        ``func(p)`` returning ``Phi(p)``. If ``vectorized`` is False it is
        called once per point.
    n : int
        Number of stocks.
    dir_derivative : callable, optional
        Exact ``(p, v) -> D_v Phi(p)``. Without it a forward difference with
        step ``1e-6 / max(1, |v|)`` is used.
    """

    kind = "custom"

    def __init__(self, func, n, dir_derivative=None, vectorized=False, validate=True):
        self.func = func
        self.n = int(n)
        self.exact_dir_derivative = dir_derivative
        self.vectorized = vectorized
        if validate:
            self.validate()

    def value(self, p):
        p = np.asarray(p, dtype=float)
        if self.vectorized:
            return np.asarray(self.func(p), dtype=float)
        flat = p.reshape(-1, p.shape[-1])
        out = np.array([float(self.func(x)) for x in flat])
        return out.reshape(p.shape[:-1])

    def dir_derivative(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.exact_dir_derivative is not None:
            return self.exact_dir_derivative(p, v)
        p, v = np.broadcast_arrays(p, v)
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        h = 1e-6 / np.maximum(1.0, norm)
        for _ in range(30):
            if np.all(p + h * v > 0):
                break
            h = np.where(np.any(p + h * v <= 0, axis=-1, keepdims=True), h / 2, h)
        else:
            raise DomainError("p + h v leaves the simplex for every trial step")
        return (self.value(p + h * v) - self.value(p)) / h[..., 0]

    def portfolio(self, p):
        p = np.asarray(p, dtype=float)
        n = p.shape[-1]
        phi = self.value(p)
        ratio = np.empty(p.shape)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            ratio[..., i] = 1.0 + self.dir_derivative(p, e - p) / phi
        return _clean_weights(p * ratio)


GENERATOR_KINDS = {
    "geometric_mean": lambda s: GeometricMean(s["weights"]),
    "diversity": lambda s: DiversityPower(s["alpha"], s.get("weights")),
    "affine": lambda s: Affine(s["coeffs"]),
    "min_affine": lambda s: MinOfAffines(s["pieces"]),
}


def generator_from_spec(spec):
    """Build a generating function from its JSON dictionary form."""
    if isinstance(spec, GeneratingFunction):
        return spec
    try:
        kind = spec["kind"]
        build = GENERATOR_KINDS[kind]
    except (KeyError, TypeError):
        raise ValueError(f"unknown generator spec {spec!r}") from None
    try:
        return build(spec)
    except KeyError as exc:
        raise ValueError(f"generator spec of kind {kind!r} is missing {exc}") from None


# Functional interface -------------------------------------------------------

def evaluate(phi, p):
    """``Phi(p)``."""
    return phi.value(check_simplex(p, open=False))


def dir_derivative(phi, p, v):
    """One-sided directional derivative of ``phi`` at interior point ``p``."""
    return phi.dir_derivative(check_simplex(p, open=True), v)


def portfolio_from_generating(phi, p):
    """Portfolio weights generated by ``phi`` at ``p`` (closed simplex)."""
    return phi.portfolio(check_simplex(p, open=True))


def supergradient_to_portfolio(p, v):
    """Portfolio with ``pi_i / p_i = v_i + 1 - <p, v>``.

    Negative output weights mean ``v`` was not a supergradient of any
    positive concave function; they are returned unchanged with a warning.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    pi = p * (v + 1.0 - np.sum(p * v, axis=-1, keepdims=True))
    if np.any(pi < -NEGATIVE_WEIGHT_TOL):
        warnings.warn("supergradient produced negative portfolio weights", RuntimeWarning, stacklevel=2)
    return pi


def portfolio_to_supergradient(p, pi):
    """Tangent vector ``pi/p - mean(pi/p)``, a supergradient of ``log Phi``."""
    ratio = np.asarray(pi, dtype=float) / np.asarray(p, dtype=float)
    return ratio - ratio.mean(axis=-1, keepdims=True)


def l_divergence(phi, q, p, pi=None):
    """L-divergence ``T(q | p)`` of the pair ``(phi, pi)``.

    ``pi`` defaults to the portfolio generated by ``phi`` at ``p``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if pi is None:
        pi = phi.portfolio(p)
    step = np.sum(pi / p * (q - p), axis=-1)
    if np.any(step <= -1.0):
        raise InvalidGeneratorError("nonpositive wealth multiplier inside the L-divergence")
    return np.log1p(step) - phi.log_value(q) + phi.log_value(p)


def excess_growth_rate(pi, q, p):
    """Discrete excess growth rate ``log(sum pi q/p) - sum pi log(q/p)``.

    Returns ``inf`` when some ``q_i = 0`` carries positive weight.
    """
    pi = np.asarray(pi, dtype=float)
    ratio = np.asarray(q, dtype=float) / np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(pi > 0, pi * np.log(ratio), 0.0)
    second = np.sum(logs, axis=-1)
    first = np.log(np.sum(pi * ratio, axis=-1))
    with np.errstate(invalid="ignore"):
        return np.where(np.isneginf(second), np.inf, first - second)
