"""One-dimensional monotone transport and the two-stock portfolios it defines.

With two stocks the exponential coordinate is ``theta = log(mu_1 / mu_2)``.
Given a law ``P`` of ``theta`` and a target law ``Q`` of the shift, the
quantile-matching map ``F = Q^{-1} o G_P`` is the optimal transport map for
the cost ``psi(theta - phi)``, and the portfolio puts
``pi_1 = expit(theta - F(theta))`` in the first stock.
"""

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit, logit, ndtr, ndtri

from .calculus import PortfolioMap
from .exceptions import DegenerateFitError, DomainError
from .generators import Affine, DiversityPower, GeometricMean
from .transport import CostKind, DiscreteMeasure, brute_force_solve, permutation_values

CDF_CLAMP = 1e-12


def _check_level(u):
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0) | ~(u < 1)):
        raise ValueError("probability levels must lie strictly between 0 and 1")
    return u


class Distribution1D:
    """Base class for laws on the real line.

    Subclasses provide ``cdf``, ``sf`` (survival function), ``quantile`` and
    ``isf`` (quantile of the upper tail). Using the upper tail above the
    median keeps quantile matching accurate far out in the right tail.
    """

    kind = None
    continuous = True

    def quantile(self, u):
        raise NotImplementedError

    def isf(self, s):
        return self.quantile(1.0 - _check_level(s))

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def sample(self, rng, size):
        return self.quantile(rng.uniform(0, 1, size).clip(1e-300, 1 - 1e-16))

    def to_spec(self):
        raise NotImplementedError


class Normal(Distribution1D):
    """Normal law parameterized by mean and standard deviation."""

    kind = "normal"

    def __init__(self, mean, sd):
        if not sd > 0:
            raise ValueError(f"standard deviation must be positive, got {sd}")
        self.mean = float(mean)
        self.sd = float(sd)

    @classmethod
    def fit(cls, samples, sd_denominator="n-1"):
        """Moment fit: sample mean and standard deviation.

        ``sd_denominator`` is ``"n-1"`` (unbiased variance) or ``"n"``.
        """
        x = np.asarray(samples, dtype=float).ravel()
        ddof = {"n-1": 1, "n": 0}.get(sd_denominator)
        if ddof is None:
            raise ValueError(f"sd_denominator must be 'n' or 'n-1', got {sd_denominator!r}")
        if x.size < 2:
            raise DegenerateFitError("need at least two observations to fit a normal law")
        if not np.all(np.isfinite(x)):
            raise DegenerateFitError("observations must be finite")
        sd = float(np.std(x, ddof=ddof))
        if not sd > 0:
            raise DegenerateFitError("observations have zero variance")
        return cls(float(np.mean(x)), sd)

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=float) - self.mean) / self.sd)

    def sf(self, x):
        return ndtr((self.mean - np.asarray(x, dtype=float)) / self.sd)

    def quantile(self, u):
        return self.mean + self.sd * ndtri(_check_level(u))

    def isf(self, s):
        return self.mean - self.sd * ndtri(_check_level(s))

    def sample(self, rng, size):
        return rng.normal(self.mean, self.sd, size)

    def to_spec(self):
        return {"kind": self.kind, "mean": self.mean, "sd": self.sd}

    def __repr__(self):
        return f"Normal(mean={self.mean!r}, sd={self.sd!r})"


class Uniform(Distribution1D):
    kind = "uniform"

    def __init__(self, a, b):
        if not a < b:
            raise ValueError(f"uniform law needs a < b, got ({a}, {b})")
        self.a = float(a)
        self.b = float(b)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def sf(self, x):
        return np.clip((self.b - np.asarray(x, dtype=float)) / (self.b - self.a), 0.0, 1.0)

    def quantile(self, u):
        return self.a + _check_level(u) * (self.b - self.a)

    def isf(self, s):
        return self.b - _check_level(s) * (self.b - self.a)

    def sample(self, rng, size):
        return rng.uniform(self.a, self.b, size)

    def to_spec(self):
        return {"kind": self.kind, "a": self.a, "b": self.b}

    def __repr__(self):
        return f"Uniform(a={self.a!r}, b={self.b!r})"


class Laplace(Distribution1D):
    kind = "laplace"

    def __init__(self, loc, scale):
        if not scale > 0:
            raise ValueError(f"Laplace scale must be positive, got {scale}")
        self.loc = float(loc)
        self.scale = float(scale)

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        return np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0)), 1.0 - 0.5 * np.exp(-np.maximum(z, 0)))

    def sf(self, x):
        z = (self.loc - np.asarray(x, dtype=float)) / self.scale
        return np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0)), 1.0 - 0.5 * np.exp(-np.maximum(z, 0)))

    def quantile(self, u):
        u = _check_level(u)
        with np.errstate(divide="ignore"):
            return np.where(u < 0.5, self.loc + self.scale * np.log(2 * u),
                            self.loc - self.scale * np.log(2 - 2 * u))

    def isf(self, s):
        return 2 * self.loc - Laplace.quantile(self, s)

    def sample(self, rng, size):
        return rng.laplace(self.loc, self.scale, size)

    def to_spec(self):
        return {"kind": self.kind, "loc": self.loc, "scale": self.scale}

    def __repr__(self):
        return f"Laplace(loc={self.loc!r}, scale={self.scale!r})"


class Empirical(Distribution1D):
    """Law of a finite sample.

    The CDF interpolates linearly through ``(x_(k), (k - 1/2) / N)`` so that
    it is continuous and strictly increasing between the extreme order
    statistics; the quantile is the order-statistic step function. A single
    sample is a point mass.
    """

    kind = "empirical"

    def __init__(self, samples, source=None):
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        if x.size == 0 or not np.all(np.isfinite(x)):
            raise ValueError("empirical law needs at least one finite sample")
        self.samples = x
        self.source = source
        self.continuous = x.size > 1 and np.all(np.diff(x) > 0)

    @property
    def n(self):
        return self.samples.size

    def _levels(self):
        return (np.arange(self.n) + 0.5) / self.n

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.n == 1:
            return np.where(x >= self.samples[0], 1.0, 0.0)
        return np.interp(x, self.samples, self._levels(), left=0.0, right=1.0)

    def quantile(self, u):
        u = _check_level(u)
        idx = np.clip(np.ceil(u * self.n).astype(int) - 1, 0, self.n - 1)
        return self.samples[idx]

    def sample(self, rng, size):
        return rng.choice(self.samples, size)

    def to_spec(self):
        if self.source is not None:
            return {"kind": self.kind, "samples_file": str(self.source)}
        return {"kind": self.kind, "samples": self.samples.tolist()}

    def __repr__(self):
        return f"Empirical(n={self.n})"


def point_mass(x):
    return Empirical([x])


def _read_samples(path):
    values = []
    with open(path) as fh:
        for line in fh:
            for tok in line.replace(",", " ").split():
                try:
                    values.append(float(tok))
                except ValueError:
                    if values:
                        raise DomainError(f"{path}: non-numeric sample {tok!r}") from None
                    # a header line before the first number is allowed
    return values


def distribution_from_spec(spec, base_dir=None):
    """Build a law from its JSON dictionary form."""
    if isinstance(spec, Distribution1D):
        return spec
    try:
        kind = spec["kind"]
        if kind == "normal":
            return Normal(spec["mean"], spec["sd"])
        if kind == "uniform":
            return Uniform(spec["a"], spec["b"])
        if kind == "laplace":
            return Laplace(spec["loc"], spec["scale"])
        if kind == "empirical":
            if "samples" in spec:
                return Empirical(spec["samples"])
            path = Path(spec["samples_file"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            return Empirical(_read_samples(path), source=spec["samples_file"])
        if kind == "point":
            return point_mass(spec["at"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed distribution spec {spec!r}: {exc}") from None
    raise ValueError(f"unknown distribution kind {spec.get('kind')!r}")


def quantile(d, u):
    """Lower quantile ``inf {y : CDF(y) >= u}`` for ``0 < u < 1``."""
    return d.quantile(u)


def monotone_map(P, Q, x, return_flags=False):
    """Quantile-matching map ``F(x) = Q^{-1}(G_P(x))``.

    CDF values are clamped into ``[1e-12, 1 - 1e-12]``; with
    ``return_flags=True`` a boolean array marks the clamped points.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(P.cdf(x), dtype=float)
    s = np.asarray(P.sf(x), dtype=float)
    clamped = (u < CDF_CLAMP) | (s < CDF_CLAMP)
    u = np.clip(u, CDF_CLAMP, 1 - CDF_CLAMP)
    s = np.clip(s, CDF_CLAMP, 1 - CDF_CLAMP)
    upper = u > 0.5
    out = np.where(upper, Q.isf(np.where(upper, s, 0.5)), Q.quantile(np.where(upper, 0.5, u)))
    out = out[()] if out.ndim == 0 else out
    return (out, clamped) if return_flags else out


@dataclass(frozen=True)
class AffineMap:
    """``F(theta) = intercept + slope * theta``.

    For a two-stock portfolio ``theta - F(theta) = alpha * theta + log(c)``.
    """

    slope: float
    intercept: float

    def __call__(self, theta):
        return self.intercept + self.slope * np.asarray(theta, dtype=float)

    @property
    def alpha(self):
        return 1.0 - self.slope

    @property
    def c(self):
        return math.exp(-self.intercept)


def gaussian_transport(m1, s1, m2, s2):
    """Monotone map from ``N(m1, s1)`` to ``N(m2, s2)`` (standard deviations)."""
    if not (s1 > 0 and s2 > 0):
        raise ValueError("standard deviations must be positive")
    slope = s2 / s1
    return AffineMap(slope=slope, intercept=m2 - slope * m1)


class TwoStockPortfolioCurve:
    """Two-stock portfolio ``pi_1 = expit(theta - F(theta))``, ``theta = log(mu_1/mu_2)``.

    Parameters
    ----------
    transport : callable
        Nondecreasing map ``F`` on the real line.
    P, Q : Distribution1D, optional
        Laws that produced the map, kept for reporting.
    """

    def __init__(self, transport, P=None, Q=None):
        self.transport = transport
        self.P = P
        self.Q = Q

    @property
    def affine(self):
        return self.transport if isinstance(self.transport, AffineMap) else None

    def pi1(self, mu1):
        mu1 = np.asarray(mu1, dtype=float)
        if np.any((mu1 <= 0) | (mu1 >= 1)):
            raise DomainError("mu_1 must lie strictly between 0 and 1")
        theta = logit(mu1)
        return expit(theta - self.transport(theta))

    def weights(self, mu):
        mu = np.asarray(mu, dtype=float)
        if mu.shape[-1] != 2:
            raise DomainError("two-stock portfolio needs points with two coordinates")
        p1 = self.pi1(mu[..., 0] / mu.sum(axis=-1))
        return np.stack([p1, 1.0 - p1], axis=-1)

    def portfolio_map(self):
        return PortfolioMap(self.weights, name="two_stock")

    def generator(self):
        """Generating function for the affine (Gaussian) case, else ``None``.

        With ``0 < alpha < 1`` this is ``(c mu_1**alpha + mu_2**alpha)**(1/alpha)``;
        with ``alpha == 0`` the portfolio is constant-weighted and with
        ``alpha == 1`` it is buy-and-hold.
        """
        aff = self.affine
        if aff is None:
            return None
        if 0.0 < aff.alpha < 1.0:
            return DiversityPower(aff.alpha, weights=[aff.c, 1.0])
        if aff.alpha == 1.0:
            return Affine([aff.c, 1.0])
        if aff.alpha == 0.0:
            c = aff.c
            return GeometricMean([c / (1 + c), 1 / (1 + c)])
        return None

    def table(self, mu1):
        mu1 = np.asarray(mu1, dtype=float)
        return np.column_stack([mu1, self.pi1(mu1)])


def two_stock_portfolio(P, Q):
    """Portfolio curve of the monotone transport from ``P`` to ``Q``.

    Normal-to-normal pairs use the exact affine map.
    """
    if isinstance(P, Normal) and isinstance(Q, Normal):
        return TwoStockPortfolioCurve(gaussian_transport(P.mean, P.sd, Q.mean, Q.sd), P, Q)
    if isinstance(Q, Empirical) and Q.n == 1:
        return TwoStockPortfolioCurve(AffineMap(0.0, float(Q.samples[0])), P, Q)
    return TwoStockPortfolioCurve(lambda x: monotone_map(P, Q, x), P, Q)


def mass_interval(P, mass=0.999):
    """Central interval of ``theta`` values carrying ``mass`` of ``P``."""
    tail = 0.5 * (1.0 - mass)
    return float(P.quantile(tail)), float(P.isf(tail))


def quantile_atoms(d, size):
    """Equal-mass discretization at the midpoint levels ``(k + 1/2) / size``."""
    return d.quantile((np.arange(size) + 0.5) / size)


@dataclass
class OptimalityReport:
    monotone_optimal: bool
    unique: bool
    margin: float
    monotone_value: float
    best_value: float
    best_permutation: tuple
    degenerate: bool = False


def verify_1d_optimality(P, Q, grid_size=6, tol=1e-12):
    """Brute-force check that the sorted pairing is optimal for the shift cost.

    Both laws are discretized to ``grid_size`` equal-mass atoms. ``margin``
    is the smallest excess cost of any other permutation over the sorted one.
    """
    if not 1 <= grid_size <= 8:
        raise ValueError("grid_size must be between 1 and 8")
    x = quantile_atoms(P, grid_size)
    y = quantile_atoms(Q, grid_size)
    degenerate = np.unique(x).size < grid_size or np.unique(y).size < grid_size
    ident = tuple(range(grid_size))
    if degenerate:
        c = np.logaddexp(0.0, x[:, None] - y[None, :])
        vals = {perm: float(sum(c[i, j] for i, j in enumerate(perm)))
                for perm in itertools.permutations(range(grid_size))}
        best_perm = min(vals, key=lambda p: (vals[p], p))
        best = vals[best_perm]
    else:
        Pm = DiscreteMeasure.uniform(x[:, None])
        Qm = DiscreteMeasure.uniform(y[:, None])
        vals = permutation_values(Pm, Qm, CostKind.EXP_SHIFT)
        sol = brute_force_solve(Pm, Qm, CostKind.EXP_SHIFT)
        best_perm = tuple(j for _, j, _ in sorted(sol.entries))
        best = vals[best_perm]
    mono = vals[ident]
    others = [v for p, v in vals.items() if p != ident]
    margin = (min(others) - mono) / grid_size if others else math.inf
    return OptimalityReport(
        monotone_optimal=mono <= best + tol,
        unique=bool(margin > tol),
        margin=float(margin),
        monotone_value=float(mono) / grid_size,
        best_value=float(best) / grid_size,
        best_permutation=best_perm,
        degenerate=bool(degenerate),
    )
