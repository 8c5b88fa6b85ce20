"""scikit-learn style wrappers around the portfolio constructions.

Every estimator is fitted on a market path ``X`` of shape ``(T, n)`` (rows
are market weights), ``predict`` returns portfolio weights row by row and
``score`` is the final log value relative to the market along ``X``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dynamics import fernholz_decompose, finite_mcm_potential, relative_value
from .exceptions import NotAGradientError
from .generators import MinOfAffines, generator_from_spec
from .rearrangement import Normal, distribution_from_spec, two_stock_portfolio
from .simplex import to_exponential
from .transport import (
    CostKind,
    DiscreteMeasure,
    atom_selection,
    portfolio_from_coupling,
    solve_discrete,
)
from .validation import check_simplex


def _check_weights(X, n=None):
    X = check_array(X, dtype=float, ensure_min_samples=1, ensure_min_features=2)
    X = check_simplex(X, open=True)
    if n is not None and X.shape[1] != n:
        raise ValueError(f"X has {X.shape[1]} stocks, estimator was fitted with {n}")
    return X


class FunctionallyGeneratedPortfolio(BaseEstimator):
    """Portfolio generated by a fixed generating function.

    Parameters
    ----------
    generator : dict or GeneratingFunction
        JSON form (``{"kind": "diversity", "alpha": 0.5}``) or an instance.
    """

    def __init__(self, generator=None):
        self.generator = generator

    def fit(self, X, y=None):
        X = _check_weights(X)
        spec = self.generator if self.generator is not None else {"kind": "diversity", "alpha": 0.5}
        self.generator_ = generator_from_spec(spec)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self)
        return self.generator_.portfolio(_check_weights(X, self.n_features_in_))

    def decompose(self, X):
        check_is_fitted(self)
        return fernholz_decompose(self.generator_, _check_weights(X, self.n_features_in_))

    def score(self, X, y=None):
        return float(self.decompose(X).logV[-1])


class MonotoneTransportPortfolio(TransformerMixin, BaseEstimator):
    """Two-stock portfolio from the monotone transport of the fitted law of ``theta``.

    ``fit`` estimates a normal law for ``theta = log(mu_1 / mu_2)`` over the
    rows of ``X``; the target law ``q_spec`` fixes the shift distribution.

    Parameters
    ----------
    q_spec : dict
        Target law in JSON form.
    sd_denominator : {"n-1", "n"}
    """

    def __init__(self, q_spec=None, sd_denominator="n-1"):
        self.q_spec = q_spec
        self.sd_denominator = sd_denominator

    def fit(self, X, y=None):
        X = _check_weights(X, 2)
        theta = to_exponential(X)[:, 0]
        self.P_ = Normal.fit(theta, self.sd_denominator)
        spec = self.q_spec if self.q_spec is not None else {"kind": "normal", "mean": 0.0, "sd": 0.08}
        self.Q_ = distribution_from_spec(spec)
        self.curve_ = two_stock_portfolio(self.P_, self.Q_)
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        """Exponential coordinate ``theta - F(theta)`` of the portfolio, shape (T, 1)."""
        check_is_fitted(self)
        theta = to_exponential(_check_weights(X, 2))[:, 0]
        return (theta - self.curve_.transport(theta))[:, None]

    def predict(self, X):
        check_is_fitted(self)
        return self.curve_.weights(_check_weights(X, 2))

    def score(self, X, y=None):
        check_is_fitted(self)
        X = _check_weights(X, 2)
        return float(relative_value(self.curve_.portfolio_map(), X, log=True)[-1])


class DiscreteTransportPortfolio(BaseEstimator):
    """Portfolio from an optimal coupling between observed weights and log-tilts.

    ``fit`` puts uniform mass on the distinct rows of ``X`` and couples them
    with the target measure under ``cost``. The tilt chosen for each atom
    defines the portfolio there; it is extended to the whole simplex by the
    smallest concave generator consistent with the atoms (a minimum of
    affine functions).

    Parameters
    ----------
    targets : array_like, shape (k, n)
        Log-tilt vectors; ``-inf`` entries are allowed.
    target_weights : array_like, optional
        Defaults to uniform.
    """

    def __init__(self, targets=None, target_weights=None, cost="log_partition"):
        self.targets = targets
        self.target_weights = target_weights
        self.cost = cost

    def fit(self, X, y=None):
        X = _check_weights(X)
        atoms = np.unique(X, axis=0)
        P = DiscreteMeasure.uniform(atoms)
        targets = np.asarray(self.targets, dtype=float)
        if self.target_weights is None:
            Q = DiscreteMeasure.uniform(targets)
        else:
            Q = DiscreteMeasure(targets, self.target_weights)
        self.coupling_ = solve_discrete(P, Q, CostKind(self.cost))
        self.atom_portfolio_ = portfolio_from_coupling(atom_selection(P, Q, self.coupling_))
        log_phi, cycle = finite_mcm_potential(self.atom_portfolio_, atoms)
        if cycle is not None:
            raise NotAGradientError("coupled portfolio violates cyclical monotonicity on the atoms")
        pieces = np.exp(log_phi)[:, None] * self.atom_portfolio_(atoms) / atoms
        self.generator_ = MinOfAffines(pieces, validate=False)
        self.atoms_ = atoms
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Coupled weights on the fitted atoms, the generated extension elsewhere.

        At an atom where several affine pieces tie, the extension may pick a
        different supergradient than the coupling did; the coupling wins.
        """
        check_is_fitted(self)
        X = _check_weights(X, self.n_features_in_)
        out = self.generator_.portfolio(X)
        hit = np.all(X[:, None, :] == self.atoms_[None, :, :], axis=-1).any(axis=1)
        if np.any(hit):
            out[hit] = self.atom_portfolio_(X[hit])
        return out

    def score(self, X, y=None):
        check_is_fitted(self)
        return float(fernholz_decompose(self.generator_, _check_weights(X, self.n_features_in_)).logV[-1])
