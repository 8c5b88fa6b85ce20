"""Price ingestion, model fitting and backtesting of transport portfolios.

Prices are read from CSV files with header ``date,p1,...,pn``. Market
weights assume the capitalization of stock ``i`` is
``initial_caps[i] * price_i(t) / price_i(0)``. For two stocks the pipeline
fits a normal law to ``theta = log(mu_1 / mu_2)`` on a training window,
builds the monotone transport portfolio for a chosen target law and
tracks its value relative to the market over a test window.
"""

import csv
import datetime as dt
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .dynamics import fernholz_decompose, relative_value
from .estimators import DiscreteTransportPortfolio, MonotoneTransportPortfolio
from .exceptions import DomainError, PriceParseError
from .rearrangement import Normal, mass_interval
from .simplex import to_exponential

SYNTHETIC_SEED = 42
SYNTHETIC_MONTHS = 247
SYNTHETIC_TRAIN = (0, 120)
SYNTHETIC_TEST = (120, 247)
SYNTHETIC_MEAN = -0.626
SYNTHETIC_SD = 0.305
DEFAULT_Q = {"kind": "normal", "mean": 0.0, "sd": 0.08}
CURVE_POINTS = 201


@dataclass
class PriceSeries:
    """Dated price table: ``prices[t, i]`` is the price of stock ``i`` on ``dates[t]``."""

    dates: list
    prices: np.ndarray

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=float)
        if self.prices.ndim != 2 or self.prices.shape[0] != len(self.dates):
            raise DomainError("need one row of prices per date")
        if self.prices.shape[0] == 0:
            raise DomainError("price series is empty")
        if not np.all(np.isfinite(self.prices)) or np.any(self.prices <= 0):
            raise DomainError("prices must be positive and finite")

    def __len__(self):
        return len(self.dates)

    @property
    def n_stocks(self):
        return self.prices.shape[1]


def _parse_date(text, row):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise PriceParseError(f"date {text!r} is not ISO-8601 (YYYY-MM-DD)", row) from None


def load_prices(csv_path):
    """Read and validate a price CSV.

    Raises
    ------
    PriceParseError
        With ``row`` set to the offending 1-based line number.
    """
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PriceParseError("file is empty", 1)
    header = [h.strip() for h in rows[0]]
    n = len(header) - 1
    if n < 1 or header != ["date"] + [f"p{i + 1}" for i in range(n)]:
        raise PriceParseError("header must be date,p1,...,pn", 1)
    dates, prices, last = [], [], None
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != n + 1:
            raise PriceParseError(f"expected {n + 1} fields, found {len(row)}", lineno)
        day = _parse_date(row[0], lineno)
        if last is not None and day <= last:
            raise PriceParseError("dates must be strictly increasing", lineno)
        try:
            values = [float(c) for c in row[1:]]
        except ValueError:
            raise PriceParseError("prices must be decimal numbers", lineno) from None
        if not all(np.isfinite(v) and v > 0 for v in values):
            raise PriceParseError("prices must be positive and finite", lineno)
        dates.append(day.isoformat())
        prices.append(values)
        last = day
    if not dates:
        raise PriceParseError("no data rows after the header", 1)
    return PriceSeries(dates, np.array(prices))


def write_prices(csv_path, series):
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date"] + [f"p{i + 1}" for i in range(series.n_stocks)])
        for d, row in zip(series.dates, series.prices):
            w.writerow([d] + [repr(float(x)) for x in row])


def market_weights(series, initial_caps=None):
    """Market weights from prices, shape ``(T, n)``."""
    caps = np.ones(series.n_stocks) if initial_caps is None else np.asarray(initial_caps, dtype=float)
    if caps.shape != (series.n_stocks,) or np.any(caps <= 0):
        raise DomainError("initial_caps needs one positive value per stock")
    x = caps * series.prices / series.prices[0]
    return x / x.sum(axis=1, keepdims=True)


def fit_P(theta, sd_denominator="n-1"):
    """Normal law matching the sample mean and standard deviation of ``theta``."""
    return Normal.fit(theta, sd_denominator)


@dataclass
class BacktestConfig:
    """Windows are half-open index ranges ``[start, stop)`` into the price rows."""

    train: tuple = SYNTHETIC_TRAIN
    test: tuple = SYNTHETIC_TEST
    q_spec: dict = field(default_factory=lambda: dict(DEFAULT_Q))
    initial_caps: list = None
    sd_denominator: str = "n-1"

    def __post_init__(self):
        self.train = tuple(int(x) for x in self.train)
        self.test = tuple(int(x) for x in self.test)
        for name, (a, b) in (("train", self.train), ("test", self.test)):
            if a < 0 or b < a:
                raise DomainError(f"{name} window [{a}, {b}) is not a valid range")
        if self.train[1] > self.test[0]:
            raise DomainError("the training window must end before the test window starts")
        if self.sd_denominator not in ("n", "n-1"):
            raise DomainError("sd_denominator must be 'n' or 'n-1'")

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"train", "test", "q_spec", "initial_caps", "sd_denominator"}
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {
            "train": list(self.train),
            "test": list(self.test),
            "q_spec": self.q_spec,
            "initial_caps": self.initial_caps,
            "sd_denominator": self.sd_denominator,
        }


@dataclass
class BacktestReport:
    dates: list
    theta: np.ndarray
    test_dates: list
    logV: np.ndarray
    P_fit: Normal
    curve: np.ndarray
    generator: dict = None
    decomposition_residual: float = None
    lower_bound: float = None

    @property
    def final_log_value(self):
        return float(self.logV[-1]) if len(self.logV) else 0.0

    def summary(self):
        return {
            "P_fit": {"mean": self.P_fit.mean, "sd": self.P_fit.sd},
            "final_logV": self.final_log_value,
            "generator": self.generator,
            "decomposition_residual": self.decomposition_residual,
            "lower_bound": self.lower_bound,
            "test_rows": len(self.test_dates),
        }


def _window(name, rng, length):
    a, b = rng
    if b > length:
        raise DomainError(f"{name} window [{a}, {b}) exceeds the {length} available rows")
    return slice(a, b)


def run_backtest(series, config=None):
    """Fit on the training window and track relative value over the test window.

    With two stocks the portfolio is the monotone transport portfolio for
    ``config.q_spec``. With more stocks ``q_spec`` must be
    ``{"kind": "discrete", "atoms": [...], "weights": [...]}`` giving log-tilt
    targets, and the training weights are coupled with them.
    """
    config = config or BacktestConfig()
    weights = market_weights(series, config.initial_caps)
    train = _window("train", config.train, len(series))
    test = _window("test", config.test, len(series))
    test_path = weights[test]
    if series.n_stocks == 2:
        theta = to_exponential(weights)[:, 0]
        est = MonotoneTransportPortfolio(config.q_spec, config.sd_denominator).fit(weights[train])
        curve = est.curve_
        P_fit = est.P_
        lo, hi = mass_interval(P_fit, 0.999)
        mu1 = 1.0 / (1.0 + np.exp(-np.linspace(lo, hi, CURVE_POINTS)))
        table = curve.table(mu1)
        generator = curve.generator()
        pi = curve.portfolio_map()
    else:
        if config.q_spec.get("kind") != "discrete":
            raise DomainError("more than two stocks need a discrete q_spec of log-tilt targets")
        theta = np.full(len(series), np.nan)
        atoms = [[-np.inf if a is None else float(a) for a in row] for row in config.q_spec["atoms"]]
        est = DiscreteTransportPortfolio(atoms, config.q_spec.get("weights")).fit(weights[train])
        P_fit = Normal(0.0, 1.0)
        table = np.empty((0, 2))
        generator = est.generator_
        pi = None
    residual = lower = None
    if test_path.shape[0] == 0:
        logv = np.empty(0)
    elif generator is not None:
        dec = fernholz_decompose(generator, test_path)
        logv = dec.logV
        residual = float(np.max(np.abs(dec.residual)))
        logphi = generator.log_value(test_path)
        lower = float(logphi.min() - logphi.max())
        if pi is not None:
            direct = relative_value(pi, test_path, log=True)
            residual = max(residual, float(np.max(np.abs(direct - logv))))
    else:
        logv = relative_value(pi, test_path, log=True)
    return BacktestReport(
        dates=list(series.dates),
        theta=theta,
        test_dates=list(series.dates[test]),
        logV=logv,
        P_fit=P_fit,
        curve=table,
        generator=None if generator is None else generator.to_spec(),
        decomposition_residual=residual,
        lower_bound=lower,
    )


def _fmt(x):
    return repr(float(x))


def _write_tsv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_plot_data(report, out_dir):
    """Write ``logV.tsv``, ``curve.tsv``, ``theta.tsv`` and ``summary.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_tsv(out / "logV.tsv", ["date", "logV"],
               [(d, _fmt(v)) for d, v in zip(report.test_dates, report.logV)])
    _write_tsv(out / "curve.tsv", ["mu1", "pi1"], [(_fmt(a), _fmt(b)) for a, b in report.curve])
    _write_tsv(out / "theta.tsv", ["date", "theta"],
               [(d, _fmt(t)) for d, t in zip(report.dates, report.theta)])
    with open(out / "summary.json", "w") as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return [out / name for name in ("logV.tsv", "curve.tsv", "theta.tsv", "summary.json")]


def _month_starts(start, count):
    y, m = start.year, start.month
    out = []
    for _ in range(count):
        out.append(dt.date(y, m, 1).isoformat())
        m += 1
        if m > 12:
            y, m = y + 1, 1
    return out


def synthetic_prices(seed=SYNTHETIC_SEED, months=SYNTHETIC_MONTHS, train=SYNTHETIC_TRAIN,
                     mean=SYNTHETIC_MEAN, sd=SYNTHETIC_SD, start=dt.date(1990, 1, 1)):
    """Two-stock monthly prices whose training ``theta`` has the given moments.

    ``theta_t = b * w_t + d * g_t`` where ``w`` is a Gaussian random walk
    with ``w_0 = 0`` and ``g_t = 1 - exp(-t / 6)`` moves the level away from
    the uniform start within a few months. The scale ``b > 0`` and level
    ``d`` are solved so that the training window has sample mean ``mean``
    and sample standard deviation ``sd`` (denominator ``n - 1``). Stock 2
    follows its own random walk and stock 1 is ``stock 2 * exp(theta)``;
    both start at price 1.
    """
    rng = np.random.default_rng(seed)
    w = np.concatenate([[0.0], np.cumsum(rng.normal(0.0, 0.05, months - 1))])
    log_p2 = np.concatenate([[0.0], np.cumsum(rng.normal(0.005, 0.04, months - 1))])
    g = 1.0 - np.exp(-np.arange(months) / 6.0)
    sl = slice(*train)
    wt, gt = w[sl], g[sl]
    mw, mg = wt.mean(), gt.mean()
    # the mean condition b*mw + d*mg = mean gives d = (mean - b*mw) / mg, which
    # leaves var(b*u + v) = sd**2 with u, v below: a quadratic in b
    u = wt - mw * gt / mg
    v = mean * gt / mg
    cu, cv = u - u.mean(), v - v.mean()
    k = len(wt) - 1
    qa, qb, qc = cu @ cu / k, 2 * (cu @ cv) / k, cv @ cv / k - sd**2
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        raise DomainError("cannot calibrate the synthetic series to these moments")
    b = (-qb + np.sqrt(disc)) / (2 * qa)
    d = (mean - b * mw) / mg
    theta = b * w + d * g
    prices = np.exp(np.column_stack([log_p2 + theta, log_p2]))
    return PriceSeries(_month_starts(start, months), prices)


def bundled_synthetic_path():
    return resources.files("fgplab").joinpath("data", "synthetic_prices.csv")


def load_synthetic():
    """The bundled synthetic price series (identical to :func:`synthetic_prices`)."""
    with resources.as_file(bundled_synthetic_path()) as path:
        return load_prices(path)


def default_config():
    return BacktestConfig()
