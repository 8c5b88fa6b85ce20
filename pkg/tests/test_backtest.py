import json
import math

import numpy as np
import pytest

from fgplab.backtest import (
    BacktestConfig,
    PriceSeries,
    emit_plot_data,
    fit_P,
    load_prices,
    load_synthetic,
    market_weights,
    run_backtest,
    synthetic_prices,
    write_prices,
)
from fgplab.exceptions import DegenerateFitError, DomainError, PriceParseError
from fgplab.simplex import to_exponential


def write(tmp_path, text, name="prices.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_prices_ok(tmp_path):
    s = load_prices(write(tmp_path, "date,p1,p2\n2000-01-01,1,2\n2000-02-01,1.5,2.5\n"))
    assert s.dates == ["2000-01-01", "2000-02-01"]
    assert s.prices.shape == (2, 2)


@pytest.mark.parametrize(
    "text, row",
    [
        ("date,p1,p2\n2000-01-01,1,2\n2000-02-01,1,-2\n", 3),
        ("date,p1,p2\n2000-01-01,1,2\n2000-02-01,1\n", 3),
        ("date,p1,p2\n2000-01-01,1,2\n2000/02/01,1,2\n", 3),
        ("date,p1,p2\n2000-02-01,1,2\n2000-01-01,1,2\n", 3),
        ("date,p1,p2\n2000-01-01,abc,2\n", 2),
        ("date,p1,p2\n2000-01-01,nan,2\n", 2),
        ("day,a,b\n2000-01-01,1,2\n", 1),
        ("date,p1,p2\n", 1),
        ("", 1),
    ],
)
def test_load_prices_errors_report_row(tmp_path, text, row):
    with pytest.raises(PriceParseError) as err:
        load_prices(write(tmp_path, text))
    assert err.value.row == row
    assert str(err.value).startswith(f"row {row}:")


def test_write_prices_round_trip(tmp_path):
    s = synthetic_prices(months=30, train=(0, 20))
    path = tmp_path / "p.csv"
    write_prices(path, s)
    back = load_prices(path)
    assert back.dates == s.dates and np.array_equal(back.prices, s.prices)


def test_market_weights():
    s = PriceSeries(["2000-01-01", "2000-02-01"], [[1.0, 1.0], [2.0, 1.0]])
    assert np.allclose(market_weights(s), [[0.5, 0.5], [2 / 3, 1 / 3]])
    assert np.allclose(market_weights(s, [1.0, 3.0])[0], [0.25, 0.75])
    with pytest.raises(DomainError):
        market_weights(s, [1.0, 0.0])


def test_fit_P():
    d = fit_P([0.0, 2.0])
    assert d.mean == 1.0 and d.sd == pytest.approx(math.sqrt(2), abs=1e-15)
    with pytest.raises(DegenerateFitError):
        fit_P(np.zeros(10))


def test_config_validation(tmp_path):
    with pytest.raises(DomainError):
        BacktestConfig(train=(0, 10), test=(5, 20))
    with pytest.raises(DomainError):
        BacktestConfig(train=(5, 2))
    with pytest.raises(DomainError):
        BacktestConfig(sd_denominator="n+1")
    with pytest.raises(DomainError):
        BacktestConfig.from_dict({"train": [0, 10], "window": 3})
    cfg = BacktestConfig(train=(0, 10), test=(10, 20), sd_denominator="n")
    path = write(tmp_path, json.dumps(cfg.to_dict()), "cfg.json")
    assert BacktestConfig.load(path) == cfg


def test_window_beyond_data():
    s = synthetic_prices(months=30, train=(0, 20))
    with pytest.raises(DomainError):
        run_backtest(s, BacktestConfig(train=(0, 20), test=(20, 40)))


def test_bundled_series_matches_generator():
    a, b = load_synthetic(), synthetic_prices()
    assert a.dates == b.dates
    assert np.array_equal(a.prices, b.prices)


def test_synthetic_training_moments():
    theta = to_exponential(market_weights(load_synthetic()))[:120, 0]
    assert theta.mean() == pytest.approx(-0.626, abs=1e-12)
    assert theta.std(ddof=1) == pytest.approx(0.305, abs=1e-12)


def test_default_backtest():
    rep = run_backtest(load_synthetic())
    assert rep.P_fit.mean == pytest.approx(-0.626, abs=1e-12)
    assert rep.P_fit.sd == pytest.approx(0.305, abs=1e-12)
    assert rep.logV.shape == (127,) and rep.logV[0] == 0.0
    assert rep.decomposition_residual < 1e-9
    assert rep.logV.min() >= rep.lower_bound - 1e-12
    assert rep.generator["kind"] == "diversity"
    assert rep.generator["alpha"] == pytest.approx(1 - 0.08 / 0.305, abs=1e-12)


@pytest.mark.parametrize(
    "q_spec, kind",
    [
        ({"kind": "uniform", "a": -0.2, "b": 0.6}, None),
        ({"kind": "laplace", "loc": -0.2, "scale": 0.1}, None),
        ({"kind": "point", "at": 0.0}, "affine"),
    ],
)
def test_other_targets(q_spec, kind):
    rep = run_backtest(load_synthetic(), BacktestConfig(q_spec=q_spec))
    assert np.all(np.isfinite(rep.logV))
    assert (rep.generator or {}).get("kind") == kind
    if kind == "affine":
        assert np.allclose(rep.logV, 0.0, atol=1e-12)


def test_outputs_are_deterministic(tmp_path):
    files = []
    for name in ("a", "b"):
        files.append(emit_plot_data(run_backtest(load_synthetic()), tmp_path / name))
    for fa, fb in zip(*files):
        assert fa.read_bytes() == fb.read_bytes()
    lines = files[0][0].read_text().splitlines()
    assert lines[0] == "date\tlogV" and len(lines) == 128
    assert all(len(line.split("\t")) == 2 for line in lines)
    assert len(files[0][1].read_text().splitlines()) == 202
    assert len(files[0][2].read_text().splitlines()) == 248


def test_empty_test_window(tmp_path):
    rep = run_backtest(load_synthetic(), BacktestConfig(train=(0, 120), test=(120, 120)))
    paths = emit_plot_data(rep, tmp_path)
    assert paths[0].read_text() == "date\tlogV\n"
    assert rep.final_log_value == 0.0


def test_three_stock_discrete_route():
    rng = np.random.default_rng(1)
    prices = np.exp(np.cumsum(rng.normal(0, 0.05, (40, 3)), axis=0))
    s = PriceSeries([f"2000-01-{d:02d}" for d in range(1, 32)] + [f"2000-02-{d:02d}" for d in range(1, 10)], prices)
    with pytest.raises(DomainError):
        run_backtest(s, BacktestConfig(train=(0, 20), test=(20, 40)))
    q = {"kind": "discrete", "atoms": [[0.0, None, None], [None, 0.0, None], [None, None, 0.0]]}
    rep = run_backtest(s, BacktestConfig(train=(0, 3), test=(20, 40), q_spec=q))
    assert rep.generator["kind"] == "min_affine"
    assert rep.decomposition_residual < 1e-9
