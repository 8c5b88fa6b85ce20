"""Functionally generated portfolios, multiplicative cyclical monotonicity and transport.

Points of the unit simplex are numpy arrays whose last axis indexes the
stocks. The main entry points are re-exported here.
"""

from .backtest import (
    BacktestConfig,
    BacktestReport,
    PriceSeries,
    emit_plot_data,
    fit_P,
    load_prices,
    load_synthetic,
    market_weights,
    run_backtest,
    synthetic_prices,
)
from .calculus import (
    PortfolioMap,
    constant_portfolio,
    counterexample_portfolio,
    curvature_gap,
    drift_form,
    excess_growth_form,
    generated_portfolio,
    line_integral,
    loop_defect,
    market_portfolio,
    reconstruct_log_phi,
    two_stock_drift_condition,
    weight_ratio_curvature,
)
from .dynamics import (
    Box,
    FuzzReport,
    ValueDecomposition,
    cycle_log_value,
    fernholz_decompose,
    find_violating_cycle,
    mcm_fuzz,
    relative_value,
    relative_value_exp,
    repeat_cycle,
)
from .estimators import (
    DiscreteTransportPortfolio,
    FunctionallyGeneratedPortfolio,
    MonotoneTransportPortfolio,
)
from .exceptions import (
    DegenerateFitError,
    DomainError,
    FGPError,
    InfeasibleTransportError,
    InvalidGeneratorError,
    NotAGradientError,
    NumericDegeneracyError,
    PriceParseError,
)
from .generators import (
    Affine,
    Custom,
    DiversityPower,
    GeneratingFunction,
    GeometricMean,
    MinOfAffines,
    dir_derivative,
    evaluate,
    excess_growth_rate,
    generator_from_spec,
    l_divergence,
    portfolio_from_generating,
    portfolio_to_supergradient,
    supergradient_to_portfolio,
)
from .rearrangement import (
    Empirical,
    Laplace,
    Normal,
    TwoStockPortfolioCurve,
    Uniform,
    gaussian_transport,
    monotone_map,
    quantile,
    two_stock_portfolio,
    verify_1d_optimality,
)
from .simplex import from_exponential, fisher_inner, project_to_tangent, psi, to_exponential
from .transport import (
    Coupling,
    CostKind,
    DiscreteMeasure,
    brute_force_solve,
    check_c_monotone,
    cost,
    entropy_to_quadratic,
    portfolio_from_coupling,
    portfolio_from_exp_shift,
    solve_discrete,
)

__version__ = "0.1.0"
