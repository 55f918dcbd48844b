"""Ranking quantile mean-field games: solvers and population simulation."""

from ._qmfg import (  # noqa: F401
    CltReport,
    FbodeSolution,
    FixedPointIteration,
    NashGapPoint,
    NashGapReport,
    PopulationRun,
    RunConfig,
    ThresholdSolution,
    __version__,
    clt_check,
    empirical_quantile,
    gaussian_quantile,
    grid_quantile,
    limiting_cost,
    load_config,
    nash_check,
    nash_error_estimate,
    simulate,
    solve_fbode,
    solve_threshold,
    std_normal_quantile,
    table1_defaults,
    terminal_cost,
    validate,
)
