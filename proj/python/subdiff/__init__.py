"""Monte Carlo tools for time-changed Q-Wiener processes."""

from ._subdiff import (
    caputo_derivative,
    experiments,
    inverse_moment,
    mittag_leffler,
    mode_characteristic_function,
    run_experiment,
    sample_inverse,
    simulate_inverse_path,
)

__all__ = [
    "caputo_derivative",
    "experiments",
    "inverse_moment",
    "mittag_leffler",
    "mode_characteristic_function",
    "run_experiment",
    "sample_inverse",
    "simulate_inverse_path",
]
