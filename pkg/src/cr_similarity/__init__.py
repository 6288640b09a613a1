"""Testing similarity of two competing-risks models with constant intensities."""

__version__ = "0.1.0"

from .constrained import ConstrainedFit, constrained_mle, select_bootstrap_intensities
from .harness import (CellResult, ScenarioSpec, SimulationReport, builtin_scenarios,
                      get_scenario, rejection_curve, run_cell, run_scenario)
from .io import ParseError, parse_events, sample_from_stats, write_events
from .model import (EventHistory, GroupSample, SufficientStats, expected_events,
                    log_likelihood, mle, sufficient_stats)
from .similarity import (ConfigurationError, SimilarityTestResult, TestConfig,
                         apply_censoring, estimate_censor_rate, run_similarity_test,
                         simulate_group, simulate_stats, state_test, threshold_grid)
