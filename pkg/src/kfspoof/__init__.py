"""Minimum-energy measurement spoofing against Kalman filters.

Design spoofing sequences that force a prescribed separation between a
filter's clean and corrupted estimates, then evaluate them with seeded
Monte-Carlo runs against a chi-square residual detector.
"""

from .design import SpoofPlan, SpoofSpec, design_offline, verify_plan
from .detector import (DetectorConfig, TrialReport, binom_pvalue, calibrate_threshold,
                       detection_experiment)
from .errors import (CalibrationError, DimensionError, EnumerationCapExceeded, InfeasibleWindow,
                     KfSpoofError, LpStalled, NoConstraints, SingularMatrixError,
                     UnreachableSeparation)
from .kalman import GainSchedule, GaussianBelief, LinearSystem, build_gain_schedule, reference_model
from .separation import build_terms, closed_form_separation, expected_separation
from .sim import Scenario, monte_carlo, simulate

__all__ = [
    "CalibrationError", "DetectorConfig", "DimensionError", "EnumerationCapExceeded",
    "GainSchedule", "GaussianBelief", "InfeasibleWindow", "KfSpoofError", "LinearSystem",
    "LpStalled", "NoConstraints", "Scenario", "SingularMatrixError", "SpoofPlan", "SpoofSpec",
    "TrialReport", "UnreachableSeparation", "binom_pvalue", "build_gain_schedule", "build_terms",
    "calibrate_threshold", "closed_form_separation", "design_offline", "detection_experiment",
    "expected_separation", "monte_carlo", "reference_model", "simulate", "verify_plan",
]
