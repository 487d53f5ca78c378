"""Chi-square failure detector on the observer's filter residual.

Two statistics are available:

``literal``
    ``g = r' Sigma_post r`` with the posterior residual ``r = z - H m_post``,
    weighting by the posterior covariance itself.
``normalized_innovation``
    ``g = nu' S^-1 nu`` with the innovation ``nu = z - H m_prior`` and
    ``S = H Sigma_prior H' + Q``; chi-square with ``m`` degrees of freedom
    when the filter is consistent.

Because the two differ in scale, thresholds are calibrated to a target
false-alarm rate on un-attacked runs rather than fixed by hand.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CalibrationError
from .kalman import GaussianBelief, LinearSystem, innovation_cov
from .linalg import as_vec, mat_inv

LITERAL = "literal"
NORMALIZED = "normalized_innovation"

# false-alarm rate of the reference detector settings
REFERENCE_FALSE_ALARM = 0.11054


@dataclass(frozen=True)
class DetectorConfig:
    threshold: Optional[float] = None
    statistic_form: str = NORMALIZED
    target_false_alarm: float = REFERENCE_FALSE_ALARM

    def __post_init__(self):
        if self.statistic_form not in (LITERAL, NORMALIZED):
            raise ValueError(f"unknown statistic form {self.statistic_form!r}")
        if self.threshold is not None and self.threshold < 0:
            raise ValueError("threshold must be >= 0")
        if not 0 < self.target_false_alarm < 1:
            raise ValueError("target_false_alarm must lie in (0, 1)")

    def with_threshold(self, threshold: float) -> "DetectorConfig":
        return DetectorConfig(float(threshold), self.statistic_form, self.target_false_alarm)


@dataclass(frozen=True)
class DetectorTrace:
    g: np.ndarray
    alarms: np.ndarray


@dataclass(frozen=True)
class TrialReport:
    trials: int
    detections: int
    rate: float
    p_value: float
    null_rate: float

    def __str__(self):
        return (f"detected {self.detections}/{self.trials} (rate {self.rate:.4f}), "
                f"null rate {self.null_rate:.5f}, p-value {self.p_value:.5g}")


def statistic(cfg: DetectorConfig, sys: LinearSystem, prior_belief: GaussianBelief,
              post_belief: GaussianBelief, z) -> float:
    z = as_vec(z)
    if cfg.statistic_form == LITERAL:
        r = z - sys.H @ post_belief.mean
        return float(r @ post_belief.cov @ r)
    nu = z - sys.H @ prior_belief.mean
    return float(nu @ mat_inv(innovation_cov(sys, prior_belief.cov)) @ nu)


def trace(cfg: DetectorConfig, g) -> DetectorTrace:
    g = np.asarray(g, dtype=float)
    if cfg.threshold is None:
        raise ValueError("detector threshold is not set")
    return DetectorTrace(g, g > cfg.threshold)


def binom_pvalue(x: int, n: int, p0: float) -> float:
    """Exact upper tail ``P(X >= x)`` for ``X ~ Binomial(n, p0)``.

    Summed in log space with log-gamma coefficients, so tails far below the
    double-precision underflow of naive products (down to ~1e-300) survive.
    """
    if not 0 <= x <= n:
        raise ValueError("need 0 <= x <= n")
    if not 0 < p0 < 1:
        raise ValueError("need 0 < p0 < 1")
    if x == 0:
        return 1.0
    lp, lq = math.log(p0), math.log1p(-p0)
    lgn = math.lgamma(n + 1)
    terms = [lgn - math.lgamma(k + 1) - math.lgamma(n - k + 1) + k * lp + (n - k) * lq
             for k in range(x, n + 1)]
    top = max(terms)
    total = top + math.log(math.fsum(math.exp(t - top) for t in terms))
    return min(1.0, math.exp(total))


@dataclass(frozen=True)
class Calibration:
    threshold: float
    thresholds: np.ndarray
    rate_mean: np.ndarray
    rate_min: np.ndarray
    rate_max: np.ndarray
    basis: str
    window: Sequence[int]

    def rate_at(self, threshold: float) -> float:
        i = int(np.searchsorted(self.thresholds, threshold))
        return float(self.rate_mean[min(i, len(self.thresholds) - 1)])

    @property
    def false_alarm(self) -> float:
        """Mean calibrated false-alarm rate at the chosen threshold."""
        return self.rate_at(self.threshold)


def _window_idx(window, steps):
    if window is None:
        return np.arange(steps)
    idx = np.asarray(window, dtype=int) - 1
    if idx.size == 0 or idx.min() < 0 or idx.max() >= steps:
        raise ValueError(f"window {window} outside 1..{steps}")
    return idx


def alarm_curve(g, thresholds, n_sims: int, basis: str = "trial"):
    """Alarm rate per simulation for every threshold.

    ``g`` is ``(n_sims * trials_per_sim, steps)`` already restricted to the
    alarm window.  ``basis="trial"`` counts a trial once if any step alarms;
    ``"step"`` counts individual steps.
    """
    g = np.asarray(g, dtype=float)
    per_sim = g.reshape(n_sims, -1, g.shape[-1])
    if basis == "trial":
        scores = per_sim.max(axis=2)                  # (sims, trials)
    elif basis == "step":
        scores = per_sim.reshape(n_sims, -1)
    else:
        raise ValueError("basis must be 'trial' or 'step'")
    scores = np.sort(scores, axis=1)
    total = scores.shape[1]
    # count of scores strictly above each threshold
    above = total - np.stack([np.searchsorted(row, thresholds, side="right") for row in scores])
    return above / total


def null_statistics(cfg: DetectorConfig, scn, n_trials: int, seed: int, window=None):
    from .sim import simulate_batch, trial_seeds
    res = simulate_batch(scn, trial_seeds(seed, n_trials))
    return res.g(cfg.statistic_form)[:, _window_idx(window, scn.steps)]


def calibrate_threshold(cfg: DetectorConfig, scn, n_sims: int = 100, trials_per_sim: int = 1000,
                        seed: int = 0, window=None, grid=None, basis: str = "trial") -> Calibration:
    """Smallest grid threshold whose mean false-alarm rate is <= the target.

    Runs ``n_sims`` simulations of ``trials_per_sim`` un-attacked trials each
    and reports mean/min/max alarm rates across simulations for every grid
    threshold.  ``window`` (1-based steps) restricts which steps may alarm.
    """
    g = null_statistics(cfg, scn, n_sims * trials_per_sim, seed, window)
    if grid is None:
        grid = np.linspace(0.0, float(g.max()) * 1.01, 4001)
    grid = np.asarray(grid, dtype=float)
    rates = alarm_curve(g, grid, n_sims, basis)
    mean = rates.mean(axis=0)
    ok = np.flatnonzero(mean <= cfg.target_false_alarm)
    curve = (grid, mean, rates.min(axis=0), rates.max(axis=0))
    if ok.size == 0:
        raise CalibrationError(f"target false-alarm rate {cfg.target_false_alarm} "
                               "not reached on the threshold grid", curve=curve)
    win = list(range(1, scn.steps + 1)) if window is None else list(window)
    return Calibration(float(grid[ok[0]]), *curve, basis=basis, window=win)


def attack_window(plan, steps: int) -> list:
    """Steps from the first nonzero spoofing input through ``steps``."""
    eps = np.asarray(plan.epsilons if hasattr(plan, "epsilons") else plan)[:steps]
    active = np.flatnonzero(np.abs(eps).sum(axis=1) > 0)
    first = int(active[0]) + 1 if active.size else 1
    return list(range(first, steps + 1))


def detection_experiment(cfg: DetectorConfig, scn, plan, n_trials: int = 1000, seed: int = 0,
                         window=None, p0: Optional[float] = None,
                         null_trials: int = 10000) -> TrialReport:
    """Fraction of attacked trials with an alarm inside the attack window.

    ``p0`` is the per-trial false-alarm rate on matched un-attacked runs
    (same scenario and window); when omitted it is measured on
    ``null_trials`` fresh runs.
    """
    from .sim import mix_seed, simulate_batch, trial_seeds
    if cfg.threshold is None:
        raise ValueError("calibrate the detector threshold first")
    if window is None:
        window = attack_window(plan, scn.steps)
    idx = _window_idx(window, scn.steps)
    res = simulate_batch(scn, trial_seeds(seed, n_trials), plan)
    hits = int((res.g(cfg.statistic_form)[:, idx] > cfg.threshold).any(axis=1).sum())
    if p0 is None:
        g0 = null_statistics(cfg, scn, null_trials, mix_seed(seed, n_trials), window)
        p0 = float((g0 > cfg.threshold).any(axis=1).mean())
    p0_clamped = min(max(p0, 1e-12), 1 - 1e-12)
    return TrialReport(n_trials, hits, hits / n_trials, binom_pvalue(hits, n_trials, p0_clamped), p0)
