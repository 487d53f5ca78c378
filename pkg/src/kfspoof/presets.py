"""Named parameter sets for the reference experiments.

All presets use the planar model ``F = G = H = I``,
``u = (1, 1)``, ``R = Q = 0.5 I`` with unit weights.
"""

import math
from dataclasses import replace
from typing import Dict

from .config import ExperimentConfig, _eye


def _profile(horizon: int, values: Dict[int, float]):
    return tuple(values.get(t, 0.0) for t in range(1, horizon + 1))


_BASE = ExperimentConfig()

# attacker knows the observer's prior exactly
_KNOWN = replace(_BASE, clean_mean=(0.0, 0.0), clean_cov=_eye(),
                 attacker_mean=(0.0, 0.0), attacker_cov=_eye())

# attacker starts from N(0, 1.5 I); the observer's m_0 ~ N((1, 1), I) per axis
_UNKNOWN = replace(_BASE, clean_mean=(1.0, 1.0), clean_cov=_eye(), clean_mean_cov=_eye(),
                   attacker_mean=(0.0, 0.0), attacker_cov=_eye(s=1.5), m0_bias=(1.0, 1.0))

_RAMP = {t: 0.25 * math.sqrt(2) * t for t in range(3, 16)}


def _online(exp_id: str) -> ExperimentConfig:
    return replace(_UNKNOWN, experiment_id=exp_id, horizon=15, d=_profile(15, _RAMP),
                   steps=15, window=15, trials=100,
                   guess_mean=(1.0, 1.0), guess_cov=_eye())


def _detect(exp_id: str, horizon: int, values: Dict[int, float]) -> ExperimentConfig:
    return replace(_KNOWN, experiment_id=exp_id, horizon=horizon,
                   d=_profile(horizon, values), steps=horizon, trials=1000)


PRESETS: Dict[str, ExperimentConfig] = {
    "fig3a": replace(_KNOWN, experiment_id="fig3a", horizon=20,
                     d=_profile(20, {5: 1.77, 10: 3.54, 15: 5.30}), steps=20, trials=100),
    "fig3b": replace(_KNOWN, experiment_id="fig3b", horizon=15, d=_profile(15, _RAMP),
                     steps=15, trials=100),
    "fig4": replace(_UNKNOWN, experiment_id="fig4", horizon=6, d=_profile(6, {1: 2.0}),
                    steps=6, trials=100),
    "fig5": _online("fig5"),
    "fig6": _online("fig6"),
    # un-attacked calibration runs matching the fig8 run length
    "fig7": replace(_KNOWN, experiment_id="fig7", horizon=15, d=(0.0,) * 15, steps=15),
    "fig8": _detect("fig8", 15, {t: 0.2 * t for t in range(1, 16)}),
    "fig9": _detect("fig9", 30, {t: 0.1 * t for t in range(1, 31)}),
    "abrupt": _detect("abrupt", 5, {5: 3.0}),
}

# unknown-prior sweep of the single step-1 target
FIG4_SWEEP = (1.0, 2.0, 3.0, 4.0, 5.0)


def get(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
