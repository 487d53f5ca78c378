"""Experiment configuration in sectioned ``key = value`` (INI) form.

Vectors are whitespace-separated numbers, matrices are rows separated by
``;``.  Separation profiles are sparse ``t:value`` lists (1-based ``t``);
unlisted steps are zero.  Floats are written with ``repr`` so a dump/load
cycle is lossless.  Unknown sections or keys are rejected.
"""

import configparser
from dataclasses import dataclass, fields, replace
from typing import Optional, Tuple

import numpy as np

from .design import SpoofSpec
from .detector import NORMALIZED, REFERENCE_FALSE_ALARM, DetectorConfig
from .kalman import GaussianBelief, LinearSystem


class ConfigError(ValueError):
    pass


Vec = Tuple[float, ...]
MatT = Tuple[Vec, ...]


def _eye(n=2, s=1.0) -> MatT:
    return tuple(tuple(s if i == j else 0.0 for j in range(n)) for i in range(n))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str = "custom"
    out_dir: str = "out"
    seed: int = 0
    trials: int = 1
    # system
    F: MatT = _eye()
    G: MatT = _eye()
    H: MatT = _eye()
    R: MatT = _eye(s=0.5)
    Q: MatT = _eye(s=0.5)
    u: Vec = (1.0, 1.0)
    # observer's clean prior; mean_cov redraws m_0 per trial
    clean_mean: Vec = (0.0, 0.0)
    clean_cov: MatT = _eye()
    clean_mean_cov: Optional[MatT] = None
    # attacker's start for the spoofed filter and its guess of the clean one
    attacker_mean: Vec = (0.0, 0.0)
    attacker_cov: MatT = _eye()
    guess_mean: Optional[Vec] = None
    guess_cov: Optional[MatT] = None
    # design
    horizon: int = 20
    d: Vec = (0.0,) * 20
    gamma: Optional[Vec] = None
    norm_p: int = 1
    m0_bias: Optional[Vec] = None
    window: Optional[int] = None
    enum_cap: int = 8
    # simulation
    steps: int = 20
    x0: Optional[Vec] = None
    # detector
    statistic_form: str = NORMALIZED
    threshold: Optional[float] = None
    target_false_alarm: float = REFERENCE_FALSE_ALARM
    n_sims: int = 100
    trials_per_sim: int = 1000
    basis: str = "trial"
    detect_trials: int = 1000

    def system(self) -> LinearSystem:
        return LinearSystem(np.array(self.F), np.array(self.G), np.array(self.H),
                            np.array(self.R), np.array(self.Q))

    def spec(self) -> SpoofSpec:
        return SpoofSpec(self.horizon, self.d, self.gamma, self.norm_p, self.m0_bias)

    def clean_prior(self) -> GaussianBelief:
        return GaussianBelief(np.array(self.clean_mean), np.array(self.clean_cov))

    def attacker_prior(self) -> GaussianBelief:
        return GaussianBelief(np.array(self.attacker_mean), np.array(self.attacker_cov))

    def attacker_guess(self) -> Optional[GaussianBelief]:
        if self.guess_mean is None and self.guess_cov is None:
            return None
        mean = self.clean_mean if self.guess_mean is None else self.guess_mean
        cov = self.attacker_cov if self.guess_cov is None else self.guess_cov
        return GaussianBelief(np.array(mean), np.array(cov))

    def scenario(self, seed: Optional[int] = None):
        from .sim import Scenario
        return Scenario(self.system(), np.array(self.u), self.steps, self.clean_prior(),
                        self.attacker_prior(), self.attacker_guess(),
                        None if self.x0 is None else np.array(self.x0),
                        None if self.clean_mean_cov is None else np.array(self.clean_mean_cov),
                        self.seed if seed is None else seed)

    def detector(self) -> DetectorConfig:
        return DetectorConfig(self.threshold, self.statistic_form, self.target_false_alarm)

    def with_profile(self, d, horizon: Optional[int] = None) -> "ExperimentConfig":
        d = tuple(float(v) for v in d)
        return replace(self, d=d, horizon=len(d) if horizon is None else horizon)


# (section, key, field, kind)
SCHEMA = (
    ("experiment", "id", "experiment_id", "str"),
    ("experiment", "out_dir", "out_dir", "str"),
    ("experiment", "seed", "seed", "int"),
    ("experiment", "trials", "trials", "int"),
    ("system", "F", "F", "mat"),
    ("system", "G", "G", "mat"),
    ("system", "H", "H", "mat"),
    ("system", "R", "R", "mat"),
    ("system", "Q", "Q", "mat"),
    ("system", "u", "u", "vec"),
    ("clean_prior", "mean", "clean_mean", "vec"),
    ("clean_prior", "cov", "clean_cov", "mat"),
    ("clean_prior", "mean_cov", "clean_mean_cov", "mat?"),
    ("attacker_prior", "mean", "attacker_mean", "vec"),
    ("attacker_prior", "cov", "attacker_cov", "mat"),
    ("attacker_guess", "mean", "guess_mean", "vec?"),
    ("attacker_guess", "cov", "guess_cov", "mat?"),
    ("spec", "horizon", "horizon", "int"),
    ("spec", "d", "d", "profile"),
    ("spec", "gamma", "gamma", "vec?"),
    ("spec", "norm_p", "norm_p", "int"),
    ("spec", "m0_bias", "m0_bias", "vec?"),
    ("spec", "window", "window", "int?"),
    ("spec", "enum_cap", "enum_cap", "int"),
    ("simulation", "steps", "steps", "int"),
    ("simulation", "x0", "x0", "vec?"),
    ("detector", "statistic_form", "statistic_form", "str"),
    ("detector", "threshold", "threshold", "float?"),
    ("detector", "target_false_alarm", "target_false_alarm", "float"),
    ("detector", "n_sims", "n_sims", "int"),
    ("detector", "trials_per_sim", "trials_per_sim", "int"),
    ("detector", "basis", "basis", "str"),
    ("detector", "detect_trials", "detect_trials", "int"),
)

_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}
assert {row[2] for row in SCHEMA} == _FIELD_NAMES


def _fmt_float(v: float) -> str:
    return repr(float(v))


def _fmt(kind: str, value) -> Optional[str]:
    base = kind.rstrip("?")
    if value is None:
        return None
    if base in ("str", "int"):
        return str(value)
    if base == "float":
        return _fmt_float(value)
    if base == "vec":
        return " ".join(_fmt_float(v) for v in value)
    if base == "mat":
        return "; ".join(" ".join(_fmt_float(v) for v in row) for row in value)
    if base == "profile":
        items = [f"{t}:{_fmt_float(v)}" for t, v in enumerate(value, start=1) if v != 0.0]
        return ", ".join(items)
    raise AssertionError(kind)


def _parse_floats(text: str, what: str) -> Vec:
    try:
        return tuple(float(tok) for tok in text.split())
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _parse(kind: str, text: str, what: str):
    base = kind.rstrip("?")
    text = text.strip()
    if kind.endswith("?") and text.lower() in ("", "none"):
        return None
    try:
        if base == "str":
            return text
        if base == "int":
            return int(text)
        if base == "float":
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None
    if base == "vec":
        return _parse_floats(text, what)
    if base == "mat":
        rows = tuple(_parse_floats(r, what) for r in text.split(";") if r.strip())
        if not rows or len({len(r) for r in rows}) != 1:
            raise ConfigError(f"{what}: ragged or empty matrix")
        return rows
    if base == "profile":
        out = {}
        for item in filter(None, (s.strip() for s in text.replace(",", " ").split())):
            t, sep, v = item.partition(":")
            if not sep:
                raise ConfigError(f"{what}: expected t:value, got {item!r}")
            try:
                out[int(t)] = float(v)
            except ValueError as exc:
                raise ConfigError(f"{what}: {exc}") from None
        return out
    raise AssertionError(kind)


def dumps(cfg: ExperimentConfig) -> str:
    lines, section = [], None
    for sec, key, name, kind in SCHEMA:
        text = _fmt(kind, getattr(cfg, name))
        if text is None:
            continue
        if sec != section:
            if section is not None:
                lines.append("")
            lines.append(f"[{sec}]")
            section = sec
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def loads(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Parse ``text`` on top of ``base`` (defaults when omitted)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    by_key = {(sec, key): (name, kind) for sec, key, name, kind in SCHEMA}
    sections = {sec for sec, _, _, _ in SCHEMA}
    values, profile = {}, None
    for sec in parser.sections():
        if sec not in sections:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in parser.items(sec):
            if (sec, key) not in by_key:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            name, kind = by_key[(sec, key)]
            parsed = _parse(kind, raw, f"[{sec}] {key}")
            if kind == "profile":
                profile = parsed
            else:
                values[name] = parsed
    cfg = replace(base or ExperimentConfig(), **values)
    if profile is not None or "horizon" in values:
        if profile is None:
            # an inherited profile follows the new horizon
            profile = {t: v for t, v in enumerate(cfg.d, start=1)
                       if v != 0.0 and t <= cfg.horizon}
        if any(not 1 <= t <= cfg.horizon for t in profile):
            raise ConfigError(f"profile steps must lie in 1..{cfg.horizon}")
        d = [0.0] * cfg.horizon
        for t, v in profile.items():
            d[t - 1] = v
        cfg = replace(cfg, d=tuple(d))
    validate(cfg)
    return cfg


def load(path: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    with open(path) as fh:
        return loads(fh.read(), base)


def save(cfg: ExperimentConfig, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(cfg))


def validate(cfg: ExperimentConfig) -> None:
    """Raise ConfigError if the config cannot build a system, spec and scenario."""
    try:
        cfg.system()
        cfg.spec()
        cfg.scenario()
        cfg.detector()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.trials < 1 or cfg.detect_trials < 1 or cfg.n_sims < 1 or cfg.trials_per_sim < 1:
        raise ConfigError("trial counts must be >= 1")
    if cfg.window is not None and cfg.window < 0:
        raise ConfigError("window must be >= 0")
    if cfg.basis not in ("trial", "step"):
        raise ConfigError("basis must be 'trial' or 'step'")
