"""Seeded ground-truth simulation of a clean and a spoofed Kalman filter.

Every trial draws from its own ``numpy`` PCG64 stream.  Monte-Carlo trial
``i`` uses seed ``mix_seed(master_seed, i)`` (a SplitMix64 finalizer), so
trials are independent of how they are batched or parallelized.

Fixed plans are simulated in vectorized batches: the gain schedules do not
depend on the data, so all trials share them.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import online
from .design import SpoofSpec
from .detector import NORMALIZED, DetectorConfig
from .kalman import GaussianBelief, LinearSystem, build_gain_schedule, innovation_inv
from .linalg import as_mat, as_vec, psd_factor

MASK64 = (1 << 64) - 1


def mix_seed(master: int, index: int) -> int:
    """SplitMix64 of ``master + (index + 1) * golden``; 64-bit avalanche."""
    z = (int(master) + 0x9E3779B97F4A7C15 * (int(index) + 1)) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class Scenario:
    """One experiment setup.

    ``clean_prior`` is the observer's clean filter start ``N(m_0, Sigma_0)``;
    with ``clean_mean_cov`` set, ``m_0`` itself is redrawn per trial around
    ``clean_prior.mean``.  ``attacker_prior`` starts the spoofed filter and
    ``attacker_guess`` seeds the online attacker's clean shadow.  ``x0=None``
    draws the true initial state from ``N(m_0, Sigma_0)``.
    """
    sys: LinearSystem
    u: np.ndarray
    steps: int
    clean_prior: GaussianBelief
    attacker_prior: GaussianBelief
    attacker_guess: Optional[GaussianBelief] = None
    x0: Optional[np.ndarray] = None
    clean_mean_cov: Optional[np.ndarray] = None
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        object.__setattr__(self, "u", as_vec(self.u, "u"))
        if self.x0 is not None:
            object.__setattr__(self, "x0", as_vec(self.x0, "x0"))
        if self.clean_mean_cov is not None:
            object.__setattr__(self, "clean_mean_cov", as_mat(self.clean_mean_cov))

    @property
    def guess(self) -> GaussianBelief:
        if self.attacker_guess is not None:
            return self.attacker_guess
        return self.clean_prior


@dataclass
class RunRecord:
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    eps: np.ndarray
    z_spoof: np.ndarray
    m: np.ndarray
    mt: np.ndarray
    sep_l1: np.ndarray
    d: np.ndarray
    g: np.ndarray
    alarm: np.ndarray
    m0: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def energy_l1(self) -> float:
        return float(np.abs(self.eps).sum())


@dataclass
class BatchResult:
    """Per-trial arrays, leading axis = trial."""
    x: np.ndarray
    z: np.ndarray
    eps: np.ndarray
    m: np.ndarray
    mt: np.ndarray
    g_norm: np.ndarray
    g_lit: np.ndarray
    m0: np.ndarray
    diff: np.ndarray           # m - mt as propagated

    @property
    def sep_l1(self) -> np.ndarray:
        return np.abs(self.diff).sum(axis=-1)

    def g(self, form: str) -> np.ndarray:
        return self.g_norm if form == NORMALIZED else self.g_lit

    def record(self, i: int, d=None, detector: Optional[DetectorConfig] = None) -> RunRecord:
        T = self.x.shape[1]
        form = detector.statistic_form if detector is not None else NORMALIZED
        g = self.g(form)[i]
        thr = detector.threshold if detector is not None else None
        alarm = g > thr if thr is not None else np.zeros(T, dtype=bool)
        d = np.zeros(T) if d is None else np.asarray(d, dtype=float)[:T]
        return RunRecord(np.arange(1, T + 1), self.x[i], self.z[i], self.eps[i],
                         self.z[i] + self.eps[i], self.m[i], self.mt[i], self.sep_l1[i],
                         d, g, alarm, self.m0[i])


def _factors(scn: Scenario):
    mean_f = None if scn.clean_mean_cov is None else psd_factor(scn.clean_mean_cov)
    return mean_f, psd_factor(scn.clean_prior.cov), psd_factor(scn.sys.R), psd_factor(scn.sys.Q)


def draw_trial(scn: Scenario, seed: int, factors=None):
    """Initial clean mean, initial state and noise sequences for one trial."""
    sys = scn.sys
    mean_f, prior_f, r_f, q_f = factors if factors is not None else _factors(scn)
    rng = np.random.Generator(np.random.PCG64(seed))
    m0 = scn.clean_prior.mean.copy()
    if mean_f is not None:
        m0 = m0 + mean_f @ rng.standard_normal(sys.n)
    if scn.x0 is None:
        x0 = m0 + prior_f @ rng.standard_normal(sys.n)
    else:
        x0 = scn.x0.copy()
    w = rng.standard_normal((scn.steps, sys.n)) @ r_f.T
    v = rng.standard_normal((scn.steps, sys.m)) @ q_f.T
    return m0, x0, w, v


class _PlanAttack:
    def __init__(self, eps, n_trials):
        self.eps = eps
        self.n = n_trials

    def epsilon(self, t):
        if self.eps is None:
            return None
        return np.broadcast_to(self.eps[t - 1], (self.n, self.eps.shape[1]))

    def observe(self, t, u, z, eps):
        pass


class _OnlineAttack:
    def __init__(self, scn: Scenario, spec: SpoofSpec, window: int, enum_cap: int):
        self.sys = scn.sys
        self.spec = spec
        self.state = online.start(window, scn.attacker_prior, scn.guess)
        self.enum_cap = enum_cap

    def epsilon(self, t):
        st = self.state
        eps = online.plan_step(st, self.sys, online.window_spec(self.spec, st), self.enum_cap)
        return eps[None, :]

    def observe(self, t, u, z, eps):
        self.state = online.ingest(self.state, self.sys, u, z[0], eps[0])


def _run(scn: Scenario, seeds: Sequence[int], attack) -> BatchResult:
    sys = scn.sys
    T, N = scn.steps, len(seeds)
    factors = _factors(scn)
    draws = [draw_trial(scn, s, factors) for s in seeds]
    m = np.stack([dr[0] for dr in draws])
    x = np.stack([dr[1] for dr in draws])
    w = np.stack([dr[2] for dr in draws])
    v = np.stack([dr[3] for dr in draws])
    m0 = m.copy()
    diff = m - scn.attacker_prior.mean          # m - mt, carried as an error state

    clean = build_gain_schedule(sys, scn.clean_prior.cov, T)
    spoof = build_gain_schedule(sys, scn.attacker_prior.cov, T)
    drift = sys.G @ scn.u

    out = {k: np.zeros((N, T, dim)) for k, dim in
           (("x", sys.n), ("z", sys.m), ("eps", sys.m), ("m", sys.n), ("mt", sys.n),
            ("diff", sys.n))}
    g_norm = np.zeros((N, T))
    g_lit = np.zeros((N, T))
    for t in range(1, T + 1):
        x = x @ sys.F.T + drift + w[:, t - 1]
        z = x @ sys.H.T + v[:, t - 1]
        eps = attack.epsilon(t)
        zt = z if eps is None else z + eps

        k, kt = clean.gains[t - 1], spoof.gains[t - 1]
        prior = m @ sys.F.T + drift
        prior_t = prior - diff @ sys.F.T
        clean_innov = z - prior @ sys.H.T
        innov = zt - prior_t @ sys.H.T
        m = prior + clean_innov @ k.T
        # same algebra as the spoofed update, but with equal gains the
        # difference picks up no rounding from the measurements
        diff = diff @ (sys.F - kt @ sys.H @ sys.F).T + clean_innov @ (k - kt).T
        if eps is not None:
            diff = diff - eps @ kt.T
        mt = m - diff

        s_inv = innovation_inv(sys, spoof.prior_covs[t - 1])
        g_norm[:, t - 1] = np.einsum("ni,ij,nj->n", innov, s_inv, innov)
        resid = zt - mt @ sys.H.T
        g_lit[:, t - 1] = np.einsum("ni,ij,nj->n", resid, spoof.post_covs[t - 1], resid)

        if eps is not None:
            attack.observe(t, scn.u, z, eps)
            out["eps"][:, t - 1] = eps
        out["x"][:, t - 1] = x
        out["z"][:, t - 1] = z
        out["m"][:, t - 1] = m
        out["mt"][:, t - 1] = mt
        out["diff"][:, t - 1] = diff
    return BatchResult(out["x"], out["z"], out["eps"], out["m"], out["mt"], g_norm, g_lit, m0,
                       out["diff"])


def _plan_eps(plan, steps):
    if plan is None:
        return None
    eps = np.asarray(plan.epsilons if hasattr(plan, "epsilons") else plan, dtype=float)
    if eps.shape[0] < steps:
        raise ValueError(f"plan covers {eps.shape[0]} steps, scenario needs {steps}")
    return eps[:steps]


def simulate_batch(scn: Scenario, seeds: Sequence[int], plan=None) -> BatchResult:
    """Run a fixed plan (or no attack) for every seed in one vectorized pass."""
    return _run(scn, list(seeds), _PlanAttack(_plan_eps(plan, scn.steps), len(seeds)))


def simulate_online(scn: Scenario, spec: SpoofSpec, window: int, enum_cap: int = 8,
                    seed: Optional[int] = None) -> BatchResult:
    seed = scn.seed if seed is None else seed
    return _run(scn, [seed], _OnlineAttack(scn, spec, window, enum_cap))


def simulate(scn: Scenario, plan=None, detector: Optional[DetectorConfig] = None,
             d=None, online_spec: Optional[SpoofSpec] = None,
             window: Optional[int] = None) -> RunRecord:
    """Simulate one trial with seed ``scn.seed``.

    Pass ``plan`` (a ``SpoofPlan`` or a ``(T, m)`` array) for an offline
    attack, or ``online_spec`` plus ``window`` for receding-horizon spoofing.
    """
    if online_spec is not None:
        if window is None:
            raise ValueError("online spoofing needs a window")
        res = simulate_online(scn, online_spec, window)
        d = online_spec.d if d is None else d
    else:
        res = simulate_batch(scn, [scn.seed], plan)
    return res.record(0, d, detector)


@dataclass
class MonteCarloSummary:
    sep_mean: np.ndarray
    sep_min: np.ndarray
    sep_max: np.ndarray
    sep: np.ndarray            # (n_trials, T)
    energy: np.ndarray         # per-trial cumulative L1 energy
    detections: Optional[int] = None
    alarms: Optional[np.ndarray] = None

    @property
    def n_trials(self) -> int:
        return self.sep.shape[0]

    @property
    def energy_mean(self) -> float:
        return float(self.energy.mean())


def trial_seeds(master_seed: int, n_trials: int) -> List[int]:
    return [mix_seed(master_seed, i) for i in range(n_trials)]


def monte_carlo(scn: Scenario, plan=None, n_trials: int = 100, master_seed: int = 0,
                detector: Optional[DetectorConfig] = None, online_spec: Optional[SpoofSpec] = None,
                window: Optional[int] = None, threads: int = 1) -> MonteCarloSummary:
    """Aggregate ``n_trials`` independent trials; results are ordered by trial index."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    seeds = trial_seeds(master_seed, n_trials)
    if online_spec is None:
        res = simulate_batch(scn, seeds, plan)
        sep, eps = res.sep_l1, res.eps
        g = res.g(detector.statistic_form) if detector is not None else None
    else:
        def one(seed):
            return simulate_online(scn, online_spec, window, seed=seed)
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                runs = list(pool.map(one, seeds))
        else:
            runs = [one(s) for s in seeds]
        sep = np.concatenate([r.sep_l1 for r in runs])
        eps = np.concatenate([r.eps for r in runs])
        g = (np.concatenate([r.g(detector.statistic_form) for r in runs])
             if detector is not None else None)
    energy = np.abs(eps).sum(axis=(1, 2))
    alarms = detections = None
    if detector is not None and detector.threshold is not None:
        alarms = g > detector.threshold
        detections = int(alarms.any(axis=1).sum())
    return MonteCarloSummary(sep.mean(axis=0), sep.min(axis=0), sep.max(axis=0), sep, energy,
                             detections, alarms)
