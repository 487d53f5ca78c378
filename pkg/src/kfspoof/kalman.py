"""Linear-Gaussian model and the discrete Kalman filter.

Noise naming follows the attack literature this package targets: ``R`` is the
*process* noise covariance and ``Q`` the *measurement* noise covariance::

    x[t+1] = F x[t] + G u[t] + w[t],   w ~ N(0, R)
    z[t]   = H x[t] + v[t],            v ~ N(0, Q)
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import DimensionError, SingularMatrixError
from .linalg import as_mat, as_vec, mat_inv, symmetrize


@dataclass(frozen=True)
class LinearSystem:
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    R: np.ndarray  # process noise
    Q: np.ndarray  # measurement noise

    def __post_init__(self):
        F = as_mat(self.F, "F")
        G = as_mat(self.G, "G")
        H = as_mat(self.H, "H")
        R = as_mat(self.R, "R")
        Q = as_mat(self.Q, "Q")
        n = F.shape[0]
        if F.shape != (n, n):
            raise DimensionError(f"F must be square, got {F.shape}")
        if G.shape[0] != n:
            raise DimensionError(f"G has {G.shape[0]} rows, state dim is {n}")
        if H.shape[1] != n:
            raise DimensionError(f"H has {H.shape[1]} cols, state dim is {n}")
        m = H.shape[0]
        if R.shape != (n, n) or Q.shape != (m, m):
            raise DimensionError("noise covariances do not match the state/measurement dims")
        if not (np.allclose(R, R.T) and np.allclose(Q, Q.T)):
            raise ValueError("noise covariances must be symmetric")
        for name, value in zip("FGHRQ", (F, G, H, R, Q)):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def m(self) -> int:
        return self.H.shape[0]

    def with_noise(self, R=None, Q=None) -> "LinearSystem":
        return LinearSystem(self.F, self.G, self.H,
                            self.R if R is None else R,
                            self.Q if Q is None else Q)


def reference_model() -> LinearSystem:
    """Planar drifting target (F = G = H = I, R = Q = 0.5 I) of the reference experiments."""
    eye = np.eye(2)
    return LinearSystem(F=eye, G=eye, H=eye, R=0.5 * eye, Q=0.5 * eye)


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = as_vec(self.mean, "mean")
        cov = as_mat(self.cov, "cov")
        if cov.shape != (mean.size, mean.size):
            raise DimensionError(f"cov {cov.shape} does not match mean dim {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class GainSchedule:
    """Gains and covariances for steps 1..T, fixed by the initial covariance.

    Index ``t - 1`` holds the quantities of step ``t``.
    """
    prior_covs: List[np.ndarray]
    post_covs: List[np.ndarray]
    gains: List[np.ndarray]

    @property
    def horizon(self) -> int:
        return len(self.gains)


def innovation_cov(sys: LinearSystem, prior_cov):
    return sys.H @ prior_cov @ sys.H.T + sys.Q


def innovation_inv(sys: LinearSystem, prior_cov):
    """Inverse of the innovation covariance.

    A singular one only arises with noise-free measurements of an exactly
    known state; the pseudo-inverse is then the ``Q -> 0`` limit of the gain.
    """
    s = innovation_cov(sys, prior_cov)
    try:
        return mat_inv(s)
    except SingularMatrixError:
        return np.linalg.pinv(s)


def kalman_gain(sys: LinearSystem, prior_cov):
    return prior_cov @ sys.H.T @ innovation_inv(sys, prior_cov)


def build_gain_schedule(sys: LinearSystem, sigma0, horizon: int) -> GainSchedule:
    """Run the Riccati recursion for ``horizon`` steps from ``sigma0``."""
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    cov = symmetrize(as_mat(sigma0, "sigma0"))
    eye = np.eye(sys.n)
    priors, posts, gains = [], [], []
    for _ in range(horizon):
        prior = symmetrize(sys.F @ cov @ sys.F.T + sys.R)
        gain = kalman_gain(sys, prior)
        cov = symmetrize((eye - gain @ sys.H) @ prior)
        priors.append(prior)
        posts.append(cov)
        gains.append(gain)
    return GainSchedule(priors, posts, gains)


def predict(sys: LinearSystem, belief: GaussianBelief, u) -> GaussianBelief:
    u = as_vec(u, "u")
    if u.size != sys.G.shape[1]:
        raise DimensionError(f"control has dim {u.size}, G expects {sys.G.shape[1]}")
    mean = sys.F @ belief.mean + sys.G @ u
    cov = symmetrize(sys.F @ belief.cov @ sys.F.T + sys.R)
    return GaussianBelief(mean, cov)


def update(sys: LinearSystem, belief: GaussianBelief, z, gain) -> GaussianBelief:
    z = as_vec(z, "z")
    gain = as_mat(gain, "gain")
    if gain.shape != (sys.n, sys.m) or z.size != sys.m:
        raise DimensionError("gain or measurement does not match the system")
    mean = belief.mean + gain @ (z - sys.H @ belief.mean)
    cov = symmetrize((np.eye(sys.n) - gain @ sys.H) @ belief.cov)
    return GaussianBelief(mean, cov)


def step(sys: LinearSystem, belief: GaussianBelief, u, z,
         gain: Optional[np.ndarray] = None):
    """One predict/update cycle; returns ``(prior, posterior)``.

    Without an explicit ``gain`` the optimal gain for the predicted covariance
    is used.
    """
    prior = predict(sys, belief, u)
    if gain is None:
        gain = kalman_gain(sys, prior.cov)
    return prior, update(sys, prior, z, gain)


def run_filter(sys: LinearSystem, belief0: GaussianBelief, gains: GainSchedule,
               controls: Sequence, measurements: Sequence) -> List[GaussianBelief]:
    """Filter a measurement sequence; ``out[t]`` is the posterior of step ``t + 1``."""
    if len(controls) != len(measurements):
        raise DimensionError("controls and measurements differ in length")
    if len(measurements) > gains.horizon:
        raise DimensionError("more measurements than the gain schedule covers")
    belief = belief0
    out = []
    for t, (u, z) in enumerate(zip(controls, measurements)):
        _, belief = step(sys, belief, u, z, gains.gains[t])
        out.append(belief)
    return out
