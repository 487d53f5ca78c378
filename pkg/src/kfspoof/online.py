"""Receding-horizon spoofing with measurements observed along the way.

The attacker keeps two filters: an exact replica of the observer's (spoofed)
filter, and a clean shadow seeded from its own guess of the observer's prior
and fed the intercepted true measurements.  Each step it solves the expected
separation problem over the next ``H + 1`` steps, using the current
shadow/replica difference as the initial bias, and injects only the first
input of that plan.
"""

import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from .design import SpoofSpec, check_lemma1, design_l1, design_l2, is_diagonal_system
from .errors import InfeasibleWindow, NoConstraints, UnreachableSeparation
from .kalman import GaussianBelief, LinearSystem, build_gain_schedule, step
from .linalg import as_vec, lp_norm
from .separation import build_coeff_table, build_constraint_matrix, build_terms

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OnlineState:
    now: int                          # step whose input is planned next (1-based)
    window: int                       # H: look-ahead beyond the current step
    observer_replica: GaussianBelief
    clean_shadow: GaussianBelief
    applied: Tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        if self.window < 0:
            raise ValueError("window must be >= 0")

    @property
    def bias(self) -> np.ndarray:
        """Current shadow-minus-replica mean difference."""
        return self.clean_shadow.mean - self.observer_replica.mean


def start(window: int, observer_prior: GaussianBelief, shadow_prior: GaussianBelief) -> OnlineState:
    return OnlineState(1, window, observer_prior, shadow_prior)


def _constraints(state: OnlineState, sys: LinearSystem, spec_window: SpoofSpec):
    L = spec_window.horizon
    spoof_sched = build_gain_schedule(sys, state.observer_replica.cov, L)
    clean_sched = build_gain_schedule(sys, state.clean_shadow.cov, L)
    terms = build_terms(sys, clean_sched, spoof_sched)
    spec = replace(spec_window, m0_bias=state.bias)
    cs = build_constraint_matrix(build_coeff_table(terms), spec)
    return spec, cs, spoof_sched


def achievable_profile(cs) -> np.ndarray:
    """Largest separation reachable at each constrained step with unbounded inputs."""
    out = np.empty(cs.k)
    for q in range(cs.k):
        out[q] = np.inf if np.any(np.abs(cs.blocks[q]) > 1e-12) else lp_norm(cs.offsets[q], 1)
    return out


def plan_step(state: OnlineState, sys: LinearSystem, spec_window: SpoofSpec,
              enum_cap: int = 8) -> np.ndarray:
    """Solve the window problem from ``state.now`` and return its first input.

    Window steps whose target exceeds what is reachable are clipped to the
    reachable value (with a warning) before giving up.
    """
    try:
        spec, cs, sched = _constraints(state, sys, spec_window)
    except NoConstraints:
        return np.zeros(sys.m)
    positive = check_lemma1(sched, sys)
    diagonal = is_diagonal_system(sys, state.observer_replica.cov)

    def solve(spec_, cs_):
        if spec_.norm_p == 1:
            return design_l1(spec_, cs_, positive, enum_cap=enum_cap)
        return design_l2(spec_, cs_, diagonal, positive, enum_cap=enum_cap)

    try:
        plan = solve(spec, cs)
    except UnreachableSeparation:
        reach = achievable_profile(cs)
        clipped = np.minimum(cs.d, reach)
        log.warning("step %d: clipping window targets %s to reachable %s",
                    state.now, cs.d, clipped)
        try:
            plan = solve(spec, replace(cs, d=clipped))
        except UnreachableSeparation as exc:
            raise InfeasibleWindow(f"window at step {state.now} is infeasible",
                                   achievable=reach) from exc
    return plan.epsilons[0].copy()


def window_spec(spec: SpoofSpec, state: OnlineState) -> SpoofSpec:
    return spec.window(state.now, state.window + 1)


def ingest(state: OnlineState, sys: LinearSystem, u, z_clean, eps_applied,
           gains=None) -> OnlineState:
    """Advance both filters by one step.

    ``gains`` may supply ``(replica_gain, shadow_gain)``; by default each
    filter uses the optimal gain for its own predicted covariance.
    """
    z_clean = as_vec(z_clean)
    eps_applied = as_vec(eps_applied)
    k_rep, k_sh = gains if gains is not None else (None, None)
    _, replica = step(sys, state.observer_replica, u, z_clean + eps_applied, k_rep)
    _, shadow = step(sys, state.clean_shadow, u, z_clean, k_sh)
    return OnlineState(state.now + 1, state.window, replica, shadow,
                       state.applied + (eps_applied.copy(),))
