"""Offline design of minimum-energy spoofing sequences.

Given desired separations ``d_t``, find ``eps_1..eps_T`` minimizing
``sum_t gamma_t ||eps_t||_p^p`` subject to ``||E[m_t - mt_t]||_p >= d_t``.

* ``p = 1``: one LP when every coefficient has the same sign (the positivity
  regime), otherwise one LP per sign pattern of the constraint rows
  (``(2^n)^k`` instances, ``4^k`` for planar targets).
* ``p = 2``: for diagonal systems the squared components become the LP
  variables; otherwise the constraint is tightened to
  ``||.||_1 >= sqrt(n) d_t`` and solved as an L1 problem (feasible, not
  necessarily optimal).
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import EnumerationCapExceeded, UnreachableSeparation
from .kalman import GainSchedule, LinearSystem, build_gain_schedule
from .linalg import as_mat, as_vec, is_diagonal, lp_norm
from .lp import OPTIMAL, LpProblem, solve_lp
from .separation import (ConstraintSystem, SeparationTerms, build_coeff_table,
                         build_constraint_matrix, build_terms, expected_separation)

log = logging.getLogger(__name__)

SINGLE_LP = "single_lp"
SIGN_ENUM = "sign_enum"
QCQP_DIAG = "qcqp_diag"
L1_FALLBACK = "l1_fallback"

DEFAULT_ENUM_CAP = 8
MARGIN_TOL = 1e-6
ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class SpoofSpec:
    """Desired separation profile for steps 1..horizon.

    ``m0_bias`` is the expected initial difference ``E[m_0 - mt_0]``; leave it
    ``None`` (zero) when the attacker knows the observer's prior.
    """
    horizon: int
    d: Sequence[float]
    gamma: Optional[Sequence[float]] = None
    norm_p: int = 1
    m0_bias: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        d = np.asarray(self.d, dtype=float).reshape(-1)
        gamma = (np.ones(self.horizon) if self.gamma is None
                 else np.asarray(self.gamma, dtype=float).reshape(-1))
        if d.size != self.horizon or gamma.size != self.horizon:
            raise ValueError("d and gamma must have one entry per step")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("desired separations must be finite and >= 0")
        if np.any(gamma <= 0):
            raise ValueError("weights must be positive")
        if self.norm_p not in (1, 2):
            raise ValueError("norm_p must be 1 or 2")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "gamma", gamma)
        if self.m0_bias is not None:
            object.__setattr__(self, "m0_bias", as_vec(self.m0_bias, "m0_bias"))

    def window(self, start: int, length: int) -> "SpoofSpec":
        """Sub-profile covering steps ``start .. start + length - 1`` (1-based)."""
        stop = min(start - 1 + length, self.horizon)
        return SpoofSpec(stop - start + 1, self.d[start - 1:stop], self.gamma[start - 1:stop],
                         self.norm_p, self.m0_bias)


@dataclass(frozen=True)
class SpoofPlan:
    epsilons: np.ndarray          # (T, m)
    objective: float              # sum_t gamma_t ||eps_t||_p^p
    method: str
    lp_count: int
    times: List[int]
    achieved: np.ndarray          # predicted ||E sep||_p at each constrained step
    exact: bool = True
    notes: List[str] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.epsilons.shape[0]

    def l1_energy(self) -> float:
        return float(np.abs(self.epsilons).sum())


@dataclass(frozen=True)
class QuadraticConstraintSystem:
    """Squared-variable form of the L2 constraints for diagonal systems.

    Row ``q`` reads ``coeff_sq[q] @ s >= d[q]**2 - bias_sq[q]`` with
    ``s = eps**2`` in the constraint system's variable layout.
    """
    coeff_sq: np.ndarray
    bias_sq: np.ndarray
    d: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class PlanCheck:
    times: List[int]
    achieved: np.ndarray
    margins: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margins >= -MARGIN_TOL))


def check_lemma1(sched: GainSchedule, sys: LinearSystem) -> bool:
    """Positivity regime: ``F`` and every ``I - K_t H`` nonnegative with positive diagonal."""
    def ok(a):
        return bool(np.all(a >= 0) and np.all(np.diag(a) > 0))

    if not ok(sys.F):
        return False
    eye = np.eye(sys.n)
    return all(ok(eye - k @ sys.H) for k in sched.gains)


def is_diagonal_system(sys: LinearSystem, spoof_sigma0) -> bool:
    mats = (sys.F, sys.H, sys.R, sys.Q, as_mat(spoof_sigma0))
    return sys.n == sys.m and all(is_diagonal(a) for a in mats)


def _weights(spec: SpoofSpec, m: int) -> np.ndarray:
    # component-major layout: gamma repeats once per measurement component
    return np.tile(spec.gamma, m)


def _make_plan(spec, cs: ConstraintSystem, x, method, lp_count, exact=True, notes=None):
    eps = cs.unpack(x)
    achieved = np.array([lp_norm(cs.offsets[q] + cs.blocks[q] @ cs.pack(eps), spec.norm_p)
                         for q in range(cs.k)])
    if spec.norm_p == 1:
        per_step = np.abs(eps).sum(axis=1)
    else:
        per_step = (eps ** 2).sum(axis=1)
    objective = float(spec.gamma @ per_step)
    return SpoofPlan(eps, objective, method, lp_count, list(cs.times), achieved, exact,
                     list(notes or []))


def _single_lp(spec, cs: ConstraintSystem, sigma: float):
    a = -cs.g
    b = cs.d + sigma * cs.offsets.sum(axis=1)
    sol = solve_lp(LpProblem(_weights(spec, cs.meas_dim), a, b))
    return sol, sigma * sol.x if sol.status == OPTIMAL else None


FLAT_ENUM_MAX_K = 3


def _enumerate(spec, cs: ConstraintSystem):
    """Best plan over all sign patterns; ties keep the lexicographically first.

    Small instances solve every pattern.  Larger ones branch on the
    constraints last-to-first (late rows carry most of the cost, so partial
    relaxations bound tightly) and prune any partial pattern whose relaxed LP
    is infeasible or strictly worse than a known feasible plan.  Leaves are
    ranked by (objective, pattern order), so the result matches the flat scan.
    """
    n = cs.blocks.shape[1]
    w = _weights(spec, cs.meas_dim)
    half = w.size
    cost = np.concatenate([w, w])
    patterns = [np.array(p) for p in itertools.product((-1.0, 1.0), repeat=n)]
    count = 0

    def solve(rows_idx, signs):
        nonlocal count
        s = np.array(signs)                        # (q, n)
        rows = np.einsum("qn,qnv->qv", s, cs.blocks[rows_idx])
        rhs = cs.d[rows_idx] - np.einsum("qn,qn->q", s, cs.offsets[rows_idx])
        count += 1
        return solve_lp(LpProblem(cost, np.hstack([rows, -rows]), rhs))

    def tol(v):
        return 1e-12 * max(1.0, abs(v))

    best_key, best_obj, best_x = None, np.inf, None

    def leaf(key, sol):
        nonlocal best_key, best_obj, best_x
        if sol.status != OPTIMAL:
            return
        obj = sol.objective
        better = best_x is None or obj < best_obj - tol(best_obj)
        tie = best_x is not None and abs(obj - best_obj) <= tol(best_obj) and key < best_key
        if better or tie:
            best_key, best_obj, best_x = key, obj, sol.x[:half] - sol.x[half:]

    if cs.k <= FLAT_ENUM_MAX_K:
        idx = np.arange(cs.k)
        for key in itertools.product(range(len(patterns)), repeat=cs.k):
            leaf(key, solve(idx, [patterns[j] for j in key]))
        return best_x, count

    bound = np.inf
    for sigma in (1.0, -1.0):
        sol, x = _single_lp(spec, cs, sigma)
        count += 1
        if x is not None:
            bound = min(bound, float(_weights(spec, cs.meas_dim) @ np.abs(x)))
    order = list(range(cs.k - 1, -1, -1))

    def visit(depth, chosen):
        nonlocal bound
        rows_idx = order[:depth + 1]
        for j, p in enumerate(patterns):
            cur = chosen + [j]
            sol = solve(rows_idx, [patterns[c] for c in cur])
            if sol.status != OPTIMAL or sol.objective > bound + tol(bound):
                continue
            if depth + 1 < cs.k:
                visit(depth + 1, cur)
            else:
                key = tuple(reversed(cur))
                leaf(key, sol)
                bound = min(bound, sol.objective)

    visit(0, [])
    return best_x, count


def design_l1(spec: SpoofSpec, cs: ConstraintSystem, positive: bool,
              force_enumeration: bool = False, enum_cap: int = DEFAULT_ENUM_CAP) -> SpoofPlan:
    """Minimum weighted-L1 plan for the constraint rows in ``cs``.

    In the positivity regime all coefficients share a sign, so the optimum
    lies in a single orthant and one LP suffices.  A nonzero initial bias whose
    components disagree in sign breaks that argument; such instances go to
    sign enumeration when ``k <= enum_cap`` and otherwise keep the orthant
    restriction (feasible but flagged inexact).
    """
    same_sign = bool(np.all(cs.blocks <= 1e-15))
    if positive and same_sign and not force_enumeration:
        sigma = 1.0 if cs.offsets.sum() <= 0 else -1.0
        # rounding leaves decayed bias components at +-1e-17 or so
        slack = ALIGN_TOL * max(1.0, float(np.abs(cs.offsets).max(initial=0.0)))
        aligned = bool(np.all(sigma * cs.offsets <= slack))
        if aligned or cs.k > enum_cap:
            sigmas = [sigma] if aligned else [1.0, -1.0]
            results = [_single_lp(spec, cs, s) for s in sigmas]
            feasible = [(sol.objective, x) for sol, x in results if x is not None]
            if not feasible:
                raise UnreachableSeparation("unreachable separation profile")
            _, x = min(feasible, key=lambda item: item[0])
            notes = [] if aligned else ["initial bias not orthant-aligned; orthant restriction used"]
            return _make_plan(spec, cs, x, SINGLE_LP, len(sigmas), exact=aligned, notes=notes)

    if cs.k > enum_cap:
        raise EnumerationCapExceeded(
            f"{cs.k} constraints need {4 ** cs.k} LPs (cap k <= {enum_cap}); "
            "merge or drop constraint steps, or raise enum_cap")
    x, count = _enumerate(spec, cs)
    if x is None:
        raise UnreachableSeparation("unreachable separation profile: every sign pattern is infeasible")
    return _make_plan(spec, cs, x, SIGN_ENUM, count)


def build_quadratic_system(spec: SpoofSpec, cs: ConstraintSystem) -> QuadraticConstraintSystem:
    k, n, nvar = cs.blocks.shape
    T = cs.horizon
    comp = np.arange(nvar) // T
    diag = cs.blocks[:, comp, np.arange(nvar)]          # (k, nvar)
    off = cs.blocks.copy()
    off[:, comp, np.arange(nvar)] = 0.0
    if np.any(np.abs(off) > 1e-12):
        raise ValueError("constraint coefficients are not diagonal")
    return QuadraticConstraintSystem(diag ** 2, (cs.offsets ** 2).sum(axis=1), cs.d,
                                     _weights(spec, cs.meas_dim))


def design_l2(spec: SpoofSpec, cs: ConstraintSystem, diagonal: bool, positive: bool,
              enum_cap: int = DEFAULT_ENUM_CAP) -> SpoofPlan:
    """Minimum weighted squared-L2 plan.

    The diagonal path drops the cross terms of ``||sum_i c_i eps_i||^2``;
    with all contributions pushed into one orthant those terms are
    nonnegative, so the recovered plan stays feasible.  If it is not (mixed
    coefficient signs), the L1 tightening is used instead.
    """
    if diagonal:
        qcs = build_quadratic_system(spec, cs)
        sol = solve_lp(LpProblem(qcs.weights, qcs.coeff_sq, qcs.d ** 2 - qcs.bias_sq))
        if sol.status == OPTIMAL:
            sigma = 1.0
            if positive and cs.offsets.sum() > 0:
                sigma = -1.0
            x = sigma * np.sqrt(np.clip(sol.x, 0.0, None))
            plan = _make_plan(spec, cs, x, QCQP_DIAG, 1)
            if np.all(plan.achieved - cs.d >= -MARGIN_TOL):
                return plan
            log.warning("diagonal L2 plan misses its targets (mixed coefficient signs); "
                        "falling back to the L1 tightening")

    n = cs.blocks.shape[1]
    tight = replace(cs, d=cs.d * np.sqrt(n))
    l1 = design_l1(replace(spec, norm_p=1, d=spec.d * np.sqrt(n)), tight, positive,
                   enum_cap=enum_cap)
    return _make_plan(spec, cs, cs.pack(l1.epsilons), L1_FALLBACK, l1.lp_count, exact=False,
                      notes=["L2 constraint tightened to L1; solution is suboptimal"])


@dataclass(frozen=True)
class DesignContext:
    """Everything the designer derived on the way to a plan."""
    spoof_sched: GainSchedule
    clean_sched: GainSchedule
    terms: SeparationTerms
    constraints: ConstraintSystem
    positive: bool
    diagonal: bool


def prepare(sys: LinearSystem, spec: SpoofSpec, spoof_sigma0, clean_sigma0=None) -> DesignContext:
    spoof_sched = build_gain_schedule(sys, spoof_sigma0, spec.horizon)
    clean_sched = (spoof_sched if clean_sigma0 is None
                   else build_gain_schedule(sys, clean_sigma0, spec.horizon))
    terms = build_terms(sys, clean_sched, spoof_sched)
    cs = build_constraint_matrix(build_coeff_table(terms), spec)
    return DesignContext(spoof_sched, clean_sched, terms, cs,
                         check_lemma1(spoof_sched, sys), is_diagonal_system(sys, spoof_sigma0))


def design_offline(sys: LinearSystem, spec: SpoofSpec, spoof_sigma0, clean_sigma0=None, *,
                   force_enumeration: bool = False, enum_cap: int = DEFAULT_ENUM_CAP) -> SpoofPlan:
    """Design a plan for the spoofed filter started from ``spoof_sigma0``.

    ``clean_sigma0`` only matters for realized (not expected) separations and
    may be omitted.
    """
    ctx = prepare(sys, spec, spoof_sigma0, clean_sigma0)
    if spec.norm_p == 1:
        return design_l1(spec, ctx.constraints, ctx.positive, force_enumeration, enum_cap)
    return design_l2(spec, ctx.constraints, ctx.diagonal, ctx.positive, enum_cap)


def verify_plan(plan: SpoofPlan, spec: SpoofSpec, terms: SeparationTerms) -> PlanCheck:
    """Recompute expected separations of ``plan`` and compare with ``spec.d``."""
    if plan.horizon != spec.horizon:
        raise ValueError("plan and spec horizons differ")
    n = terms.a_mats[0].shape[0]
    m0 = np.zeros(n) if spec.m0_bias is None else spec.m0_bias
    times = [t for t in range(1, spec.horizon + 1) if spec.d[t - 1] > 0]
    achieved = np.array([lp_norm(expected_separation(terms, m0, plan.epsilons, t), spec.norm_p)
                         for t in times])
    margins = achieved - np.array([spec.d[t - 1] for t in times])
    return PlanCheck(times, achieved, margins)
