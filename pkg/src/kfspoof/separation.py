"""Closed-form separation between the clean and the spoofed filter means.

For a clean filter fed ``z`` and a spoofed filter fed ``z + eps``, the mean
difference obeys the exact recursion::

    m_t - mt_t = A_t (m_{t-1} - mt_{t-1}) + B_t + C_t
    A_t = F - Kt_t H F
    B_t = (K_t - Kt_t) [z_t - H (F m_{t-1} + G u_{t-1})]
    C_t = -Kt_t eps_t

where ``K`` are the clean gains and ``Kt`` the spoofed-filter gains.  Unrolled,
``eps_i`` enters ``m_t - mt_t`` through ``phi(t, i) = A_t ... A_{i+1} (-Kt_i)``.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, NoConstraints
from .kalman import GainSchedule, LinearSystem
from .linalg import as_vec


@dataclass(frozen=True)
class SeparationTerms:
    a_mats: List[np.ndarray]
    c_gain: List[np.ndarray]
    b_vecs: Optional[List[np.ndarray]] = None
    gains_differ: bool = False

    @property
    def horizon(self) -> int:
        return len(self.a_mats)


def build_terms(sys: LinearSystem, clean_sched: GainSchedule, spoof_sched: GainSchedule,
                clean_measurements: Optional[Sequence] = None,
                clean_means: Optional[Sequence] = None,
                controls: Optional[Sequence] = None) -> SeparationTerms:
    """Assemble ``A_t``, ``Kt_t`` and (optionally) the realized ``B_t``.

    ``clean_means[t-1]`` must be the clean posterior mean at step ``t - 1``
    (so ``clean_means[0]`` is ``m_0``) and ``controls[t-1]`` the control used
    to predict step ``t``.
    """
    if clean_sched.horizon != spoof_sched.horizon:
        raise DimensionError("clean and spoofed schedules cover different horizons")
    supplied = [x is not None for x in (clean_measurements, clean_means, controls)]
    if any(supplied) and not all(supplied):
        raise ValueError("B terms need measurements, clean means and controls together")

    T = spoof_sched.horizon
    a_mats = [sys.F - k @ sys.H @ sys.F for k in spoof_sched.gains]
    c_gain = list(spoof_sched.gains)
    differ = any(not np.array_equal(k, kt)
                 for k, kt in zip(clean_sched.gains, spoof_sched.gains))

    b_vecs = None
    if all(supplied):
        if not (len(clean_measurements) == len(clean_means) == len(controls) == T):
            raise DimensionError("B inputs must all have the schedule's length")
        b_vecs = []
        for t in range(T):
            k, kt = clean_sched.gains[t], spoof_sched.gains[t]
            m_prev = as_vec(clean_means[t])
            innov = as_vec(clean_measurements[t]) - sys.H @ (sys.F @ m_prev + sys.G @ as_vec(controls[t]))
            b_vecs.append((k - kt) @ innov)
    return SeparationTerms(a_mats, c_gain, b_vecs, differ)


def _unrolled(terms: SeparationTerms, init_diff, epsilons, t, b_vecs):
    if not 0 <= t <= terms.horizon:
        raise ValueError(f"step {t} outside horizon {terms.horizon}")
    if len(epsilons) < t:
        raise ValueError(f"need {t} spoofing inputs, got {len(epsilons)}")
    n = terms.a_mats[0].shape[0] if terms.a_mats else len(init_diff)
    carry = np.eye(n)  # A_t A_{t-1} ... A_{i+1}, built backwards from i = t
    total = np.zeros(n)
    for i in range(t, 0, -1):
        inject = -terms.c_gain[i - 1] @ as_vec(epsilons[i - 1])
        if b_vecs is not None:
            inject = inject + b_vecs[i - 1]
        total += carry @ inject
        carry = carry @ terms.a_mats[i - 1]
    return total + carry @ as_vec(init_diff)


def closed_form_separation(terms: SeparationTerms, init_diff, epsilons, t: int):
    """Realized ``m_t - mt_t`` from the unrolled recursion.

    When the two schedules differ the realized ``B_t`` terms are needed; they
    are treated as zero only when both filters share their gains.
    """
    if terms.b_vecs is None and terms.gains_differ:
        raise ValueError("schedules differ: realized separation needs the B terms "
                         "(use expected_separation for the expectation)")
    return _unrolled(terms, init_diff, epsilons, t, terms.b_vecs)


def expected_separation(terms: SeparationTerms, m0_bias, epsilons, t: int):
    """``E[m_t - mt_t]`` given ``E[m_0 - mt_0] = m0_bias``; the B terms have zero mean."""
    return _unrolled(terms, m0_bias, epsilons, t, None)


@dataclass(frozen=True)
class CoeffTable:
    """``phi[(t, i)]`` is the coefficient matrix of ``eps_i`` in ``m_t - mt_t``.

    ``carry[t-1] = A_t ... A_1`` multiplies the initial difference.
    """
    horizon: int
    phi: Dict[Tuple[int, int], np.ndarray]
    carry: List[np.ndarray]


def build_coeff_table(terms: SeparationTerms) -> CoeffTable:
    T = terms.horizon
    phi = {}
    carry = []
    prod = None
    for t in range(1, T + 1):
        a_t = terms.a_mats[t - 1]
        for i in range(1, t):
            phi[(t, i)] = a_t @ phi[(t - 1, i)]
        phi[(t, t)] = -terms.c_gain[t - 1]
        prod = a_t if prod is None else a_t @ prod
        carry.append(prod)
    return CoeffTable(T, phi, carry)


@dataclass(frozen=True)
class ConstraintSystem:
    """Linearized separation constraints for the nonzero desired separations.

    Variables are laid out component-major,
    ``x = [eps_1x, ..., eps_Tx, eps_1y, ..., eps_Ty]``, i.e. component ``c`` of
    ``eps_i`` sits at column ``c * T + (i - 1)``.  For the ``q``-th constraint
    (step ``times[q]``) the predicted separation is
    ``offsets[q] + blocks[q] @ x``; ``g[q]`` is the column sum of ``blocks[q]``.
    """
    horizon: int
    meas_dim: int
    times: List[int]
    d: np.ndarray
    blocks: np.ndarray   # (k, n, m*T)
    offsets: np.ndarray  # (k, n)
    g: np.ndarray        # (k, m*T)
    var_layout: str = field(default="component-major: col = c*T + (t-1)")

    @property
    def k(self) -> int:
        return len(self.times)

    def unpack(self, x) -> np.ndarray:
        """Variable vector -> (T, m) array of spoofing inputs."""
        return np.asarray(x, dtype=float).reshape(self.meas_dim, self.horizon).T.copy()

    def pack(self, eps) -> np.ndarray:
        return np.asarray(eps, dtype=float).T.reshape(-1)


def build_constraint_matrix(table: CoeffTable, spec) -> ConstraintSystem:
    """Constraint rows for every step with ``d_t > 0``.

    ``spec`` needs ``horizon``, ``d`` and ``m0_bias`` (see ``SpoofSpec``).
    """
    T = table.horizon
    if spec.horizon != T:
        raise DimensionError(f"spec horizon {spec.horizon} != table horizon {T}")
    times = [t for t in range(1, T + 1) if spec.d[t - 1] > 0]
    if not times:
        raise NoConstraints("no constraints: every desired separation is zero")
    n, m = table.phi[(1, 1)].shape
    m0 = as_vec(spec.m0_bias) if spec.m0_bias is not None else np.zeros(n)
    blocks = np.zeros((len(times), n, m * T))
    offsets = np.zeros((len(times), n))
    for q, t in enumerate(times):
        for i in range(1, t + 1):
            coef = table.phi[(t, i)]
            for c in range(m):
                blocks[q, :, c * T + i - 1] = coef[:, c]
        offsets[q] = table.carry[t - 1] @ m0
    d = np.array([spec.d[t - 1] for t in times], dtype=float)
    return ConstraintSystem(T, m, times, d, blocks, offsets, blocks.sum(axis=1))
