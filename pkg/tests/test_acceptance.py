"""Acceptance criteria 1-10, each at its stated tolerance."""

import time

import numpy as np
from scipy import stats

from kfspoof import detector as det
from kfspoof import presets, sim
from kfspoof.design import SIGN_ENUM, SINGLE_LP, SpoofSpec, design_offline, prepare
from kfspoof.kalman import GaussianBelief, LinearSystem, build_gain_schedule, run_filter
from kfspoof.separation import build_terms, closed_form_separation

from conftest import random_cov, random_system
from criteria import report
from paired import paired_bootstrap_upper
from test_design import grid_oracle


def offline_plan(cfg):
    return design_offline(cfg.system(), cfg.spec(), np.array(cfg.attacker_cov),
                          np.array(cfg.clean_cov))


def test_c01_closed_form_matches_dual_filter():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    T, worst = 10, 0.0
    for _ in range(200):
        sys = random_system(rng)
        s0, st0 = random_cov(rng), random_cov(rng)
        m0, mt0 = rng.standard_normal(2), rng.standard_normal(2)
        eps = rng.standard_normal((T, 2))
        u = rng.standard_normal((T, 2))
        z = 3 * rng.standard_normal((T, 2))
        clean, spoof = build_gain_schedule(sys, s0, T), build_gain_schedule(sys, st0, T)
        m = run_filter(sys, GaussianBelief(m0, s0), clean, u, z)
        mt = run_filter(sys, GaussianBelief(mt0, st0), spoof, u, z + eps)
        means = [m0] + [b.mean for b in m[:-1]]
        terms = build_terms(sys, clean, spoof, z, means, u)
        for t in range(1, T + 1):
            got = closed_form_separation(terms, m0 - mt0, eps, t)
            worst = max(worst, float(np.abs(got - (m[t - 1].mean - mt[t - 1].mean)).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10
    assert report(1, ok, f"max abs error {worst:.3g} (<= 1e-9), {elapsed:.2f} s (< 10 s)")


def test_c02_measurement_independence():
    cfg = presets.get("fig3a")
    plan = offline_plan(cfg)
    seps = [sim.simulate(cfg.scenario(seed=s), plan).sep_l1 for s in range(10)]
    identical = all(np.array_equal(seps[0], s) for s in seps)
    err = float(np.abs(seps[0][[4, 9, 14]] - [1.77, 3.54, 5.30]).max())
    ok = identical and err <= 1e-6
    assert report(2, ok, f"bitwise identical over 10 seeds: {identical}, "
                         f"max error at t=5,10,15 {err:.3g} (<= 1e-6)")


def test_c03_lp_vs_grid_oracle(model):
    t0 = time.perf_counter()
    spec = SpoofSpec(2, [0.0, 2.0])
    plan = design_offline(model, spec, np.eye(2))
    elapsed = time.perf_counter() - t0
    g = prepare(model, spec, np.eye(2)).constraints.g[0]
    oracle = grid_oracle([g[0], g[1]], 2.0)       # x-axis inputs eps_1x, eps_2x
    ok = abs(plan.objective - 3.142857) <= 1e-4 and abs(oracle - plan.objective) <= 1e-2 \
        and elapsed < 5
    assert report(3, ok, f"objective {plan.objective:.6f} (3.142857 +- 1e-4), grid oracle "
                         f"{oracle:.4f} (+- 1e-2), design {elapsed:.3f} s (< 5 s)")


def test_c04_forced_enumeration_matches_single_lp(model):
    spec = presets.get("fig3a").spec()
    single = design_offline(model, spec, np.eye(2))
    forced = design_offline(model, spec, np.eye(2), force_enumeration=True)
    gap = abs(forced.objective - single.objective)
    ok = (single.method == SINGLE_LP and forced.method == SIGN_ENUM and len(forced.times) == 3
          and gap <= 1e-8 and forced.lp_count <= 64)
    assert report(4, ok, f"k = {len(forced.times)}, objective gap {gap:.3g} (<= 1e-8), "
                         f"{forced.lp_count} LPs (<= 64)")


def test_c05_unknown_prior_sweep():
    t0 = time.perf_counter()
    base = presets.get("fig4")
    worst, parts = 0.0, []
    for d1 in presets.FIG4_SWEEP:
        cfg = base.with_profile((d1,) + base.d[1:])
        mc = sim.monte_carlo(cfg.scenario(), offline_plan(cfg), 100, master_seed=cfg.seed)
        se = mc.sep[:, 0].std(ddof=1) / np.sqrt(mc.n_trials)
        z = abs(mc.sep_mean[0] - d1) / se
        worst = max(worst, z)
        parts.append(f"{d1:g}:{mc.sep_mean[0]:.3f}")
    elapsed = time.perf_counter() - t0
    ok = worst <= 3 and elapsed < 30
    assert report(5, ok, f"means {' '.join(parts)}, worst {worst:.2f} SE (<= 3), "
                         f"{elapsed:.2f} s (< 30 s)")


def test_c06_online_energy_not_above_offline():
    cfg = presets.get("fig6")
    scn, spec = cfg.scenario(), cfg.spec()
    on = sim.monte_carlo(scn, None, 100, cfg.seed, online_spec=spec, window=cfg.window, threads=8)
    off = sim.monte_carlo(scn, offline_plan(cfg), 100, cfg.seed)
    diff = on.energy - off.energy
    upper = paired_bootstrap_upper(diff, n_boot=10000, seed=cfg.seed)
    ok = upper <= 0.0
    assert report(6, ok, f"mean energy online {on.energy_mean:.4f}, offline {off.energy_mean:.4f}; "
                         f"95% one-sided upper bound of mean(online - offline) {upper:.4g} (<= 0)")


def test_c07_exact_pvalues():
    p1 = det.binom_pvalue(267, 1000, 0.11054)
    p2 = det.binom_pvalue(118, 1000, 0.11054)
    r1, r2 = abs(p1 / 9.2133e-43 - 1), abs(p2 / 0.2393 - 1)
    ok = r1 <= 0.01 and r2 <= 0.01
    assert report(7, ok, f"P(X>=267) = {p1:.5g} (rel err {r1:.2g}), "
                         f"P(X>=118) = {p2:.5g} (rel err {r2:.2g}); tolerance 1%")


def _detection(name):
    cfg = presets.get(name)
    plan = offline_plan(cfg)
    scn = cfg.scenario()
    window = det.attack_window(plan, cfg.steps)
    dcfg = cfg.detector()
    cal = det.calibrate_threshold(dcfg, scn, cfg.n_sims, cfg.trials_per_sim,
                                  seed=sim.mix_seed(cfg.seed, 1), window=window, basis=cfg.basis)
    rep = det.detection_experiment(dcfg.with_threshold(cal.threshold), scn, plan, cfg.detect_trials,
                                   seed=sim.mix_seed(cfg.seed, 2), window=window,
                                   p0=cal.false_alarm)
    return cal, rep


def test_c08_detector_reproduction():
    t0 = time.perf_counter()
    cal_a, a = _detection("abrupt")
    cal_b, b = _detection("fig8")
    cal_c, c = _detection("fig9")
    elapsed = time.perf_counter() - t0
    ok_a = a.rate >= 0.99
    ok_b = b.rate - b.null_rate >= 0.05
    ok_c = abs(c.rate - c.null_rate) <= 0.03
    ok = ok_a and ok_b and ok_c and elapsed < 120
    detail = (f"(a) {a.rate:.3f} >= 0.99 {'ok' if ok_a else 'MISS'} [tau {cal_a.threshold:.3g}, "
              f"fa {a.null_rate:.4f}]; (b) {b.rate:.3f} - {b.null_rate:.4f} >= 0.05 "
              f"{'ok' if ok_b else 'MISS'}; (c) |{c.rate:.3f} - {c.null_rate:.4f}| <= 0.03 "
              f"{'ok' if ok_c else 'MISS'}; {elapsed:.1f} s (< 120 s)")
    assert report(8, ok, detail)


def test_c09_chi_square_distribution():
    cfg = presets.get("fig7")
    g = det.null_statistics(det.DetectorConfig(), cfg.scenario(), 1000, seed=cfg.seed,
                            window=range(6, 16)).ravel()
    res = stats.kstest(g, "chi2", args=(2,))
    ok = g.size == 10000 and res.pvalue > 0.01
    assert report(9, ok, f"KS vs chi2(2) on {g.size} samples: D = {res.statistic:.4f}, "
                         f"p = {res.pvalue:.3f} (> 0.01)")


def test_c10_steady_state_gain():
    scalar = LinearSystem([[1.0]], [[1.0]], [[1.0]], [[0.5]], [[0.5]])
    s = build_gain_schedule(scalar, [[1.0]], 50)
    k, p = s.gains[-1][0, 0], s.post_covs[-1][0, 0]
    ok = abs(k - 0.618034) <= 1e-6 and abs(p - 0.309017) <= 1e-6
    assert report(10, ok, f"K_50 = {k:.7f} (0.618034), Sigma_50 = {p:.7f} (0.309017); tol 1e-6")
