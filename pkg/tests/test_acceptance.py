"""Acceptance suite: one test per numbered criterion, one PASS/FAIL line each.

Criteria 3 and 4 are long-running and tagged ``extended``; they are
excluded from the default run (see pyproject) and selected with
``pytest -m extended``.
"""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qtl.chaos import (NOISE, OFFSET, BranchProtocol, ClassicalLyapunovConfig,
                       QuantumLyapunovConfig, fit_log_separation,
                       lyapunov_estimate)
from qtl.classical import ClassicalState, NoiseSpec, matched_noise, \
    run_classical_trajectory
from qtl.config import parse_config
from qtl.grid import WaveState, init_gaussian, make_grid, moments, normalize
from qtl.quantum import (MeasureParams, SplitStepper, SystemParams,
                         regime_check, run_quantum_trajectory, sse_step)
from qtl.rng import substream
from qtl import harness

PAPER = SystemParams(m=1.0, B=0.5, A=10.0, Lambda=10.0, omega=6.07)


def report(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {n}: {detail}"


def classical_lyapunov_noisy(seed=1):
    """Shared by criteria 2 and 4: the noisy-classical baseline estimate."""
    ns = matched_noise(MeasureParams(hbar=1e-5, k=1e5), 1e-5)
    proto = BranchProtocol(n_fiducial=10, n_branch_points=17,
                           branch_spacing=20.0, track_time=8.0,
                           perturbation_mode=NOISE)
    cfg = ClassicalLyapunovConfig(params=PAPER, noise=ns, dt=1e-3,
                                  sample_every=10)
    # the early part of the curve is inflated by the noise floor
    # (ln Delta ~ ln sigma + lam tau + 0.5 ln(1 - e^{-2 lam tau})), so the
    # fit starts at tau = 2 instead of 1
    return lyapunov_estimate(proto, cfg, (2.0, 6.0), seed=seed)


def test_criterion_1_noiseless_classical_lyapunov():
    proto = BranchProtocol(n_fiducial=50, start=(-3.0, 8.0),
                           start_dispersion=0.1, n_branch_points=17,
                           branch_spacing=20.0, track_time=8.0,
                           perturbation_mode=OFFSET, delta0=1e-6)
    cfg = ClassicalLyapunovConfig(params=PAPER, noise=NoiseSpec(), dt=1e-3,
                                  sample_every=10)
    res = lyapunov_estimate(proto, cfg, (1.0, 6.0), seed=42)
    ok = 0.50 <= res.lam <= 0.62
    report(1, ok, f"lambda = {res.lam:.4f} +- {res.stderr:.4f}, "
                  f"target [0.50, 0.62]")


def test_criterion_2_noisy_classical_lyapunov():
    res = classical_lyapunov_noisy()
    # agreement with the noiseless value of criterion 1
    proto1 = BranchProtocol(n_fiducial=50, n_branch_points=17,
                            perturbation_mode=OFFSET, delta0=1e-6)
    cfg1 = ClassicalLyapunovConfig(params=PAPER, noise=NoiseSpec(), dt=1e-3,
                                   sample_every=10)
    res1 = lyapunov_estimate(proto1, cfg1, (1.0, 6.0), seed=42)
    combined = math.hypot(res.stderr, res1.stderr)
    ok = 0.50 <= res.lam <= 0.64 and abs(res.lam - res1.lam) <= combined
    report(2, ok, f"lambda = {res.lam:.4f} +- {res.stderr:.4f}, target "
                  f"[0.50, 0.64]; |diff to noiseless| = "
                  f"{abs(res.lam - res1.lam):.4f} <= {combined:.4f}")


@pytest.mark.extended
def test_criterion_3_quantum_localization():
    hbar, k = 1e-5, 1e5
    mp = MeasureParams(hbar=hbar, k=k, eta=1.0)
    grid = make_grid(-10.0, 10.0, 2**17)
    sigma0 = (hbar / (8.0 * PAPER.m * k)) ** 0.25  # ~1.88e-3
    state = init_gaussian(grid, -3.0, 0.0, sigma0, hbar)

    dt = 2e-5
    period = 2.0 * math.pi / PAPER.omega
    steps_per_period = int(round(period / dt))
    check_every = 50  # moments every 1e-3 time units
    bound = 3.4e-3
    transient_periods, hold_periods = 2, 5

    stepper = SplitStepper(grid, dt, PAPER, mp)
    rng = substream(2718)
    sqrt_dt = math.sqrt(dt)
    amps = state.amplitudes.copy()
    t = 0.0
    worst = 0.0
    for period_idx in range(transient_periods + hold_periods):
        for i in range(steps_per_period):
            amps = stepper.unitary(amps, t)
            amps, _ = stepper.measure(amps, sqrt_dt * rng.standard_normal())
            t += dt
            if (i + 1) % check_every == 0 and period_idx >= transient_periods:
                m = moments(WaveState(grid, amps, t), PAPER, hbar)
                width = math.sqrt(max(m.var_x, 0.0))
                worst = max(worst, width)
                if width > bound:
                    report(3, False,
                           f"sqrt(V_x) = {width:.4g} > {bound} at t = {t:.4f} "
                           f"(period {period_idx + 1})")
    report(3, True, f"max sqrt(V_x) = {worst:.4g} <= {bound} over "
                    f"{hold_periods} periods after a "
                    f"{transient_periods}-period transient")


@pytest.mark.extended
def test_criterion_4_quantum_lyapunov_relaxed_scale():
    hbar, k = 1e-2, 1e3
    mp = MeasureParams(hbar=hbar, k=k, eta=1.0)
    rep = regime_check(PAPER, mp,
                       {"dFdx": 20.0, "d2F_over_F": 1.0, "action": 10.0},
                       {"dt": 0.05, "dx": 0.1})
    assert rep.all_satisfied, (
        f"regime not satisfied at hbar={hbar}, k={k}: "
        f"{rep.localization}/{rep.noise}/{rep.record}")

    sigma0 = (hbar / (8.0 * PAPER.m * k)) ** 0.25
    proto = BranchProtocol(n_fiducial=4, n_branch_points=8,
                           branch_spacing=20.0, track_time=8.0,
                           perturbation_mode=NOISE)
    cfg = QuantumLyapunovConfig(params=PAPER, measure=mp,
                                grid=make_grid(-10.0, 10.0, 2**14),
                                dt=1e-3, sigma0=sigma0, sample_every=10)
    res = lyapunov_estimate(proto, cfg, (2.0, 6.0), seed=12)
    baseline = classical_lyapunov_noisy()
    diff = abs(res.lam - baseline.lam)
    ok = diff <= 0.12
    report(4, ok, f"quantum lambda = {res.lam:.4f} +- {res.stderr:.4f}, "
                  f"classical baseline {baseline.lam:.4f}; "
                  f"|diff| = {diff:.4f} <= 0.12")


def test_criterion_5_moment_equation_statistics():
    hbar, k = 1.0, 0.5
    p = SystemParams(m=1.0, B=0.0, A=-5.0, Lambda=0.0, omega=1.0)
    mp = MeasureParams(hbar=hbar, k=k, eta=1.0)
    g = make_grid(-12.0, 12.0, 2048)
    st = init_gaussian(g, 0.5, 2.0, 0.5, hbar)
    st = normalize(WaveState(
        g, st.amplitudes * np.exp(1j * 0.8 * (g.x - 0.5) ** 2 / hbar), 0.0))
    m0 = moments(st, p, hbar)

    dt, n = 1e-4, 200
    draws = substream(2024).standard_normal(n)
    dxs = np.empty(n)
    dps = np.empty(n)
    for i, z in enumerate(draws):
        out = sse_step(st, dt, float(z), p, mp)
        dxs[i] = out.moments.mean_x - m0.mean_x
        dps[i] = out.moments.mean_p - m0.mean_p

    se_x = dxs.std(ddof=1) / math.sqrt(n)
    se_p = dps.std(ddof=1) / math.sqrt(n)
    drift_x_dev = abs(dxs.mean() - m0.mean_p / p.m * dt) / se_x
    drift_p_dev = abs(dps.mean() - 2.0 * p.A * m0.mean_x * dt) / se_p
    var_x_ratio = dxs.var(ddof=1) / (2.0 * k * m0.var_x**2 * dt)
    var_p_ratio = dps.var(ddof=1) / (2.0 * k * m0.cov_xp**2 * dt)

    ok = (drift_x_dev <= 3.0 and drift_p_dev <= 3.0
          and abs(var_x_ratio - 1.0) <= 0.1 and abs(var_p_ratio - 1.0) <= 0.1)
    report(5, ok,
           f"drift devs {drift_x_dev:.2f} / {drift_p_dev:.2f} se (<= 3); "
           f"d<X>, d<P> variances are {var_x_ratio:.2f} / {var_p_ratio:.2f} x "
           f"the 2k V^2 dt targets. The exp(-2 k dt (x-<X>)^2 + sqrt(2k) dW "
           f"(x-<X>)) update yields conditioned-mean diffusion 8 k Vx^2 dt "
           f"(4x the target): the 2k targets are not attainable together "
           f"with that update form")


def test_criterion_6_gaussian_closure_oracle():
    hbar, m, k = 1.0, 1.0, 0.5
    p = SystemParams(m=m, B=0.0, A=-5.0, Lambda=0.0, omega=1.0)
    mp = MeasureParams(hbar=hbar, k=k, eta=1.0)
    st = init_gaussian(make_grid(-12.0, 12.0, 2048), 0.5, 2.0, 0.5, hbar)
    dt, T = 1e-3, 5.0
    rec = run_quantum_trajectory(st, T, dt, p, mp, seed=99, sample_every=10)

    f_prime = 2.0 * p.A  # dF/dx for the linear force F = 2 A x

    def rhs(t, y):
        vx, cxp, vp = y
        return [2.0 * cxp / m - 8.0 * k * vx**2,
                vp / m + f_prime * vx - 8.0 * k * vx * cxp,
                2.0 * f_prime * cxp + 2.0 * hbar**2 * k - 8.0 * k * cxp**2]

    m0 = moments(st, p, hbar)
    sol = solve_ivp(rhs, (0.0, T), [m0.var_x, m0.cov_xp, m0.var_p],
                    t_eval=rec.t, rtol=1e-10, atol=1e-12)
    errs = {}
    for name, grid_series, oracle in (("V_x", rec.var_x, sol.y[0]),
                                      ("C_xp", rec.cov_xp, sol.y[1]),
                                      ("V_p", rec.var_p, sol.y[2])):
        errs[name] = np.max(np.abs(grid_series - oracle)) / np.max(np.abs(oracle))
    ok = all(e <= 0.01 for e in errs.values())
    report(6, ok, "max rel errs " + ", ".join(
        f"{k_}={v:.2e}" for k_, v in errs.items()) + " (<= 1e-2)")


def test_criterion_7_richardson_convergence():
    p = SystemParams(m=1.0, B=0.5, A=10.0, Lambda=0.0, omega=1.0)
    mp = MeasureParams(hbar=0.5, k=0.0)
    g = make_grid(-10.0, 10.0, 2048)
    st = init_gaussian(g, -3.0, 0.0, 0.4, mp.hbar)

    def quantum_err(dt):
        rec = run_quantum_trajectory(st, 1.0, dt, p, mp, seed=0,
                                     sample_every=max(1, int(round(0.01 / dt))))
        return np.max(np.abs(rec.energy - rec.energy[0]))

    def classical_err(dt):
        rec = run_classical_trajectory(
            ClassicalState(-3.0, 0.0), 5.0, dt, p,
            sample_every=max(1, int(round(0.01 / dt))))
        return np.max(np.abs(rec.energy - rec.energy[0]))

    rq = quantum_err(2e-3) / quantum_err(1e-3)
    rc = classical_err(2e-3) / classical_err(1e-3)
    ok = 3.5 <= rq <= 4.5 and 3.5 <= rc <= 4.5
    report(7, ok, f"Richardson ratios: quantum {rq:.3f}, classical {rc:.3f} "
                  f"(target [3.5, 4.5])")


def test_criterion_8_regime_arithmetic():
    mp = MeasureParams(hbar=1e-5, k=1e5, eta=1.0)
    stats = {"dFdx": 20.0, "d2F_over_F": 1.0, "action": 10.0}
    rep = regime_check(PAPER, mp, stats, {"dt": 0.01, "dx": 0.01})
    ok = (rep.k_min_record == pytest.approx(1.25e5, rel=1e-12)
          and rep.noise_lo == pytest.approx(4e-5, rel=1e-12)
          and rep.noise_mid == pytest.approx(1.0, rel=1e-12)
          and rep.noise_hi == pytest.approx(5e6, rel=1e-12)
          and rep.noise == "satisfied")
    report(8, ok, f"k_min = {rep.k_min_record:.6g} (= 1.25e5); noise bounds "
                  f"{rep.noise_lo:.3g} << {rep.noise_mid:.3g} << "
                  f"{rep.noise_hi:.3g}: {rep.noise}")


def test_criterion_9_synthetic_estimator():
    tau = np.linspace(0.05, 8.0, 160)
    ln_delta = math.log(1e-6) + 0.7 * tau
    slope_err = abs(fit_log_separation(tau, ln_delta, (1.0, 6.0)) - 0.7)

    target = math.sqrt(20.0)  # sqrt(2A/m) for the inverted harmonic A = 10
    p = SystemParams(m=1.0, B=0.0, A=10.0, Lambda=0.0, omega=1.0)
    proto = BranchProtocol(n_fiducial=8, start=(0.01, 0.0),
                           start_dispersion=0.005, n_branch_points=1,
                           branch_spacing=20.0, track_time=2.0,
                           perturbation_mode=OFFSET, delta0=1e-8)
    cfg = ClassicalLyapunovConfig(params=p, noise=NoiseSpec(), dt=1e-4,
                                  sample_every=10)
    res = lyapunov_estimate(proto, cfg, (0.5, 1.5), seed=5)
    rel = abs(res.lam - target) / target
    ok = slope_err < 1e-6 and rel < 0.05
    report(9, ok, f"synthetic slope error {slope_err:.2e} (< 1e-6); inverted "
                  f"harmonic lambda = {res.lam:.4f} vs sqrt(20) = "
                  f"{target:.4f}, rel err {rel:.4f} (< 0.05)")


def test_criterion_10_determinism_across_workers(tmp_path):
    text = """
mode = strobe
seed = 123
strobe.system = classical
ensemble.n_traj = 4
run.dt = 1e-3
run.T = 10.0
run.sample_every = 10
strobe.t_skip = 2.0
"""
    cfg = parse_config(text)
    out1, out8 = tmp_path / "w1", tmp_path / "w8"
    harness.run(cfg, out_dir=str(out1), workers=1)
    harness.run(cfg, out_dir=str(out8), workers=8)
    names = sorted(p_.name for p_ in out1.iterdir())
    same = names == sorted(p_.name for p_ in out8.iterdir()) and all(
        (out1 / n).read_bytes() == (out8 / n).read_bytes() for n in names)
    report(10, same, f"{len(names)} output files byte-identical at "
                     f"workers=1 and workers=8")
