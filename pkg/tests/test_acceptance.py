"""The ten acceptance criteria, one test and one PASS/FAIL line each.

Run directly (``python3 tests/test_acceptance.py``) for the verdict lines
alone; under pytest they appear in the terminal summary.
"""

from dataclasses import replace

import numpy as np
import pytest

from dynmod.controllers import GainConditionViolated, OuterConfig, make_controller
from dynmod.controllers.pid import GOLDEN_BOUND
from dynmod.presets import load_preset, preset_names
from dynmod.sim import FLAG_LYAPUNOV, NumericalDivergence, run_scenario
from dynmod.targets import Sinusoid
from dynmod.validate import (check_dynamic_regressor, check_eigenvalues, check_kinematic_regressor,
                             check_m0, check_skew_symmetry, check_x0)

from _support import oracle_step, per_joint_rms, run_preset, window_norm
from acceptance_report import report


def test_criterion_01_model_anchors():
    results = [check_x0(), check_m0(), check_eigenvalues()]
    ok = all(r[0] for r in results)
    assert report(1, "model anchors", ok, "; ".join(r[1] for r in results))


def test_criterion_02_regressor_oracles():
    results = [check_dynamic_regressor(1000), check_kinematic_regressor(1000), check_skew_symmetry(1000)]
    ok = all(r[0] for r in results)
    assert report(2, "regressor oracles", ok, "; ".join(r[1] for r in results))


def test_criterion_03_regulation():
    parts, ok = [], True
    for name in ("fig3_filter_regulation", "fig6_observer_regulation"):
        log = run_preset(name)
        err = np.linalg.norm(log.block("err"), axis=1)
        n_up = int(np.sum(log.col("flags").astype(int) & FLAG_LYAPUNOV > 0))
        bounded = bool(np.all(np.isfinite(err)) and err.max() <= err[0] * 1.05)
        good = err[-1] < 5e-3 and bounded and n_up == 0
        ok &= good
        parts.append(f"{name} |dx(T)| {err[-1]:.2e} m, max {err.max():.3f} m, Lyapunov increases {n_up}")
    assert report(3, "task-space regulation", ok, "; ".join(parts))


def test_criterion_04_tracking():
    cfg = load_preset("fig9_observer_tracking")
    log = run_preset("fig9_observer_tracking")
    band = window_norm(log, cfg.target.period).max()
    reg = load_preset("fig6_observer_regulation", duration=2.0)
    as_tracker = replace(reg, controller="observer_tracker",
                         target=Sinusoid(reg.target.x_d, np.zeros(3), np.zeros(3), 1.0, "task"))
    identical = run_scenario(reg).to_csv() == run_scenario(as_tracker).to_csv()
    ok = band < 5e-3 and identical
    assert report(4, "task-space tracking", ok,
                  f"max |dx| over final period {band:.2e} m; tracker with static target "
                  f"{'matches' if identical else 'differs from'} regulator byte for byte")


def test_criterion_05_gain_gates():
    checks = []
    try:
        make_controller("observer_regulator", OuterConfig(beta=1.0, gamma=1.0))
        checks.append(True)
    except GainConditionViolated:
        checks.append(False)
    with pytest.raises(GainConditionViolated):
        make_controller("observer_regulator", OuterConfig(beta=0.4, gamma=1.0))
    checks.append(True)
    make_controller("pid_outer", OuterConfig(Kc=GOLDEN_BOUND))
    with pytest.raises(GainConditionViolated):
        make_controller("pid_outer", OuterConfig(Kc=GOLDEN_BOUND - 1e-9))
    checks.append(True)
    assert report(5, "gain gates", all(checks),
                  f"beta=1 accepted, beta=0.4 rejected, K_c bound {GOLDEN_BOUND:.9f} enforced")


def test_criterion_06_direct_vs_composite():
    direct, comp = run_preset("fig12_direct_adaptive"), run_preset("fig15_composite_adaptive")
    rd, rc = per_joint_rms(direct, 2.0), per_joint_rms(comp, 2.0)
    nd, nc = np.sqrt(np.sum(rd ** 2)), np.sqrt(np.sum(rc ** 2))
    ok = nc <= nd and rd.max() < 0.02 and rc.max() < 0.02
    assert report(6, "direct vs composite", ok,
                  f"RMS last 2 s composite {nc:.3e} <= direct {nd:.3e} rad; per joint max "
                  f"{rc.max():.3e} / {rd.max():.3e}")


def test_criterion_07_flexible_joints():
    rigid = per_joint_rms(run_preset("fig12_direct_adaptive"), 2.0)
    flex = per_joint_rms(run_preset("fig18_flexible_joint"), 2.0)
    within = bool(np.all(flex <= 2.0 * rigid))
    soft = run_preset("fig19_low_stiffness")
    soft_ok = bool(np.all(np.isfinite(soft.block("err")))) and per_joint_rms(soft, 2.0).max() < 0.02
    try:
        run_scenario(load_preset("fig20_high_stiffness", substeps=1))
        coarse_diverges = False
    except NumericalDivergence:
        coarse_diverges = True
    stiff = run_preset("fig20_high_stiffness")
    fine_ok = bool(np.all(np.isfinite(stiff.block("err"))))
    ok = within and soft_ok and coarse_diverges and fine_ok
    assert report(7, "flexible joints", ok,
                  f"1e6 RMS {np.round(flex, 5)} vs rigid {np.round(rigid, 5)}; 1e4 "
                  f"{'stable' if soft_ok else 'unstable'}; 1e8 substeps=1 "
                  f"{'diverges' if coarse_diverges else 'completes'}, substeps=10 "
                  f"{'completes' if fine_ok else 'fails'}")


def test_criterion_08_pid_inner():
    log = run_preset("fig21_pid_inner")
    tail = np.abs(log.block("err")[log.t >= log.t[-1] - 2.0 - 1e-12]).max(axis=0)
    gap = np.abs(log.block("qc_qr")).max()
    ok = tail.max() < 0.02 and gap < 10.0
    assert report(8, "PID position servo", ok,
                  f"max |dq| last 2 s {np.round(tail, 5)} rad; max |q_c - q_r| {gap:.3f} rad")


def test_criterion_09_adaptive_beats_kinematic():
    period = load_preset("fig24_cartesian_adaptive").target.period
    ad = np.sqrt(np.mean(window_norm(run_preset("fig24_cartesian_adaptive"), period) ** 2))
    kin = np.sqrt(np.mean(window_norm(run_preset("fig25_cartesian_kinematic"), period) ** 2))
    assert report(9, "adaptive vs kinematic", ad < kin,
                  f"RMS |dx| over final period adaptive {ad:.3e} m < kinematic {kin:.3e} m")


def test_criterion_10_determinism_and_discretization():
    cfg = load_preset("fig15_composite_adaptive", duration=1.0)
    same = run_scenario(cfg).to_csv() == run_scenario(cfg).to_csv()
    worst = max(max(oracle_step(name, k=10)) for name in preset_names())
    ok = same and worst < 1e-6
    assert report(10, "determinism and discretization", ok,
                  f"repeat run {'byte-identical' if same else 'differs'}; worst single-step gap to "
                  f"100x substeps {worst:.2e} relative")


if __name__ == "__main__":
    import sys

    failed = 0
    for fn in [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]:
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
