"""Self-checks run by ``dynmod validate``.

Each check returns ``(passed, detail)``. Groups: model anchors, randomized
regressor and skew-symmetry suites, gain gates, and short runs of every
bundled preset (with the Lyapunov monitor on the regulation presets).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .controllers import (GainConditionViolated, OuterConfig, make_controller)
from .controllers.pid import GOLDEN_BOUND
from .model import (PlantModel, dynamic_regressor, forward_kinematics, inertia_rate, jacobian,
                    kinematic_regressor, link_inertia, mass_coriolis_gravity)
from .presets import load_preset, preset_names
from .sim import FLAG_LYAPUNOV, run_scenario

Q0 = np.array([np.pi / 6, np.pi / 3, -5 * np.pi / 6])
X0_REF = np.array([-0.7500, 1.2990, 0.5196])
M0_REF = np.array([[18.9058, 0.0, 0.0], [0.0, 18.9290, 9.4327], [0.0, 9.4327, 5.1205]])
EIG_REF = np.array([0.3352, 18.9058, 23.7143])
ANCHOR_TOL = 1e-3

REGULATION_PRESETS = ("fig3_filter_regulation", "fig6_observer_regulation")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def random_model(rng) -> PlantModel:
    """A physically plausible arm with randomized inertial and damping values."""
    base = PlantModel()
    return replace(
        base,
        masses=base.masses * rng.uniform(0.5, 2.0, 4),
        inertias=base.inertias * rng.uniform(0.5, 2.0, (4, 3)),
        com=base.com * rng.uniform(0.5, 1.5, 4),
        lengths=base.lengths * rng.uniform(0.7, 1.3, 4),
        damping=base.damping * rng.uniform(0.5, 2.0, 3),
        rotor_inertia=base.rotor_inertia * rng.uniform(0.5, 2.0, 3),
    )


# ------------------------------------------------------------------ anchors

def check_x0():
    x = forward_kinematics(Q0, PlantModel().kinematic_params())
    dev = np.abs(x - X0_REF).max()
    return dev < ANCHOR_TOL, f"x(q0) = {np.round(x, 4)}, max dev {dev:.2e}"


def check_m0():
    M0 = link_inertia(np.zeros(3), PlantModel())
    dev = np.abs(M0 - M0_REF).max()
    return dev < ANCHOR_TOL, f"M0(0) max-abs deviation {dev:.2e}"


def check_eigenvalues():
    ev = np.sort(np.linalg.eigvalsh(link_inertia(np.zeros(3), PlantModel())))
    dev = np.abs(ev - EIG_REF).max()
    return dev < ANCHOR_TOL, f"eig M0(0) = {np.round(ev, 4)}, max dev {dev:.2e}"


# ------------------------------------------------------------------ regressors

def check_dynamic_regressor(n=1000, seed=1, perturb_ad=0.0):
    """Y_d a_d against the rigid-body oracle for random arguments and models."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        model = random_model(rng)
        q, qd, z, zd = (rng.uniform(-np.pi, np.pi, 3) for _ in range(4))
        a = model.dynamic_params(rotor=True, friction=False)
        if perturb_ad:
            a = a + perturb_ad
        lhs = dynamic_regressor(q, qd, z, zd, model.gravity) @ a
        M, C, g = mass_coriolis_gravity(q, qd, model, rotor=True)
        rhs = M @ zd + C @ z + model.damping * z + g
        worst = max(worst, np.linalg.norm(lhs - rhs) / (1.0 + np.linalg.norm(rhs)))
    return worst < 1e-9, f"{n} samples, worst scaled residual {worst:.2e}"


def check_kinematic_regressor(n=1000, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        q, psi = rng.uniform(-np.pi, np.pi, 3), rng.normal(size=3)
        a_k = rng.uniform(0.2, 3.0, 3)
        lhs = kinematic_regressor(q, psi) @ a_k
        rhs = jacobian(q, a_k) @ psi
        worst = max(worst, np.linalg.norm(lhs - rhs) / (1.0 + np.linalg.norm(rhs)))
    return worst < 1e-9, f"{n} samples, worst scaled residual {worst:.2e}"


def check_skew_symmetry(n=1000, seed=3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        model = random_model(rng)
        q, qd, z = rng.uniform(-np.pi, np.pi, 3), rng.normal(size=3), rng.normal(size=3)
        _, C, _ = mass_coriolis_gravity(q, qd, model)
        Md = inertia_rate(q, qd, model)
        val = abs(z @ (Md - 2.0 * C) @ z)
        worst = max(worst, val / (1.0 + np.abs(Md).max() * (z @ z)))
    return worst < 1e-6, f"{n} samples, worst scaled |z'(dM - 2C)z| {worst:.2e}"


# ------------------------------------------------------------------ gain gates

def check_observer_gate():
    ok = make_controller("observer_regulator", OuterConfig(beta=1.0, gamma=1.0))
    try:
        make_controller("observer_regulator", OuterConfig(beta=0.4, gamma=1.0))
    except GainConditionViolated:
        return ok is not None, "beta=1, gamma=1 accepted; beta=0.4, gamma=1 rejected"
    return False, "beta=0.4, gamma=1 was accepted"


def check_kc_gate():
    eps = 1e-9
    make_controller("pid_outer", OuterConfig(Kc=GOLDEN_BOUND))
    make_controller("pid_outer", OuterConfig(Kc=GOLDEN_BOUND + eps))
    try:
        make_controller("pid_outer", OuterConfig(Kc=GOLDEN_BOUND - eps))
    except GainConditionViolated:
        return True, f"K_c bound {GOLDEN_BOUND:.9f} enforced"
    return False, "K_c below the bound was accepted"


# ------------------------------------------------------------------ presets

def _short_run(name, seconds):
    cfg = load_preset(name)
    cfg = replace(cfg, duration=min(cfg.duration, seconds))
    log = run_scenario(cfg)
    flags = log.col("flags").astype(int)
    return log, int(np.sum((flags & FLAG_LYAPUNOV) > 0))


def preset_check(name, seconds=1.0, monitor=False):
    def run():
        log, n_up = _short_run(name, seconds)
        err = np.linalg.norm(log.block("err"), axis=1)
        finite = bool(np.all(np.isfinite(err)))
        if monitor:
            return finite and n_up == 0, f"{len(log)} rows, {n_up} Lyapunov increases beyond tolerance"
        return finite, f"{len(log)} rows, final |err| {err[-1]:.3e}"
    return run


def all_checks(perturb_ad: float = 0.0):
    checks = [
        ("anchor.x0", check_x0),
        ("anchor.M0", check_m0),
        ("anchor.eigenvalues", check_eigenvalues),
        ("regressor.dynamic", lambda: check_dynamic_regressor(perturb_ad=perturb_ad)),
        ("regressor.kinematic", check_kinematic_regressor),
        ("regressor.skew_symmetry", check_skew_symmetry),
        ("gate.observer", check_observer_gate),
        ("gate.kc_bound", check_kc_gate),
    ]
    for name in REGULATION_PRESETS:
        checks.append((f"lyapunov.{name}", preset_check(name, 2.0, monitor=True)))
    for name in preset_names():
        checks.append((f"preset.{name}", preset_check(name, 1.0)))
    return checks


def run_checks(name_filter: str | None = None, perturb_ad: float = 0.0, stop_on_failure: bool = False):
    """Run the (filtered) checks; a check that raises counts as failed."""
    results = []
    for name, fn in all_checks(perturb_ad):
        if name_filter and name_filter not in name:
            continue
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failure of that check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - t0))
        if stop_on_failure and not passed:
            break
    return results


def format_table(results) -> str:
    width = max([len(r.name) for r in results] + [5])
    lines = [f"{'check':<{width}}  result  time    detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:5.2f}s  {r.detail}")
    return "\n".join(lines)
