"""End-to-end acceptance checks; each test records one pass/fail line."""

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from quadformation import preset, run
from quadformation.controller import m_inverse, m_matrix, steady_state_attitude
from quadformation.graph import h_matrix
from quadformation.lyapunov import decay_rate, envelope, forcing_level, lyapunov_value
from quadformation.output import write_trace_csv
from quadformation.simulation import fl_exactness_residual

CASES = (1, 2)


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number} {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def at(trace, t):
    return int(np.argmin(np.abs(trace.t - t)))


def test_criterion_01_case2_reproduction(preset_runs):
    trace, seconds = preset_runs[2]
    final = trace.formation_error_norm[-1].max()
    worst = trace.formation_error_norm.max(axis=1)
    tail = worst[trace.t >= trace.t[-1] - 50]
    rise = float(np.max(np.diff(tail), initial=0.0))
    ok = final < 1e-2 and rise <= 1e-4 and seconds < 30
    record(1, ok, f"final max error {final:.3g} m (<1e-2), largest rise over last 50 s {rise:.3g} (<=1e-4), "
                  f"runtime {seconds:.1f} s (<30)")


def test_criterion_02_case1_reproduction(case1_trace):
    tr = case1_trace
    final = tr.formation_error_norm[-1].max()
    lead = tr.leader
    oracle = max(abs(math.degrees(steady_state_attitude(a[0], a[1], a[2])[1])) for a in lead[:, 2, :])
    steady = tr.t >= 150
    theta = math.degrees(np.abs(tr.attitudes[steady][..., 1]).max())
    yaw = math.degrees(np.abs(tr.attitudes[-1, :, 2]).max())
    ok = final < 0.1 and abs(theta - 5.823) <= 0.5 and abs(theta - oracle) <= 0.5 and yaw < 0.1
    record(2, ok, f"final max error {final:.3g} m (<0.1), steady max|theta| {theta:.4f} deg "
                  f"(5.823 +- 0.5; steady-attitude oracle {oracle:.4f}), final |psi| {yaw:.2g} deg (<0.1)")


def test_criterion_03_thrust_positivity(preset_runs):
    lows = {}
    for case in CASES:
        tr = preset_runs[case][0]
        cg, og = tr.scenario.controller_gains, tr.scenario.observer_gains
        bound = tr.scenario.g - cg.k1z - cg.k3z - (og.h1 + og.h3)
        assert bound == pytest.approx(7.31)
        lows[case] = (tr.ubar.min(), bound)
    ok = all(low >= bound for low, bound in lows.values())
    record(3, ok, ", ".join(f"case {c} min ubar {low:.4f} >= {bound:.2f}" for c, (low, bound) in lows.items()))


def test_criterion_04_attitude_bounds(preset_runs):
    tilts = {c: math.degrees(np.abs(preset_runs[c][0].attitudes[..., :2]).max()) for c in CASES}
    ok = all(v < 30 for v in tilts.values())
    record(4, ok, ", ".join(f"case {c} max tilt {v:.3f} deg (<30, <90)" for c, v in tilts.items()))


def test_criterion_05_linearization_exactness(preset_runs):
    res = {c: fl_exactness_residual(preset_runs[c][0], (5.0, 195.0)) for c in CASES}
    ok = all(v < 1e-3 for v in res.values())
    record(5, ok, ", ".join(f"case {c} max relative error {v:.3g} (<1e-3)" for c, v in res.items()))


def test_criterion_06_stacked_identity(preset_runs):
    res = {c: float(preset_runs[c][0].stacked_residual().max()) for c in CASES}
    ok = all(v < 1e-10 for v in res.values())
    record(6, ok, ", ".join(f"case {c} max |c - (H kron I2) s| {v:.3g} (<1e-10)" for c, v in res.items()))


def test_criterion_07_lyapunov_envelope(preset_runs):
    ratios = {}
    for case in CASES:
        tr = preset_runs[case][0]
        sc = tr.scenario
        h = h_matrix(sc.graph)
        w = np.array([lyapunov_value(c, h) for c in tr.consensus_error])
        q = decay_rate(sc.observer_gains, h)
        sigma0 = forcing_level(sc.observer_gains, tuple(sc.sigma())[:2], sc.n)
        bound = envelope(tr.t, w[0], q, sc.observer_gains.lam, sigma0)
        ratios[case] = float(np.max(w / (1.05 * bound)))
    ok = all(r <= 1.0 for r in ratios.values())
    record(7, ok, ", ".join(f"case {c} max W/(1.05 bound) {r:.3g} (<=1)" for c, r in ratios.items()))


def test_criterion_08_altitude_error_suite():
    gains = preset(2).controller_gains
    k1, k2, k3 = gains.k1z, gains.k2z, gains.k3z
    e = np.random.default_rng(2024).uniform(-10, 10, (50, 2))

    def f(x):
        return np.column_stack([x[:, 1], -k1 * np.tanh(x[:, 1] + k2 * x[:, 0]) - k3 * np.tanh(x[:, 1])])

    h = 0.01
    for _ in range(20_000):
        a = f(e)
        b = f(e + h / 2 * a)
        c = f(e + h / 2 * b)
        d = f(e + h * c)
        e = e + h / 6 * (a + 2 * b + 2 * c + d)
    worst = float(np.linalg.norm(e, axis=1).max())
    record(8, worst < 1e-3, f"50 random starts, worst norm at 200 s {worst:.3g} (<1e-3)")


def test_criterion_09_m_inverse():
    angles = np.random.default_rng(9).uniform(-1.4, 1.4, (10_000, 2))
    worst = max(np.abs(m_matrix(p, t) @ m_inverse(p, t) - np.eye(2)).max() for p, t in angles)
    record(9, worst <= 1e-12, f"max |M Minv - I| over 10^4 pairs {worst:.3g} (<=1e-12)")


def test_criterion_10_observer_consensus(preset_runs):
    parts = []
    ok = True
    for case in CASES:
        tr = preset_runs[case][0]
        k = at(tr, 150.0)
        assert tr.t[k] == 150.0
        xy = tr.observer_xy[k]
        lead = tr.leader[k]
        errs = [np.linalg.norm(xy[:, 2 * lvl:2 * lvl + 2] - lead[lvl, :2], axis=1).max() for lvl in range(3)]
        errs.append(np.abs(tr.observer_z[k][:, 0] - lead[0, 2]).max())
        ok &= max(errs) < 1e-2
        parts.append(f"case {case} pos {errs[0]:.2g} vel {errs[1]:.2g} acc {errs[2]:.2g} alt {errs[3]:.2g}")
    record(10, ok, ", ".join(parts) + " (all <1e-2 at 150 s)")


def test_criterion_11_integrator_order():
    ratios = {}
    for case in CASES:
        finals = [run(preset(case, dt=dt, t_final=10.0)).states[-1] for dt in (0.01, 0.005, 0.0025)]
        ratios[case] = np.abs(finals[0] - finals[1]).max() / np.abs(finals[1] - finals[2]).max()
    ok = all(12 <= r <= 20 for r in ratios.values())
    record(11, ok, ", ".join(f"case {c} Richardson ratio {r:.2f} (in [12, 20])" for c, r in ratios.items()))


def test_criterion_12_determinism(case2_trace, tmp_path):
    a = write_trace_csv(case2_trace, tmp_path / "a.csv").read_bytes()
    b = write_trace_csv(run(preset(2)), tmp_path / "b.csv").read_bytes()
    record(12, a == b, f"two case 2 runs give identical CSVs ({len(a)} bytes)")
