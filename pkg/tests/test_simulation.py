import math

import numpy as np
import pytest

from quadformation import preset, run, step
from quadformation.controller import AttitudeSingularity, ControllerGains, ThrustDegenerate
from quadformation.graph import CommGraph
from quadformation.plant import GRAVITY, ControlInput, QuadState, state_derivative
from quadformation.scenario import ScenarioError
from quadformation.simulation import (
    SDIRK_A,
    SDIRK_C,
    ClosedLoop,
    SimulationError,
    _rk4_observers,
    implicit_consensus,
    initial_joint_state,
    monitors,
    rk4_step,
    xy_implicit_step,
)


def settled(sc):
    """Joint state with every vehicle on its slot and every observer on the leader."""
    lead = sc.leader.derivatives(0.0)
    y = np.zeros((sc.n, 25))
    for i, d in enumerate(sc.deltas):
        y[i, 0:3] = lead[0] + d
        y[i, 12:14] = lead[0, :2]
        y[i, 20] = y[i, 22] = y[i, 24] = lead[0, 2]
    return y


@pytest.mark.parametrize("substeps", [1, 2])
def test_equilibrium_is_preserved(substeps):
    sc = preset(2, observer_substeps=substeps)
    y = settled(sc)
    system = ClosedLoop(sc)
    for k in range(20):
        y_next = step(y, k * sc.dt, sc, system)
        assert np.abs(y_next - y).max() <= 1e-12
        y = y_next


def test_hover_with_controller_bypassed_stays_put():
    s = QuadState(x=1.0, y=2.0, z=3.0).as_array()
    f = lambda t, y: state_derivative(y, ControlInput(GRAVITY))
    for k in range(100):
        s = rk4_step(f, k * 0.01, s, 0.01)
    assert s[:3] == pytest.approx([1, 2, 3], abs=1e-12)


def test_zero_duration_run_has_two_samples():
    trace = run(preset(2, t_final=0.005))
    assert len(trace) == 2 and list(trace.t) == [0.0, 0.005]


def test_final_sample_recorded_off_stride():
    trace = run(preset(2, t_final=0.5, record_stride=30))
    assert list(trace.t) == pytest.approx([0.0, 0.15, 0.3, 0.45, 0.5])


def test_initial_observers_start_on_own_position():
    sc = preset(1)
    y = initial_joint_state(sc)
    for i, s in enumerate(sc.initial):
        assert list(y[i, 12:14]) == [s.x, s.y] and not y[i, 14:20].any()
        assert list(y[i, 20:25]) == [s.z, 0, s.z, 0, s.z]


def test_runs_are_deterministic():
    a = run(preset(1, t_final=3.0))
    b = run(preset(1, t_final=3.0))
    assert np.array_equal(a.states, b.states) and np.array_equal(a.aux, b.aux)


def test_substep_schemes_agree_early():
    a = run(preset(1, t_final=5.0, observer_substeps=1))
    b = run(preset(1, t_final=5.0, observer_substeps=2))
    assert np.abs(a.states[-1] - b.states[-1]).max() < 1e-6


def test_attitude_blowup_aborts_with_partial_trace():
    initial = list(preset(2).initial)
    # a spin that crosses the pitch singularity inside one RK4 stage
    initial[0] = QuadState(thetadot=1000.0)
    with pytest.raises(SimulationError) as err:
        run(preset(2, initial=tuple(initial), t_final=5.0))
    assert isinstance(err.value.cause, AttitudeSingularity)
    assert err.value.trace is not None and not err.value.trace.completed
    assert 1 <= len(err.value.trace) < 51


def test_degenerate_thrust_aborts():
    # ideal references put the 50 m altitude error straight into the saturated law
    sc = preset(2, controller_gains=ControllerGains(k1z=20.0), mode="ideal-reference",
                initial=tuple(QuadState(x=s.x, y=s.y, z=100.0) for s in preset(2).initial), t_final=5.0)
    with pytest.raises(SimulationError) as err:
        run(sc, validate=False)
    assert isinstance(err.value.cause, ThrustDegenerate)


def test_invalid_gains_stop_before_running():
    with pytest.raises(ScenarioError):
        run(preset(2, controller_gains=ControllerGains(k1z=8.5)))


def test_ideal_reference_errors_decay_exponentially():
    trace = run(preset(1, mode="ideal-reference", t_final=60.0))
    chain = trace.chain
    cols = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
    norm = np.linalg.norm(chain[:, :, cols], axis=-1).max(axis=1)
    late = trace.t >= trace.t[-1] - 50
    slope = np.polyfit(trace.t[late], np.log(norm[late]), 1)[0]
    assert slope < 0
    assert norm[-1] < norm[late][0]


def test_triangle_decomposition(case1_trace):
    tr = case1_trace
    lhs = tr.formation_error_norm
    rhs = tr.tracking_error_norm + tr.observer_error_norm
    assert np.all(lhs <= rhs + 1e-12)


def test_case2_monitors_pass(case2_trace):
    report = monitors(case2_trace)
    assert report.passed, report.checks
    assert report.min_ubar >= 7.31


def test_short_trace_monitor_is_undecided():
    report = monitors(run(preset(2, t_final=1.0)))
    assert report.checks["fl_exactness"] is None
    assert report.to_dict()["fl_residual"] is None


# --------------------------------------------------------------------------
# stiff observer scheme


def test_implicit_consensus_solves_its_equation():
    # ill-conditioned on purpose: eps down to 1e-8 makes the Jacobian diagonal huge
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        a = rng.normal(size=(n, n))
        hmat = a @ a.T + 0.1 * np.eye(n)
        hinv = np.linalg.inv(hmat)
        b = rng.normal(0, 10, n)
        h, g4, g5, eps = rng.uniform(1e-4, 1e-1), 0.1, 2.1, 10 ** rng.uniform(-8, 1)
        c = implicit_consensus(hinv, b, np.zeros(n), h, g4, g5, eps)
        residual = hinv @ c + h * (g4 * c + g5 * c / (np.abs(c) + eps)) - b
        # forward error: one Newton correction from the returned point
        jac = hinv + np.diag(h * (g4 + g5 * eps / (np.abs(c) + eps) ** 2))
        correction = np.linalg.solve(jac, residual)
        assert (np.abs(correction) / (np.abs(c) + eps)).max() <= 1e-10


def test_implicit_step_matches_fine_explicit_reference():
    sc = preset(1)
    cl = ClosedLoop(sc)
    obs = initial_joint_state(sc)[:, 12:25]
    obs[:, :8] += np.random.default_rng(0).normal(0, 1, (4, 8))
    t = 10.0

    def reference(h, m=2000):
        o = obs.copy()
        for k in range(m):
            o = _rk4_observers(t + k * h / m, o, h / m, cl.kind, cl.lp, cl.adj, cl.links, cl.go)
        return o[:, :8]

    errs = []
    for h in (0.2, 0.1):
        got = xy_implicit_step(t, obs, h, cl.kind, cl.lp, cl.hmat, cl.hinv, cl.go, SDIRK_A, SDIRK_C)
        errs.append(np.abs(got[:, :8] - reference(h)).max())
    assert errs[1] < 1e-6
    # local error of a fourth-order step shrinks about 32x per halving
    assert errs[0] / errs[1] > 8


def test_late_observer_stays_on_leader(case2_trace):
    tr = case2_trace
    late = tr.t >= 150
    assert np.abs(tr.observer_xy[late][..., 0:2]).max() < 1e-6
