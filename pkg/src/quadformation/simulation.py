"""Joint fixed-step integration of plants, observers and controllers.

The joint state is an ``(n, 25)`` array; each row holds the 12 plant states,
the 8 horizontal observer values and the 5 altitude observer values of one
follower. Controllers are algebraic in that state, so every RK4 stage
re-evaluates them (continuous-time feedback).

Two schemes are available. The default is one classical RK4 step of the
whole coupled system. With ``observer_substeps > 1`` the observers, which do
not depend on the plants, are advanced first at ``dt / observer_substeps``
and the plant RK4 stages read the references from that trajectory.

The adaptive observer gain grows like ``exp(lam t)``, so the observers turn
stiff and any explicit step eventually chatters; the plants then see a
biased reference. The multirate scheme uses RK4 while the step times the
stiffness stays below ``STIFF_LIMIT`` and switches to an L-stable fourth
order SDIRK step of the horizontal observers afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .controller import (
    CHAIN_SIZE,
    CONTROL_SIZE,
    REF_SIZE,
    AttitudeSingularity,
    ThrustDegenerate,
    control_kernel,
)
from .graph import h_matrix, min_eigenvalue
from .lyapunov import decay_rate, envelope, forcing_level
from .leader import leader_kernel
from .observer import XY_SIZE, Z_SIZE, stacked_s, xy_kernel, z_kernel, z_reference
from .plant import STATE_SIZE, plant_rhs
from .scenario import Scenario, validate_scenario
from ._jit import jit

ROW_SIZE = STATE_SIZE + XY_SIZE + Z_SIZE
XY = slice(12, 20)
ZOBS = slice(20, 25)

# aux row: control (6) | chain (19) | reference (15) | consensus error c (2)
AUX_U = slice(0, CONTROL_SIZE)
AUX_CHAIN = slice(CONTROL_SIZE, CONTROL_SIZE + CHAIN_SIZE)
AUX_REF = slice(AUX_CHAIN.stop, AUX_CHAIN.stop + REF_SIZE)
AUX_C = slice(AUX_REF.stop, AUX_REF.stop + 2)
AUX_SIZE = AUX_C.stop
UBAR_COL = AUX_CHAIN.start + 12


class SimulationError(RuntimeError):
    """A run aborted; ``trace`` holds everything recorded before the failure."""

    def __init__(self, message: str, trace: "Trace | None" = None, cause: Exception | None = None):
        super().__init__(message)
        self.trace = trace
        self.cause = cause


OK, SINGULAR, DEGENERATE, NONFINITE = 0, 1, 2, 3


@jit
def observer_rhs(t, obs, kind, lp, adj, links, go, lead, dobs, c, z4):
    """Derivative of the ``(n, 13)`` observer rows; also fills ``lead``, ``c`` and ``z4``."""
    leader_kernel(kind, lp, t, lead)
    lead_xy = np.empty(8)
    for k in range(4):
        lead_xy[2 * k] = lead[k, 0]
        lead_xy[2 * k + 1] = lead[k, 1]
    xy_kernel(obs[:, 0:8], lead_xy, adj, links, go, t, c, z4)
    z_kernel(obs[:, 8:13], lead[0, 2], adj, links, go, dobs[:, 8:13])
    n = obs.shape[0]
    for i in range(n):
        for k in range(6):
            dobs[i, k] = obs[i, k + 2]
        dobs[i, 6] = z4[i, 0]
        dobs[i, 7] = z4[i, 1]


@jit
def build_refs(obs, dobs, lead, go, ideal, refs):
    n = obs.shape[0]
    for i in range(n):
        if ideal:
            for k in range(5):
                refs[i, k] = lead[k, 0]
                refs[i, 5 + k] = lead[k, 1]
                refs[i, 10 + k] = lead[k, 2]
        else:
            for k in range(4):
                refs[i, k] = obs[i, 2 * k]
                refs[i, 5 + k] = obs[i, 2 * k + 1]
            refs[i, 4] = dobs[i, 6]
            refs[i, 9] = dobs[i, 7]
            zr = z_reference(obs[i, 8:13], dobs[i, 8:13], go)
            for k in range(5):
                refs[i, 10 + k] = zr[k]


@jit
def plant_stage(p, refs, deltas, kc, g, dp, aux, fail):
    """Controllers and plant derivatives for every agent; returns a status code."""
    n = p.shape[0]
    limit = 0.5 * math.pi - 1e-9
    chain = np.empty(19)
    u = np.empty(6)
    for i in range(n):
        for k in range(12):
            if not math.isfinite(p[i, k]):
                fail[0] = i
                return 3
        if abs(p[i, 6]) >= limit or abs(p[i, 7]) >= limit:
            fail[0] = i
            return 1
        control_kernel(p[i], refs[i], deltas[i], kc, g, chain, u)
        if not chain[12] > 1e-9:
            fail[0] = i
            return 2
        plant_rhs(p[i], u, g, dp[i])
        for k in range(6):
            aux[i, k] = u[k]
        for k in range(19):
            aux[i, 6 + k] = chain[k]
    return 0


@jit
def joint_rhs(t, y, kind, lp, adj, links, deltas, kc, go, g, ideal, dy, aux, fail):
    """Derivative of the ``(n, 25)`` joint state; fills ``aux``; returns a status code."""
    n = y.shape[0]
    for i in range(n):
        for k in range(12, 25):
            if not math.isfinite(y[i, k]):
                fail[0] = i
                return 3
    lead = np.empty((5, 3))
    c = np.empty((n, 2))
    z4 = np.empty((n, 2))
    obs = y[:, 12:25]
    dobs = np.empty((n, 13))
    observer_rhs(t, obs, kind, lp, adj, links, go, lead, dobs, c, z4)
    refs = np.empty((n, 15))
    build_refs(obs, dobs, lead, go, ideal, refs)
    status = plant_stage(y[:, 0:12], refs, deltas, kc, g, dy[:, 0:12], aux, fail)
    for i in range(n):
        for k in range(13):
            dy[i, 12 + k] = dobs[i, k]
        for k in range(15):
            aux[i, 25 + k] = refs[i, k]
        aux[i, 40] = c[i, 0]
        aux[i, 41] = c[i, 1]
    return status


@jit
def joint_step(t, y, dt, kind, lp, adj, links, deltas, kc, go, g, ideal, out, fail):
    """Classical RK4 on the whole coupled system."""
    n = y.shape[0]
    aux = np.empty((n, 42))
    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    st = joint_rhs(t, y, kind, lp, adj, links, deltas, kc, go, g, ideal, k1, aux, fail)
    if st != 0:
        return st
    st = joint_rhs(t + 0.5 * dt, y + 0.5 * dt * k1, kind, lp, adj, links, deltas, kc, go, g, ideal, k2, aux, fail)
    if st != 0:
        return st
    st = joint_rhs(t + 0.5 * dt, y + 0.5 * dt * k2, kind, lp, adj, links, deltas, kc, go, g, ideal, k3, aux, fail)
    if st != 0:
        return st
    st = joint_rhs(t + dt, y + dt * k3, kind, lp, adj, links, deltas, kc, go, g, ideal, k4, aux, fail)
    if st != 0:
        return st
    out[:, :] = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return 0


# largest h * (observer stiffness) still integrated with RK4
STIFF_LIMIT = 0.5


@jit
def _cholesky_solve(a, b):
    n = a.shape[0]
    l = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            acc = a[i, j]
            for k in range(j):
                acc -= l[i, k] * l[j, k]
            if i == j:
                l[i, i] = math.sqrt(acc)
            else:
                l[i, j] = acc / l[j, j]
    y = np.empty(n)
    for i in range(n):
        acc = b[i]
        for k in range(i):
            acc -= l[i, k] * y[k]
        y[i] = acc / l[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for k in range(i + 1, n):
            acc -= l[k, i] * x[k]
        x[i] = acc / l[i, i]
    return x


@jit
def _consensus_gradient(hinv, b, c, h, g4, g5, eps, out):
    hc = hinv @ c
    for i in range(c.shape[0]):
        out[i] = hc[i] - b[i] + h * (g4 * c[i] + g5 * c[i] / (abs(c[i]) + eps))


@jit
def implicit_consensus(hinv, b, c, h, g4, g5, eps):
    """Solve ``H^-1 c + h phi(c) = b`` where ``phi(c) = g4 c + g5 c / (|c| + eps)``.

    The left side is the gradient of a strictly convex function, so Newton
    with a line search on the directional derivative (monotone along the
    step, and free of the cancellation that plagues objective values when
    ``eps`` is tiny) converges from any starting ``c``.
    """
    n = c.shape[0]
    hess = np.empty((n, n))
    grad = np.empty(n)
    trial = np.empty(n)
    for _ in range(100):
        _consensus_gradient(hinv, b, c, h, g4, g5, eps, grad)
        for i in range(n):
            for j in range(n):
                hess[i, j] = hinv[i, j]
            d = abs(c[i]) + eps
            hess[i, i] += h * (g4 + g5 * eps / (d * d))
        step = -_cholesky_solve(hess, grad)
        done = True
        for i in range(n):
            if abs(step[i]) > 1e-13 * (abs(c[i]) + eps):
                done = False
        if done:
            return c + step
        slope = abs(grad @ step)
        _consensus_gradient(hinv, b, c + step, h, g4, g5, eps, trial)
        alpha = 1.0
        if trial @ step > 0.5 * slope:
            # overshoot: bisect for a point where the directional derivative is small
            lo, hi = 0.0, 1.0
            for _ in range(60):
                alpha = 0.5 * (lo + hi)
                _consensus_gradient(hinv, b, c + alpha * step, h, g4, g5, eps, trial)
                ga = trial @ step
                if ga > 0.5 * slope:
                    hi = alpha
                elif ga < -0.5 * slope:
                    lo = alpha
                else:
                    break
        c = c + alpha * step
    return c


# L-stable, stiffly accurate 5-stage SDIRK of order 4 (diagonal 1/4)
SDIRK_A = np.array([
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.25, 0.0, 0.0, 0.0],
    [17.0 / 50.0, -1.0 / 25.0, 0.25, 0.0, 0.0],
    [371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0.0],
    [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25],
])
SDIRK_C = np.array([0.25, 0.75, 11.0 / 20.0, 0.5, 1.0])


@jit
def xy_implicit_step(t, obs, h, kind, lp, hmat, hinv, go, a_tab, c_tab):
    """Implicit step of the horizontal observers from ``t`` to ``t + h``.

    Works per axis on ``(xi, xi', xi'', s)`` where ``xi`` is the offset from
    the leader and ``s`` the sliding variable of ``stacked_s``. ``s`` obeys
    ``s' = -phi(H s) - f0`` on its own and ``xi`` is a stable linear filter of
    it, so every stage is one convex solve for ``s`` and a 3x3 solve for ``xi``.
    """
    n = obs.shape[0]
    g1, g2, g3, g4 = go[0], go[1], go[2], go[3]
    stages = c_tab.shape[0]
    gam = a_tab[0, 0]
    hg = h * gam
    denom = 1.0 + hg * g3 + hg * hg * g2 + hg * hg * hg * g1
    lead0 = np.empty((5, 3))
    leader_kernel(kind, lp, t, lead0)
    lead = np.empty((5, 3))
    out = obs.copy()
    y0 = np.empty((n, 4))
    ks = np.empty((stages, n))
    kx = np.empty((stages, n, 3))
    for ax in range(2):
        g5 = go[4 + ax]
        for i in range(n):
            for k in range(3):
                y0[i, k] = obs[i, 2 * k + ax] - lead0[k, ax]
            y0[i, 3] = (obs[i, 6 + ax] - lead0[3, ax]) + g3 * y0[i, 2] + g2 * y0[i, 1] + g1 * y0[i, 0]
        s_st = y0[:, 3].copy()
        c = hmat @ s_st
        x_st = np.empty((n, 3))
        for st in range(stages):
            ts = t + c_tab[st] * h
            leader_kernel(kind, lp, ts, lead)
            f0 = lead[4, ax] + g3 * lead[3, ax] + g2 * lead[2, ax] + g1 * lead[1, ax]
            eps = go[6] * math.exp(-go[7] * ts)
            known_s = y0[:, 3].copy()
            known_x = y0[:, 0:3].copy()
            for j in range(st):
                for i in range(n):
                    known_s[i] += h * a_tab[st, j] * ks[j, i]
                    for k in range(3):
                        known_x[i, k] += h * a_tab[st, j] * kx[j, i, k]
            c = implicit_consensus(hinv, known_s - hg * f0, c, hg, g4, g5, eps)
            s_st = hinv @ c
            for i in range(n):
                r1, r2, r3 = known_x[i, 0], known_x[i, 1], known_x[i, 2] + hg * s_st[i]
                x2 = (r3 - hg * g1 * (r1 + hg * r2) - hg * g2 * r2) / denom
                x1 = r2 + hg * x2
                x0 = r1 + hg * x1
                x_st[i, 0], x_st[i, 1], x_st[i, 2] = x0, x1, x2
                ks[st, i] = -(g4 * c[i] + g5 * c[i] / (abs(c[i]) + eps)) - f0
                kx[st, i, 0] = x1
                kx[st, i, 1] = x2
                kx[st, i, 2] = s_st[i] - g3 * x2 - g2 * x1 - g1 * x0
        # stiffly accurate: the last stage is the step result; lead holds t + h
        for i in range(n):
            x0, x1, x2 = x_st[i, 0], x_st[i, 1], x_st[i, 2]
            out[i, ax] = x0 + lead[0, ax]
            out[i, 2 + ax] = x1 + lead[1, ax]
            out[i, 4 + ax] = x2 + lead[2, ax]
            out[i, 6 + ax] = s_st[i] - g3 * x2 - g2 * x1 - g1 * x0 + lead[3, ax]
    return out


@jit
def _rk4_observers(t, obs, h, kind, lp, adj, links, go):
    n = obs.shape[0]
    lead = np.empty((5, 3))
    c = np.empty((n, 2))
    z4 = np.empty((n, 2))
    k1 = np.empty((n, 13))
    k2 = np.empty((n, 13))
    k3 = np.empty((n, 13))
    k4 = np.empty((n, 13))
    observer_rhs(t, obs, kind, lp, adj, links, go, lead, k1, c, z4)
    observer_rhs(t + 0.5 * h, obs + 0.5 * h * k1, kind, lp, adj, links, go, lead, k2, c, z4)
    observer_rhs(t + 0.5 * h, obs + 0.5 * h * k2, kind, lp, adj, links, go, lead, k3, c, z4)
    observer_rhs(t + h, obs + h * k3, kind, lp, adj, links, go, lead, k4, c, z4)
    return obs + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@jit
def _rk4_altitude(zs, h, z0, adj, links, go):
    n = zs.shape[0]
    k1 = np.empty((n, 5))
    k2 = np.empty((n, 5))
    k3 = np.empty((n, 5))
    k4 = np.empty((n, 5))
    z_kernel(zs, z0, adj, links, go, k1)
    z_kernel(zs + 0.5 * h * k1, z0, adj, links, go, k2)
    z_kernel(zs + 0.5 * h * k2, z0, adj, links, go, k3)
    z_kernel(zs + h * k3, z0, adj, links, go, k4)
    return zs + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@jit
def observer_stiffness(t, go, lam_max):
    """Largest rate of the linearised horizontal observer at time ``t``."""
    eps = go[6] * math.exp(-go[7] * t)
    return (go[3] + max(go[4], go[5]) / eps) * lam_max


@jit
def advance_observers(t, obs, h, count, kind, lp, adj, links, go, hmat, hinv, lam_max):
    """``count`` observer steps of size ``h``: RK4 while non-stiff, SDIRK after."""
    z0 = np.empty((5, 3))
    leader_kernel(kind, lp, t, z0)
    for m in range(count):
        tm = t + m * h
        if h * observer_stiffness(tm + h, go, lam_max) <= STIFF_LIMIT:
            obs = _rk4_observers(tm, obs, h, kind, lp, adj, links, go)
        else:
            nxt = xy_implicit_step(tm, obs, h, kind, lp, hmat, hinv, go, SDIRK_A, SDIRK_C)
            nxt[:, 8:13] = _rk4_altitude(obs[:, 8:13], h, z0[0, 2], adj, links, go)
            obs = nxt
    return obs


@jit
def _refs_at(t, obs, kind, lp, adj, links, go, ideal, refs):
    n = obs.shape[0]
    lead = np.empty((5, 3))
    c = np.empty((n, 2))
    z4 = np.empty((n, 2))
    dobs = np.empty((n, 13))
    observer_rhs(t, obs, kind, lp, adj, links, go, lead, dobs, c, z4)
    build_refs(obs, dobs, lead, go, ideal, refs)


@jit
def multirate_step(t, y, dt, substeps, kind, lp, adj, links, deltas, kc, go, g, ideal, hmat, hinv, lam_max,
                   out, fail):
    """RK4 for the plants with the (autonomous) observers sub-stepped at ``dt / substeps``.

    The observer trajectory is integrated first; the plant stages then read
    the references at ``t``, ``t + dt/2`` and ``t + dt`` from it.
    """
    n = y.shape[0]
    for i in range(n):
        for k in range(12, 25):
            if not math.isfinite(y[i, k]):
                fail[0] = i
                return 3
    half = substeps // 2
    h = dt / substeps
    obs0 = y[:, 12:25].copy()
    obs_mid = advance_observers(t, obs0, h, half, kind, lp, adj, links, go, hmat, hinv, lam_max)
    obs_end = advance_observers(t + half * h, obs_mid, h, substeps - half, kind, lp, adj, links, go,
                                hmat, hinv, lam_max)
    r0 = np.empty((n, 15))
    r_mid = np.empty((n, 15))
    r_end = np.empty((n, 15))
    _refs_at(t, obs0, kind, lp, adj, links, go, ideal, r0)
    _refs_at(t + 0.5 * dt, obs_mid, kind, lp, adj, links, go, ideal, r_mid)
    _refs_at(t + dt, obs_end, kind, lp, adj, links, go, ideal, r_end)

    p = y[:, 0:12].copy()
    aux = np.empty((n, 42))
    k1 = np.empty((n, 12))
    k2 = np.empty((n, 12))
    k3 = np.empty((n, 12))
    k4 = np.empty((n, 12))
    st = plant_stage(p, r0, deltas, kc, g, k1, aux, fail)
    if st != 0:
        return st
    st = plant_stage(p + 0.5 * dt * k1, r_mid, deltas, kc, g, k2, aux, fail)
    if st != 0:
        return st
    st = plant_stage(p + 0.5 * dt * k2, r_mid, deltas, kc, g, k3, aux, fail)
    if st != 0:
        return st
    st = plant_stage(p + dt * k3, r_end, deltas, kc, g, k4, aux, fail)
    if st != 0:
        return st
    out[:, 0:12] = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out[:, 12:25] = obs_end
    return 0


def rk4_step(f: Callable[[float, NDArray], NDArray], t: float, y: NDArray, dt: float) -> NDArray:
    """One classical fourth-order Runge-Kutta step."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def initial_joint_state(sc: Scenario) -> NDArray[np.float64]:
    """Plant states from the scenario; observers start on the agent's own position at rest."""
    y = np.zeros((sc.n, ROW_SIZE))
    for i, s in enumerate(sc.initial):
        y[i, :STATE_SIZE] = s.as_array()
        y[i, 12] = s.x
        y[i, 13] = s.y
        y[i, 20] = y[i, 22] = y[i, 24] = s.z
    return y


class ClosedLoop:
    """The coupled vector field and stepper of one scenario."""

    def __init__(self, sc: Scenario):
        self.scenario = sc
        self.kind, self.lp = sc.leader.kernel_params()
        self.adj = np.ascontiguousarray(sc.graph.adjacency, dtype=float)
        self.links = np.asarray(sc.graph.leader_links, dtype=float)
        self.deltas = np.asarray(sc.deltas, dtype=float)
        self.kc = sc.controller_gains.as_array()
        self.go = sc.observer_gains.as_array()
        self.g = float(sc.g)
        self.ideal = sc.mode == "ideal-reference"
        self.hmat = h_matrix(sc.graph)
        self.hinv = np.linalg.inv(self.hmat)
        self.lam_max = float(np.linalg.eigvalsh(self.hmat)[-1])
        self._fail = np.zeros(1, dtype=np.int64)

    def _raise(self, status: int, t: float, y: NDArray) -> None:
        i = int(self._fail[0])
        if status == SINGULAR:
            tilt = np.degrees(np.abs(y[i, 6:8]).max())
            raise AttitudeSingularity(
                f"agent {i + 1}: roll/pitch singularity within the step from t={t:.6g} "
                f"(tilt {tilt:.4f} deg at step start)", i, t)
        if status == DEGENERATE:
            raise ThrustDegenerate(f"agent {i + 1}: thrust term collapsed within the step from t={t:.6g}", i, t)
        raise FloatingPointError(f"agent {i + 1}: non-finite state within the step from t={t:.6g}")

    def evaluate(self, t: float, y: NDArray) -> tuple[NDArray, NDArray]:
        """Return ``(dy, aux)`` at ``(t, y)``."""
        dy = np.empty_like(y)
        aux = np.empty((y.shape[0], AUX_SIZE))
        status = joint_rhs(float(t), y, self.kind, self.lp, self.adj, self.links, self.deltas,
                           self.kc, self.go, self.g, self.ideal, dy, aux, self._fail)
        if status != OK:
            self._raise(status, t, y)
        return dy, aux

    def __call__(self, t: float, y: NDArray) -> NDArray:
        return self.evaluate(t, y)[0]

    def advance(self, y: NDArray, t: float, dt: float | None = None) -> NDArray:
        """One step of the scenario's integration scheme."""
        dt = self.scenario.dt if dt is None else dt
        out = np.empty_like(y)
        substeps = self.scenario.observer_substeps
        if substeps > 1:
            status = multirate_step(float(t), y, float(dt), int(substeps), self.kind, self.lp, self.adj,
                                    self.links, self.deltas, self.kc, self.go, self.g, self.ideal,
                                    self.hmat, self.hinv, self.lam_max, out, self._fail)
        else:
            status = joint_step(float(t), y, float(dt), self.kind, self.lp, self.adj, self.links,
                                self.deltas, self.kc, self.go, self.g, self.ideal, out, self._fail)
        if status != OK:
            self._raise(status, t, y)
        return out


def step(y: NDArray, t: float, sc: Scenario, system: ClosedLoop | None = None) -> NDArray:
    """Advance the joint state from ``t`` to ``t + sc.dt``."""
    system = system or ClosedLoop(sc)
    return system.advance(np.asarray(y, dtype=float), t)


@dataclass
class Trace:
    """Uniformly sampled record of a run.

    ``states`` is ``(m, n, 25)``, ``aux`` is ``(m, n, 42)`` (controls, error
    chain, reference and consensus error evaluated at the sample), ``leader``
    is ``(m, 5, 3)``.
    """

    scenario: Scenario
    t: NDArray[np.float64]
    states: NDArray[np.float64]
    aux: NDArray[np.float64]
    leader: NDArray[np.float64]
    completed: bool = True

    def __len__(self) -> int:
        return len(self.t)

    @property
    def plant(self) -> NDArray:
        return self.states[:, :, :STATE_SIZE]

    @property
    def positions(self) -> NDArray:
        return self.states[:, :, 0:3]

    @property
    def attitudes(self) -> NDArray:
        return self.states[:, :, 6:9]

    @property
    def controls(self) -> NDArray:
        """``(m, n, 4)`` inputs ``u1..u4``."""
        return self.aux[:, :, 0:4]

    @property
    def outer(self) -> NDArray:
        """``(m, n, 2)`` linear outer-law inputs ``(ux, uy)``."""
        return self.aux[:, :, 4:6]

    @property
    def chain(self) -> NDArray:
        return self.aux[:, :, AUX_CHAIN]

    @property
    def ubar(self) -> NDArray:
        return self.aux[:, :, UBAR_COL]

    @property
    def reference(self) -> NDArray:
        """``(m, n, 15)`` tracking references (see controller layout)."""
        return self.aux[:, :, AUX_REF]

    @property
    def reference_position(self) -> NDArray:
        ref = self.reference
        return np.stack([ref[:, :, 0], ref[:, :, 5], ref[:, :, 10]], axis=-1)

    @property
    def consensus_error(self) -> NDArray:
        return self.aux[:, :, AUX_C]

    @property
    def observer_xy(self) -> NDArray:
        return self.states[:, :, XY]

    @property
    def observer_z(self) -> NDArray:
        return self.states[:, :, ZOBS]

    @property
    def formation_error(self) -> NDArray:
        """``p_i - p0 - Delta_i`` as ``(m, n, 3)``."""
        deltas = np.asarray(self.scenario.deltas)
        return self.positions - self.leader[:, None, 0, :] - deltas[None, :, :]

    @property
    def formation_error_norm(self) -> NDArray:
        return np.linalg.norm(self.formation_error, axis=-1)

    @property
    def tracking_error_norm(self) -> NDArray:
        """``||p_i - p_id - Delta_i||`` as ``(m, n)``."""
        deltas = np.asarray(self.scenario.deltas)
        return np.linalg.norm(self.positions - self.reference_position - deltas[None], axis=-1)

    @property
    def observer_error_norm(self) -> NDArray:
        """``||p_id - p0||`` as ``(m, n)``."""
        return np.linalg.norm(self.reference_position - self.leader[:, None, 0, :], axis=-1)

    def lyapunov(self) -> NDArray:
        """``W(t) = 0.5 c^T (H kron I2)^{-1} c`` at every sample."""
        hk = np.kron(h_matrix(self.scenario.graph), np.eye(2))
        c = self.consensus_error.reshape(len(self), -1)
        return 0.5 * np.einsum("ij,ij->i", c, np.linalg.solve(hk, c.T).T)

    def lyapunov_envelope(self) -> NDArray:
        sc = self.scenario
        h = h_matrix(sc.graph)
        q = decay_rate(sc.observer_gains, h)
        sigma0 = forcing_level(sc.observer_gains, sc.sigma(), sc.n)
        w = self.lyapunov()
        return envelope(self.t, w[0], q, sc.observer_gains.lam, sigma0)

    def stacked_residual(self) -> NDArray:
        """``max |c - (H kron I2) s|`` per sample, ``s`` rebuilt from the observer states."""
        hk = np.kron(h_matrix(self.scenario.graph), np.eye(2))
        go = self.scenario.observer_gains
        out = np.empty(len(self))
        for k in range(len(self)):
            s = stacked_s(self.observer_xy[k], self.leader[k], go)
            out[k] = np.abs(self.consensus_error[k].reshape(-1) - hk @ s).max()
        return out


def run(sc: Scenario, validate: bool = True) -> Trace:
    """Integrate ``sc`` to ``t_final`` and record every ``record_stride`` steps.

    The final step is always recorded. On a controller error or a non-finite
    state a :class:`SimulationError` is raised carrying the partial trace.
    """
    if validate:
        validate_scenario(sc)
    system = ClosedLoop(sc)
    n_steps = sc.n_steps
    record = [k for k in range(0, n_steps + 1, sc.record_stride)]
    if record[-1] != n_steps:
        record.append(n_steps)
    m = len(record)
    ts = np.empty(m)
    states = np.empty((m, sc.n, ROW_SIZE))
    aux = np.empty((m, sc.n, AUX_SIZE))
    leader = np.empty((m, 5, 3))

    def partial(count: int) -> Trace:
        return Trace(sc, ts[:count].copy(), states[:count].copy(), aux[:count].copy(), leader[:count].copy(),
                     completed=False)

    y = initial_joint_state(sc)
    slot = 0
    k = 0
    try:
        while True:
            t = k * sc.dt
            if slot < m and record[slot] == k:
                ts[slot] = t
                states[slot] = y
                aux[slot] = system.evaluate(t, y)[1]
                leader[slot] = sc.leader.derivatives(t)
                slot += 1
            if k == n_steps:
                break
            y = system.advance(y, t)
            k += 1
    except (AttitudeSingularity, ThrustDegenerate, FloatingPointError) as exc:
        raise SimulationError(f"run aborted at t={k * sc.dt:.6g}: {exc}", partial(slot), exc) from exc
    return Trace(sc, ts, states, aux, leader)


def fourth_derivative(f: NDArray, h: float) -> NDArray:
    """Fourth-order-accurate 7-point central estimate of ``f''''`` on a uniform grid.

    Returns values for ``f[3:-3]``.
    """
    f = np.asarray(f, dtype=float)
    return (-f[:-6] + 12 * f[1:-5] - 39 * f[2:-4] + 56 * f[3:-3] - 39 * f[4:-2] + 12 * f[5:-1] - f[6:]) / (6 * h**4)


@dataclass
class MonitorReport:
    min_ubar: float
    ubar_bound: float
    max_tilt: float
    final_yaw: float
    fl_residual: float
    lyapunov_ratio: float
    stacked_residual: float
    final_formation_error: float

    @property
    def checks(self) -> dict[str, bool | None]:
        """Pass/fail per monitor; ``None`` when the trace is too short to evaluate it."""
        return {
            "thrust_positive": self.min_ubar > 0 and self.min_ubar >= self.ubar_bound,
            "attitude_bounded": self.max_tilt < math.pi / 2,
            "yaw_converged": self.final_yaw < 1e-3,
            "fl_exactness": None if math.isnan(self.fl_residual) else self.fl_residual < 1e-3,
            "lyapunov_envelope": self.lyapunov_ratio <= 1.05,
            "stacked_identity": self.stacked_residual < 1e-10,
        }

    @property
    def passed(self) -> bool:
        return all(v is not False for v in self.checks.values())

    def to_dict(self) -> dict:
        out = {k: (None if math.isnan(v) else float(v)) for k, v in self.__dict__.items()}
        out["checks"] = self.checks
        out["passed"] = self.passed
        return out


def fl_exactness_residual(trace: Trace, window: tuple[float, float] | None = None) -> float:
    """Largest mismatch between the finite-difference ``e''''`` and the commanded ``(ux, uy)``.

    Normalised by the largest ``|ux|``/``|uy|`` in the window, per axis and
    agent; the worst value is returned.
    """
    t = trace.t
    h = t[1] - t[0]
    if window is None:
        window = (5.0, trace.scenario.t_final - 5.0)
    uniform = np.isclose(np.diff(t), h, rtol=1e-9, atol=1e-12)
    usable = len(t) if uniform.all() else int(np.argmin(uniform)) + 1
    chain = trace.chain[:usable]
    outer = trace.outer[:usable]
    tc = t[3:usable - 3]
    mask = (tc >= window[0]) & (tc <= window[1])
    if not mask.any():
        return float("nan")
    worst = 0.0
    for i in range(trace.scenario.n):
        for e_col, u_col in ((0, 0), (4, 1)):
            fd = fourth_derivative(chain[:, i, e_col], h)[mask]
            u = outer[3:usable - 3, i, u_col][mask]
            scale = np.abs(u).max()
            if scale == 0:
                continue
            worst = max(worst, float(np.abs(fd - u).max() / scale))
    return worst


def monitors(trace: Trace) -> MonitorReport:
    if len(trace) == 0:
        raise ValueError("empty trace")
    sc = trace.scenario
    ubar_bound = sc.g - sc.controller_gains.k1z - sc.controller_gains.k3z - sc.zdd_sup()
    w = trace.lyapunov()
    env = trace.lyapunov_envelope()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(env > 0, w / env, np.where(w > 0, np.inf, 0.0))
    return MonitorReport(
        min_ubar=float(trace.ubar.min()),
        ubar_bound=float(ubar_bound),
        max_tilt=float(np.abs(trace.attitudes[:, :, :2]).max()),
        final_yaw=float(np.abs(trace.attitudes[-1, :, 2]).max()),
        fl_residual=fl_exactness_residual(trace) if len(trace) > 7 else float("nan"),
        lyapunov_ratio=float(ratio.max()),
        stacked_residual=float(trace.stacked_residual().max()),
        final_formation_error=float(trace.formation_error_norm[-1].max()),
    )


def lambda_min_h(sc: Scenario) -> float:
    return min_eigenvalue(h_matrix(sc.graph))
