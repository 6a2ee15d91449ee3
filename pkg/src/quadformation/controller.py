"""Local tracking controller based on non-regular feedback linearization.

The controller regulates the 12 plant states directly: a PD yaw law, a
bounded-tanh altitude law that keeps the thrust term strictly positive, and a
feedback-linearizing roll/pitch law that turns each horizontal error into a
fourth-order integrator driven by a linear outer law.

All error derivatives above the velocity level are reconstructed from the
model, never by differentiating measurements.

Array layouts used by the kernels:

* state: the 12 entries of :class:`~quadformation.plant.QuadState`.
* reference (15): ``x_id .. x_id''''``, ``y_id .. y_id''''``, ``z_id .. z_id''''``.
* chain (19): see :data:`CHAIN_FIELDS`.
* control (6): ``u1, u2, u3, u4, ux, uy``.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np
from numpy.typing import NDArray

from .plant import GRAVITY, QuadState
from .stability import is_hurwitz
from ._jit import jit

SINGULARITY_MARGIN = 1e-9
THRUST_FLOOR = 1e-9

CHAIN_FIELDS = (
    "ex", "ex1", "ex2", "ex3",
    "ey", "ey1", "ey2", "ey3",
    "ez", "ez1", "ez2", "ez3",
    "ubar", "ubar1", "ubar2",
    "xi1x", "xi1y", "xi2x", "xi2y",
)
CHAIN_SIZE = len(CHAIN_FIELDS)
REF_SIZE = 15
CONTROL_SIZE = 6


class AttitudeSingularity(RuntimeError):
    """Roll or pitch reached +-pi/2, where the control law is undefined."""

    def __init__(self, message: str, agent: int | None = None, t: float | None = None):
        super().__init__(message)
        self.agent = agent
        self.t = t


class ThrustDegenerate(RuntimeError):
    """The intermediate thrust term dropped to zero (misconfigured gains)."""

    def __init__(self, message: str, agent: int | None = None, t: float | None = None):
        super().__init__(message)
        self.agent = agent
        self.t = t


@dataclass(frozen=True)
class ControllerGains:
    k1z: float = 1.0
    k2z: float = 0.5
    k3z: float = 0.5
    k1x: float = 0.2
    k2x: float = 1.6
    k3x: float = 3.6
    k4x: float = 3.2
    k1y: float = 0.2
    k2y: float = 1.6
    k3y: float = 3.6
    k4y: float = 3.2
    k1psi: float = 0.5
    k2psi: float = 0.5

    def as_array(self) -> NDArray[np.float64]:
        return np.array(astuple(self), dtype=float)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "ControllerGains":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown controller gains: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def check_controller_gains(gains: ControllerGains, zdd_sup: float = 0.0, g: float = GRAVITY) -> list[str]:
    """Return the violated gain conditions (empty when all hold).

    ``zdd_sup`` bounds ``|z_id''|`` over the run; the altitude gains must
    satisfy ``k1z + k3z < g - zdd_sup`` so the thrust term stays positive.
    """
    problems = []
    for f in fields(gains):
        if not getattr(gains, f.name) > 0:
            problems.append(f"{f.name} > 0")
    if not gains.k1z + gains.k3z < g - zdd_sup:
        problems.append(
            f"k1z + k3z < g - sup|z_id''| ({gains.k1z + gains.k3z:g} >= {g - zdd_sup:g})"
        )
    for axis in ("x", "y"):
        k1, k2, k3, k4 = (getattr(gains, f"k{i}{axis}") for i in range(1, 5))
        if not is_hurwitz([1.0, k4, k3, k2, k1]):
            problems.append(f"s^4 + k4{axis} s^3 + k3{axis} s^2 + k2{axis} s + k1{axis} Hurwitz")
    return problems


@dataclass(frozen=True)
class TrackingRef:
    """Reference position derivatives, each a length-5 array (orders 0..4)."""

    x: NDArray[np.float64]
    y: NDArray[np.float64]
    z: NDArray[np.float64]

    def as_array(self) -> NDArray[np.float64]:
        return np.concatenate([self.x, self.y, self.z]).astype(float)

    @classmethod
    def from_array(cls, values) -> "TrackingRef":
        values = np.asarray(values, dtype=float)
        return cls(values[0:5].copy(), values[5:10].copy(), values[10:15].copy())

    @classmethod
    def from_leader(cls, derivs: NDArray[np.float64]) -> "TrackingRef":
        """Build from a ``(5, 3)`` derivative table."""
        derivs = np.asarray(derivs, dtype=float)
        return cls(derivs[:, 0].copy(), derivs[:, 1].copy(), derivs[:, 2].copy())


@dataclass(frozen=True)
class ErrorChain:
    ex: float
    ex1: float
    ex2: float
    ex3: float
    ey: float
    ey1: float
    ey2: float
    ey3: float
    ez: float
    ez1: float
    ez2: float
    ez3: float
    ubar: float
    ubar1: float
    ubar2: float
    xi1x: float
    xi1y: float
    xi2x: float
    xi2y: float

    def as_array(self) -> NDArray[np.float64]:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values) -> "ErrorChain":
        return cls(*map(float, values))

    @property
    def xi1(self) -> NDArray[np.float64]:
        return np.array([self.xi1x, self.xi1y])

    @property
    def xi2(self) -> NDArray[np.float64]:
        return np.array([self.xi2x, self.xi2y])


# --------------------------------------------------------------------------
# kernels


@jit
def _mat_vec(a00, a01, a10, a11, v0, v1):
    return a00 * v0 + a01 * v1, a10 * v0 + a11 * v1


@jit
def chain_kernel(s, ref, delta, kc, g, chain):
    """Fill ``chain`` and return ``u4``."""
    k1z, k2z, k3z = kc[0], kc[1], kc[2]
    phi, theta, psi = s[6], s[7], s[8]
    p, q, r = s[9], s[10], s[11]

    u4 = -kc[11] * psi - kc[12] * r

    # altitude channel
    ez = s[2] - ref[10] - delta[2]
    ez1 = s[5] - ref[11]
    a = ez1 + k2z * ez
    ta = math.tanh(a)
    tz = math.tanh(ez1)
    sa = 1.0 - ta * ta
    sz = 1.0 - tz * tz
    ez2 = -k1z * ta - k3z * tz
    ubar = g + ref[12] + ez2
    a1 = ez2 + k2z * ez1
    ez3 = -k1z * sa * a1 - k3z * sz * ez2
    ubar1 = ref[13] + ez3
    a2 = ez3 + k2z * ez2
    ez4 = (2.0 * k1z * sa * ta * a1 * a1 - k1z * sa * a2
           + 2.0 * k3z * sz * tz * ez2 * ez2 - k3z * sz * ez3)
    ubar2 = ref[14] + ez4

    cph, sph = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cps, sps = math.cos(psi), math.sin(psi)
    tth = sth / cth
    tph = sph / cph
    secth = 1.0 / cth
    secph = 1.0 / cph

    # S @ [tan(theta), tan(phi)/cos(theta)]
    st0 = tth
    st1 = -tph * secth

    m01 = secth * secth
    m10 = secph * secph * secth
    m11 = tph * tth * secth
    md01 = 2.0 * q * secth * secth * tth
    md10 = 2.0 * p * secph * secph * tph * secth + q * secph * secph * secth * tth
    md11 = p * secph * secph * tth * secth + q * tph * (secth ** 3 + tth * tth * secth)

    # S @ M @ [p, q] and S @ dM/dt @ [p, q]
    smw0, smw1 = m01 * q, -(m10 * p + m11 * q)
    smdw0, smdw1 = md01 * q, -(md10 * p + md11 * q)

    # R2(psi), dR2/dt = r J R2, d2R2/dt2 = u4 J R2 - r^2 R2 with J = R2(pi/2)
    r00, r01, r10, r11 = cps, -sps, sps, cps
    j00, j01, j10, j11 = -sps, -cps, cps, -sps
    rd00, rd01, rd10, rd11 = r * j00, r * j01, r * j10, r * j11
    rdd00 = u4 * j00 - r * r * r00
    rdd01 = u4 * j01 - r * r * r01
    rdd10 = u4 * j10 - r * r * r10
    rdd11 = u4 * j11 - r * r * r11

    rst0, rst1 = _mat_vec(r00, r01, r10, r11, st0, st1)
    ex2 = ubar * rst0 - ref[2]
    ey2 = ubar * rst1 - ref[7]

    # Xi1 = (ubar' R + ubar R') S T
    b00 = ubar1 * r00 + ubar * rd00
    b01 = ubar1 * r01 + ubar * rd01
    b10 = ubar1 * r10 + ubar * rd10
    b11 = ubar1 * r11 + ubar * rd11
    xi1x, xi1y = _mat_vec(b00, b01, b10, b11, st0, st1)

    rsmw0, rsmw1 = _mat_vec(r00, r01, r10, r11, smw0, smw1)
    ex3 = xi1x + ubar * rsmw0 - ref[3]
    ey3 = xi1y + ubar * rsmw1 - ref[8]

    # Xi2 = (ubar'' R + 2 ubar' R' + ubar R'') S T + 2 (ubar' R + ubar R') S M w + ubar R S M' w
    c00 = ubar2 * r00 + 2.0 * ubar1 * rd00 + ubar * rdd00
    c01 = ubar2 * r01 + 2.0 * ubar1 * rd01 + ubar * rdd01
    c10 = ubar2 * r10 + 2.0 * ubar1 * rd10 + ubar * rdd10
    c11 = ubar2 * r11 + 2.0 * ubar1 * rd11 + ubar * rdd11
    t0, t1 = _mat_vec(c00, c01, c10, c11, st0, st1)
    w0, w1 = _mat_vec(b00, b01, b10, b11, smw0, smw1)
    v0, v1 = _mat_vec(r00, r01, r10, r11, smdw0, smdw1)
    xi2x = t0 + 2.0 * w0 + ubar * v0
    xi2y = t1 + 2.0 * w1 + ubar * v1

    chain[0] = s[0] - ref[0] - delta[0]
    chain[1] = s[3] - ref[1]
    chain[2] = ex2
    chain[3] = ex3
    chain[4] = s[1] - ref[5] - delta[1]
    chain[5] = s[4] - ref[6]
    chain[6] = ey2
    chain[7] = ey3
    chain[8] = ez
    chain[9] = ez1
    chain[10] = ez2
    chain[11] = ez3
    chain[12] = ubar
    chain[13] = ubar1
    chain[14] = ubar2
    chain[15] = xi1x
    chain[16] = xi1y
    chain[17] = xi2x
    chain[18] = xi2y
    return u4


@jit
def attitude_kernel(phi, theta, psi, ref, chain, ux, uy):
    """Roll/pitch accelerations that cancel Xi2 and inject ``(ux, uy)``."""
    ubar = chain[12]
    v0 = ref[4] - chain[17] + ux
    v1 = ref[9] - chain[18] + uy
    cps, sps = math.cos(psi), math.sin(psi)
    # R2(psi)^T v, then S
    w0 = cps * v0 + sps * v1
    w1 = -(-sps * v0 + cps * v1)
    cph, cth = math.cos(phi), math.cos(theta)
    mi00 = -0.25 * math.sin(2.0 * phi) * math.sin(2.0 * theta)
    mi01 = cph * cph * cth
    mi10 = cth * cth
    u2 = (mi00 * w0 + mi01 * w1) / ubar
    u3 = mi10 * w0 / ubar
    return u2, u3


@jit
def control_kernel(s, ref, delta, kc, g, chain, u):
    """Full local control law; fills ``chain`` and ``u = (u1, u2, u3, u4, ux, uy)``."""
    u4 = chain_kernel(s, ref, delta, kc, g, chain)
    ux = -kc[3] * chain[0] - kc[4] * chain[1] - kc[5] * chain[2] - kc[6] * chain[3]
    uy = -kc[7] * chain[4] - kc[8] * chain[5] - kc[9] * chain[6] - kc[10] * chain[7]
    u2, u3 = attitude_kernel(s[6], s[7], s[8], ref, chain, ux, uy)
    u[0] = chain[12] / (math.cos(s[7]) * math.cos(s[6]))
    u[1] = u2
    u[2] = u3
    u[3] = u4
    u[4] = ux
    u[5] = uy


# --------------------------------------------------------------------------
# public operations


def _state_array(s) -> NDArray[np.float64]:
    return s.as_array() if isinstance(s, QuadState) else np.asarray(s, dtype=float)


def _ref_array(r) -> NDArray[np.float64]:
    return r.as_array() if isinstance(r, TrackingRef) else np.asarray(r, dtype=float)


def check_attitude(phi: float, theta: float) -> None:
    limit = math.pi / 2 - SINGULARITY_MARGIN
    if abs(phi) >= limit or abs(theta) >= limit:
        raise AttitudeSingularity(f"roll/pitch at singularity: phi={phi:.6g}, theta={theta:.6g}")


def error_chain(s, r, delta, gains: ControllerGains, g: float = GRAVITY) -> ErrorChain:
    """Tracking errors and their model-based derivatives for one vehicle."""
    s_arr = _state_array(s)
    check_attitude(s_arr[6], s_arr[7])
    chain = np.empty(CHAIN_SIZE)
    chain_kernel(s_arr, _ref_array(r), np.asarray(delta, dtype=float), gains.as_array(), float(g), chain)
    if chain[12] <= THRUST_FLOOR:
        raise ThrustDegenerate(f"intermediate thrust {chain[12]:.3g} <= {THRUST_FLOOR}")
    return ErrorChain.from_array(chain)


def yaw_control(psi: float, psidot: float, gains: ControllerGains) -> float:
    return -gains.k1psi * psi - gains.k2psi * psidot


def thrust_control(chain: ErrorChain, s) -> float:
    s_arr = _state_array(s)
    check_attitude(s_arr[6], s_arr[7])
    if chain.ubar <= THRUST_FLOOR:
        raise ThrustDegenerate(f"intermediate thrust {chain.ubar:.3g} <= {THRUST_FLOOR}")
    return chain.ubar / (math.cos(s_arr[7]) * math.cos(s_arr[6]))


def outer_control(chain: ErrorChain, gains: ControllerGains) -> tuple[float, float]:
    """Linear law placing the poles of each fourth-order error integrator."""
    ux = -gains.k1x * chain.ex - gains.k2x * chain.ex1 - gains.k3x * chain.ex2 - gains.k4x * chain.ex3
    uy = -gains.k1y * chain.ey - gains.k2y * chain.ey1 - gains.k3y * chain.ey2 - gains.k4y * chain.ey3
    return ux, uy


def attitude_control(chain: ErrorChain, s, r, ux: float, uy: float) -> tuple[float, float]:
    s_arr = _state_array(s)
    check_attitude(s_arr[6], s_arr[7])
    if chain.ubar <= THRUST_FLOOR:
        raise ThrustDegenerate(f"intermediate thrust {chain.ubar:.3g} <= {THRUST_FLOOR}")
    u2, u3 = attitude_kernel(s_arr[6], s_arr[7], s_arr[8], _ref_array(r), chain.as_array(), float(ux), float(uy))
    return float(u2), float(u3)


def compute_control(s, r, delta, gains: ControllerGains, g: float = GRAVITY):
    """Evaluate the whole local law.

    Returns:
        ``(u, chain, (ux, uy))`` with ``u`` the array ``[u1, u2, u3, u4]``.
    """
    chain = error_chain(s, r, delta, gains, g)
    ux, uy = outer_control(chain, gains)
    s_arr = _state_array(s)
    u2, u3 = attitude_control(chain, s_arr, r, ux, uy)
    u = np.array([thrust_control(chain, s_arr), u2, u3, yaw_control(s_arr[8], s_arr[11], gains)])
    return u, chain, (ux, uy)


def m_matrix(phi: float, theta: float) -> NDArray[np.float64]:
    """Jacobian of ``[tan(theta), tan(phi)/cos(theta)]`` w.r.t. ``(phi, theta)``."""
    sec_th, sec_ph = 1 / math.cos(theta), 1 / math.cos(phi)
    return np.array([
        [0.0, sec_th**2],
        [sec_ph**2 * sec_th, math.tan(phi) * math.tan(theta) * sec_th],
    ])


def m_inverse(phi: float, theta: float) -> NDArray[np.float64]:
    return np.array([
        [-0.25 * math.sin(2 * phi) * math.sin(2 * theta), math.cos(phi) ** 2 * math.cos(theta)],
        [math.cos(theta) ** 2, 0.0],
    ])


def m_matrix_rate(phi: float, theta: float, phidot: float, thetadot: float) -> NDArray[np.float64]:
    """Time derivative of :func:`m_matrix` along ``(phidot, thetadot)``."""
    sec_th, sec_ph = 1 / math.cos(theta), 1 / math.cos(phi)
    t_th, t_ph = math.tan(theta), math.tan(phi)
    return np.array([
        [0.0, 2 * thetadot * sec_th**2 * t_th],
        [
            2 * phidot * sec_ph**2 * t_ph * sec_th + thetadot * sec_ph**2 * sec_th * t_th,
            phidot * sec_ph**2 * t_th * sec_th + thetadot * t_ph * (sec_th**3 + t_th**2 * sec_th),
        ],
    ])


def steady_state_attitude(xdd: float, ydd: float, zdd: float, g: float = GRAVITY) -> tuple[float, float]:
    """Roll and pitch that hold the reference acceleration with zero yaw."""
    if not abs(zdd) < g:
        raise ValueError(f"|zdd| must be below g, got {zdd}")
    phi = math.atan(-ydd / math.sqrt(xdd**2 + (g + zdd) ** 2))
    theta = math.atan(xdd / (g + zdd))
    return phi, theta
