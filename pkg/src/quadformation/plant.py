"""Simplified quadrotor model driven by thrust and angular-acceleration inputs."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np
from numpy.typing import NDArray

from ._jit import jit

GRAVITY = 9.81
STATE_SIZE = 12


@dataclass(frozen=True)
class QuadState:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0
    phidot: float = 0.0
    thetadot: float = 0.0
    psidot: float = 0.0

    def as_array(self) -> NDArray[np.float64]:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, values) -> "QuadState":
        values = np.asarray(values, dtype=float)
        if values.shape != (STATE_SIZE,):
            raise ValueError(f"expected {STATE_SIZE} values, got shape {values.shape}")
        return cls(*map(float, values))

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class ControlInput:
    """``u1`` is thrust per unit mass (m/s^2); ``u2..u4`` are angular accelerations."""

    u1: float
    u2: float = 0.0
    u3: float = 0.0
    u4: float = 0.0

    def as_array(self) -> NDArray[np.float64]:
        return np.array(astuple(self), dtype=float)


@jit
def _translational_accel(u1, phi, theta, psi, g):
    cphi, sphi = math.cos(phi), math.sin(phi)
    cth, sth = math.cos(theta), math.sin(theta)
    cpsi, spsi = math.cos(psi), math.sin(psi)
    ax = u1 * (cpsi * sth * cphi + spsi * sphi)
    ay = u1 * (spsi * sth * cphi - cpsi * sphi)
    az = u1 * cth * cphi - g
    return ax, ay, az


@jit
def plant_rhs(s, u, g, out):
    """Write the derivative of a 12-vector state into ``out``."""
    ax, ay, az = _translational_accel(u[0], s[6], s[7], s[8], g)
    out[0] = s[3]
    out[1] = s[4]
    out[2] = s[5]
    out[3] = ax
    out[4] = ay
    out[5] = az
    out[6] = s[9]
    out[7] = s[10]
    out[8] = s[11]
    out[9] = u[1]
    out[10] = u[2]
    out[11] = u[3]


def state_derivative(s: QuadState | NDArray, u: ControlInput | NDArray, g: float = GRAVITY) -> NDArray[np.float64]:
    """Time derivative of the 12 states, in :class:`QuadState` field order."""
    s_arr = s.as_array() if isinstance(s, QuadState) else np.asarray(s, dtype=float)
    u_arr = u.as_array() if isinstance(u, ControlInput) else np.asarray(u, dtype=float)
    out = np.empty(STATE_SIZE)
    plant_rhs(s_arr, u_arr, float(g), out)
    return out
