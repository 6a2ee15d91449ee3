"""Leader trajectories with analytic derivatives up to fourth order.

Every trajectory returns a ``(5, 3)`` array from :meth:`derivatives`: row ``k``
is the ``k``-th time derivative of ``[x0, y0, z0]``. The altitude is constant
for all built-in kinds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from ._jit import jit

MAX_POLY_DEGREE = 6
SIGMA_SAMPLES = 10_000

# encodings understood by leader_kernel
KIND_FIXED, KIND_CIRCLE, KIND_POLY = 0, 1, 2
PARAM_SIZE = 2 * (MAX_POLY_DEGREE + 1) + 1


class LeaderTrajectory:
    kind: str

    def derivatives(self, t: float) -> NDArray[np.float64]:
        raise NotImplementedError

    def position(self, t: float) -> NDArray[np.float64]:
        return self.derivatives(t)[0]

    def to_dict(self) -> dict:
        raise NotImplementedError

    def kernel_params(self) -> tuple[int, NDArray[np.float64]]:
        """``(kind code, parameter vector)`` for :func:`leader_kernel`."""
        raise NotImplementedError


@dataclass(frozen=True)
class CircleLeader(LeaderTrajectory):
    """``p0(t) = [R sin wt, -R cos wt, h]``."""

    radius: float
    omega: float
    altitude: float
    kind: str = "circle"

    def derivatives(self, t: float) -> NDArray[np.float64]:
        r, w = self.radius, self.omega
        s, c = math.sin(w * t), math.cos(w * t)
        out = np.zeros((5, 3))
        # d^k/dt^k of sin rotates the phase by a quarter turn and scales by w
        sin_cycle = (s, c, -s, -c)
        for k in range(5):
            amp = r * w**k
            out[k, 0] = amp * sin_cycle[k % 4]
            out[k, 1] = -amp * sin_cycle[(k + 1) % 4]
        out[0, 2] = self.altitude
        return out

    def to_dict(self) -> dict:
        return {"kind": "circle", "radius": self.radius, "omega": self.omega, "altitude": self.altitude}

    def kernel_params(self):
        params = np.zeros(PARAM_SIZE)
        params[:3] = self.radius, self.omega, self.altitude
        return KIND_CIRCLE, params


@dataclass(frozen=True)
class FixedLeader(LeaderTrajectory):
    point: tuple[float, float, float]
    kind: str = "fixed"

    def derivatives(self, t: float) -> NDArray[np.float64]:
        out = np.zeros((5, 3))
        out[0] = self.point
        return out

    def to_dict(self) -> dict:
        return {"kind": "fixed", "point": list(self.point)}

    def kernel_params(self):
        params = np.zeros(PARAM_SIZE)
        params[:3] = self.point
        return KIND_FIXED, params


@dataclass(frozen=True)
class PolyLeader(LeaderTrajectory):
    """Polynomial ``x0(t)``, ``y0(t)`` (ascending coefficients) at fixed altitude."""

    coeffs_x: tuple[float, ...]
    coeffs_y: tuple[float, ...]
    z: float
    kind: str = "poly"

    def derivatives(self, t: float) -> NDArray[np.float64]:
        out = np.zeros((5, 3))
        for axis, coeffs in enumerate((self.coeffs_x, self.coeffs_y)):
            p = np.polynomial.Polynomial(coeffs)
            for k in range(5):
                out[k, axis] = p(t)
                p = p.deriv()
        out[0, 2] = self.z
        return out

    def to_dict(self) -> dict:
        return {"kind": "poly", "coeffs_x": list(self.coeffs_x), "coeffs_y": list(self.coeffs_y), "z": self.z}

    def kernel_params(self):
        width = MAX_POLY_DEGREE + 1
        params = np.zeros(PARAM_SIZE)
        params[: len(self.coeffs_x)] = self.coeffs_x
        params[width: width + len(self.coeffs_y)] = self.coeffs_y
        params[-1] = self.z
        return KIND_POLY, params


@jit
def leader_kernel(kind, params, t, out):
    """Fill the ``(5, 3)`` derivative table ``out`` for an encoded leader."""
    for k in range(5):
        for a in range(3):
            out[k, a] = 0.0
    if kind == 0:
        out[0, 0] = params[0]
        out[0, 1] = params[1]
        out[0, 2] = params[2]
    elif kind == 1:
        r, w = params[0], params[1]
        s, c = math.sin(w * t), math.cos(w * t)
        amp = r
        for k in range(5):
            m = k % 4
            if m == 0:
                sx, sy = s, c
            elif m == 1:
                sx, sy = c, -s
            elif m == 2:
                sx, sy = -s, -c
            else:
                sx, sy = -c, s
            out[k, 0] = amp * sx
            out[k, 1] = -amp * sy
            amp *= w
        out[0, 2] = params[2]
    else:
        width = (params.shape[0] - 1) // 2
        for a in range(2):
            base = a * width
            for k in range(5):
                acc = 0.0
                for p in range(width - 1, k - 1, -1):
                    coef = params[base + p]
                    for m in range(k):
                        coef *= p - m
                    acc = acc * t + coef
                out[k, a] = acc
        out[0, 2] = params[params.shape[0] - 1]


def circle_leader(radius: float, omega: float, altitude: float) -> CircleLeader:
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if omega == 0:
        raise ValueError("omega must be nonzero")
    return CircleLeader(float(radius), float(omega), float(altitude))


def fixed_leader(point: Sequence[float]) -> FixedLeader:
    if len(point) != 3:
        raise ValueError("point must have 3 components")
    return FixedLeader(tuple(float(v) for v in point))


def poly_leader(coeffs_x: Sequence[float], coeffs_y: Sequence[float], z: float) -> PolyLeader:
    for name, coeffs in (("coeffs_x", coeffs_x), ("coeffs_y", coeffs_y)):
        if len(coeffs) == 0:
            raise ValueError(f"{name} is empty")
        if len(coeffs) - 1 > MAX_POLY_DEGREE:
            raise ValueError(f"{name} has degree {len(coeffs) - 1} > {MAX_POLY_DEGREE}")
    return PolyLeader(tuple(map(float, coeffs_x)), tuple(map(float, coeffs_y)), float(z))


def leader_from_dict(data: dict) -> LeaderTrajectory:
    kind = data.get("kind")
    if kind == "circle":
        return circle_leader(data["radius"], data["omega"], data["altitude"])
    if kind == "fixed":
        return fixed_leader(data["point"])
    if kind == "poly":
        return poly_leader(data["coeffs_x"], data["coeffs_y"], data["z"])
    raise ValueError(f"unknown leader kind {kind!r}")


class SigmaBounds(NamedTuple):
    """``sup |p0'''' + g3 p0''' + g2 p0'' + g1 p0'|`` per horizontal axis.

    ``sampled`` is True when the supremum came from dense sampling over a
    finite horizon rather than a closed form.
    """

    x: float
    y: float
    sampled: bool = False


def leader_forcing(traj: LeaderTrajectory, g1: float, g2: float, g3: float, t: float) -> NDArray[np.float64]:
    """The xy forcing term the observer gain ``g5`` has to dominate."""
    d = traj.derivatives(t)
    return d[4, :2] + g3 * d[3, :2] + g2 * d[2, :2] + g1 * d[1, :2]


def sigma_bounds(traj: LeaderTrajectory, g1: float, g2: float, g3: float, horizon: float) -> SigmaBounds:
    if isinstance(traj, FixedLeader):
        return SigmaBounds(0.0, 0.0)
    if isinstance(traj, CircleLeader):
        r, w = traj.radius, traj.omega
        sin_part = r * w**4 - g2 * r * w**2
        cos_part = g1 * r * w - g3 * r * w**3
        amp = math.hypot(sin_part, cos_part)
        # y0 = -R cos(wt) is x0 shifted by a quarter period
        return SigmaBounds(amp, amp)
    ts = np.linspace(0.0, horizon, SIGMA_SAMPLES)
    forcing = np.array([leader_forcing(traj, g1, g2, g3, t) for t in ts])
    sup = np.abs(forcing).max(axis=0)
    return SigmaBounds(float(sup[0]), float(sup[1]), sampled=True)
