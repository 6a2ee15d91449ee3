"""Distributed observers that turn neighbour information into virtual references.

Each follower runs a fourth-order horizontal observer with an adaptive,
time-decaying gain, and a cascaded altitude observer whose acceleration is
bounded below ``g``. Together they form the agent's tracking reference.

Horizontal observer rows are laid out as ``[zx, zy, zx', zy', zx'', zy'',
zx''', zy''']``; altitude rows as ``[z_id, z_id', z_ia, z_ia', z_ib]``.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np
from numpy.typing import NDArray

from .graph import CommGraph
from .leader import SigmaBounds
from .plant import GRAVITY
from .stability import is_hurwitz
from ._jit import jit

XY_SIZE = 8
Z_SIZE = 5


@dataclass(frozen=True)
class ObserverGains:
    g1: float = 0.125
    g2: float = 0.75
    g3: float = 0.85
    g4: float = 0.1
    g5x: float = 2.1
    g5y: float = 2.1
    gamma: float = 15.0
    lam: float = 0.1
    h1: float = 0.5
    h2: float = 0.5
    h3: float = 0.5
    h4: float = 0.5
    h5: float = 0.5
    h6: float = 1.0

    def as_array(self) -> NDArray[np.float64]:
        return np.array(astuple(self), dtype=float)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "ObserverGains":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown observer gains: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    @property
    def zdd_bound(self) -> float:
        """Upper bound on ``|z_id''|`` guaranteed by the tanh saturations."""
        return self.h1 + self.h3


def validate_observer_gains(gains: ObserverGains, sigma: SigmaBounds | tuple[float, float], g: float = GRAVITY) -> list[str]:
    """Return the violated gain inequalities (empty list means valid)."""
    sx, sy = sigma[0], sigma[1]
    problems = []
    checks = [
        ("g2 > 0", gains.g2 > 0),
        ("g3 > 0", gains.g3 > 0),
        ("g1 > 0", gains.g1 > 0),
        (f"g2*g3 > g1 ({gains.g2 * gains.g3:g} <= {gains.g1:g})", gains.g2 * gains.g3 > gains.g1),
        ("g4 > 0", gains.g4 > 0),
        ("gamma > 0", gains.gamma > 0),
        ("lambda > 0", gains.lam > 0),
        (f"g5x >= sigma_x ({gains.g5x:g} < {sx:g})", gains.g5x >= sx),
        (f"g5y >= sigma_y ({gains.g5y:g} < {sy:g})", gains.g5y >= sy),
    ]
    checks += [(f"h{k} > 0", getattr(gains, f"h{k}") > 0) for k in range(1, 7)]
    checks.append((f"h1 + h3 < g ({gains.h1 + gains.h3:g} >= {g:g})", gains.h1 + gains.h3 < g))
    problems = [name for name, ok in checks if not ok]
    if gains.g1 > 0 and gains.g2 > 0 and gains.g3 > 0 and not is_hurwitz([1.0, gains.g3, gains.g2, gains.g1]):
        problems.append("s^3 + g3 s^2 + g2 s + g1 Hurwitz")
    return problems


# --------------------------------------------------------------------------
# kernels


@jit
def xy_kernel(zeta, lead, adj, links, go, t, c_out, z4_out):
    """Consensus error ``c`` and fourth derivative for every agent.

    ``lead`` is ``[x0, y0, x0', y0', x0'', y0'', x0''', y0''']``.
    """
    n = zeta.shape[0]
    g1, g2, g3, g4 = go[0], go[1], go[2], go[3]
    eps = go[6] * math.exp(-go[7] * t)
    for i in range(n):
        for ax in range(2):
            acc = 0.0
            for j in range(n):
                if adj[i, j] != 0.0:
                    acc += adj[i, j] * (
                        (zeta[i, 6 + ax] - zeta[j, 6 + ax])
                        + g3 * (zeta[i, 4 + ax] - zeta[j, 4 + ax])
                        + g2 * (zeta[i, 2 + ax] - zeta[j, 2 + ax])
                        + g1 * (zeta[i, ax] - zeta[j, ax])
                    )
            if links[i] != 0.0:
                acc += links[i] * (
                    (zeta[i, 6 + ax] - lead[6 + ax])
                    + g3 * (zeta[i, 4 + ax] - lead[4 + ax])
                    + g2 * (zeta[i, 2 + ax] - lead[2 + ax])
                    + g1 * (zeta[i, ax] - lead[ax])
                )
            c_out[i, ax] = acc
    for i in range(n):
        for ax in range(2):
            c = c_out[i, ax]
            q = go[4 + ax] / (abs(c) + eps)
            z4_out[i, ax] = (-g3 * zeta[i, 6 + ax] - g2 * zeta[i, 4 + ax] - g1 * zeta[i, 2 + ax]
                             - g4 * c - q * c)


@jit
def z_kernel(zs, z0, adj, links, go, out):
    """Time derivative of every altitude-observer row."""
    n = zs.shape[0]
    h1, h2, h3, h4, h5, h6 = go[8], go[9], go[10], go[11], go[12], go[13]
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if adj[i, j] != 0.0:
                acc += adj[i, j] * (zs[i, 4] - zs[j, 4])
        acc += links[i] * (zs[i, 4] - z0)
        z_id, zd_id, z_ia, zd_ia, z_ib = zs[i, 0], zs[i, 1], zs[i, 2], zs[i, 3], zs[i, 4]
        out[i, 0] = zd_id
        out[i, 1] = -h1 * math.tanh(zd_id + h2 * (z_id - z_ia)) - h3 * math.tanh(zd_id)
        out[i, 2] = zd_ia
        out[i, 3] = -h4 * (z_ia - z_ib) - h5 * zd_ia
        out[i, 4] = -h6 * acc


@jit
def z_reference(zrow, zdot, go):
    """``(z_id, z_id', z_id'', z_id''', z_id'''')`` from one altitude row and its derivative."""
    h1, h2, h3 = go[8], go[9], go[10]
    z_id, zd_id, z_ia, zd_ia = zrow[0], zrow[1], zrow[2], zrow[3]
    zdd_ia = zdot[3]
    b = zd_id + h2 * (z_id - z_ia)
    tb = math.tanh(b)
    tv = math.tanh(zd_id)
    sb = 1.0 - tb * tb
    sv = 1.0 - tv * tv
    z2 = -h1 * tb - h3 * tv
    b1 = z2 + h2 * (zd_id - zd_ia)
    z3 = -h1 * sb * b1 - h3 * sv * z2
    b2 = z3 + h2 * (z2 - zdd_ia)
    z4 = 2.0 * h1 * sb * tb * b1 * b1 - h1 * sb * b2 + 2.0 * h3 * sv * tv * z2 * z2 - h3 * sv * z3
    return z_id, zd_id, z2, z3, z4


# --------------------------------------------------------------------------
# public operations


def _leader_xy(leader) -> NDArray[np.float64]:
    """Accept ``(4, 2)``/``(5, 3)`` derivative tables or a flat length-8 row."""
    lead = np.asarray(leader, dtype=float)
    if lead.shape == (8,):
        return lead
    if lead.ndim == 2 and lead.shape[0] >= 4 and lead.shape[1] >= 2:
        return np.ascontiguousarray(lead[:4, :2]).reshape(8)
    raise ValueError(f"cannot interpret leader derivatives of shape {lead.shape}")


def xy_observer_derivative(states, leader, graph: CommGraph, gains: ObserverGains, t: float):
    """Fourth derivative of every horizontal observer.

    Args:
        states: ``(n, 8)`` rows ``[zeta, zeta', zeta'', zeta''']`` (x, y interleaved).
        leader: leader derivative table; only orders 0..3 of x, y are used.
        graph: communication graph.
        gains: observer gains.
        t: time in seconds (drives the decaying term of the adaptive gain).

    Returns:
        ``(zeta4, c)``, both ``(n, 2)``.
    """
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    states = np.asarray(states, dtype=float)
    if states.shape != (graph.n, XY_SIZE):
        raise ValueError(f"expected shape {(graph.n, XY_SIZE)}, got {states.shape}")
    c = np.empty((graph.n, 2))
    z4 = np.empty((graph.n, 2))
    links = np.asarray(graph.leader_links, dtype=float)
    xy_kernel(states, _leader_xy(leader), graph.adjacency, links, gains.as_array(), float(t), c, z4)
    return z4, c


def z_observer_derivative(zs, z0: float, graph: CommGraph, gains: ObserverGains) -> NDArray[np.float64]:
    """Derivative of the ``(n, 5)`` altitude rows: ``[z_id', z_id'', z_ia', z_ia'', z_ib']``."""
    zs = np.asarray(zs, dtype=float)
    if zs.shape != (graph.n, Z_SIZE):
        raise ValueError(f"expected shape {(graph.n, Z_SIZE)}, got {zs.shape}")
    out = np.empty_like(zs)
    z_kernel(zs, float(z0), graph.adjacency, np.asarray(graph.leader_links, dtype=float), gains.as_array(), out)
    return out


def observer_to_tracking_ref(xy_row, xy4, z_row, z_dot, gains: ObserverGains):
    """Assemble one agent's :class:`~quadformation.controller.TrackingRef`."""
    from .controller import TrackingRef

    xy_row = np.asarray(xy_row, dtype=float)
    x = np.append(xy_row[0::2], xy4[0])
    y = np.append(xy_row[1::2], xy4[1])
    z = np.array(z_reference(np.asarray(z_row, dtype=float), np.asarray(z_dot, dtype=float), gains.as_array()))
    return TrackingRef(x, y, z)


def stacked_s(states, leader, gains: ObserverGains) -> NDArray[np.float64]:
    """``s_i = xi''' + g3 xi'' + g2 xi' + g1 xi`` with ``xi = zeta - zeta0``, stacked to ``2n``."""
    states = np.asarray(states, dtype=float)
    lead = _leader_xy(leader)
    xi = states - lead[None, :]
    s = xi[:, 6:8] + gains.g3 * xi[:, 4:6] + gains.g2 * xi[:, 2:4] + gains.g1 * xi[:, 0:2]
    return s.reshape(-1)
