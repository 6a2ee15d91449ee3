"""Lyapunov certificate for the horizontal observer network.

With ``c`` the stacked consensus error, ``W = 0.5 c^T (H kron I2)^{-1} c``
obeys ``W' <= -q W + sigma0 exp(-lam t)`` where ``q = 2 g4 lambda_min(H)``
and ``sigma0 = gamma n (sigma_x + sigma_y)``. Integrating gives an explicit
envelope that every simulated ``W(t)`` must stay under.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import NDArray

from .graph import min_eigenvalue
from .observer import ObserverGains


def lyapunov_value(c: NDArray[np.float64], h: NDArray[np.float64]) -> float:
    c = np.asarray(c, dtype=float).reshape(-1)
    hk = np.kron(h, np.eye(2))
    return 0.5 * float(c @ np.linalg.solve(hk, c))


def decay_rate(gains: ObserverGains, h: NDArray[np.float64]) -> float:
    return 2.0 * gains.g4 * min_eigenvalue(h)


def forcing_level(gains: ObserverGains, sigma: tuple[float, float], n: int) -> float:
    return gains.gamma * n * (sigma[0] + sigma[1])


def envelope(t, w0: float, q: float, lam: float, sigma0: float):
    """Upper bound on ``W(t)``; vectorised over ``t``.

    Uses the ``|lam - q|`` form when the rates differ and the
    ``t exp(-lam t / 2)`` form when they coincide.
    """
    t = np.asarray(t, dtype=float)
    if math.isclose(q, lam, rel_tol=1e-12, abs_tol=0.0):
        return np.exp(-q * t) * w0 + 2.0 * sigma0 / (lam * math.e) * np.exp(-0.5 * lam * t)
    return np.exp(-q * t) * w0 + 2.0 * sigma0 / abs(lam - q) * np.exp(-min(q, lam) * t)


def comparison_solution(t, w0: float, q: float, lam: float, sigma0: float):
    """Exact solution of ``w' = -q w + sigma0 exp(-lam t)``, the tighter bound."""
    t = np.asarray(t, dtype=float)
    if math.isclose(q, lam, rel_tol=1e-12, abs_tol=0.0):
        return np.exp(-q * t) * w0 + sigma0 * t * np.exp(-q * t)
    return np.exp(-q * t) * w0 + sigma0 * (np.exp(-q * t) - np.exp(-lam * t)) / (lam - q)
