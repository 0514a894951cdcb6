"""Built-in potential models with hand-derived analytic gradients.

All evaluators are vectorised: ``eval_V`` maps an (..., d) position array to
(...,) energies and ``eval_gradV`` to an (..., d) gradient array.  Gradients
are analytic (finite differences are used only as test oracles).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "PotentialModel",
    "modified_harmonic",
    "harmonic",
    "bayes_posterior",
    "two_pathway",
]


@dataclass
class PotentialModel:
    dim: int
    eval_V: Callable[[np.ndarray], np.ndarray]
    eval_gradV: Callable[[np.ndarray], np.ndarray]
    eval_lapV: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "potential"


def modified_harmonic(a: float, b: float, c: float, x0: float) -> PotentialModel:
    """Near-harmonic 1D potential that steepens around ``x0``.

    The state-dependent frequency is omega(x) = b / (b/a + (x - x0)^2), so
    omega(x0) = a.  The gradient simplifies exactly to
    V'(x) = (omega(x)^2 + c) * x, which is the restoring force written with
    the opposite sign convention in some derivations; V itself is confining
    for c > 0.
    """
    if not (a > 0 and b > 0 and c >= 0):
        raise ValueError("require a > 0, b > 0, c >= 0")

    sab = a ** 1.5 * np.sqrt(b)
    sqab = np.sqrt(a / b)

    def omega(x1):
        return b / (b / a + (x1 - x0) ** 2)

    def V(x):
        u = np.asarray(x)[..., 0] - x0
        return 0.5 * (
            sab * x0 * np.arctan(sqab * u)
            + a * b * (a * u * x0 - b) / (a * u ** 2 + b)
            + c * u ** 2
            + 2.0 * c * u * x0
        )

    def gradV(x):
        x1 = np.asarray(x)[..., 0]
        return ((omega(x1) ** 2 + c) * x1)[..., None]

    def lapV(x):
        x1 = np.asarray(x)[..., 0]
        u = x1 - x0
        w = omega(x1)
        dw = -2.0 * b * u / (b / a + u ** 2) ** 2
        return w ** 2 + c + 2.0 * w * dw * x1

    pot = PotentialModel(1, V, gradV, lapV, name="modified_harmonic")
    pot.omega = omega  # type: ignore[attr-defined]  # used by monitor builders
    pot.params = {"a": a, "b": b, "c": c, "x0": x0}  # type: ignore[attr-defined]
    return pot


def harmonic(k: float, dim: int = 1) -> PotentialModel:
    """V(x) = k ||x||^2 / 2 (analytic test fixture)."""
    if not k > 0:
        raise ValueError("require k > 0")

    def V(x):
        x = np.asarray(x)
        return 0.5 * k * np.sum(x * x, axis=-1)

    def gradV(x):
        return k * np.asarray(x)

    def lapV(x):
        x = np.asarray(x)
        return np.full(x.shape[:-1], k * x.shape[-1], dtype=float)

    return PotentialModel(dim, V, gradV, lapV, name="harmonic")


def bayes_posterior(y, K: int, a: float) -> PotentialModel:
    """Negative log posterior for a Gaussian mean with a steep prior.

    V(mu) = sum_i (y_i - mu)^2 / 2 + (mu - a)^(2K), so exp(-V) at unit
    temperature is the posterior density (up to normalisation).
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("y must be nonempty")
    if K < 1:
        raise ValueError("K must be >= 1")
    n = y.size
    ysum = float(y.sum())

    def V(x):
        mu = np.asarray(x)[..., 0]
        lik = 0.5 * (n * mu ** 2 - 2.0 * ysum * mu + float(np.sum(y * y)))
        return lik + (mu - a) ** (2 * K)

    def gradV(x):
        mu = np.asarray(x)[..., 0]
        return (n * mu - ysum + 2 * K * (mu - a) ** (2 * K - 1))[..., None]

    def lapV(x):
        mu = np.asarray(x)[..., 0]
        return n + 2 * K * (2 * K - 1) * (mu - a) ** (2 * K - 2)

    pot = PotentialModel(1, V, gradV, lapV, name="bayes_posterior")
    pot.y = y  # type: ignore[attr-defined]
    pot.prior_center = a  # type: ignore[attr-defined]
    return pot


def two_pathway(k1: float = 0.1, k2: float = 50.0, k3: float = 50.0,
                k4: float = 0.1) -> PotentialModel:
    """2D landscape with a narrow upper channel y = 4 - x^2 and a wide lower
    channel y = x^2 - 4."""

    def parts(x):
        x = np.asarray(x)
        u, v = x[..., 0], x[..., 1]
        p1 = (v - u ** 2 + 4.0) ** 2
        p2 = (v + u ** 2 - 4.0) ** 2
        return u, v, p1, p2

    def V(x):
        u, v, p1, p2 = parts(x)
        return ((1.0 + k1 * p1 * p2) / (1.0 + p1)
                + k3 * k2 * p1 * p2 / (1.0 + k2 * p2)
                + k4 * u ** 2)

    def gradV(x):
        u, v, p1, p2 = parts(x)
        s1 = v - u ** 2 + 4.0   # p1 = s1^2
        s2 = v + u ** 2 - 4.0   # p2 = s2^2
        # partials of q with respect to p1 and p2
        dq_dp1 = (k1 * p2 * (1.0 + p1) - (1.0 + k1 * p1 * p2)) / (1.0 + p1) ** 2 \
            + k3 * k2 * p2 / (1.0 + k2 * p2)
        dq_dp2 = k1 * p1 / (1.0 + p1) \
            + k3 * k2 * p1 / (1.0 + k2 * p2) ** 2
        dp1_du = 2.0 * s1 * (-2.0 * u)
        dp1_dv = 2.0 * s1
        dp2_du = 2.0 * s2 * (2.0 * u)
        dp2_dv = 2.0 * s2
        gx = dq_dp1 * dp1_du + dq_dp2 * dp2_du + 2.0 * k4 * u
        gy = dq_dp1 * dp1_dv + dq_dp2 * dp2_dv
        return np.stack([gx, gy], axis=-1)

    return PotentialModel(2, V, gradV, None, name="two_pathway")
