"""Monitor functions: the bounded stepsize heuristic and its gradients.

The scalar heuristic ``psi`` maps a nonnegative "difficulty" measure u to a
stepsize factor in [m*M/(m+M), M]: psi(0) = M and psi decreases monotonically
to m*M/(m+M) as u grows.  Composite monitors g(x) = psi(G(x)) shrink the
effective stepsize g(x)*h where G is large.

``audit_criteria`` provides an empirical (falsification-style) audit of the
boundedness/Lipschitz conditions the well-posedness theory asks of g.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "MonitorFunction",
    "psi",
    "psi_prime",
    "monitor_from_scalar",
    "monitor_g1",
    "monitor_g2",
    "monitor_g3",
    "monitor_bayes",
    "monitor_2d_channel",
    "constant_monitor",
    "audit_criteria",
    "AuditError",
    "AuditReport",
]


@dataclass
class MonitorFunction:
    eval_g: Callable[[np.ndarray], np.ndarray]        # (..., d) -> (...,)
    eval_gradg: Callable[[np.ndarray], np.ndarray]    # (..., d) -> (..., d)
    m: float
    Mcap: float
    r: float = 1.0
    alpha: int = 1
    name: str = "monitor"

    def __post_init__(self):
        if not (0.0 < self.m < self.Mcap):
            raise ValueError("require 0 < m < M")
        if not self.r > 0:
            raise ValueError("require r > 0")
        if self.alpha < 1:
            raise ValueError("require alpha >= 1")

    @property
    def floor(self) -> float:
        """Infimum of psi, m*M/(m+M) (slightly below m when m << M)."""
        return self.m * self.Mcap / (self.m + self.Mcap)


def psi(u, m: float, Mcap: float, r: float = 1.0, alpha: int = 1):
    """Stepsize heuristic psi(u) = sqrt(1+m^2 r u^(2a)) /
    (sqrt(1+m^2 r u^(2a))/M + sqrt(r u^(2a))).

    The inner power is computed as (u^2)^alpha, so psi is even in u and
    negative arguments are handled by their magnitude.
    """
    u = np.asarray(u, dtype=float)
    w = r * (u * u) ** alpha
    num = np.sqrt(1.0 + m * m * w)
    return num / (num / Mcap + np.sqrt(w))


def psi_prime(u, m: float, Mcap: float, r: float = 1.0, alpha: int = 1):
    """d psi / du for u >= 0, in the algebraically simplified form

        psi'(u) = - alpha sqrt(r) u^(alpha-1) / (N * (N/M + sqrt(w))^2),

    with w = r u^(2 alpha), N = sqrt(1 + m^2 w).  psi'(0) = 0 by the even
    symmetry of psi (for alpha = 1 this is the symmetric-derivative
    convention at the kink of u -> |u|).
    """
    u = np.asarray(u, dtype=float)
    au = np.abs(u)
    w = r * (au * au) ** alpha
    N = np.sqrt(1.0 + m * m * w)
    den = N / Mcap + np.sqrt(w)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = -alpha * np.sqrt(r) * au ** (alpha - 1) / (N * den * den)
    out = np.where(au == 0.0, 0.0, out) * np.sign(u)
    return out if np.ndim(u) else float(out)


def monitor_from_scalar(
    G: Callable[[np.ndarray], np.ndarray],
    gradG: Callable[[np.ndarray], np.ndarray],
    m: float,
    Mcap: float,
    r: float = 1.0,
    alpha: int = 1,
    name: str = "monitor",
) -> MonitorFunction:
    """Compose g = psi(|G|) with analytic chain-rule gradient."""

    def eval_g(x):
        return psi(G(x), m, Mcap, r, alpha)

    def eval_gradg(x):
        gv = np.asarray(G(x), dtype=float)
        dpsi = psi_prime(np.abs(gv), m, Mcap, r, alpha) * np.sign(gv)
        return np.asarray(dpsi)[..., None] * gradG(x)

    return MonitorFunction(eval_g, eval_gradg, m, Mcap, r, alpha, name=name)


def monitor_g3(pot, m: float, Mcap: float, r: float = 1.0, alpha: int = 1
               ) -> MonitorFunction:
    """g3 = psi(omega) for the modified harmonic potential."""
    return _monitor_from_omega(pot, m, Mcap, r, alpha, power=1)


def monitor_g2(pot, m: float, Mcap: float, r: float = 1.0, alpha: int = 1
               ) -> MonitorFunction:
    """g2 = psi(omega^2) for the modified harmonic potential."""
    return _monitor_from_omega(pot, m, Mcap, r, alpha, power=2)


def _monitor_from_omega(pot, m, Mcap, r, alpha, power):
    if not hasattr(pot, "omega"):
        raise ValueError("potential has no state-dependent frequency omega")
    omega = pot.omega
    b, x0 = pot.params["b"], pot.params["x0"]

    def G(x):
        return omega(np.asarray(x)[..., 0]) ** power

    def gradG(x):
        x1 = np.asarray(x)[..., 0]
        w = omega(x1)
        # omega = b/(b/a + u^2)  =>  omega' = -2 u omega^2 / b
        dw = -2.0 * (x1 - x0) * w * w / b
        return (power * w ** (power - 1) * dw)[..., None]

    return monitor_from_scalar(G, gradG, m, Mcap, r, alpha,
                               name=f"psi_omega^{power}")


def monitor_g1(pot, m: float, Mcap: float, r: float = 1.0, alpha: int = 1
               ) -> MonitorFunction:
    """g1 = psi(|V'|) built on the gradient norm.

    The chain-rule factor grad|V'| needs second derivatives of V; it is
    evaluated by central differences of the analytic gradient (this monitor
    is a design-comparison fixture, not used in the performance loop).
    """

    def G(x):
        return np.linalg.norm(pot.eval_gradV(x), axis=-1)

    def gradG(x):
        x = np.asarray(x, dtype=float)
        eps = 1e-6
        out = np.empty_like(x)
        for j in range(x.shape[-1]):
            xp = x.copy(); xp[..., j] += eps
            xm = x.copy(); xm[..., j] -= eps
            out[..., j] = (G(xp) - G(xm)) / (2 * eps)
        return out

    return monitor_from_scalar(G, gradG, m, Mcap, r, alpha, name="psi_gradnorm")


def monitor_bayes(y_mean: float, a: float, m: float, Mcap: float,
                  r: float = 2.0, alpha: int = 2) -> MonitorFunction:
    """1D monitor psi(2(mu-a) + (ybar-a)^2) for the steep-prior posterior."""
    shift = (y_mean - a) ** 2

    def G(x):
        mu = np.asarray(x)[..., 0]
        return 2.0 * (mu - a) + shift

    def gradG(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = 2.0
        return out

    return monitor_from_scalar(G, gradG, m, Mcap, r, alpha, name="psi_bayes")


def monitor_2d_channel(m: float, Mcap: float, r: float = 1.0, alpha: int = 1,
                       reduce_near_channel: bool = True) -> MonitorFunction:
    """2D monitor built on f(x, y) = (y + x^2 - 4)^2, which vanishes on the
    narrow channel y = 4 - x^2.

    With ``reduce_near_channel`` (default) the monitor is small near the
    channel and saturates at M far from it, evaluated in the closed form of
    psi(1/f):

        g = S / (S/M + sqrt(r)),   S = sqrt(f^(2 alpha) + m^2 r),

    which is smooth through f = 0.  With ``reduce_near_channel=False`` the
    direct composition psi(f) is used (maximal on the channel), matching the
    formula g(f(x, y)) as written.
    """

    def f_and_grad(x):
        x = np.asarray(x, dtype=float)
        u, v = x[..., 0], x[..., 1]
        s = v + u * u - 4.0
        f = s * s
        df = np.stack([4.0 * s * u, 2.0 * s], axis=-1)
        return f, df

    if not reduce_near_channel:
        def G(x):
            return f_and_grad(x)[0]

        def gradG(x):
            return f_and_grad(x)[1]

        return monitor_from_scalar(G, gradG, m, Mcap, r, alpha,
                                   name="psi_channel_direct")

    sr = np.sqrt(r)

    def eval_g(x):
        f, _ = f_and_grad(x)
        S = np.sqrt(f ** (2 * alpha) + m * m * r)
        return S / (S / Mcap + sr)

    def eval_gradg(x):
        f, df = f_and_grad(x)
        S = np.sqrt(f ** (2 * alpha) + m * m * r)
        den = S / Mcap + sr
        dpsi_df = sr * alpha * f ** (2 * alpha - 1) / (S * den * den)
        return dpsi_df[..., None] * df

    return MonitorFunction(eval_g, eval_gradg, m, Mcap, r, alpha,
                           name="psi_channel_inverse")


def constant_monitor(value: float, dim: int = 1) -> MonitorFunction:
    """g identically equal to ``value`` (reduction-law fixture)."""
    if not value > 0:
        raise ValueError("value must be > 0")

    def eval_g(x):
        x = np.asarray(x)
        return np.full(x.shape[:-1], value, dtype=float)

    def eval_gradg(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return MonitorFunction(eval_g, eval_gradg, value / 2.0, 2.0 * value,
                           name=f"const_{value}")


class AuditError(RuntimeError):
    pass


@dataclass
class AuditRow:
    criterion: str
    estimate: float
    bound: float
    passed: bool


@dataclass
class AuditReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["criterion", "estimate", "bound", "pass"])
        for r in self.rows:
            w.writerow([r.criterion, repr(r.estimate), repr(r.bound),
                        "pass" if r.passed else "fail"])
        return buf.getvalue()


def _pair_quotients(vals, pts, max_pairs=1_000_000):
    """Empirical Lipschitz quotients |f(x)-f(y)| / |x-y| over a stride-limited
    set of grid pairs."""
    n = len(pts)
    rng = np.random.default_rng(12345)
    n_pairs = min(max_pairs, n * (n - 1) // 2)
    i = rng.integers(0, n, size=n_pairs)
    j = rng.integers(0, n, size=n_pairs)
    keep = i != j
    i, j = i[keep], j[keep]
    dx = np.linalg.norm(pts[i] - pts[j], axis=-1)
    if vals.ndim == 1:
        dv = np.abs(vals[i] - vals[j])
    else:
        dv = np.linalg.norm(vals[i] - vals[j], axis=-1)
    return float(np.max(dv / dx))


def audit_criteria(mon: MonitorFunction, pot, lo, hi, n_grid: int = 101,
                   max_pairs: int = 1_000_000) -> AuditReport:
    """Empirical audit of the monitor boundedness and Lipschitz criteria on a
    box grid.  This is a falsification tool, not a proof."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2 per axis")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("box bounds must be finite")
    d = lo.size
    axes = [np.linspace(lo[j], hi[j], n_grid) for j in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([mm.ravel() for mm in mesh], axis=-1)

    g = np.asarray(mon.eval_g(pts), dtype=float)
    gg = np.asarray(mon.eval_gradg(pts), dtype=float)
    gvp = np.asarray(pot.eval_gradV(pts), dtype=float) * g[..., None]
    for name, arr in (("g", g), ("grad_g", gg), ("g*gradV", gvp)):
        if not np.all(np.isfinite(arr)):
            k = int(np.argmax(~np.isfinite(arr).reshape(len(pts), -1).all(axis=1)))
            raise AuditError(f"non-finite {name} at x = {pts[k]}")

    # second diagonal derivatives of g by central differences
    sec = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1e-4
        sec.append(np.max(np.abs(
            (mon.eval_g(pts + e) - 2.0 * g + mon.eval_g(pts - e)) / 1e-8)))

    eps = 1e-9
    report = AuditReport()
    gmin, gmax = float(np.min(g)), float(np.max(g))
    report.rows.append(AuditRow("g_lower_bound_min", gmin, mon.floor,
                                gmin >= mon.floor - eps))
    report.rows.append(AuditRow("g_upper_bound_max", gmax, mon.Mcap,
                                gmax <= mon.Mcap + eps))
    gn = np.linalg.norm(gg, axis=-1)
    report.rows.append(AuditRow("gradg_sup_norm", float(np.max(gn)),
                                np.inf, bool(np.isfinite(np.max(gn)))))
    report.rows.append(AuditRow("gradg_max_abs_partial", float(np.max(np.abs(gg))),
                                np.inf, True))
    report.rows.append(AuditRow("g_max_abs_second_partial", float(max(sec)),
                                np.inf, bool(np.isfinite(max(sec)))))
    report.rows.append(AuditRow("lipschitz_g",
                                _pair_quotients(g, pts, max_pairs), np.inf, True))
    report.rows.append(AuditRow("lipschitz_gradg",
                                _pair_quotients(gg, pts, max_pairs), np.inf, True))
    report.rows.append(AuditRow("lipschitz_g_gradV",
                                _pair_quotients(gvp, pts, max_pairs), np.inf, True))
    return report
