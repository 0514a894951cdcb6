"""Reference values and error analysis for sampler experiments.

Provides quadrature reference moments of a 1D Gibbs density (with an optional
JSON cache), weak-error convergence sweeps with a noise-floor-aware slope
fit, histogram L1 distance against a reference density, and escape-fraction
sweeps with mean-monitor stepsize matching for the fixed baseline.  All
tables carry a ``to_csv`` serialisation with full-precision (repr
round-trip) floats.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .core import SamplerConfig, run_ensemble
from .monitor import MonitorFunction
from .overdamped import EMIPStepper, EMRescaledStepper, EMStepper
from .potentials import PotentialModel
from .underdamped import SchemeId, make_stepper

__all__ = [
    "ReferenceMoments",
    "gibbs_reference",
    "maxwellian_reference",
    "build_stepper",
    "OVERDAMPED_SCHEMES",
    "ConvergenceRow",
    "ConvergenceTable",
    "SlopeFit",
    "fit_weak_order",
    "weak_error_sweep",
    "histogram_l1",
    "histogram_table",
    "EscapeTable",
    "escape_rate",
]

_TAIL_TOL = 1e-12

OVERDAMPED_SCHEMES = ("EM", "EM_RESCALED", "EM_IP")


def build_stepper(scheme: str, pot: PotentialModel,
                  mon: Optional[MonitorFunction], cfg: SamplerConfig):
    """Map a scheme name to a single-step map (overdamped or splitting)."""
    if scheme == "EM":
        return EMStepper(pot, cfg.beta_inv)
    if scheme == "EM_RESCALED":
        if mon is None:
            raise ValueError("EM_RESCALED needs a monitor function")
        return EMRescaledStepper(pot, mon, cfg.beta_inv)
    if scheme == "EM_IP":
        if mon is None:
            raise ValueError("EM_IP needs a monitor function")
        return EMIPStepper(pot, mon, cfg.beta_inv)
    try:
        sid = SchemeId(scheme)
    except ValueError:
        raise ValueError(f"unknown scheme {scheme!r}") from None
    return make_stepper(sid, pot, mon, cfg.beta_inv, cfg.gamma,
                        cfg.fp_tol, cfg.fp_max_iter)


@dataclass(frozen=True)
class ReferenceMoments:
    """Quadrature moments of rho(x) = exp(-beta V(x)) / Z on [lo, hi].

    ``moments[k]`` is E[x^k] for k = 0..k_max (so moments[0] == 1)."""

    beta_inv: float
    Z: float
    moments: np.ndarray
    lo: float
    hi: float

    def moment(self, k: int) -> float:
        return float(self.moments[k])


def maxwellian_reference(beta_inv: float, k_max: int = 4) -> ReferenceMoments:
    """Analytic moments of the momentum marginal N(0, beta_inv) shared by
    every kinetic Gibbs measure (unit mass): E[p^k] = 0 for odd k and
    (k-1)!! * beta_inv^(k/2) for even k."""
    moments = np.zeros(k_max + 1)
    moments[0] = 1.0
    for k in range(2, k_max + 1, 2):
        moments[k] = moments[k - 2] * (k - 1) * beta_inv
    return ReferenceMoments(beta_inv, math.sqrt(2.0 * math.pi * beta_inv),
                            moments, -math.inf, math.inf)


def _cache_key(pot: PotentialModel, beta_inv: float, lo: float, hi: float,
               k_max: int) -> str:
    params = getattr(pot, "params", None)
    ptag = json.dumps(params, sort_keys=True) if params else ""
    return f"{pot.name}|{ptag}|{beta_inv!r}|{lo!r}|{hi!r}|{k_max}"


def gibbs_reference(pot: PotentialModel, beta_inv: float, lo: float, hi: float,
                    k_max: int = 4,
                    cache_path: Optional[str] = None) -> ReferenceMoments:
    """Compute Z and E[x^k] (k <= k_max) of the Gibbs density by adaptive
    quadrature on [lo, hi].

    Each integral is evaluated at two tolerances (1e-10 and 1e-12) and the
    results are required to agree to 1e-9 relative; the truncated tail mass
    just outside [lo, hi] must be below 1e-12 of the total.  Failures raise
    ValueError with a suggestion to widen the support window.  When
    ``cache_path`` is given, results are memoised in a JSON file keyed by
    (potential name, parameters, temperature, window).
    """
    if pot.dim != 1:
        raise ValueError("reference quadrature supports 1D potentials only")
    if not lo < hi:
        raise ValueError("require lo < hi")

    key = _cache_key(pot, beta_inv, lo, hi, k_max)
    if cache_path and os.path.exists(cache_path):
        with open(cache_path) as f:
            cache = json.load(f)
        if key in cache:
            e = cache[key]
            return ReferenceMoments(beta_inv, e["Z"], np.asarray(e["moments"]),
                                    lo, hi)

    beta = 1.0 / beta_inv

    def dens(t):
        return math.exp(-beta * float(pot.eval_V(np.array([t]))))

    def integrate(f):
        a, _ = quad(f, lo, hi, epsabs=1e-10, epsrel=1e-10, limit=500)
        b, _ = quad(f, lo, hi, epsabs=1e-12, epsrel=1e-12, limit=500)
        if abs(a - b) > 1e-9 * max(1.0, abs(b)):
            raise ValueError(
                "quadrature tolerances disagree; widen [lo, hi] or check the "
                "potential for non-smoothness")
        return b

    Z = integrate(dens)
    if not (np.isfinite(Z) and Z > 0):
        raise ValueError("non-normalisable density on the given window")
    width = hi - lo
    tail = (quad(dens, lo - 0.5 * width, lo, limit=200)[0]
            + quad(dens, hi, hi + 0.5 * width, limit=200)[0])
    if tail / Z > _TAIL_TOL:
        raise ValueError(
            f"truncated tail mass {tail / Z:.3e} exceeds {_TAIL_TOL}; widen "
            f"the window beyond [{lo}, {hi}]")
    moments = np.empty(k_max + 1)
    moments[0] = 1.0
    for k in range(1, k_max + 1):
        moments[k] = integrate(lambda t, k=k: t ** k * dens(t)) / Z
    ref = ReferenceMoments(beta_inv, Z, moments, lo, hi)

    if cache_path:
        cache = {}
        if os.path.exists(cache_path):
            with open(cache_path) as f:
                cache = json.load(f)
        cache[key] = {"Z": Z, "moments": moments.tolist()}
        with open(cache_path, "w") as f:
            json.dump(cache, f, indent=1)
    return ref


@dataclass
class ConvergenceRow:
    scheme: str
    h: float
    k: int            # moment order
    error: float      # |estimate - reference|
    stderr: float     # Monte Carlo standard error of the estimate


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow] = field(default_factory=list)

    def add(self, scheme: str, h: float, k: int, error: float, stderr: float):
        self.rows.append(ConvergenceRow(scheme, float(h), int(k),
                                        float(error), float(stderr)))

    def for_scheme(self, scheme: str, k: int):
        rows = sorted((r for r in self.rows if r.scheme == scheme and r.k == k),
                      key=lambda r: r.h)
        hs = np.array([r.h for r in rows])
        errs = np.array([r.error for r in rows])
        ses = np.array([r.stderr for r in rows])
        return hs, errs, ses

    def slope(self, scheme: str, k: int) -> "SlopeFit":
        return fit_weak_order(*self.for_scheme(scheme, k))

    def to_csv(self) -> str:
        lines = ["scheme,h,k,error,stderr"]
        for r in self.rows:
            lines.append(f"{r.scheme},{r.h!r},{r.k},{r.error!r},{r.stderr!r}")
        return "\n".join(lines) + "\n"


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    n_used: int
    determinate: bool
    note: str = ""


def fit_weak_order(hs, errors, stderrs, noise_factor: float = 3.0) -> SlopeFit:
    """Least-squares slope of log(error) vs log(h) with two guards.

    Points whose error is below ``noise_factor`` times their Monte Carlo
    standard error are discarded (they measure noise, not bias).  Then, while
    more than three points remain, the largest-h point is dropped whenever
    doing so improves R^2 by more than 0.05 (it sits outside the asymptotic
    regime).  With fewer than two usable points the fit is indeterminate.
    """
    hs = np.asarray(hs, float)
    errors = np.asarray(errors, float)
    stderrs = np.asarray(stderrs, float)
    keep = errors > noise_factor * stderrs
    note = ""
    if keep.sum() < len(hs):
        note = f"dropped {len(hs) - int(keep.sum())} noise-floor point(s)"
    hs, errors = hs[keep], errors[keep]
    if len(hs) < 2:
        return SlopeFit(float("nan"), float("nan"), float("nan"), int(len(hs)),
                        False, (note + "; " if note else "")
                        + "too few points above the noise floor")
    order = np.argsort(hs)
    hs, errors = hs[order], errors[order]

    def fit(lh, le):
        slope, intercept = np.polyfit(lh, le, 1)
        pred = slope * lh + intercept
        ss_res = float(np.sum((le - pred) ** 2))
        ss_tot = float(np.sum((le - np.mean(le)) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        return slope, intercept, r2

    lh, le = np.log(hs), np.log(errors)
    slope, intercept, r2 = fit(lh, le)
    while len(lh) > 3:
        s2, i2, r2b = fit(lh[:-1], le[:-1])
        if r2b - r2 > 0.05:
            lh, le = lh[:-1], le[:-1]
            slope, intercept, r2 = s2, i2, r2b
            note = (note + "; " if note else "") + "dropped largest-h point"
        else:
            break
    return SlopeFit(float(slope), float(intercept), float(r2), int(len(lh)),
                    True, note)


def weak_error_sweep(
    schemes: Sequence[str],
    hs: Sequence[float],
    cfg: SamplerConfig,
    pot: PotentialModel,
    mon: Optional[MonitorFunction],
    reference: ReferenceMoments,
    init: Callable,
    k_list: Sequence[int] = (1, 2, 3, 4),
    n_threads: int = 1,
    observable: str = "position",
):
    """Run an ensemble per (scheme, h) and tabulate weak errors of the
    sampled moments against the reference.

    ``observable`` selects which coordinate's moments are compared:
    "position" (against a quadrature reference) or "momentum" (against e.g.
    :func:`maxwellian_reference`; requires kinetic schemes).  Returns
    ``(table, slopes)`` where slopes maps (scheme, k) to a SlopeFit.
    Standard errors use the sample variance of the independent
    per-trajectory moment estimates (final state, or trailing time averages
    when ``cfg.avg_window`` is positive).
    """
    if len(hs) < 1:
        raise ValueError("empty stepsize list")
    if observable not in ("position", "momentum"):
        raise ValueError("observable must be 'position' or 'momentum'")
    k_max = max(k_list)
    table = ConvergenceTable()
    for scheme in schemes:
        for h in hs:
            c = replace(cfg, h=float(h))
            stepper = build_stepper(scheme, pot, mon, c)
            rep = run_ensemble(stepper, c, init, monitor=mon, k_max=k_max,
                               n_threads=n_threads)
            if observable == "momentum":
                if rep.p_moments is None:
                    raise ValueError(
                        f"scheme {scheme} carries no momentum; cannot "
                        "tabulate momentum moments")
                est_all, se_all = rep.p_moments, rep.p_moment_se
            else:
                est_all, se_all = rep.moments, rep.moment_se
            for k in k_list:
                est = est_all[k - 1]
                se = float(se_all[k - 1])
                table.add(scheme, h, k, abs(est - reference.moment(k)), se)
    slopes = {(s, k): table.slope(s, k) for s in schemes for k in k_list}
    return table, slopes


def histogram_l1(samples, lo: float, hi: float, bins: int,
                 ref_pdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """L1 distance between the empirical histogram density of 1D samples and
    a reference density, integrated over [lo, hi].

    The reference is bin-averaged (midpoint rule, 16 sub-points per bin) so
    the comparison is between piecewise-constant densities.  Requires at
    least 50 bins to keep the piecewise-constant approximation error well
    below the experiment tolerances.
    """
    if bins < 50:
        raise ValueError("use at least 50 bins")
    samples = np.asarray(samples, float).ravel()
    if samples.size == 0:
        raise ValueError("no samples")
    emp, ref, width = _binned(samples, lo, hi, bins, ref_pdf)
    return float(np.sum(np.abs(emp / (samples.size * width) - ref)) * width)


def _binned(samples, lo, hi, bins, ref_pdf):
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi))
    width = edges[1] - edges[0]
    sub = np.linspace(0.0, 1.0, 33)[1::2]  # 16 midpoints per bin
    grid = edges[:-1, None] + width * sub[None, :]
    ref = np.mean(np.asarray(ref_pdf(grid.ravel())).reshape(bins, len(sub)),
                  axis=1)
    return counts, ref, width


def histogram_table(samples, lo: float, hi: float, bins: int,
                    ref_pdf: Callable[[np.ndarray], np.ndarray]) -> str:
    """CSV of bin counts next to the bin-averaged reference density
    (columns: bin_left,bin_right,count,ref_density)."""
    samples = np.asarray(samples, float).ravel()
    counts, ref, width = _binned(samples, lo, hi, bins, ref_pdf)
    edges = lo + width * np.arange(bins + 1)
    lines = ["bin_left,bin_right,count,ref_density"]
    for left, right, cnt, rd in zip(edges[:-1], edges[1:], counts, ref):
        lines.append(f"{left!r},{right!r},{cnt},{rd!r}")
    return "\n".join(lines) + "\n"


@dataclass
class EscapeTable:
    """Escape fractions per (scheme, nominal stepsize)."""

    rows: list = field(default_factory=list)  # (scheme, h, fraction)

    def add(self, scheme: str, h: float, fraction: float):
        self.rows.append((scheme, float(h), float(fraction)))

    def fractions(self, scheme: str):
        rows = sorted((r for r in self.rows if r[0] == scheme),
                      key=lambda r: r[1])
        return (np.array([r[1] for r in rows]),
                np.array([r[2] for r in rows]))

    def to_csv(self) -> str:
        lines = ["scheme,h,fraction"]
        for scheme, h, frac in self.rows:
            lines.append(f"{scheme},{h!r},{frac!r}")
        return "\n".join(lines) + "\n"


def escape_rate(
    schemes: Sequence[str],
    hs: Sequence[float],
    cfg: SamplerConfig,
    pot: PotentialModel,
    mon: Optional[MonitorFunction],
    init: Callable,
    n_threads: int = 1,
):
    """Escape fractions per (scheme, h), with matched effective stepsizes.

    Adaptive schemes run at the nominal h.  BAOAB_FIXED runs at h scaled by
    the smallest mean monitor value observed across the adaptive runs at that
    h, so its effective stepsize matches the adaptive schemes'.  Rows are
    keyed by the nominal h.  Returns ``(table, mean_monitors)`` where
    mean_monitors maps (scheme, h) to the run's average monitor value.
    """
    table = EscapeTable()
    mean_monitors = {}
    adaptive = [s for s in schemes if s != "BAOAB_FIXED"]
    for h in hs:
        c = replace(cfg, h=float(h))
        g_min = math.inf
        for scheme in adaptive:
            stepper = build_stepper(scheme, pot, mon, c)
            rep = run_ensemble(stepper, c, init, monitor=mon,
                               n_threads=n_threads)
            table.add(scheme, h, rep.escaped / c.n_traj)
            mean_monitors[(scheme, float(h))] = rep.mean_monitor
            if np.isfinite(rep.mean_monitor):
                g_min = min(g_min, rep.mean_monitor)
        if "BAOAB_FIXED" in schemes:
            scale = g_min if math.isfinite(g_min) else 1.0
            cf = replace(cfg, h=float(h) * scale)
            stepper = build_stepper("BAOAB_FIXED", pot, None, cf)
            rep = run_ensemble(stepper, cf, init, n_threads=n_threads)
            table.add("BAOAB_FIXED", h, rep.escaped / cf.n_traj)
    return table, mean_monitors
