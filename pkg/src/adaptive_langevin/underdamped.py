"""Splitting integrators for the transformed underdamped dynamics.

Sub-steps:

  B-hat   : p += h (g F + beta_inv grad_g),  F = -grad V   (correction in B)
  B-tilde : p += h (g F)                                    (no correction)
  O-hat   : exact OU with rate gamma g(x)
  O-tilde : exact OU with rate gamma g(x) and constant drift beta_inv grad_g,
            mean  p C + beta_inv grad_g (1 - C) / (gamma g),  C = exp(-g h gamma)
  A       : implicit midpoint  x' = x + h p g((x + x') / 2), fixed-point solved

Compositions use half steps for the symmetric outer pairs.  Each O block
consumes exactly one standard-normal draw (OBABO's two half-O blocks consume
two).  Fixed-stepsize baselines (g absent) are written so that the adaptive
schemes with a constant unit monitor reproduce them bitwise under a shared
draw sequence.

Force/monitor evaluations at the end of a symmetric step are reused at the
start of the next step via a thread-local carry (blocks are thread-confined).
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .monitor import MonitorFunction
from .potentials import PotentialModel

__all__ = [
    "SchemeId",
    "SplitStepRecord",
    "step_B_hat",
    "step_B_tilde",
    "step_O_hat",
    "step_O_tilde",
    "step_A_implicit",
    "make_stepper",
    "ADAPTIVE_SCHEMES",
]


class SchemeId(enum.Enum):
    BAOAB_FIXED = "BAOAB_FIXED"
    BAOAB_HAT = "BAOAB_HAT"
    BAOAB_TILDE = "BAOAB_TILDE"
    ABOBA_HAT = "ABOBA_HAT"
    ABOBA_TILDE = "ABOBA_TILDE"
    OBABO_HAT = "OBABO_HAT"
    OBABO_TILDE = "OBABO_TILDE"
    SPV_IP = "SPV_IP"


ADAPTIVE_SCHEMES = tuple(s for s in SchemeId if s is not SchemeId.BAOAB_FIXED)


@dataclass
class SplitStepRecord:
    """State after a sub-step plus the cached evaluations it used.

    Caches (G = g(x), F = -grad V(x), Gp = grad g(x)) refer to the output
    position; they are None after an A step (the position moved)."""

    x: np.ndarray
    p: np.ndarray
    G: Optional[np.ndarray] = None
    F: Optional[np.ndarray] = None
    Gp: Optional[np.ndarray] = None
    fp_iters: Optional[np.ndarray] = None


def _evals(x, pot, mon):
    return mon.eval_g(x)[..., None], -pot.eval_gradV(x), mon.eval_gradg(x)


def step_B_hat(x, p, h, pot: PotentialModel, mon: MonitorFunction,
               beta_inv: float, cache=None) -> SplitStepRecord:
    G, F, Gp = cache if cache is not None else _evals(x, pot, mon)
    p = p + h * (G * F + beta_inv * Gp)
    return SplitStepRecord(x, p, G, F, Gp)


def step_B_tilde(x, p, h, pot: PotentialModel, mon: MonitorFunction,
                 cache=None) -> SplitStepRecord:
    G, F, Gp = cache if cache is not None else _evals(x, pot, mon)
    p = p + h * (G * F)
    return SplitStepRecord(x, p, G, F, Gp)


def step_O_hat(x, p, h, z, gamma: float, beta_inv: float,
               mon: MonitorFunction, G=None) -> SplitStepRecord:
    if G is None:
        G = mon.eval_g(x)[..., None]
    C = np.exp(-gamma * G * h)
    p = C * p + np.sqrt(beta_inv * (1.0 - C * C)) * z
    return SplitStepRecord(x, p, G=G)


def step_O_tilde(x, p, h, z, gamma: float, beta_inv: float,
                 mon: MonitorFunction, G=None, Gp=None) -> SplitStepRecord:
    if gamma <= 0:
        raise ValueError("O-tilde requires gamma > 0 (drift divides by gamma)")
    if G is None:
        G = mon.eval_g(x)[..., None]
    if Gp is None:
        Gp = mon.eval_gradg(x)
    C = np.exp(-gamma * G * h)
    drift = (beta_inv * Gp) * ((1.0 - C) / (gamma * G))
    p = C * p + drift + np.sqrt(beta_inv * (1.0 - C * C)) * z
    return SplitStepRecord(x, p, G=G, Gp=Gp)


def step_A_implicit(x, p, h, mon: MonitorFunction, fp_tol: float = 1e-12,
                    fp_max_iter: int = 100) -> SplitStepRecord:
    """Implicit midpoint position step solved by fixed-point iteration.

    Initial guess x + h p g(x); iterates x_j = x + h p g((x_{j-1} + x) / 2)
    until the iterate difference max-norm is <= fp_tol.  fp_iters counts the
    corrector evaluations per trajectory; non-converged entries are negated
    (the caller's escape policy applies to them)."""

    def g(v):
        return mon.eval_g(v)[..., None]

    hp = h * p
    xk = x + hp * g(x)
    n = x.shape[0]
    iters = np.zeros(n, dtype=np.int64)
    converged = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    for _ in range(fp_max_iter):
        xn = x + hp * g(0.5 * (xk + x))
        delta = np.max(np.abs(xn - xk), axis=1)
        iters[active] += 1
        with np.errstate(invalid="ignore"):
            done = delta <= fp_tol
        dead = ~np.isfinite(delta)
        converged |= done & active
        active &= ~(done | dead)
        xk = xn
        if not active.any():
            break
    signed = np.where(converged, iters, -iters)
    return SplitStepRecord(xk, p, fp_iters=signed)


# fixed-stepsize sub-steps (no monitor)

def _fixed_B(x, p, h, pot):
    return p + h * (-pot.eval_gradV(x))


def _fixed_A(x, p, h):
    return x + h * p


def _fixed_O(p, h, z, gamma, beta_inv):
    C = np.exp(-gamma * h)
    return C * p + np.sqrt(beta_inv * (1.0 - C * C)) * z


class _Carry(threading.local):
    def __init__(self):
        self.x = None
        self.cache = None


@dataclass
class SplittingStepper:
    """One full composition step of the selected scheme."""

    scheme: SchemeId
    pot: PotentialModel
    mon: Optional[MonitorFunction]
    beta_inv: float
    gamma: float
    fp_tol: float = 1e-12
    fp_max_iter: int = 100
    _carry: _Carry = field(default_factory=_Carry, repr=False)

    def __post_init__(self):
        tilde = self.scheme in (SchemeId.BAOAB_TILDE, SchemeId.ABOBA_TILDE,
                                SchemeId.OBABO_TILDE, SchemeId.SPV_IP)
        if tilde and self.gamma <= 0:
            raise ValueError(f"{self.scheme.value} requires gamma > 0")
        if self.scheme is not SchemeId.BAOAB_FIXED and self.mon is None:
            raise ValueError("adaptive schemes need a monitor function")

    # cached (G, F, Gp) at x, reusing the previous step's end-of-step values
    def _cache_at(self, x):
        c = self._carry
        if c.x is x and c.cache is not None:
            return c.cache
        return _evals(x, self.pot, self.mon)

    def _store(self, x, cache):
        self._carry.x = x
        self._carry.cache = cache

    def step(self, x, p, rng, h):
        s = self.scheme
        if s is SchemeId.BAOAB_FIXED:
            z = rng.standard_normal(x.shape)
            p = _fixed_B(x, p, 0.5 * h, self.pot)
            x = _fixed_A(x, p, 0.5 * h)
            p = _fixed_O(p, h, z, self.gamma, self.beta_inv)
            x = _fixed_A(x, p, 0.5 * h)
            p = _fixed_B(x, p, 0.5 * h, self.pot)
            return x, p, None
        if s in (SchemeId.BAOAB_HAT, SchemeId.BAOAB_TILDE):
            return self._baoab(x, p, rng, h, hat=s is SchemeId.BAOAB_HAT)
        if s in (SchemeId.ABOBA_HAT, SchemeId.ABOBA_TILDE):
            return self._aboba(x, p, rng, h, hat=s is SchemeId.ABOBA_HAT)
        if s in (SchemeId.OBABO_HAT, SchemeId.OBABO_TILDE):
            return self._obabo(x, p, rng, h, hat=s is SchemeId.OBABO_HAT)
        return self._spv(x, p, rng, h)

    def _B(self, x, p, h, hat, cache):
        if hat:
            return step_B_hat(x, p, h, self.pot, self.mon, self.beta_inv, cache)
        return step_B_tilde(x, p, h, self.pot, self.mon, cache)

    def _O(self, x, p, h, z, hat, G=None, Gp=None):
        if hat:
            return step_O_hat(x, p, h, z, self.gamma, self.beta_inv, self.mon, G)
        return step_O_tilde(x, p, h, z, self.gamma, self.beta_inv, self.mon, G, Gp)

    def _A(self, x, p, h):
        return step_A_implicit(x, p, h, self.mon, self.fp_tol, self.fp_max_iter)

    def _baoab(self, x, p, rng, h, hat):
        z = rng.standard_normal(x.shape)
        rec = self._B(x, p, 0.5 * h, hat, self._cache_at(x))
        a1 = self._A(x, rec.p, 0.5 * h)
        x = a1.x
        G, _, Gp = _evals(x, self.pot, self.mon)  # F not needed by O
        o = self._O(x, a1.p, h, z, hat, G=G, Gp=Gp)
        a2 = self._A(x, o.p, 0.5 * h)
        x = a2.x
        cache = _evals(x, self.pot, self.mon)
        rec = self._B(x, a2.p, 0.5 * h, hat, cache)
        self._store(x, cache)
        return x, rec.p, np.stack([a1.fp_iters, a2.fp_iters])

    def _aboba(self, x, p, rng, h, hat):
        z = rng.standard_normal(x.shape)
        a1 = self._A(x, p, 0.5 * h)
        x = a1.x
        cache = _evals(x, self.pot, self.mon)
        rec = self._B(x, a1.p, 0.5 * h, hat, cache)
        o = self._O(x, rec.p, h, z, hat, G=cache[0], Gp=cache[2])
        rec = self._B(x, o.p, 0.5 * h, hat, cache)
        a2 = self._A(x, rec.p, 0.5 * h)
        return a2.x, rec.p, np.stack([a1.fp_iters, a2.fp_iters])

    def _obabo(self, x, p, rng, h, hat):
        z1 = rng.standard_normal(x.shape)
        z2 = rng.standard_normal(x.shape)
        cache = self._cache_at(x)
        o = self._O(x, p, 0.5 * h, z1, hat, G=cache[0], Gp=cache[2])
        rec = self._B(x, o.p, 0.5 * h, hat, cache)
        a = self._A(x, rec.p, h)
        x = a.x
        cache = _evals(x, self.pot, self.mon)
        rec = self._B(x, a.p, 0.5 * h, hat, cache)
        o = self._O(x, rec.p, 0.5 * h, z2, hat, G=cache[0], Gp=cache[2])
        self._store(x, cache)
        return x, o.p, a.fp_iters[None, :]

    def _spv(self, x, p, rng, h):
        # stochastic position Verlet: implicit position half-steps around an
        # exact OU core whose constant drift folds in the force and the
        # monitor correction: mean (G F + beta_inv Gp) / (gamma G)
        z = rng.standard_normal(x.shape)
        a1 = self._A(x, p, 0.5 * h)
        x = a1.x
        G, F, Gp = _evals(x, self.pot, self.mon)
        C = np.exp(-self.gamma * G * h)
        mu = (G * F + self.beta_inv * Gp) / (self.gamma * G)
        p = C * a1.p + mu * (1.0 - C) + np.sqrt(self.beta_inv * (1.0 - C * C)) * z
        a2 = self._A(x, p, 0.5 * h)
        return a2.x, p, np.stack([a1.fp_iters, a2.fp_iters])


@dataclass
class FixedSplittingStepper:
    """Plain fixed-stepsize baselines for the reduction-law tests."""

    letters: str  # "BAOAB", "ABOBA", "OBABO", "SPV"
    pot: PotentialModel
    beta_inv: float
    gamma: float

    def step(self, x, p, rng, h):
        if self.letters == "BAOAB":
            z = rng.standard_normal(x.shape)
            p = _fixed_B(x, p, 0.5 * h, self.pot)
            x = _fixed_A(x, p, 0.5 * h)
            p = _fixed_O(p, h, z, self.gamma, self.beta_inv)
            x = _fixed_A(x, p, 0.5 * h)
            p = _fixed_B(x, p, 0.5 * h, self.pot)
        elif self.letters == "ABOBA":
            z = rng.standard_normal(x.shape)
            x = _fixed_A(x, p, 0.5 * h)
            p = _fixed_B(x, p, 0.5 * h, self.pot)
            p = _fixed_O(p, h, z, self.gamma, self.beta_inv)
            p = _fixed_B(x, p, 0.5 * h, self.pot)
            x = _fixed_A(x, p, 0.5 * h)
        elif self.letters == "OBABO":
            z1 = rng.standard_normal(x.shape)
            z2 = rng.standard_normal(x.shape)
            p = _fixed_O(p, 0.5 * h, z1, self.gamma, self.beta_inv)
            p = _fixed_B(x, p, 0.5 * h, self.pot)
            x = _fixed_A(x, p, h)
            p = _fixed_B(x, p, 0.5 * h, self.pot)
            p = _fixed_O(p, 0.5 * h, z2, self.gamma, self.beta_inv)
        elif self.letters == "SPV":
            z = rng.standard_normal(x.shape)
            x = _fixed_A(x, p, 0.5 * h)
            F = -self.pot.eval_gradV(x)
            C = np.exp(-self.gamma * h)
            mu = F / self.gamma
            p = C * p + mu * (1.0 - C) + np.sqrt(self.beta_inv * (1.0 - C * C)) * z
            x = _fixed_A(x, p, 0.5 * h)
        else:
            raise ValueError(f"unknown letter sequence {self.letters!r}")
        return x, p, None


def make_stepper(scheme: SchemeId, pot: PotentialModel,
                 mon: Optional[MonitorFunction], beta_inv: float, gamma: float,
                 fp_tol: float = 1e-12, fp_max_iter: int = 100):
    return SplittingStepper(scheme, pot, mon, beta_inv, gamma,
                            fp_tol, fp_max_iter)
