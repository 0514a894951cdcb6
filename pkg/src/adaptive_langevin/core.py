"""Shared domain types, deterministic RNG streams and ensemble execution.

Trajectories are propagated in vectorised blocks: a stepper acts on position
arrays of shape (n, d) (and momentum arrays of the same shape for underdamped
dynamics).  Each block owns an independent, deterministically derived random
stream, so ensemble results are a pure function of the configuration and are
independent of thread scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "PhaseState",
    "SamplerConfig",
    "EnsembleReport",
    "derive_stream",
    "run_ensemble",
    "sample_positions",
    "run_trajectory",
    "run_paths",
    "gaussian_init",
    "ESCAPE_RADIUS",
]

# A trajectory is flagged escaped once any coordinate is non-finite or leaves
# the |x|_inf <= ESCAPE_RADIUS safety box (far outside every experiment's
# support).
ESCAPE_RADIUS = 1.0e3

# Trajectories are simulated in blocks of this many at a time; the block is
# also the unit of RNG-stream derivation and of (optional) thread parallelism.
DEFAULT_BLOCK_SIZE = 1 << 14


@dataclass
class PhaseState:
    """Position (and optional momentum) of a single walker."""

    x: np.ndarray
    p: Optional[np.ndarray] = None

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if self.p is not None:
            self.p = np.atleast_1d(np.asarray(self.p, dtype=float))
            if self.p.shape != self.x.shape:
                raise ValueError("x and p must have identical shape")
        if self.x.ndim != 1 or self.x.size < 1:
            raise ValueError("x must be a vector of length >= 1")

    @property
    def dim(self) -> int:
        return self.x.size


@dataclass
class SamplerConfig:
    """Run parameters shared by every integrator."""

    h: float
    beta_inv: float = 1.0
    gamma: float = 0.0
    t_final: float = 1.0
    burn_in_steps: int = 0
    n_traj: int = 1
    seed: int = 0
    fp_tol: float = 1e-12       # fixed-point stopping tolerance (max-norm)
    fp_max_iter: int = 100
    avg_window: float = 0.0     # trailing time window for ergodic averages
                                # (0 = estimate moments from the final state)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be > 0")
        if not self.beta_inv > 0:
            raise ValueError("beta_inv must be > 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if not self.t_final > 0:
            raise ValueError("t_final must be > 0")
        if self.burn_in_steps < 0:
            raise ValueError("burn_in_steps must be >= 0")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if not 0.0 < self.fp_tol < 1.0:
            raise ValueError("fp_tol must lie in (0, 1)")
        if self.fp_max_iter < 1:
            raise ValueError("fp_max_iter must be >= 1")
        if self.avg_window < 0:
            raise ValueError("avg_window must be >= 0")

    @property
    def n_steps(self) -> int:
        """Number of post-burn-in steps, N = ceil(T_f / h)."""
        return int(math.ceil(self.t_final / self.h - 1e-12))


@dataclass
class EnsembleReport:
    """Aggregates over an ensemble run."""

    moments: np.ndarray          # E[x_0^k], k = 1..k_max, escaped excluded
    mean_monitor: float          # average g over all samples and iterations
    escaped: int
    fp_iters_mean: float
    fp_iters_max: int
    wall_steps: int              # steps per trajectory (burn-in included)
    n_traj: int = 0
    moment_se: Optional[np.ndarray] = None  # standard error per order, from
                                            # independent trajectory estimates
    p_moments: Optional[np.ndarray] = None  # E[p_0^k] and its standard error;
    p_moment_se: Optional[np.ndarray] = None  # None for momentum-free runs


def derive_stream(seed: int, trajectory_index: int) -> np.random.Generator:
    """Deterministic per-index random stream.

    Streams are derived with numpy's SeedSequence spawning mechanism:
    ``SeedSequence(seed, spawn_key=(trajectory_index,))`` feeding a PCG64
    generator, so identical (seed, index) pairs always yield the identical
    normal sequence and distinct indices give statistically independent
    streams.  Normal variates use numpy's ziggurat ``standard_normal``; the
    draw sequence is reproducible for this implementation (not across
    libraries).
    """
    if trajectory_index < 0:
        raise ValueError("trajectory_index must be >= 0")
    ss = np.random.SeedSequence(seed, spawn_key=(trajectory_index,))
    return np.random.Generator(np.random.PCG64(ss))


def gaussian_init(
    center: Sequence[float] | float,
    var: float,
    dim: int = 1,
    momentum: bool = False,
    p_var: float = 1.0,
) -> Callable:
    """Initial-condition sampler: x ~ N(center, var I), p ~ N(0, p_var I)."""
    mu = np.broadcast_to(np.atleast_1d(np.asarray(center, float)), (dim,))

    def init(rng: np.random.Generator, n: int):
        x = mu + math.sqrt(var) * rng.standard_normal((n, dim))
        p = math.sqrt(p_var) * rng.standard_normal((n, dim)) if momentum else None
        return x, p

    return init


@dataclass
class _BlockResult:
    moment_sums: np.ndarray      # sum over trajectories of per-traj estimates
    moment_sq_sums: np.ndarray   # sum of their squares (for standard errors)
    alive: int
    escaped: int
    g_sum: float
    g_count: int
    fp_sum: int
    fp_count: int
    fp_max: int
    p_moment_sums: Optional[np.ndarray] = None     # momentum analogues,
    p_moment_sq_sums: Optional[np.ndarray] = None  # None without momentum


def _run_block(stepper, cfg: SamplerConfig, init, monitor, k_max: int,
               block_index: int, n_block: int, total_steps: int) -> _BlockResult:
    rng = derive_stream(cfg.seed, block_index)
    x, p = init(rng, n_block)
    x = np.asarray(x, dtype=float)
    if p is not None:
        p = np.asarray(p, dtype=float)
    escaped = np.zeros(n_block, dtype=bool)
    g_sum = 0.0
    g_count = 0
    fp_sum = 0
    fp_count = 0
    fp_max = 0
    # Per-trajectory moment estimates: powers of x_0 averaged over the last
    # n_avg post-burn-in steps (n_avg = 1 reproduces the final-state
    # estimator).  Escaped trajectories are dropped from the average.
    n_avg = 1
    if cfg.avg_window > 0:
        n_avg = max(1, min(cfg.n_steps, int(round(cfg.avg_window / cfg.h))))
    acc = np.zeros((n_block, k_max))
    pacc = None if p is None else np.zeros((n_block, k_max))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for step_index in range(total_steps):
            x, p, fp_iters = stepper.step(x, p, rng, cfg.h)
            bad = ~(np.max(np.abs(x), axis=1) <= ESCAPE_RADIUS)  # catches NaN
            if fp_iters is not None:
                alive = ~escaped
                # shape (n,) for one A sub-step per step, (k, n) for k of them
                fpi = np.atleast_2d(fp_iters)
                bad |= np.any(fpi < 0, axis=0)  # non-converged fixed point
                it = np.abs(fpi[:, alive])
                if it.size:
                    fp_sum += int(it.sum())
                    fp_count += it.size
                    fp_max = max(fp_max, int(it.max()))
            escaped |= bad
            if monitor is not None:
                alive = ~escaped
                if alive.any():
                    g_sum += float(np.sum(monitor.eval_g(x[alive])))
                    g_count += int(alive.sum())
            if step_index >= total_steps - n_avg:
                x1 = np.where(escaped, 0.0, x[:, 0])
                xp = np.ones(n_block)
                for k in range(k_max):
                    xp = xp * x1
                    acc[:, k] += xp
                if pacc is not None:
                    p1 = np.where(escaped, 0.0, p[:, 0])
                    pp = np.ones(n_block)
                    for k in range(k_max):
                        pp = pp * p1
                        pacc[:, k] += pp
    alive = ~escaped
    est = acc[alive] / n_avg
    moment_sums = est.sum(axis=0)
    moment_sq_sums = (est * est).sum(axis=0)
    p_sums = p_sq_sums = None
    if pacc is not None:
        pest = pacc[alive] / n_avg
        p_sums = pest.sum(axis=0)
        p_sq_sums = (pest * pest).sum(axis=0)
    return _BlockResult(moment_sums, moment_sq_sums, int(alive.sum()),
                        int(escaped.sum()), g_sum, g_count,
                        fp_sum, fp_count, fp_max, p_sums, p_sq_sums)


def run_ensemble(
    stepper,
    cfg: SamplerConfig,
    init: Callable,
    monitor=None,
    k_max: int = 4,
    n_threads: int = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
) -> EnsembleReport:
    """Propagate an ensemble of trajectories and aggregate observables.

    Each trajectory takes ``burn_in_steps + ceil(t_final / h)`` steps.
    Moments of the first coordinate (orders 1..k_max) come from one estimate
    per trajectory -- the final state by default, or a trailing time average
    over ``cfg.avg_window`` time units when that is positive -- averaged over
    non-escaped trajectories; escaped trajectories are counted but excluded.
    ``moment_se`` is the standard error across the independent per-trajectory
    estimates.  When the dynamics carries momentum the same estimates are
    collected for the first momentum coordinate (``p_moments`` /
    ``p_moment_se``; None otherwise).
    Blocks are merged in index order, so the result does not depend on the
    thread count or completion order.
    """
    total_steps = cfg.burn_in_steps + cfg.n_steps
    n_blocks = (cfg.n_traj + block_size - 1) // block_size
    sizes = [min(block_size, cfg.n_traj - b * block_size) for b in range(n_blocks)]

    def job(b):
        return _run_block(stepper, cfg, init, monitor, k_max, b, sizes[b], total_steps)

    if n_threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            results = list(ex.map(job, range(n_blocks)))
    else:
        results = [job(b) for b in range(n_blocks)]

    moment_sums = np.zeros(k_max)
    moment_sq_sums = np.zeros(k_max)
    has_p = results[0].p_moment_sums is not None
    p_sums = np.zeros(k_max) if has_p else None
    p_sq_sums = np.zeros(k_max) if has_p else None
    alive = escaped = 0
    g_sum = 0.0
    g_count = 0
    fp_sum = fp_count = fp_max = 0
    for r in results:  # index order: deterministic reduction
        moment_sums += r.moment_sums
        moment_sq_sums += r.moment_sq_sums
        if has_p:
            p_sums += r.p_moment_sums
            p_sq_sums += r.p_moment_sq_sums
        alive += r.alive
        escaped += r.escaped
        g_sum += r.g_sum
        g_count += r.g_count
        fp_sum += r.fp_sum
        fp_count += r.fp_count
        fp_max = max(fp_max, r.fp_max)

    def _mean_se(sums, sq_sums):
        if not alive:
            return np.full(k_max, np.nan), np.full(k_max, np.nan)
        mean = sums / alive
        var = np.maximum(sq_sums / alive - mean * mean, 0.0)
        return mean, np.sqrt(var / alive)

    moments, moment_se = _mean_se(moment_sums, moment_sq_sums)
    p_moments = p_moment_se = None
    if has_p:
        p_moments, p_moment_se = _mean_se(p_sums, p_sq_sums)
    return EnsembleReport(
        moments=moments,
        moment_se=moment_se,
        p_moments=p_moments,
        p_moment_se=p_moment_se,
        mean_monitor=g_sum / g_count if g_count else float("nan"),
        escaped=escaped,
        fp_iters_mean=fp_sum / fp_count if fp_count else 0.0,
        fp_iters_max=fp_max,
        wall_steps=total_steps,
        n_traj=cfg.n_traj,
    )


def sample_positions(
    stepper,
    cfg: SamplerConfig,
    init: Callable,
    n_threads: int = 1,
    block_size: int = DEFAULT_BLOCK_SIZE,
):
    """Like :func:`run_ensemble` but returns the raw final positions.

    Returns ``(positions, n_escaped)`` where positions is an (n_alive, d)
    array of end-of-run positions of the non-escaped trajectories, in
    deterministic block/index order.
    """
    total_steps = cfg.burn_in_steps + cfg.n_steps
    n_blocks = (cfg.n_traj + block_size - 1) // block_size
    sizes = [min(block_size, cfg.n_traj - b * block_size) for b in range(n_blocks)]

    def job(b):
        rng = derive_stream(cfg.seed, b)
        x, p = init(rng, sizes[b])
        x = np.asarray(x, dtype=float)
        if p is not None:
            p = np.asarray(p, dtype=float)
        escaped = np.zeros(sizes[b], dtype=bool)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for _ in range(total_steps):
                x, p, fp_iters = stepper.step(x, p, rng, cfg.h)
                bad = ~(np.max(np.abs(x), axis=1) <= ESCAPE_RADIUS)
                if fp_iters is not None:
                    bad |= np.any(np.atleast_2d(fp_iters) < 0, axis=0)
                escaped |= bad
        return x[~escaped], int(escaped.sum())

    if n_threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            results = list(ex.map(job, range(n_blocks)))
    else:
        results = [job(b) for b in range(n_blocks)]
    xs = np.concatenate([r[0] for r in results], axis=0)
    return xs, sum(r[1] for r in results)


def run_trajectory(stepper, cfg: SamplerConfig, state0: PhaseState,
                   record_every: int = 1):
    """Propagate a single trajectory and record its path.

    Returns ``(path, escaped_step)``: path is an (m, d) array of positions
    recorded every ``record_every`` steps (initial position included) and
    escaped_step is the step index at which the trajectory escaped, or -1.
    Recording stops at escape.
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    rng = derive_stream(cfg.seed, 0)
    x = state0.x[None, :].astype(float)
    p = None if state0.p is None else state0.p[None, :].astype(float)
    total_steps = cfg.burn_in_steps + cfg.n_steps
    path = [x[0].copy()]
    escaped_step = -1
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for step in range(1, total_steps + 1):
            x, p, fp_iters = stepper.step(x, p, rng, cfg.h)
            bad = not (np.max(np.abs(x)) <= ESCAPE_RADIUS)
            if fp_iters is not None:
                bad = bad or bool(np.any(np.asarray(fp_iters) < 0))
            if bad:
                escaped_step = step
                break
            if step % record_every == 0:
                path.append(x[0].copy())
    return np.asarray(path), escaped_step


def run_paths(stepper, cfg: SamplerConfig, x0: np.ndarray,
              p0: Optional[np.ndarray], record_every: int = 1):
    """Propagate n trajectories together and record all their paths.

    ``x0``/``p0`` have shape (n, d).  Returns ``(paths, alive)`` where paths
    has shape (m, n, d) with the initial state included and alive is an
    (m, n) mask that turns False from the first recorded point at or after a
    trajectory's escape (its recorded positions stop being meaningful there).
    All trajectories share one random stream (index 0 of cfg.seed).
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    rng = derive_stream(cfg.seed, 0)
    x = np.array(x0, dtype=float)
    p = None if p0 is None else np.array(p0, dtype=float)
    n = x.shape[0]
    total_steps = cfg.burn_in_steps + cfg.n_steps
    escaped = np.zeros(n, dtype=bool)
    paths = [x.copy()]
    alive = [~escaped]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for step in range(1, total_steps + 1):
            x, p, fp_iters = stepper.step(x, p, rng, cfg.h)
            bad = ~(np.max(np.abs(x), axis=1) <= ESCAPE_RADIUS)
            if fp_iters is not None:
                bad |= np.any(np.atleast_2d(fp_iters) < 0, axis=0)
            escaped |= bad
            if step % record_every == 0:
                paths.append(x.copy())
                alive.append(~escaped)
    return np.asarray(paths), np.asarray(alive)
