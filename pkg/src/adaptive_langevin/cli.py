"""Experiment command line: reproduces the sampling studies from config files.

Subcommands
    sample       one ensemble; writes histogram.csv + report.csv
    sweep        weak-error convergence over a stepsize list; convergence.csv + slopes.csv
    escape       escape fractions over a stepsize list; escape.csv
    audit        monitor criteria + (1D) stationarity audits; audit.csv
    two-pathway  2D channel study; trajectory.csv + occupancy.csv
    bayes-gen    synthetic Gaussian observations; data.csv

Usage: ``adaptive-langevin <subcommand> --config <path> [--out <dir>]
[--seed <u64>] [--threads <n>]``.  The output directory resolves in the order
``--out`` flag, ``ADAPTIVE_LANGEVIN_OUT`` environment variable, the config's
``[experiment] out`` key, then ``./results``.

Config grammar: INI-style flat key-value sections, case-sensitive keys, no
interpolation, ``#``/``;`` inline comments.  Unknown sections or keys are
rejected.  Exit codes: 0 success; 1 config/validation error; 2 audit or fit
criterion failure; 3 numerical non-convergence (e.g. every trajectory
escaped).
"""

from __future__ import annotations

import argparse
import configparser
import io
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, monitor as monitor_mod, overdamped, potentials
from .core import (SamplerConfig, derive_stream, gaussian_init,
                   run_ensemble, run_paths, sample_positions)
from .underdamped import SchemeId

__all__ = ["main", "parse_config", "serialize_config", "ExperimentConfig",
           "ConfigError", "CriterionFailure", "NumericalError"]

ENV_OUT = "ADAPTIVE_LANGEVIN_OUT"

EXPERIMENT_KINDS = ("sample", "sweep", "escape", "audit", "two-pathway",
                    "bayes-gen")


class ConfigError(ValueError):
    """Invalid configuration; exits with code 1."""


class CriterionFailure(RuntimeError):
    """An audit or fit criterion failed; exits with code 2."""


class NumericalError(RuntimeError):
    """A run produced no usable numbers; exits with code 3."""


def _floats(s: str):
    try:
        return [float(t) for t in s.split(",") if t.strip()]
    except ValueError:
        raise ValueError("expected a comma-separated list of numbers")


def _ints(s: str):
    return [int(t) for t in s.split(",") if t.strip()]


def _strs(s: str):
    return [t.strip() for t in s.split(",") if t.strip()]


def _bool(s: str):
    t = s.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError("expected a boolean (true/false)")


# section -> key -> converter.  Keys are case-sensitive (so m and M coexist).
_SCHEMA = {
    "experiment": {"kind": str, "schemes": _strs, "out": str},
    "potential": {"id": str, "a": float, "b": float, "c": float, "x0": float,
                  "k": float, "dim": int, "K": int, "prior_center": float,
                  "data": str, "y": _floats,
                  "k1": float, "k2": float, "k3": float, "k4": float},
    "monitor": {"id": str, "m": float, "M": float, "r": float, "alpha": int,
                "value": float, "reduce_near_channel": _bool},
    "sampler": {"h": float, "beta_inv": float, "gamma": float,
                "t_final": float, "burn_in_steps": int, "n_traj": int,
                "seed": int, "fp_tol": float, "fp_max_iter": int,
                "avg_window": float},
    "init": {"center": _floats, "var": float, "p_var": float},
    "sample": {"lo": float, "hi": float, "bins": int},
    "sweep": {"h_list": _floats, "k_list": _ints, "lo": float, "hi": float,
              "observable": str},
    "escape": {"h_list": _floats},
    "audit": {"box_lo": _floats, "box_hi": _floats, "n_grid": int,
              "spacing": float, "lo": float, "hi": float, "ip_bound": float},
    "two_pathway": {"h_small": float, "record_every": int, "n_paths": int,
                    "channel_threshold": float, "junction_cut": float,
                    "start": _floats},
    "bayes_gen": {"n": int, "mu_true": float},
}


@dataclass
class ExperimentConfig:
    """Typed view of a parsed config: section name -> key -> value."""

    sections: dict

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        v = self.get(section, key)
        if v is None:
            raise ConfigError(f"[{section}] {key}: required key is missing")
        return v


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None,
                                   inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep keys case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax error: {e}") from None
    sections = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        out = {}
        for key, raw in cp.items(sec):
            conv = _SCHEMA[sec].get(key)
            if conv is None:
                raise ConfigError(f"[{sec}] {key}: unknown key")
            try:
                out[key] = conv(raw)
            except (ValueError, TypeError) as e:
                raise ConfigError(f"[{sec}] {key}: invalid value {raw!r} "
                                  f"({e})") from None
        sections[sec] = out
    kind = sections.get("experiment", {}).get("kind")
    if kind is None:
        raise ConfigError("[experiment] kind: required key is missing")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"[experiment] kind: must be one of "
                          f"{', '.join(EXPERIMENT_KINDS)}")
    return ExperimentConfig(sections)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ",".join(_fmt(t) for t in v)
    return str(v)


def serialize_config(ec: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(parse(t))) == parse(t)."""
    buf = io.StringIO()
    for sec in _SCHEMA:
        if sec not in ec.sections:
            continue
        buf.write(f"[{sec}]\n")
        for key in _SCHEMA[sec]:
            if key in ec.sections[sec]:
                buf.write(f"{key} = {_fmt(ec.sections[sec][key])}\n")
        buf.write("\n")
    return buf.getvalue()


# ------------------------------------------------------------------ builders

def build_potential(ec: ExperimentConfig):
    pid = ec.require("potential", "id")
    sec = ec.sections.get("potential", {})
    allowed = {
        "modified_harmonic": {"id", "a", "b", "c", "x0"},
        "harmonic": {"id", "k", "dim"},
        "bayes_posterior": {"id", "K", "prior_center", "data", "y"},
        "two_pathway": {"id", "k1", "k2", "k3", "k4"},
    }
    if pid not in allowed:
        raise ConfigError(f"[potential] id: unknown potential {pid!r}")
    extra = set(sec) - allowed[pid]
    if extra:
        raise ConfigError(f"[potential] keys {sorted(extra)} do not apply to "
                          f"{pid}")
    try:
        if pid == "modified_harmonic":
            return potentials.modified_harmonic(
                ec.require("potential", "a"), ec.require("potential", "b"),
                ec.require("potential", "c"), ec.require("potential", "x0"))
        if pid == "harmonic":
            return potentials.harmonic(ec.require("potential", "k"),
                                       ec.get("potential", "dim", 1))
        if pid == "bayes_posterior":
            y = ec.get("potential", "y")
            data = ec.get("potential", "data")
            if (y is None) == (data is None):
                raise ConfigError("[potential] bayes_posterior needs exactly "
                                  "one of 'y' or 'data'")
            if data is not None:
                y = _read_data_csv(data)
            return potentials.bayes_posterior(
                y, ec.require("potential", "K"),
                ec.require("potential", "prior_center"))
        return potentials.two_pathway(
            ec.get("potential", "k1", 0.1), ec.get("potential", "k2", 50.0),
            ec.get("potential", "k3", 50.0), ec.get("potential", "k4", 0.1))
    except ValueError as e:
        raise ConfigError(f"[potential] {e}") from None


def _read_data_csv(path: str):
    try:
        rows = Path(path).read_text().strip().splitlines()
    except OSError as e:
        raise ConfigError(f"[potential] data: cannot read {path!r}: {e}")
    if not rows or rows[0].strip() != "y":
        raise ConfigError(f"[potential] data: {path!r} must have header 'y'")
    return [float(r) for r in rows[1:]]


def build_monitor(ec: ExperimentConfig, pot):
    mid = ec.get("monitor", "id", "none")
    if mid == "none":
        return None
    m = ec.get("monitor", "m")
    M = ec.get("monitor", "M")
    kw = {}
    if ec.get("monitor", "r") is not None:
        kw["r"] = ec.get("monitor", "r")
    if ec.get("monitor", "alpha") is not None:
        kw["alpha"] = ec.get("monitor", "alpha")
    try:
        if mid == "constant":
            return monitor_mod.constant_monitor(ec.require("monitor", "value"),
                                                pot.dim)
        if m is None or M is None:
            raise ConfigError(f"[monitor] {mid} needs m and M")
        if mid in ("g1", "g2", "g3"):
            f = getattr(monitor_mod, f"monitor_{mid}")
            return f(pot, m, M, **kw)
        if mid == "bayes":
            if not hasattr(pot, "y"):
                raise ConfigError("[monitor] bayes monitor needs the "
                                  "bayes_posterior potential")
            return monitor_mod.monitor_bayes(float(np.mean(pot.y)),
                                             pot.prior_center, m, M, **kw)
        if mid == "channel2d":
            kw["reduce_near_channel"] = ec.get("monitor",
                                               "reduce_near_channel", True)
            return monitor_mod.monitor_2d_channel(m, M, **kw)
    except ValueError as e:
        raise ConfigError(f"[monitor] {e}") from None
    raise ConfigError(f"[monitor] id: unknown monitor {mid!r}")


def build_sampler(ec: ExperimentConfig, seed_override: Optional[int]) -> SamplerConfig:
    sec = ec.sections.get("sampler", {})
    kw = dict(sec)
    if seed_override is not None:
        kw["seed"] = seed_override
    if "h" not in kw:
        raise ConfigError("[sampler] h: required key is missing")
    try:
        return SamplerConfig(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[sampler] {e}") from None


def _is_underdamped(scheme: str) -> bool:
    return scheme in SchemeId.__members__


def build_init(ec: ExperimentConfig, pot, cfg: SamplerConfig, momentum: bool):
    params = getattr(pot, "params", {})
    default_center = [params.get("x0", 0.0)] * pot.dim
    if pot.dim == 2:
        default_center = [2.0, 0.0]
    center = ec.get("init", "center", default_center)
    if len(center) != pot.dim:
        raise ConfigError(f"[init] center: expected {pot.dim} value(s)")
    var = ec.get("init", "var", cfg.beta_inv)
    p_var = ec.get("init", "p_var", cfg.beta_inv)
    return gaussian_init(center, var, pot.dim, momentum=momentum, p_var=p_var)


def _schemes(ec: ExperimentConfig, default=None):
    schemes = ec.get("experiment", "schemes", default)
    if not schemes:
        raise ConfigError("[experiment] schemes: required key is missing")
    for s in schemes:
        if s not in ("EM", "EM_RESCALED", "EM_IP") and not _is_underdamped(s):
            raise ConfigError(f"[experiment] schemes: unknown scheme {s!r}")
    return schemes


def _write(outdir: Path, name: str, text: str):
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / name).write_text(text)


def _reference(pot, beta_inv, lo, hi, k_max=4):
    # The histogram window is usually tighter than the quadrature support;
    # widen geometrically until the tail-mass check passes.
    w = hi - lo
    err = None
    for i in range(8):
        try:
            return analysis.gibbs_reference(pot, beta_inv, lo - i * w,
                                            hi + i * w, k_max)
        except ValueError as e:
            err = e
    raise NumericalError(f"reference quadrature failed: {err}")


def _ref_pdf(pot, ref):
    beta = 1.0 / ref.beta_inv

    def pdf(t):
        t = np.asarray(t, float)
        return np.exp(-beta * pot.eval_V(t[..., None])) / ref.Z

    return pdf


# ------------------------------------------------------------------ commands

def cmd_sample(ec: ExperimentConfig, outdir: Path, threads: int) -> int:
    schemes = _schemes(ec)
    if len(schemes) != 1:
        raise ConfigError("[experiment] schemes: sample runs one scheme")
    scheme = schemes[0]
    pot = build_potential(ec)
    mon = build_monitor(ec, pot)
    cfg = build_sampler(ec, None)
    if pot.dim != 1:
        raise ConfigError("sample requires a 1D potential")
    lo = ec.require("sample", "lo")
    hi = ec.require("sample", "hi")
    bins = ec.get("sample", "bins", 200)
    init = build_init(ec, pot, cfg, momentum=_is_underdamped(scheme))
    stepper = analysis.build_stepper(scheme, pot, mon, cfg)
    ref = _reference(pot, cfg.beta_inv, lo, hi)
    pdf = _ref_pdf(pot, ref)

    xs, _ = sample_positions(stepper, cfg, init, n_threads=threads)
    if xs.shape[0] == 0:
        raise NumericalError("every trajectory escaped; reduce h")
    rep = run_ensemble(stepper, cfg, init, monitor=mon, n_threads=threads)
    l1 = analysis.histogram_l1(xs[:, 0], lo, hi, bins, pdf)

    _write(outdir, "histogram.csv",
           analysis.histogram_table(xs[:, 0], lo, hi, bins, pdf))
    header = ("scheme,n_traj,wall_steps,escaped,mean_monitor,fp_iters_mean,"
              "fp_iters_max,m1,m2,m3,m4,l1")
    row = (f"{scheme},{rep.n_traj},{rep.wall_steps},{rep.escaped},"
           f"{rep.mean_monitor!r},{rep.fp_iters_mean!r},{rep.fp_iters_max},"
           + ",".join(repr(float(v)) for v in rep.moments[:4])
           + f",{l1!r}")
    _write(outdir, "report.csv", header + "\n" + row + "\n")
    return 0


def cmd_sweep(ec: ExperimentConfig, outdir: Path, threads: int) -> int:
    schemes = _schemes(ec)
    pot = build_potential(ec)
    mon = build_monitor(ec, pot)
    cfg = build_sampler(ec, None)
    hs = ec.require("sweep", "h_list")
    k_list = ec.get("sweep", "k_list", [1, 2, 3, 4])
    lo = ec.require("sweep", "lo")
    hi = ec.require("sweep", "hi")
    observable = ec.get("sweep", "observable", "position")
    if observable not in ("position", "momentum"):
        raise ConfigError("[sweep] observable: must be 'position' or "
                          "'momentum'")
    momentum = any(_is_underdamped(s) for s in schemes)
    if momentum and not all(_is_underdamped(s) for s in schemes):
        raise ConfigError("[experiment] schemes: do not mix overdamped and "
                          "momentum schemes in one sweep")
    if observable == "momentum" and not momentum:
        raise ConfigError("[sweep] observable: momentum moments need "
                          "momentum schemes")
    init = build_init(ec, pot, cfg, momentum=momentum)
    if observable == "momentum":
        ref = analysis.maxwellian_reference(cfg.beta_inv,
                                            k_max=2 * max(k_list))
    else:
        ref = _reference(pot, cfg.beta_inv, lo, hi, k_max=2 * max(k_list))
    table, slopes = analysis.weak_error_sweep(schemes, hs, cfg, pot, mon, ref,
                                              init, k_list, n_threads=threads,
                                              observable=observable)
    _write(outdir, "convergence.csv", table.to_csv())
    lines = ["scheme,k,slope,intercept,r_squared,n_used,determinate,note"]
    for (s, k), fit in slopes.items():
        lines.append(f"{s},{k},{fit.slope!r},{fit.intercept!r},"
                     f"{fit.r_squared!r},{fit.n_used},"
                     f"{'true' if fit.determinate else 'false'},{fit.note}")
    _write(outdir, "slopes.csv", "\n".join(lines) + "\n")
    if not any(f.determinate for f in slopes.values()):
        raise CriterionFailure("no determinate slope (too few usable points)")
    return 0


def cmd_escape(ec: ExperimentConfig, outdir: Path, threads: int) -> int:
    schemes = _schemes(ec)
    pot = build_potential(ec)
    mon = build_monitor(ec, pot)
    cfg = build_sampler(ec, None)
    hs = ec.require("escape", "h_list")
    init = build_init(ec, pot, cfg, momentum=True)
    table, _ = analysis.escape_rate(schemes, hs, cfg, pot, mon, init,
                                    n_threads=threads)
    _write(outdir, "escape.csv", table.to_csv())
    return 0


def cmd_audit(ec: ExperimentConfig, outdir: Path, threads: int) -> int:
    pot = build_potential(ec)
    mon = build_monitor(ec, pot)
    if mon is None:
        raise ConfigError("[monitor] audit needs a monitor")
    box_lo = ec.get("audit", "box_lo", [-2.0] * pot.dim)
    box_hi = ec.get("audit", "box_hi", [2.0] * pot.dim)
    n_grid = ec.get("audit", "n_grid", 101)
    try:
        report = monitor_mod.audit_criteria(mon, pot, box_lo, box_hi, n_grid)
    except monitor_mod.AuditError as e:
        raise CriterionFailure(str(e)) from None
    csv_text = report.to_csv()
    ok = report.passed
    if pot.dim == 1:
        cfg_sec = ec.sections.get("sampler", {})
        beta_inv = cfg_sec.get("beta_inv", 1.0)
        lo = ec.get("audit", "lo", box_lo[0])
        hi = ec.get("audit", "hi", box_hi[0])
        spacing = ec.get("audit", "spacing", 1e-4)
        ip_bound = ec.get("audit", "ip_bound", 1e-6)
        audit = overdamped.adjoint_stationarity_audit(pot, mon, beta_inv,
                                                      lo, hi, spacing)
        ip_ok = audit.sup_ip < ip_bound
        csv_text += (f"adjoint_sup_ip,{audit.sup_ip!r},{ip_bound!r},"
                     f"{'pass' if ip_ok else 'fail'}\r\n")
        csv_text += (f"adjoint_sup_naive,{audit.sup_naive!r},inf,pass\r\n")
        ok = ok and ip_ok
    _write(outdir, "audit.csv", csv_text)
    if not ok:
        raise CriterionFailure("one or more audit criteria failed; see "
                               "audit.csv")
    return 0


def _channel_fractions(path: np.ndarray, threshold: float,
                       junction_cut: float = 1.9):
    # both tube conditions hold simultaneously near the junctions (+-2, 0),
    # so only points with |x| < junction_cut count as inside a channel
    x, y = path[:, 0], path[:, 1]
    interior = np.abs(x) < junction_cut
    upper = ((y + x * x - 4.0) ** 2 < threshold) & interior
    lower = ((y - x * x + 4.0) ** 2 < threshold) & interior
    return float(np.mean(upper)), float(np.mean(lower))


def cmd_two_pathway(ec: ExperimentConfig, outdir: Path, threads: int) -> int:
    pot = build_potential(ec)
    if pot.dim != 2:
        raise ConfigError("two-pathway requires the 2D pathway potential")
    mon = build_monitor(ec, pot)
    if mon is None:
        raise ConfigError("[monitor] two-pathway needs a monitor")
    cfg = build_sampler(ec, None)
    h_small = ec.get("two_pathway", "h_small", 0.005)
    record_every = ec.get("two_pathway", "record_every", 10)
    n_paths = ec.get("two_pathway", "n_paths", 16)
    threshold = ec.get("two_pathway", "channel_threshold", 0.5)
    junction_cut = ec.get("two_pathway", "junction_cut", 1.9)
    start = ec.get("two_pathway", "start", [2.0, 0.0])

    signs = np.where(np.arange(n_paths) % 2 == 0, 1.0, -1.0)
    rng0 = derive_stream(cfg.seed, 999_999)
    x0 = (np.stack([signs * start[0], np.full(n_paths, start[1])], axis=-1)
          + 0.05 * rng0.standard_normal((n_paths, 2)))
    p0 = math.sqrt(cfg.beta_inv) * rng0.standard_normal((n_paths, 2))

    def paths_for(scheme: str, c: SamplerConfig):
        stepper = analysis.build_stepper(scheme, pot,
                                         mon if scheme != "BAOAB_FIXED" else None,
                                         c)
        # record every `record_every` steps: (m, n_paths, 2), (m, n_paths)
        return run_paths(stepper, c, x0, p0, record_every=record_every)

    runs = {}
    adaptive_paths, adaptive_alive = paths_for("BAOAB_TILDE", cfg)
    pts = adaptive_paths[adaptive_alive]
    mean_mon = float(np.mean(mon.eval_g(pts)))
    runs["adaptive"] = ((adaptive_paths, adaptive_alive), cfg.h, mean_mon)

    h_matched = cfg.h * mean_mon
    runs["fixed_matched"] = (paths_for("BAOAB_FIXED",
                                       replace(cfg, h=h_matched)),
                             h_matched, float("nan"))
    runs["fixed_small"] = (paths_for("BAOAB_FIXED", replace(cfg, h=h_small)),
                           h_small, float("nan"))

    lines = ["run,traj,step,x,y"]
    occ = ["run,h_effective,upper_fraction,lower_fraction,mean_monitor"]
    for name, ((paths, alive), h_eff, mm) in runs.items():
        up, low = _channel_fractions(paths[alive], threshold, junction_cut)
        occ.append(f"{name},{h_eff!r},{up!r},{low!r},{mm!r}")
        for si in range(len(paths)):
            for ti in range(n_paths):
                if alive[si, ti]:
                    lines.append(f"{name},{ti},{si * record_every},"
                                 f"{float(paths[si, ti, 0])!r},"
                                 f"{float(paths[si, ti, 1])!r}")
    _write(outdir, "trajectory.csv", "\n".join(lines) + "\n")
    _write(outdir, "occupancy.csv", "\n".join(occ) + "\n")
    return 0


def cmd_bayes_gen(ec: ExperimentConfig, outdir: Path, threads: int) -> int:
    n = ec.require("bayes_gen", "n")
    mu_true = ec.require("bayes_gen", "mu_true")
    if n < 1:
        raise ConfigError("[bayes_gen] n: must be >= 1")
    seed = ec.sections.get("sampler", {}).get("seed", 0)
    rng = derive_stream(seed, 0)
    y = mu_true + rng.standard_normal(n)
    _write(outdir, "data.csv",
           "y\n" + "\n".join(repr(float(v)) for v in y) + "\n")
    return 0


_COMMANDS = {
    "sample": cmd_sample,
    "sweep": cmd_sweep,
    "escape": cmd_escape,
    "audit": cmd_audit,
    "two-pathway": cmd_two_pathway,
    "bayes-gen": cmd_bayes_gen,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adaptive-langevin",
        description="Adaptive-timestep Langevin sampling experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker thread cap (results are independent)")
    args = parser.parse_args(argv)

    try:
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        ec = parse_config(text)
        if ec.sections["experiment"]["kind"] != args.command:
            raise ConfigError(
                f"[experiment] kind is "
                f"{ec.sections['experiment']['kind']!r} but the "
                f"{args.command!r} subcommand was invoked")
        if args.seed is not None:
            ec.sections.setdefault("sampler", {})["seed"] = args.seed
        outdir = Path(args.out or os.environ.get(ENV_OUT)
                      or ec.get("experiment", "out") or "results")
        return _COMMANDS[args.command](ec, outdir, max(1, args.threads))
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except CriterionFailure as e:
        print(f"criterion failure: {e}", file=sys.stderr)
        return 2
    except (NumericalError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
