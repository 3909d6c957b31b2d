"""Batch command line front end.

Config files are plain text: ``key = value`` lines, optional ``[section]``
headers, ``#`` comments.  Top-level keys:

    command   solve | diagnose | sweep-delta | sweep-eps | probe-dependence | check-graphs
    preset    name from the preset catalogue
    output    output directory (default ``dncahn-out``)
    seed      integer seed for randomized fixtures (default 0)
    emit      comma list of csv, jsonl (default ``csv,jsonl``)

``[problem]`` keys: L, N, eps, delta, lam, tau, T, graph, potential,
forcing, u0, a0, b0, name.  Without a preset every key except a0, b0 and
name is required; with a preset the given keys override preset fields.
Structured values use call syntax with ``;`` separated lists::

    graph     = zero | sign | power(p=3, coeff=1) | piecewise_linear(breakpoints=-1;1, slopes=0;1;0)
    potential = double_well(scale=0.25, well=1) | logarithmic(c=1, c0=2) | polynomial(coeffs=0;0;-1;0;1)
    forcing   = zero | constant(value=0.5) | wave(amplitude=1, mode=1, omega=0)
    u0        = cosine(amplitude=0.9, mode=1, shift=0) | constant(value=0.3)

``[sweep]``: values (comma list), reference (limit_solve | finest), scales
(comma list, for probe-dependence), prepare_data (true | false, default true:
smooth u0 and g per delta in sweep-delta).  ``[output]``: snapshots (default 9).
``[diagnose]``: trajectory (path of a ``.npz`` fixture written by solve).
``[graphs]``: samples (default 200).

Exit codes: 0 success, 1 configuration error, 2 solver failure or
non-finite output, 3 failed check (diagnose, check-graphs).

CSV files start with ``# key = value`` header lines echoing the run
parameters.  jsonl files hold one record per line; every record starts with
``record``; key order is fixed (see :data:`JSONL_KEYS`).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from . import diagnostics as dg
from .grid import Grid1D
from .monotone import GraphSpec, PotentialSpec
from .presets import (PRESETS, ConstantForcing, WaveForcing, ZeroForcing, constant_profile,
                      cosine_profile, make_preset)
from .stepper import NonConvergence, ProblemSpec, Trajectory

log = logging.getLogger("dncahn")

COMMANDS = ("solve", "diagnose", "sweep-delta", "sweep-eps", "probe-dependence", "check-graphs")
TOP_KEYS = ("command", "preset", "output", "seed", "emit")
PROBLEM_KEYS = ("L", "N", "eps", "delta", "lam", "tau", "T", "graph", "potential",
                "forcing", "u0", "a0", "b0", "name")
OPTIONAL_PROBLEM_KEYS = ("a0", "b0", "name")
SECTION_KEYS = {
    "problem": PROBLEM_KEYS,
    "sweep": ("values", "reference", "scales", "prepare_data"),
    "output": ("snapshots",),
    "diagnose": ("trajectory",),
    "graphs": ("samples",),
}
DEFAULT_VALUES = {"sweep-delta": (1e-2, 1e-3, 1e-4, 1e-5), "sweep-eps": (1e-1, 1e-2, 1e-3)}
DEFAULT_SCALES = (1e-1, 1e-2, 1e-3, 1e-4)

JSONL_KEYS = {
    "header": ("record", "command", "seed", "parameters"),
    "step": ("record", "step", "t", "F", "D_grad", "D_visc", "D_beta", "S", "C", "mass",
             "flux_left", "flux_right", "newton_iters", "residual"),
    "check": ("record", "name", "value", "limit", "passed"),
    "point": ("record", "parameter", "value", "error", "err_mu", "err_u", "extra"),
    "probe": ("record", "eta", "lhs", "rhs", "ratio"),
    "graph": ("record", "graph", "lam", "r", "resolvent", "oracle", "abs_error"),
    "summary": ("record", "status", "values"),
    "failure": ("record", "status", "message", "step"),
}

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class NonFiniteOutput(RuntimeError):
    pass


@dataclass
class RunConfig:
    command: str
    preset: str | None = None
    problem: dict = field(default_factory=dict)
    output: str = "dncahn-out"
    seed: int = 0
    emit: tuple = ("csv", "jsonl")
    sweep: dict = field(default_factory=dict)
    snapshots: int = 9
    trajectory: str | None = None
    samples: int = 200
    lines: dict = field(default_factory=dict, repr=False)

    def build_spec(self):
        """The ProblemSpec described by the preset and/or problem block."""
        return build_spec(self.preset, self.problem, self.lines)


# ---------------------------------------------------------------------------
# parsing

_CALL = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$")


def parse_call(text):
    """``name(k=v, ...)`` -> (name, {k: float or tuple of floats})."""
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse {text!r}; expected name or name(key=value, ...)")
    name, body = m.group(1), m.group(2)
    kwargs = {}
    if body and body.strip():
        for part in body.split(","):
            if "=" not in part:
                raise ValueError(f"argument {part.strip()!r} is not key=value")
            k, v = (s.strip() for s in part.split("=", 1))
            vals = tuple(float(x) for x in v.split(";"))
            kwargs[k] = vals if ";" in v else vals[0]
    return name, kwargs


def _build_graph(text):
    name, kw = parse_call(text)
    if name == "zero" and not kw:
        return GraphSpec.zero()
    if name == "sign" and not kw:
        return GraphSpec.sign()
    if name == "power":
        return GraphSpec.power(**kw)
    if name == "piecewise_linear":
        bp, sl = kw["breakpoints"], kw["slopes"]
        return GraphSpec.piecewise_linear(np.atleast_1d(bp), np.atleast_1d(sl))
    raise ValueError(f"unknown graph {text!r}")


def _build_potential(text):
    name, kw = parse_call(text)
    if name == "double_well":
        return PotentialSpec.double_well(**kw)
    if name == "logarithmic":
        return PotentialSpec.logarithmic(**kw)
    if name == "polynomial":
        coeffs = np.atleast_1d(kw.pop("coeffs"))
        return PotentialSpec.polynomial(coeffs, **kw)
    raise ValueError(f"unknown potential {text!r}")


def _build_forcing(text, L):
    name, kw = parse_call(text)
    if name == "zero" and not kw:
        return ZeroForcing()
    if name == "constant":
        return ConstantForcing(**kw)
    if name == "wave":
        kw.setdefault("L", L)
        if "mode" in kw:
            kw["mode"] = int(kw["mode"])
        return WaveForcing(**kw)
    raise ValueError(f"unknown forcing {text!r}")


def _build_u0(text, grid):
    name, kw = parse_call(text)
    if name == "cosine":
        if "mode" in kw:
            kw["mode"] = int(kw["mode"])
        return cosine_profile(grid, **kw)
    if name == "constant":
        return constant_profile(grid, **kw)
    raise ValueError(f"unknown initial profile {text!r}")


def _float(value, key, line):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key} = {value!r} is not a number", line) from None


def _int(value, key, line):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key} = {value!r} is not an integer", line) from None


def _float_list(value, key, line):
    return tuple(_float(v.strip(), key, line) for v in value.split(",") if v.strip())


def build_spec(preset, problem, lines=None):
    lines = lines or {}

    def fail(key, exc):
        raise ConfigError(f"{key}: {exc}", lines.get(("problem", key))) from exc

    p = dict(problem)
    if preset is None:
        missing = [k for k in PROBLEM_KEYS if k not in p and k not in OPTIONAL_PROBLEM_KEYS]
        if missing:
            raise ConfigError("no preset given and the problem block lacks: " + ", ".join(missing))
    kwargs = {}
    for key in ("L", "eps", "delta", "lam", "tau", "T", "a0", "b0"):
        if key in p:
            kwargs[key] = _float(p[key], key, lines.get(("problem", key)))
    if "N" in p:
        kwargs["N"] = _int(p["N"], "N", lines.get(("problem", "N")))
    L, N = kwargs.pop("L", 1.0), kwargs.pop("N", 64)
    try:
        grid = Grid1D(L, N)
    except ValueError as exc:
        fail("N", exc)
    kwargs["grid"] = grid
    for key, builder in (("graph", _build_graph), ("potential", _build_potential)):
        if key in p:
            try:
                kwargs[key] = builder(p[key])
            except (ValueError, TypeError, KeyError) as exc:
                fail(key, exc)
    if "forcing" in p:
        try:
            kwargs["forcing"] = _build_forcing(p["forcing"], L)
        except (ValueError, TypeError) as exc:
            fail("forcing", exc)
    if "u0" in p:
        try:
            kwargs["u0"] = _build_u0(p["u0"], grid)
        except (ValueError, TypeError) as exc:
            fail("u0", exc)
    if "name" in p:
        kwargs["name"] = p["name"]
    try:
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; known: {', '.join(sorted(PRESETS))}",
                                  lines.get(("", "preset")))
            return make_preset(preset, **kwargs)
        kwargs.setdefault("name", "custom")
        return ProblemSpec(**kwargs)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid problem: {exc}") from exc


def parse_config(text, overrides=None):
    """Parse and validate config text; ``overrides`` (from flags) replace
    top-level keys.  Raises :class:`ConfigError` with the offending line."""
    section = ""
    raw = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("["):
            if not s.endswith("]"):
                raise ConfigError(f"malformed section header {s!r}", lineno)
            section = s[1:-1].strip()
            if section not in SECTION_KEYS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in s:
            raise ConfigError(f"expected key = value, got {s!r}", lineno)
        key, value = (t.strip() for t in s.split("=", 1))
        allowed = SECTION_KEYS[section] if section else TOP_KEYS
        if key not in allowed:
            where = f"[{section}]" if section else "top level"
            raise ConfigError(f"unknown key {key!r} at {where}", lineno)
        if (section, key) in lines:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        raw[(section, key)] = value
        lines[(section, key)] = lineno
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[("", key)] = value
            lines.pop(("", key), None)

    def top(key, default=None):
        return raw.get(("", key), default)

    command = top("command")
    if command is None:
        raise ConfigError("no command given")
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}",
                          lines.get(("", "command")))
    emit = tuple(e.strip() for e in str(top("emit", "csv,jsonl")).split(",") if e.strip())
    bad = [e for e in emit if e not in ("csv", "jsonl")]
    if bad or not emit:
        raise ConfigError(f"emit must be a subset of csv,jsonl, got {top('emit')!r}",
                          lines.get(("", "emit")))
    seed = _int(top("seed", "0"), "seed", lines.get(("", "seed")))
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer", lines.get(("", "seed")))

    cfg = RunConfig(command=command, preset=top("preset"),
                    problem={k: v for (sec, k), v in raw.items() if sec == "problem"},
                    output=top("output", "dncahn-out"), seed=seed, emit=emit, lines=lines)
    if ("sweep", "values") in raw:
        cfg.sweep["values"] = _float_list(raw[("sweep", "values")], "values",
                                          lines[("sweep", "values")])
    if ("sweep", "scales") in raw:
        cfg.sweep["scales"] = _float_list(raw[("sweep", "scales")], "scales",
                                          lines[("sweep", "scales")])
    if ("sweep", "reference") in raw:
        ref = raw[("sweep", "reference")]
        if ref not in asy.REFERENCES:
            raise ConfigError(f"reference must be one of {asy.REFERENCES}",
                              lines[("sweep", "reference")])
        cfg.sweep["reference"] = ref
    if ("sweep", "prepare_data") in raw:
        flag = raw[("sweep", "prepare_data")].lower()
        if flag not in ("true", "false"):
            raise ConfigError("prepare_data must be true or false", lines[("sweep", "prepare_data")])
        cfg.sweep["prepare_data"] = flag == "true"
    if ("output", "snapshots") in raw:
        cfg.snapshots = _int(raw[("output", "snapshots")], "snapshots", lines[("output", "snapshots")])
        if cfg.snapshots < 1:
            raise ConfigError("snapshots must be positive", lines[("output", "snapshots")])
    if ("graphs", "samples") in raw:
        cfg.samples = _int(raw[("graphs", "samples")], "samples", lines[("graphs", "samples")])
    cfg.trajectory = raw.get(("diagnose", "trajectory"))
    if command != "check-graphs":
        if cfg.preset is None and not cfg.problem:
            raise ConfigError("give a preset or a [problem] block")
        cfg.build_spec()  # validation
    return cfg


# ---------------------------------------------------------------------------
# output


def _num(x):
    """Shortest round-trip text of a finite number; non-finite values abort."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteOutput("non-finite value in output")
    return repr(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(float(x)):
            raise NonFiniteOutput("non-finite value in output")
        return float(x)
    return x


class Writer:
    """Collects output files and writes them in one pass."""

    def __init__(self, outdir, emit, header):
        self.outdir = Path(outdir)
        self.emit = emit
        self.header = header
        self.records = []
        self.tables = {}

    def record(self, kind, **values):
        keys = JSONL_KEYS[kind]
        rec = {"record": kind}
        for k in keys[1:]:
            rec[k] = values.get(k)
        self.records.append(rec)

    def table(self, name, columns, rows):
        self.tables[name] = (columns, rows)

    def _header_lines(self):
        out = [f"# command = {self.header['command']}", f"# seed = {self.header['seed']}"]
        out += [f"# {k} = {v}" for k, v in self.header["parameters"].items()]
        return out

    def flush(self, stem):
        self.outdir.mkdir(parents=True, exist_ok=True)
        written = []
        if "csv" in self.emit:
            for name, (columns, rows) in self.tables.items():
                text = "\n".join(self._header_lines() + [",".join(columns)]
                                 + [",".join(_num(v) for v in row) for row in rows]) + "\n"
                path = self.outdir / f"{name}.csv"
                path.write_text(text, encoding="utf-8", newline="\n")
                written.append(path)
        if "jsonl" in self.emit:
            head = {"record": "header", **self.header}
            lines = [json.dumps(_jsonable(r), separators=(",", ":"))
                     for r in [head] + self.records]
            path = self.outdir / f"{stem}.jsonl"
            path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
            written.append(path)
        return written

    def flush_failure(self, stem, message, step=None):
        self.record("failure", status="failed", message=message, step=step)
        self.outdir.mkdir(parents=True, exist_ok=True)
        head = {"record": "header", **self.header}
        lines = [json.dumps(_jsonable(r), separators=(",", ":"), default=str)
                 for r in [head] + self.records]
        (self.outdir / f"{stem}.failure.jsonl").write_text("\n".join(lines) + "\n",
                                                           encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def _snapshot_steps(n, count):
    return sorted(set(int(k) for k in np.round(np.linspace(1, n, min(count, n)))))


def _solve_outputs(traj, writer, snapshots):
    spec, grid = traj.spec, traj.spec.grid
    N = grid.N
    cols = (["step", "t"] + [f"u_{i}" for i in range(N)] + [f"mu_{i}" for i in range(N)]
            + [f"xi_{i}" for i in range(N)])
    rows = []
    for k in _snapshot_steps(traj.n_steps, snapshots):
        rows.append([k, traj.t[k], *traj.u[k], *traj.mu[k - 1], *traj.xi[k - 1]])
    writer.table("trajectory", cols, rows)

    led = traj.ledger
    series_cols = ["t", "F", "D_grad", "D_visc", "D_beta", "S", "C", "mass",
                   "flux_left", "flux_right", "newton_iters", "residual"]
    rows = []
    for k in range(1, traj.n_steps + 1):
        left, right = grid.boundary_flux(traj.mu[k - 1])
        vals = dict(step=k, t=traj.t[k], F=led.F[k], D_grad=led.D_grad[k - 1],
                    D_visc=led.D_visc[k - 1], D_beta=led.D_beta[k - 1], S=led.S[k - 1],
                    C=led.C[k - 1], mass=grid.integral(traj.u[k]), flux_left=left,
                    flux_right=right, newton_iters=int(traj.newton_iters[k - 1]),
                    residual=traj.residual[k - 1])
        rows.append([vals[c] for c in series_cols])
        writer.record("step", **vals)
    writer.table("series", series_cols, rows)


def _save_npz(traj, path):
    np.savez(path, t=traj.t, u=traj.u, mu=traj.mu, w=traj.w, xi=traj.xi, g=traj.g,
             newton_iters=traj.newton_iters, residual=traj.residual)


def load_trajectory(spec, path):
    """Rebuild a Trajectory of ``spec`` from a ``.npz`` fixture."""
    from .diagnostics import energy_ledger

    with np.load(path) as data:
        arrays = {k: np.array(data[k]) for k in
                  ("t", "u", "mu", "w", "xi", "g", "newton_iters", "residual")}
    n, N = spec.n_steps, spec.grid.N
    expect = {"t": (n + 1,), "u": (n + 1, N), "mu": (n, N), "w": (n, N), "xi": (n, N),
              "g": (n, N), "newton_iters": (n,), "residual": (n,)}
    for k, shape in expect.items():
        if arrays[k].shape != shape:
            raise ConfigError(f"trajectory array {k!r} has shape {arrays[k].shape}, expected {shape}")
    traj = Trajectory(spec, **arrays)
    traj.ledger = energy_ledger(traj)
    return traj


def diagnose_checks(traj):
    """List of (name, value, limit, passed) for a trajectory."""
    from .monotone import yosida

    spec, grid = traj.spec, traj.spec.grid
    led = traj.ledger
    checks = []
    e = dg.energy_inequality_check(traj)
    checks.append(("energy_inequality", e, 1e-8 * max(1.0, float(led.F[0]))))
    checks.append(("flux_identity", dg.flux_identity_check(traj), 1e-12))
    checks.append(("D_beta_negative_part", float(max(0.0, -led.D_beta.min())), 1e-14))
    eq1 = max(float(np.max(np.abs(w - grid.lap_dirichlet(m))) / (1 + np.max(np.abs(g))))
              for w, m, g in zip(traj.w, traj.mu, traj.g))
    checks.append(("conservation_residual", eq1, 1e-10))
    drift = float(np.max(np.abs(traj.u[1:] - (traj.u[:-1] + spec.tau * traj.w))))
    checks.append(("update_consistency", drift, 0.0))
    sel = float(np.max(np.abs(traj.xi - yosida(spec.graph, spec.lam, traj.w))))
    checks.append(("selection_consistency", sel, 1e-12))
    rep = dg.max_principle_report(traj)
    out_low = max(0.0, rep.a0_prime - rep.u_min)
    out_high = max(0.0, rep.u_max - rep.b0_prime)
    checks.append(("max_principle_excess", out_low + out_high, 0.0))
    checks.append(("domain_interior", 0.0 if rep.strictly_inside else 1.0, 0.0))
    return [(name, float(v), float(lim), bool(v <= lim)) for name, v, lim in checks]


def _check_graphs(cfg, writer):
    """Resolvents of the catalogue graphs against a bisection oracle."""
    rng = np.random.default_rng(cfg.seed)
    graphs = [GraphSpec.sign(), GraphSpec.power(1.0, 1.0), GraphSpec.power(3.0, 1.0),
              GraphSpec.piecewise_linear((-1.0, 1.0), (0.5, 0.0, 2.0))]
    lam = 10.0 ** rng.uniform(-6.0, 0.0, cfg.samples)
    r = rng.uniform(-10.0, 10.0, cfg.samples)
    worst = 0.0
    rows = []
    for gspec in graphs:
        res = np.array([float(gspec.resolvent(lj, rj)) for lj, rj in zip(lam, r)])
        orc = resolvent_oracle(gspec, lam, r)
        err = np.abs(res - orc)
        worst = max(worst, float(err.max()))
        for j in range(cfg.samples):
            rows.append([gspec.describe().replace(", ", " "), lam[j], r[j], res[j], orc[j], err[j]])
            writer.record("graph", graph=gspec.describe(), lam=lam[j], r=r[j],
                          resolvent=res[j], oracle=orc[j], abs_error=err[j])
    cols = ["graph", "lam", "r", "resolvent", "oracle", "abs_error"]
    writer.table("graphs", cols, rows)
    return worst


def resolvent_oracle(gspec, lam, r, iters=200):
    """Plain bisection on s + lam*beta(s) = r, treating beta's jumps through
    the one-sided limits."""
    lam, r = np.broadcast_arrays(np.asarray(lam, float), np.asarray(r, float))
    lo = np.minimum(r, 0.0) - 1.0
    hi = np.maximum(r, 0.0) + 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        val = mid + lam * np.asarray(gspec.beta(mid))
        go_up = val < r
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
    return 0.5 * (lo + hi)


def run(cfg):
    """Execute a parsed :class:`RunConfig` and return the exit code."""
    spec = None if cfg.command == "check-graphs" else cfg.build_spec()
    params = spec.parameters() if spec is not None else {}
    if cfg.command in ("sweep-delta", "sweep-eps"):
        params["sweep_values"] = ", ".join(repr(v) for v in _sweep_values(cfg))
        params["sweep_reference"] = cfg.sweep.get("reference", "limit_solve")
        if cfg.command == "sweep-delta":
            params["prepare_data"] = cfg.sweep.get("prepare_data", True)
    if cfg.command == "probe-dependence":
        params["scales"] = ", ".join(repr(v) for v in cfg.sweep.get("scales", DEFAULT_SCALES))
    if cfg.command == "check-graphs":
        params["samples"] = cfg.samples
    header = {"command": cfg.command, "seed": cfg.seed, "parameters": params}
    writer = Writer(cfg.output, cfg.emit, header)
    stem = cfg.command
    try:
        code = _dispatch(cfg, spec, writer)
        writer.flush(stem)
    except NonConvergence as exc:
        log.error("solver failure: %s", exc)
        writer.flush_failure(stem, str(exc), exc.step)
        return EXIT_SOLVER
    except NonFiniteOutput as exc:
        log.error("%s", exc)
        writer.records = []
        writer.flush_failure(stem, str(exc))
        return EXIT_SOLVER
    return code


def _sweep_values(cfg):
    return tuple(cfg.sweep.get("values", DEFAULT_VALUES.get(cfg.command, ())))


def _dispatch(cfg, spec, writer):
    from .stepper import solve

    if cfg.command == "solve":
        traj = solve(spec)
        _solve_outputs(traj, writer, cfg.snapshots)
        Path(cfg.output).mkdir(parents=True, exist_ok=True)
        _save_npz(traj, Path(cfg.output) / "trajectory.npz")
        writer.record("summary", status="ok", values={
            "steps": traj.n_steps,
            "energy_inequality": dg.energy_inequality_check(traj),
            "flux_identity": dg.flux_identity_check(traj),
            "max_residual": float(traj.residual.max()),
            "u_min": float(traj.u.min()), "u_max": float(traj.u.max())})
        if not all(np.all(np.isfinite(a)) for a in (traj.u, traj.mu, traj.xi)):
            raise NonFiniteOutput("non-finite values in the trajectory")
        log.info("solve: %d steps, max residual %.2e", traj.n_steps, traj.residual.max())
        return EXIT_OK

    if cfg.command == "diagnose":
        traj = load_trajectory(spec, cfg.trajectory) if cfg.trajectory else solve(spec)
        checks = diagnose_checks(traj)
        for name, value, limit, passed in checks:
            writer.record("check", name=name, value=value, limit=limit, passed=passed)
            log.info("%-24s %.3e <= %.1e  %s", name, value, limit, "pass" if passed else "FAIL")
        writer.table("diagnose", ["check", "value", "limit", "passed"],
                     [list(c) for c in checks])
        ok = all(c[3] for c in checks)
        writer.record("summary", status="ok" if ok else "failed",
                      values={c[0]: c[3] for c in checks})
        return EXIT_OK if ok else EXIT_CHECK

    if cfg.command in ("sweep-delta", "sweep-eps"):
        param = "delta" if cfg.command == "sweep-delta" else "eps"
        try:
            scfg = asy.SweepConfig(spec, param, _sweep_values(cfg),
                                   cfg.sweep.get("reference", "limit_solve"),
                                   prepare_data=cfg.sweep.get("prepare_data", True))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        report = asy.delta_sweep(scfg) if param == "delta" else asy.eps_sweep(scfg)
        extra_keys = sorted(report.points[0].extra)
        cols = ["value", "error", "err_mu", "err_u"] + extra_keys
        rows = [[p.value, p.error, p.err_mu, p.err_u] + [p.extra[k] for k in extra_keys]
                for p in report.points]
        writer.table(f"sweep_{param}", cols, rows)
        for p in report.points:
            writer.record("point", parameter=param, value=p.value, error=p.error,
                          err_mu=p.err_mu, err_u=p.err_u, extra={k: p.extra[k] for k in extra_keys})
        slopes = {k: (None if not math.isfinite(v) else v) for k, v in report.slopes.items()}
        summary = {"slope": report.slope, "fit_residual": report.fit_residual,
                   "n_points": report.n_points, "monotone": report.monotone(),
                   "slopes": slopes, "reference": report.reference}
        if report.constant is not None:
            summary.update(constant=report.constant, bound_holds=report.bound_holds)
        writer.record("summary", status="ok", values=summary)
        log.info("%s: slope %.3f over %d points", cfg.command, report.slope, report.n_points)
        return EXIT_OK

    if cfg.command == "probe-dependence":
        scales = cfg.sweep.get("scales", DEFAULT_SCALES)
        rep = asy.continuous_dependence_probe(spec, scales)
        rows = []
        for eta, lhs, rhs, ratio in zip(rep.scales, rep.lhs, rep.rhs, rep.ratios):
            rows.append([eta, lhs, rhs, ratio])
            writer.record("probe", eta=eta, lhs=lhs, rhs=rhs, ratio=ratio)
        writer.table("dependence", ["eta", "lhs", "rhs", "ratio"], rows)
        writer.record("summary", status="ok", values={"spread": rep.spread})
        log.info("probe-dependence: ratio spread %.3f", rep.spread)
        return EXIT_OK

    worst = _check_graphs(cfg, writer)
    ok = worst <= 1e-10
    writer.record("summary", status="ok" if ok else "failed", values={"max_abs_error": worst})
    log.info("check-graphs: max deviation from oracle %.2e", worst)
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="dncahn", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS,
                    help="overrides the command given in the config")
    ap.add_argument("--config", help="config file")
    ap.add_argument("--output", help="output directory")
    ap.add_argument("--preset", choices=sorted(PRESETS))
    ap.add_argument("--seed", help="seed for randomized fixtures (unsigned 64-bit)")
    ap.add_argument("--emit", help="comma list of output formats: csv,jsonl")
    ap.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            log.error("cannot read config: %s", exc)
            return EXIT_CONFIG
    overrides = {"command": args.command, "preset": args.preset, "output": args.output,
                 "seed": args.seed, "emit": args.emit}
    try:
        cfg = parse_config(text, overrides)
        return run(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
