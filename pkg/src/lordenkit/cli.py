"""Batch front-end: ``lordenkit CONFIG [--seed S] [--workers W] [--out PATH] [--format csv|json]``.

Exit status: 0 success, 2 invalid configuration (no report written),
3 a bound or envelope check was breached, 130 interrupted (report marked
``censored``).
"""
from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .coupling import CouplingConfig, convergence_experiment, coupling_runs
from .gendist import HazardSpec, as_view, spec_from_dict
from .lorden import classical_bound, generalized_bound, verify_bounds_mc
from .models import (
    MmppState,
    ReliabilityState,
    envelope_audit,
    reliability_ergodicity_experiment,
    rule_from_dict,
    simulate_mmpp,
    simulate_reliability,
)
from .renewal import (
    AlternatingPolicy,
    Envelope,
    IIDPolicy,
    MinCompositionPolicy,
    alternating_modulator,
    recurrence_samples,
    renewal_function,
)
from .reporting import dumps_json, fmt_csv, rows_to_csv
from .streams import WORKERS_ENV, stream

EXIT_OK, EXIT_INVALID, EXIT_BREACH, EXIT_INTERRUPTED = 0, 2, 3, 130

COMMANDS = {
    "bound": {"envelope"},
    "simulate": {"policy", "times", "n"},
    "renewal-fn": {"distribution", "s_max"},
    "couple": {"policy", "coupling"},
    "tv": {"policy", "coupling", "times", "n"},
    "reliability": {"model"},
    "mmpp": {"mmpp"},
}
TOP_LEVEL = {
    "command", "seed", "workers", "output", "distribution", "envelope", "policy", "n", "horizon",
    "times", "bins", "s_max", "step", "coupling", "model", "mmpp", "runs", "tol",
}
SECTION_FIELDS = {
    "envelope": {"phi", "Q", "T", "k"},
    "policy": {"kind", "distribution", "base", "modulator", "specs", "envelope", "phase"},
    "coupling": {"theta", "M", "kappa_mode", "rate_order", "max_epochs", "b1", "b2", "runs", "kappa_grid",
                 "resolution"},
    "model": {"failure", "repair", "init", "init1", "init2", "envelope", "horizon", "times", "n", "bins",
              "runs", "rate_order"},
    "mmpp": {"flows", "envelopes", "majorants", "horizon", "probe_step", "burn_in"},
    "output": {"path", "format"},
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _key_lines(text):
    """Line numbers of top-level and section keys: ``{("section", "key"): line}``."""
    lines = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if not isinstance(root, yaml.MappingNode):
        return lines
    for knode, vnode in root.value:
        lines[(None, knode.value)] = knode.start_mark.line + 1
        if isinstance(vnode, yaml.MappingNode):
            for k2, _ in vnode.value:
                lines[(knode.value, k2.value)] = k2.start_mark.line + 1
    return lines


def load_config(text):
    """Parse and validate a config document; raises :class:`ConfigError` with line/field diagnostics."""
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(f"{where}config does not parse: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    lines = _key_lines(text)

    def at(section, key):
        ln = lines.get((section, key))
        return f"line {ln}: " if ln else ""

    for key in cfg:
        if key not in TOP_LEVEL:
            raise ConfigError(f"{at(None, key)}unknown field '{key}'")
    command = cfg.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"{at(None, 'command')}unknown command {command!r}; expected one of {sorted(COMMANDS)}")
    for section, allowed in SECTION_FIELDS.items():
        sub = cfg.get(section)
        if sub is None:
            continue
        if not isinstance(sub, dict):
            raise ConfigError(f"{at(None, section)}section '{section}' must be a mapping")
        for key in sub:
            if key not in allowed:
                raise ConfigError(f"{at(section, key)}unknown field '{section}.{key}'")
    missing = [s for s in sorted(COMMANDS[command]) if s not in cfg]
    if missing:
        raise ConfigError(f"command '{command}' needs field(s): {', '.join(missing)}")
    return cfg


def _spec(d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a distribution mapping")
    try:
        return spec_from_dict(d)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{where}: missing or malformed parameter {exc}") from None


def _envelope(d, where="envelope"):
    if d is None:
        return None
    return Envelope(_spec(d.get("phi"), f"{where}.phi"), _spec(d.get("Q"), f"{where}.Q"),
                    float(d.get("T", 0.0)), int(d.get("k", 2)))


def _policy(d):
    kind = d.get("kind", "iid")
    env = _envelope(d.get("envelope"), "policy.envelope")
    if kind == "iid":
        return IIDPolicy(_spec(d.get("distribution"), "policy.distribution"), env)
    if kind == "min_composition":
        base = _spec(d.get("base"), "policy.base")
        mod = d.get("modulator") or {}
        if "alternate" not in mod:
            raise ConfigError("policy.modulator: expected {alternate: [spec, ...]}")
        specs = [_spec(m, "policy.modulator.alternate") for m in mod["alternate"]]
        return MinCompositionPolicy(base, alternating_modulator(*specs), env)
    if kind == "alternating":
        specs = tuple(_spec(m, "policy.specs") for m in d.get("specs", ()))
        return AlternatingPolicy(specs, env, int(d.get("phase", 0)))
    raise ConfigError(f"policy.kind: unknown policy kind {kind!r}")


def _coupling_cfg(d):
    keys = ("theta", "M", "kappa_mode", "rate_order", "max_epochs", "kappa_grid", "resolution")
    return CouplingConfig(**{k: d[k] for k in keys if k in d})


def _times(cfg, key="times"):
    t = cfg.get(key)
    if not isinstance(t, (list, tuple)) or not t:
        raise ConfigError(f"'{key}' must be a nonempty list of times")
    return [float(x) for x in t]


def _state(d):
    d = d or {}
    return ReliabilityState(tuple(int(m) for m in d.get("modes", (0, 0))),
                            tuple(float(x) for x in d.get("elapsed", (0.0, 0.0))))


# ---------------------------------------------------------------------------
# commands: each returns (result dict, csv text, breached)
# ---------------------------------------------------------------------------


def _cmd_bound(cfg, seed, workers):
    env = _envelope(cfg["envelope"])
    rep = generalized_bound(env, float(cfg.get("tol", 1e-8)))
    result = rep.to_dict()
    if "distribution" in cfg:
        result["distribution_classical_bound"] = classical_bound(_spec(cfg["distribution"], "distribution"))
    return result, rep.to_csv(), False


def _cmd_simulate(cfg, seed, workers):
    policy = _policy(cfg["policy"])
    times, n = _times(cfg), int(cfg["n"])
    env = _envelope(cfg.get("envelope")) or policy.envelope
    if env is not None:
        table = verify_bounds_mc(policy, env, times, n, seed, workers)
        return table.to_dict(), table.to_csv(), bool(table.flagged)
    B, W = recurrence_samples(policy, times, n, seed, workers, tag="verify")
    rows = [{"t": t, "mean_B": float(B[:, j].mean()), "mean_W": float(W[:, j].mean())}
            for j, t in enumerate(times)]
    return {"n": n, "rows": rows}, rows_to_csv(["t", "mean_B", "mean_W"], rows), False


def _cmd_renewal_fn(cfg, seed, workers):
    view = as_view(_spec(cfg["distribution"], "distribution"))
    grid = renewal_function(view, float(cfg["s_max"]), float(cfg.get("step", 1e-3)))
    rows = [{"s": s, "H": h} for s, h in zip(grid.s, grid.H)]
    return ({"step": grid.step, "snap_distance": grid.snap_distance, "s": grid.s, "H": grid.H},
            rows_to_csv(["s", "H"], rows), False)


def _cmd_couple(cfg, seed, workers):
    policy = _policy(cfg["policy"])
    c = cfg["coupling"]
    runs = int(c.get("runs", cfg.get("runs", 10_000)))
    res = coupling_runs(policy, c.get("b1", 0.0), c.get("b2", 0.0), _coupling_cfg(c), runs, seed, workers)
    times = cfg.get("times") or []
    return res.to_dict(times), res.tau_csv(), False


def _cmd_tv(cfg, seed, workers):
    policy = _policy(cfg["policy"])
    c = cfg["coupling"]
    table = convergence_experiment(policy, float(c.get("b1", 0.0)), float(c.get("b2", 0.0)), _times(cfg),
                                   int(cfg["n"]), _coupling_cfg(c), seed, workers, int(cfg.get("bins", 50)),
                                   int(c.get("runs", cfg.get("runs", 10_000))))
    return table.to_dict(), table.to_csv(), bool(table.flagged)


def _cmd_reliability(cfg, seed, workers):
    m = cfg["model"]
    rules = {"failure": [rule_from_dict(r) for r in m["failure"]],
             "repair": [rule_from_dict(r) for r in m["repair"]]}
    env = _envelope(m.get("envelope"), "model.envelope")
    horizon = float(m.get("horizon", cfg.get("horizon", 1e4)))
    run = simulate_reliability(rules, _state(m.get("init", m.get("init1"))), horizon, stream(seed, "reliability"))
    result = run.to_dict()
    breached = False
    if env is not None:
        violations = envelope_audit(run.trajectory, env, rules)
        result["envelope_violations"] = [list(v) for v in violations]
        breached |= bool(violations)
    rows = [{"element": k, "availability": run.availability[k], "repair_fraction": run.repair_fraction[k],
             "transitions": int(run.transitions[k])} for k in range(2)]
    csv_text = rows_to_csv(["element", "availability", "repair_fraction", "transitions"], rows)
    if "times" in m and "init2" in m:
        cc = CouplingConfig(rate_order=int(m.get("rate_order", 2)))
        table = reliability_ergodicity_experiment(
            rules, _state(m.get("init1")), _state(m["init2"]), [float(t) for t in m["times"]],
            int(m.get("n", 10_000)), env, seed, workers, int(m.get("bins", 50)), cfg=cc,
            runs=int(m.get("runs", 2_000)))
        result["ergodicity"] = table.to_dict()
        csv_text += "\n" + table.to_csv()
        breached |= bool(table.flagged)
    return result, csv_text, breached


def _cmd_mmpp(cfg, seed, workers):
    m = cfg["mmpp"]
    rules = tuple(rule_from_dict(r) for r in m["flows"])
    envs = m.get("envelopes")
    envs = None if envs is None else [_envelope(e, "mmpp.envelopes") for e in envs]
    maj = m.get("majorants")
    state = MmppState(rules, None, None if maj is None else tuple(float(x) for x in maj))
    rep = simulate_mmpp(state, float(m.get("horizon", cfg.get("horizon", 1e4))), stream(seed, "mmpp"), envs,
                        float(m.get("probe_step", 1.0)), m.get("burn_in"))
    return rep.to_dict(), rep.to_csv(), bool(rep.flagged)


HANDLERS = {
    "bound": _cmd_bound, "simulate": _cmd_simulate, "renewal-fn": _cmd_renewal_fn, "couple": _cmd_couple,
    "tv": _cmd_tv, "reliability": _cmd_reliability, "mmpp": _cmd_mmpp,
}


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def config_digest(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def _header(command, seed, workers, digest, status):
    return {"tool": "lordenkit", "version": __version__, "command": command, "seed": seed,
            "workers": workers, "config_sha256": digest, "status": status}


def render_report(header, result, csv_text, fmt):
    if fmt == "json":
        return dumps_json({"header": header, "result": result})
    head = "".join(f"# {k}: {fmt_csv(v)}\n" for k, v in header.items())
    return head + csv_text


def report_digest(text):
    """Config digest embedded in a report (JSON or CSV)."""
    for line in text.splitlines():
        if "config_sha256" in line:
            return line.split(":", 1)[1].strip().strip('",')
    return None


def verify_report(report_path, config_path):
    """True when the report's embedded digest matches the config file."""
    text = Path(report_path).read_text()
    return report_digest(text) == config_digest(Path(config_path).read_bytes())


def _resolve_workers(flag, cfg):
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, int(cfg.get("workers", 1)))


def run(config_path, seed=None, workers=None, out=None, fmt=None, stdout=None):
    """Execute one config file; returns the exit status."""
    stdout = stdout or sys.stdout
    try:
        raw = Path(config_path).read_bytes()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = load_config(raw.decode("utf-8"))
        seed = int(cfg.get("seed", 0)) if seed is None else int(seed)
        workers = _resolve_workers(workers, cfg)
        output = cfg.get("output") or {}
        out = out or output.get("path")
        fmt = fmt or output.get("format") or (Path(out).suffix.lstrip(".") if out else "json")
        if fmt not in ("json", "csv"):
            raise ConfigError(f"unknown output format {fmt!r}")
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    command = cfg["command"]
    digest = config_digest(raw)
    try:
        result, csv_text, breached = HANDLERS[command](cfg, seed, workers)
    except KeyboardInterrupt:
        header = _header(command, seed, workers, digest, "censored")
        _emit(render_report(header, {}, "", fmt), out, stdout)
        return EXIT_INTERRUPTED
    except (ConfigError, ValueError, TypeError, KeyError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    header = _header(command, seed, workers, digest, "breach" if breached else "ok")
    _emit(render_report(header, result, csv_text, fmt), out, stdout)
    return EXIT_BREACH if breached else EXIT_OK


def _emit(text, out, stdout):
    if out:
        Path(out).write_text(text)
    else:
        stdout.write(text)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="lordenkit", description=__doc__.splitlines()[0])
    ap.add_argument("config", help="experiment config (YAML or JSON)")
    ap.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    ap.add_argument("--workers", type=int, default=None,
                    help=f"worker threads (overrides {WORKERS_ENV} and the config)")
    ap.add_argument("--out", default=None, help="report path (default: stdout)")
    ap.add_argument("--format", choices=("csv", "json"), default=None)
    args = ap.parse_args(argv)
    return run(args.config, args.seed, args.workers, args.out, args.format)


if __name__ == "__main__":
    sys.exit(main())
