"""Command-line front end.

    qrouter --config run.json --out results/ [--seed N] [--workers N] [--dt-max X]

The config is a strict JSON document (unknown keys are rejected). Every flag
can also be supplied through an environment variable with the ``QROUTER_``
prefix (``QROUTER_OUT``, ``QROUTER_SEED``, ``QROUTER_WORKERS``,
``QROUTER_DT_MAX``); an explicit flag wins over the environment.

Exit codes: 0 success, 2 configuration error, 3 numerical failure. On
failure a machine-readable ``error.json`` is written to the output directory
(when known) and echoed on stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import PropagationError, default_dt_max
from .experiments import (
    decoherence_sweep,
    optimize_ratio,
    run_ensemble,
    run_routing,
    run_transfer,
    sweep_frequency_length,
)
from .metrics import NoSignalError
from .model import ChainSpec, DegenerateProtocolError, DriveProtocol, ErrorModel, stage_durations
from .special import XI0

__all__ = ["RunConfig", "ConfigError", "parse_config", "validate_config", "run", "main", "ENV_PREFIX"]

ENV_PREFIX = "QROUTER_"
KINDS = ("route", "split", "sweep", "ensemble", "decohere", "optimize", "transfer")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    """Invalid run configuration; ``diagnostics`` lists 'path: problem' strings."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass
class RunConfig:
    kind: str
    chain: ChainSpec | None = None
    drive: DriveProtocol | None = None
    errors: ErrorModel = field(default_factory=ErrorModel)
    params: dict = field(default_factory=dict)
    out_dir: str | None = None
    stride: int | None = None
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------- schema

_TOP = {"experiment", "chain", "drive", "errors", "params", "output"}
_CHAIN = {"n_sites", "lambda1", "lambda2", "node_index", "base_splitting", "coupling", "couplings", "include_alice"}
_DRIVE = {"omega", "stage_durations", "start_offset", "n_cycles", "xi0", "snap_to_period", "carrier_phase"}
_ERRORS = {"eps_J", "eps_b", "eps_T", "seed"}
_OUTPUT = {"dir", "stride"}
_PARAMS = {
    "route": {"offset", "gamma"},
    "split": {"offset", "gamma"},
    "sweep": {"omegas", "lengths"},
    "decohere": {"gammas", "lengths"},
    "ensemble": {"M", "gamma", "beta", "compensation"},
    "optimize": {"lo", "hi"},
    "transfer": {"alpha", "beta", "gamma", "delta_theta"},
}
# which sections each kind needs; "template" chains need only the splittings
_NEEDS = {
    "route": ("chain", "drive"),
    "split": ("chain", "drive"),
    "sweep": ("chain",),
    "decohere": ("chain", "drive"),
    "ensemble": ("chain", "drive", "errors"),
    "optimize": (),
    "transfer": ("chain", "drive"),
}
_TEMPLATE_KINDS = ("sweep", "decohere")
_OFFSET_WORDS = ("0", "T1", "T1/2")


class _Checker:
    def __init__(self):
        self.diag: list[str] = []

    def fail(self, path: str, msg: str) -> None:
        self.diag.append(f"{path}: {msg}")

    def keys(self, obj, allowed: set, path: str) -> dict:
        if not isinstance(obj, dict):
            self.fail(path, "must be an object")
            return {}
        for k in sorted(set(obj) - allowed):
            self.fail(f"{path}.{k}", "unknown key")
        return obj

    def number(self, obj, key, path, *, required=False, default=None, positive=False, nonneg=False, integer=False):
        if key not in obj:
            if required:
                self.fail(f"{path}.{key}", "missing")
            return default
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(f"{path}.{key}", f"expected a finite number, got {v!r}")
            return default
        if integer and int(v) != v:
            self.fail(f"{path}.{key}", f"expected an integer, got {v!r}")
            return default
        if positive and not v > 0:
            self.fail(f"{path}.{key}", f"must be > 0, got {v!r}")
            return default
        if nonneg and v < 0:
            self.fail(f"{path}.{key}", f"must be >= 0, got {v!r}")
            return default
        return int(v) if integer else float(v)

    def flag(self, obj, key, path, default):
        if key not in obj:
            return default
        if not isinstance(obj[key], bool):
            self.fail(f"{path}.{key}", "expected true or false")
            return default
        return obj[key]

    def number_list(self, obj, key, path, *, required=False, positive=False, nonneg=False, integer=False):
        if key not in obj:
            if required:
                self.fail(f"{path}.{key}", "missing")
            return None
        v = obj[key]
        if not isinstance(v, list) or not v:
            self.fail(f"{path}.{key}", "expected a non-empty list of numbers")
            return None
        sub = {str(i): x for i, x in enumerate(v)}
        out = [self.number(sub, str(i), f"{path}.{key}", positive=positive, nonneg=nonneg, integer=integer)
               for i in range(len(v))]
        if any(x is None for x in out):
            return None
        if any(b <= a for a, b in zip(out[:-1], out[1:])):
            self.fail(f"{path}.{key}", "must be strictly increasing")
            return None
        return out


def _parse_chain(ck: _Checker, obj: dict, template: bool) -> dict | None:
    c = ck.keys(obj, _CHAIN, "chain")
    n0 = len(ck.diag)
    out = {
        "lambda1": ck.number(c, "lambda1", "chain", required=True, positive=True),
        "lambda2": ck.number(c, "lambda2", "chain", required=True, positive=True),
        "base_splitting": ck.number(c, "base_splitting", "chain", default=1.0),
        "include_alice": ck.flag(c, "include_alice", "chain", True),
    }
    if out["lambda1"] is not None and out["lambda1"] == out["lambda2"]:
        ck.fail("chain.lambda2", "degenerate ratchet: lambda1 == lambda2")
    if template:
        for k in ("n_sites", "node_index", "couplings"):
            if k in c:
                ck.fail(f"chain.{k}", "not used by this experiment (lengths come from params.lengths)")
        out["coupling"] = ck.number(c, "coupling", "chain", default=1.0, positive=True)
        return out if len(ck.diag) == n0 else None
    n = ck.number(c, "n_sites", "chain", required=True, positive=True, integer=True)
    node = ck.number(c, "node_index", "chain", integer=True)
    if n is not None:
        if node is None and "node_index" not in c:
            node = (n + 1) // 2
        elif node is not None and not 1 <= node <= n:
            ck.fail("chain.node_index", f"must lie in 1..{n}, got {node}")
    if "couplings" in c and "coupling" in c:
        ck.fail("chain.couplings", "give either couplings or coupling, not both")
    if "couplings" in c:
        v = c["couplings"]
        if not isinstance(v, list) or (n is not None and len(v) != n - 1):
            ck.fail("chain.couplings", f"expected a list of n_sites - 1 = {None if n is None else n - 1} numbers")
        else:
            sub = {str(i): x for i, x in enumerate(v)}
            couplings = [ck.number(sub, str(i), "chain.couplings", positive=True) for i in range(len(v))]
            out["couplings"] = tuple(couplings)
    elif n is not None:
        j = ck.number(c, "coupling", "chain", default=1.0, positive=True)
        out["couplings"] = (j,) * (n - 1) if j is not None else None
    out["n_sites"], out["node_index"] = n, node
    return out if len(ck.diag) == n0 else None


def _parse_drive(ck: _Checker, obj: dict, chain: dict | None, template: bool) -> dict | None:
    d = ck.keys(obj, _DRIVE, "drive")
    n0 = len(ck.diag)
    out = {
        "omega": ck.number(d, "omega", "drive", required=True, positive=True),
        "xi0": ck.number(d, "xi0", "drive", default=XI0, positive=True),
        "snap_to_period": ck.flag(d, "snap_to_period", "drive", False),
        "carrier_phase": ck.number(d, "carrier_phase", "drive", default=0.0),
        "n_cycles": ck.number(d, "n_cycles", "drive", nonneg=True, integer=True),
    }
    if template:
        for k in ("stage_durations", "start_offset", "n_cycles"):
            if k in d:
                ck.fail(f"drive.{k}", "not used by this experiment")
        return out if len(ck.diag) == n0 else None
    if "stage_durations" in d:
        v = d["stage_durations"]
        if not isinstance(v, list) or len(v) != 2:
            ck.fail("drive.stage_durations", "expected [T1, T2]")
        else:
            sub = {"0": v[0], "1": v[1]}
            out["stage_durations"] = (
                ck.number(sub, "0", "drive.stage_durations", positive=True),
                ck.number(sub, "1", "drive.stage_durations", positive=True),
            )
    elif chain is not None:
        try:
            j = chain["couplings"][0] if chain["couplings"] else 1.0
            out["stage_durations"] = stage_durations(j, chain["lambda1"], chain["lambda2"], out["xi0"] or XI0)
        except DegenerateProtocolError as exc:
            ck.fail("chain", str(exc))
    out["start_offset"] = ck.number(d, "start_offset", "drive", default=0.0, nonneg=True)
    return out if len(ck.diag) == n0 else None


def _parse_params(ck: _Checker, kind: str, obj: dict) -> dict:
    p = ck.keys(obj, _PARAMS[kind], "params")
    out: dict = {}
    if kind in ("route", "split"):
        off = p.get("offset", "0" if kind == "route" else "T1/2")
        if isinstance(off, str):
            if off not in _OFFSET_WORDS:
                ck.fail("params.offset", f"expected a number or one of {list(_OFFSET_WORDS)}")
            out["offset"] = off
        else:
            out["offset"] = ck.number(p, "offset", "params", nonneg=True)
        out["gamma"] = ck.number(p, "gamma", "params", default=0.0, nonneg=True)
    elif kind == "sweep":
        out["omegas"] = ck.number_list(p, "omegas", "params", required=True, positive=True)
        out["lengths"] = ck.number_list(p, "lengths", "params", required=True, positive=True, integer=True)
    elif kind == "decohere":
        out["gammas"] = ck.number_list(p, "gammas", "params", required=True, nonneg=True)
        out["lengths"] = ck.number_list(p, "lengths", "params", required=True, positive=True, integer=True)
    elif kind == "ensemble":
        out["M"] = ck.number(p, "M", "params", required=True, integer=True)
        if out["M"] is not None and out["M"] < 2:
            ck.fail("params.M", "an ensemble needs M >= 2")
        out["gamma"] = ck.number(p, "gamma", "params", default=0.0, nonneg=True)
        out["beta"] = ck.number(p, "beta", "params", default=1 / math.sqrt(2), nonneg=True)
        if out["beta"] is not None and out["beta"] > 1:
            ck.fail("params.beta", "must lie in [0, 1]")
        comp = p.get("compensation", "global")
        if comp not in ("global", "per_realization"):
            ck.fail("params.compensation", "expected 'global' or 'per_realization'")
        out["compensation"] = comp
    elif kind == "optimize":
        out["lo"] = ck.number(p, "lo", "params", default=0.1, positive=True)
        out["hi"] = ck.number(p, "hi", "params", default=1.0, positive=True)
        if out["lo"] is not None and out["hi"] is not None and not out["lo"] < out["hi"] <= 1:
            ck.fail("params", "need 0 < lo < hi <= 1")
    elif kind == "transfer":
        out["alpha"] = ck.number(p, "alpha", "params", default=1 / math.sqrt(2))
        out["beta"] = ck.number(p, "beta", "params", default=1 / math.sqrt(2))
        out["gamma"] = ck.number(p, "gamma", "params", default=0.0, nonneg=True)
        out["delta_theta"] = ck.number(p, "delta_theta", "params", default=0.0)
        a, b = out["alpha"], out["beta"]
        if a is not None and b is not None and abs(a * a + b * b - 1) > 1e-6:
            ck.fail("params", "alpha^2 + beta^2 must equal 1")
    return out


def validate_config(raw) -> RunConfig:
    """Validate a decoded JSON document; raise :class:`ConfigError` listing every problem."""
    ck = _Checker()
    top = ck.keys(raw, _TOP, "$")
    if ck.diag:
        raise ConfigError(ck.diag)
    kind = top.get("experiment")
    if kind not in KINDS:
        raise ConfigError([f"$.experiment: expected one of {list(KINDS)}, got {kind!r}"])
    for section in _NEEDS[kind]:
        if section not in top:
            ck.fail(f"$.{section}", f"required for experiment '{kind}'")
    for section in ("chain", "drive", "errors"):
        if section in top and section not in _NEEDS[kind]:
            ck.fail(f"$.{section}", f"not used by experiment '{kind}'")
    if ck.diag:
        raise ConfigError(ck.diag)

    template = kind in _TEMPLATE_KINDS
    chain = _parse_chain(ck, top["chain"], template) if "chain" in top else None
    drive = _parse_drive(ck, top["drive"], chain, template) if "drive" in top else None
    errors = ErrorModel()
    if "errors" in top:
        e = ck.keys(top["errors"], _ERRORS, "errors")
        vals = {k: ck.number(e, k, "errors", default=0.0, nonneg=True) for k in ("eps_J", "eps_b", "eps_T")}
        seed = ck.number(e, "seed", "errors", default=0, nonneg=True, integer=True)
        if all(v is not None for v in vals.values()) and seed is not None:
            errors = ErrorModel(seed=seed, **vals)
    params = _parse_params(ck, kind, top.get("params", {}))
    out = ck.keys(top.get("output", {}), _OUTPUT, "output")
    out_dir = out.get("dir")
    if out_dir is not None and not isinstance(out_dir, str):
        ck.fail("output.dir", "expected a string")
    stride = ck.number(out, "stride", "output", positive=True, integer=True)
    if ck.diag:
        raise ConfigError(ck.diag)

    spec = protocol = None
    try:
        if chain is not None and not template:
            spec = ChainSpec(
                n_sites=chain["n_sites"], couplings=chain["couplings"], base_splitting=chain["base_splitting"],
                lambda1=chain["lambda1"], lambda2=chain["lambda2"], node_index=chain["node_index"],
                include_alice=chain["include_alice"],
            )
        elif chain is not None:
            # a two-site placeholder carrying the template splittings
            spec = ChainSpec.uniform(2, chain["lambda1"], chain["lambda2"], node_index=1,
                                     base_splitting=chain["base_splitting"], coupling=chain["coupling"])
        if drive is not None:
            durations = drive.get("stage_durations") or stage_durations(1.0, chain["lambda1"], chain["lambda2"])
            protocol = DriveProtocol(
                omega=drive["omega"], stage_durations=durations, start_offset=drive.get("start_offset", 0.0),
                n_cycles=drive["n_cycles"], xi0=drive["xi0"], snap_to_period=drive["snap_to_period"],
                carrier_phase=drive["carrier_phase"],
            )
    except ValueError as exc:
        raise ConfigError([f"$: {exc}"]) from exc
    return RunConfig(kind, spec, protocol, errors, params, out_dir, stride, raw)


def parse_config(path) -> RunConfig:
    """Read and validate a JSON run-config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror})"]) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
    return validate_config(raw)


# ---------------------------------------------------------------- execution


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])


def _default_stride(protocol: DriveProtocol, dt_max: float | None) -> int:
    """About 32 samples per stage (stage ends are always recorded)."""
    dt = dt_max or default_dt_max(protocol.omega)
    return max(1, int(min(protocol.stage_durations) / dt / 32))


def _resolve_offset(word, protocol: DriveProtocol) -> float:
    t1 = protocol.stage_durations[0]
    return {"0": 0.0, "T1": t1, "T1/2": 0.5 * t1}.get(word, word) if isinstance(word, str) else float(word)


def run(config: RunConfig, out_dir, seed: int | None = None, workers: int | None = None,
        dt_max: float | None = None) -> dict:
    """Execute ``config`` and write its artifacts into ``out_dir``; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    errors = config.errors if seed is None else ErrorModel(config.errors.eps_J, config.errors.eps_b,
                                                          config.errors.eps_T, int(seed))
    p = config.params
    started = time.perf_counter()
    files: list[str] = []
    kind = config.kind

    if kind in ("route", "split"):
        stride = config.stride or _default_stride(config.drive, dt_max)
        res = run_routing(config.chain, config.drive, _resolve_offset(p["offset"], config.drive),
                          gamma=p["gamma"], dt_max=dt_max, stride=stride)
        res.trajectory.to_csv(out / "trajectory.csv")
        files.append("trajectory.csv")
        summary = res.to_dict()
    elif kind == "sweep":
        spec = config.chain
        res = sweep_frequency_length(spec.lambda1, spec.lambda2, p["omegas"], p["lengths"],
                                     base_splitting=spec.base_splitting, dt_max=dt_max)
        _write_rows(out / "sweep.csv", ["omega[J]", "N", "C_sim", "F", "C_estimate"],
                    ([r["omega"], int(r["N"]), r["C_sim"], r["F"], r["C_estimate"]] for r in res.rows()))
        files.append("sweep.csv")
        summary = {"points": res.rows()}
    elif kind == "decohere":
        res = decoherence_sweep(config.chain, config.drive, p["gammas"], p["lengths"], dt_max=dt_max)
        _write_rows(out / "decoherence.csv", ["gamma[J]", "N", "C_sim", "F", "C_estimate"],
                    ([r["gamma"], int(r["N"]), r["C_sim"], r["F"], r["C_estimate"]] for r in res.rows()))
        files.append("decoherence.csv")
        summary = {"points": res.rows(), "C0": {str(k): v for k, v in res.extra["C0"].items()}}
    elif kind == "ensemble":
        res = run_ensemble(config.chain, config.drive, errors, p["M"], gamma=p["gamma"], beta=p["beta"],
                           workers=workers, compensation=p["compensation"], dt_max=dt_max)
        _write_rows(out / "histogram.csv", ["bin_left", "count"],
                    ([round(float(b), 6), int(c)] for b, c in zip(res.bin_left, res.counts)))
        _write_rows(out / "realizations.csv", ["index", "C", "theta[rad]", "F"],
                    ([r.index, r.C, r.theta, r.F] for r in res.records))
        files += ["histogram.csv", "realizations.csv"]
        summary = res.summary()
    elif kind == "optimize":
        r, f = optimize_ratio(p["lo"], p["hi"])
        summary = {"ratio": r, "period": f, "period_time[1/J]": math.pi * f}
    elif kind == "transfer":
        rep = run_transfer(config.chain, config.drive, p["alpha"], p["beta"], gamma=p["gamma"],
                           delta_theta=p["delta_theta"], dt_max=dt_max)
        summary = rep.to_dict()
    else:  # pragma: no cover - validate_config guards this
        raise ConfigError([f"$.experiment: unknown kind {kind!r}"])

    wall = time.perf_counter() - started
    _write_json(out / "summary.json", summary)
    files.append("summary.json")
    _write_json(out / "manifest.json", {
        "experiment": kind,
        "config_sha256": config.config_hash,
        "seed": errors.seed,
        "version": __version__,
        "numpy": np.__version__,
        "wall_time_s": wall,
        "workers": workers,
        "dt_max": dt_max,
        "outputs": files,
    })
    return summary


def _env(name: str, cast):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None or raw == "":
        return None
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError([f"${ENV_PREFIX}{name}: cannot parse {raw!r}"]) from exc


def _error(code: int, kind: str, message: str, out_dir, diagnostics=()) -> int:
    payload = {"status": "error", "kind": kind, "exit_code": code, "message": message,
               "diagnostics": list(diagnostics)}
    print(json.dumps(payload), file=sys.stderr)
    if out_dir is not None:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            _write_json(Path(out_dir) / "error.json", payload)
        except OSError:
            pass
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qrouter", description="Driven-chain entanglement router simulations.")
    ap.add_argument("--config", required=True, help="JSON run-config")
    ap.add_argument("--out", help=f"output directory (env {ENV_PREFIX}OUT; default: config output.dir or ./out)")
    ap.add_argument("--seed", type=int, help=f"base seed for fabrication errors (env {ENV_PREFIX}SEED)")
    ap.add_argument("--workers", type=int, help=f"ensemble worker processes (env {ENV_PREFIX}WORKERS; default: all CPUs)")
    ap.add_argument("--dt-max", type=float, help=f"largest integrator step in 1/J (env {ENV_PREFIX}DT_MAX)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = args.out
    try:
        out_dir = out_dir or _env("OUT", str)
        seed = args.seed if args.seed is not None else _env("SEED", int)
        workers = args.workers if args.workers is not None else _env("WORKERS", int)
        dt_max = args.dt_max if args.dt_max is not None else _env("DT_MAX", float)
        if seed is not None and seed < 0:
            raise ConfigError(["--seed: must be non-negative"])
        if workers is not None and workers < 1:
            raise ConfigError(["--workers: must be >= 1"])
        if dt_max is not None and not dt_max > 0:
            raise ConfigError(["--dt-max: must be > 0"])
        config = parse_config(args.config)
        out_dir = out_dir or config.out_dir or "out"
        if workers is None:
            workers = os.cpu_count() or 1
    except ConfigError as exc:
        return _error(EXIT_CONFIG, "config", str(exc), out_dir, exc.diagnostics)
    try:
        summary = run(config, out_dir, seed=seed, workers=workers, dt_max=dt_max)
    except ConfigError as exc:
        return _error(EXIT_CONFIG, "config", str(exc), out_dir, exc.diagnostics)
    except (PropagationError, NoSignalError, ValueError, ArithmeticError, RuntimeError) as exc:
        return _error(EXIT_NUMERIC, "numerical", f"{type(exc).__name__}: {exc}", out_dir)
    print(json.dumps({"status": "ok", "experiment": config.kind, "out": str(out_dir), "summary": summary},
                     default=float)[:2000])
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
