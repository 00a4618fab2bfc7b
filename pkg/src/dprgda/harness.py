"""Experiment runner for the synthetic matrix-sensing benchmark.

A run generates (or loads) an instance, allocates the privacy budget, runs one
method with evaluation-only diagnostics and writes::

    trajectory.csv   t,phase,phi,grad_norm,lambda_min,v_norm,eps_spent
    summary.json     final diagnostics, stop reason, wall time, output point
    budget.json      accountant report (also budget.txt)
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics
from .baselines import SquaredResidualOracle, calibrate_sgda, calibrate_spider_min, dp_sgda, dp_spider_min
from .core import AlgoParams, ParameterError, PrivacyBudget, RandomSource
from .escape import exact_diagnostics, run
from .privacy import budget_report, calibrate, format_report
from .problems import MatrixSensing, generate_matrix_sensing, load_instance
from .trajectory import CsvSink, Trajectory

METHODS = ("dp-rgda", "dp-sgda", "dp-spider-min")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    method: str = "dp-rgda"
    # problem
    dim_p: int = 20
    dim_q: int = 20
    rank: int = 3
    n: int = 400
    sigma_noise: float = 0.01
    scale: float = 1.0
    init_scale: float = 0.1
    instance: Optional[str] = None
    instance_seed: Optional[int] = None
    # algorithm
    params: AlgoParams = field(default_factory=AlgoParams)
    eta_spider: float = 0.005
    sgda_steps: tuple = (0.005, 0.8)
    sgda_batch: int = 200
    # privacy
    epsilon: float = 2.0
    delta: float = 1e-6
    # run
    seed: int = 0
    out: Optional[str] = None
    curvature_every: int = 1
    h: float = diagnostics.DEFAULT_H
    eig_maxiter: int = diagnostics.DEFAULT_MAXITER
    eig_tol: float = diagnostics.DEFAULT_TOL
    eig_method: str = "lanczos"
    rho_phi: float = 1.0

    def validate(self, n: Optional[int] = None) -> "ExperimentConfig":
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.curvature_every < 0:
            raise ConfigError("curvature_every must be >= 0")
        if not self.epsilon > 0 or not 0 < self.delta < 1:
            raise ConfigError("need epsilon > 0 and 0 < delta < 1")
        try:
            self.params.validate(n if n is not None else (None if self.instance else self.n))
        except ParameterError as err:
            raise ConfigError(str(err)) from err
        if self.method == "dp-sgda" and self.sgda_batch > (n or self.n):
            raise ConfigError("sgda_batch exceeds n")
        return self

    @property
    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(self.epsilon, self.delta)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "params"}
        d["sgda_steps"] = list(self.sgda_steps)
        d["params"] = self.params.to_dict()
        return d


_PARAM_NAMES = {f.name for f in fields(AlgoParams)}
_CONFIG_NAMES = {f.name for f in fields(ExperimentConfig)} - {"params"}


def config_from_mapping(mapping: dict, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Overlay ``mapping`` on ``base``; AlgoParams keys may sit at top level or under ``params``."""
    cfg = base or ExperimentConfig()
    top, pchanges = {}, {}
    for key, val in mapping.items():
        if key == "params":
            pchanges.update(val)
        elif key in _PARAM_NAMES:
            pchanges[key] = val
        elif key in _CONFIG_NAMES:
            top[key] = val
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    params = cfg.params
    if pchanges:
        types = {f.name: f.type for f in fields(AlgoParams)}
        coerced = {}
        for k, v in pchanges.items():
            if k not in types:
                raise ConfigError(f"unknown parameter {k!r}")
            coerced[k] = _coerce(v, types[k], k)
        params = params.replace(**coerced)
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    changes = {k: _coerce(v, types[k], k) for k, v in top.items()}
    return ExperimentConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)}, **changes, "params": params})


def _coerce(value, typ, name):
    typ = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    try:
        if value is None:
            return None
        if typ == "int":
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        if typ == "float":
            return float(value)
        if typ == "tuple":
            if isinstance(value, str):
                value = [float(v) for v in value.replace(",", " ").split()]
            return tuple(float(v) for v in value)
        if "Optional[int]" in typ:
            return int(value)
        return value if not isinstance(value, str) or "str" not in typ else str(value)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad value {value!r} for {name}") from err


def parse_config_text(text: str) -> dict:
    """JSON document or ``key = value`` lines (``#`` comments allowed)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        return json.loads(stripped)
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    cfg = config_from_mapping(parse_config_text(Path(path).read_text()))
    return config_from_mapping(overrides or {}, cfg)


# ----------------------------------------------------------------------


def build_instance(cfg: ExperimentConfig):
    """Instance plus shared starting point ``(x0, y0)``."""
    if cfg.instance:
        inst = load_instance(cfg.instance)
        doc = json.loads(Path(cfg.instance).read_text())
        if doc.get("x0") is not None:
            x0 = np.asarray(doc["x0"], dtype=float)
            return inst, x0, np.zeros(inst.dim_y)
        gen = np.random.default_rng(cfg.seed if cfg.instance_seed is None else cfg.instance_seed)
        x0, y0 = inst.initial_point(gen, cfg.init_scale)
        return inst, x0, y0
    gen = np.random.default_rng(cfg.seed if cfg.instance_seed is None else cfg.instance_seed)
    inst = generate_matrix_sensing(gen, cfg.dim_p, cfg.dim_q, cfg.rank, cfg.n, cfg.sigma_noise, cfg.scale)
    x0, y0 = inst.initial_point(gen, cfg.init_scale)
    return inst, x0, y0


def write_instance(inst: MatrixSensing, x0, path) -> Path:
    doc = inst.to_dict()
    doc["x0"] = np.asarray(x0).tolist()
    path = Path(path)
    path.write_text(json.dumps(doc))
    return path


def _eig(cfg, inst):
    def eig(x):
        return diagnostics.min_eigenvalue(inst, x, h=cfg.h, maxiter=cfg.eig_maxiter, tol=cfg.eig_tol,
                                          method=cfg.eig_method).value
    return eig


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trajectory: Trajectory
    summary: dict
    budget: dict
    x_out: np.ndarray
    paths: dict = field(default_factory=dict)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    inst, x0, y0 = build_instance(cfg)
    cfg.validate(inst.n)
    rng = RandomSource(cfg.seed)
    budget = cfg.budget
    diagnose = exact_diagnostics(inst, _eig(cfg, inst))
    out_dir = Path(cfg.out) if cfg.out else None
    sinks = []
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        sinks.append(CsvSink(out_dir / "trajectory.csv"))
    p = cfg.params
    start = time.perf_counter()
    extra = {}
    try:
        if cfg.method == "dp-rgda":
            cal = calibrate(p, budget, inst.n)
            res = run(inst, rng, x0, y0, p, budget, diagnose=diagnose, curvature_every=cfg.curvature_every,
                      sinks=sinks, calibration=cal)
            traj, x_out = res.trajectory, res.x_out
            extra = {"reason": res.reason, "certified": res.certified, "episodes": res.episodes,
                     "exits": res.exits}
        elif cfg.method == "dp-spider-min":
            cal = calibrate_spider_min(p.T, p, budget)
            res = dp_spider_min(SquaredResidualOracle(inst), rng, x0, p.T, p, cal.noise, budget=budget,
                                eta=cfg.eta_spider, diagnose=diagnose, curvature_every=cfg.curvature_every,
                                sinks=sinks)
            res.calibration = cal
            traj, x_out = res.trajectory, res.x_out
        else:
            cal = calibrate_sgda(p.T, cfg.sgda_batch, p.C_v, budget, p.composition_slack)
            res = dp_sgda(inst, rng, x0, y0, p.T, cfg.sgda_steps, p.C_v, cal.noise, cfg.sgda_batch,
                          budget=budget, diagnose=diagnose, curvature_every=cfg.curvature_every, sinks=sinks)
            traj, x_out = res.trajectory, res.x_out
    finally:
        for s in sinks:
            s.close()
    wall = time.perf_counter() - start
    # the csv sink received the rows; the budget object only lives for this call
    report = budget_report(cal, cfg.budget)
    final = traj.final
    summary = {
        "method": cfg.method,
        "seed": cfg.seed,
        "instance": inst.fingerprint(),
        "final": {"phi": final.phi, "grad_norm": final.grad_norm, "lambda_min": final.lambda_min},
        "T": p.T,
        "rows": len(traj),
        "wall_time_s": wall,
        "eps_composed": report["composed"]["epsilon"],
        "delta_composed": report["composed"]["delta"],
        "x_out": np.asarray(x_out).tolist(),
        **extra,
    }
    paths = {}
    if out_dir is not None:
        paths["trajectory"] = out_dir / "trajectory.csv"
        paths["summary"] = out_dir / "summary.json"
        paths["budget"] = out_dir / "budget.json"
        paths["summary"].write_text(json.dumps(_jsonable(summary), indent=2))
        paths["budget"].write_text(json.dumps(_jsonable(report), indent=2))
        (out_dir / "budget.txt").write_text(format_report(report) + "\n")
        (out_dir / "config.json").write_text(json.dumps(_jsonable(cfg.to_dict()), indent=2))
    return ExperimentResult(cfg, traj, summary, report, np.asarray(x_out), paths)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    return obj


# ----------------------------------------------------------------------

TABLE_COLUMNS = ("method", "phi", "grad_norm", "lambda_min")


def compare(configs, out: Optional[str] = None) -> dict:
    """Run each config on a shared instance and tabulate the final diagnostics.

    Rows are ordered by final ``phi`` ascending. Configs whose instances differ
    (by content fingerprint) or whose budgets differ are rejected.
    """
    configs = list(configs)
    if not configs:
        raise ConfigError("compare needs at least one configuration")
    prints = {build_instance(c)[0].fingerprint() for c in configs}
    if len(prints) > 1:
        raise ConfigError("configurations do not share one instance")
    if len({(c.epsilon, c.delta) for c in configs}) > 1:
        raise ConfigError("configurations do not share one privacy budget")
    results = [run_experiment(c) for c in configs]
    rows = [{"method": r.config.method, **r.summary["final"]} for r in results]
    rows.sort(key=lambda r: (r["phi"] if math.isfinite(r["phi"]) else math.inf))
    table = format_table(rows)
    csv_text = ",".join(TABLE_COLUMNS) + "\n" + "".join(
        ",".join(str(r[c]) if c == "method" else repr(float(r[c])) for c in TABLE_COLUMNS) + "\n" for r in rows
    )
    panels = _figure_panels(results)
    if out:
        d = Path(out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "comparison.csv").write_text(csv_text)
        (d / "comparison.txt").write_text(table + "\n")
        for name, text in panels.items():
            (d / f"fig_{name}.csv").write_text(text)
    return {"rows": rows, "table": table, "csv": csv_text, "panels": panels, "results": results}


def format_table(rows) -> str:
    head = f"{'method':<16}{'phi':>14}{'grad_norm':>14}{'lambda_min':>14}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r['method']:<16}{r['phi']:>14.4f}{r['grad_norm']:>14.4f}{r['lambda_min']:>14.4e}")
    return "\n".join(lines)


def _figure_panels(results) -> dict:
    """One CSV per trajectory panel (objective, gradient norm, curvature)."""
    panels = {}
    names = [r.config.method for r in results]
    for col, name in (("phi", "phi"), ("grad_norm", "grad_norm"), ("lambda_min", "lambda_min")):
        series = [dict((row.t, getattr(row, col)) for row in r.trajectory.rows) for r in results]
        ts = sorted(set().union(*[s.keys() for s in series]))
        lines = ["t," + ",".join(names)]
        for t in ts:
            lines.append(str(t) + "," + ",".join(repr(float(s.get(t, math.nan))) for s in series))
        panels[name] = "\n".join(lines) + "\n"
    return panels


def check_point(instance, x, alpha: float, rho_phi: float = 1.0, **eig_kwargs) -> dict:
    cert = diagnostics.sosp_check(instance, x, alpha, rho_phi, **eig_kwargs)
    return {**cert.to_dict(), "phi": instance.value(x)}
