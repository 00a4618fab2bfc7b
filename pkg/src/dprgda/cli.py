"""Command line entry point: ``dprgda {generate,run,compare,check}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .core import ParameterError
from .harness import (METHODS, ConfigError, ExperimentConfig, _jsonable, build_instance, check_point,
                      compare, config_from_mapping, load_config, run_experiment, write_instance)
from .privacy import InfeasibleBudgetError
from .problems import load_instance

EXIT_CONFIG = 2
EXIT_BUDGET = 3

# flag -> (config key, type)
RUN_FLAGS = {
    "--eta": ("eta", float),
    "--eta-h": ("eta_H", float),
    "--r": ("r", float),
    "--t-thres": ("t_thres", int),
    "--d-bar": ("D_bar", float),
    "--alpha": ("alpha", float),
    "--lambda": ("lam", float),
    "--inner-k": ("K", int),
    "--period-q": ("q", int),
    "--s1": ("S1", int),
    "--s2": ("S2", int),
    "--big-t": ("T", int),
    "--clip-v": ("C_v", float),
    "--clip-u": ("C_u", float),
    "--clip-mode": ("clip_mode", str),
    "--calibration": ("calibration", str),
    "--noise-constant": ("noise_constant", float),
    "--eps": ("epsilon", float),
    "--delta": ("delta", float),
    "--seed": ("seed", int),
    "--instance-seed": ("instance_seed", int),
    "--dim-p": ("dim_p", int),
    "--dim-q": ("dim_q", int),
    "--rank": ("rank", int),
    "--n": ("n", int),
    "--sigma-noise": ("sigma_noise", float),
    "--scale": ("scale", float),
    "--eta-spider": ("eta_spider", float),
    "--sgda-batch": ("sgda_batch", int),
    "--curvature-every": ("curvature_every", int),
    "--eig-method": ("eig_method", str),
    "--rho-phi": ("rho_phi", float),
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or key = value configuration file")
    p.add_argument("--instance", help="instance file written by `generate`")
    p.add_argument("--out", help="output directory")
    for flag, (key, typ) in RUN_FLAGS.items():
        p.add_argument(flag, dest=key, type=str, default=None)


def _overrides(ns: argparse.Namespace) -> dict:
    out = {}
    for _flag, (key, typ) in RUN_FLAGS.items():
        val = getattr(ns, key, None)
        if val is None:
            continue
        out[key] = val
    for key in ("instance", "out"):
        if getattr(ns, key, None):
            out[key] = getattr(ns, key)
    return out


def _config(ns, method=None) -> ExperimentConfig:
    over = _overrides(ns)
    if method:
        over["method"] = method
    cfg = load_config(ns.config, {}) if getattr(ns, "config", None) else ExperimentConfig()
    return config_from_mapping(over, cfg)


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def cmd_generate(ns) -> int:
    cfg = _config(ns)
    inst, x0, _ = build_instance(cfg)
    path = write_instance(inst, x0, ns.output)
    print(json.dumps({"instance": str(path), "fingerprint": inst.fingerprint(), "n": inst.n,
                      "dim_x": inst.dim_x}))
    return 0


def cmd_run(ns) -> int:
    cfg = _config(ns, ns.method)
    res = run_experiment(cfg)
    s = dict(res.summary)
    s.pop("x_out", None)
    print(json.dumps(_jsonable(s), indent=2))
    return 0


def cmd_compare(ns) -> int:
    methods = [m.strip() for m in ns.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    configs = []
    for m in methods:
        cfg = _config(ns, m)
        if cfg.out:
            cfg.out = str(Path(cfg.out) / m)
        configs.append(cfg)
    out = compare(configs, out=ns.out)
    print(out["table"])
    return 0


def cmd_check(ns) -> int:
    inst = load_instance(ns.instance)
    doc = json.loads(Path(ns.point).read_text())
    x = np.asarray(doc["x_out"] if isinstance(doc, dict) else doc, dtype=float)
    if x.size != inst.dim_x:
        raise ConfigError(f"point has {x.size} coordinates, instance expects {inst.dim_x}")
    cert = check_point(inst, x, float(ns.alpha), float(ns.rho_phi))
    print(json.dumps(_jsonable(cert), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dprgda", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a matrix-sensing instance file")
    _add_run_flags(g)
    g.add_argument("output", help="instance JSON path")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run one experiment")
    _add_run_flags(r)
    r.add_argument("--method", choices=METHODS, default=None)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="run several methods on one instance")
    _add_run_flags(c)
    c.add_argument("--methods", default=",".join(METHODS))
    c.set_defaults(func=cmd_compare)

    k = sub.add_parser("check", help="second-order certificate for a saved point")
    k.add_argument("--instance", required=True)
    k.add_argument("--point", required=True, help="JSON list or summary.json containing x_out")
    k.add_argument("--alpha", required=True)
    k.add_argument("--rho-phi", default="1.0")
    k.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING)
    try:
        return ns.func(ns)
    except InfeasibleBudgetError as err:
        return _fail(EXIT_BUDGET, "infeasible_budget", str(err))
    except (ConfigError, ParameterError, ValueError, FileNotFoundError, KeyError) as err:
        return _fail(EXIT_CONFIG, "invalid_config", str(err))


if __name__ == "__main__":
    sys.exit(main())
