"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the collected lines are
repeated in the terminal summary. ``python3 tests/test_acceptance.py`` prints
the bare report.
"""

import itertools
import math
import time

import numpy as np
import pytest

from dprgda import problems
from dprgda.core import AlgoParams, PrivacyBudget, RandomSource
from dprgda.diagnostics import gradient_mapping, hvp, min_eigenvalue, sosp_check
from dprgda.escape import escape_schedule, run
from dprgda.harness import config_from_mapping, run_experiment
from dprgda.privacy import (INCREMENTAL, NoiseScale, QueryClass, account, advanced_composition, clip,
                            clipped_mean, gaussian_mechanism)
from dprgda.spider import EstimatorPair, IterateState, incremental_update, inner_loop, refresh

RESULTS = {}


def report(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS[name] = line
    print("\n" + line, flush=True)
    return ok


# --- 1 -----------------------------------------------------------------

def test_criterion_1_private_benchmark():
    finals = {"dp-rgda": [], "dp-spider-min": []}
    walls = []
    for seed in range(5):
        for method in finals:
            cfg = config_from_mapping({"method": method, "seed": seed, "instance_seed": 0, "curvature_every": 1})
            t0 = time.perf_counter()
            res = run_experiment(cfg)
            walls.append(time.perf_counter() - t0)
            finals[method].append(res.summary["final"])
    med = {m: {k: float(np.median([f[k] for f in fs])) for k in ("phi", "grad_norm", "lambda_min")}
           for m, fs in finals.items()}
    r, s = med["dp-rgda"], med["dp-spider-min"]
    ranked = sum(a["phi"] < b["phi"] for a, b in zip(finals["dp-rgda"], finals["dp-spider-min"]))
    ok = (r["phi"] <= 2.0 and r["grad_norm"] <= 1.0 and r["lambda_min"] >= -0.10
          and s["phi"] >= 3 * r["phi"] and max(walls) <= 300 and ranked >= 4)
    report("1 private benchmark", ok,
           f"median dp-rgda phi={r['phi']:.4f} grad={r['grad_norm']:.4f} lmin={r['lambda_min']:.4f}; "
           f"dp-spider-min phi={s['phi']:.2f}; rgda better in {ranked}/5; max run {max(walls):.1f}s")
    assert ok


# --- 2 -----------------------------------------------------------------

def _descent_monotone(rows, slack=1e-8):
    worst = -math.inf
    for a, b in zip(rows, rows[1:]):
        if a.phase == "descent":
            worst = max(worst, b.phi - a.phi)
    return worst <= slack, worst


def _nonprivate(**extra):
    cfg = config_from_mapping({"epsilon": math.inf, "S1": 400, "S2": 400, "instance_seed": 0,
                               "curvature_every": 0, **extra})
    return run_experiment(cfg)


def test_criterion_2_nonprivate_sanity():
    res = _nonprivate()
    f = res.summary["final"]
    mono, worst = _descent_monotone(res.trajectory.rows)
    ok = f["phi"] < 0.05 and f["grad_norm"] < 0.05 and mono
    report("2 non-private sanity", ok, f"phi={f['phi']:.3g} grad={f['grad_norm']:.3g} "
           f"descent rise max={worst:.3g} ({res.summary['reason']})")
    assert ok


def test_criterion_2b_nonprivate_far_start():
    """Companion: a target of Frobenius norm 20 so the run starts far from the solution."""
    res = _nonprivate(scale=20.0, lam=320.0, eta=0.05)
    f = res.summary["final"]
    rows = res.trajectory.rows
    mono, worst = _descent_monotone(rows)
    n_desc = sum(r.phase == "descent" for r in rows)
    ok = f["phi"] < 0.05 and f["grad_norm"] < 0.05 and mono and n_desc > 100 and rows[0].phi > 0.5
    report("2b non-private, far start", ok, f"phi {rows[0].phi:.3f} -> {f['phi']:.3g}, grad={f['grad_norm']:.3g}, "
           f"{n_desc} descent steps, rise max={worst:.3g}")
    assert ok


# --- 3 -----------------------------------------------------------------

def test_criterion_3_privacy_units():
    gen = np.random.default_rng(0)
    clip_err = 0.0
    for _ in range(1000):
        x = gen.standard_normal(gen.integers(1, 8)) * gen.uniform(0, 10)
        C = gen.uniform(0.01, 5)
        clip_err = max(clip_err, abs(np.linalg.norm(clip(x, C)) - min(np.linalg.norm(x), C)))
    # exhaustive single-sample swaps on a 5-sample dataset, S1 = 5
    C, S1 = 1.0, 5
    bound = 2 * C / S1
    worst = 0.0
    for _ in range(10):
        data = gen.standard_normal((S1, 3)) * 3
        pool = np.vstack([data, -data, 5 * gen.standard_normal((5, 3))])
        base = clipped_mean(data, C)
        for i, j in itertools.product(range(S1), range(len(pool))):
            other = data.copy()
            other[i] = pool[j]
            worst = max(worst, np.linalg.norm(clipped_mean(other, C) - base))
    adv = np.zeros((S1, 3))
    adv[0, 0] = C
    adv_other = adv.copy()
    adv_other[0, 0] = -C
    attained = np.linalg.norm(clipped_mean(adv_other, C) - clipped_mean(adv, C))
    alloc = account([QueryClass(INCREMENTAL, 0.04, 100)], PrivacyBudget(2.0, 1e-6))
    residual = abs(advanced_composition(alloc.eps_i, 100, 0.5e-6) - 2.0)
    draws = gaussian_mechanism(np.random.default_rng(1), np.zeros(100_000), 1.0, 2.0, 1e-6)
    target = math.sqrt(math.log(1.25e6)) / 2
    mc = abs(draws.std() / target - 1)
    ok = (clip_err <= 1e-12 and worst <= bound + 1e-12 and abs(attained - bound) <= 1e-12
          and residual < 1e-9 and mc < 0.02)
    report("3 privacy units", ok, f"clip err={clip_err:.1e}, swap max={worst:.4f} <= {bound}, "
           f"adversarial gap={abs(attained - bound):.1e}, residual={residual:.1e}, sigma MC err={mc:.2%}")
    assert ok


# --- 4 -----------------------------------------------------------------

def test_criterion_4_spider_exactness():
    inst = problems.random_quadratic_saddle(np.random.default_rng(3), 3, 2, n=10)
    p = AlgoParams(S1=10, S2=10, C_v=1e9, C_u=1e9, clip_mode="batch")
    gen = np.random.default_rng(4)
    rs = RandomSource(0)
    worst = 0.0
    for _ in range(20):
        w = (gen.standard_normal(3), gen.standard_normal(2))
        est = refresh(inst, rs, *w, p, NoiseScale.zero())
        for _ in range(3):
            w_new = (gen.standard_normal(3) * 5, gen.standard_normal(2) * 5)
            est = incremental_update(inst, rs, est, w, w_new, p, NoiseScale.zero())
            w = w_new
        gx, gy = inst.grad(*w)
        worst = max(worst, np.abs(est.v - gx).max(), np.abs(est.u - gy).max())
    prev = EstimatorPair(gen.standard_normal(3), gen.standard_normal(2))
    same = incremental_update(inst, rs, prev, w, w, p, NoiseScale.zero())
    noop = np.array_equal(same.v, prev.v) and np.array_equal(same.u, prev.u)
    ok = worst <= 1e-10 and noop
    report("4 SPIDER exactness", ok, f"3-step telescoping max err={worst:.1e}, no-op exact={noop}")
    assert ok


# --- 5 -----------------------------------------------------------------

def test_criterion_5_inner_contraction():
    mu, L = 1.0, 2.0
    lam = 1 / (6 * L)
    inst = problems.random_quadratic_saddle(np.random.default_rng(5), 3, 4, n=10, mu=mu, L=L)
    p = AlgoParams(S1=10, S2=10, C_v=1e9, C_u=1e9, K=50, lam=lam)
    x = np.array([1.0, -2.0, 0.5])
    y_star = inst.inner_maximizer(x)
    res = inner_loop(inst, RandomSource(0), IterateState(0, x, np.zeros(4)), p, NoiseScale.zero())
    d = [np.linalg.norm(y - y_star) for y, _ in res.inner_path] + [np.linalg.norm(res.y_last - y_star)]
    ratio = max(b / a for a, b in zip(d, d[1:]))
    gen = np.random.default_rng(6)
    holds = 0
    for _ in range(100):
        xr, yr = gen.standard_normal(3) * 3, gen.standard_normal(4) * 3
        G = gradient_mapping(inst, xr, yr, lam)
        holds += mu / 2 * np.linalg.norm(yr - inst.inner_maximizer(xr)) <= np.linalg.norm(G)
    ok = ratio <= 1 - lam * mu + 1e-3 and holds == 100
    report("5 inner contraction", ok, f"max ratio={ratio:.5f} <= {1 - lam * mu + 1e-3:.5f}, "
           f"tracking bound holds at {holds}/100 points")
    assert ok


# --- 6 -----------------------------------------------------------------

def _escape_params():
    s = escape_schedule(eta_H=0.2, alpha=0.01, rho_phi=1.0, L_phi=1.0, dim=2, delta2=1e-3, R=0.5)
    return AlgoParams(eta=0.01, eta_H=0.2, r=s["r"], t_thres=s["t_thres"], D_bar=s["D_bar"], alpha=0.01,
                      T=200, K=1, q=1, S1=1, S2=1, C_v=1e9, C_u=1e9, lam=0.5)


def test_criterion_6_escape():
    p = _escape_params()
    saddle = problems.value_quadratic(np.diag([1.0, -0.5]))
    exits = sum(run(saddle, RandomSource(s), np.array([5e-4, 0.0]), np.zeros(1), p).exits > 0
                for s in range(100))
    bowl = problems.value_quadratic(np.eye(2))
    out = run(bowl, RandomSource(0), np.zeros(2), np.zeros(1), p)
    cert = sosp_check(bowl, out.x_out, alpha=p.alpha)
    ok = (exits >= 90 and out.exits == 0 and out.certified and np.array_equal(out.x_out, np.zeros(2))
          and cert.passes)
    report("6 escape behaviour", ok, f"saddle early exits {exits}/100; minimum: exits={out.exits}, "
           f"terminated={out.certified}, sosp passes={cert.passes}")
    assert ok


# --- 7 -----------------------------------------------------------------

def test_criterion_7_diagnostics():
    inst = problems.generate_matrix_sensing(np.random.default_rng(7), 3, 3, 1, 6)
    x = np.random.default_rng(8).standard_normal(inst.dim_x) * 0.5
    h = 1e-5
    hvp_err = 0.0
    for e in np.eye(inst.dim_x):
        col = (inst.value_grad(x + h * e) - inst.value_grad(x - h * e)) / (2 * h)
        hvp_err = max(hvp_err, np.abs(hvp(inst, x, e) - col).max())
    eig_err = 0.0
    for seed in range(5):
        g = np.random.default_rng(seed)
        M = g.standard_normal((5, 5))
        H = 0.5 * (M + M.T)
        est = min_eigenvalue(problems.value_quadratic(H), np.zeros(5))
        eig_err = max(eig_err, abs(est.value - np.linalg.eigvalsh(H)[0]))
    big = problems.generate_matrix_sensing(np.random.default_rng(9), 5, 4, 2, 30)
    g = np.random.default_rng(10)
    rel = 0.0
    for _ in range(20):
        z = g.standard_normal(big.dim_x)
        grad = big.value_grad(z)
        fd = np.array([(big.value(z + 1e-6 * e) - big.value(z - 1e-6 * e)) / 2e-6 for e in np.eye(z.size)])
        rel = max(rel, np.linalg.norm(fd - grad) / np.linalg.norm(grad))
    ok = hvp_err <= 1e-4 and eig_err <= 1e-4 and rel <= 1e-5
    report("7 diagnostics oracles", ok, f"hvp col err={hvp_err:.1e}, min-eig err={eig_err:.1e}, "
           f"value-grad rel err={rel:.1e}")
    assert ok


# --- 8 -----------------------------------------------------------------

def test_criterion_8_drift_bound():
    inst = problems.random_quadratic_saddle(np.random.default_rng(9), 3, 2, n=10)
    L = 3.5
    sr, si = 0.05, 0.02
    noise = NoiseScale(sr, sr, si, si)
    p = AlgoParams(S1=10, S2=5, K=3, q=5, lam=0.1, C_v=1e9, C_u=1e9)
    d, logf = inst.dim_x, math.log(1 / 0.05)
    ok_trials = 0
    for trial in range(200):
        rs = RandomSource(trial)
        g = np.random.default_rng(10_000 + trial)
        x, y, x_prev, v, u = g.standard_normal(3), np.zeros(2), None, None, None
        for t in range(p.q):
            res = inner_loop(inst, rs, IterateState(t, x, y, x_prev, v, u), p, noise)
            if res.refreshed:
                moves, n_inc = 0.0, 0
            else:
                moves += float(np.sum((x - x_prev) ** 2))
            ys = [yk for yk, _ in res.inner_path][: res.selected_k + 1]
            moves += sum(float(np.sum((b - a) ** 2)) for a, b in zip(ys, ys[1:]))
            n_inc += res.selected_k + 1
            x_prev, x = x, x - 0.05 * res.v_out
            y, v, u = res.y_next, res.v_out, res.u_out
        dev = float(np.sum((res.v_out - inst.grad(x_prev, res.y_next)[0]) ** 2))
        ok_trials += dev <= logf * (d * sr**2 + n_inc * d * si**2 + L**2 * moves)
    ok = ok_trials >= 190
    report("8 estimator drift bound", ok, f"bound held in {ok_trials}/200 trials (need >= 190)")
    assert ok


if __name__ == "__main__":
    import sys

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion")]
    failed = 0
    for fn in tests:
        try:
            fn()
        except AssertionError:
            failed += 1
    print("\n".join(["", "summary:"] + list(RESULTS.values())))
    sys.exit(1 if failed else 0)
