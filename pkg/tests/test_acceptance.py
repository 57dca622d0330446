"""Exit criteria, each at its stated tolerance and runtime limit.

Run with pytest (a per-criterion PASS/FAIL table is printed at the end of the
session) or directly: ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import functools
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from omdlab import checks
from omdlab.costs import (CostSequence, certify_relative_smoothness, doptimal_sequence,
                          poisson_sequence, synthetic_sequence)
from omdlab.experiments import ExperimentConfig, run_experiment
from omdlab.geometry import PositiveBox, TruncatedSimplex
from omdlab.omd import OmdConfig, mirror_step, run_omd, step_objective
from omdlab.regularizers import make

pytestmark = pytest.mark.acceptance

SEEDS = range(1, 11)
REGS = ("burg", "kl", "l2sq", "l1sq")
RESULTS: dict[int, tuple[bool, str]] = {}


@functools.lru_cache(maxsize=None)
def experiment(kind: str, seed: int):
    T = 50 if kind == "synthetic" else 100
    return run_experiment(ExperimentConfig(kind, T=T, seed=seed), write=False)


def _family(kind, seed=7, T=100):
    if kind == "doptimal":
        return doptimal_sequence(T, 5, 10, seed=seed), TruncatedSimplex(10, 1e-6)
    if kind == "poisson":
        return poisson_sequence(T, 150, 10, seed=seed), PositiveBox.uniform(10, 1e-3, 10.0)
    fset = TruncatedSimplex(10, 1e-6)
    return synthetic_sequence(T, fset, seed=seed), fset


def _certified_run(c, fset, name, seed=7):
    r = make(name, c.dim)
    cert = certify_relative_smoothness(c, r.effective(fset), fset, seed=seed)
    return run_omd(c, OmdConfig(1.0 / cert.beta, r, fset))


# -- criteria -----------------------------------------------------------------------


def criterion_1():
    start = time.perf_counter()
    fset = TruncatedSimplex(10, 1e-6)
    rng = np.random.default_rng(1)
    X, Y, Z = (fset.sample(1000, rng) for _ in range(3))
    res = [checks.three_point_identity(make(n, 10), X, Y, Z, tol=1e-9) for n in REGS]
    elapsed = time.perf_counter() - start
    worst = max(r.worst for r in res)
    ok = all(r.passed for r in res) and elapsed < 1.0
    return ok, f"4x1000 triples, max rel err {worst:.2e} (tol 1e-9), {elapsed:.3f}s (< 1s)"


def criterion_2():
    start = time.perf_counter()
    worst, failed, n = -np.inf, 0, 0
    for kind in ("doptimal", "poisson", "synthetic"):
        c, fset = _family(kind)
        for name in REGS:
            res = checks.optimality_residual(_certified_run(c, fset, name), fset, n_u=100, tol=1e-8)
            worst, failed, n = max(worst, res.worst), failed + res.failed, n + res.checked
    elapsed = time.perf_counter() - start
    ok = failed == 0 and elapsed < 30.0
    return ok, f"{n - failed}/{n} (step, u) pairs, worst excess {worst:.2e} (tol 1e-8), {elapsed:.1f}s (< 30s)"


def criterion_3():
    start = time.perf_counter()
    parts, ok = [], True
    for kind in ("doptimal", "poisson"):
        c, fset = _family(kind)
        res = checks.descent_inequality(_certified_run(c, fset, "burg"), c, fset, n_u=100, tol=1e-8)
        ok &= res.passed
        parts.append(f"{kind}/burg {res.checked - res.failed}/{res.checked} worst {res.worst:.2e}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 30.0
    return ok, "; ".join(parts) + f", {elapsed:.1f}s (< 30s)"


def criterion_4():
    start = time.perf_counter()
    runs, bad, worst_margin = 0, [], np.inf
    for kind in ("doptimal", "poisson", "synthetic"):
        for seed in SEEDS:
            for name, rep in experiment(kind, seed).reports.items():
                runs += 1
                worst_margin = min(worst_margin, rep.thm1_bound - rep.dynamic_regret)
                if rep.thm1_verdict is not True:
                    bad.append(f"{kind}/{name}/seed{seed}")
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 300.0
    detail = f"{runs - len(bad)}/{runs} runs dominated, min margin {worst_margin:.3g}, {elapsed:.1f}s (< 300s)"
    if bad:
        detail += f"; failing: {', '.join(bad[:5])}"
    return ok, detail


def criterion_5():
    runs, bad, lam_ok = 0, [], True
    for seed in SEEDS:
        for name, rep in experiment("synthetic", seed).reports.items():
            runs += 1
            lam_ok &= rep.lambda_ > 0
            if rep.thm2_verdict is not True or rep.corollary_verdict is not True:
                bad.append(f"{name}/seed{seed}")
    ok = lam_ok and not bad
    return ok, f"{runs - len(bad)}/{runs} synthetic runs with lambda > 0: thm2 and corollary dominate"


def _grid(fset, center, half, step):
    d = fset.dim
    if isinstance(fset, TruncatedSimplex):
        axes = [np.arange(max(fset.epsilon, center[i] - half), min(1.0, center[i] + half) + step / 2, step)
                for i in range(d - 1)]
        G = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d - 1)
        G = np.hstack([G, 1.0 - G.sum(axis=1, keepdims=True)])
        return G[G[:, -1] >= fset.epsilon - 1e-15]
    axes = [np.arange(max(fset.lower[i], center[i] - half), min(fset.upper[i], center[i] + half) + step / 2, step)
            for i in range(d)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)


def _grid_argmin(g, x, eta, r, fset):
    """Coarse grid, then two local refinements ending at resolution 1e-4."""
    geo = r.effective(fset)

    def obj(Z):
        return Z @ g + geo.bregman(Z, x) / eta

    Z = _grid(fset, fset.center(), 10.0, 0.02 if isinstance(fset, PositiveBox) else 0.01)
    best = Z[np.argmin(obj(Z))]
    for half, step in ((0.03, 1e-3), (2e-3, 1e-4)):
        Z = np.vstack([_grid(fset, best, half, step), best])
        best = Z[np.argmin(obj(Z))]
    return best


def criterion_6():
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    worst_gap, worst_dist, n, fails = -np.inf, 0.0, 0, []
    for d in (2, 3):
        for fset in (TruncatedSimplex(d, 1e-6), PositiveBox.uniform(d, 0.1, 1.0)):
            for name in REGS:
                r = make(name, d)
                unique = r.effective(fset).name != "l1sq"
                for _ in range(50):
                    x = fset.sample(1, rng)[0]
                    g = rng.standard_normal(d)
                    eta = float(np.exp(rng.uniform(np.log(0.05), np.log(2.0))))
                    z = mirror_step(g, x, eta, r, fset)
                    zg = _grid_argmin(g, x, eta, r, fset)
                    gap = float(step_objective(z, g, x, eta, r, fset) - step_objective(zg, g, x, eta, r, fset))
                    dist = float(np.max(np.abs(z - zg))) if unique else 0.0
                    n += 1
                    worst_gap, worst_dist = max(worst_gap, gap), max(worst_dist, dist)
                    if gap > 1e-9 or dist > 1e-3:
                        fails.append(f"d={d} {type(fset).__name__}/{name}")
    elapsed = time.perf_counter() - start
    ok = not fails and elapsed < 60.0
    detail = (f"{n - len(fails)}/{n} instances; solver objective minus grid objective <= {worst_gap:.1e}, "
              f"max |z - z_grid| {worst_dist:.1e} (tol 1e-3), {elapsed:.1f}s (< 60s)")
    if fails:
        detail += f"; failing: {', '.join(sorted(set(fails)))}"
    return ok, detail


def _fd_grad(f, x, h):
    E = np.eye(x.shape[0]) * h
    return np.array([(f(x + e) - f(x - e)) / (2 * h) for e in E])


def criterion_7():
    rng = np.random.default_rng(7)
    d = 6
    fset = TruncatedSimplex(d, 0.05)
    X = fset.sample(200, rng)
    V = rng.standard_normal((200, d))
    costs = {
        "doptimal": CostSequence.doptimal(rng.random((3, d))),
        "poisson": CostSequence.poisson(rng.random((20, d)), 1.0 - rng.random(20)),
        "synthetic": CostSequence.synthetic(rng.uniform(0.5, 2, d), fset.sample(1, rng)),
    }
    g_err, h_err = 0.0, 0.0
    h = 1e-6
    for c in costs.values():
        for x, v in zip(X, V):
            an = c.gradient(1, x)
            fd = _fd_grad(lambda y: float(c.value(1, y)), x, h)
            g_err = max(g_err, np.max(np.abs(fd - an)) / max(np.max(np.abs(an)), 1e-8))
            hq = float(c.hessian_quadratic(1, x, v))
            fdh = float((c.gradient(1, x + h * v) - c.gradient(1, x - h * v)) @ v / (2 * h))
            h_err = max(h_err, abs(fdh - hq) / max(abs(hq), 1e-8))
    for name in REGS:
        r = make(name, d)
        for x, v in zip(X, V):
            an = r.gradient(x)
            fd = _fd_grad(lambda y: float(r.value(y)), x, h)
            g_err = max(g_err, np.max(np.abs(fd - an)) / max(np.max(np.abs(an)), 1e-8))
            hq = float(r.hessian_quadratic(x, v))
            fdh = float((r.gradient(x + h * v) - r.gradient(x - h * v)) @ v / (2 * h))
            h_err = max(h_err, abs(fdh - hq) / max(abs(hq), 1e-8))
    ok = g_err <= 1e-5 and h_err <= 1e-4
    return ok, f"200 points x 7 functions: gradient rel err {g_err:.1e} (tol 1e-5), Hessian form rel err {h_err:.1e} (tol 1e-4)"


def criterion_8():
    d = 10
    burg = make("burg", d)
    simplex = TruncatedSimplex(d, 1e-6)
    ident = CostSequence.doptimal(np.eye(d))
    cert = certify_relative_smoothness(ident, burg, simplex, samples=2000, seed=8)
    lo, hi = cert.min_quotient_observed, cert.max_quotient_observed
    ok1 = 1 - 1e-9 <= lo and hi <= 1 + 1e-9
    c = poisson_sequence(100, 150, d, seed=8)
    box = PositiveBox.uniform(d, 1e-3, 10.0)
    envelope = float(c.data["b"].sum(axis=1).max())
    pc = certify_relative_smoothness(c, burg, box, samples=2000, seed=8)
    ok2 = pc.max_quotient_observed <= envelope
    return ok1 and ok2, (f"identity D-optimal vs burg quotient in [{lo:.12f}, {hi:.12f}]; "
                         f"poisson vs burg max quotient {pc.max_quotient_observed:.4g} <= envelope {envelope:.4g}")


def criterion_9():
    parts, ok = [], True
    for kind in ("doptimal", "poisson"):
        wins = 0
        for seed in SEEDS:
            curves = experiment(kind, seed).curves
            others = [v[-1] for k, v in curves.items() if k != "burg"]
            wins += curves["burg"][-1] < min(others)
        ok &= wins >= 9
        parts.append(f"{kind}: burg strictly lowest on {wins}/10 seeds")
    return ok, "; ".join(parts) + " (need >= 9/10 each)"


def _run_bytes(cfg, threads):
    old = os.environ.get("OMD_LAB_THREADS")
    os.environ["OMD_LAB_THREADS"] = str(threads)
    try:
        run_experiment(cfg)
    finally:
        if old is None:
            del os.environ["OMD_LAB_THREADS"]
        else:
            os.environ["OMD_LAB_THREADS"] = old
    return {p.name: p.read_bytes() for p in sorted(Path(cfg.output_dir).glob("*.csv"))}


def criterion_10():
    ok, parts = True, []
    with tempfile.TemporaryDirectory() as tmp:
        for kind in ("doptimal", "poisson", "synthetic"):
            outs = []
            for i, threads in enumerate((1, 4, 4)):
                cfg = ExperimentConfig(kind, seed=3, sup_samples=256, output_dir=f"{tmp}/{kind}{i}")
                outs.append(_run_bytes(cfg, threads))
            same = outs[0] == outs[1] == outs[2] and len(outs[0]) > 0
            ok &= same
            parts.append(f"{kind} {len(outs[0])} CSVs {'identical' if same else 'DIFFER'}")
    return ok, "serial, parallel, parallel: " + "; ".join(parts)


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}
TITLES = {
    1: "three-point identity",
    2: "optimality residual of every step",
    3: "per-step descent inequality at eta = 1/beta",
    4: "theorem 1 bound domination",
    5: "theorem 2 and corollary domination",
    6: "mirror step vs grid brute force",
    7: "gradient and Hessian finite differences",
    8: "relative-smoothness certification",
    9: "burg lowest accumulated cost",
    10: "determinism with arm parallelism",
}


def evaluate(i: int) -> tuple[bool, str]:
    try:
        res = CRITERIA[i]()
    except Exception as exc:  # a crash is a failure of the criterion, not of the harness
        res = (False, f"raised {type(exc).__name__}: {exc}")
    RESULTS[i] = (bool(res[0]), res[1])
    return RESULTS[i]


def line(i: int) -> str:
    ok, detail = RESULTS[i]
    return f"criterion {i:>2} {'PASS' if ok else 'FAIL'}  {TITLES[i]}: {detail}"


@pytest.mark.parametrize("i", list(CRITERIA), ids=[f"criterion_{i}" for i in CRITERIA])
def test_criterion(i):
    ok, detail = evaluate(i)
    print(line(i))
    assert ok, detail


if __name__ == "__main__":
    for i in CRITERIA:
        evaluate(i)
        print(line(i), flush=True)
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
