"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

The lines are printed as they are produced and repeated in the terminal
summary (see ``conftest.py``), so they are visible without ``-s``.
"""
import ast
import inspect
import json
import os
import subprocess
import sys
import textwrap
import time

import numpy as np
import pytest

from tetbiot import geometry, solver
from tetbiot.geometry import (Ray, TET_FACES, max_edge2, ray_tet_intersect, ray_triangle_intersect,
                              segment_contribution, signed_volume, tet_cull)
from tetbiot.mesh import TetMesh, random_ball_points
from tetbiot.quadrature import build_fan, gauss_legendre
from tetbiot.reference import HillVortex, rms_error
from tetbiot.solver import EvalRequest, brute_force_velocity, evaluate
from tetbiot.studies import hill_mesh, run_ring_convergence, run_scaling

RESULTS = []


def report(num, ok, detail, t0):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - t0:.1f} s) {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def unit(v):
    return v / np.linalg.norm(v)


def random_tet(rng):
    while True:
        P = rng.uniform(-1.0, 1.0, (4, 3))
        if abs(signed_volume(*P)) > 0.03:
            return P


# ------------------------------------------------------------------ 1

def test_criterion_1_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    fan = build_fan(32, 32)
    errs = []
    for _ in range(20):
        P = random_tet(rng)
        B, c = rng.standard_normal((3, 3)), rng.standard_normal(3)
        mesh = TetMesh.build(P, np.array([[0, 1, 2, 3]]), P @ B.T + c, orient=True)
        diam = np.sqrt(mesh.h2[0])
        x = P.mean(0) + rng.uniform(3.0, 10.0) * diam * unit(rng.standard_normal(3))
        v = evaluate(EvalRequest(mesh, x, fan)).velocities[0]
        ref = brute_force_velocity(x, mesh, subdivisions=4)
        errs.append(np.linalg.norm(v - ref) / np.linalg.norm(ref))
    errs = np.array(errs)
    report(1, errs.max() < 5e-3 and time.perf_counter() - t0 < 60,
           f"max rel err {errs.max():.3g}, median {np.median(errs):.3g} (limit 0.005)", t0)


# ------------------------------------------------------------------ 2

def test_criterion_2_segment_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    g = gauss_legendre(10)
    worst = worst_raw = 0.0
    n = 0
    while n < 1000:
        P = random_tet(rng)
        W = rng.standard_normal((4, 3))
        o = rng.uniform(-3, 3, 3)
        d = unit(P.mean(0) + rng.uniform(-0.3, 0.3, 3) - o)
        seg = ray_tet_intersect(Ray(o, d), P, W)
        if seg is None or seg.r1 - seg.r0 < 1e-3:
            continue
        n += 1
        # linear interpolant from barycentric coordinates of each Gauss point
        R = 0.5 * (seg.r1 - seg.r0) * g.nodes + 0.5 * (seg.r0 + seg.r1)
        X = o + R[:, None] * d
        T = (P[1:] - P[0]).T
        lam = np.linalg.solve(T, (X - P[0]).T).T
        bary = np.column_stack([1 - lam.sum(1), lam])
        w = bary @ W
        ref = np.cross(d, 0.5 * (seg.r1 - seg.r0) * (g.weights @ w))
        got = segment_contribution(seg, d)
        # relative to the magnitude of the integrated vorticity; s x (w0 + w1)
        # itself can cancel, which only measures round-off in the cross product
        scale = 0.5 * (seg.r1 - seg.r0) * np.linalg.norm(seg.w0 + seg.w1)
        worst = max(worst, np.linalg.norm(got - ref) / scale)
        worst_raw = max(worst_raw, np.linalg.norm(got - ref) / np.linalg.norm(ref))
    report(2, worst < 1e-13, f"1000 segments, max rel diff {worst:.2e} (limit 1e-13); "
                             f"relative to |result| {worst_raw:.2e}", t0)


# ------------------------------------------------------------------ 3

def test_criterion_3_gauss_legendre():
    t0 = time.perf_counter()
    wsum = mono = 0.0
    for N in range(1, 65):
        r = gauss_legendre(N)
        wsum = max(wsum, abs(r.weights.sum() - 2.0))
        for k in range(2 * N):
            exact = 2.0 / (k + 1) if k % 2 == 0 else 0.0
            mono = max(mono, abs(r.weights @ r.nodes ** k - exact))
    report(3, wsum < 1e-13 and mono < 1e-12,
           f"orders 1-64: max |sum w - 2| {wsum:.1e}, max monomial err {mono:.1e}", t0)


# ------------------------------------------------------------------ 4

def test_criterion_4_parity_and_cull():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    zeros = np.zeros((4, 3))
    bad_parity = unsound = culled = hits = degenerate = 0
    for i in range(100_000):
        P = random_tet(rng) * rng.uniform(0.2, 2.0) + rng.uniform(-6, 6, 3)
        o = rng.uniform(-6, 6, 3)
        d = unit(P[rng.integers(4)] + rng.uniform(-1, 1, 3) - o) if i % 2 else unit(rng.standard_normal(3))
        found = [ray_triangle_intersect(Ray(o, d), *P[f]) for f in TET_FACES]
        found = [h for h in found if h is not None]
        if any(min(h.u, h.v, 1 - h.u - h.v) < 1e-9 for h in found):
            degenerate += 1
            continue
        if len(found) not in (0, 2):
            bad_parity += 1
        h2 = max_edge2(P)
        seg = ray_tet_intersect(Ray(o, d), P, zeros, h2=h2)
        hits += seg is not None
        if tet_cull(o, d, P[0], h2, 1e-12):
            culled += 1
            unsound += seg is not None
    report(4, bad_parity == 0 and unsound == 0,
           f"1e5 draws: parity violations {bad_parity}, culled true hits {unsound} "
           f"(hits {hits}, culled {culled}, grazing discarded {degenerate})", t0)


# ------------------------------------------------------------------ 5

@pytest.fixture(scope="module")
def hill_setup():
    mesh = hill_mesh()
    pts = random_ball_points(4000, 1.0, seed=0)
    return mesh, pts, HillVortex().velocity(pts)


def test_criterion_5_hill_accuracy(hill_setup):
    t0 = time.perf_counter()
    mesh, pts, ref = hill_setup
    e4 = rms_error(evaluate(EvalRequest(mesh, pts, build_fan(4, 4))), ref)
    e16 = rms_error(evaluate(EvalRequest(mesh, pts, build_fan(16, 16))), ref)
    ok_a = e4.rms <= 0.08 and 0.021 / 3 <= e4.rms <= 0.021 * 3
    ok_b = e16.rms < e4.rms
    report(5, ok_a and ok_b and time.perf_counter() - t0 < 600,
           f"{mesh.n_nodes} nodes, 4000 points: eps(4x4) {e4.rms:.4f} [need <= 0.08 and within 3x of 0.021: "
           f"{'ok' if ok_a else 'no'}], eps(16x16) {e16.rms:.4f} [improves: {'ok' if ok_b else 'no'}]", t0)


# ------------------------------------------------------------------ 6

def test_criterion_6_convergence_order():
    t0 = time.perf_counter()
    st = run_ring_convergence(("low", "medium", "high"), (64,))
    rows = ", ".join(f"h={h:g}: {e:.4g}" for _, h, _, e in st.rows)
    report(6, 1.7 <= st.slope <= 2.6 and time.perf_counter() - t0 < 1800,
           f"64x64 fan, {rows}; slope {st.slope:.3f} (band [1.7, 2.6])", t0)


# ------------------------------------------------------------------ 7

def test_criterion_7_quadrature_plateau():
    t0 = time.perf_counter()
    st = run_ring_convergence(("low",), (4, 8, 16, 32, 64))
    e = {nq: eps for _, _, nq, eps in st.rows}
    mono = e[8] <= 1.05 * e[4] and e[16] <= 1.05 * e[8]
    plateau = abs(e[64] - e[32]) < 0.1 * e[32]
    report(7, mono and plateau and time.perf_counter() - t0 < 600,
           "low preset eps " + ", ".join(f"{k}: {v:.4g}" for k, v in e.items())
           + f"; decreasing 4-16 {mono}, 32->64 change {abs(e[64] - e[32]) / e[32]:.1%}", t0)


# ------------------------------------------------------------------ 8

def test_criterion_8_parallel_scaling():
    t0 = time.perf_counter()
    cores = os.cpu_count() or 1
    counts = [w for w in (1, 2, 4, 8, 16) if w <= max(4, cores)]
    st = run_scaling(counts, n_points=1000, n_quad=8, repeats=2)
    rows = ", ".join(f"{w}: {t:.2f} s" for w, t in st.rows)
    report(8, st.exponent <= -0.75 and st.identical,
           f"cpu_count {cores}; T by workers {rows}; exponent {st.exponent:.3f} (need <= -0.75); "
           f"bit-identical {st.identical}", t0)


def test_criterion_8_determinism():
    t0 = time.perf_counter()
    mesh = hill_mesh(cells=8)
    pts = random_ball_points(300, 1.0, seed=5)
    fan = build_fan(6, 6)
    base = evaluate(EvalRequest(mesh, pts, fan, workers=1)).velocities
    same = all(np.array_equal(base, evaluate(EvalRequest(mesh, pts, fan, workers=w)).velocities)
               for w in (2, 3, 4, 8))
    report("8 (determinism)", same, "workers 1,2,3,4,8 bit-identical", t0)


# ------------------------------------------------------------------ 9

KERNELS = [geometry._ray_tri, geometry._ray_tet, geometry._fold, geometry._cull, solver._accumulate]
FORBIDDEN = {"sqrt", "cbrt", "log", "log2", "log10", "log1p", "exp", "expm1", "sin", "cos", "tan",
             "asin", "acos", "atan", "atan2", "arcsin", "arccos", "arctan", "arctan2", "sinh", "cosh",
             "tanh", "hypot", "pow", "power", "norm"}

_PROBE = textwrap.dedent("""
    import json, math, sys
    import numpy as np
    counts = {}
    def wrap(mod, name):
        f = getattr(mod, name)
        def g(*a, **k):
            counts[name] = counts.get(name, 0) + 1
            return f(*a, **k)
        setattr(mod, name, g)
    for name in %(names)r:
        for mod in (math, np):
            if hasattr(mod, name):
                wrap(mod, name)
    profiled = {}
    def prof(frame, event, arg):
        if event == "c_call" and getattr(arg, "__name__", "") in %(names)r:
            profiled[arg.__name__] = profiled.get(arg.__name__, 0) + 1
    from tetbiot.mesh import lattice_mesh
    from tetbiot.quadrature import build_fan
    from tetbiot.solver import EvalRequest, evaluate
    m = lattice_mesh(-1.0, 1.0, 1)
    m = m.with_vorticity(m.nodes[:, ::-1] * [1.0, -1.0, 0.5])
    counts.clear()
    fan = build_fan(3, 3)
    control = sum(counts.values())
    pts = np.array([[0.1, 0.2, 0.3], [3.0, 0.0, 0.5], [-1.0, -1.0, -1.0]])
    req = EvalRequest(m, pts, fan, self_nodes=[-1, -1, 0])
    counts.clear()
    sys.setprofile(prof)
    v = evaluate(req).velocities
    sys.setprofile(None)
    print(json.dumps({"control": control, "counts": counts, "profiled": profiled,
                      "nonzero": bool(np.abs(v).sum() > 0)}))
""")


def _static_violations():
    bad = []
    for k in KERNELS:
        fn = getattr(k, "py_func", k)
        tree = ast.parse(textwrap.dedent(inspect.getsource(fn)))
        for node in ast.walk(tree):
            if isinstance(node, ast.Call):
                name = getattr(node.func, "attr", getattr(node.func, "id", ""))
                if name in FORBIDDEN:
                    bad.append(f"{fn.__name__}: {name}()")
            elif isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
                e = node.right
                if not (isinstance(e, ast.Constant) and isinstance(e.value, int)):
                    bad.append(f"{fn.__name__}: ** {ast.unparse(e)}")
    return bad


def test_criterion_9_arithmetic_budget():
    t0 = time.perf_counter()
    static = _static_violations()
    env = dict(os.environ, NUMBA_DISABLE_JIT="1")
    out = subprocess.run([sys.executable, "-c", _PROBE % {"names": sorted(FORBIDDEN)}],
                         capture_output=True, text=True, env=env, check=True)
    probe = json.loads(out.stdout.strip().splitlines()[-1])
    dynamic = sum(probe["counts"].values()) + sum(probe["profiled"].values())
    ok = not static and dynamic == 0 and probe["control"] > 0 and probe["nonzero"]
    report(9, ok, f"static violations {static or 'none'}; transcendental calls during evaluate "
                  f"{dynamic} (fan construction made {probe['control']}, showing the counter works)", t0)
