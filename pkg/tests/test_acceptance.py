"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records a pass/fail line before asserting; the lines are
printed in the pytest terminal summary (see conftest.py) and when this
file is run as a script.
"""
import sys
import time

import numpy as np
import pytest

import oracles
from manufactured import Manufactured, observed_orders, pressure_grad_error, velocity_grad_error
from pdflow import fem
from pdflow.boundary import BoundaryData, distance_field, split_trace
from pdflow.extension import (
    PreconditionError,
    build_extension_pair,
    build_tangential_extension,
    cutoff_field,
    divergence_correct,
    stokes_lift,
)
from pdflow.fem import interpolate
from pdflow.mesh import build_mesh
from pdflow.norms import norm_grad, norm_Lp
from pdflow.report import emit_report
from pdflow.scenarios import PRESETS, make_data, run_scenario
from pdflow.smallness import (
    Calibration,
    DataNorms,
    check_smallness,
    derive_exponents,
    eval_L,
    minimize_L,
)
from pdflow.solver import SolveConfig, residual_weak_form, solve_regularized, verify_apriori
from pdflow.datanorms import measure_data_norms
from pdflow.stress import (
    StressModel,
    calibrate,
    check_structure_inequalities,
    random_sym_pairs,
    reverse_jensen_check,
)

RESULTS = {}


def record(cid, ok, detail):
    RESULTS[cid] = (bool(ok), detail)
    line = f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    return ok


def slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def within(value, target, rel):
    return abs(value - target) <= rel * abs(target)


# 1 ---------------------------------------------------------------------------

def test_criterion_01_structure_suite():
    t0 = time.perf_counter()
    worst = []
    ok = True
    for i, p in enumerate((1.4, 1.5, 1.75, 1.9)):
        for j, delta in enumerate((0.0, 0.1, 1.0)):
            m = calibrate(p, delta, n_pairs=10**6, seed=1000 + 10 * i + j)
            rep = check_structure_inequalities(m, random_sym_pairs(10**5, rng=10 * i + j))
            ok &= rep.passed and rep.n_pairs == 10**5
            worst.append(min(rep.min_ratio_lower / m.C1, m.C2 / rep.max_ratio_upper))
    dt = time.perf_counter() - t0
    ok &= dt < 30
    record("1", ok, f"12 (p, delta) cases, 1e5 fresh pairs each, min slack ratio {min(worst):.4f}, {dt:.1f} s")
    assert ok


# 2 ---------------------------------------------------------------------------

def test_criterion_02_exponent_table():
    cases = [
        (2, 1.75, 5, dict(p_star=14.0, p_prime=7 / 3, s=1.75, r=14 / 3)),
        (2, 1.4, 15, dict(p_star=14 / 3, s=1.75, r=14.0)),
        (3, 1.8, 5, dict(p_star=4.5, s=1.8, r=4.5)),
    ]
    worst = 0.0
    for d, p, q, want in cases:
        ex = derive_exponents(d, p, q)
        for k, v in want.items():
            worst = max(worst, abs(getattr(ex, k) - v) / abs(v))
    rng = np.random.default_rng(2)
    iff_ok = True
    for _ in range(50):
        d = int(rng.choice([2, 3]))
        lo = 2 * d / (d + 1)
        p = float(rng.uniform(lo + 1e-3, 2 - 1e-3))
        r = float(oracles.exponents(d, p, 1)["r"])
        q = r * float(rng.uniform(1.01, 5))
        ex = derive_exponents(d, p, q)
        for k, v in oracles.exponents(d, p, q).items():
            worst = max(worst, abs(getattr(ex, k) - float(v)) / float(v))
        hs = ex.holder_sum()
        equal = abs(hs - 1) < 1e-12
        iff_ok &= hs <= 1 + 1e-12 and equal == ex.r_is_sobolev_branch
    ok = worst <= 1e-12 and iff_ok
    record("2", ok, f"3 listed + 50 random draws, max rel error {worst:.2e}, Hoelder equality iff Sobolev branch: {iff_ok}")
    assert ok


# 3 ---------------------------------------------------------------------------

TANGENTIAL_EX = derive_exponents(2, 1.9, 30)
TANGENTIAL_NORMS = DataNorms(K_d=0.0, K_f=0.5, K_n=0.0, K_t=1.0, delta=0.01)


def test_criterion_03_L_shape():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    interior = 0
    for _ in range(100):
        p = float(rng.uniform(4 / 3 + 1e-3, 2 - 1e-3))
        r = derive_exponents(2, p, 1e12).r
        ex = derive_exponents(2, p, r * float(rng.uniform(1.1, 5)))
        n = DataNorms(*rng.uniform(0.01, 10, 4), delta=float(rng.uniform(0, 1)))
        mn = minimize_L(n, ex)
        if (
            mn.flag == "interior"
            and eval_L(mn.eta_star / 2, n, ex) > mn.L_min
            and eval_L(2 * mn.eta_star, n, ex) > mn.L_min
        ):
            interior += 1
    ex = derive_exponents(2, 1.75, 10)
    flat = eval_L(np.logspace(-6, 6, 200), DataNorms(0.3, 0.2, 0.4, 0.0, 0.1), ex)
    spread = float(np.ptp(flat) / flat.max())
    etas = np.logspace(-6, -2, 200)
    L = eval_L(etas, TANGENTIAL_NORMS, TANGENTIAL_EX)
    monotone = bool(np.all(np.diff(L) > 0))
    dt = time.perf_counter() - t0
    ok = interior == 100 and spread <= 1e-14 and monotone and dt < 10
    record(
        "3",
        ok,
        f"interior minima {interior}/100, K_t=0 spread {spread:.1e}, "
        f"decreasing toward small eta on [1e-6, 1e-2]: {monotone}, {dt:.1f} s",
    )
    assert ok


def test_criterion_03b_L_decay_ratio():
    ratio = float(eval_L(1e-6, TANGENTIAL_NORMS, TANGENTIAL_EX) / eval_L(1.0, TANGENTIAL_NORMS, TANGENTIAL_EX))
    ok = ratio < 1e-3
    record("3b", ok, f"L(1e-6)/L(1) = {ratio:.4f} (target < 1e-3)")
    assert ok


# 4 ---------------------------------------------------------------------------

def test_criterion_04_cutoff_scaling():
    ok = True
    parts = []
    for eta in (0.2, 0.1, 0.05):
        n = int(np.ceil(4 * np.sqrt(2) / eta))
        mesh = build_mesh("unit-square", n)
        assert mesh.h_max <= eta / 4
        psi = cutoff_field(mesh, eta)
        area, gmax = psi.support_area(), psi.grad_max()
        per = mesh.perimeter
        good = per * eta <= area <= 3 * per * eta and gmax <= 1.25 / eta
        ok &= good
        parts.append(f"eta={eta}: area/(|dO| eta)={area / (per * eta):.3f}, eta*max|grad|={eta * gmax:.3f}")
    record("4", ok, "; ".join(parts))
    assert ok


# 5 ---------------------------------------------------------------------------

def test_criterion_05_extension_scaling():
    t0 = time.perf_counter()
    ex = derive_exponents(2, 1.75, 10)
    n = int(np.ceil(4 * np.sqrt(2) / 0.05))
    mesh = build_mesh("unit-square", n)
    data = make_data("tangential", mesh, "unit-square")
    g_t = split_trace(data)[1][: mesh.n_nodes]
    dist = distance_field(mesh)
    etas = np.array([0.4, 0.2, 0.1, 0.05])
    lr, gp = [], []
    for eta in etas:
        t = build_tangential_extension(mesh, g_t, eta, ex, dist=dist)
        lr.append(norm_Lp(t.h_eta, ex.r))
        gp.append(norm_grad(t.h_eta, ex.p))
    s_r, s_p = slope(etas, lr), slope(etas, gp)
    dt = time.perf_counter() - t0
    ok_r, ok_p = within(s_r, ex.a, 0.2), within(s_p, ex.b, 0.2)
    ok = ok_r and ok_p and dt < 300
    record(
        "5",
        ok,
        f"L^r slope {s_r:.4f} vs {ex.a:.4f}, grad L^p slope {s_p:.4f} vs {ex.b:.4f} "
        f"(+-20%), h_max={mesh.h_max:.4f}, {dt:.0f} s",
    )
    assert ok


# 6 ---------------------------------------------------------------------------

def test_criterion_06_divergence_correction():
    mesh = build_mesh("unit-square", 32)
    data = make_data("tangential", mesh, "unit-square")
    g_t = split_trace(data)[1][: mesh.n_nodes]
    worst_div, worst_trace = 0.0, 0.0
    bd = fem.vector_boundary_dofs(mesh)
    for eta in (0.4, 0.2, 0.1, 0.05):
        t = build_tangential_extension(mesh, g_t, eta)
        f, Ef = t.h_tilde, t.correction
        # div(Ef) - div f tested against P1, modulo the constant flux mode
        r = fem.divergence_matrix(mesh) @ (Ef - f).dofs + t.div_constant * fem.p1_integrals(mesh)
        worst_div = max(worst_div, fem.pressure_dual_norm(mesh)(r))
        worst_trace = max(worst_trace, float(np.abs(Ef.dofs[bd]).max()))
    # a discretely solenoidal zero-trace field: Stokes velocity with g1 = 0
    zero_g1 = interpolate(mesh, lambda x, y: 0 * x, "scalar-P1")
    sol, _ = stokes_lift(mesh, np.zeros((mesh.p2.ndof, 2)), zero_g1, force=lambda x, y: (np.sin(3 * y), x * y))
    Esol = divergence_correct(sol)
    zero_ok = float(np.abs(Esol.dofs).max()) <= 1e-12 * float(np.abs(sol.dofs).max())
    zero_ok &= not np.any(divergence_correct(fem.zero_field(mesh, "vector-P2")).dofs)
    ok = worst_div <= 1e-8 and worst_trace == 0.0 and zero_ok
    record("6", ok, f"max ||div(Ef) - div f|| = {worst_div:.2e}, max |Ef| on boundary = {worst_trace}, E(solenoidal) = 0: {zero_ok}")
    assert ok


# 7 ---------------------------------------------------------------------------

def test_criterion_07_stokes_lift():
    ms = Manufactured("stokes")
    hs, eu, ep = [], [], []
    for n in (4, 8, 16, 32):
        m = build_mesh("unit-square", n)
        data = BoundaryData.from_functions(m, ms.velocity)
        k, pi = stokes_lift(m, data.trace_p2(), data.g1, force=ms.force)
        hs.append(m.h_max)
        eu.append(velocity_grad_error(k, ms))
        ep.append(pressure_grad_error(pi, ms))
    ou, op = observed_orders(hs, eu), observed_orders(hs, ep)
    m = build_mesh("unit-square", 8)
    one = interpolate(m, lambda x, y: 1 + 0 * x, "scalar-P1")
    try:
        stokes_lift(m, np.zeros((m.p2.ndof, 2)), one)
        rejected, resid = False, None
    except PreconditionError as err:
        rejected, resid = True, err.residual
    ok = np.all(np.abs(ou - 2) <= 0.3) and np.all(np.abs(op - 1) <= 0.3) and rejected and resid == pytest.approx(1.0)
    record(
        "7",
        ok,
        f"velocity orders {np.round(ou, 3).tolist()}, pressure orders {np.round(op, 3).tolist()}, "
        f"imbalanced data rejected with residual {resid}",
    )
    assert ok


# 8 ---------------------------------------------------------------------------

def test_criterion_08_solver():
    t0 = time.perf_counter()
    ex = derive_exponents(2, 1.75, 10)
    # (a) zero data
    m8 = build_mesh("unit-square", 8)
    z = build_extension_pair(m8, make_data("zero", m8, "unit-square"), 0.25, ex)
    rz = solve_regularized(m8, z, None, StressModel(1.75, 0.0), SolveConfig())
    ok_a = rz.converged and rz.iterations == 1 and not np.any(rz.u.dofs) and not np.any(rz.pressure.dofs)
    # (b) p = 2 manufactured Navier-Stokes
    ms = Manufactured("navier-stokes", amp=0.5)
    hs, eu = [], []
    for n in (4, 8, 16, 32):
        m = build_mesh("unit-square", n)
        data = BoundaryData.from_functions(m, ms.velocity)
        pair = build_extension_pair(m, data, 0.25, ex)
        r = solve_regularized(m, pair, ms.force, StressModel(2.0, 0.0), SolveConfig(n_reg=None))
        hs.append(m.h_max)
        eu.append(velocity_grad_error(r.v, ms))
    orders = observed_orders(hs, eu)
    ok_b = bool(np.all(np.abs(orders - 2) <= 0.3))
    # (c) shear-thinning cavity on 32 x 32
    m32 = build_mesh("unit-square", 32)
    data = make_data("lid", m32, "unit-square")
    pair = build_extension_pair(m32, data, 0.25, ex)
    model = StressModel(1.75, 0.01)
    cfg = SolveConfig(max_picard=60, tol_rel=1e-8)
    res = solve_regularized(m32, pair, None, model, cfg)
    ok_c = res.converged and res.residual_history[-1] <= 1e-8 and res.iterations <= 60
    # (d) weak-form residual of the converged solution
    w = residual_weak_form(res.v, res.pressure, data, None, model, penalty=(res.n_reg, res.sigma, res.u))
    ok_d = w.relative <= 10 * cfg.tol_rel
    dt = time.perf_counter() - t0
    ok = ok_a and ok_b and ok_c and ok_d and dt < 600
    record(
        "8",
        ok,
        f"(a) zero data: {rz.iterations} iteration, u=0: {ok_a}; (b) NS orders {np.round(orders, 3).tolist()}; "
        f"(c) cavity {res.status} in {res.iterations} Picard steps, residual {res.residual_history[-1]:.2e}; "
        f"(d) weak residual {w.relative:.2e}; {dt:.0f} s",
    )
    assert ok


# 9 ---------------------------------------------------------------------------

# the unit lid violates the condition (L_min ~ 6.4); a tenth of it satisfies it
LID_SCALE = 0.1


def test_criterion_09_apriori():
    ex = derive_exponents(2, 1.75, 10)
    model = StressModel(1.75, 0.01)  # C1 = C2 = 1
    cal = Calibration()
    holds = []
    for n in (8, 16, 32):
        m = build_mesh("unit-square", n)
        data = make_data("lid", m, "unit-square", scale=LID_SCALE)
        rep = check_smallness(measure_data_norms(data, ex, 0.01), ex, cal, model)
        pair = build_extension_pair(m, data, 0.25, ex)
        res = solve_regularized(m, pair, None, model, SolveConfig())
        chk = verify_apriori(res, rep)
        holds.append(rep.satisfied and chk.bound_holds is True)
    m = build_mesh("unit-square", 8)
    data = make_data("lid-perturbed", m, "unit-square")
    rep = check_smallness(measure_data_norms(data, ex, 0.01), ex, cal, model)
    pair = build_extension_pair(m, data, 0.25, ex)
    res = solve_regularized(m, pair, None, model, SolveConfig())
    chk = verify_apriori(res, rep)
    na = (not rep.satisfied) and chk.status == "not applicable" and chk.bound_holds is None
    ok = all(holds) and na
    record("9", ok, f"lid x {LID_SCALE}: bound holds on 3 refinements: {holds}; unsatisfied case reports '{chk.status}'")
    assert ok


# 10 --------------------------------------------------------------------------

def test_criterion_10_reverse_jensen():
    rng = np.random.default_rng(10)
    violations = 0
    for _ in range(10**4):
        alpha = float(rng.uniform(1e-3, 1 - 1e-3))
        xs = rng.uniform(0, 10, int(rng.integers(1, 50))) ** float(rng.uniform(0.5, 3))
        violations += not reverse_jensen_check(alpha, xs)
    ok = violations == 0
    record("10", ok, f"{violations} violations in 1e4 draws")
    assert ok


# 11 --------------------------------------------------------------------------

def test_criterion_11_determinism(tmp_path):
    from pdflow.cli import main

    same = {}
    for name, s in PRESETS.items():
        a = emit_report(run_scenario(s), "csv", tmp_path / "a")[0]
        b = emit_report(run_scenario(s), "csv", tmp_path / "b")[0]
        same[name] = open(a, "rb").read() == open(b, "rb").read()
    for d in ("c1", "c2"):
        main(["--seed", "5", "--out", str(tmp_path / d), "run", "--preset", "perturbation"])
    same["cli"] = (tmp_path / "c1" / "perturbation.csv").read_bytes() == (tmp_path / "c2" / "perturbation.csv").read_bytes()
    ok = all(same.values())
    record("11", ok, "byte-identical: " + ", ".join(f"{k}={v}" for k, v in same.items()))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
