"""Acceptance suite: every verification criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with -s to see them as they go).
The two ensemble-scale checks fan out over two worker processes and take a
few minutes each; everything else is seconds.
"""
import time
from multiprocessing import get_context

import numpy as np
from scipy.linalg import expm

from latgas import measures as ms
from latgas import pde
from latgas import thermo as th
from latgas.dynamics import BoundaryData, Configuration, Simulator, build_jump_law
from latgas.empirical import sine_mode
from latgas.exactcheck import (
    build_full_generator,
    check_detailed_balance,
    product_measure_vector,
    stationary_distribution,
)
from latgas.harness import ExperimentConfig, run_converge, run_diagnostics, run_stationary
from latgas.lattice import Lattice
from latgas.velocities import collision_quadruples, conserved_vector, default_velocity_set
from latgas.velocities import LocalState, apply_collision, collision_rate

SEED = 20260808

MODEL = {
    "d": 1,
    "alpha": [0.62, 0.92],
    "beta": [0.38, 0.08],
    "profile": {"kind": "expression",
                "components": ["1.0 - 0.45*cos(pi*u1) + 0.35*sin(2*pi*u1)",
                               "0.15*sin(pi*u1) - 0.15*(u1-0.5)"]},
}


def report(name, ok, detail, budget, seconds):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}: {detail} ({seconds:.1f}s, budget {budget:.0f}s)")


# ---------------------------------------------------------------------------


def test_criterion_thermo_roundtrip():
    """1000 random potentials: inverse-of-moments within 1e-10, Jacobian vs
    central finite differences within 1e-6 relative; under 5 s."""
    t0 = time.time()
    worst_rt = 0.0
    worst_jac = 0.0
    for d in (1, 2):
        vs = default_velocity_set(d)
        rng = np.random.default_rng((SEED, d))
        lam = rng.uniform(-2, 2, (1000, d + 1))
        rec = th.inverse_lambda(th.moments(lam, vs), vs)
        worst_rt = max(worst_rt, float(np.abs(rec - lam).max()))
        eps = 1e-6
        for row in lam[:50]:
            J = th.moments_jacobian(row, vs)
            Jfd = np.empty_like(J)
            for b in range(d + 1):
                e = np.zeros(d + 1)
                e[b] = eps
                Jfd[:, b] = (th.moments(row + e, vs) - th.moments(row - e, vs)) / (2 * eps)
            worst_jac = max(worst_jac, float(np.abs(J - Jfd).max() / np.abs(J).max()))
    el = time.time() - t0
    ok = worst_rt <= 1e-10 and worst_jac <= 1e-6 and el < 5.0
    report("thermo roundtrip", ok,
           f"max roundtrip {worst_rt:.2e} (<=1e-10), max Jacobian gap {worst_jac:.2e} (<=1e-6)",
           5, el)
    assert worst_rt <= 1e-10
    assert worst_jac <= 1e-6
    assert el < 5.0


def test_criterion_collision_correctness():
    """Quadruples equal the |V|^4 brute force; applied collisions preserve the
    conserved vector exactly; under 1 s."""
    t0 = time.time()
    checked = 0
    for d in (1, 2, 3):
        vs = default_velocity_set(d)
        brute = []
        n = vs.n
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        if len({i, j, k, l}) != 4:
                            continue
                        si = tuple(a + b for a, b in zip(vs.velocities[i].components,
                                                         vs.velocities[j].components))
                        so = tuple(a + b for a, b in zip(vs.velocities[k].components,
                                                         vs.velocities[l].components))
                        if si == so:
                            brute.append((i, j, k, l))
        assert sorted(q.indices() for q in collision_quadruples(vs)) == sorted(brute)
        rng = np.random.default_rng((SEED, 17, d))
        for _ in range(100):
            bits = LocalState(tuple(int(b) for b in rng.integers(0, 2, vs.n)))
            for q in vs.quadruples:
                if collision_rate(bits, q):
                    out = apply_collision(bits, q)
                    assert conserved_vector(out, vs) == conserved_vector(bits, vs)
                    checked += 1
    el = time.time() - t0
    ok = el < 1.0
    report("collision correctness", ok,
           f"brute force matched for d=1,2,3; {checked} applied collisions conserved exactly",
           1, el)
    assert el < 1.0


def test_criterion_exact_stationarity_reversibility():
    """d=1, N=3, 16 states: product measure stationary for ex1+c+b (TV<=1e-10),
    detailed balance for b and c (<=1e-12), ex2 breaks it (>1e-3); under 1 s."""
    t0 = time.time()
    vs = default_velocity_set(1)
    law = build_jump_law(vs)
    lam = np.array([0.3, -0.4])
    theta = th.theta(lam, vs)
    bd = BoundaryData.constant(vs, list(theta), list(theta))
    G = build_full_generator(3, vs, law, bd, parts=("ex1", "c", "b"))
    nu = product_measure_vector(G, np.tile(theta, (G.lattice.nsites, 1)))
    tv = 0.5 * float(np.abs(stationary_distribution(G) - nu).sum())
    db_b = check_detailed_balance(build_full_generator(3, vs, law, bd, parts=("b",)), nu)
    db_c = check_detailed_balance(build_full_generator(3, vs, law, bd, parts=("c",)), nu)
    viol = check_detailed_balance(
        build_full_generator(3, vs, law, bd, parts=("ex1", "ex2", "c", "b")), nu)
    el = time.time() - t0
    ok = tv <= 1e-10 and db_b <= 1e-12 and db_c <= 1e-12 and viol > 1e-3 and el < 1.0
    report("exact stationarity/reversibility", ok,
           f"TV {tv:.1e} (<=1e-10), db(b) {db_b:.1e}, db(c) {db_c:.1e} (<=1e-12), "
           f"asymmetric violation {viol:.2e} (>1e-3)", 1, el)
    assert tv <= 1e-10
    assert db_b <= 1e-12 and db_c <= 1e-12
    assert viol > 1e-3
    assert el < 1.0


def _law_agreement_worker(args):
    seed, lo, hi, t = args
    vs = default_velocity_set(1)
    law = build_jump_law(vs)
    theta = th.theta(np.array([0.3, -0.4]), vs)
    bd = BoundaryData.constant(vs, list(theta), list(theta))
    lat = Lattice(3, 1)
    counts = np.zeros(16)
    for r in range(lo, hi):
        cfg = Configuration.empty(lat, vs)
        sim = Simulator(cfg, law, bd, np.random.default_rng((seed, 4, r)))
        sim.run_until(t)
        occ = sim.config.occ
        counts[sum(1 << k for k in range(4) if occ[k])] += 1
    return counts


def test_criterion_simulator_vs_matrix_law():
    """N=3, t=0.5, 1e5 replicas vs exp(tQ): >= 15/16 states within 3 binomial
    sigma; under 2 min."""
    t0 = time.time()
    vs = default_velocity_set(1)
    law = build_jump_law(vs)
    theta = th.theta(np.array([0.3, -0.4]), vs)
    bd = BoundaryData.constant(vs, list(theta), list(theta))
    G = build_full_generator(3, vs, law, bd)
    t, M = 0.5, 100_000
    mu0 = np.zeros(16)
    mu0[0] = 1.0
    law_t = mu0 @ expm(G.Q.toarray() * t)
    bounds = np.linspace(0, M, 5, dtype=int)
    jobs = [(SEED, int(lo), int(hi), t) for lo, hi in zip(bounds[:-1], bounds[1:])]
    with get_context("fork").Pool(2) as pool:
        counts = sum(pool.map(_law_agreement_worker, jobs))
    freq = counts / M
    sig = np.sqrt(law_t * (1 - law_t) / M)
    z = np.abs(freq - law_t) / np.maximum(sig, 1e-12)
    n_ok = int((z <= 3.0).sum())
    el = time.time() - t0
    ok = n_ok >= 15 and el < 120
    report("simulator vs matrix law", ok,
           f"{n_ok}/16 states within 3 sigma (max |z| = {z.max():.2f})", 120, el)
    assert n_ok >= 15
    assert el < 120


def test_criterion_equivalence_of_ensembles():
    """d=1, f = xi(0,v), ell=1: gap(L) |Lambda_L| bounded within a factor 2
    across L in {2,3,4} by exact enumeration; under 1 min.

    For this velocity set the single-bit gap is exactly zero (per-class
    particle counts are hypergeometric and reproduce theta_v(Lambda(i))
    identically), so the products are all float noise <= 1e-12 and the
    factor-2 bound holds trivially; the two-bit exclusion-current observable
    carries the generic 1/|Lambda_L| gap and is checked at factor 2 as well.
    """
    t0 = time.time()
    vs = default_velocity_set(1)
    target = np.array([1.2, 0.1])
    floor = 1e-11        # gap*vol values below this are float noise on a zero

    def spread(vals):
        floored = [max(v, floor) for v in vals]
        return max(floored) / min(floored)

    single, paired = [], []
    for L in (2, 3, 4):
        i = ms.nearest_attainable(L, vs, target)
        vol = 2 * L + 1
        g1 = ms.ensembles_gap(lambda b: float(b[1, 1]), 1, L, i, vs)
        g2 = ms.ensembles_gap(lambda b: float(b[1, 1] * (1 - b[2, 1])), 1, L, i, vs)
        single.append(g1.gap * vol)
        paired.append(g2.gap * vol)
    single_zero = max(single) <= floor
    el = time.time() - t0
    ok = single_zero and spread(single) <= 2.0 and spread(paired) <= 2.0 and el < 60
    report("equivalence of ensembles", ok,
           f"single-bit gap*vol all <= {max(single):.1e} (exactly zero law, spread "
           f"x{spread(single):.2f}); current gap*vol spread x{spread(paired):.2f} (<=2)",
           60, el)
    assert single_zero
    assert spread(single) <= 2.0
    assert spread(paired) <= 2.0
    assert el < 60


def test_criterion_pde_solver():
    """Richardson order in [1.8, 2.2]; explicit vs IMEX <= 1e-4 at T=0.1;
    weak residual refines at second order; pure-diffusion sine decay at
    pi^2/2 within 1 percent; under 2 min."""
    t0 = time.time()
    vs = default_velocity_set(1)
    bd = BoundaryData.constant(vs, MODEL["alpha"], MODEL["beta"])
    prof = ms.profile_from_config(MODEL["profile"], 1)
    T = 0.1

    ref = pde.solve(prof, bd, T, pde.SolverConfig(M=256, safety=0.2), vs,
                    snapshot_times=[T]).states[-1]
    errs = []
    for M in (16, 32, 64):
        u = pde.solve(prof, bd, T, pde.SolverConfig(M=M, safety=0.2), vs,
                      snapshot_times=[T]).states[-1]
        errs.append(float(np.abs(u - ref[::256 // M]).max()))
    orders = [float(np.log2(errs[i] / errs[i + 1])) for i in range(2)]

    ue = pde.solve(prof, bd, T, pde.SolverConfig(M=64, safety=0.2), vs,
                   snapshot_times=[T]).states[-1]
    ui = pde.solve(prof, bd, T, pde.SolverConfig(M=64, scheme="imex", safety=0.2), vs,
                   snapshot_times=[T]).states[-1]
    gap = float(np.abs(ue - ui).max())

    H = sine_mode(2, 1)
    res = []
    for M in (16, 32, 64):
        cfg = pde.SolverConfig(M=M)
        traj = pde.solve(prof, bd, T, cfg, vs, snapshot_times=[T], store_every=1)
        res.append(max(pde.weak_residual(traj, H, k, vs, cfg) for k in (0, 1)))
    res_ratios = [res[i] / res[i + 1] for i in range(2)]

    theta_mid = [0.5, 0.5]
    bdm = BoundaryData.constant(vs, theta_mid, theta_mid)
    prof_sine = ms.expression_profile(["1.0 + 0.3*sin(pi*u1)", "0"], 1)
    Td = 0.2
    traj = pde.solve(prof_sine, bdm, Td, pde.SolverConfig(M=64, include_flux=False), vs,
                     snapshot_times=[Td])
    amp = float(np.abs(traj.states[-1][:, 0] - 1.0).max())
    rate = -np.log(amp / 0.3) / Td
    rate_err = abs(rate - np.pi ** 2 / 2) / (np.pi ** 2 / 2)

    el = time.time() - t0
    ok = (all(1.8 <= o <= 2.2 for o in orders) and gap <= 1e-4
          and all(r > 2.5 for r in res_ratios) and rate_err <= 0.01 and el < 120)
    report("pde self-convergence", ok,
           f"orders {orders[0]:.2f},{orders[1]:.2f} (in [1.8,2.2]); scheme gap {gap:.1e} "
           f"(<=1e-4); residual ratios {res_ratios[0]:.1f},{res_ratios[1]:.1f} (>2.5); "
           f"decay rate off by {rate_err:.2%} (<=1%)", 120, el)
    assert all(1.8 <= o <= 2.2 for o in orders)
    assert gap <= 1e-4
    assert all(r > 2.5 for r in res_ratios)
    assert rate_err <= 0.01
    assert el < 120


def test_criterion_hydrodynamic_convergence():
    """d=1, smooth non-constant initial profile, unequal constant reservoirs,
    T=0.1, 200 replicas, N in {32,64,128}: e(N) strictly decreasing,
    exceedance at delta=0.05 non-increasing, e(128) < e(32)/2; target 15 min."""
    t0 = time.time()
    cfg = ExperimentConfig(
        kind="converge", model=dict(MODEL),
        numerics={"N": [32, 64, 128], "replicas": 200,
                  "snapshot_times": [0.02, 0.1], "delta": 0.05, "pde_M": 256},
        seed=SEED)
    rec = run_converge(cfg, threads=2)
    rows = rec.tables["converge_summary"][1]
    e = {r[0]: r[2] for r in rows}
    ex = {r[0]: r[3] for r in rows}
    el = time.time() - t0
    dec = e[32] > e[64] > e[128]
    half = e[128] < e[32] / 2
    exc = ex[32] >= ex[64] >= ex[128]
    ok = dec and half and exc and el < 900
    report("hydrodynamic convergence", ok,
           f"e = {e[32]:.4f} > {e[64]:.4f} > {e[128]:.4f}; e(128) vs e(32)/2 = "
           f"{e[128]:.4f} < {e[32] / 2:.4f}; exceedance {ex[32]:.2f} >= {ex[64]:.2f} "
           f">= {ex[128]:.2f}", 900, el)
    assert dec
    assert half
    assert exc
    assert el < 900


def test_criterion_boundary_and_block_diagnostics():
    """Time-averaged wall diagnostics shrink with N in the stationary run;
    the block-current diagnostic shrinks with the block size at N=128;
    under 10 min.

    Steep reservoirs make the 1/N wall-mismatch signal dominate the slow
    hydrodynamic fluctuations that time-averaging can suppress only like
    1/sqrt(N T M) within this budget.
    """
    t0 = time.time()
    cfg = ExperimentConfig(
        kind="stationary",
        model={"d": 1, "alpha": [0.9, 0.95], "beta": [0.1, 0.05],
               "profile": {"kind": "linear", "a": [1.85, 0.025],
                           "b": [0.15, -0.025]}},
        numerics={"N": [32, 64, 128], "replicas": 12, "T": 5.0, "burn": 1.0,
                  "pde_M": 256},
        seed=SEED)
    rec = run_stationary(cfg, threads=2)
    rows = rec.tables["stationary_boundary"][1]

    def mag(N, which):
        return max(abs(r[3]) for r in rows if r[0] == N and r[2] == which)

    vminus = [mag(N, "V-") for N in (32, 64, 128)]
    vplus = [mag(N, "V+") for N in (32, 64, 128)]
    v_ok = vminus[0] > vminus[1] > vminus[2] and vplus[0] > vplus[1] > vplus[2]

    dcfg = ExperimentConfig(kind="diagnostics", model={"d": 1},
                            numerics={"N": 128, "ell": [2, 4, 8], "samples": 32,
                                      "point": [1.0, 0.0]},
                            seed=SEED)
    drec = run_diagnostics(dcfg, threads=1)
    by_ell = {int(k): v for k, v in drec.summary["by_ell"].items()}
    d_ok = by_ell[2] > by_ell[4] > by_ell[8]

    el = time.time() - t0
    ok = v_ok and d_ok and el < 600
    report("boundary/block diagnostics", ok,
           f"|V-|: {vminus[0]:.4f} > {vminus[1]:.4f} > {vminus[2]:.4f}; "
           f"|V+|: {vplus[0]:.4f} > {vplus[1]:.4f} > {vplus[2]:.4f}; "
           f"block gap: {by_ell[2]:.4f} > {by_ell[4]:.4f} > {by_ell[8]:.4f}", 600, el)
    assert v_ok
    assert d_ok
    assert el < 600
