"""The parabolic solver at work: self-convergence, cross-scheme agreement,
heat-kernel decay with the flux off, and the weak-form residual refining at
second order.

Run: python demos/demo_pde.py
"""
import numpy as np

from latgas import measures as ms
from latgas import pde
from latgas.dynamics import BoundaryData
from latgas.empirical import sine_mode
from latgas.velocities import default_velocity_set

vs = default_velocity_set(1)
bd = BoundaryData.constant(vs, [0.62, 0.92], [0.38, 0.08])
prof = ms.expression_profile(
    ["1.0 - 0.45*cos(pi*u1) + 0.35*sin(2*pi*u1)", "0.15*sin(pi*u1) - 0.15*(u1-0.5)"], 1)
T = 0.1

ref = pde.solve(prof, bd, T, pde.SolverConfig(M=256, safety=0.2), vs,
                snapshot_times=[T]).states[-1]
print("Richardson self-convergence against M=256:")
prev = None
for M in (16, 32, 64):
    u = pde.solve(prof, bd, T, pde.SolverConfig(M=M, safety=0.2), vs,
                  snapshot_times=[T]).states[-1]
    err = np.abs(u - ref[::256 // M]).max()
    order = "" if prev is None else f"   observed order {np.log2(prev / err):.2f}"
    print(f"  M={M:>3}: sup error {err:.3e}{order}")
    prev = err

ue = pde.solve(prof, bd, T, pde.SolverConfig(M=64, safety=0.2), vs,
               snapshot_times=[T]).states[-1]
ui = pde.solve(prof, bd, T, pde.SolverConfig(M=64, scheme="imex", safety=0.2), vs,
               snapshot_times=[T]).states[-1]
print(f"explicit vs Crank-Nicolson IMEX at M=64: {np.abs(ue - ui).max():.2e}")

bdm = BoundaryData.constant(vs, [0.5, 0.5], [0.5, 0.5])
sine = ms.expression_profile(["1.0 + 0.3*sin(pi*u1)", "0"], 1)
traj = pde.solve(sine, bdm, 0.2, pde.SolverConfig(M=64, include_flux=False), vs,
                 snapshot_times=[0.2])
amp = np.abs(traj.states[-1][:, 0] - 1.0).max()
print(f"pure-diffusion sine decay rate {-np.log(amp / 0.3) / 0.2:.4f} "
      f"(heat kernel: pi^2/2 = {np.pi ** 2 / 2:.4f})")

print("weak-form residual under refinement (test mode sin(2 pi u)):")
H = sine_mode(2, 1)
for M in (16, 32, 64):
    cfg = pde.SolverConfig(M=M)
    tr = pde.solve(prof, bd, T, cfg, vs, snapshot_times=[T], store_every=1)
    r = max(pde.weak_residual(tr, H, k, vs, cfg) for k in (0, 1))
    print(f"  M={M:>3}: residual {r:.3e}")
