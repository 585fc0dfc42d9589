"""Finite-difference solver for the hydrodynamic system

    dt (rho, p) + sum_v ~v [ v . grad chi(theta_v(Lambda(rho, p))) ] = 1/2 Lap (rho, p)

on [0,1] x T^{d-1} with Dirichlet walls pinned to the reservoir moments and
periodic transverse axes, plus a weak-form residual checker.

Spatial derivatives are second-order central differences; time stepping is
explicit Euler under a diffusive CFL bound, or (d=1) Crank-Nicolson on the
diffusion with the flux kept explicit.  The inverse chemical potential is
evaluated per node with a warm start from the previous step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import thermo
from .dynamics import BoundaryData
from .empirical import TestFunction
from .measures import SpatialProfile
from .velocities import VelocitySet

__all__ = [
    "SolverConfig",
    "PdeState",
    "Trajectory",
    "initialize",
    "rhs",
    "step",
    "solve",
    "steady_state",
    "weak_residual",
]


@dataclass
class SolverConfig:
    M: int = 64                   # nodes 0..M along the walled axis, h = 1/M
    dt: float | None = None      # None: safety * h^2 / d
    scheme: str = "explicit"     # "explicit" | "imex"
    safety: float = 0.4
    clamp_margin: float = thermo.INTERIOR_MARGIN
    newton_tol: float = 1e-12
    include_flux: bool = True
    upwind: bool = False          # first-order upwinding fallback for the flux
    transverse_M: int | None = None

    def grid_dt(self, d: int) -> float:
        h = 1.0 / self.M
        dt = self.dt if self.dt is not None else self.safety * h * h / d
        if self.scheme == "explicit" and dt > h * h / d + 1e-15:
            raise ValueError(f"dt={dt:.3e} violates the diffusive CFL bound {h * h / d:.3e}")
        return dt


class PdeState:
    """Nodal fields u_k on the grid, wall data, and the warm Lambda cache."""

    def __init__(self, u: np.ndarray, vs: VelocitySet, wall0: np.ndarray, wall1: np.ndarray,
                 t: float = 0.0):
        self.u = u                    # (M+1, [Mt]*(d-1), d+1)
        self.vs = vs
        self.wall0 = wall0            # ([Mt]*(d-1), d+1) Dirichlet data at u1 = 0
        self.wall1 = wall1
        self.t = t
        self.lam = None               # warm start for the node-wise Newton
        self.clamp_events = 0

    @property
    def d(self) -> int:
        return self.u.ndim - 1

    @property
    def M(self) -> int:
        return self.u.shape[0] - 1

    @property
    def h(self) -> float:
        return 1.0 / self.M

    def axes(self):
        """Grid coordinate arrays per axis (walled axis includes both walls)."""
        out = [np.linspace(0.0, 1.0, self.M + 1)]
        for n in self.u.shape[1:-1]:
            out.append(np.arange(n) / n)
        return out

    def nodes(self) -> np.ndarray:
        """(nnodes, d) coordinates of every node, in C order of the field."""
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def pin_walls(self):
        self.u[0] = self.wall0
        self.u[-1] = self.wall1

    def copy(self) -> "PdeState":
        c = PdeState(self.u.copy(), self.vs, self.wall0, self.wall1, self.t)
        c.lam = None if self.lam is None else self.lam.copy()
        c.clamp_events = self.clamp_events
        return c


def initialize(profile: SpatialProfile, boundary: BoundaryData, cfg: SolverConfig,
               vs: VelocitySet, warn=None) -> PdeState:
    """Sample the initial profile on the grid and pin the walls to d(x).

    A mismatch between the profile trace and the reservoir moments is allowed
    (the boundary condition holds in the trace sense); `warn` is called with
    a message when the mismatch exceeds 1e-8.
    """
    d = vs.dim
    Mt = cfg.transverse_M or cfg.M
    shape = (cfg.M + 1,) + (Mt,) * (d - 1)
    axes = [np.linspace(0, 1, cfg.M + 1)] + [np.arange(Mt) / Mt] * (d - 1)
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    u = profile(pts).reshape(shape + (d + 1,))

    if d > 1:
        tshape = shape[1:]
        ut = pts.reshape(shape + (d,))[0][..., 1:].reshape(-1, d - 1)
        wall0 = boundary.wall_data(0, ut).reshape(tshape + (d + 1,))
        wall1 = boundary.wall_data(1, ut).reshape(tshape + (d + 1,))
    else:
        wall0 = boundary.wall_data(0, np.zeros((1, 0)))[0]
        wall1 = boundary.wall_data(1, np.zeros((1, 0)))[0]

    mismatch = max(float(np.abs(u[0] - wall0).max()), float(np.abs(u[-1] - wall1).max()))
    if mismatch > 1e-8 and warn is not None:
        warn(f"initial profile differs from the reservoir moments at the walls "
             f"by {mismatch:.3e}; walls pinned to the reservoir data")
    m = thermo.interior_margin(u.reshape(-1, d + 1), vs)
    if np.min(m) <= cfg.clamp_margin:
        raise thermo.NotInDomain(
            f"initial data leaves U (worst margin {np.min(m):.3e})")
    st = PdeState(u, vs, wall0, wall1)
    st.pin_walls()
    return st


# ---------------------------------------------------------------------------
# spatial operators


def _chi_field(state: PdeState, cfg: SolverConfig) -> np.ndarray:
    """chi(theta_v(Lambda(u))) per node, clamping u into U first; warm Newton."""
    vs = state.vs
    flat = state.u.reshape(-1, state.u.shape[-1])
    clamped, moved = thermo.clamp_to_interior(flat, vs, cfg.clamp_margin)
    state.clamp_events += moved
    lam0 = None if state.lam is None else state.lam
    lam = thermo.inverse_lambda(clamped, vs, tol=cfg.newton_tol, lam0=lam0,
                                check_domain=False)
    state.lam = lam
    g = thermo.chi(thermo.theta(lam, vs))
    return g.reshape(state.u.shape[:-1] + (vs.n,))


def _laplacian(u: np.ndarray, h: float) -> np.ndarray:
    """Central 5/7-point Laplacian; walls contribute via their pinned values.

    Returns zeros on the wall slices (they are Dirichlet nodes).
    """
    lap = np.zeros_like(u)
    lap[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
    for ax in range(1, u.ndim - 1):
        n = u.shape[ax]
        ht = 1.0 / n
        lap += (np.roll(u, 1, axis=ax) + np.roll(u, -1, axis=ax) - 2.0 * u) / (ht * ht)
    lap[0] = 0.0
    lap[-1] = 0.0
    return lap


def _flux_divergence(state: PdeState, g: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """sum_v ~v_k (v . grad) chi_v by central (or upwind) differences.

    Zero on the wall slices.
    """
    vs = state.vs
    va = vs.float_array()
    tv = vs.tilde_array()
    h = state.h
    d = state.d
    # dG[..., v, j]
    dG = np.zeros(g.shape + (d,))
    if cfg.upwind:
        fwd = np.zeros_like(g)
        bwd = np.zeros_like(g)
        fwd[:-1] = (g[1:] - g[:-1]) / h
        bwd[1:] = (g[1:] - g[:-1]) / h
        dG[..., 0] = np.where(va[:, 0] > 0, bwd, fwd)
    else:
        dG[1:-1, ..., 0] = (g[2:] - g[:-2]) / (2.0 * h)
    for ax in range(1, d):
        n = g.shape[ax]
        ht = 1.0 / n
        if cfg.upwind:
            fwd = (np.roll(g, -1, axis=ax) - g) / ht
            bwd = (g - np.roll(g, 1, axis=ax)) / ht
            dG[..., ax] = np.where(va[:, ax] > 0, bwd, fwd)
        else:
            dG[..., ax] = (np.roll(g, -1, axis=ax) - np.roll(g, 1, axis=ax)) / (2.0 * ht)
    inner = np.einsum("...vj,vj->...v", dG, va)
    flux = np.einsum("...v,vk->...k", inner, tv)
    flux[0] = 0.0
    flux[-1] = 0.0
    return flux


def rhs(state: PdeState, cfg: SolverConfig | None = None) -> np.ndarray:
    """Nodal tendency 1/2 Lap u - flux divergence; zero on the wall slices."""
    cfg = cfg or SolverConfig(M=state.M)
    out = 0.5 * _laplacian(state.u, state.h)
    if cfg.include_flux:
        g = _chi_field(state, cfg)
        out -= _flux_divergence(state, g, cfg)
    return out


# ---------------------------------------------------------------------------
# time stepping


def _clamp_state(state: PdeState, cfg: SolverConfig):
    flat = state.u.reshape(-1, state.u.shape[-1])
    clamped, moved = thermo.clamp_to_interior(flat, state.vs, cfg.clamp_margin)
    if moved:
        state.clamp_events += moved
        state.u = clamped.reshape(state.u.shape)
        state.pin_walls()


def _step_explicit(state: PdeState, cfg: SolverConfig, dt: float):
    state.u = state.u + dt * rhs(state, cfg)
    state.pin_walls()
    _clamp_state(state, cfg)
    state.t += dt


def _imex_matrix(M: int, dt: float, h: float) -> np.ndarray:
    """Banded (I - dt/4 * Lap_h) on the interior nodes, for solve_banded."""
    r = dt / (4.0 * h * h)
    n = M - 1
    ab = np.zeros((3, n))
    ab[0, 1:] = -r
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-1] = -r
    return ab


def _step_imex(state: PdeState, cfg: SolverConfig, dt: float):
    """Crank-Nicolson diffusion, explicit flux; d = 1 (tridiagonal solve)."""
    if state.d != 1:
        raise NotImplementedError("imex stepping is implemented for d = 1")
    u = state.u
    h = state.h
    r = dt / (4.0 * h * h)
    expl = u[1:-1] + r * (u[2:] - 2.0 * u[1:-1] + u[:-2])
    if cfg.include_flux:
        g = _chi_field(state, cfg)
        expl = expl - dt * _flux_divergence(state, g, cfg)[1:-1]
    # implicit wall contributions (Dirichlet data is time-independent)
    expl[0] += r * state.wall0
    expl[-1] += r * state.wall1
    ab = _imex_matrix(state.M, dt, h)
    newu = u.copy()
    for k in range(u.shape[-1]):
        newu[1:-1, k] = solve_banded((1, 1), ab, expl[:, k])
    state.u = newu
    state.pin_walls()
    _clamp_state(state, cfg)
    state.t += dt


def step(state: PdeState, cfg: SolverConfig, dt: float | None = None) -> PdeState:
    """Advance one time step in place (returns state for chaining)."""
    dt = dt if dt is not None else cfg.grid_dt(state.d)
    if cfg.scheme == "explicit":
        _step_explicit(state, cfg, dt)
    elif cfg.scheme == "imex":
        _step_imex(state, cfg, dt)
    else:
        raise ValueError(f"unknown scheme {cfg.scheme!r}")
    return state


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    h: float = 0.0
    wall0: np.ndarray | None = None
    wall1: np.ndarray | None = None
    clamp_events: int = 0

    def append(self, t: float, u: np.ndarray):
        self.times.append(float(t))
        self.states.append(u.copy())

    def field_array(self) -> np.ndarray:
        return np.stack(self.states)

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise KeyError(f"no snapshot at t={t}; nearest is {self.times[i]}")
        return self.states[i]


def solve(profile: SpatialProfile, boundary: BoundaryData, T: float, cfg: SolverConfig,
          vs: VelocitySet, snapshot_times=None, store_every: int = 0,
          warn=None) -> Trajectory:
    """March to time T; snapshot times are hit exactly by shortening the last
    substep.  store_every > 0 additionally records every k-th step (for
    time-integrated functionals such as the weak residual)."""
    state = initialize(profile, boundary, cfg, vs, warn=warn)
    dt0 = cfg.grid_dt(state.d)
    snaps = sorted(set(float(t) for t in (snapshot_times if snapshot_times is not None else [T])))
    if snaps and (snaps[0] < 0 or snaps[-1] > T + 1e-12):
        raise ValueError("snapshot times outside [0, T]")
    traj = Trajectory(h=state.h, wall0=state.wall0, wall1=state.wall1)
    traj.append(0.0, state.u)
    pending = [t for t in snaps if t > 0]
    nstep = 0
    while state.t < T - 1e-12:
        target = pending[0] if pending else T
        dt = min(dt0, target - state.t)
        step(state, cfg, dt)
        nstep += 1
        hit = pending and state.t >= pending[0] - 1e-12
        if hit:
            pending.pop(0)
        if hit or (store_every and nstep % store_every == 0):
            traj.append(state.t, state.u)
    traj.clamp_events = state.clamp_events
    return traj


def steady_state(profile: SpatialProfile, boundary: BoundaryData, cfg: SolverConfig,
                 vs: VelocitySet, tol: float = 1e-9, t_max: float = 20.0):
    """March until ||du/dt||_inf < tol (or t_max); returns (state, residual)."""
    state = initialize(profile, boundary, cfg, vs)
    dt = cfg.grid_dt(state.d)
    res = np.inf
    while state.t < t_max:
        prev = state.u.copy()
        step(state, cfg, dt)
        res = float(np.abs(state.u - prev).max()) / dt
        if res < tol:
            break
    return state, res


# ---------------------------------------------------------------------------
# weak-form residual


def weak_residual(traj: Trajectory, H: TestFunction, k: int, vs: VelocitySet,
                  cfg: SolverConfig | None = None, time_factor=None) -> float:
    """|LHS - RHS| of the weak-solution identity for component k against the
    space-time test function phi(t) H(u).

    The five pieces: the endpoint difference, the time-derivative and
    Laplacian bulk integrals, the two wall surface terms (a and b data paired
    with d_{u1} H, each carrying the 1/2 of the diffusion), and the mobility
    flux term.  All space/time integrals use the trapezoid rule on the
    trajectory's own grid, so the residual of an exact solution is
    O(h^2) + O(dt).

    time_factor is None (phi = 1) or a pair (phi, dphi) of callables.
    """
    if not H.vanishing_at_walls:
        raise ValueError("weak formulation requires H vanishing at the walls")
    cfg = cfg or SolverConfig(M=int(round(1.0 / traj.h)))
    times = np.asarray(traj.times)
    if len(times) < 3:
        raise ValueError("need a trajectory recorded with store_every to integrate in time")
    U = traj.field_array()          # (nt, M+1, [Mt...], d+1)
    d = U.ndim - 2
    h = traj.h
    shape = U.shape[1:-1]
    axes = [np.linspace(0, 1, shape[0])] + [np.arange(n) / n for n in shape[1:]]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)

    if time_factor is None:
        phi = np.ones_like(times)
        dphi = np.zeros_like(times)
    else:
        phi = np.asarray([time_factor[0](t) for t in times])
        dphi = np.asarray([time_factor[1](t) for t in times])

    hv = H(pts).reshape(shape)
    lapH = sum(H.d2u(pts, ax) for ax in range(d)).reshape(shape)
    dH = np.stack([H.du(pts, ax).reshape(shape) for ax in range(d)], axis=-1)

    def space_int(f):
        """Trapezoid over the walled axis, mean times 1 over periodic axes."""
        out = np.trapezoid(f, dx=h, axis=0)
        for _ in range(d - 1):
            out = out.mean(axis=0)
        return out

    uk = U[..., k]
    # endpoint difference
    lhs = phi[-1] * space_int(hv * uk[-1]) - phi[0] * space_int(hv * uk[0])

    # bulk: u (phi' H + phi/2 H'') integrated in space and time
    bulk_t = np.array([space_int(uk[i] * (dphi[i] * hv + 0.5 * phi[i] * lapH))
                       for i in range(len(times))])
    rhs_val = np.trapezoid(bulk_t, x=times)

    # wall surface terms: +1/2 a . d1H(0) - 1/2 b . d1H(1), per unit wall measure
    pts0 = pts.reshape(shape + (d,))[0].reshape(-1, d)
    pts1 = pts.reshape(shape + (d,))[-1].reshape(-1, d)
    d1H0 = H.du(pts0, 0)
    d1H1 = H.du(pts1, 0)
    a_k = np.atleast_1d(traj.wall0[..., k]).ravel()
    b_k = np.atleast_1d(traj.wall1[..., k]).ravel()
    surf = 0.5 * float(np.mean(a_k * d1H0)) - 0.5 * float(np.mean(b_k * d1H1))
    rhs_val += surf * np.trapezoid(phi, x=times)

    # flux term: + int phi sum_v ~v_k chi_v (v . grad H)
    va = vs.float_array()
    tvk = vs.tilde_array()[:, k]
    vdotdH = np.einsum("...j,vj->...v", dH, va)      # (shape..., nvel)
    flux_t = np.empty(len(times))
    lam = None
    for i in range(len(times)):
        flat = U[i].reshape(-1, U.shape[-1])
        clamped, _ = thermo.clamp_to_interior(flat, vs, cfg.clamp_margin)
        lam = thermo.inverse_lambda(clamped, vs, lam0=lam, check_domain=False)
        g = thermo.chi(thermo.theta(lam, vs)).reshape(shape + (vs.n,))
        flux_t[i] = phi[i] * space_int(np.einsum("...v,v->...", g * vdotdH, tvk))
    rhs_val += np.trapezoid(flux_t, x=times)

    return abs(lhs - rhs_val)
