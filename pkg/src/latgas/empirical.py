"""Empirical fields: pairings with test functions and the block/boundary
diagnostics that quantify local equilibrium.

Everything here is a read-only evaluation over a configuration snapshot.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import thermo
from .dynamics import Configuration, JumpLaw

__all__ = [
    "TestFunction",
    "test_function_basis",
    "pair",
    "boundary_pair",
    "PairingSeries",
    "replacement_diagnostic",
    "boundary_diagnostic",
    "energy_estimate",
]


class TestFunction:
    """H(u) on [0,1] x T^{d-1}, with analytic derivatives where provided.

    evaluator and the optional derivative callables act on (m, d) arrays of
    points and return (m,) values.  vanishing_at_walls is verified on a grid
    at construction when set.
    """

    __test__ = False    # not a pytest class, despite the name

    def __init__(self, evaluator, d: int, name: str, vanishing_at_walls: bool = False,
                 smoothness: str = "C^inf", du=None, d2u=None):
        self.d = d
        self.name = name
        self.vanishing_at_walls = vanishing_at_walls
        self.smoothness = smoothness
        self._ev = evaluator
        self._du = du      # du(u, axis) -> (m,)
        self._d2u = d2u    # d2u(u, axis) -> (m,)
        if vanishing_at_walls:
            self._check_walls()

    def _check_walls(self, grid_n: int = 17):
        if self.d == 1:
            pts = np.array([[0.0], [1.0]])
        else:
            ax = [np.linspace(0, 1, grid_n, endpoint=False)] * (self.d - 1)
            tr = np.stack([g.ravel() for g in np.meshgrid(*ax, indexing="ij")], axis=1)
            pts = np.vstack([np.hstack([np.full((len(tr), 1), w), tr]) for w in (0.0, 1.0)])
        vals = self(pts)
        if np.abs(vals).max() > 1e-12:
            raise ValueError(f"{self.name} does not vanish at the walls "
                             f"(max |H| = {np.abs(vals).max():.2e})")

    def __call__(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.asarray(self._ev(u), dtype=float).reshape(u.shape[0])

    def du(self, u, axis: int) -> np.ndarray:
        if self._du is None:
            raise ValueError(f"{self.name} carries no derivative")
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.asarray(self._du(u, axis), dtype=float).reshape(u.shape[0])

    def d2u(self, u, axis: int) -> np.ndarray:
        if self._d2u is None:
            raise ValueError(f"{self.name} carries no second derivative")
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.asarray(self._d2u(u, axis), dtype=float).reshape(u.shape[0])

    def __repr__(self):
        return f"TestFunction({self.name})"


def _trig_factor(kind: str, n: int):
    """Transverse factor cos/sin(2 pi n u) with derivatives."""
    w = 2.0 * np.pi * n
    if kind == "cos":
        return (lambda x: np.cos(w * x), lambda x: -w * np.sin(w * x),
                lambda x: -w * w * np.cos(w * x))
    return (lambda x: np.sin(w * x), lambda x: w * np.cos(w * x),
            lambda x: -w * w * np.sin(w * x))


def sine_mode(m: int, d: int, trans: tuple | None = None) -> TestFunction:
    """sin(pi m u1) times optional transverse trig factors; vanishes at walls."""
    w1 = np.pi * m
    trans = trans or ()
    factors = [(_trig_factor(kind, n), ax) for (kind, n, ax) in trans]

    def parts(u):
        cols = [np.sin(w1 * u[:, 0])]
        dcols = [w1 * np.cos(w1 * u[:, 0])]
        d2cols = [-w1 * w1 * np.sin(w1 * u[:, 0])]
        axes = [0]
        for (f, df, d2f), ax in factors:
            cols.append(f(u[:, ax]))
            dcols.append(df(u[:, ax]))
            d2cols.append(d2f(u[:, ax]))
            axes.append(ax)
        return np.stack(cols, 1), np.stack(dcols, 1), np.stack(d2cols, 1), axes

    def ev(u):
        c, _, _, _ = parts(u)
        return c.prod(axis=1)

    def du(u, axis):
        c, dc, _, axes = parts(u)
        if axis not in axes:
            return np.zeros(u.shape[0])
        out = np.ones(u.shape[0])
        for j, ax in enumerate(axes):
            out = out * (dc[:, j] if ax == axis else c[:, j])
        return out

    def d2u(u, axis):
        c, _, d2c, axes = parts(u)
        if axis not in axes:
            return np.zeros(u.shape[0])
        out = np.ones(u.shape[0])
        for j, ax in enumerate(axes):
            out = out * (d2c[:, j] if ax == axis else c[:, j])
        return out

    name = f"sin({m}.pi.u1)"
    if trans:
        name += "*" + "*".join(f"{k}(2pi.{n}.u{ax + 1})" for k, n, ax in trans)
    return TestFunction(ev, d, name, vanishing_at_walls=True, du=du, d2u=d2u)


def test_function_basis(d: int, m_max: int = 3, n_max: int = 2) -> list[TestFunction]:
    """Smooth wall-vanishing modes sin(pi m u1) * prod trig(2 pi n u_i).

    A finite smooth surrogate for "all continuous H vanishing at the walls";
    m <= m_max longitudinal modes, |n| <= n_max transverse modes per axis.
    """
    out = [sine_mode(m, d) for m in range(1, m_max + 1)]
    if d > 1:
        for m in range(1, m_max + 1):
            for ax in range(1, d):
                for n in range(1, n_max + 1):
                    out.append(sine_mode(m, d, (("cos", n, ax),)))
                    out.append(sine_mode(m, d, (("sin", n, ax),)))
    return out


# ---------------------------------------------------------------------------
# pairings


def _conserved_field(config: Configuration, k: int) -> np.ndarray:
    """(nsites,) I_k(eta_x)."""
    w = config.vs.tilde_array()[:, k]
    return config.occupancy_matrix() @ w


def pair(config: Configuration, k: int, H) -> float:
    """<pi^{k,N}, H> = N^{-d} sum_x H(x/N) I_k(eta_x).

    H may be a TestFunction/callable on (m, d) points or a precomputed
    (nsites,) array of values.
    """
    lat = config.lattice
    if not 0 <= k <= lat.d:
        raise ValueError(f"k={k} outside 0..{lat.d}")
    hv = H if isinstance(H, np.ndarray) else np.asarray(H(lat.macro_coords()), dtype=float)
    return float(hv @ _conserved_field(config, k)) / lat.N ** lat.d


def boundary_pair(config: Configuration, k: int, H, side: int) -> float:
    """N^{-(d-1)} sum over the wall slice x_1 = side of H(x/N) I_k(eta_x)."""
    lat = config.lattice
    if side not in (1, lat.N - 1):
        raise ValueError(f"side must be 1 or N-1, got {side}")
    mask = lat.wall_mask(side)
    hv = H if isinstance(H, np.ndarray) else np.asarray(H(lat.macro_coords()[mask]), dtype=float)
    vals = _conserved_field(config, k)[mask]
    return float(hv @ vals) / lat.N ** (lat.d - 1)


@dataclass
class PairingSeries:
    """<pi_t^{k,N}, H> samples along a trajectory, with provenance metadata."""

    k: int
    H_id: str
    N: int
    seed: object
    times: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    def append(self, t: float, v: float):
        self.times.append(float(t))
        self.values.append(float(v))

    def rows(self):
        """CSV rows (time, k, H_id, value, N, seed)."""
        for t, v in zip(self.times, self.values):
            yield (t, self.k, self.H_id, v, self.N, self.seed)


# ---------------------------------------------------------------------------
# block-averaged current vs its local-equilibrium value


def _moving_block_mean(field: np.ndarray, ell: int) -> np.ndarray:
    """Mean over centered windows of width 2*ell+1 along axis 0 (valid part)."""
    c = np.cumsum(np.insert(field, 0, 0.0, axis=0), axis=0)
    w = 2 * ell + 1
    return (c[w:] - c[:-w]) / w


def replacement_diagnostic(config: Configuration, ell: int, j: int, k: int,
                           law: JumpLaw, clamp_margin: float = thermo.INTERIOR_MARGIN):
    """Average over block centers of the gap between the block-averaged
    microscopic current and its local-equilibrium value.

    Per block: | mean_y sum_v v_k sum_z p(z,v) z_j eta(y,v)(1-eta(y+z,v))
                 - sum_v v_j v_k chi(theta_v(Lambda(I^ell))) |,
    blocks overlapping the walls are skipped; block conserved averages that
    fall outside U are clamped to its margin-interior (count reported).

    Returns (value, clamp_count).  Supports d = 1.
    """
    lat, vs = config.lattice, config.vs
    if lat.d != 1:
        raise NotImplementedError("block diagnostic implemented for d = 1")
    if not (1 <= j <= lat.d and 0 <= k <= lat.d):
        raise ValueError("need 1 <= j <= d and 0 <= k <= d")
    occ = config.occupancy_matrix().astype(float)
    va = vs.float_array()
    R = law.range
    nsites = lat.nsites

    # microscopic current W_{j,k} at each site with all z-targets interior
    cur = np.zeros(nsites)
    for a in range(vs.n):
        vk = 1.0 if k == 0 else va[a, k - 1]
        if vk == 0.0:
            continue
        for z, p in law.support(a):
            zj = z[j - 1]
            if zj == 0:
                continue
            tgt = lat.targets(z)
            ok = tgt >= 0
            term = np.zeros(nsites)
            term[ok] = occ[ok, a] * (1.0 - occ[tgt[ok], a])
            cur += vk * p * zj * term
    # valid current sites: all jump targets within range R interior
    lo_site, hi_site = R, nsites - 1 - R        # indices with x1 in [1+R, N-1-R]
    if hi_site - lo_site + 1 < 2 * ell + 1:
        raise ValueError(f"block half-width {ell} too large for N={lat.N}, range {R}")
    cur = cur[lo_site:hi_site + 1]

    Ifield = np.stack([_conserved_field(config, kk) for kk in range(lat.d + 1)], axis=1)
    Ifield = Ifield[lo_site:hi_site + 1]

    cur_block = _moving_block_mean(cur[:, None], ell)[:, 0]
    I_block = _moving_block_mean(Ifield, ell)

    clamped, nclamp = thermo.clamp_to_interior(I_block, vs, clamp_margin)
    lam = thermo.inverse_lambda(clamped, vs, check_domain=False)
    g = thermo.chi(thermo.theta(lam, vs))          # (nblocks, nvel)
    vj = va[:, j - 1]
    vk = np.ones(vs.n) if k == 0 else va[:, k - 1]
    predicted = g @ (vj * vk)
    return float(np.mean(np.abs(cur_block - predicted))), int(nclamp)


def boundary_diagnostic(config: Configuration, k: int, which: str, boundary,
                        G=None, eps: float = 0.1) -> float:
    """Wall diagnostics: V- / V+ compare the wall slice with the reservoir
    value; V2_alpha / V2_beta compare it with the adjacent eps-block average.

    G is an optional weight on the transverse coordinates (default 1).
    """
    lat, vs = config.lattice, config.vs
    N = lat.N
    va = vs.tilde_array()[:, k]
    Ifield = _conserved_field(config, k)

    def slice_vals(x1):
        return Ifield[lat.wall_mask(x1)]

    def gvals(mask):
        if G is None:
            return np.ones(int(mask.sum()))
        ut = lat.coords[mask][:, 1:] / N
        return np.asarray(G(ut), dtype=float).reshape(-1)

    if which in ("V-", "V+"):
        side = 1 if which == "V-" else N - 1
        mask = lat.wall_mask(side)
        ut = lat.coords[mask][:, 1:] / N
        dens = boundary.alpha(ut) if which == "V-" else boundary.beta(ut)
        reservoir = dens @ va
        return float(np.sum(gvals(mask) * (Ifield[mask] - reservoir))) / N ** (lat.d - 1)

    if which in ("V2_alpha", "V2_beta"):
        m = int(round(N * eps))
        if m < 2:
            raise ValueError(f"eps N = {N * eps:.2f} < 2; widen eps")
        if which == "V2_alpha":
            side, block_x1 = 1, range(1, m)
        else:
            side, block_x1 = N - 1, range(N - m, N)
        block_x1 = [x for x in block_x1 if 1 <= x <= N - 1]
        mask = lat.wall_mask(side)
        if lat.d == 1:
            block_avg = float(np.mean([slice_vals(x)[0] for x in block_x1]))
            return float(gvals(mask)[0] * (Ifield[mask][0] - block_avg))
        stack = np.stack([Ifield[lat.wall_mask(x)] for x in block_x1])   # (m-1, ntrans)
        block_avg = stack.mean(axis=0)
        return float(np.sum(gvals(mask) * (Ifield[mask] - block_avg))) / N ** (lat.d - 1)

    raise ValueError(f"unknown diagnostic {which!r}; use V-, V+, V2_alpha, V2_beta")


# ---------------------------------------------------------------------------
# energy of a gridded trajectory


def energy_estimate(times, field, spacings=None) -> float:
    """Discrete int_0^T int ||grad field||^2 du dt by central differences.

    field has shape (nt, n1[, n2, ...]) over a regular grid of [0,1]^d
    (axis 0 of the spatial part is the walled direction, nodes include the
    walls).  spacings defaults to 1/(n_axis - 1) per axis.
    """
    times = np.asarray(times, dtype=float)
    field = np.asarray(field, dtype=float)
    spatial_shape = field.shape[1:]
    if spacings is None:
        spacings = [1.0 / (n - 1) for n in spatial_shape]
    sq = np.zeros(field.shape)
    for ax, h in enumerate(spacings, start=1):
        g = np.gradient(field, h, axis=ax)
        sq = sq + g ** 2
    # spatial trapezoid per time slice, then time trapezoid
    per_t = sq
    for ax in range(len(spatial_shape), 0, -1):
        per_t = np.trapezoid(per_t, dx=spacings[ax - 1], axis=ax)
    if times.size == 1:
        return float(per_t[0] * 1.0)
    return float(np.trapezoid(per_t, x=times))
