"""Equilibrium statics of the lattice gas.

Per-velocity densities theta_v(lambda), the moment map lambda -> (rho, p),
its damped-Newton inverse, and the mobility chi(a) = a(1-a) that enters the
macroscopic flux.  All maps are vectorized over a leading batch shape; the
chemical potential and the conserved vector both live in R^{d+1}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull
from scipy.special import expit

from .velocities import VelocitySet

__all__ = [
    "ChemicalPotential",
    "ThermoPoint",
    "NotInDomain",
    "NoConvergence",
    "INTERIOR_MARGIN",
    "theta",
    "chi",
    "moments",
    "moments_jacobian",
    "conserved_hull",
    "in_U",
    "interior_margin",
    "clamp_to_interior",
    "inverse_lambda",
    "flux_coefficient",
]

# Points closer than this to the boundary of U are rejected / clamped; the
# inverse chemical-potential map diverges on the boundary itself.
INTERIOR_MARGIN = 1e-9


class NotInDomain(ValueError):
    """Requested point is not in the open set U (with margin)."""


class NoConvergence(RuntimeError):
    """Newton iteration failed; message carries the worst residual."""


@dataclass(frozen=True)
class ChemicalPotential:
    lam: np.ndarray  # (d+1,), lam[0] mass potential, lam[1:] momentum potentials

    def __post_init__(self):
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        if not np.all(np.isfinite(self.lam)):
            raise ValueError("chemical potential must be finite")


@dataclass(frozen=True)
class ThermoPoint:
    rho: float
    p: np.ndarray  # (d,)

    def __post_init__(self):
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, dtype=float)))

    @property
    def vec(self) -> np.ndarray:
        return np.concatenate([[self.rho], self.p])

    @classmethod
    def from_vec(cls, v) -> "ThermoPoint":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), v[1:])


def _lam_array(lam) -> np.ndarray:
    if isinstance(lam, ChemicalPotential):
        return lam.lam
    return np.asarray(lam, dtype=float)


def _tp_array(tp) -> np.ndarray:
    if isinstance(tp, ThermoPoint):
        return tp.vec
    return np.asarray(tp, dtype=float)


def theta(lam, vs: VelocitySet) -> np.ndarray:
    """Bernoulli means theta_v = logistic(lam_0 + sum_k lam_k v_k), shape (..., n)."""
    lam = _lam_array(lam)
    return expit(lam @ vs.tilde_array().T)


def chi(a):
    """Mobility a(1-a), the variance of a Bernoulli occupancy."""
    a = np.asarray(a, dtype=float)
    out = a * (1.0 - a)
    return float(out) if out.ndim == 0 else out


def moments(lam, vs: VelocitySet) -> np.ndarray:
    """Conserved-moment vector (rho, p_1..p_d) of the product measure at lam."""
    return theta(lam, vs) @ vs.tilde_array()


def moments_jacobian(lam, vs: VelocitySet) -> np.ndarray:
    """Jacobian of moments: the covariance matrix sum_v ~v ~v^T chi(theta_v)."""
    tv = vs.tilde_array()
    w = chi(theta(lam, vs))
    return np.einsum("...v,va,vb->...ab", w, tv, tv)


# ---------------------------------------------------------------------------
# the domain U: interior of the convex hull of {I(xi)}


class _Hull:
    def __init__(self, vs: VelocitySet):
        if vs.n > 20:
            raise ValueError("hull enumeration guard: 2^n vertex candidates with n > 20")
        bits = ((np.arange(2 ** vs.n)[:, None] >> np.arange(vs.n)) & 1).astype(float)
        pts = np.unique(bits @ vs.tilde_array(), axis=0)
        self.points = pts
        self.hull = ConvexHull(pts)
        self.equations = self.hull.equations  # A x + b <= 0 inside, |A_i| = 1
        # anchor for clamping: the barycenter moments(0) = (n/2, 0, ..., 0)
        self.anchor = moments(np.zeros(vs.dim + 1), vs)
        self.anchor_margin = float(self.margin(self.anchor))

    def margin(self, x) -> np.ndarray:
        """Signed distance to the hull boundary (positive inside)."""
        x = np.asarray(x, dtype=float)
        vals = -(x @ self.equations[:, :-1].T + self.equations[:, -1])
        return vals.min(axis=-1)


def conserved_hull(vs: VelocitySet) -> _Hull:
    if not hasattr(vs, "_conserved_hull"):
        vs._conserved_hull = _Hull(vs)
    return vs._conserved_hull


def interior_margin(tp, vs: VelocitySet):
    """Distance of tp to the boundary of U (negative outside)."""
    return conserved_hull(vs).margin(_tp_array(tp))


def in_U(tp, vs: VelocitySet, margin: float = INTERIOR_MARGIN):
    """Membership in the margin-shrunk interior of U, plus the margin itself.

    Returns (bool, margin) for a single point, (bool array, margin array) for
    a batch.
    """
    m = interior_margin(tp, vs)
    ok = m > margin
    if np.ndim(m) == 0:
        return bool(ok), float(m)
    return ok, m


def clamp_to_interior(tp, vs: VelocitySet, margin: float = INTERIOR_MARGIN):
    """Pull points with hull margin < margin toward the barycenter until the
    margin is met.  Returns (clamped array, number of points moved)."""
    hull = conserved_hull(vs)
    x = np.atleast_2d(np.asarray(_tp_array(tp), dtype=float))
    fx = -(x @ hull.equations[:, :-1].T + hull.equations[:, -1])      # (m, nfacets)
    fc = -(hull.anchor @ hull.equations[:, :-1].T + hull.equations[:, -1])
    need = fx < margin
    with np.errstate(divide="ignore", invalid="ignore"):
        s_facet = np.where(need, (margin - fx) / np.maximum(fc - fx, 1e-300), 0.0)
    s = np.clip(s_facet.max(axis=1), 0.0, 1.0)
    moved = int(np.count_nonzero(s > 0))
    out = x * (1.0 - s)[:, None] + hull.anchor[None, :] * s[:, None]
    out = out.reshape(np.shape(_tp_array(tp)))
    return out, moved


# ---------------------------------------------------------------------------
# Newton inverse of the moment map


def inverse_lambda(tp, vs: VelocitySet, tol: float = 1e-12, margin: float = INTERIOR_MARGIN,
                   lam0=None, max_iter: int = 100, check_domain: bool = True) -> np.ndarray:
    """Chemical potential with moments(lam) = tp, to sup-norm tolerance tol.

    Damped Newton from lam = 0 (or a warm start lam0); the moment map is the
    gradient of a strictly convex log-partition sum, so backtracking on the
    residual norm converges from anywhere in U.

    Raises NotInDomain if tp is outside the margin-shrunk interior of U, and
    NoConvergence if max_iter damped steps fail.
    """
    tp = np.asarray(_tp_array(tp), dtype=float)
    batch_shape = tp.shape[:-1]
    pts = np.atleast_2d(tp.reshape(-1, tp.shape[-1]))
    if check_domain:
        m = interior_margin(pts, vs)
        bad = m <= margin
        if np.any(bad):
            i = int(np.argmin(m))
            raise NotInDomain(
                f"point {pts[i]} has hull margin {m[i]:.3e} <= {margin:.1e}"
                + (f" ({int(bad.sum())} offending points)" if bad.sum() > 1 else ""))
    tv = vs.tilde_array()
    lam = np.zeros_like(pts) if lam0 is None else np.array(np.broadcast_to(
        np.asarray(lam0, dtype=float).reshape(-1, pts.shape[-1]) if np.ndim(lam0) > 1
        else np.asarray(lam0, dtype=float), pts.shape), dtype=float)

    def resid(l):
        return expit(l @ tv.T) @ tv - pts

    F = resid(lam)
    fn = np.abs(F).max(axis=1)
    for _ in range(max_iter):
        act = fn > tol
        if not act.any():
            break
        la, Fa = lam[act], F[act]
        w = chi(expit(la @ tv.T))
        J = np.einsum("mv,va,vb->mab", w, tv, tv)
        try:
            step = np.linalg.solve(J, Fa[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(J[i], Fa[i], rcond=None)[0] for i in range(len(Fa))])
        t = np.ones(len(la))
        fn_old = fn[act]
        for _bt in range(50):
            trial = la - t[:, None] * step
            Ft = expit(trial @ tv.T) @ tv - pts[act]
            fnt = np.abs(Ft).max(axis=1)
            worse = fnt > fn_old * (1.0 - 1e-4 * t)
            if not worse.any():
                break
            t[worse] *= 0.5
        lam_new = la - t[:, None] * step
        lam[act] = lam_new
        F[act] = expit(lam_new @ tv.T) @ tv - pts[act]
        fn = np.abs(F).max(axis=1)
    else:
        worst = float(fn.max())
        raise NoConvergence(f"Newton residual {worst:.3e} > {tol:.1e} after {max_iter} steps")
    return lam.reshape(batch_shape + (tp.shape[-1],))


def flux_coefficient(tp, vs: VelocitySet, margin: float = INTERIOR_MARGIN) -> np.ndarray:
    """chi(theta_v(Lambda(tp))) for every v, shape (..., n)."""
    lam = inverse_lambda(tp, vs, margin=margin)
    return chi(theta(lam, vs))
