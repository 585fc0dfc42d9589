"""Brute-force oracles on tiny systems.

Assembles the full generator matrix over all 2^{sites * |V|} configurations
(guarded), solves for stationary distributions, checks detailed balance,
evaluates the exclusion/collision/boundary Dirichlet forms, and propagates
laws by matrix exponential.  These pin down the event-driven simulator and
the entropy/reversibility structure at desk scale.

State encoding: bit k of the state integer is (site k // |V|, velocity
k % |V|), i.e. site-major velocity-minor, shared with the snapshot format.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.csgraph import connected_components

from .dynamics import BoundaryData, JumpLaw
from .lattice import Lattice
from .velocities import VelocitySet

__all__ = [
    "TooLarge",
    "Reducible",
    "GeneratorMatrix",
    "build_full_generator",
    "product_measure_vector",
    "stationary_distribution",
    "check_detailed_balance",
    "dirichlet_form",
    "entropy_production",
    "relative_entropy",
]

STATE_GUARD_BITS = 20
ALL_PARTS = ("ex1", "ex2", "c", "b")


class TooLarge(ValueError):
    """State space exceeds the 2^20 enumeration guard."""


class Reducible(ValueError):
    """The chain restricted to the selected parts is not irreducible."""


@dataclass
class GeneratorMatrix:
    """Sparse generator Q (row form: Q[s, s'] = rate s -> s', diagonal = -row sum)."""

    Q: sp.csr_matrix
    lattice: Lattice
    vs: VelocitySet
    parts: tuple[str, ...]
    nstates: int = field(init=False)

    def __post_init__(self):
        self.nstates = self.Q.shape[0]

    def bits(self) -> np.ndarray:
        """(nstates, nsites, nvel) uint8 occupancies of every state."""
        nbits = self.lattice.nsites * self.vs.n
        s = np.arange(self.nstates, dtype=np.int64)
        b = ((s[:, None] >> np.arange(nbits)) & 1).astype(np.uint8)
        return b.reshape(self.nstates, self.lattice.nsites, self.vs.n)


def _transition_lists(lattice: Lattice, vs: VelocitySet, law: JumpLaw,
                      boundary: BoundaryData, parts):
    """Yield (bit flip description, dirichlet weight, rate) transition families.

    Each family is (kind, data) where data lets the assembler compute, for
    every state, the target state and whether the move is active.
    """
    N = lattice.N
    n2 = float(N) ** 2
    fams = []
    if "ex1" in parts or "ex2" in parts:
        for a in range(vs.n):
            zs = {}
            if "ex1" in parts:
                for z in lattice.unit_moves():
                    zs[z] = zs.get(z, 0.0) + 0.5
            if "ex2" in parts:
                for z, p in law.support(a):
                    zs[z] = zs.get(z, 0.0) + p / N
            for z, pn in sorted(zs.items()):
                tgt = lattice.targets(z)
                for s_site in range(lattice.nsites):
                    t_site = int(tgt[s_site])
                    if t_site >= 0:
                        fams.append(("ex", a, s_site, t_site, n2 * pn, pn))
    if "c" in parts:
        for qi, q in enumerate(vs.quadruples):
            for s_site in range(lattice.nsites):
                fams.append(("c", q.indices(), s_site, None, n2, 1.0))
    if "b" in parts:
        for side, getter in ((1, boundary.alpha), (N - 1, boundary.beta)):
            mask = lattice.wall_mask(side)
            sites = np.nonzero(mask)[0]
            ut = lattice.coords[sites][:, 1:] / N
            dens = getter(ut if lattice.d > 1 else np.zeros((len(sites), 0)))
            for row, s_site in enumerate(sites):
                for a in range(vs.n):
                    th = float(dens[row, a])
                    fams.append(("b", a, int(s_site), th, n2, 1.0))
    return fams


def build_full_generator(N: int, vs: VelocitySet, law: JumpLaw, boundary: BoundaryData,
                         parts=ALL_PARTS, d: int = 1) -> GeneratorMatrix:
    """Assemble the selected generator pieces with the diffusive N^2 factor.

    parts is a subset of {"ex1", "ex2", "c", "b"}: symmetric exclusion, the
    1/N asymmetric exclusion, collisions, boundary flips.
    """
    lattice = Lattice(N, d)
    nbits = lattice.nsites * vs.n
    if nbits > STATE_GUARD_BITS:
        raise TooLarge(f"{nbits} bits > guard {STATE_GUARD_BITS}")
    nstates = 1 << nbits
    nvel = vs.n
    states = np.arange(nstates, dtype=np.int64)
    bit = lambda site, a: 1 << (site * nvel + a)

    rows, cols, vals = [], [], []
    for fam in _transition_lists(lattice, vs, law, boundary, parts):
        kind = fam[0]
        if kind == "ex":
            _, a, x, y, rate, _w = fam
            bx, by = bit(x, a), bit(y, a)
            active = (states & bx != 0) & (states & by == 0)
            src = states[active]
            rows.append(src)
            cols.append(src ^ bx ^ by)
            vals.append(np.full(src.size, rate))
        elif kind == "c":
            _, (iv, iw, ivo, iwo), y, _, rate, _w = fam
            bv, bw, bvo, bwo = bit(y, iv), bit(y, iw), bit(y, ivo), bit(y, iwo)
            active = ((states & bv != 0) & (states & bw != 0)
                      & (states & bvo == 0) & (states & bwo == 0))
            src = states[active]
            rows.append(src)
            cols.append(src ^ bv ^ bw ^ bvo ^ bwo)
            vals.append(np.full(src.size, rate))
        else:  # boundary flip
            _, a, x, th, n2, _w = fam
            bx = bit(x, a)
            occ = (states & bx) != 0
            rate = np.where(occ, n2 * (1.0 - th), n2 * th)
            rows.append(states)
            cols.append(states ^ bx)
            vals.append(rate)
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    else:
        rows = cols = np.array([], dtype=np.int64)
        vals = np.array([], dtype=float)
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(nstates, nstates)).tocsr()
    Q = Q - sp.diags(np.asarray(Q.sum(axis=1)).ravel())
    return GeneratorMatrix(Q.tocsr(), lattice, vs, tuple(parts))


def product_measure_vector(G: GeneratorMatrix, theta_site) -> np.ndarray:
    """Probability vector of the product measure with marginals theta_site.

    theta_site has shape (nsites, nvel): P(eta(x, v) = 1).
    """
    th = np.asarray(theta_site, dtype=float).ravel()
    nbits = th.size
    s = np.arange(G.nstates, dtype=np.int64)
    bits = ((s[:, None] >> np.arange(nbits)) & 1).astype(bool)
    logp = np.where(bits, np.log(th), np.log1p(-th)).sum(axis=1)
    nu = np.exp(logp)
    return nu / nu.sum()


def stationary_distribution(G: GeneratorMatrix, tol: float = 1e-12) -> np.ndarray:
    """pi with pi^T Q = 0, sum(pi) = 1, residual <= tol; requires irreducibility."""
    n = G.nstates
    ncomp, _ = connected_components(csgraph=(G.Q != 0), directed=True, connection="strong")
    if ncomp != 1:
        raise Reducible(f"{ncomp} strongly connected components")
    if n > 4096:
        raise TooLarge("dense stationary solve limited to 4096 states")
    A = G.Q.toarray().T.copy()
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    res = float(np.abs(pi @ G.Q.toarray()).max())
    if res > tol:
        # one step of iterative refinement on the augmented system
        A2 = np.vstack([G.Q.toarray().T, np.ones(n)])
        b2 = np.zeros(n + 1)
        b2[-1] = 1.0
        pi, *_ = np.linalg.lstsq(A2, b2, rcond=None)
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
        res = float(np.abs(pi @ G.Q.toarray()).max())
        if res > tol:
            raise RuntimeError(f"stationary residual {res:.3e} > {tol:.1e}")
    return pi


def check_detailed_balance(G: GeneratorMatrix, nu: np.ndarray) -> float:
    """max_{s != s'} |nu_s Q_{s s'} - nu_s' Q_{s' s}|."""
    D = sp.diags(np.asarray(nu, dtype=float)) @ G.Q
    A = (D - D.T).tocoo()
    off = A.row != A.col
    return float(np.abs(A.data[off]).max()) if np.any(off) else 0.0


def dirichlet_form(f: np.ndarray, nu: np.ndarray, G: GeneratorMatrix,
                   law: JumpLaw, boundary: BoundaryData, part: str) -> float:
    """The quadratic form sum weights (sqrt f(eta') - sqrt f(eta))^2 nu(eta).

    part in {"ex", "c", "b"}; weights are P_N(z, v) over ordered site pairs
    for "ex" (no occupancy factor: trivial swaps contribute zero anyway),
    the collision indicator for "c", and the flip rates (no N^2) for "b".
    f must be a probability density with respect to nu.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0) or abs(float(f @ nu) - 1.0) > 1e-8:
        raise ValueError("f must be a nonnegative density w.r.t. nu")
    lattice, vs = G.lattice, G.vs
    nvel = vs.n
    nstates = G.nstates
    states = np.arange(nstates, dtype=np.int64)
    sf = np.sqrt(f)
    bit = lambda site, a: 1 << (site * nvel + a)
    total = 0.0
    if part == "ex":
        for a in range(nvel):
            zs = {}
            for z in lattice.unit_moves():
                zs[z] = zs.get(z, 0.0) + 0.5
            for z, p in law.support(a):
                zs[z] = zs.get(z, 0.0) + p / lattice.N
            for z, pn in sorted(zs.items()):
                tgt = lattice.targets(z)
                for x in range(lattice.nsites):
                    y = int(tgt[x])
                    if y < 0:
                        continue
                    bx, by = bit(x, a), bit(y, a)
                    swap = ((states & bx) != 0) ^ ((states & by) != 0)
                    src = states[swap]
                    diff = sf[src ^ bx ^ by] - sf[src]
                    total += pn * float(nu[src] @ diff ** 2)
    elif part == "c":
        for q in vs.quadruples:
            iv, iw, ivo, iwo = q.indices()
            for y in range(lattice.nsites):
                bv, bw, bvo, bwo = bit(y, iv), bit(y, iw), bit(y, ivo), bit(y, iwo)
                act = ((states & bv != 0) & (states & bw != 0)
                       & (states & bvo == 0) & (states & bwo == 0))
                src = states[act]
                diff = sf[src ^ bv ^ bw ^ bvo ^ bwo] - sf[src]
                total += float(nu[src] @ diff ** 2)
    elif part == "b":
        for side, getter in ((1, boundary.alpha), (lattice.N - 1, boundary.beta)):
            mask = lattice.wall_mask(side)
            sites = np.nonzero(mask)[0]
            ut = lattice.coords[sites][:, 1:] / lattice.N
            dens = getter(ut if lattice.d > 1 else np.zeros((len(sites), 0)))
            for row, x in enumerate(sites):
                for a in range(nvel):
                    th = float(dens[row, a])
                    bx = bit(int(x), a)
                    occ = (states & bx) != 0
                    w = np.where(occ, 1.0 - th, th)
                    diff = sf[states ^ bx] - sf
                    total += float((nu * w) @ diff ** 2)
    else:
        raise ValueError(f"unknown Dirichlet part {part!r}")
    return total


def relative_entropy(mu: np.ndarray, nu: np.ndarray) -> float:
    """H(mu | nu) = sum mu log(mu / nu), with 0 log 0 = 0."""
    mu = np.asarray(mu, dtype=float)
    mask = mu > 0
    if np.any(nu[mask] <= 0):
        return np.inf
    return float(np.sum(mu[mask] * (np.log(mu[mask]) - np.log(nu[mask]))))


def entropy_production(mu0: np.ndarray, G: GeneratorMatrix, nu: np.ndarray,
                       times) -> list[tuple[float, float]]:
    """[(t, H(mu_t | nu))] with mu_t = mu_0 exp(tQ).

    Dense matrix exponential (scaling and squaring) below 2^10 states,
    Krylov propagation above.
    """
    n = G.nstates
    times = sorted(float(t) for t in times)
    out = []
    if n <= 1024:
        Qd = G.Q.toarray()
        for t in times:
            mu_t = mu0 @ expm(Qd * t)
            mu_t = np.clip(mu_t, 0.0, None)
            mu_t /= mu_t.sum()
            out.append((t, relative_entropy(mu_t, nu)))
    else:
        from scipy.sparse.linalg import expm_multiply
        QT = G.Q.T.tocsc()
        for t in times:
            mu_t = expm_multiply(QT * t, mu0)
            mu_t = np.clip(mu_t, 0.0, None)
            mu_t /= mu_t.sum()
            out.append((t, relative_entropy(mu_t, nu)))
    return out
