"""Pressure, Gibbs and equilibrium measures, and phase-transition detection.

The pressure ``P(beta)`` of the flow is the root ``Z`` of ``lambda_Z = 1``
where ``lambda_Z`` is the leading eigenvalue of the induced operator with
weights ``exp(beta*W - Z*r)``. The root only exists when ``lambda`` still
exceeds 1 at ``Z0 = max(Z_c, beta*V(sigma))``; otherwise the pressure
sticks to ``Z0`` and no regular equilibrium state exists.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .exceptions import ConvergenceError, DomainError, GridResolutionError, TailError
from .inducing import _birkhoff_levels, holder_certificate, induced_W
from .model import PotentialSpec, SuspensionSystem
from .operator import (
    DEFAULT_GRID,
    InducedOperator,
    SpectralSolution,
    leading_eigen,
)

__all__ = [
    "REGULAR",
    "SINGULAR",
    "UNDETERMINED",
    "GibbsMeasure",
    "FlowMeasure",
    "PressureSolution",
    "PressureCurve",
    "solve_pressure",
    "pressure_curve",
    "gibbs_measure",
    "entropy_induced",
    "entropy_crosscheck",
    "abramov_lift",
    "periodic_lower_bound",
    "periodic_bernoulli",
    "mme",
    "maximizing_value_A",
    "periodic_point",
    "periodic_free_energy",
    "bernoulli_free_energy",
]

REGULAR = "regular"
SINGULAR = "singular-dominated"
UNDETERMINED = "undetermined"


# --------------------------------------------------------------------------
# Gibbs measure

@dataclass(frozen=True, eq=False)
class GibbsMeasure:
    """``mu = H nu`` with its cylinder functional.

    Cylinder masses come from the discretized chain,
    ``mu(C_w) = lam^-n  nu . M_{w_n} ... M_{w_1} H`` where ``M_a`` is the
    branch-``a`` part of the operator matrix. Since ``sum_a nu M_a = lam nu``
    the masses of the children of a cylinder add up to its own mass up to
    the dual eigen-residual.
    """

    spectral: SpectralSolution = field(repr=False)
    depth: int
    K_gibbs: float
    max_depth: int

    @property
    def system(self):
        return self.spectral.system

    def _phi(self):
        sol = self.spectral
        sys, pot = sol.system, sol.potential
        return lambda y, br: sol.beta * induced_W(sys, pot, y, br) - sol.Z * sys.roof(br, y)

    def _branch_step(self, a, U):
        # M_a applied to every row of U
        op = self.spectral.operator
        w = op.weights(self.spectral.beta, self.spectral.Z)[a - 1]
        k, th = op._k[a - 1], op._theta[a - 1]
        return w * (U[:, k] * (1.0 - th) + U[:, k + 1] * th)

    def _chain(self, depth, cutoff):
        """Words of ``depth`` with the rows ``M_{w_n} ... M_{w_1} H``."""
        words = [()]
        U = self.spectral.H.values[None, :]
        for _ in range(depth):
            U = np.concatenate([self._branch_step(a, U) for a in range(1, cutoff + 1)])
            words = [w + (a,) for a in range(1, cutoff + 1) for w in words]
        return words, U

    def cylinder_table(self, depth=None, cutoff=None):
        """All cylinders of ``depth`` over branches ``1..cutoff``.

        Returns
        -------
        words : list of tuple
        measure : ndarray
        birkhoff : ndarray
            ``S_n Phi`` at the cylinder midpoints (images of the base midpoint).
        """
        sol = self.spectral
        depth = self.depth if depth is None else int(depth)
        cutoff = _gibbs_cutoff(sol, cutoff)
        words, U = self._chain(depth, cutoff)
        measure = U @ sol.nu / sol.lam ** depth
        mid = 0.5 * (sol.H.nodes[0] + sol.H.nodes[-1])
        bwords, _, sums = _birkhoff_levels(sol.system, self._phi(), depth, cutoff, [mid])
        birk = dict(zip(bwords, sums[:, 0]))
        return words, measure, np.array([birk[w] for w in words])

    def cylinder_measure(self, word) -> float:
        sol = self.spectral
        word = tuple(int(i) for i in word)
        for i in word:
            sol.system.family.check_index(i)
            if i > sol.cutoff:
                raise DomainError(f"branch {i} lies in the analytic tail (cutoff {sol.cutoff})")
        if not word:
            return float(sol.integrate("one"))
        U = sol.H.values[None, :]
        for a in word:
            U = self._branch_step(a, U)
        return float(U[0] @ sol.nu / sol.lam ** len(word))

    def gibbs_ratios(self, depth=None, cutoff=None):
        """``log(mu(C) lam^n / exp(S_n Phi(rep)))`` for every cylinder of ``depth``."""
        depth = self.depth if depth is None else int(depth)
        words, measure, birk = self.cylinder_table(depth, cutoff)
        return np.log(measure) + depth * math.log(self.spectral.lam) - birk

    def additivity_residual(self, depth=None, cutoff=None) -> float:
        """Max ``|mu(C_w) - sum_a mu(C_wa)|`` over words ``w`` of ``depth - 1``.

        Children run over every explicit branch of the operator; on countable
        systems the analytic tail class (mass sent to the cusp node) is the
        last child.
        """
        depth = self.depth if depth is None else int(depth)
        if depth < 2:
            raise ValueError("additivity needs depth >= 2")
        sol = self.spectral
        words, U = self._chain(depth - 1, _gibbs_cutoff(sol, cutoff))
        parent = U @ sol.nu / sol.lam ** (depth - 1)
        children = np.zeros(len(words))
        for a in range(1, sol.cutoff + 1):
            children += self._branch_step(a, U) @ sol.nu
        tail = sol.tail()
        if tail.mass:
            children += U[:, 0] * float(np.dot(sol.nu, np.broadcast_to(tail.mass, sol.nu.shape)))
        children /= sol.lam ** depth
        return float(np.max(np.abs(parent - children)))


def _gibbs_cutoff(sol, cutoff):
    if sol.system.countable:
        return int(min(cutoff or 4, sol.cutoff))
    return sol.system.n_branches


def _min_cylinder_length(system, depth, cutoff):
    lo, hi = system.base.lo, system.base.hi
    zero = lambda y, br: np.zeros_like(y)  # noqa: E731
    _, ends, _ = _birkhoff_levels(system, zero, depth, cutoff, [lo, hi])
    return float(np.min(np.abs(ends[:, 1] - ends[:, 0])))


def _resolved_depth(system, spacing, cutoff, limit=64):
    d = 0
    while d < limit and _min_cylinder_length(system, d + 1, cutoff) >= spacing:
        d += 1
    return d


def gibbs_measure(spectral: SpectralSolution, depth: int, cutoff=None) -> GibbsMeasure:
    """Cylinder-measure functional of ``mu = H nu`` up to ``depth``.

    ``K_gibbs`` bounds ``|log(mu(C) lam^n) - S_n Phi(rep)|``: the variation of
    ``S_n Phi`` inside a cylinder (from the Hoelder certificate, or the
    operator's distortion constant if larger) plus ``max |log H|``.

    Raises
    ------
    GridResolutionError
        Some cylinder of ``depth`` is thinner than the grid spacing;
        ``err.max_depth`` is the deepest resolved level.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    sys = spectral.system
    cutoff = _gibbs_cutoff(spectral, cutoff)
    spacing = float(spectral.H.nodes[1] - spectral.H.nodes[0])
    max_depth = _resolved_depth(sys, spacing, cutoff)
    if depth > max_depth:
        raise GridResolutionError(
            f"depth-{depth} cylinders are thinner than the grid spacing {spacing:.3g}; "
            f"the grid resolves depth <= {max_depth}", max_depth=max_depth)
    cert = holder_certificate(sys, spectral.potential, depth, cutoff=cutoff, beta=spectral.beta)
    span = sys.base.length ** cert["roof"].gamma
    var = (cert["W"].kappa + abs(spectral.Z) * cert["roof"].kappa) * span
    logh = float(np.max(np.abs(np.log(spectral.H.values))))
    k = max(var, spectral.K_distortion) + logh + 1e-9
    return GibbsMeasure(spectral, int(depth), float(k), int(max_depth))


def entropy_induced(gibbs: GibbsMeasure | SpectralSolution) -> float:
    """``h(mu) = log lam - int (beta W - Z r) dmu`` for the base map."""
    sol = gibbs.spectral if isinstance(gibbs, GibbsMeasure) else gibbs
    phi = sol.beta * sol.integrate("W") - sol.Z * sol.integrate("r")
    return float(math.log(sol.lam) - phi)


def _aitken(seq):
    s0, s1, s2 = seq[-3:]
    den = s2 - 2 * s1 + s0
    if abs(den) <= 1e-14 * max(1.0, abs(s2)):
        return s2
    return s2 - (s2 - s1) ** 2 / den


def entropy_crosscheck(gibbs: GibbsMeasure, tol=1e-3):
    """Compare ``entropy_induced`` with block entropies of the cylinder measure.

    The conditional block entropies ``H_n - H_{n-1}`` (``H_n`` the Shannon
    entropy of the depth-``n`` partition) decrease to ``h``; Aitken's
    extrapolation of the last three gives the estimate. Countable systems
    are skipped (their partitions are truncated).

    Returns
    -------
    dict with keys ``entropy``, ``estimate``, ``difference``, ``passed``.
    """
    h = entropy_induced(gibbs)
    if gibbs.system.countable:
        return {"entropy": h, "estimate": math.nan, "difference": math.nan, "passed": None}
    depth = min(gibbs.depth, gibbs.max_depth)
    if depth < 3:
        raise GridResolutionError("entropy cross-check needs depth >= 3", max_depth=gibbs.max_depth)
    blocks = [0.0]
    for n in range(1, depth + 1):
        _, m, _ = gibbs.cylinder_table(n)
        m = m[m > 0]
        blocks.append(float(-np.sum(m * np.log(m))))
    cond = np.diff(blocks)
    est = _aitken(cond)
    diff = abs(est - h)
    return {"entropy": h, "estimate": float(est), "difference": float(diff), "passed": bool(diff <= tol)}


# --------------------------------------------------------------------------
# Abramov lift

@dataclass(frozen=True, eq=False)
class FlowMeasure:
    """Flow-invariant lift of a base measure through the roof."""

    base: object = field(repr=False)
    mean_roof: float
    entropy_induced: float
    entropy_flow: float
    free_energy: float
    integral_W: float
    identity_residual: float

    @property
    def normalization(self) -> float:
        return 1.0 / self.mean_roof


def abramov_lift(gibbs, system: SuspensionSystem | None = None, potential: PotentialSpec | None = None,
                 beta: float | None = None) -> FlowMeasure:
    """Lift ``mu`` to the suspension.

    ``entropy_flow = h(mu) / int r dmu`` and the free energy is
    ``entropy_flow + beta int W dmu / int r dmu``. The residual of the
    identity ``free_energy = Z + log(lam) / int r dmu`` is reported.

    Raises
    ------
    TailError
        ``int r dmu`` is infinite.
    """
    sol = gibbs.spectral if isinstance(gibbs, GibbsMeasure) else gibbs
    beta = sol.beta if beta is None else beta
    total = sol.integrate("one")
    m = sol.integrate("r") / total
    if not math.isfinite(m):
        raise TailError("roof is not integrable under the Gibbs measure")
    iw = sol.integrate("W") / total
    h = entropy_induced(sol)
    hf = h / m
    fe = hf + beta * iw / m
    res = abs(fe - (sol.Z + math.log(sol.lam) / m))
    return FlowMeasure(gibbs, m, h, hf, fe, iw, res)


# --------------------------------------------------------------------------
# Pressure

@dataclass(frozen=True, eq=False)
class PressureSolution:
    """``(Z, spectral, regime)`` with the diagnostics of the solve."""

    Z: float
    spectral: SpectralSolution = field(repr=False)
    regime: str
    margin: float
    zc: float
    z0: float
    lambda_at_z0: float
    evaluations: int = 0

    def __iter__(self):
        return iter((self.Z, self.spectral, self.regime))


class _LambdaCache:
    def __init__(self, op, beta, tol):
        self.op, self.beta, self.tol = op, beta, tol
        self.sols = {}

    def sol(self, z):
        z = float(z)
        if z not in self.sols:
            self.sols[z] = leading_eigen(self.op.system, self.op.potential, self.beta, z,
                                         tol=self.tol, operator=self.op)
        return self.sols[z]

    def lam(self, z):
        try:
            return self.sol(z).lam
        except TailError:
            return math.inf


def _singular_value(potential):
    return -math.inf if potential.singular_value is None else float(potential.singular_value)


def solve_pressure(system: SuspensionSystem, potential: PotentialSpec, beta: float, tol: float = 1e-10,
                   grid=DEFAULT_GRID, cutoff=None, operator: InducedOperator | None = None
                   ) -> PressureSolution:
    """Pressure ``P(beta)`` of the flow for the potential ``beta*V``.

    Regular regime: the root of ``lambda_Z = 1``, bracketed above
    ``Z0 = max(Z_c, beta*V(sigma))`` and refined by Brent's method, with
    ``|lambda - 1| <= tol``. Singular-dominated regime (``lambda(Z0) <= 1``):
    ``P = Z0`` and ``margin = 1 - lambda(Z0)``.

    Raises
    ------
    ConvergenceError
        The root cannot be bracketed.
    """
    op = operator or InducedOperator(system, potential, grid, cutoff)
    cache = _LambdaCache(op, beta, tol)
    zc = op.critical_abscissa(beta)
    z0 = max(zc, beta * _singular_value(potential))
    lam0 = math.nan
    if math.isfinite(z0):
        lam0 = cache.lam(z0)
        if lam0 <= 1.0:
            sol = cache.sol(z0)
            return PressureSolution(z0, sol, SINGULAR, 1.0 - lam0, zc, z0, lam0, len(cache.sols))
        lo, hi = _bracket_above(cache, z0, lam0)
    else:
        lo, hi = _bracket_free(cache)
    f = lambda z: math.log(cache.lam(z))  # noqa: E731
    z = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    sol = cache.sol(z)
    if abs(sol.lam - 1.0) > tol:
        raise ConvergenceError(f"pressure root has |lambda - 1| = {abs(sol.lam - 1):.3g} > {tol:.3g}")
    return PressureSolution(float(z), sol, REGULAR, sol.lam - 1.0, zc, z0, lam0, len(cache.sols))


def _regime_at(op, potential, beta, tol):
    """Regime tag from ``lambda`` at ``Z0`` alone, without the root search."""
    z0 = max(op.critical_abscissa(beta), beta * _singular_value(potential))
    if not math.isfinite(z0):
        return REGULAR
    lam0 = _LambdaCache(op, beta, tol).lam(z0)
    return REGULAR if lam0 > 1.0 else SINGULAR


def _bracket_above(cache, z0, lam0, max_halvings=60, max_doublings=60):
    if math.isfinite(lam0):
        lo = z0
    else:
        delta = 1.0
        for _ in range(max_halvings):
            if cache.lam(z0 + delta) > 1.0:
                break
            delta *= 0.5
        else:
            raise ConvergenceError("cannot bracket the pressure root above the critical abscissa")
        lo = z0 + delta
    step = 1.0
    hi = lo + step
    for _ in range(max_doublings):
        if cache.lam(hi) < 1.0:
            return lo, hi
        lo, step = hi, 2 * step
        hi = lo + step
    raise ConvergenceError("cannot bracket the pressure root from above")


def _bracket_free(cache, max_doublings=60):
    a = 0.0
    step = 1.0
    if cache.lam(a) > 1.0:
        for _ in range(max_doublings):
            b = a + step
            if cache.lam(b) < 1.0:
                return a, b
            a, step = b, 2 * step
    else:
        b = a
        for _ in range(max_doublings):
            a = b - step
            if cache.lam(a) > 1.0:
                return a, b
            b, step = a, 2 * step
    raise ConvergenceError("cannot bracket the pressure root")


@dataclass(frozen=True, eq=False)
class PressureCurve:
    """Sampled pressure function with regime tags and invariant checks."""

    betas: np.ndarray
    pressure: np.ndarray
    zc: np.ndarray
    regime: tuple
    lambda_margin: np.ndarray
    mean_roof: np.ndarray
    entropy_flow: np.ndarray
    beta_c: float | None
    beta_c_interval: tuple | None
    asymptote_slope: float
    asymptote_candidates: dict
    checks: dict = field(default_factory=dict)
    solutions: tuple = ()

    def rows(self):
        for k in range(len(self.betas)):
            yield {"beta": float(self.betas[k]), "pressure": float(self.pressure[k]),
                   "zc": float(self.zc[k]), "regime": self.regime[k],
                   "lambda_margin": float(self.lambda_margin[k]),
                   "mean_roof": float(self.mean_roof[k]), "entropy_flow": float(self.entropy_flow[k])}


def _flow_stats(sol):
    if sol.regime != REGULAR:
        return math.nan, math.nan
    try:
        lift = abramov_lift(sol.spectral)
    except TailError:
        return math.inf, 0.0
    return lift.mean_roof, lift.entropy_flow


def pressure_curve(system: SuspensionSystem, potential: PotentialSpec, betas, tol: float = 1e-10,
                   grid=DEFAULT_GRID, cutoff=None, workers: int = 1, beta_c_tol: float = 1e-4,
                   convexity_tol: float = 1e-8, A=None) -> PressureCurve:
    """``P(beta)`` on an increasing grid of nonnegative ``betas``.

    When the regime switches from regular to singular-dominated, ``beta_c``
    is bisected between the neighbouring grid points down to ``beta_c_tol``.
    ``checks`` records convexity on the regular part, ``P >= beta*A``,
    ``P >= Z_c`` and the number of regime switches.
    """
    betas = np.asarray(betas, dtype=float)
    if betas.ndim != 1 or betas.size == 0:
        raise ValueError("beta grid must be a non-empty 1-d sequence")
    if np.any(betas < 0) or np.any(np.diff(betas) <= 0):
        raise ValueError("beta grid must be nonnegative and strictly increasing")
    op = InducedOperator(system, potential, grid, cutoff)
    solve = lambda b: solve_pressure(system, potential, float(b), tol, operator=op)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            sols = list(ex.map(solve, betas))
        stats = list(map(_flow_stats, sols))
    else:
        sols = [solve(b) for b in betas]
        stats = [_flow_stats(s) for s in sols]
    P = np.array([s.Z for s in sols])
    zc = np.array([s.zc for s in sols])
    regime = tuple(s.regime for s in sols)
    margin = np.array([s.margin for s in sols])
    switches = sum(regime[k] != regime[k + 1] for k in range(len(regime) - 1))

    beta_c = interval = None
    for k in range(len(regime) - 1):
        if regime[k] == REGULAR and regime[k + 1] == SINGULAR:
            a, b = float(betas[k]), float(betas[k + 1])
            while b - a > beta_c_tol:
                mid = 0.5 * (a + b)
                if _regime_at(op, potential, mid, tol) == REGULAR:
                    a = mid
                else:
                    b = mid
            beta_c, interval = 0.5 * (a + b), (a, b)
            break

    if A is None:
        A = maximizing_value_A(system, potential)
    per = maximizing_value_A(system, potential, method="periodic-only")
    sing = _singular_value(potential)
    candidates = {"singular": (sing, 0.0),
                  "periodic": (per, float(P[-1] - betas[-1] * per))}

    reg = np.array([r == REGULAR for r in regime])
    second = _second_differences(betas, P, reg)
    checks = {
        "convexity_min_second_difference": float(second.min(initial=math.inf)),
        "convex": bool(np.all(second >= -convexity_tol)),
        "above_asymptote": bool(np.all(P >= betas * A - 1e-8)),
        "above_zc": bool(np.all(P >= zc - 1e-8)),
        "regime_switches": int(switches),
        "single_switch": switches <= 1,
        "singular_equilibrium_possible": bool(sing >= per),
    }
    return PressureCurve(betas, P, zc, regime, margin, np.array([s[0] for s in stats]),
                         np.array([s[1] for s in stats]), beta_c, interval, float(A), candidates,
                         checks, tuple(sols))


def _second_differences(x, y, mask):
    """Divided second differences on runs of consecutive masked points."""
    out = []
    for k in range(1, len(x) - 1):
        if mask[k - 1] and mask[k] and mask[k + 1]:
            s1 = (y[k] - y[k - 1]) / (x[k] - x[k - 1])
            s2 = (y[k + 1] - y[k]) / (x[k + 1] - x[k])
            out.append((s2 - s1) * 0.5 * (x[k + 1] - x[k - 1]))
    return np.array(out)


# --------------------------------------------------------------------------
# Periodic orbits and test measures

def periodic_point(system: SuspensionSystem, word, tol=1e-15, max_iter=10_000) -> float:
    """Fixed point of ``psi_{w_1} o ... o psi_{w_n}`` (start of the periodic orbit)."""
    word = tuple(int(i) for i in word)
    if len(word) == 1:
        return system.family.fixed_point(word[0])
    x = 0.5 * (system.base.lo + system.base.hi)
    for _ in range(max_iter):
        y = x
        for i in reversed(word):
            y = float(system.family.inverse(i, y))
        if abs(y - x) <= tol * max(1.0, abs(x)):
            return y
        x = y
    return x


def _orbit_sums(system, potential, word):
    """``(S_n W, r^n)`` along the periodic orbit of ``word``."""
    y = periodic_point(system, word)
    ys = []
    for i in reversed(word):
        y = float(system.family.inverse(i, y))
        ys.append(y)
    ys = np.array(ys[::-1])
    br = np.array(word)
    return float(np.sum(induced_W(system, potential, ys, br))), float(np.sum(system.roof(br, ys)))


def periodic_free_energy(system: SuspensionSystem, potential: PotentialSpec, beta: float, word) -> float:
    """Free energy ``beta * S_n W / r^n`` of the flow measure on a periodic orbit."""
    w, r = _orbit_sums(system, potential, word)
    return beta * w / r


def _barycenter(system, p, iters=200):
    """Mean ``b`` of the self-similar measure: ``b = sum p_i psi_i(b)``."""
    b = 0.5 * (system.base.lo + system.base.hi)
    for _ in range(iters):
        nb = sum(pi * float(system.family.inverse(i, b)) for i, pi in enumerate(p, 1) if pi > 0)
        if abs(nb - b) <= 1e-16 * max(1.0, abs(b)):
            return nb
        b = nb
    return b


def _bernoulli_points(system, p, depth):
    # images of the barycenter are the barycenters of the cylinder measures,
    # so integrals of affine functions come out exact
    support = [(i, float(pi)) for i, pi in enumerate(p, 1) if pi > 0]
    x = np.array([_barycenter(system, p)])
    m = np.ones(1)
    for _ in range(depth):
        x = np.concatenate([system.family.inverse(i, x) for i, _ in support])
        m = np.concatenate([pi * m for _, pi in support])
    return x, m


def _bernoulli_stats(system, potential, beta, p, max_points=1 << 14):
    k = p.size
    nzk = int(np.count_nonzero(p))
    depth = max(1, int(math.log(max_points) / math.log(max(nzk, 2))))
    if nzk == 1:
        depth = 1
    x, m = _bernoulli_points(system, p, depth)
    ent = -float(np.sum(p[p > 0] * np.log(p[p > 0])))
    iw = ir = 0.0
    for i in range(1, k + 1):
        if p[i - 1] == 0:
            continue
        y = system.family.inverse(i, x)
        br = np.full(y.shape, i)
        iw += p[i - 1] * float(np.dot(m, induced_W(system, potential, y, br)))
        ir += p[i - 1] * float(np.dot(m, system.roof(br, y)))
    return (ent + beta * iw) / ir, ir


def bernoulli_free_energy(system: SuspensionSystem, potential: PotentialSpec, beta: float, p,
                          max_points=1 << 14) -> float:
    """Flow free energy of the Bernoulli measure with branch weights ``p``.

    The stationary distribution of the base point is the self-similar
    measure ``m = sum p_i (psi_i)_* m``; integrals against it are taken on
    the images of its barycenter under all words of the largest depth with
    at most ``max_points`` words.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("p must be a probability vector")
    if p.size > system.n_branches:
        raise DomainError("more weights than branches")
    return _bernoulli_stats(system, potential, beta, p, max_points)[0]


@dataclass(frozen=True)
class PeriodicBernoulli:
    """Bernoulli measure of one return class.

    ``value`` is the flow free energy of the Bernoulli measure itself and
    ``fixed_point_value`` the cheaper proxy with ``W`` and ``r`` frozen at
    the branch fixed points; only the former is a certified lower bound.
    """

    value: float
    n: int
    branches: tuple
    weights: tuple
    entropy: float
    mean_roof: float
    fixed_point_value: float


def periodic_bernoulli(system: SuspensionSystem, potential: PotentialSpec, beta: float, n: int
                       ) -> PeriodicBernoulli:
    """Bernoulli measure on the 1-cylinders whose fixed points have ``floor(r) = n``.

    Weights ``p_i ~ exp(A_i)`` with ``A_i = beta * W(xi_i)`` at the fixed
    points ``xi_i``. The measure is invariant, so its free energy is at most
    ``P(beta)``.

    Raises
    ------
    DomainError
        No branch has ``floor(r) = n`` at its fixed point.
    """
    n = int(n)
    if system.countable:
        from .operator import _branches_for_roof
        n_br = _branches_for_roof(system, n + 1)
    else:
        n_br = system.n_branches
    br = np.arange(1, n_br + 1)
    xi = np.array([system.family.fixed_point(int(i)) for i in br])
    r = system.roof(br, xi)
    sel = np.floor(r).astype(int) == n
    if not np.any(sel):
        raise DomainError(f"no branch has floor(roof) = {n}")
    br, xi, r = br[sel], xi[sel], r[sel]
    A = beta * induced_W(system, potential, xi, br)
    a = A - A.max()
    p = np.exp(a) / np.exp(a).sum()
    nz = p > 0
    ent = -float(np.sum(p[nz] * np.log(p[nz])))
    proxy = (ent + float(np.dot(p, A))) / float(np.dot(p, r))
    full = np.zeros(int(br.max()))
    full[br - 1] = p
    val, mr = _bernoulli_stats(system, potential, beta, full)
    return PeriodicBernoulli(val, n, tuple(int(i) for i in br), tuple(p.tolist()), ent, mr, proxy)


def periodic_lower_bound(system: SuspensionSystem, potential: PotentialSpec, beta: float, n: int) -> float:
    """Flow free energy of :func:`periodic_bernoulli`; a lower bound for ``P(beta)``."""
    return periodic_bernoulli(system, potential, beta, n).value


def _periodic_words(n_branch, depth):
    """Primitive-enough periodic words up to ``depth`` (cyclic duplicates kept)."""
    for d in range(1, depth + 1):
        for k in range(n_branch ** d):
            w = []
            for _ in range(d):
                k, r = divmod(k, n_branch)
                w.append(r + 1)
            yield tuple(w)


def maximizing_value_A(system: SuspensionSystem, potential: PotentialSpec, method="periodic-sweep",
                       depth=None, cutoff=None) -> float:
    """``A(V)``: the largest flow average of ``V`` over invariant measures.

    ``"singularity"`` returns ``V(sigma)``; ``"periodic-sweep"`` returns the
    max of ``V(sigma)`` and ``S_n W / r^n`` over periodic words up to
    ``depth``; ``"periodic-only"`` omits ``V(sigma)``.
    """
    sing = _singular_value(potential)
    if method == "singularity":
        return sing
    if method not in ("periodic-sweep", "periodic-only"):
        raise ValueError("method must be 'singularity', 'periodic-sweep' or 'periodic-only'")
    if system.countable:
        depth = 3 if depth is None else depth
        nb = 12 if cutoff is None else cutoff
    else:
        nb = system.n_branches
        depth = depth or max(1, min(6, int(math.log(4096) / math.log(max(nb, 2)))))
    best = -math.inf
    for w in _periodic_words(nb, depth):
        s, r = _orbit_sums(system, potential, w)
        best = max(best, s / r)
    return float(best if method == "periodic-only" else max(best, sing))


def mme(system: SuspensionSystem, grid=DEFAULT_GRID, cutoff=None, tol=1e-10):
    """Topological entropy of the semiflow and its measure of maximal entropy.

    Returns
    -------
    h_top : float
    lift : FlowMeasure
    """
    zero = PotentialSpec.constant(0.0)
    sol = solve_pressure(system, zero, 0.0, tol, grid, cutoff)
    if sol.regime != REGULAR:
        raise ConvergenceError("the zero potential produced a singular-dominated solve")
    return sol.Z, abramov_lift(sol.spectral)
