"""The induced transfer operator ``L_Z`` on a uniform grid.

``(L_Z phi)(x) = sum_i exp(beta*W(y_i) - Z*r(y_i)) phi(y_i)`` with
``y_i = psi_i(x)``. Functions are stored by their values at uniformly spaced
nodes and evaluated between nodes by linear interpolation, so ``L_Z``
becomes a nonnegative ``grid x grid`` matrix. For countable families the
branches beyond the cutoff are summed in closed form; since their images
shrink onto the cusp their contribution is attached to the cusp node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exceptions import ConvergenceError, ModelError, TailError
from .families import TailSums
from .inducing import induced_W
from .model import PotentialSpec, SuspensionSystem

__all__ = [
    "DiscretizedFunction",
    "SpectralSolution",
    "ZcEstimate",
    "InducedOperator",
    "apply_operator",
    "estimate_Zc",
    "leading_eigen",
    "distortion_check",
    "eigen_derivative",
    "DEFAULT_GRID",
    "DEFAULT_COUNTABLE_CUTOFF",
]

DEFAULT_GRID = 512
DEFAULT_COUNTABLE_CUTOFF = 256


@dataclass(frozen=True, eq=False)
class DiscretizedFunction:
    """Node values on a uniform grid, linear in between."""

    nodes: np.ndarray
    values: np.ndarray
    interp: str = "linear"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.interp != "linear":
            raise ModelError(f"unsupported interpolation rule {self.interp!r}")
        if self.nodes.shape != self.values.shape or self.nodes.ndim != 1:
            raise ModelError("nodes and values must be 1-d arrays of equal length")
        if not np.all(np.diff(self.nodes) > 0):
            raise ModelError("nodes must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ModelError("function values must be finite")

    def __call__(self, x):
        return np.interp(x, self.nodes, self.values)

    @classmethod
    def constant(cls, system, c=1.0, grid=DEFAULT_GRID):
        nodes = _grid(system, grid)
        return cls(nodes, np.full(grid, float(c)))

    @classmethod
    def sample(cls, system, func, grid=DEFAULT_GRID):
        nodes = _grid(system, grid)
        return cls(nodes, np.asarray(func(nodes), dtype=float))


@dataclass(frozen=True, eq=False)
class SpectralSolution:
    """Leading eigen-triple of ``L_Z``.

    ``H`` is normalised so that ``sum(nu * H.values) == 1`` and ``nu`` is a
    probability vector on the grid nodes. ``residual`` and ``dual_residual``
    are ``|L H - lam H|_inf / (lam |H|_inf)`` and the same for ``nu``.
    """

    beta: float
    Z: float
    lam: float
    H: DiscretizedFunction = field(repr=False)
    nu: np.ndarray = field(repr=False)
    residual: float
    dual_residual: float
    K_distortion: float
    iterations: int
    operator: "InducedOperator" = field(repr=False)

    @property
    def system(self) -> SuspensionSystem:
        return self.operator.system

    @property
    def potential(self) -> PotentialSpec:
        return self.operator.potential

    @property
    def grid(self) -> int:
        return self.operator.grid

    @property
    def cutoff(self) -> int:
        return self.operator.cutoff

    def tail(self) -> TailSums:
        return self.operator.tail(self.beta, self.Z)

    def one_step(self):
        """Discrete form of ``mu = H nu`` through one application of ``L_Z``.

        Since ``L*nu = lam nu``, ``int f dmu = lam^-1 int L(H f) dnu``.
        Returns ``(points, branches, weights, tail_weight)``: ``weights[i, j]``
        is the mass of ``psi_{i+1}(x_j)`` and ``tail_weight`` multiplies the
        closed-form tail sums (the tail branches sit at the cusp).
        """
        op = self.operator
        w = op.weights(self.beta, self.Z)
        hvals = self.H(op.points)
        mass = w * hvals * self.nu[None, :] / self.lam
        tail_w = 0.0
        if op.countable:
            tail_w = float(self.nu.sum() * self.H.values[0] / self.lam)
        return op.points, op.branches, mass, tail_w

    def integrate(self, what):
        """``int f dmu`` for ``what`` in {"one", "r", "W"} or a callable ``f(y, branch)``.

        The callable form ignores the branches beyond the cutoff.
        """
        pts, br, mass, tail_w = self.one_step()
        tail = self.tail()
        if callable(what):
            return float(np.sum(mass * what(pts, br)))
        op = self.operator
        if what == "one":
            return float(mass.sum() + tail_w * tail.mass)
        if what == "r":
            return float(np.sum(mass * op.roofs) + tail_w * tail.mass_r)
        if what == "W":
            return float(np.sum(mass * op.W) + tail_w * tail.mass_w)
        raise ValueError(f"unknown integrand {what!r}")

    def nu_integral(self, func):
        """``int f dnu`` for a function of the base coordinate."""
        return float(np.dot(self.nu, func(self.H.nodes)))


@dataclass(frozen=True)
class ZcEstimate:
    """Root-test estimate of the critical abscissa.

    ``partial_exponents`` holds ``(n, (1/n) log sum_{floor(r)=n} e^{beta W})``.
    An ``unbounded`` estimate (finite systems) has ``value = -inf``.
    """

    value: float
    n_max: int
    partial_exponents: tuple
    method: str
    spread: float
    unbounded: bool = False


def _grid(system, grid):
    grid = int(grid)
    if grid < 16:
        raise ModelError("grid size must be >= 16")
    return np.linspace(system.base.lo, system.base.hi, grid)


def _check_potential(system, potential):
    if system.countable:
        if not potential.is_affine or potential.coefficients.get("t", 0.0) != 0:
            raise ModelError("countable families need an affine potential without a t term")


class InducedOperator:
    """Cached geometry of ``L_Z``: the ``(beta, Z)``-independent part.

    Parameters
    ----------
    system, potential
    grid : int
        Number of uniformly spaced nodes.
    cutoff : int, optional
        Number of explicit branches (countable families only).
    """

    def __init__(self, system: SuspensionSystem, potential: PotentialSpec, grid=DEFAULT_GRID,
                 cutoff=None):
        _check_potential(system, potential)
        self.system = system
        self.potential = potential
        self.grid = int(grid)
        self.nodes = _grid(system, grid)
        if system.countable:
            cutoff = DEFAULT_COUNTABLE_CUTOFF if cutoff is None else int(cutoff)
            if cutoff < 1:
                raise ModelError("branch cutoff must be >= 1")
        else:
            cutoff = system.n_branches if cutoff is None else min(int(cutoff), system.n_branches)
            if cutoff < system.n_branches:
                raise TailError(f"finite system has {system.n_branches} branches; cutoff {cutoff} "
                                f"drops some of them", required=system.n_branches)
        self.cutoff = int(cutoff)
        self.countable = system.countable
        br = np.arange(1, self.cutoff + 1)
        self.branches = np.broadcast_to(br[:, None], (self.cutoff, self.grid))
        self.points = np.stack([system.family.inverse(int(i), self.nodes) for i in br])
        self.roofs = system.roof(self.branches, self.points)
        self.W = induced_W(system, potential, self.points, self.branches)
        h = self.nodes[1] - self.nodes[0]
        pos = (self.points - self.nodes[0]) / h
        k = np.clip(np.floor(pos).astype(int), 0, self.grid - 2)
        self._k = k
        self._theta = np.clip(pos - k, 0.0, 1.0)
        self._rows = np.broadcast_to(np.arange(self.grid)[None, :], k.shape)
        self._tails = {}

    def tail(self, beta, Z) -> TailSums:
        if not self.countable:
            return TailSums()
        key = (float(beta), float(Z))
        if key not in self._tails:
            self._tails[key] = self.system.family.tail(self.cutoff, beta, Z, self.potential)
        return self._tails[key]

    def critical_abscissa(self, beta):
        return self.system.family.critical_abscissa(beta, self.potential)

    def weights(self, beta, Z):
        """``exp(beta*W - Z*r)`` at the explicit preimages, shape ``(cutoff, grid)``."""
        return np.exp(beta * self.W - Z * self.roofs)

    def matrix(self, beta, Z):
        """Dense matrix of ``L_Z`` acting on node values.

        Raises
        ------
        TailError
            If the tail sum diverges; ``err.required`` is the critical abscissa.
        """
        tail = self.tail(beta, Z)
        if not tail.finite:
            zc = self.critical_abscissa(beta)
            raise TailError(f"tail of L_Z diverges at Z={Z:.17g}; need Z > {zc:.17g}", required=zc)
        w = self.weights(beta, Z)
        n = self.grid
        flat_rows = self._rows.ravel()
        idx = flat_rows * n + self._k.ravel()
        m = np.bincount(idx, weights=(w * (1.0 - self._theta)).ravel(), minlength=n * n)
        m += np.bincount(idx + 1, weights=(w * self._theta).ravel(), minlength=n * n)
        m = m.reshape(n, n)
        if tail.mass:
            m[:, 0] += tail.mass
        return m

    def apply(self, beta, Z, phi: DiscretizedFunction) -> DiscretizedFunction:
        vals = self.matrix(beta, Z) @ phi.values
        tail = self.tail(beta, Z)
        meta = {"cutoff": self.cutoff, "tail_mass": tail.mass, "tail_bound": tail.bound,
                "tail_ratio": tail.bound / max(float(self.weights(beta, Z).sum(axis=0).min()), 1e-300)}
        return DiscretizedFunction(self.nodes, vals, phi.interp, meta)


def apply_operator(system: SuspensionSystem, potential: PotentialSpec, beta: float, Z: float,
                   phi: DiscretizedFunction, cutoff=None) -> DiscretizedFunction:
    """One application of ``L_Z`` to ``phi``.

    ``phi`` fixes the grid. The result's ``metadata`` records the cutoff and
    the closed-form tail (mass and certified bound).

    Raises
    ------
    TailError
        Divergent tail; ``err.required`` is the minimal admissible ``Z``.
    """
    op = InducedOperator(system, potential, grid=phi.nodes.size, cutoff=cutoff)
    if not np.allclose(op.nodes, phi.nodes, rtol=0, atol=1e-14 * system.base.length):
        raise ModelError("phi must live on the uniform grid of the base interval")
    return op.apply(beta, Z, phi)


def _power(m, v, tol, res_tol, max_iter, window=10):
    """Power iteration; returns ``(lam, v, iterations)`` with ``sum(v) == 1``.

    Stops when ``lam`` moved by at most ``tol`` (relative) over ``window``
    iterations and the eigen-residual of ``v`` is below ``res_tol``.
    """
    v = v / v.sum()
    hist = []
    for it in range(1, max_iter + 1):
        w = m @ v
        lam = float(w.sum())
        if not (lam > 0 and math.isfinite(lam)):
            raise ConvergenceError(f"power iteration produced lambda={lam!r}")
        res = float(np.max(np.abs(w - lam * v)) / (lam * np.max(v)))
        v = w / lam
        hist.append(lam)
        if len(hist) > window and abs(hist[-1] - hist[-1 - window]) <= tol * lam and res <= res_tol:
            return lam, v, it
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def leading_eigen(system: SuspensionSystem, potential: PotentialSpec, beta: float, Z: float,
                  grid=DEFAULT_GRID, tol=1e-10, cutoff=None, operator: InducedOperator | None = None,
                  max_iter=10_000, n_check=8) -> SpectralSolution:
    """Leading eigenvalue, eigenfunction and eigenmeasure of ``L_Z``.

    Power iteration on ``L_Z`` and on its transpose, stopped once ``lambda``
    moves by at most ``1e-12`` (relative) over 10 iterations.

    Raises
    ------
    ConvergenceError
        Budget exhausted, residual above ``tol`` or a non-positive ``H``.
    TailError
        ``Z`` at or below the critical abscissa.
    """
    op = operator or InducedOperator(system, potential, grid, cutoff)
    m = op.matrix(beta, Z)
    start = np.ones(op.grid)
    lam, h, it1 = _power(m, start, 1e-12, 0.1 * tol, max_iter)
    _, nu, it2 = _power(m.T, start, 1e-12, 0.1 * tol, max_iter)
    if np.any(h <= 0):
        raise ConvergenceError("eigenfunction has non-positive node values; refine the grid")
    h = h / float(np.dot(nu, h))
    residual = float(np.max(np.abs(m @ h - lam * h)) / (lam * np.max(h)))
    dual = float(np.max(np.abs(m.T @ nu - lam * nu)) / (lam * np.max(nu)))
    if residual > tol or dual > tol:
        raise ConvergenceError(f"eigen residual {max(residual, dual):.3g} exceeds tol {tol:.3g}")
    k = distortion_check(system, potential, beta, Z, n_check, operator=op, matrix=m)
    return SpectralSolution(float(beta), float(Z), lam, DiscretizedFunction(op.nodes, h), nu,
                            residual, dual, float(max(k)), max(it1, it2), op)


def distortion_check(system, potential, beta, Z, n_check=10, grid=DEFAULT_GRID, cutoff=None,
                     operator=None, matrix=None):
    """``K(n) = max_{x,y} |log L^n 1(x) - log L^n 1(y)|`` over node pairs, ``n = 1..n_check``."""
    op = operator or InducedOperator(system, potential, grid, cutoff)
    m = op.matrix(beta, Z) if matrix is None else matrix
    v = np.ones(op.grid)
    out = []
    for _ in range(int(n_check)):
        v = m @ v
        lv = np.log(v)
        out.append(float(lv.max() - lv.min()))
        v = v / v.max()
    return out


def eigen_derivative(sol: SpectralSolution, measure="mu"):
    """Derivative of ``lambda`` in ``Z`` from the eigen-data.

    ``measure="mu"`` gives ``-lambda * int r dmu`` with ``mu = H nu``, which
    is exact. ``measure="nu"`` gives ``-lambda * int r dnu``; the two agree
    when ``H`` is constant.
    """
    if measure == "mu":
        return -sol.lam * sol.integrate("r")
    if measure == "nu":
        op = sol.operator
        # r under nu: push nu through one step, since r lives on the preimages
        w = op.weights(sol.beta, sol.Z)
        tail = sol.tail()
        num = np.sum(w * op.roofs * sol.nu[None, :]) + sol.nu.sum() * tail.mass_r
        return -float(num)
    raise ValueError("measure must be 'mu' or 'nu'")


def _branches_for_roof(system, r_max, limit=1_000_000):
    """Smallest ``N`` such that every branch beyond ``N`` has roof ``> r_max``."""
    n = 1
    while system.family.roof_bounds(n)[0] <= r_max:
        n *= 2
        if n > limit:
            raise TailError("roof grows too slowly to reach the requested return time", required=None)
    lo, hi = n // 2, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if system.family.roof_bounds(mid)[0] <= r_max:
            lo = mid
        else:
            hi = mid
    return hi


def estimate_Zc(system: SuspensionSystem, potential: PotentialSpec, beta: float, n_max: int = 40,
                method: str = "fit", ref=None) -> ZcEstimate:
    """Root-test estimate of the critical abscissa of ``sum exp(beta W - Z r)``.

    One-step preimages of ``ref`` (default: base midpoint) are grouped by
    ``floor(r) = n`` and ``a_n = (1/n) log sum exp(beta W)`` is formed for
    ``n <= n_max``. ``method="limsup"`` returns the maximum of the last
    ``ceil(n_max/2)`` exponents; ``method="fit"`` extrapolates them by least
    squares to ``a_n = Z + c1 log(n)/n + c2/n``, which removes the
    polynomial and constant prefactors that bias the raw root test. The
    spread is ``max - min`` of the same tail exponents.

    Raises
    ------
    ValueError
        ``n_max < 3`` or unknown method.
    TailError
        Fewer than two return-time classes are populated near ``n_max``.
    """
    if n_max < 3:
        raise ValueError("n_max must be >= 3")
    if method not in ("fit", "limsup"):
        raise ValueError("method must be 'fit' or 'limsup'")
    if not system.countable:
        return ZcEstimate(-math.inf, int(n_max), (), method, 0.0, unbounded=True)
    _check_potential(system, potential)
    z = 0.5 * (system.base.lo + system.base.hi) if ref is None else float(ref)
    n_br = _branches_for_roof(system, n_max + 1)
    br = np.arange(1, n_br + 1)
    ys = np.array([float(system.family.inverse(int(i), z)) for i in br])
    r = system.roof(br, ys)
    logw = beta * induced_W(system, potential, ys, br)
    cls = np.floor(r).astype(int)
    pairs = []
    for n in range(1, n_max + 1):
        sel = cls == n
        if np.any(sel):
            pairs.append((n, float(logsumexp(logw[sel]) / n)))
    k = int(math.ceil(n_max / 2))
    tail = [(n, a) for n, a in pairs if n > n_max - k]
    if len(tail) < 2:
        raise TailError(f"too few return-time classes in ({n_max - k}, {n_max}]; "
                        f"increase n_max", required=2 * n_max)
    ns = np.array([p[0] for p in tail], dtype=float)
    an = np.array([p[1] for p in tail])
    if method == "limsup":
        value = float(an.max())
    else:
        design = np.column_stack([np.ones_like(ns), np.log(ns) / ns, 1.0 / ns])
        coef, *_ = np.linalg.lstsq(design, an, rcond=None)
        value = float(coef[0])
    return ZcEstimate(value, int(n_max), tuple(pairs), method, float(an.max() - an.min()))
