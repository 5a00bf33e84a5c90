"""Suspension semiflows over full-branch Markov interval maps.

A point of the suspension is ``(x, t, s)``: ``x`` a base coordinate, ``t``
the flight time above it (``0 <= t < roof(x)``) and ``s`` an optional
coordinate along the strong stable fibre. During a flight ``x`` is frozen,
``t`` grows and ``s`` contracts like ``exp(-stable_rate * t)``. At the
ceiling the point jumps to ``(g(x), 0, s + stable_shift * u(x))`` where
``g`` is the forward base map and ``u`` the unit coordinate of ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from .exceptions import DomainError, ModelError, SingularInputError
from .families import BaseInterval, BranchFamily

__all__ = [
    "PotentialSpec",
    "SuspensionPoint",
    "SuspensionSystem",
    "apply_branch",
    "flow_advance",
    "integrate_potential",
]

@dataclass(frozen=True)
class PotentialSpec:
    """A potential ``V(x, t, s)`` on the suspension.

    ``func`` is vectorised and receives ``(x, t, s, branch)`` where
    ``branch`` is the inverse-branch index of the flight's base point.
    ``coefficients`` records the closed form of affine potentials so that
    countable families can certify their tails.
    """

    func: Callable
    alpha: float = 1.0
    holder_constant: float = 0.0
    singular_value: float | None = None
    coefficients: Mapping[str, float] = field(default_factory=dict)
    kind: str = "custom"

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ModelError("Hoelder exponent must lie in (0, 1]")
        if self.holder_constant < 0:
            raise ModelError("Hoelder constant must be nonnegative")

    def __call__(self, x, t, s=0.0, branch=None):
        return np.asarray(self.func(x, t, s, branch), dtype=float)

    @classmethod
    def affine(cls, const=0.0, x=0.0, t=0.0, s=0.0, ss=0.0, singular_value=None,
               alpha=1.0, holder_constant=None):
        """``V = const + x*X + t*T + s*S + ss*S**2``."""
        coef = {"const": float(const), "x": float(x), "t": float(t), "s": float(s), "ss": float(ss)}

        def func(xx, tt, sv, branch, c=coef):
            return c["const"] + c["x"] * xx + c["t"] * tt + c["s"] * sv + c["ss"] * sv * sv

        if holder_constant is None:
            holder_constant = abs(x) + abs(t) + abs(s) + 2 * abs(ss)
        return cls(func, alpha, holder_constant, singular_value, coef, "affine")

    @classmethod
    def constant(cls, value, singular_value=None):
        return cls.affine(const=value, singular_value=singular_value)

    @classmethod
    def branchwise(cls, values, singular_value=None):
        """``V`` equal to ``values[i-1]`` along every flight above branch ``i``."""
        vals = np.asarray(values, dtype=float)

        def func(xx, tt, sv, branch, v=vals):
            if branch is None:
                raise ModelError("branchwise potential needs the branch index")
            return np.broadcast_to(v[np.asarray(branch) - 1], np.broadcast(xx, tt).shape)

        return cls(func, 1.0, 0.0, singular_value, {"values": tuple(vals.tolist())}, "branchwise")

    @property
    def is_affine(self) -> bool:
        return self.kind == "affine"

    def value_at(self, x):
        """``V(x, 0, 0)``; used for the flight-independent part near the cusp."""
        return self(np.asarray(x, dtype=float), 0.0, 0.0, None)

    def describe(self) -> dict:
        out = {"kind": self.kind, "alpha": self.alpha, "holder_constant": self.holder_constant,
               "singular_value": self.singular_value}
        out.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in self.coefficients.items()})
        return out


@dataclass(frozen=True)
class SuspensionPoint:
    x: float
    t: float = 0.0
    s: float = 0.0


@dataclass(frozen=True, eq=False)
class SuspensionSystem:
    """Base map, roof and optional stable skew extension.

    Parameters
    ----------
    family : BranchFamily
        Inverse branches and roof.
    stable_rate : float
        Contraction rate along the stable fibre; 0 disables the skew.
    stable_shift : float
        Fibre translation applied at each ceiling crossing.
    r_min : float, optional
        Declared lower bound of the roof; defaults to the observed minimum.
    roof_holder : (float, float)
        Declared dynamical Hoelder data ``(kappa, gamma)`` of the roof.
    """

    family: BranchFamily
    stable_rate: float = 0.0
    stable_shift: float = 0.0
    r_min: float | None = None
    roof_holder: tuple[float, float] = (0.0, 1.0)
    name: str = ""

    def __post_init__(self):
        if self.stable_rate < 0:
            raise ModelError("stable_rate must be nonnegative")
        if self.stable_rate == 0 and self.stable_shift != 0:
            raise ModelError("stable_shift needs a positive stable_rate")
        if self.family.countable and self.stable_rate > 0:
            raise ModelError("the stable skew extension is only supported for finite families")
        kappa, gamma = self.roof_holder
        if kappa < 0 or not 0 < gamma <= 1:
            raise ModelError("roof_holder needs kappa >= 0 and gamma in (0, 1]")
        if self.r_min is None:
            object.__setattr__(self, "r_min", self.observed_r_min())
        if not self.r_min > 0:
            raise ModelError("r_min must be positive")

    @property
    def base(self) -> BaseInterval:
        return self.family.base

    @property
    def n_branches(self):
        return self.family.n_branches

    @property
    def countable(self) -> bool:
        return self.family.countable

    @property
    def skew(self) -> bool:
        return self.stable_rate > 0

    def observed_r_min(self) -> float:
        n = int(min(self.n_branches, 64))
        return min(self.family.roof_bounds(i)[0] for i in range(1, n + 1))

    def branch_indices(self, cutoff=None) -> np.ndarray:
        n = self.n_branches if cutoff is None else min(cutoff, self.n_branches)
        if math.isinf(n):
            raise ModelError("a branch cutoff is required for countable systems")
        return np.arange(1, int(n) + 1)

    def roof(self, branch, y):
        return np.asarray(self.family.roof(branch, y), dtype=float)

    def shift(self, y):
        """Fibre translation picked up when leaving the flight above ``y``."""
        return self.stable_shift * self.base.to_unit(y)

    def forward(self, y):
        return self.family.forward(y)

    def describe(self) -> dict:
        return {
            "family": self.family.family,
            "base": [self.base.lo, self.base.hi],
            "params": self.family.params(),
            "stable_rate": self.stable_rate,
            "stable_shift": self.stable_shift,
            "r_min": self.r_min,
            "roof_holder": list(self.roof_holder),
        }


def apply_branch(system: SuspensionSystem, i: int, x):
    """Image of ``x`` under the inverse branch ``i``.

    Raises
    ------
    DomainError
        Unknown branch or ``x`` outside the base interval.
    """
    system.family.check_index(i)
    xa = system.base.check(x)
    y = system.family.inverse(i, xa)
    return float(y) if np.ndim(x) == 0 else y


def flow_advance(system: SuspensionSystem, p: SuspensionPoint, dt: float) -> SuspensionPoint:
    """Advance ``p`` by ``dt`` along the semiflow.

    Raises
    ------
    BranchBoundaryError
        If the orbit reaches a ceiling above a shared branch endpoint.
    SingularInputError
        If the orbit starts on the cusp.
    """
    if not (math.isfinite(dt) and dt >= 0):
        raise DomainError("dt must be finite and nonnegative")
    x = float(system.base.check(p.x))
    t, s = float(p.t), float(p.s)
    r = _roof_at(system, x)
    if t < 0 or t >= r:
        raise DomainError("suspension point is not normalised (0 <= t < roof)")
    lam = system.stable_rate
    remaining = dt
    while t + remaining >= r:
        step = r - t
        remaining -= step
        s = s * math.exp(-lam * step) + float(system.shift(x))
        _, nx = system.forward(x)
        x = float(nx)
        t = 0.0
        r = _roof_at(system, x)
    t += remaining
    s *= math.exp(-lam * remaining)
    return SuspensionPoint(x, t, s)


def _roof_at(system, x):
    if system.family.cusp is not None and x == system.family.cusp:
        raise SingularInputError(f"roof is infinite at the cusp x={x!r}")
    r = system.family.roof_at(x)
    if not math.isfinite(r):
        raise SingularInputError(f"roof is infinite at x={x!r}")
    return r


@lru_cache(maxsize=None)
def _gauss(order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights


def _quad(potential, x, branch, r, s0, lam, order):
    """Composite Gauss-Legendre over ``[0, r]`` with one panel per unit time."""
    panels = max(1, int(math.ceil(float(np.max(r)))))
    u, w = _gauss(order)
    k = np.arange(panels)
    frac = ((k[:, None] + u[None, :]) / panels).ravel()
    wt = np.tile(w, panels) / panels
    t = r[..., None] * frac
    s = s0[..., None] * np.exp(-lam * t) if lam > 0 else np.broadcast_to(s0[..., None], t.shape)
    vals = potential(x[..., None], t, s, None if branch is None else branch[..., None])
    return r * np.sum(vals * wt, axis=-1)


def integrate_potential(system: SuspensionSystem, potential: PotentialSpec, x, *, branch=None,
                        s=0.0, order=8, full_output=False):
    """Integral of ``V`` along the flight above ``x``, over ``[0, roof(x)]``.

    Composite Gauss-Legendre with ``order`` nodes per unit of flight time.
    With ``full_output`` the result is ``(value, error_estimate)`` where the
    estimate is the gap to the same rule at half the order.

    Raises
    ------
    SingularInputError
        If the roof is infinite at ``x`` (the cusp).
    """
    xa = system.base.check(x)
    if branch is None:
        branch = system.family.branch_of(xa)
    branch = np.broadcast_to(np.asarray(branch, dtype=int), xa.shape)
    r = system.roof(branch, xa)
    if not np.all(np.isfinite(r)):
        raise SingularInputError("roof is infinite at the cusp")
    s0 = np.broadcast_to(np.asarray(s, dtype=float), xa.shape)
    val = _quad(potential, xa, branch, r, s0, system.stable_rate, order)
    if np.ndim(x) == 0:
        val = float(val)
    if not full_output:
        return val
    coarse = _quad(potential, xa, branch, r, s0, system.stable_rate, max(1, order // 2))
    err = np.abs(np.asarray(val) - coarse)
    return val, (float(err) if np.ndim(x) == 0 else err)
