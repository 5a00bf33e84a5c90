"""Cylinders, return-time cocycles and the induced potential.

The induced potential of a flight is ``W(x) = V0(x) + B(F(x, 0)) + offset``
where ``V0`` is the integral of ``V`` over the flight above ``x`` and ``B``
transfers the integral from a point of the stable fibre to its projection
``s = 0``. This sign makes ``V0(y) = W(x) + B(y) - B(F(y))`` hold for every
``y = (x, s)``. Without the skew extension ``B`` vanishes and
``W = V0 + offset``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, ModelError, SingularInputError, TailError
from .model import PotentialSpec, SuspensionPoint, SuspensionSystem, _gauss, integrate_potential

__all__ = [
    "Cylinder",
    "CoboundaryData",
    "HolderEstimate",
    "induced_W",
    "induced_potential_W",
    "induced_roof",
    "enumerate_cylinders",
    "coboundary_B",
    "coboundary_data",
    "verify_coboundary_identity",
    "holder_certificate",
    "word_orbit",
]

DEFAULT_B_TOL = 1e-10


@dataclass(frozen=True)
class Cylinder:
    word: tuple[int, ...]
    interval: tuple[float, float]
    rep: float
    depth: int
    induced_roof: float
    birkhoff_W: float

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]


@dataclass(frozen=True)
class CoboundaryData:
    truncation_time: float
    tail_bound: float
    values: dict = field(default_factory=dict)


@dataclass(frozen=True)
class HolderEstimate:
    kappa: float
    gamma: float
    worst_pair: tuple | None


def _check_word(system, word):
    word = tuple(int(i) for i in word)
    for i in word:
        system.family.check_index(i)
    return word


def word_orbit(system: SuspensionSystem, word, z):
    """Points ``y_k = psi_{w_k} o ... o psi_{w_n}(z)`` for ``k = 1..n``.

    ``y_1`` lies in the cylinder of ``word`` and ``g(y_k) = y_{k+1}``.
    """
    word = _check_word(system, word)
    pts = []
    y = np.asarray(z, dtype=float)
    for i in reversed(word):
        y = system.family.inverse(i, y)
        pts.append(y)
    return list(reversed(pts))


def cylinder_interval(system, word):
    lo, hi = system.base.lo, system.base.hi
    a = word_orbit(system, word, lo)[0] if word else lo
    b = word_orbit(system, word, hi)[0] if word else hi
    return (float(min(a, b)), float(max(a, b)))


def induced_roof(system: SuspensionSystem, word, rep=None) -> float:
    """``r^n`` at a point of the cylinder of ``word``, summed along the orbit.

    ``rep`` is the base point ``g^n(y)``; by default the midpoint of the
    base, so that for affine branches ``y`` is the cylinder midpoint.
    """
    word = _check_word(system, word)
    if not word:
        return 0.0
    z = 0.5 * (system.base.lo + system.base.hi) if rep is None else rep
    pts = word_orbit(system, word, z)
    return float(sum(float(system.roof(i, y)) for i, y in zip(word, pts)))


def _B_horizon(potential, lam, s0, tol):
    """Truncation time and exponential tail bound for ``B`` at fibre offset ``s0``."""
    a, c = potential.alpha, potential.holder_constant
    amp = c * np.abs(s0) ** a / (a * lam)
    goal = 0.5 * tol  # strictly inside tol despite rounding
    with np.errstate(divide="ignore"):
        horizon = np.where(amp > goal, np.log(np.where(amp > 0, amp, 1.0) / goal) / (a * lam), 0.0)
    tail = amp * np.exp(-a * lam * horizon)
    return horizon, tail


def _coboundary(system, potential, x, t, s, tol, order=8):
    """Vectorised ``B`` at suspension points ``(x, t, s)``."""
    lam = system.stable_rate
    x = np.array(x, dtype=float, copy=True)
    t = np.array(t, dtype=float, copy=True)
    sy = np.array(s, dtype=float, copy=True)
    x, t, sy = np.broadcast_arrays(x, t, sy)
    x, t, sy = x.copy(), t.copy(), sy.copy()
    s_th = np.zeros_like(sy)
    horizon, tail = _B_horizon(potential, lam, sy, tol)
    rem = horizon.copy()
    total = np.zeros_like(sy)
    u, w = _gauss(order)
    active = rem > 0
    while np.any(active):
        idx = np.nonzero(active)[0]
        xa = x[idx]
        # skew systems are finite; orbits through a shared endpoint follow the right-hand branch
        br = system.family.branch_of(xa, strict=False)
        r = system.roof(br, xa)
        seg = np.minimum(r - t[idx], rem[idx])
        panels = max(1, int(math.ceil(float(seg.max()))))
        k = np.arange(panels)
        frac = ((k[:, None] + u[None, :]) / panels).ravel()
        wt = np.tile(w, panels) / panels
        tau = seg[:, None] * frac
        decay = np.exp(-lam * tau)
        tt = t[idx, None] + tau
        v1 = potential(xa[:, None], tt, sy[idx, None] * decay, br[:, None])
        v0 = potential(xa[:, None], tt, s_th[idx, None] * decay, br[:, None])
        total[idx] += seg * np.sum((v1 - v0) * wt, axis=1)
        rem[idx] -= seg
        crossing = rem[idx] > 1e-14
        ci = idx[crossing]
        if ci.size:
            fac = np.exp(-lam * seg[crossing])
            shift = system.shift(x[ci])
            sy[ci] = sy[ci] * fac + shift
            s_th[ci] = s_th[ci] * fac + shift
            _, x[ci] = system.family.forward(x[ci], strict=False)
            t[ci] = 0.0
        done = idx[~crossing]
        rem[done] = 0.0
        active = rem > 0
    return total, tail, horizon


def coboundary_B(system: SuspensionSystem, potential: PotentialSpec, p: SuspensionPoint,
                 tol: float = DEFAULT_B_TOL):
    """``B(p)`` truncated at the smallest horizon whose certified tail is ``<= tol``.

    Returns
    -------
    value, tail_bound : float
    """
    if not system.skew:
        raise ModelError("coboundary B needs the stable skew extension (stable_rate > 0)")
    val, tail, _ = _coboundary(system, potential, [p.x], [p.t], [p.s], tol)
    return float(val[0]), float(tail[0])


def coboundary_data(system, potential, points, tol=DEFAULT_B_TOL) -> CoboundaryData:
    """Evaluate ``B`` on several suspension points and collect the certificate."""
    pts = list(points)
    val, tail, horizon = _coboundary(system, potential, [p.x for p in pts], [p.t for p in pts],
                                     [p.s for p in pts], tol)
    return CoboundaryData(float(np.max(horizon, initial=0.0)), float(np.max(tail, initial=0.0)),
                          {p: float(v) for p, v in zip(pts, val)})


def _flight_integral(system, potential, y, branch):
    # V is constant along a flight started at s = 0 when it has no t term
    if potential.kind == "branchwise" or (potential.is_affine and potential.coefficients["t"] == 0):
        r = system.roof(branch, y)
        if not np.all(np.isfinite(r)):
            raise SingularInputError("roof is infinite at the cusp")
        return r * potential(y, 0.0, 0.0, branch)
    return np.asarray(integrate_potential(system, potential, y, branch=branch), dtype=float)


def induced_W(system: SuspensionSystem, potential: PotentialSpec, y, branch, tol=DEFAULT_B_TOL):
    """Vectorised induced potential at points ``y`` of the given branches."""
    y = np.asarray(y, dtype=float)
    branch = np.broadcast_to(np.asarray(branch, dtype=int), y.shape)
    if y.size == 0:
        return np.zeros(y.shape)
    val = _flight_integral(system, potential, y, branch) + system.family.offset(branch)
    if system.skew and system.stable_shift != 0:
        _, gx = _forward_known(system, y, branch)
        b, _, _ = _coboundary(system, potential, gx.ravel(), 0.0, system.shift(y).ravel(), tol)
        val = val + b.reshape(y.shape)
    return val


def _forward_known(system, y, branch):
    """Forward map for points whose branch is already known."""
    a, b = system.family.image_arrays(branch)
    u = (y - a) / (b - a)
    fam = system.family
    if hasattr(fam, "orientations"):
        u = np.where(fam.orientations[np.asarray(branch) - 1] < 0, 1.0 - u, u)
    return branch, np.clip(system.base.from_unit(u), system.base.lo, system.base.hi)


def induced_potential_W(system: SuspensionSystem, potential: PotentialSpec, x, branch,
                        tol=DEFAULT_B_TOL):
    """``W`` at a base point ``x`` of the 1-cylinder ``branch``.

    Raises
    ------
    DomainError
        ``x`` does not lie in the image of ``branch``.
    SingularInputError
        ``x`` is the cusp.
    """
    xa = np.asarray(x, dtype=float)
    cusp = system.family.cusp
    if cusp is not None and np.any(xa == cusp):
        raise SingularInputError("the roof is infinite at the cusp")
    lo, hi = system.family.image(branch)
    if np.any(xa < lo) or np.any(xa > hi):
        raise DomainError(f"x is not in the image of branch {branch}")
    val = induced_W(system, potential, xa, branch, tol)
    return float(val) if np.ndim(x) == 0 else val


def _level_words(n_branch, depth):
    return list(itertools.product(range(1, n_branch + 1), repeat=depth))


def _resolve_cutoff(system, cutoff, mass_tol):
    if cutoff is None:
        if system.countable:
            raise ModelError("countable systems need an explicit branch cutoff")
        cutoff = system.n_branches
    cutoff = int(min(cutoff, system.n_branches))
    missing = system.family.uncovered_fraction(cutoff)
    if missing > mass_tol:
        need = cutoff
        while system.family.uncovered_fraction(need) > mass_tol and need < 10_000:
            need += 1
        raise TailError(f"branches beyond {cutoff} carry mass {missing:.3g} > {mass_tol:.3g}; "
                        f"need cutoff >= {need}", required=need)
    return cutoff


def _birkhoff_levels(system, phi, depth, cutoff, z):
    """Front-extended words with their points and Birkhoff sums.

    Returns ``words`` (list of tuples), ``pts`` (n_words, len(z)) holding
    ``psi_w(z)`` and ``sums`` holding ``S_n phi`` at those points.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    words = [()]
    pts = z[None, :]
    sums = np.zeros_like(pts)
    branches = np.arange(1, cutoff + 1)
    for _ in range(depth):
        new_pts = np.stack([system.family.inverse(int(i), pts) for i in branches])
        br = np.broadcast_to(branches[:, None, None], new_pts.shape)
        new_sums = phi(new_pts, br) + sums[None, :, :]
        words = [(int(i),) + w for i in branches for w in words]
        pts = new_pts.reshape(-1, z.size)
        sums = new_sums.reshape(-1, z.size)
    return words, pts, sums


def enumerate_cylinders(system: SuspensionSystem, potential: PotentialSpec | None, depth: int,
                        cutoff: int | None = None, mass_tol: float = 1e-6):
    """All depth-``depth`` cylinders over branches ``1..cutoff``.

    Raises
    ------
    TailError
        If the branches beyond the cutoff cover more than ``mass_tol`` of
        the base; ``err.required`` is the smallest sufficient cutoff.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    cutoff = _resolve_cutoff(system, cutoff, mass_tol)
    zmid = 0.5 * (system.base.lo + system.base.hi)
    z = np.array([system.base.lo, zmid, system.base.hi])
    roof = lambda y, br: system.roof(br, y)  # noqa: E731
    words, pts, rsum = _birkhoff_levels(system, roof, depth, cutoff, [zmid])
    if potential is None:
        wsum = np.full_like(rsum, np.nan)
    else:
        wfun = lambda y, br: induced_W(system, potential, y, br)  # noqa: E731
        _, _, wsum = _birkhoff_levels(system, wfun, depth, cutoff, [zmid])
    _, ends, _ = _birkhoff_levels(system, lambda y, br: np.zeros_like(y), depth, cutoff, z[[0, 2]])
    out = []
    for k, w in enumerate(words):
        a, b = sorted((float(ends[k, 0]), float(ends[k, 1])))
        out.append(Cylinder(w, (a, b), float(pts[k, 0]), depth, float(rsum[k, 0]), float(wsum[k, 0])))
    return out


def verify_coboundary_identity(system: SuspensionSystem, potential: PotentialSpec, points,
                               tol=DEFAULT_B_TOL, order=8):
    """Largest violation of ``V0(y) = W(x) + B(y) - B(F(y))`` over the sample.

    ``points`` are ``(x, s)`` pairs at flight time zero. Returns a dict
    with ``max_residual``, ``quadrature_error`` and ``tail_bound``.
    """
    if not system.skew:
        raise ModelError("coboundary identity needs the stable skew extension")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, s = pts[:, 0], pts[:, 1]
    br = system.family.branch_of(x)
    v0, qerr = integrate_potential(system, potential, x, branch=br, s=s, order=order, full_output=True)
    v0 = v0 + system.family.offset(br)
    w = induced_W(system, potential, x, br, tol)
    by, tail_y, _ = _coboundary(system, potential, x, 0.0, s, tol, order)
    r = system.roof(br, x)
    _, gx = _forward_known(system, x, br)
    sf = s * np.exp(-system.stable_rate * r) + system.shift(x)
    bf, tail_f, _ = _coboundary(system, potential, gx, 0.0, sf, tol, order)
    _, tail_w = _B_horizon(potential, system.stable_rate, system.shift(x), tol)
    res = np.abs(v0 - w - by + bf)
    return {
        "max_residual": float(res.max(initial=0.0)),
        "residuals": res,
        "quadrature_error": float(np.max(qerr, initial=0.0)),
        "tail_bound": float(max(tail_y.max(initial=0.0), tail_f.max(initial=0.0), tail_w.max(initial=0.0))),
        "B_values": by,
    }


def holder_certificate(system: SuspensionSystem, potential: PotentialSpec | None, depth: int,
                       gamma: float | None = None, cutoff: int | None = None, samples: int = 9,
                       beta: float = 1.0):
    """Empirical dynamical Hoelder constants of the roof and of ``W``.

    Over all depth-``depth`` cylinders and pairs of sample points in each,
    estimates ``max |S_n phi(x) - S_n phi(y)| / |g^n x - g^n y|^gamma``.

    Returns
    -------
    dict
        ``{"roof": HolderEstimate, "W": HolderEstimate}`` (``"W"`` only if a
        potential is given).
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    gamma = system.roof_holder[1] if gamma is None else gamma
    if cutoff is None and system.countable:
        cutoff = 8
    cutoff = int(min(cutoff or system.n_branches, system.n_branches))
    z = np.linspace(system.base.lo, system.base.hi, samples)
    if system.family.cusp is not None:
        z[z == system.family.cusp] += 1e-9 * system.base.length
    dz = np.abs(z[:, None] - z[None, :]) ** gamma
    iu = np.triu_indices(samples, 1)
    phis = {"roof": lambda y, br: system.roof(br, y)}
    if potential is not None:
        phis["W"] = lambda y, br: beta * induced_W(system, potential, y, br)
    out = {}
    for name, phi in phis.items():
        words, pts, sums = _birkhoff_levels(system, phi, depth, cutoff, z)
        diff = np.abs(sums[:, :, None] - sums[:, None, :])
        ratio = diff[:, iu[0], iu[1]] / dz[iu]
        flat = int(np.argmax(ratio))
        kw, kp = np.unravel_index(flat, ratio.shape)
        kappa = float(ratio[kw, kp])
        pair = (words[kw], float(pts[kw, iu[0][kp]]), float(pts[kw, iu[1][kp]]))
        out[name] = HolderEstimate(kappa, gamma, pair if kappa > 0 else None)
    return out
