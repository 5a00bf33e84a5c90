"""Full-branch Markov interval maps with closed-form inverse branches.

Three families are provided:

* :class:`FiniteLinear` -- finitely many affine branches with per-branch
  roofs that are constant or affine in the local coordinate.
* :class:`GeometricCountable` -- countably many branches with images
  ``[2^-i, 2^(1-i)]`` accumulating on a cusp at ``lo``; roof ``a*i + b``
  and analytic weight offsets ``-p*log(i) - c``.
* :class:`LorenzTemplate` -- countably many branches with images
  ``[rho^i, rho^(i-1)]`` and the logarithmic return time
  ``r0 - log(u)/lambda_u`` typical of orbits passing near a Lorenz saddle.

Branch indices are 1-based. All maps act on arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special

from .exceptions import BranchBoundaryError, DomainError, ModelError, SingularInputError

__all__ = [
    "BaseInterval",
    "TailSums",
    "BranchFamily",
    "FiniteLinear",
    "GeometricCountable",
    "LorenzTemplate",
]


@dataclass(frozen=True)
class BaseInterval:
    """The interval ``[lo, hi]`` carrying the induced base map."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ModelError("base interval endpoints must be finite")
        if not self.lo < self.hi:
            raise ModelError(f"base interval needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.lo) / self.length

    def from_unit(self, u):
        return self.lo + self.length * np.asarray(u, dtype=float)

    def check(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(~np.isfinite(x)) or np.any(x < self.lo) or np.any(x > self.hi):
            raise DomainError(f"coordinate outside base interval [{self.lo}, {self.hi}]")
        return x


@dataclass(frozen=True)
class TailSums:
    """Sums over the branches beyond a cutoff.

    ``mass`` is the sum of weights ``exp(beta*W - Z*r)``, ``mass_r`` and
    ``mass_w`` the same sums weighted by the roof and by ``W`` (at
    ``beta = 1``). ``bound`` is a certified upper bound for ``mass``.
    Divergent sums are ``inf``.
    """

    mass: float = 0.0
    mass_r: float = 0.0
    mass_w: float = 0.0
    bound: float = 0.0

    @property
    def finite(self) -> bool:
        return math.isfinite(self.mass)


_ZERO_TAIL = TailSums()


class BranchFamily:
    """Interface shared by the branch families.

    Subclasses set ``base``, ``n_branches`` (an int or ``math.inf``) and
    ``cusp`` (``None`` for finite families) and implement the abstract
    methods below.
    """

    family = "abstract"
    base: BaseInterval
    n_branches: float
    cusp: float | None = None

    @property
    def countable(self) -> bool:
        return math.isinf(self.n_branches)

    def check_index(self, i) -> int:
        if int(i) != i or i < 1 or i > self.n_branches:
            raise DomainError(f"unknown branch index {i!r}")
        return int(i)

    def image(self, i) -> tuple[float, float]:
        raise NotImplementedError

    def inverse(self, i, x):
        raise NotImplementedError

    def contraction(self, i) -> float:
        raise NotImplementedError

    def roof(self, i, y):
        raise NotImplementedError

    def offset(self, i):
        return np.zeros_like(np.asarray(i, dtype=float))

    def branch_of(self, y):
        raise NotImplementedError

    def roof_at(self, y) -> float:
        """Roof above a single point, defined at a shared endpoint when both sides agree."""
        return float(self.roof(self.branch_of(y), y))

    def forward(self, y):
        """Return ``(branch, g(y))`` for the forward base map."""
        y = np.asarray(y, dtype=float)
        idx = self.branch_of(y)
        a, b = self.image_arrays(idx)
        u = (y - a) / (b - a)
        x = self.base.from_unit(u)
        return idx, np.clip(x, self.base.lo, self.base.hi)

    def image_arrays(self, idx):
        idx = np.asarray(idx)
        flat = [self.image(int(k)) for k in idx.ravel()]
        a = np.array([f[0] for f in flat]).reshape(idx.shape)
        b = np.array([f[1] for f in flat]).reshape(idx.shape)
        return a, b

    def fixed_point(self, i) -> float:
        """Unique fixed point of the inverse branch ``i`` (a contraction)."""
        i = self.check_index(i)
        x = 0.5 * (self.base.lo + self.base.hi)
        for _ in range(2000):
            nxt = float(self.inverse(i, x))
            if abs(nxt - x) <= 1e-16 * max(1.0, abs(x)):
                return nxt
            x = nxt
        return x

    def roof_bounds(self, i) -> tuple[float, float]:
        a, b = self.image(i)
        y = np.linspace(a, b, 33)
        if self.cusp is not None:
            y = y[y != self.cusp]
        r = self.roof(i, y)
        return float(np.min(r)), float(np.max(r))

    def critical_abscissa(self, beta, potential) -> float:
        """Declared abscissa of convergence of ``sum exp(beta*W - Z*r)``."""
        return -math.inf

    def tail(self, n_cut, beta, z, potential) -> TailSums:
        return _ZERO_TAIL

    def uncovered_fraction(self, n_cut) -> float:
        """Fraction of the base left uncovered by branches ``1..n_cut``."""
        return 0.0

    def params(self) -> dict:
        raise NotImplementedError


def _exact_boundary(u, edges):
    """Mask of ``u`` values equal to one of the interior ``edges``."""
    return np.isin(u, edges)


class FiniteLinear(BranchFamily):
    """Finitely many affine inverse branches.

    Parameters
    ----------
    base : BaseInterval
    widths : sequence of float
        Relative widths of the branch images, left to right.
    roofs : sequence of float
        Roof value at the left end of each branch image.
    roof_slopes : sequence of float, optional
        Roof increment across each branch image (affine roof).
    offsets : sequence of float, optional
        Additive weight offsets per branch.
    orientations : sequence of {+1, -1}, optional
        ``-1`` makes the branch orientation-reversing.
    """

    family = "finite-linear"

    def __init__(self, base, widths, roofs, roof_slopes=None, offsets=None, orientations=None):
        widths = np.asarray(widths, dtype=float)
        k = len(widths)
        if k < 1 or np.any(widths <= 0) or not np.all(np.isfinite(widths)):
            raise ModelError("widths must be a non-empty list of positive numbers")
        roofs = np.asarray(roofs, dtype=float)
        if roofs.shape != (k,):
            raise ModelError(f"expected {k} roofs, got {roofs.size}")
        slopes = np.zeros(k) if roof_slopes is None else np.asarray(roof_slopes, dtype=float)
        offs = np.zeros(k) if offsets is None else np.asarray(offsets, dtype=float)
        orient = np.ones(k) if orientations is None else np.asarray(orientations, dtype=float)
        if slopes.shape != (k,) or offs.shape != (k,) or orient.shape != (k,):
            raise ModelError("roof_slopes, offsets and orientations need one entry per branch")
        if not np.all(np.isin(orient, (-1.0, 1.0))):
            raise ModelError("orientations must be +1 or -1")
        if np.any(np.minimum(roofs, roofs + slopes) <= 0) or not np.all(np.isfinite(roofs)):
            raise ModelError("roofs must be finite and positive on every branch")
        self.base = base
        self.n_branches = k
        self.widths = widths / widths.sum()
        self.roofs = roofs
        self.roof_slopes = slopes
        self.offsets = offs
        self.orientations = orient
        self.edges = base.lo + base.length * np.concatenate([[0.0], np.cumsum(self.widths)])
        self.edges[-1] = base.hi

    def image(self, i):
        i = self.check_index(i)
        return float(self.edges[i - 1]), float(self.edges[i])

    def image_arrays(self, idx):
        idx = np.asarray(idx, dtype=int)
        return self.edges[idx - 1], self.edges[idx]

    def inverse(self, i, x):
        i = self.check_index(i)
        u = self.base.to_unit(x)
        if self.orientations[i - 1] < 0:
            u = 1.0 - u
        a, b = self.edges[i - 1], self.edges[i]
        return a + (b - a) * u

    def contraction(self, i):
        i = self.check_index(i)
        return float(self.widths[i - 1])

    def roof(self, i, y):
        i = np.asarray(i, dtype=int)
        a, b = self.edges[i - 1], self.edges[i]
        loc = (np.asarray(y, dtype=float) - a) / (b - a)
        return self.roofs[i - 1] + self.roof_slopes[i - 1] * loc

    def offset(self, i):
        return self.offsets[np.asarray(i, dtype=int) - 1]

    def branch_of(self, y, strict=True):
        """Branch whose image contains ``y``.

        A shared endpoint raises unless ``strict=False``, which assigns it to
        the right-hand branch (used for one-sided orbit limits).
        """
        y = self.base.check(y)
        inner = self.edges[1:-1]
        if strict and np.any(_exact_boundary(y, inner)):
            bad = y[_exact_boundary(y, inner)].ravel()[0]
            raise BranchBoundaryError(float(bad))
        idx = np.searchsorted(self.edges, y, side="right")
        return np.clip(idx, 1, self.n_branches)

    def roof_at(self, y):
        y = float(self.base.check(y))
        hit = np.nonzero(self.edges[1:-1] == y)[0]
        if hit.size == 0:
            return float(self.roof(self.branch_of(y), y))
        k = int(hit[0]) + 1
        left = float(self.roof(k, y))
        right = float(self.roof(k + 1, y))
        if left != right:
            raise BranchBoundaryError(y, f"roof is discontinuous at branch boundary x={y!r}")
        return left

    def forward(self, y, strict=True):
        idx = self.branch_of(y, strict)
        a, b = self.edges[idx - 1], self.edges[idx]
        u = (np.asarray(y, dtype=float) - a) / (b - a)
        u = np.where(self.orientations[idx - 1] < 0, 1.0 - u, u)
        return idx, np.clip(self.base.from_unit(u), self.base.lo, self.base.hi)

    def fixed_point(self, i):
        i = self.check_index(i)
        a, b = self.edges[i - 1], self.edges[i]
        lo, L = self.base.lo, self.base.length
        # y = a + (b-a)(y-lo)/L, or the reversed branch
        c = (b - a) / L
        if self.orientations[i - 1] > 0:
            return float((a - c * lo) / (1.0 - c))
        return float((a + c * (L + lo)) / (1.0 + c))

    def uncovered_fraction(self, n_cut):
        return float(max(0.0, 1.0 - self.widths[: int(n_cut)].sum()))

    def roof_bounds(self, i):
        i = self.check_index(i)
        lo = self.roofs[i - 1]
        hi = lo + self.roof_slopes[i - 1]
        return float(min(lo, hi)), float(max(lo, hi))

    def params(self):
        return {
            "widths": self.widths.tolist(),
            "roofs": self.roofs.tolist(),
            "roof_slopes": self.roof_slopes.tolist(),
            "offsets": self.offsets.tolist(),
            "orientations": self.orientations.astype(int).tolist(),
        }


def _cusp_slope(potential, base):
    """Linear growth rate of ``W`` along the branches accumulating at the cusp."""
    return potential.value_at(base.lo)


def _lerch_sums(kappa, s, a0, chunk=1 << 16, max_terms=1 << 23):
    """``sum_{n >= a0} e^{-kappa n} n^{-s} * (1, n, log n)`` for ``kappa > 0``.

    Summed directly while the terms decay within ``max_terms``; otherwise
    through the Lerch transcendent.
    """
    if kappa * max_terms > 60:
        tot = np.zeros(3)
        start = a0
        while True:
            n = np.arange(start, start + chunk, dtype=float)
            ln = np.log(n)
            t = np.exp(-kappa * n - s * ln)
            tot += (t.sum(), (t * n).sum(), (t * ln).sum())
            start += chunk
            if t[-1] * n[-1] <= 1e-18 * max(tot[1], 1e-300) or t[-1] == 0.0:
                return float(tot[0]), float(tot[1]), float(tot[2])
    q = mpmath.exp(-kappa)
    qa = q ** a0
    base = float(qa * mpmath.lerchphi(q, s, a0))
    first = float(qa * mpmath.lerchphi(q, s - 1, a0))
    dlog = -float(qa * mpmath.diff(lambda ss: mpmath.lerchphi(q, ss, a0), s))
    return base, first, dlog


class GeometricCountable(BranchFamily):
    """Countably many dyadic branches accumulating on ``base.lo``.

    Branch ``i`` maps the base affinely onto ``[2^-i, 2^(1-i)]`` (unit
    coordinates), i.e. ``u -> 2^-i (1 + u)``. Its roof is the constant
    ``roof_scale * i + roof_shift`` and its weight offset is
    ``-log_coeff * log(i) - const_offset``.
    """

    family = "geometric-countable"

    def __init__(self, base, roof_scale=1.0, roof_shift=0.0, log_coeff=0.0, const_offset=0.0):
        if not roof_scale > 0:
            raise ModelError("roof_scale must be positive")
        if roof_scale + roof_shift <= 0:
            raise ModelError("roof of branch 1 must be positive")
        self.base = base
        self.n_branches = math.inf
        self.cusp = base.lo
        self.roof_scale = float(roof_scale)
        self.roof_shift = float(roof_shift)
        self.log_coeff = float(log_coeff)
        self.const_offset = float(const_offset)

    def image(self, i):
        i = self.check_index(i)
        return (float(self.base.from_unit(2.0 ** -i)), float(self.base.from_unit(2.0 ** (1 - i))))

    def image_arrays(self, idx):
        idx = np.asarray(idx, dtype=float)
        return self.base.from_unit(2.0 ** -idx), self.base.from_unit(2.0 ** (1 - idx))

    def inverse(self, i, x):
        i = self.check_index(i)
        u = self.base.to_unit(x)
        return self.base.from_unit(2.0 ** -i * (1.0 + u))

    def contraction(self, i):
        return 2.0 ** -self.check_index(i)

    def roof(self, i, y):
        i = np.asarray(i, dtype=float)
        r = self.roof_scale * i + self.roof_shift
        return np.broadcast_to(r, np.broadcast(i, np.asarray(y)).shape).astype(float)

    def offset(self, i):
        i = np.asarray(i, dtype=float)
        return -self.log_coeff * np.log(i) - self.const_offset

    def branch_of(self, y):
        y = self.base.check(y)
        u = self.base.to_unit(y)
        if np.any(u <= 0):
            raise SingularInputError("the cusp point has no forward image")
        mant, expo = np.frexp(u)
        boundary = (mant == 0.5) & (u < 1.0)
        if np.any(boundary):
            raise BranchBoundaryError(float(y[boundary].ravel()[0]))
        idx = 1 - expo
        return np.where(u >= 1.0, 1, idx).astype(int)

    def fixed_point(self, i):
        i = self.check_index(i)
        # u = 2^-i (1 + u)
        return float(self.base.from_unit(2.0 ** -i / (1.0 - 2.0 ** -i)))

    def roof_bounds(self, i):
        r = self.roof_scale * self.check_index(i) + self.roof_shift
        return r, r

    def critical_abscissa(self, beta, potential):
        return beta * _cusp_slope(potential, self.base)

    def _series(self, beta, z, potential):
        v = _cusp_slope(potential, self.base)
        kappa = (z - beta * v) * self.roof_scale
        s = beta * self.log_coeff
        pref = math.exp(-(z - beta * v) * self.roof_shift - beta * self.const_offset)
        return v, kappa, s, pref

    def tail(self, n_cut, beta, z, potential):
        v, kappa, s, pref = self._series(beta, z, potential)
        a0 = int(n_cut) + 1
        a, b = self.roof_scale, self.roof_shift
        if abs(kappa) <= 1e-15:
            if s <= 1:
                return TailSums(math.inf, math.inf, math.inf, math.inf)
            base = float(special.zeta(s, a0))
            mass = pref * base
            if s <= 2:
                return TailSums(mass, math.inf, math.inf, mass)
            first = float(special.zeta(s - 1, a0))
            dlog = -float(mpmath.zeta(s, a0, derivative=1))
        elif kappa < 0:
            return TailSums(math.inf, math.inf, math.inf, math.inf)
        else:
            base, first, dlog = _lerch_sums(kappa, s, a0)
            mass = pref * base
        mass_r = pref * (a * first + b * base)
        mass_w = v * mass_r - self.const_offset * mass - self.log_coeff * pref * dlog
        # branch-internal variation of W vanishes like i 2^-i
        slack = math.exp(abs(beta) * abs(potential.coefficients.get("x", 0.0)) * self.base.length
                         * 2.0 ** (1 - a0) * (a * a0 + abs(b)))
        return TailSums(mass, mass_r, mass_w, mass * slack)

    def uncovered_fraction(self, n_cut):
        return 2.0 ** -int(n_cut)

    def params(self):
        return {
            "roof_scale": self.roof_scale,
            "roof_shift": self.roof_shift,
            "log_coeff": self.log_coeff,
            "const_offset": self.const_offset,
        }


class LorenzTemplate(BranchFamily):
    """Countable branches with logarithmic return times near a saddle.

    In unit coordinates branch ``i`` maps the base affinely onto
    ``[rho^i, rho^(i-1)]`` and the roof is ``r0 - log(u)/unstable_rate``,
    which blows up at the cusp ``u = 0``.
    """

    family = "lorenz-template"
    _chunk = 4096
    _max_terms = 2_000_000

    def __init__(self, base, ratio=0.5, roof_base=1.0, unstable_rate=1.0):
        if not 0 < ratio < 1:
            raise ModelError("ratio must lie in (0, 1)")
        if not (roof_base > 0 and unstable_rate > 0):
            raise ModelError("roof_base and unstable_rate must be positive")
        self.base = base
        self.n_branches = math.inf
        self.cusp = base.lo
        self.ratio = float(ratio)
        self.roof_base = float(roof_base)
        self.unstable_rate = float(unstable_rate)

    @property
    def roof_step(self):
        """Roof increase from one branch to the next."""
        return -math.log(self.ratio) / self.unstable_rate

    def image(self, i):
        i = self.check_index(i)
        return (float(self.base.from_unit(self.ratio ** i)),
                float(self.base.from_unit(self.ratio ** (i - 1))))

    def image_arrays(self, idx):
        idx = np.asarray(idx, dtype=float)
        return self.base.from_unit(self.ratio ** idx), self.base.from_unit(self.ratio ** (idx - 1))

    def inverse(self, i, x):
        i = self.check_index(i)
        u = self.base.to_unit(x)
        a, b = self.ratio ** i, self.ratio ** (i - 1)
        return self.base.from_unit(a + (b - a) * u)

    def contraction(self, i):
        i = self.check_index(i)
        return self.ratio ** (i - 1) * (1.0 - self.ratio)

    def roof(self, i, y):
        u = self.base.to_unit(y)
        with np.errstate(divide="ignore"):
            return self.roof_base - np.log(u) / self.unstable_rate

    def roof_at(self, y):
        r = float(self.roof(None, self.base.check(y)))
        if not math.isfinite(r):
            raise SingularInputError("roof is infinite at the cusp")
        return r

    def branch_of(self, y):
        y = self.base.check(y)
        u = self.base.to_unit(y)
        if np.any(u <= 0):
            raise SingularInputError("the cusp point has no forward image")
        k = np.log(u) / math.log(self.ratio)
        near = np.abs(k - np.round(k)) <= 1e-12 * np.maximum(1.0, k)
        boundary = near & (np.round(k) >= 1)
        if np.any(boundary):
            raise BranchBoundaryError(float(y[boundary].ravel()[0]))
        return np.maximum(1, np.ceil(k)).astype(int)

    def fixed_point(self, i):
        i = self.check_index(i)
        a, b = self.ratio ** i, self.ratio ** (i - 1)
        return float(self.base.from_unit(a / (1.0 - (b - a))))

    def roof_bounds(self, i):
        i = self.check_index(i)
        return self.roof_base + (i - 1) * self.roof_step, self.roof_base + i * self.roof_step

    def critical_abscissa(self, beta, potential):
        return beta * _cusp_slope(potential, self.base)

    def _weights(self, idx, beta, z, potential):
        a, b = self.image_arrays(idx)
        y = 0.5 * (a + b)
        # log of the unit midpoint, immune to underflow of ratio**i
        log_u = idx * math.log(self.ratio) + math.log(0.5 * (1.0 + 1.0 / self.ratio))
        r = self.roof_base - log_u / self.unstable_rate
        w_unit = potential.value_at(y) * r
        return np.exp(beta * w_unit - z * r), r, w_unit

    def tail(self, n_cut, beta, z, potential):
        v = _cusp_slope(potential, self.base)
        gap = z - beta * v
        if gap <= 1e-15:
            return TailSums(math.inf, math.inf, math.inf, math.inf)
        bx = abs(potential.coefficients.get("x", 0.0)) * self.base.length
        # sup of |(y - lo) r(y)| over the base
        dev = abs(beta) * bx * max(self.roof_base, 1.0 / (math.e * self.unstable_rate) + self.roof_base)
        mass = mass_r = mass_w = 0.0
        start = int(n_cut) + 1
        while start - n_cut <= self._max_terms:
            idx = np.arange(start, start + self._chunk)
            w, r, wu = self._weights(idx, beta, z, potential)
            mass += float(w.sum())
            mass_r += float((w * r).sum())
            mass_w += float((w * wu).sum())
            start += self._chunk
            if w[-1] * (1.0 + r[-1]) <= 1e-18 * max(mass, 1e-300):
                break
        # geometric remainder beyond the summed range
        step = gap * self.roof_step
        rem_r = self.roof_base + (start - 1) * self.roof_step
        rem = math.exp(dev - gap * rem_r) / -math.expm1(-step)
        return TailSums(mass, mass_r, mass_w, mass * math.exp(2 * dev + gap * self.roof_step) + rem)

    def uncovered_fraction(self, n_cut):
        return self.ratio ** int(n_cut)

    def params(self):
        return {
            "ratio": self.ratio,
            "roof_base": self.roof_base,
            "unstable_rate": self.unstable_rate,
        }
