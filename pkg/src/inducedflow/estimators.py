"""scikit-learn style wrappers around the functional API.

``fit`` takes a :class:`~inducedflow.model.SuspensionSystem` and a
:class:`~inducedflow.model.PotentialSpec` instead of a design matrix; only
the parameter handling and fitted-attribute conventions are borrowed.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .exceptions import DomainError
from .model import PotentialSpec, SuspensionSystem
from .operator import DEFAULT_GRID, estimate_Zc
from .thermo import REGULAR, abramov_lift, pressure_curve, solve_pressure

__all__ = ["EquilibriumStateEstimator", "PressureCurveEstimator", "check_base_points"]


def check_base_points(system: SuspensionSystem, X) -> np.ndarray:
    """Validate base coordinates, given as a 1-d array or a single-column 2-d array.

    Raises
    ------
    DomainError
        If a coordinate falls outside the base interval.
    """
    X = check_array(np.asarray(X, dtype=float).reshape(-1, 1) if np.ndim(X) < 2 else X,
                    ensure_2d=True, dtype=float)
    if X.shape[1] != 1:
        raise ValueError(f"expected one column of base coordinates, got {X.shape[1]}")
    x = X[:, 0]
    lo, hi = system.base.lo, system.base.hi
    if np.any((x < lo) | (x > hi)):
        raise DomainError(f"base coordinates must lie in [{lo}, {hi}]")
    return x


def _check_inputs(system, potential):
    if not isinstance(system, SuspensionSystem):
        raise TypeError("fit expects a SuspensionSystem")
    if not isinstance(potential, PotentialSpec):
        raise TypeError("fit expects a PotentialSpec")


class EquilibriumStateEstimator(BaseEstimator):
    """Pressure and equilibrium state at a single inverse temperature.

    Parameters
    ----------
    beta : float
    grid : int
    cutoff : int, optional
        Explicit branch count for countable families.
    tol : float

    Attributes
    ----------
    pressure_ : float
    regime_ : str
    spectral_ : SpectralSolution
    flow_measure_ : FlowMeasure or None
        ``None`` outside the regular regime.
    zc_ : float
        Critical abscissa used by the solve.

    Examples
    --------
    >>> from inducedflow import BaseInterval, FiniteLinear, SuspensionSystem, PotentialSpec
    >>> sys_ = SuspensionSystem(FiniteLinear(BaseInterval(0, 1), widths=[1, 1], roofs=[1, 1]))
    >>> est = EquilibriumStateEstimator(beta=0.0).fit(sys_, PotentialSpec.affine())
    >>> round(est.pressure_, 12)
    0.69314718056
    """

    def __init__(self, beta=1.0, grid=DEFAULT_GRID, cutoff=None, tol=1e-10):
        self.beta = beta
        self.grid = grid
        self.cutoff = cutoff
        self.tol = tol

    def fit(self, system, potential, y=None):
        _check_inputs(system, potential)
        ps = solve_pressure(system, potential, float(self.beta), self.tol, self.grid, self.cutoff)
        self.system_, self.potential_ = system, potential
        self.pressure_ = ps.Z
        self.regime_ = ps.regime
        self.spectral_ = ps.spectral
        self.zc_ = ps.zc
        self.lambda_margin_ = ps.margin
        self.flow_measure_ = abramov_lift(ps.spectral) if ps.regime == REGULAR else None
        return self

    def transform(self, X):
        """Eigenfunction ``H`` at base points, shape ``(n, 1)``."""
        check_is_fitted(self, "spectral_")
        x = check_base_points(self.system_, X)
        return self.spectral_.H(x).reshape(-1, 1)

    def score(self, system=None, potential=None):
        """The fitted pressure (the arguments are accepted for API symmetry)."""
        check_is_fitted(self, "pressure_")
        return self.pressure_


class PressureCurveEstimator(BaseEstimator):
    """Pressure function on a grid of inverse temperatures.

    Attributes
    ----------
    curve_ : PressureCurve
    beta_c_ : float or None
    zc_estimate_ : ZcEstimate
        Root-test estimate at the last grid point.
    """

    def __init__(self, betas=None, grid=DEFAULT_GRID, cutoff=None, tol=1e-10, n_jobs=1):
        self.betas = betas
        self.grid = grid
        self.cutoff = cutoff
        self.tol = tol
        self.n_jobs = n_jobs

    def fit(self, system, potential, y=None):
        _check_inputs(system, potential)
        betas = np.linspace(0.0, 2.0, 21) if self.betas is None else np.asarray(self.betas, float)
        self.curve_ = pressure_curve(system, potential, betas, self.tol, self.grid, self.cutoff,
                                     workers=self.n_jobs)
        self.beta_c_ = self.curve_.beta_c
        self.zc_estimate_ = estimate_Zc(system, potential, float(betas[-1]))
        return self

    def predict(self, betas):
        """Linear interpolation of the sampled pressure."""
        check_is_fitted(self, "curve_")
        return np.interp(np.asarray(betas, float), self.curve_.betas, self.curve_.pressure)
