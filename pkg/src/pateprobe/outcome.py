"""Closed-form outcome distribution of the noisy argmax and its Jacobian.

The probability that class k wins is an integral over the winning score
alpha: the product of the other classes' Gaussian CDFs times class k's
density. It is evaluated here by a trapezoid rule on a grid centered at
H_k and spanning a few noise standard deviations, entirely in log space
for numerical range.

The Jacobian treats the integration grid as frozen: the bounds' own
dependence on H_k only contributes the truncated tail, which is below
the quadrature error. This matches what central finite differences on a
frozen grid measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .core import OutcomeDistribution, RealHistogram, VoteHistogram

__all__ = [
    "IntegrationGrid",
    "OutcomeJacobian",
    "OutcomeModel",
    "gaussian_cdf",
    "gaussian_pdf",
    "outcome_distribution",
    "outcome_jacobian",
]

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# The Jacobian is a plain (c, c) array; entry (k, j) is dQ_k / dH_j.
OutcomeJacobian = np.ndarray


@dataclass(frozen=True)
class IntegrationGrid:
    """Trapezoid grid parameters, in noise-scaled and vote units.

    The grid for class k spans [H_k - w*sigma, H_k + w*sigma] where w is
    ``half_width_sigmas``. The effective spacing is min(step, sigma/10)
    so the integrand stays resolved even for small sigma.
    """

    half_width_sigmas: float = 6.0
    step: float = 1.0

    def __post_init__(self) -> None:
        if self.half_width_sigmas < 4:
            raise ValueError("half width below 4 sigma truncates too much mass")
        if self.step <= 0:
            raise ValueError("step must be positive")

    def effective_step(self, sigma: float) -> float:
        return min(self.step, sigma / 10.0)


DEFAULT_GRID = IntegrationGrid()


def gaussian_cdf(x):
    """Standard normal CDF via erf; absolute error below 1e-12."""
    return ndtr(x)


def gaussian_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return out if out.ndim else float(out)


class OutcomeModel:
    """Reusable evaluator for one (sigma, grid) pair.

    Precomputes every sigma-dependent constant once, so the per-call
    work is a single batched log-CDF evaluation plus reductions. The
    integration grid moves with the histogram (it is re-centered at each
    entry), which makes the evaluation exactly shift invariant.

    ``probabilities`` returns the renormalized vector together with an
    opaque cache; passing the cache to ``jacobian`` reuses the forward
    intermediates instead of recomputing them.
    """

    def __init__(self, sigma: float, grid: IntegrationGrid = DEFAULT_GRID):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        self.grid = grid
        eff = grid.effective_step(self.sigma)
        n_half = int(round(grid.half_width_sigmas * self.sigma / eff))
        if n_half < 2:
            raise ValueError("degenerate integration grid")
        offsets = np.arange(-n_half, n_half + 1) * eff
        weights = np.full(offsets.size, eff)
        weights[0] *= 0.5
        weights[-1] *= 0.5
        # z-scores of the grid relative to its own center, shared by all
        # classes because the grid is re-centered at each H_k.
        self._zc = offsets / self.sigma
        self._w = weights
        self._center_logcdf = log_ndtr(self._zc)
        self._center_logpdf = -0.5 * self._zc**2 - _LOG_SQRT_2PI
        self._w_z_over_sigma = weights * self._zc / self.sigma
        self._log_sigma = np.log(self.sigma)

    def probabilities(self, values: np.ndarray):
        """Outcome probabilities for a histogram given as an array.

        Returns ``(probs, cache)`` where probs sums to exactly 1 and the
        cache holds the intermediates ``jacobian`` needs.
        """
        v = np.asarray(values, dtype=float)
        diffs = (v[:, None] - v[None, :]) / self.sigma
        z = diffs[:, :, None] + self._zc[None, None, :]
        logcdf = log_ndtr(z)
        # Sum over j includes the j = k term, which is the grid's own
        # center CDF; swap it for the center density to get the integrand.
        log_integrand = (
            logcdf.sum(axis=1)
            - self._center_logcdf
            + self._center_logpdf
            - self._log_sigma
        )
        integrand = np.exp(log_integrand)
        raw = integrand @ self._w
        total = raw.sum()
        cache = (integrand, z, logcdf, raw, total)
        return raw / total, cache

    def jacobian(self, cache) -> OutcomeJacobian:
        """Jacobian of ``probabilities`` at the cached point, frozen grid."""
        integrand, z, logcdf, raw, total = cache
        # d log Phi / dx = pdf/cdf, evaluated in log space to stay finite
        # deep in the lower tail.
        pdf_over_cdf = np.exp(-0.5 * z**2 - _LOG_SQRT_2PI - logcdf)
        jac = -np.einsum(
            "kt,kjt,t->kj", integrand, pdf_over_cdf, self._w
        ) / self.sigma
        np.fill_diagonal(jac, integrand @ self._w_z_over_sigma)
        # Renormalization by the raw mass adds a rank-one correction.
        return jac / total - np.outer(raw, jac.sum(axis=0)) / total**2

    def raw_mass(self, values: np.ndarray) -> float:
        """Quadrature mass before renormalization (close to 1)."""
        _, cache = self.probabilities(values)
        return float(cache[4])


def _values_of(h) -> np.ndarray:
    if isinstance(h, (VoteHistogram, RealHistogram)):
        return h.as_array()
    return np.asarray(h, dtype=float)


def outcome_distribution(
    h, sigma: float, grid: IntegrationGrid = DEFAULT_GRID
) -> OutcomeDistribution:
    """Distribution of the mechanism's answer for histogram ``h``.

    Accepts a vote histogram, a real-valued estimate, or a plain array.
    The returned vector is renormalized to sum exactly 1; the mass the
    truncated grid captured is recorded as ``raw_mass``.
    """
    model = OutcomeModel(sigma, grid)
    probs, cache = model.probabilities(_values_of(h))
    return OutcomeDistribution(
        probs=tuple(float(p) for p in probs), raw_mass=float(cache[4])
    )


def outcome_jacobian(
    h, sigma: float, grid: IntegrationGrid = DEFAULT_GRID
) -> OutcomeJacobian:
    """Partial derivatives dQ_k/dH_j of the discretized distribution."""
    model = OutcomeModel(sigma, grid)
    _, cache = model.probabilities(_values_of(h))
    return model.jacobian(cache)
