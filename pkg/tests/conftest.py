"""Shared helpers: random inputs and independent quadrature oracles.

The oracles here deliberately avoid the library's log-space evaluation
path: probabilities come from a plain-product trapezoid sum on an
explicit grid, so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from pateprobe import VoteHistogram


def random_histogram(
    rng: np.random.Generator, c: int | None = None, n: int = 250
) -> VoteHistogram:
    """Random vote histogram with ``c`` classes summing to ``n``."""
    if c is None:
        c = int(rng.integers(2, 11))
    counts = rng.multinomial(n, np.full(c, 1.0 / c))
    return VoteHistogram(tuple(int(v) for v in counts))


def frozen_grid(base: np.ndarray, sigma: float, half_width: float = 6.0,
                step: float = 1.0):
    """Trapezoid nodes and weights centered at ``base``, per class."""
    eff = min(step, sigma / 10.0)
    n_half = int(round(half_width * sigma / eff))
    offsets = np.arange(-n_half, n_half + 1) * eff
    weights = np.full(offsets.size, eff)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return base[:, None] + offsets[None, :], weights


def direct_probs(values: np.ndarray, nodes: np.ndarray,
                 weights: np.ndarray, sigma: float) -> np.ndarray:
    """Outcome probabilities by direct products on a fixed grid.

    ``nodes`` stays put while ``values`` moves, which is exactly the
    frozen-grid semantics the analytic Jacobian promises to match.
    """
    c = values.size
    z = (nodes[:, None, :] - values[None, :, None]) / sigma
    cdfs = ndtr(z)
    probs = np.empty(c)
    for k in range(c):
        others = np.prod(
            np.delete(cdfs[k], k, axis=0), axis=0
        )
        own = np.exp(-0.5 * z[k, k] ** 2) / (np.sqrt(2 * np.pi) * sigma)
        probs[k] = (others * own) @ weights
    return probs / probs.sum()


def fd_jacobian(values: np.ndarray, sigma: float, delta: float = 1e-3,
                half_width: float = 6.0, step: float = 1.0) -> np.ndarray:
    """Central finite differences of the frozen-grid probabilities."""
    nodes, weights = frozen_grid(values, sigma, half_width, step)
    c = values.size
    jac = np.empty((c, c))
    for j in range(c):
        bump = np.zeros(c)
        bump[j] = delta
        hi = direct_probs(values + bump, nodes, weights, sigma)
        lo = direct_probs(values - bump, nodes, weights, sigma)
        jac[:, j] = (hi - lo) / (2 * delta)
    return jac
