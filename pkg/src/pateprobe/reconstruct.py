"""Histogram reconstruction from repeated mechanism answers.

The attack estimates the mechanism's output distribution by Monte Carlo,
then inverts the closed-form outcome model with gradient descent on the
Euclidean distance between model and estimate, and finally shifts the
iterate so it sums to the teacher count. The shift is the only thing
pinning absolute levels: adding a constant to every bin leaves the
outcome distribution unchanged, so the optimum is a line, not a point.

Stepping uses normalized gradients: the step length is a fixed numerator
divided by the gradient norm, starting at 10 and dropping to 1 once the
loss falls under a switch threshold. A proposal that fails to decrease
the loss triggers that same drop the first time; afterwards the step is
halved geometrically and the run halts as stalled when it underflows a
small floor. Two stopping rules are available, separately or combined:
loss under a threshold, or any entry of the shifted iterate going
negative.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .core import RealHistogram, VoteHistogram, l1_error, shift_to_total
from .mechanism import QuerySample
from .outcome import DEFAULT_GRID, IntegrationGrid, OutcomeModel

__all__ = [
    "MonteCarloEstimate",
    "OptimizerConfig",
    "ReconstructionResult",
    "StopMode",
    "InitMode",
    "StopReason",
    "estimate_distribution",
    "loss",
    "reconstruct",
]

_TRACE_CAP = 2048


class StopMode(Enum):
    LOSS_THRESHOLD = "loss_threshold"
    NEGATIVE_ENTRY = "negative_entry"
    BOTH = "both"


class InitMode(Enum):
    ZEROS = "zeros"
    UNIFORM_N = "uniform_n"


class StopReason(Enum):
    LOSS_THRESHOLD = "loss_threshold"
    NEGATIVE_ENTRY = "negative_entry"
    ZERO_GRADIENT = "zero_gradient"
    STALLED = "stalled"
    MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Per-class answer frequencies from ``m`` queries, with their SEs."""

    q_bar: tuple[float, ...]
    m: int
    std_err: tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.q_bar, dtype=float)


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs of the descent loop; defaults mirror the attack write-up.

    ``lr_numerator_floor`` bounds the geometric backtracking that kicks
    in after the one-time numerator drop: a proposal still increasing
    the loss at the floor halts the run as stalled.
    """

    loss_threshold: float = 0.01
    lr_numerator_initial: float = 10.0
    lr_numerator_final: float = 1.0
    lr_switch_loss: float = 0.1
    max_iters: int = 200_000
    stop_mode: StopMode = StopMode.BOTH
    init: InitMode = InitMode.ZEROS
    lr_numerator_floor: float = 2.0**-20

    def __post_init__(self) -> None:
        if self.loss_threshold <= 0 or self.lr_switch_loss <= 0:
            raise ValueError("thresholds must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if min(
            self.lr_numerator_initial,
            self.lr_numerator_final,
            self.lr_numerator_floor,
        ) <= 0:
            raise ValueError("learning-rate numerators must be positive")


@dataclass(frozen=True)
class ReconstructionResult:
    """Outcome of one reconstruction run."""

    estimate: RealHistogram
    raw_estimate: RealHistogram
    final_loss: float
    iterations: int
    stop_reason: StopReason
    error: float | None
    loss_trace: tuple[float, ...]


def estimate_distribution(s: QuerySample) -> MonteCarloEstimate:
    """Empirical answer distribution of a query sample."""
    if s.m < 1:
        raise ValueError("empty sample")
    q = np.asarray(s.counts, dtype=float) / s.m
    se = np.sqrt(q * (1.0 - q) / s.m)
    return MonteCarloEstimate(
        q_bar=tuple(float(v) for v in q),
        m=s.m,
        std_err=tuple(float(v) for v in se),
    )


def _target_of(q_bar) -> np.ndarray:
    """Coerce an estimate, distribution, or array into a target vector."""
    if isinstance(q_bar, MonteCarloEstimate):
        return q_bar.as_array()
    if hasattr(q_bar, "as_array"):
        return q_bar.as_array()
    return np.asarray(q_bar, dtype=float)


def loss(
    est: RealHistogram,
    q_bar,
    sigma: float,
    grid: IntegrationGrid = DEFAULT_GRID,
) -> tuple[float, np.ndarray]:
    """Euclidean distance between Q(est) and the target, with gradient.

    The gradient flows through the analytic Jacobian of the outcome
    model. At zero loss the gradient is defined as the zero vector.
    """
    target = _target_of(q_bar)
    values = est.as_array()
    if values.size != target.size:
        raise ValueError("estimate and target dimensions differ")
    model = OutcomeModel(sigma, grid)
    probs, cache = model.probabilities(values)
    residual = probs - target
    value = float(np.linalg.norm(residual))
    if value == 0.0:
        return 0.0, np.zeros(values.size)
    grad = model.jacobian(cache).T @ residual / value
    return value, grad


def reconstruct(
    q_bar,
    sigma: float,
    n: int,
    cfg: OptimizerConfig = OptimizerConfig(),
    grid: IntegrationGrid = DEFAULT_GRID,
    truth: VoteHistogram | None = None,
    trace_path: str | Path | None = None,
) -> ReconstructionResult:
    """Invert the outcome model to recover a histogram estimate.

    ``q_bar`` may be a MonteCarloEstimate, an OutcomeDistribution (for
    noiseless inversion), or a plain probability vector. ``n`` is the
    vote total the final estimate is shifted to. When ``truth`` is given
    the normalized L1 error of the shifted estimate is reported.

    Deterministic: same inputs, same result. Non-convergence at
    ``max_iters`` is reported through ``stop_reason``, not raised.
    """
    target = _target_of(q_bar)
    c = target.size
    if c < 2:
        raise ValueError("need at least 2 classes")
    if n <= 0:
        raise ValueError("vote total must be positive")
    model = OutcomeModel(sigma, grid)

    if cfg.init is InitMode.UNIFORM_N:
        est = np.full(c, n / c)
    else:
        est = np.zeros(c)

    probs, cache = model.probabilities(est)
    residual = probs - target
    cur_loss = float(np.linalg.norm(residual))
    numer = cfg.lr_numerator_initial
    switched = False
    iterations = 0
    reason = StopReason.MAX_ITERS
    trace: list[tuple[int, float, float]] = [(0, cur_loss, numer)]

    check_loss = cfg.stop_mode in (StopMode.LOSS_THRESHOLD, StopMode.BOTH)
    check_negative = cfg.stop_mode in (StopMode.NEGATIVE_ENTRY, StopMode.BOTH)

    while iterations < cfg.max_iters:
        if check_loss and cur_loss < cfg.loss_threshold:
            reason = StopReason.LOSS_THRESHOLD
            break
        if cur_loss == 0.0:
            reason = StopReason.ZERO_GRADIENT
            break
        grad = model.jacobian(cache).T @ residual / cur_loss
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < 1e-12:
            reason = StopReason.ZERO_GRADIENT
            break
        if not switched and cur_loss < cfg.lr_switch_loss:
            switched = True
            numer = cfg.lr_numerator_final
        stalled = False
        while True:
            proposal = est - (numer / grad_norm) * grad
            new_probs, new_cache = model.probabilities(proposal)
            new_loss = float(np.linalg.norm(new_probs - target))
            if new_loss < cur_loss:
                break
            if not switched:
                # One-time numerator drop on the first uphill proposal.
                switched = True
                numer = cfg.lr_numerator_final
            else:
                numer *= 0.5
            if numer < cfg.lr_numerator_floor:
                stalled = True
                break
        if stalled:
            reason = StopReason.STALLED
            break
        est, probs, cache, cur_loss = proposal, new_probs, new_cache, new_loss
        residual = probs - target
        if switched:
            numer = min(cfg.lr_numerator_final, numer * 2.0)
        iterations += 1
        trace.append((iterations, cur_loss, numer))
        if check_negative:
            if np.any(est + (n - est.sum()) / c < 0):
                reason = StopReason.NEGATIVE_ENTRY
                break

    raw = RealHistogram.from_array(est)
    shifted = shift_to_total(raw, n)
    error = l1_error(truth, shifted) if truth is not None else None

    if trace_path is not None:
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "loss", "lr_numerator"])
            writer.writerows(trace)

    losses = [point[1] for point in trace]
    if len(losses) > _TRACE_CAP:
        stride = -(-len(losses) // _TRACE_CAP)
        sampled = losses[::stride]
        if sampled[-1] != losses[-1]:
            sampled.append(losses[-1])
        losses = sampled

    return ReconstructionResult(
        estimate=shifted,
        raw_estimate=raw,
        final_loss=cur_loss,
        iterations=iterations,
        stop_reason=reason,
        error=error,
        loss_trace=tuple(losses),
    )
