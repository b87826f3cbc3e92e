"""Team batting averages as zero-centered Gaussian random walks.

Trajectories are modeled as deviations from a league mean; each future game
adds one Normal(0, step_std^2) increment. Implied batting averages (mean +
deviation) are clamped to a physical range, the raw deviations are not.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WalkConfig:
    """Random-walk settings: per-game increment scale, the league mean the
    deviations are centered on, and the clamp range for implied averages."""

    step_std: float = 0.0015
    league_mean: float = 0.250
    clamp_low: float = 0.150
    clamp_high: float = 0.400

    def __post_init__(self):
        if not (math.isfinite(self.step_std) and self.step_std > 0):
            raise ValueError(f"step_std must be positive, got {self.step_std}")
        if not 0.0 < self.clamp_low < self.league_mean < self.clamp_high < 1.0:
            raise ValueError(
                f"need 0 < clamp_low < league_mean < clamp_high < 1, got "
                f"({self.clamp_low}, {self.league_mean}, {self.clamp_high})")


@dataclass(frozen=True)
class BattingPath:
    """One simulated deviation trajectory plus the config that interprets it."""

    start_deviation: float
    deviations: np.ndarray     # deviations[0] == start_deviation
    cfg: WalkConfig

    def __post_init__(self):
        if self.deviations.ndim != 1 or self.deviations.size == 0:
            raise ValueError("deviations must be a nonempty 1-d array")
        if self.deviations[0] != self.start_deviation:
            raise ValueError("deviations[0] must equal start_deviation")

    @property
    def averages(self) -> np.ndarray:
        """Implied batting averages: league mean plus deviation, clamped."""
        return np.clip(self.cfg.league_mean + self.deviations,
                       self.cfg.clamp_low, self.cfg.clamp_high)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.deviations)


def estimate_step_std(series) -> float:
    """Sample standard deviation of a batting-average series' first differences.

    A series whose increments have zero variance (constant, or perfectly
    arithmetic) yields 0 with a degenerate-fit warning — a zero step size
    turns the walk into a constant.
    """
    values = np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise ValueError("series must be 1-d")
    if values.size < 3:
        raise ValueError(f"need at least 3 observations to estimate the step "
                         f"std, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise ValueError("series contains non-finite values")
    estimate = float(np.std(np.diff(values), ddof=1))
    if estimate == 0.0:
        logger.warning("series increments have zero variance; step std "
                       "estimate is degenerate (0)")
    return estimate


def simulate_walk(start_deviation: float, n_steps: int, cfg: WalkConfig,
                  rng: np.random.Generator) -> BattingPath:
    """Simulate a deviation path of n_steps increments past the start."""
    if n_steps < 0:
        raise ValueError(f"n_steps must be nonnegative, got {n_steps}")
    if not math.isfinite(start_deviation):
        raise ValueError(f"start_deviation is not finite: {start_deviation}")
    deviations = np.empty(n_steps + 1)
    deviations[0] = start_deviation
    if n_steps:
        deviations[1:] = start_deviation + np.cumsum(
            rng.normal(0.0, cfg.step_std, n_steps))
    return BattingPath(start_deviation=start_deviation, deviations=deviations,
                       cfg=cfg)
