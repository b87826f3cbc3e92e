"""Tests for the batting-average random walk."""

import math

import numpy as np
import pytest

from pennantsim.batting import BattingPath, WalkConfig, estimate_step_std, simulate_walk


# ---------------------------------------------------------------------------
# config and path types


def test_config_validation():
    with pytest.raises(ValueError):
        WalkConfig(step_std=0.0)
    with pytest.raises(ValueError):
        WalkConfig(clamp_low=0.3, clamp_high=0.2)
    with pytest.raises(ValueError):
        WalkConfig(league_mean=0.5, clamp_high=0.45)


def test_path_requires_consistent_start():
    cfg = WalkConfig()
    with pytest.raises(ValueError):
        BattingPath(start_deviation=0.1, deviations=np.array([0.0, 0.1]), cfg=cfg)


# ---------------------------------------------------------------------------
# step-std estimation


def test_estimate_rejects_short_series():
    with pytest.raises(ValueError):
        estimate_step_std([0.25, 0.26])


def test_estimate_arithmetic_sequence_is_zero():
    # exactly representable constant increment -> exactly zero spread
    series = np.arange(16) * 0.25
    assert estimate_step_std(series) == 0.0


def test_estimate_constant_series_is_zero():
    assert estimate_step_std([0.25] * 10) == 0.0


def test_estimate_alternating_increments_closed_form():
    # increments +d, -d repeated k times: sample std = d*sqrt(2k/(2k-1))
    d = 0.003
    k = 8
    deltas = np.tile([d, -d], k)
    series = np.concatenate([[0.25], 0.25 + np.cumsum(deltas)])
    expected = d * math.sqrt(2 * k / (2 * k - 1))
    assert estimate_step_std(series) == pytest.approx(expected, rel=1e-12)


def test_estimate_recovers_simulated_sigma():
    rng = np.random.default_rng(23)
    sigma = 0.0015
    series = 0.25 + np.cumsum(rng.normal(0.0, sigma, 10**4))
    assert abs(estimate_step_std(series) - sigma) < 0.05 * sigma


# ---------------------------------------------------------------------------
# walk simulation


def test_walk_zero_steps_keeps_start_only():
    rng = np.random.default_rng(1)
    path = simulate_walk(0.012, 0, WalkConfig(), rng)
    np.testing.assert_array_equal(path.deviations, [0.012])


def test_walk_negligible_step_is_flat():
    rng = np.random.default_rng(2)
    path = simulate_walk(0.01, 50, WalkConfig(step_std=1e-12), rng)
    np.testing.assert_allclose(path.deviations, 0.01, atol=1e-9)


def test_walk_variance_growth():
    # Var(dev_100 - dev_0) must track 100 * sigma^2
    rng = np.random.default_rng(33)
    cfg = WalkConfig(step_std=0.0015)
    n_paths = 10**4
    gaps = np.array([simulate_walk(0.0, 100, cfg, rng).deviations[-1]
                     for _ in range(n_paths)])
    target = 100 * cfg.step_std ** 2
    assert abs(np.var(gaps, ddof=1) - target) < 0.05 * target


def test_walk_increment_mean_is_centered():
    rng = np.random.default_rng(34)
    cfg = WalkConfig(step_std=0.0015)
    n_paths = 10**4
    finals = np.array([simulate_walk(0.0, 60, cfg, rng).deviations[-1]
                       for _ in range(n_paths)])
    se = finals.std(ddof=1) / math.sqrt(n_paths)
    assert abs(finals.mean()) < 4 * se


def test_walk_averages_clamped():
    rng = np.random.default_rng(35)
    cfg = WalkConfig(step_std=0.05)  # huge steps to force excursions
    path = simulate_walk(0.0, 200, cfg, rng)
    averages = path.averages
    assert averages.min() >= cfg.clamp_low
    assert averages.max() <= cfg.clamp_high
    # the raw deviations are allowed outside the clamp range
    implied_raw = cfg.league_mean + path.deviations
    assert implied_raw.min() < cfg.clamp_low or implied_raw.max() > cfg.clamp_high


def test_walk_deterministic_per_seed():
    cfg = WalkConfig()
    a = simulate_walk(0.005, 30, cfg, np.random.default_rng(99))
    b = simulate_walk(0.005, 30, cfg, np.random.default_rng(99))
    np.testing.assert_array_equal(a.deviations, b.deviations)


def test_walk_increments_match_first_differences():
    rng = np.random.default_rng(36)
    path = simulate_walk(0.002, 40, WalkConfig(), rng)
    np.testing.assert_allclose(path.increments, np.diff(path.deviations),
                               atol=0.0)
