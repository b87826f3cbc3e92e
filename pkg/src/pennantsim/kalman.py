"""Local-level Kalman filtering for starting-pitcher ERA series.

The latent ERA follows a random walk x[t+1] = x[t] + w[t] with process noise
variance q; observations are y[t] = x[t] + v[t] with observation noise
variance r. This module covers filtering, pure-propagation forecasting,
windowed maximum-likelihood noise estimation, tercile grouping of teams by
early-season ERA, and synthetic ERA path generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

# ERA values emitted by the path simulator never go below this.
ERA_FLOOR = 0.01

# Noise estimation is unreliable below this many observations.
MIN_WINDOW = 10

# Bounds of the log-sigma search box used by the noise MLE.
_SIGMA_MIN = 1e-4
_SIGMA_MAX = 10.0

# Diffuse initial variance = this multiple of the window's sample variance.
_DIFFUSE_SCALE = 10.0


@dataclass(frozen=True)
class GaussianState:
    """Latent-level belief: mean and variance of a Gaussian."""

    mean: float
    var: float

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValueError(f"state mean is not finite: {self.mean}")
        if not (math.isfinite(self.var) and self.var >= 0):
            raise ValueError(f"state variance must be nonnegative, got {self.var}")


@dataclass(frozen=True)
class NoiseParams:
    """Observation / process noise standard deviations of the local-level model."""

    sigma_obs: float
    sigma_process: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma_obs) and self.sigma_obs >= 0):
            raise ValueError(f"sigma_obs must be nonnegative, got {self.sigma_obs}")
        if not (math.isfinite(self.sigma_process) and self.sigma_process >= 0):
            raise ValueError(f"sigma_process must be nonnegative, got {self.sigma_process}")


@dataclass(frozen=True)
class NoiseEstimate:
    """One windowed noise fit: which team/window it came from, the parameters,
    and whether the optimizer actually converged (degenerate fits are kept but
    flagged so downstream sampling can exclude them)."""

    team: str
    window_start: int
    params: NoiseParams
    converged: bool

    @property
    def sigma_obs(self) -> float:
        return self.params.sigma_obs

    @property
    def sigma_process(self) -> float:
        return self.params.sigma_process


@dataclass(frozen=True)
class TercileGrouping:
    """Teams split into thirds by early-season ERA, ascending."""

    low: tuple[str, ...]
    medium: tuple[str, ...]
    high: tuple[str, ...]

    def __post_init__(self):
        groups = (self.low, self.medium, self.high)
        all_teams = [t for g in groups for t in g]
        if len(set(all_teams)) != len(all_teams):
            raise ValueError("tercile groups overlap")
        sizes = sorted(len(g) for g in groups)
        if sizes[-1] - sizes[0] > 1:
            raise ValueError(f"tercile sizes differ by more than 1: "
                             f"{[len(g) for g in groups]}")

    def label_of(self, team: str) -> str:
        for label, group in (("low", self.low), ("medium", self.medium),
                             ("high", self.high)):
            if team in group:
                return label
        raise KeyError(f"team {team!r} not in any tercile")

    @property
    def labels(self) -> dict[str, str]:
        return {t: label
                for label, group in (("low", self.low), ("medium", self.medium),
                                     ("high", self.high))
                for t in group}


@dataclass(frozen=True)
class FilterResult:
    """Output of filter_series: per-step posterior states plus the one-step-ahead
    predictive states needed for likelihood evaluation."""

    filtered: tuple[GaussianState, ...]
    predicted: tuple[GaussianState, ...]

    def __post_init__(self):
        if len(self.filtered) != len(self.predicted):
            raise ValueError("filtered/predicted length mismatch")

    @property
    def means(self) -> np.ndarray:
        return np.array([s.mean for s in self.filtered])

    @property
    def variances(self) -> np.ndarray:
        return np.array([s.var for s in self.filtered])


# ---------------------------------------------------------------------------
# filtering and forecasting


def filter_step(prior: GaussianState, observation: float,
                noise: NoiseParams) -> GaussianState:
    """One predict/update cycle of the local-level filter.

    Predict adds the process variance; update blends in the observation with
    gain K = P/(P + r), leaving the posterior variance at (1-K)P <= P.
    """
    if not math.isfinite(observation):
        raise ValueError(f"observation is not finite: {observation}")
    var_pred = prior.var + noise.sigma_process ** 2
    denom = var_pred + noise.sigma_obs ** 2
    if denom == 0.0:
        raise ValueError("Kalman gain undefined: zero observation noise with "
                         "zero predicted variance")
    gain = var_pred / denom
    mean = prior.mean + gain * (observation - prior.mean)
    var = (1.0 - gain) * var_pred
    return GaussianState(mean=mean, var=var)


def filter_series(init: GaussianState, observations,
                  noise: NoiseParams) -> FilterResult:
    """Filter a whole series; filtered[t] is the posterior after observation t.

    The first observation is treated like any other: one process step from
    the initial state, then the measurement update. predicted[t] holds the
    pre-update state (the one-step-ahead predictive mean/variance).
    """
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 1 or obs.size == 0:
        raise ValueError("observations must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(obs)):
        raise ValueError("observations contain non-finite values")
    q = noise.sigma_process ** 2
    filtered = []
    predicted = []
    state = init
    for y in obs:
        predicted.append(GaussianState(state.mean, state.var + q))
        state = filter_step(state, float(y), noise)
        filtered.append(state)
    return FilterResult(filtered=tuple(filtered), predicted=tuple(predicted))


def forecast(state: GaussianState, horizon: int,
             noise: NoiseParams) -> list[GaussianState]:
    """Pure-propagation forecast: h steps ahead the mean is unchanged (random
    walk) and the variance has grown by h process-noise variances.

    Returns one state per step 1..horizon; horizon 0 gives an empty forecast.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    q = noise.sigma_process ** 2
    return [GaussianState(mean=state.mean, var=state.var + h * q)
            for h in range(1, horizon + 1)]


# ---------------------------------------------------------------------------
# noise estimation


def _prediction_error_loglik(log_sigmas, obs: np.ndarray,
                             init: GaussianState) -> float:
    """Gaussian log-likelihood of a window via one-step prediction errors."""
    r = math.exp(2.0 * log_sigmas[0])   # observation variance
    q = math.exp(2.0 * log_sigmas[1])   # process variance
    mean, var = init.mean, init.var
    ll = 0.0
    for y in obs:
        var_pred = var + q
        f = var_pred + r
        if f <= 0.0:
            return -math.inf
        e = y - mean
        ll -= 0.5 * (math.log(2.0 * math.pi * f) + e * e / f)
        gain = var_pred / f
        mean += gain * e
        var = (1.0 - gain) * var_pred
    return ll


def estimate_noise(window, *, team: str = "", window_start: int = 0) -> NoiseEstimate:
    """Maximum-likelihood (sigma_obs, sigma_process) for one window.

    Maximizes the one-step prediction-error likelihood over log-sigmas with
    bounded Nelder-Mead from three deterministic data-driven starts, under a
    diffuse initial state (mean = first observation, variance = 10x the
    window's sample variance). A window with no variation at all has its MLE
    pinned at zero noise, outside the search box; that case short-circuits to
    (0, 0) flagged as not converged.
    """
    obs = np.asarray(window, dtype=float)
    if obs.ndim != 1:
        raise ValueError("window must be 1-d")
    if obs.size < MIN_WINDOW:
        raise ValueError(f"window too short for noise estimation: "
                         f"{obs.size} < {MIN_WINDOW}")
    if not np.all(np.isfinite(obs)):
        raise ValueError("window contains non-finite values")

    if np.all(obs == obs[0]):
        # Constant window: the likelihood increases without bound as both
        # sigmas shrink, so report the degenerate limit rather than a box
        # corner.
        return NoiseEstimate(team, window_start, NoiseParams(0.0, 0.0),
                             converged=False)
    sample_var = float(np.var(obs, ddof=1))

    init = GaussianState(mean=float(obs[0]), var=_DIFFUSE_SCALE * sample_var)
    sample_sd = math.sqrt(sample_var)
    diff_sd = float(np.std(np.diff(obs), ddof=1))
    # Starts: noise split evenly; observation-dominated; scaled to the
    # first-difference spread.
    starts = [
        (sample_sd / math.sqrt(2.0), sample_sd / math.sqrt(2.0)),
        (sample_sd, 0.1 * sample_sd),
        (0.7 * diff_sd, 0.1 * diff_sd),
    ]
    lo, hi = math.log(_SIGMA_MIN), math.log(_SIGMA_MAX)

    best_x = None
    best_ll = -math.inf
    converged = False
    for s_obs, s_proc in starts:
        x0 = np.clip([math.log(max(s_obs, _SIGMA_MIN)),
                      math.log(max(s_proc, _SIGMA_MIN))], lo, hi)
        res = optimize.minimize(
            lambda x: -_prediction_error_loglik(x, obs, init), x0,
            method="Nelder-Mead",
            bounds=[(lo, hi), (lo, hi)],
            options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 400},
        )
        if -res.fun > best_ll:
            best_ll = -res.fun
            best_x = res.x
            converged = bool(res.success)
    if best_x is None:  # pragma: no cover - starts list is never empty
        raise RuntimeError("noise estimation failed to evaluate any start")

    params = NoiseParams(sigma_obs=math.exp(best_x[0]),
                         sigma_process=math.exp(best_x[1]))
    return NoiseEstimate(team, window_start, params, converged)


def sliding_noise_estimates(series, window_len: int, *,
                            team: str = "") -> list[NoiseEstimate]:
    """Noise estimates for every stride-1 window of consecutive observations.

    Window k covers series[k : k+window_len]; a series of length n yields
    n - window_len + 1 estimates.
    """
    if window_len < MIN_WINDOW:
        raise ValueError(f"window_len must be >= {MIN_WINDOW}, got {window_len}")
    obs = np.asarray(series, dtype=float)
    if obs.ndim != 1:
        raise ValueError("series must be 1-d")
    if obs.size < window_len:
        raise ValueError(f"series of length {obs.size} shorter than "
                         f"window {window_len}")
    return [estimate_noise(obs[k:k + window_len], team=team, window_start=k)
            for k in range(obs.size - window_len + 1)]


# ---------------------------------------------------------------------------
# tercile grouping and noise resampling


def group_terciles(team_early_eras: dict[str, float]) -> TercileGrouping:
    """Split teams into low/medium/high thirds by early-season mean ERA.

    Sorted ascending by ERA with ties broken by team identifier; when the
    count is not divisible by 3, the extra teams go to the lower terciles
    (31 teams -> 11/10/10).
    """
    if len(team_early_eras) < 3:
        raise ValueError(f"need at least 3 teams to form terciles, "
                         f"got {len(team_early_eras)}")
    ordered = sorted(team_early_eras, key=lambda t: (team_early_eras[t], t))
    n = len(ordered)
    base, rem = divmod(n, 3)
    sizes = [base + (1 if i < rem else 0) for i in range(3)]
    low = tuple(ordered[:sizes[0]])
    medium = tuple(ordered[sizes[0]:sizes[0] + sizes[1]])
    high = tuple(ordered[sizes[0] + sizes[1]:])
    return TercileGrouping(low=low, medium=medium, high=high)


def sample_noise(group: str, pool: list[NoiseEstimate],
                 rng: np.random.Generator) -> NoiseParams:
    """Uniform draw of one (sigma_obs, sigma_process) pair from a tercile's pool.

    The pair is kept intact (never mixed across windows) so the dependence
    between the two noise scales survives resampling. Non-converged fits are
    ignored.
    """
    usable = [e for e in pool if e.converged]
    if not usable:
        raise ValueError(f"no converged noise estimates in pool for tercile "
                         f"{group!r}")
    return usable[int(rng.integers(len(usable)))].params


# ---------------------------------------------------------------------------
# synthetic path generation


def simulate_era_path(init_mean: float, noise: NoiseParams, n_steps: int,
                      rng: np.random.Generator, *,
                      return_latent: bool = False):
    """Simulate an observed ERA series from the local-level model.

    Each step advances the latent level by one process-noise increment and
    emits that level plus observation noise. Emitted values are floored at
    0.01 (an ERA cannot be negative). With return_latent the un-floored
    latent path comes back too.
    """
    if init_mean < 0:
        raise ValueError(f"init_mean must be nonnegative, got {init_mean}")
    if n_steps < 0:
        raise ValueError(f"n_steps must be nonnegative, got {n_steps}")
    latent = init_mean + np.cumsum(rng.normal(0.0, noise.sigma_process, n_steps))
    observed = np.maximum(latent + rng.normal(0.0, noise.sigma_obs, n_steps),
                          ERA_FLOOR)
    if return_latent:
        return observed, latent
    return observed
