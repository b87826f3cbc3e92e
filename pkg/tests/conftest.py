"""Session-scoped fixtures shared across test modules.

The exponent-recovery dataset (5,000 synthetic games with known exponents)
and its grid-posterior oracle are expensive enough to build once and reuse;
the fitted chains ride along with their wall-clock time so the acceptance
checks can assert on runtime without refitting.
"""

import datetime
import time

import numpy as np
import pytest

from oracles import grid_posterior_means
from pennantsim.mcmc import (
    ChainConfig,
    PriorConfig,
    run_chains,
    tune_proposal_std,
)
from pennantsim.model import GameRecord

RECOVERY_SEED = 20260822
TRUE_EXPONENTS = (1.5, 0.8, 0.6)
N_RECOVERY_GAMES = 5000


def _ratio_record(i, alpha, beta, gamma, home_won):
    """GameRecord whose strength ratios come out exactly (alpha, beta, gamma)."""
    day = datetime.date(2024, 4, 1) + datetime.timedelta(days=i % 150)
    return GameRecord(
        date=day, home_team="HME", away_team="AWY",
        home_win_pct=0.4 * alpha, away_win_pct=0.4,
        home_batting_avg=0.25 * beta, away_batting_avg=0.25,
        home_era=4.0, away_era=4.0 * gamma,
        home_won=home_won,
    )


@pytest.fixture(scope="session")
def recovery_dataset():
    """(games, log_ratios, home_won) simulated at the known exponents.

    Ratios are log-uniform in [0.8, 1.25], well inside the flooring region,
    so the records' derived ratios match the sampled ones exactly.
    """
    rng = np.random.default_rng(RECOVERY_SEED)
    log_ratios = rng.uniform(np.log(0.8), np.log(1.25),
                             size=(N_RECOVERY_GAMES, 3))
    lam = np.exp(log_ratios @ np.asarray(TRUE_EXPONENTS))
    home_won = rng.random(N_RECOVERY_GAMES) < lam / (1.0 + lam)
    ratios = np.exp(log_ratios)
    games = [_ratio_record(i, ratios[i, 0], ratios[i, 1], ratios[i, 2],
                           bool(home_won[i]))
             for i in range(N_RECOVERY_GAMES)]
    return games, log_ratios, home_won


@pytest.fixture(scope="session")
def grid_oracle(recovery_dataset):
    """Posterior means from the 40^3 midpoint-lattice oracle."""
    _, log_ratios, home_won = recovery_dataset
    return grid_posterior_means(log_ratios, home_won, r_max=5.0, n_cells=40)


@pytest.fixture(scope="session")
def recovery_fit(recovery_dataset):
    """Four tuned chains on the recovery dataset, with wall-clock timing."""
    games, _, _ = recovery_dataset
    prior = PriorConfig(r_max=5.0)
    base = ChainConfig(n_iterations=20_000, burn_in=2_000, thin=5, seed=2024)
    start = time.perf_counter()
    tuned_std = tune_proposal_std(games, prior, base)
    chains = run_chains(games, prior,
                        ChainConfig(n_iterations=base.n_iterations,
                                    burn_in=base.burn_in, thin=base.thin,
                                    proposal_std=tuned_std, seed=base.seed),
                        n_chains=4)
    elapsed = time.perf_counter() - start
    return {"chains": chains, "elapsed": elapsed, "tuned_std": tuned_std,
            "prior": prior}
