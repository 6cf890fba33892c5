"""Per-population haplotype bootstrap with nearest-rank percentile bands.

Random streams: replicate ``i`` of a run seeded with ``seed`` draws from
``numpy.random.Generator(Philox(SeedSequence(seed, spawn_key=(i,))))``.
Replicates are therefore reproducible in isolation and the result does not
depend on how replicates are scheduled across workers.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, UndefinedStatisticError

RNG_ALGORITHM = "numpy.Philox-4x64 via SeedSequence(seed, spawn_key=(replicate,))"


def replicate_rng(seed, index):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class BootstrapConfig:
    n_replicates: int = 100
    per_pop_cap: int = 40
    ci_level: float = 0.95
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if int(self.n_replicates) < 2:
            raise ConfigurationError("bootstrap needs at least 2 replicates")
        if int(self.per_pop_cap) < 1:
            raise ConfigurationError("per-population cap must be at least 1")
        if not 0.0 < float(self.ci_level) < 1.0:
            raise ConfigurationError("confidence level must lie strictly between 0 and 1")
        if not 0 <= int(self.seed) < 1 << 64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if int(self.threads) < 1:
            raise ConfigurationError("threads must be at least 1")


@dataclass(frozen=True)
class BootstrapSummary:
    """Point estimate, percentile band and the raw replicate values.

    Scalars for a scalar statistic, arrays for a vector-valued one.
    Missing (undefined) replicates are ``nan`` in ``replicate_values``.
    """

    point: object
    ci_low: object
    ci_high: object
    replicate_values: np.ndarray
    n_missing: int = 0
    reliable: bool = True
    draw_sizes: dict = field(default_factory=dict)


def _nearest_rank(n, fraction):
    # round first so 0.975 * 100 does not land a hair above 97.5
    rank = math.ceil(round(fraction * n, 9))
    return min(max(rank, 1), n)


def percentile_interval(values, level):
    """Nearest-rank interval at ``(1 - level)/2`` and ``(1 + level)/2``.

    ``nan`` entries are dropped before ranking.

    >>> percentile_interval(range(1, 101), 0.95)
    (3.0, 98.0)
    """
    if not 0.0 < level < 1.0:
        raise ConfigurationError("confidence level must lie strictly between 0 and 1")
    vals = np.asarray(values, dtype=np.float64).ravel()
    vals = np.sort(vals[~np.isnan(vals)])
    if vals.size == 0:
        raise UndefinedStatisticError("no defined values to rank")
    n = vals.size
    lo = _nearest_rank(n, (1.0 - level) / 2.0)
    hi = _nearest_rank(n, (1.0 + level) / 2.0)
    return float(vals[lo - 1]), float(vals[hi - 1])


def draw_rows(panel_rows_by_pop, cap, rng):
    """One replicate's row indices: ``min(n, cap)`` draws with replacement per population."""
    picks = []
    for rows in panel_rows_by_pop:
        k = min(rows.size, cap)
        picks.append(rows[rng.integers(0, rows.size, size=k)])
    return np.concatenate(picks) if picks else np.zeros(0, np.intp)


def population_rows(panel):
    pops = np.asarray(panel.populations, dtype=object)
    return {p: np.flatnonzero(pops == p) for p in panel.population_ids}


def bootstrap_statistic(panel, stat, cfg=BootstrapConfig()):
    """Bootstrap ``stat(panel)`` by resampling haplotypes within each population.

    ``stat`` maps a panel to a float or a 1-D array.  A replicate whose
    statistic raises :class:`UndefinedStatisticError` is recorded as
    missing; more than half missing marks the summary unreliable.
    """
    by_pop = population_rows(panel)
    if any(rows.size == 0 for rows in by_pop.values()):
        raise ConfigurationError("every population needs at least one haplotype")
    rows_list = list(by_pop.values())
    point = np.asarray(stat(panel), dtype=np.float64)

    def one(i):
        rng = replicate_rng(cfg.seed, i)
        rows = draw_rows(rows_list, cfg.per_pop_cap, rng)
        try:
            return np.asarray(stat(panel.take(rows)), dtype=np.float64)
        except UndefinedStatisticError:
            return np.full(point.shape, np.nan)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            reps = list(pool.map(one, range(cfg.n_replicates)))
    else:
        reps = [one(i) for i in range(cfg.n_replicates)]
    reps = np.stack(reps)
    missing_rows = np.isnan(reps.reshape(cfg.n_replicates, -1)).any(axis=1)
    n_missing = int(missing_rows.sum())
    flat = reps.reshape(cfg.n_replicates, -1)
    lows, highs = [], []
    for j in range(flat.shape[1]):
        try:
            lo, hi = percentile_interval(flat[:, j], cfg.ci_level)
        except UndefinedStatisticError:
            lo = hi = math.nan
        lows.append(lo)
        highs.append(hi)
    lows = np.asarray(lows).reshape(point.shape)
    highs = np.asarray(highs).reshape(point.shape)
    sizes = {p: min(rows.size, cfg.per_pop_cap) for p, rows in by_pop.items()}
    if point.ndim == 0:
        point, lows, highs = float(point), float(lows), float(highs)
    return BootstrapSummary(point, lows, highs, reps, n_missing,
                            reliable=n_missing <= cfg.n_replicates / 2, draw_sizes=sizes)
