import math

import numpy as np
import pytest

from fqlens.errors import ConfigurationError, UndefinedStatisticError
from fqlens.panel import HaplotypePanel
from fqlens.resampling import (BootstrapConfig, bootstrap_statistic, draw_rows, percentile_interval,
                               replicate_rng)
from fqlens.stats import regional_fq


def brute_percentile(values, level):
    """Nearest-rank by explicit search for the smallest rank whose share reaches the target."""
    vals = sorted(v for v in values if not math.isnan(v))
    n = len(vals)
    out = []
    for frac in ((1 - level) / 2, (1 + level) / 2):
        rank = 1
        while rank < n and rank / n < frac - 1e-12:
            rank += 1
        out.append(vals[rank - 1])
    return tuple(out)


def synthetic_panel(n_per_pop, freqs, seed, n_loci=200):
    rng = np.random.default_rng(seed)
    blocks, pops = [], []
    for name, f in freqs.items():
        blocks.append((rng.random((n_per_pop, n_loci)) < f).astype(np.uint8))
        pops += [name] * n_per_pop
    alleles = np.vstack(blocks)
    n = alleles.shape[0]
    return HaplotypePanel.from_alleles(alleles, [f"s{i // 2}" for i in range(n)], [i % 2 for i in range(n)], pops)


def regional_stat(region):
    return lambda p: regional_fq(p, region, 2.0)


def test_percentile_examples():
    assert percentile_interval(range(1, 101), 0.95) == (3.0, 98.0)
    assert percentile_interval([4.2] * 17, 0.9) == (4.2, 4.2)
    assert percentile_interval([7.0], 0.5) == (7.0, 7.0)
    assert percentile_interval([3.0, float("nan"), 1.0, 2.0], 0.5) == (1.0, 3.0)
    with pytest.raises(UndefinedStatisticError):
        percentile_interval([float("nan")], 0.9)
    with pytest.raises(ConfigurationError):
        percentile_interval([1.0], 1.0)


def test_percentile_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 300))
        vals = rng.normal(size=n).tolist()
        level = float(rng.choice([0.5, 0.8, 0.9, 0.95, 0.99]))
        assert percentile_interval(vals, level) == brute_percentile(vals, level)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        BootstrapConfig(n_replicates=1)
    with pytest.raises(ConfigurationError):
        BootstrapConfig(per_pop_cap=0)
    with pytest.raises(ConfigurationError):
        BootstrapConfig(ci_level=1.5)
    with pytest.raises(ConfigurationError):
        BootstrapConfig(seed=-1)


def test_replicate_streams_are_independent_of_order():
    a = [replicate_rng(9, i).random() for i in range(5)]
    b = [replicate_rng(9, i).random() for i in reversed(range(5))][::-1]
    assert a == b and len(set(a)) == 5


def test_draw_rows_respects_cap():
    rng = np.random.default_rng(1)
    rows = [np.arange(0, 100), np.arange(100, 110)]
    draw = draw_rows(rows, 40, rng)
    assert ((draw >= 0) & (draw < 100)).sum() == 40
    assert ((draw >= 100) & (draw < 110)).sum() == 10


def test_identical_populations_give_zero_band():
    panel = synthetic_panel(30, {"A": 0.3, "B": 0.3}, 0)
    # make B an exact copy of A
    alleles = panel.alleles
    alleles[30:] = alleles[:30]
    panel = HaplotypePanel.from_alleles(alleles, panel.sample_ids, panel.hap_index, panel.populations)
    s = bootstrap_statistic(panel, regional_stat(("A", "B")), BootstrapConfig(n_replicates=20))
    assert s.point == 0.0
    # resampled copies differ, so replicate values are small but not necessarily zero
    assert s.ci_low >= 0.0 and s.reliable


def test_determinism_and_thread_independence():
    panel = synthetic_panel(50, {"A": 0.2, "B": 0.35, "C": 0.5}, 3)
    stat = regional_stat(("A", "B", "C"))
    cfg = BootstrapConfig(n_replicates=30, seed=12)
    a = bootstrap_statistic(panel, stat, cfg)
    b = bootstrap_statistic(panel, stat, cfg)
    c = bootstrap_statistic(panel, stat, BootstrapConfig(n_replicates=30, seed=12, threads=4))
    assert np.array_equal(a.replicate_values, b.replicate_values)
    assert np.array_equal(a.replicate_values, c.replicate_values)
    assert (a.ci_low, a.ci_high) == (c.ci_low, c.ci_high)
    d = bootstrap_statistic(panel, stat, BootstrapConfig(n_replicates=30, seed=13))
    assert not np.array_equal(a.replicate_values, d.replicate_values)


def test_cap_honoured_in_every_replicate():
    panel = synthetic_panel(100, {"A": 0.2, "B": 0.4}, 5, n_loci=20)
    seen = []

    def stat(p):
        seen.append(p.population_sizes())
        return regional_fq(p, ("A", "B"), 2.0)

    s = bootstrap_statistic(panel, stat, BootstrapConfig(n_replicates=15))
    assert s.draw_sizes == {"A": 40, "B": 40}
    assert seen[0] == {"A": 100, "B": 100}          # point estimate on the full panel
    assert all(sz == {"A": 40, "B": 40} for sz in seen[1:])


def test_ci_endpoints_match_brute_force():
    panel = synthetic_panel(40, {"A": 0.25, "B": 0.45}, 6)
    s = bootstrap_statistic(panel, regional_stat(("A", "B")), BootstrapConfig(n_replicates=100, seed=4))
    assert (s.ci_low, s.ci_high) == brute_percentile(s.replicate_values.tolist(), 0.95)
    ordered = np.sort(s.replicate_values)
    assert (s.ci_low, s.ci_high) == (ordered[2], ordered[97])


def test_vector_statistic():
    panel = synthetic_panel(30, {"A": 0.2, "B": 0.5}, 7)
    stat = lambda p: np.array([regional_fq(p, ("A", "B"), q) for q in (1.0, 2.0)])
    s = bootstrap_statistic(panel, stat, BootstrapConfig(n_replicates=10))
    assert s.point.shape == (2,) and s.ci_low.shape == (2,) and s.replicate_values.shape == (10, 2)


def test_missing_replicates_flag_unreliable():
    panel = synthetic_panel(10, {"A": 0.5, "B": 0.5}, 8, n_loci=5)
    calls = {"n": 0}

    def flaky(p):
        calls["n"] += 1
        if calls["n"] > 1 and calls["n"] % 3 != 0:
            raise UndefinedStatisticError("nope")
        return 0.5

    s = bootstrap_statistic(panel, flaky, BootstrapConfig(n_replicates=12))
    assert s.n_missing > 6 and not s.reliable
    assert np.isnan(s.replicate_values).sum() == s.n_missing
