import math
from fractions import Fraction

import numpy as np
import pytest

from fqlens.errors import ConfigurationError, DomainError, UndefinedStatisticError
from fqlens.panel import HaplotypePanel
from fqlens.stats import (FqSpectrum, LocusDiff, LocusFreqTable, RegionCounts, fq_spectrum,
                          fst_classic, genome_fq, locus_diff, locus_terms, loo_influence,
                          micro_average, mutual_information, ovr_fq, ovr_tables, per_locus_fq,
                          regional_fq, slope_diagnostic)


# -- independent oracles -----------------------------------------------------

def mi_joint_oracle(freqs, weights):
    """Mutual information from the explicit 2 x K joint distribution P(X=x, Y=k)."""
    joint = [[w * (1 - p), w * p] for p, w in zip(freqs, weights)]
    px = [sum(row[x] for row in joint) for x in (0, 1)]
    total = 0.0
    for k, row in enumerate(joint):
        for x in (0, 1):
            if row[x] > 0:
                total += row[x] * math.log(row[x] / (weights[k] * px[x]))
    return total


def fst_oracle(freqs, weights):
    p_bar = sum(Fraction(w) * Fraction(p) for p, w in zip(freqs, weights))
    var = sum(Fraction(w) * (Fraction(p) - p_bar) ** 2 for p, w in zip(freqs, weights))
    return float(var / (p_bar * (1 - p_bar)))


def random_tables(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        k = int(rng.integers(2, 9))
        freqs = rng.random(k)
        weights = rng.dirichlet(np.ones(k))
        weights[-1] = 1.0 - math.fsum(weights[:-1])
        if weights[-1] <= 0:
            continue
        out.append(LocusFreqTable(freqs, weights))
    return out


# -- single-locus layer ------------------------------------------------------

def test_table_validation():
    with pytest.raises(ConfigurationError):
        LocusFreqTable((0.1, 0.2), (0.5, 0.6))
    with pytest.raises(ConfigurationError):
        LocusFreqTable((0.1, 0.2), (1.0, 0.0))
    with pytest.raises(DomainError):
        LocusFreqTable((0.1, 1.2), (0.5, 0.5))
    with pytest.raises(ConfigurationError):
        LocusFreqTable((), ())


def test_locus_diff_examples():
    d = locus_diff(LocusFreqTable((0.0, 1.0), (0.5, 0.5)), 2)
    assert (d.s_total, d.s_within, d.fq) == (0.5, 0.0, 1.0)
    d = locus_diff(LocusFreqTable((0.3, 0.3, 0.3), (0.2, 0.3, 0.5)), 1.5)
    assert d.delta == 0.0 and d.fq == 0.0
    d = locus_diff(LocusFreqTable((0.2, 0.4), (0.5, 0.5)), 2)
    assert d.delta == pytest.approx(0.02, abs=1e-15)
    assert d.fq == pytest.approx(0.047619, abs=5e-7)


def test_monomorphic_pool_has_no_fq():
    d = locus_diff(LocusFreqTable((0.0, 0.0), (0.5, 0.5)), 2)
    assert d.fq is None and d.s_total == 0.0 and d.delta == 0.0
    with pytest.raises(UndefinedStatisticError):
        fst_classic(LocusFreqTable((1.0, 1.0), (0.5, 0.5)))


def test_fst_examples():
    assert fst_classic(LocusFreqTable((0.2, 0.4), (0.5, 0.5))) == pytest.approx(0.01 / 0.21, abs=1e-15)
    assert fst_classic(LocusFreqTable((0.0, 1.0), (0.5, 0.5))) == 1.0
    assert fst_classic(LocusFreqTable((0.37, 0.37), (0.5, 0.5))) == 0.0


def test_mi_examples():
    t = LocusFreqTable((0.1, 0.9), (0.5, 0.5))
    assert mutual_information(t) == pytest.approx(0.368064, abs=5e-7)
    assert mutual_information(t) == pytest.approx(mi_joint_oracle((0.1, 0.9), (0.5, 0.5)), abs=1e-15)
    assert mutual_information(LocusFreqTable((0.4, 0.4), (0.5, 0.5))) == 0.0
    assert mutual_information(LocusFreqTable((0.0, 1.0), (0.5, 0.5))) == pytest.approx(math.log(2), abs=1e-15)


def test_q2_and_q1_identities_against_oracles():
    for t in random_tables(500, 11):
        d2 = locus_diff(t, 2)
        assert abs(d2.fq - fst_oracle(t.freqs, t.weights)) < 1e-12
        assert abs(d2.delta - 2 * t.weighted_variance()) < 1e-12
        d1 = locus_diff(t, 1)
        assert abs(d1.delta - mi_joint_oracle(t.freqs, t.weights)) < 1e-12


def test_label_permutation_is_bit_identical():
    rng = np.random.default_rng(3)
    for t in random_tables(200, 5):
        perm = rng.permutation(len(t.freqs))
        u = LocusFreqTable([t.freqs[i] for i in perm], [t.weights[i] for i in perm])
        for q in (0.5, 1.0, 2.0, 3.0):
            assert locus_diff(t, q) == locus_diff(u, q)


def test_micro_average():
    diffs = [LocusDiff(0.42, 0.40, 0.02, 0.02 / 0.42), LocusDiff(0.5, 0.0, 0.5, 1.0)]
    assert micro_average(diffs) == pytest.approx(0.565217, abs=5e-7)
    assert micro_average([LocusDiff(0.3, 0.3, 0.0, 0.0)] * 4) == 0.0
    assert micro_average([LocusDiff(0.4, 0.0, 0.4, 1.0)]) == 1.0
    assert micro_average(diffs + [LocusDiff(0.0, 0.0, 0.0, None)]) == micro_average(diffs)
    with pytest.raises(UndefinedStatisticError):
        micro_average([LocusDiff(0.0, 0.0, 0.0, None)])


# -- array layer ---------------------------------------------------------------

def test_locus_terms_match_scalar_layer():
    rng = np.random.default_rng(8)
    freqs = rng.random((4, 50))
    freqs[:, 3] = 0.25
    w = np.array([0.1, 0.2, 0.3, 0.4])
    for q in (0.5, 1.0, 2.0):
        s_t, s_w, delta = locus_terms(freqs, w, q)
        for j in range(freqs.shape[1]):
            d = locus_diff(LocusFreqTable(freqs[:, j], w), q)
            assert s_t[j] == pytest.approx(d.s_total, rel=1e-13)
            assert delta[j] == pytest.approx(d.delta, rel=1e-9, abs=1e-15)
        assert delta[3] == 0.0


def test_genome_fq_skips_monomorphic():
    freqs = np.array([[0.0, 0.2, 1.0], [0.0, 0.4, 1.0]])
    agg = genome_fq(freqs, (0.5, 0.5), 2)
    assert agg.n_used == 1 and agg.n_skipped == 2
    assert agg.value == pytest.approx(0.047619, abs=5e-7)
    pl = per_locus_fq(freqs, (0.5, 0.5), 2)
    assert np.isnan(pl[0]) and np.isnan(pl[2])
    with pytest.raises(UndefinedStatisticError):
        genome_fq(np.zeros((2, 3)), (0.5, 0.5), 1)


# -- panel layer ---------------------------------------------------------------

def freq_panel(pop_freqs, n=20):
    """Panel whose populations carry exact frequencies ``k/n`` at each locus."""
    rows, pops = [], []
    for name, freqs in pop_freqs.items():
        block = np.zeros((n, len(freqs)), np.uint8)
        for j, p in enumerate(freqs):
            block[: int(round(p * n)), j] = 1
        rows.append(block)
        pops += [name] * n
    alleles = np.vstack(rows)
    samples = [f"s{i // 2}" for i in range(len(pops))]
    return HaplotypePanel.from_alleles(alleles, samples, [i % 2 for i in range(len(pops))], pops)


def test_regional_and_loo_worked_example():
    panel = freq_panel({"P1": [0.2], "P2": [0.4], "P3": [0.6]})
    region = ("P1", "P2", "P3")
    assert regional_fq(panel, region, 2) == pytest.approx(0.111111, abs=5e-7)
    assert regional_fq(panel, ("P1", "P2"), 2) == pytest.approx(0.047619, abs=5e-7)
    assert loo_influence(panel, region, "P3", 2) == pytest.approx(0.063492, abs=5e-7)
    assert regional_fq(panel, ("P2",), 2) == 0.0


def test_fixed_opposite_and_identical_regions():
    opp = freq_panel({"A": [1.0, 0.0, 1.0], "B": [0.0, 1.0, 0.0]})
    same = freq_panel({"A": [0.3, 0.5], "B": [0.3, 0.5], "C": [0.3, 0.5]})
    for q in (0.25, 1.0, 2.0, 4.0):
        assert regional_fq(opp, ("A", "B"), q) == 1.0
        assert ovr_fq(opp, "A", ("A", "B"), q) == 1.0
        assert regional_fq(same, ("A", "B", "C"), q) == 0.0
        for c in "ABC":
            assert loo_influence(same, ("A", "B", "C"), c, q) == 0.0


def test_two_population_loo_equals_regional():
    panel = freq_panel({"A": [0.1, 0.55, 0.9], "B": [0.3, 0.5, 0.45]})
    for q in (0.5, 1.0, 2.0):
        f = regional_fq(panel, ("A", "B"), q)
        assert loo_influence(panel, ("A", "B"), "A", q) == f
        assert loo_influence(panel, ("A", "B"), "B", q) == f


def test_ovr_rest_uses_pooled_haplotypes():
    # rest = B (10 haplotypes, p = 0.2) + C (30 haplotypes, p = 0.6)
    alleles = np.zeros((60, 1), np.uint8)
    alleles[:10] = 1                   # A: 10/20 -> 0.5
    alleles[20:22] = 1                 # B: 2/10
    alleles[30:48] = 1                 # C: 18/30
    pops = ["A"] * 20 + ["B"] * 10 + ["C"] * 30
    panel = HaplotypePanel.from_alleles(alleles, [f"s{i}" for i in range(60)], [0] * 60, pops)
    (table,) = ovr_tables(panel, "A", ("A", "B", "C"))
    assert table.freqs == (0.5, 20 / 40)
    assert table.weights == (0.5, 0.5)
    with pytest.raises(ConfigurationError):
        ovr_tables(panel, "A", ("A",))
    with pytest.raises(ConfigurationError):
        ovr_tables(panel, "D", ("A", "B"))


def test_population_relabelling_invariance():
    rng = np.random.default_rng(2)
    alleles = (rng.random((90, 300)) < rng.random(300)).astype(np.uint8)
    pops = ["x"] * 30 + ["y"] * 30 + ["z"] * 30
    panel = HaplotypePanel.from_alleles(alleles, [f"s{i}" for i in range(90)], [0] * 90, pops)
    order = rng.permutation(90)
    renamed = {"x": "beta", "y": "gamma", "z": "alpha"}
    shuffled = HaplotypePanel.from_alleles(alleles[order], [f"s{i}" for i in order], [0] * 90,
                                           [renamed[pops[i]] for i in order])
    for q in (0.5, 1.0, 2.0):
        a = regional_fq(panel, ("x", "y", "z"), q)
        b = regional_fq(shuffled, ("alpha", "gamma", "beta"), q)
        assert a == b
        assert ovr_fq(panel, "y", ("x", "y", "z"), q) == ovr_fq(shuffled, "gamma", ("beta", "alpha", "gamma"), q)


def test_region_counts_match_dense_counts():
    rng = np.random.default_rng(4)
    alleles = (rng.random((37, 75)) < 0.4).astype(np.uint8)
    pops = [("a", "b", "c")[i % 3] for i in range(37)]
    panel = HaplotypePanel.from_alleles(alleles, [f"s{i}" for i in range(37)], [0] * 37, pops)
    counts = RegionCounts(panel, ("c", "a"))
    pops = np.array(pops)
    assert np.array_equal(counts.counts[0], alleles[pops == "c"].sum(axis=0))
    assert np.array_equal(counts.counts[1], alleles[pops == "a"].sum(axis=0))
    assert list(counts.sizes) == [int((pops == "c").sum()), int((pops == "a").sum())]


def test_all_monomorphic_is_undefined():
    panel = freq_panel({"A": [0.0, 1.0], "B": [0.0, 1.0]})
    with pytest.raises(UndefinedStatisticError):
        regional_fq(panel, ("A", "B"), 2)


# -- spectra -----------------------------------------------------------------

def test_spectrum_and_slope():
    opp = freq_panel({"A": [1.0], "B": [0.0]})
    s = fq_spectrum(opp, "regional", {"region": ("A", "B")}, (1.0, 2.0))
    assert s.values == (1.0, 1.0) and slope_diagnostic(s) == 0.0
    t = freq_panel({"A": [0.1], "B": [0.9]})
    s = fq_spectrum(t, "ovr", {"region": ("A", "B"), "focal": "A"}, (1.0, 2.0))
    f1 = 0.368064 / math.log(2)
    assert s.at(1.0) == pytest.approx(f1, abs=1e-6)
    assert s.at(2.0) == pytest.approx(0.64, abs=1e-12)
    assert slope_diagnostic(s) == pytest.approx(f1 - 0.64, abs=1e-6)
    same = freq_panel({"A": [0.3], "B": [0.3]})
    assert fq_spectrum(same, "loo", {"region": ("A", "B"), "population": "A"}).values == (0.0,) * 9


def test_spectrum_validation():
    with pytest.raises(ConfigurationError):
        FqSpectrum((2.0, 1.0), (0.1, 0.2))
    with pytest.raises(ConfigurationError):
        FqSpectrum((1.0, 2.0), (0.1,))
    with pytest.raises(ConfigurationError):
        slope_diagnostic(FqSpectrum((0.5, 2.0), (0.1, 0.2)))
    with pytest.raises(DomainError):
        FqSpectrum((0.0, 2.0), (0.1, 0.2))
