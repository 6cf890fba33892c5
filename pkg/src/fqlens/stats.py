"""Differentiation statistics of the Tsallis F_q family.

Two layers live here:

* scalar operations on a single :class:`LocusFreqTable` (``locus_diff``,
  ``fst_classic``, ``mutual_information``) which use :func:`math.fsum` so
  results do not depend on group order;
* array kernels over a ``(groups, loci)`` frequency matrix that back the
  panel-level statistics (OVR, regional, LOO).  Per-locus sums across groups
  are taken over values sorted along the group axis, and sums across loci
  are exactly rounded, so results are bit-identical under any relabelling
  of populations and any chunking of loci.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .entropy import check_q, shannon_bern, tsallis_bern
from .errors import ConfigurationError, DomainError, UndefinedStatisticError

DEFAULT_Q_GRID = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0, 4.0)

WEIGHT_TOL = 1e-12

MODES = ("ovr", "loo", "regional")


# ---------------------------------------------------------------------------
# single-locus layer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocusFreqTable:
    """Per-group alternate-allele frequencies at one locus, with group weights."""

    freqs: tuple
    weights: tuple
    group_ids: tuple = ()

    def __post_init__(self):
        freqs = tuple(float(p) for p in self.freqs)
        weights = tuple(float(w) for w in self.weights)
        group_ids = tuple(self.group_ids) or tuple(range(len(freqs)))
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "group_ids", group_ids)
        if not freqs:
            raise ConfigurationError("a frequency table needs at least one group")
        if not len(freqs) == len(weights) == len(group_ids):
            raise ConfigurationError("freqs, weights and group_ids must have equal length")
        if any(not 0.0 <= p <= 1.0 for p in freqs):
            raise DomainError(f"allele frequencies must lie in [0, 1]: {freqs}")
        if any(not w > 0.0 for w in weights):
            raise ConfigurationError("group weights must be positive")
        if abs(math.fsum(weights) - 1.0) > WEIGHT_TOL:
            raise ConfigurationError(f"group weights sum to {math.fsum(weights)!r}, not 1")

    @classmethod
    def equal_weights(cls, freqs, group_ids=()):
        k = len(freqs)
        return cls(freqs, (1.0 / k,) * k, group_ids)

    @property
    def pooled(self):
        """Weighted mean frequency, clamped to the range of the group values."""
        lo, hi = min(self.freqs), max(self.freqs)
        if lo == hi:
            return lo
        p = math.fsum(w * p for w, p in zip(self.weights, self.freqs))
        return min(max(p, lo), hi)

    def weighted_variance(self):
        p_bar = self.pooled
        return math.fsum(w * (p - p_bar) ** 2 for w, p in zip(self.weights, self.freqs))


@dataclass(frozen=True)
class LocusDiff:
    """Pooled entropy, mean within-group entropy and their gap at one locus.

    ``fq`` is ``None`` when the pooled locus is monomorphic.
    """

    s_total: float
    s_within: float
    delta: float
    fq: Optional[float]


def locus_diff(table, q):
    """Jensen-Tsallis gap and relative F_q for one locus.

    >>> d = locus_diff(LocusFreqTable((0.0, 1.0), (0.5, 0.5)), 2)
    >>> d.s_total, d.s_within, d.fq
    (0.5, 0.0, 1.0)
    """
    q = check_q(q)
    s_total = tsallis_bern(table.pooled, q)
    if min(table.freqs) == max(table.freqs):
        return LocusDiff(s_total, s_total, 0.0, 0.0 if s_total > 0 else None)
    s_within = math.fsum(w * tsallis_bern(p, q) for w, p in zip(table.weights, table.freqs))
    delta = max(s_total - s_within, 0.0)     # clamp rounding below zero
    return LocusDiff(s_total, s_within, delta, delta / s_total if s_total > 0 else None)


def fst_classic(table):
    """Variance form of F_ST: ``Var_w(p) / (p_bar (1 - p_bar))``."""
    p_bar = table.pooled
    if p_bar in (0.0, 1.0):
        raise UndefinedStatisticError("F_ST is undefined at a locus monomorphic in the pool")
    return table.weighted_variance() / (p_bar * (1.0 - p_bar))


def mutual_information(table):
    """I(allele; label) in nats, as H(X) - sum_k w_k H(X | Y=k)."""
    if min(table.freqs) == max(table.freqs):
        return 0.0
    within = math.fsum(w * shannon_bern(p) for w, p in zip(table.weights, table.freqs))
    return shannon_bern(table.pooled) - within


def micro_average(diffs):
    """Genome-wide ratio of summed gaps to summed pooled entropies.

    Loci with a monomorphic pool add nothing to either sum.
    """
    used = [d for d in diffs if d.s_total > 0]
    if not used:
        raise UndefinedStatisticError("every locus is monomorphic in the pool")
    return math.fsum(d.delta for d in used) / math.fsum(d.s_total for d in used)


# ---------------------------------------------------------------------------
# array layer
# ---------------------------------------------------------------------------

def locus_terms(freqs, weights, q):
    """Per-locus pooled and within-group entropies for a ``(K, L)`` frequency matrix.

    Returns ``(s_total, s_within, delta)``; loci where every group carries
    the same frequency get ``delta == 0`` exactly, and rounding noise that
    would push ``delta`` below zero is clamped.
    """
    q = check_q(q)
    freqs = np.asarray(freqs, dtype=np.float64)
    if freqs.ndim != 2:
        raise ConfigurationError("frequency matrix must be (groups, loci)")
    w = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
    if w.shape[0] != freqs.shape[0]:
        raise ConfigurationError("one weight per group is required")
    lo, hi = freqs.min(axis=0), freqs.max(axis=0)
    p_bar = np.clip(np.sort(w * freqs, axis=0).sum(axis=0), lo, hi)
    same = lo == hi
    p_bar[same] = lo[same]
    s_total = tsallis_bern(p_bar, q)
    s_within = np.sort(w * tsallis_bern(freqs, q), axis=0).sum(axis=0)
    s_within[same] = s_total[same]
    # the gap is a Jensen gap and cannot be negative; only rounding makes it so
    return s_total, s_within, np.maximum(s_total - s_within, 0.0)


@dataclass(frozen=True)
class GenomeAggregate:
    """Micro-averaged F_q with the sums behind it.

    ``delta_sum`` is in nats when q = 1.
    """

    value: float
    delta_sum: float
    total_sum: float
    n_used: int
    n_skipped: int


def genome_fq(freqs, weights, q):
    s_total, _, delta = locus_terms(freqs, weights, q)
    used = s_total > 0
    n_used = int(used.sum())
    if n_used == 0:
        raise UndefinedStatisticError("every locus is monomorphic in the pool")
    num = math.fsum(delta[used].tolist())
    den = math.fsum(s_total[used].tolist())
    return GenomeAggregate(num / den, num, den, n_used, int(used.size - n_used))


def per_locus_fq(freqs, weights, q):
    """Per-locus F_q, ``nan`` where the pooled locus is monomorphic."""
    s_total, _, delta = locus_terms(freqs, weights, q)
    out = np.full(s_total.shape, np.nan)
    used = s_total > 0
    out[used] = delta[used] / s_total[used]
    return out


# ---------------------------------------------------------------------------
# panel layer
# ---------------------------------------------------------------------------

def _check_region(panel, region, min_size=1):
    region = tuple(dict.fromkeys(region))
    if len(region) < min_size:
        raise ConfigurationError(f"region needs at least {min_size} populations, got {len(region)}")
    present = set(panel.populations)
    missing = [p for p in region if p not in present]
    if missing:
        raise ConfigurationError(f"populations without haplotypes in the panel: {missing}")
    return region


class RegionCounts:
    """Allele counts per population of a region, computed once and reused."""

    def __init__(self, panel, region):
        self.region = _check_region(panel, region)
        self.counts, self.sizes = panel.allele_counts(self.region)
        self.n_loci = panel.n_loci

    @classmethod
    def from_counts(cls, region, counts, sizes):
        obj = cls.__new__(cls)
        obj.region = tuple(region)
        obj.counts = np.asarray(counts, dtype=np.int64)
        obj.sizes = np.asarray(sizes, dtype=np.int64)
        obj.n_loci = obj.counts.shape[1]
        return obj

    def _index(self, pop):
        try:
            return self.region.index(pop)
        except ValueError:
            raise ConfigurationError(f"population {pop!r} is not in region {list(self.region)}") from None

    def ovr_freqs(self, focal):
        """``(2, L)`` frequencies: focal haplotypes vs pooled haplotypes of the rest."""
        if len(self.region) < 2:
            raise ConfigurationError("one-vs-rest needs a region with at least two populations")
        i = self._index(focal)
        rest = [j for j in range(len(self.region)) if j != i]
        n_rest = self.sizes[rest].sum()
        if self.sizes[i] == 0 or n_rest == 0:
            raise ConfigurationError("one-vs-rest group is empty")
        rest_counts = self.counts[rest].sum(axis=0)
        return np.vstack([self.counts[i] / self.sizes[i], rest_counts / n_rest])

    def population_freqs(self, members=None):
        idx = range(len(self.region)) if members is None else [self._index(p) for p in members]
        idx = list(idx)
        if np.any(self.sizes[idx] == 0):
            raise ConfigurationError("a population in the region has no haplotypes")
        return self.counts[idx] / self.sizes[idx, None]

    def ovr(self, focal, q):
        return genome_fq(self.ovr_freqs(focal), (0.5, 0.5), q)

    def regional(self, q, members=None):
        members = self.region if members is None else tuple(members)
        if not members:
            raise ConfigurationError("region is empty")
        if len(members) == 1:
            self._index(members[0])
            return GenomeAggregate(0.0, 0.0, 0.0, 0, 0)
        freqs = self.population_freqs(members)
        k = len(members)
        return genome_fq(freqs, np.full(k, 1.0 / k), q)

    def loo(self, c, q):
        if len(self.region) < 2:
            raise ConfigurationError("leave-one-out needs a region with at least two populations")
        self._index(c)
        full = self.regional(q).value
        reduced = self.regional(q, [p for p in self.region if p != c]).value
        return full - reduced


def ovr_tables(panel, focal, region):
    """Per-locus two-group tables for focal population vs the rest of the region."""
    region = _check_region(panel, region, min_size=1)
    if focal not in region:
        raise ConfigurationError(f"focal population {focal!r} is not in the region")
    if len(region) < 2:
        raise ConfigurationError("one-vs-rest needs a region with at least two populations")
    freqs = RegionCounts(panel, region).ovr_freqs(focal)
    rest = "+".join(p for p in region if p != focal)
    return [LocusFreqTable((a, b), (0.5, 0.5), (focal, rest)) for a, b in freqs.T]


def ovr_fq(panel, focal, region, q):
    region = _check_region(panel, region, min_size=2)
    return RegionCounts(panel, region).ovr(focal, q).value


def regional_fq(panel, region, q):
    """Equal-population-weight regional F_q (micro-average over loci).

    A single-population region has no between-population term and returns 0.
    """
    if not tuple(region):
        raise ConfigurationError("region is empty")
    return RegionCounts(panel, region).regional(q).value


def loo_influence(panel, region, c, q):
    """``F_q(region) - F_q(region without c)``; positive means c drives structure."""
    region = _check_region(panel, region, min_size=2)
    if c not in region:
        raise ConfigurationError(f"population {c!r} is not in the region")
    return RegionCounts(panel, region).loo(c, q)


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

def check_q_grid(q_grid):
    grid = tuple(check_q(q) for q in q_grid)
    if not grid:
        raise ConfigurationError("q grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError(f"q grid must be strictly increasing: {grid}")
    return grid


@dataclass(frozen=True)
class FqSpectrum:
    q_grid: tuple
    values: tuple
    label: str = ""
    ci_low: Optional[tuple] = None
    ci_high: Optional[tuple] = None
    n_used: Optional[int] = None
    n_skipped: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "q_grid", check_q_grid(self.q_grid))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != len(self.q_grid):
            raise ConfigurationError("spectrum needs one value per q")
        for name in ("ci_low", "ci_high"):
            band = getattr(self, name)
            if band is not None:
                band = tuple(float(v) for v in band)
                if len(band) != len(self.q_grid):
                    raise ConfigurationError(f"{name} needs one value per q")
                object.__setattr__(self, name, band)

    def at(self, q):
        for qq, v in zip(self.q_grid, self.values):
            if math.isclose(qq, q, rel_tol=0, abs_tol=1e-12):
                return v
        raise ConfigurationError(f"q = {q} is not on the spectrum grid {self.q_grid}")


def spectrum_values(counts, mode, params, q_grid):
    """Spectrum values plus ``(n_used, n_skipped)`` from precomputed region counts."""
    mode = mode.lower()
    if mode == "ovr":
        focal = params["focal"]
        aggs = [counts.ovr(focal, q) for q in q_grid]
        return [a.value for a in aggs], (aggs[0].n_used, aggs[0].n_skipped)
    if mode == "regional":
        aggs = [counts.regional(q) for q in q_grid]
        return [a.value for a in aggs], (aggs[0].n_used, aggs[0].n_skipped)
    if mode == "loo":
        c = params.get("population", params.get("focal"))
        full = [counts.regional(q) for q in q_grid]
        values = [counts.loo(c, q) for q in q_grid]
        return values, (full[0].n_used, full[0].n_skipped)
    raise ConfigurationError(f"unknown spectrum mode {mode!r}; expected one of {MODES}")


def fq_spectrum(panel, mode, params, q_grid=DEFAULT_Q_GRID):
    """Evaluate an OVR, LOO or regional statistic over a grid of orders q.

    ``params`` holds ``region`` plus ``focal`` (OVR) or ``population`` (LOO).
    """
    q_grid = check_q_grid(q_grid)
    region = params.get("region")
    if region is None:
        raise ConfigurationError("spectrum parameters need a 'region'")
    min_size = 1 if mode.lower() == "regional" else 2
    counts = RegionCounts(panel, _check_region(panel, region, min_size))
    values, (n_used, n_skipped) = spectrum_values(counts, mode, params, q_grid)
    label = params.get("focal", params.get("population", "+".join(counts.region)))
    return FqSpectrum(q_grid, values, str(label), n_used=n_used, n_skipped=n_skipped)


def slope_diagnostic(spectrum):
    """Drop ``F_1 - F_2`` across the diagnostic interval of a spectrum."""
    return spectrum.at(1.0) - spectrum.at(2.0)
