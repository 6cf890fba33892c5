"""Forward-time diploid simulator with demes, panmixia schedules and kinship-pruned mating.

Random streams (all ``Philox`` generators built from
``SeedSequence(seed, spawn_key=...)``):

* founders: ``(1,)``
* pairing of generation ``g``: ``(2, g)``
* reproduction in generation ``g``: ``(3, g)``, consumed in a fixed layout
  indexed by couple (couples are numbered in the order pairing forms them),
  so offspring draws never depend on how reproduction is scheduled.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import ConfigurationError, UndefinedStatisticError
from ..genotype_io import GeneticMap
from ..panel import HaplotypePanel, chrom_key
from ..stats import RegionCounts, check_q_grid
from .pedigree import FEMALE, KINSHIP_DEPTH, MALE, Pedigree, mate_eligibility

log = logging.getLogger(__name__)

#: Random candidate draws before the pairing falls back to enumerating a pool.
REJECTION_TRIES = 32
#: Gametes assembled per vectorised block.
GAMETE_CELL_BUDGET = 1 << 22


def stream(seed, *key):
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PanmixiaSchedule:
    """``entries`` is a sequence of ``(from_generation, {deme: rho})``."""

    entries: tuple

    def __post_init__(self):
        entries = tuple((int(g), dict(r)) for g, r in self.entries)
        if not entries:
            raise ConfigurationError("panmixia schedule is empty")
        if entries[0][0] != 0:
            raise ConfigurationError("the first schedule entry must start at generation 0")
        demes = set(entries[0][1])
        for (g0, _), (g1, _) in zip(entries, entries[1:]):
            if g1 <= g0:
                raise ConfigurationError("schedule generations must be strictly increasing")
        for g, rho in entries:
            if set(rho) != demes:
                raise ConfigurationError(f"schedule entry at generation {g} does not list every deme")
            for deme, value in rho.items():
                if not 0.0 <= float(value) <= 1.0:
                    raise ConfigurationError(f"rho for {deme} at generation {g} is outside [0, 1]")
        object.__setattr__(self, "entries", tuple((g, {d: float(v) for d, v in r.items()})
                                                  for g, r in entries))

    @property
    def demes(self):
        return tuple(self.entries[0][1])

    def rho(self, deme, generation):
        current = self.entries[0][1]
        for g, r in self.entries:
            if g <= generation:
                current = r
            else:
                break
        return current[deme]

    @classmethod
    def constant(cls, rho_by_deme):
        return cls(((0, rho_by_deme),))


@dataclass
class FounderSpec:
    counts: dict
    n_loci: int = 1000
    beta: dict = None
    shared_frequencies: bool = False
    ancestral_beta: tuple = (0.5, 0.5)
    divergence: Optional[float] = None


@dataclass
class SimConfig:
    founders: FounderSpec
    schedule: PanmixiaSchedule
    n_generations: int = 17
    offspring_lambda: float = 3.0
    seed: int = 0
    q_grid: tuple = (1.0, 2.0)
    genetic_map: Optional[GeneticMap] = None
    kinship_depth: int = KINSHIP_DEPTH
    founder_panel: Optional[HaplotypePanel] = None

    def __post_init__(self):
        if int(self.n_generations) < 1:
            raise ConfigurationError("n_generations must be at least 1")
        if not float(self.offspring_lambda) > 0:
            raise ConfigurationError("offspring_lambda must be positive")
        self.q_grid = check_q_grid(self.q_grid)
        if self.genetic_map is None:
            self.genetic_map = default_map()

    @property
    def demes(self):
        return self.schedule.demes


def default_map():
    """Four 100 Mb chromosomes, 1.0 cM/Mb in males and 1.6 cM/Mb in females."""
    return GeneticMap.uniform({str(c): 100_000_000 for c in range(1, 5)}, 1.0, 1.6)


# ---------------------------------------------------------------------------
# founders and locus layout
# ---------------------------------------------------------------------------

@dataclass
class Generation:
    """Individuals of one generation; haplotype rows ``2i`` (maternal) and ``2i+1`` (paternal)."""

    index: int
    ids: np.ndarray
    sex: np.ndarray
    deme: np.ndarray  # deme index per individual
    packed: np.ndarray

    def __len__(self):
        return self.ids.size


class LocusLayout:
    """Locus coordinates plus per-sex, per-chromosome cM coordinates for crossovers."""

    def __init__(self, chrom, positions, gmap):
        self.chrom = tuple(str(c) for c in chrom)
        self.positions = np.asarray(positions, dtype=np.int64)
        self.n_loci = self.positions.size
        self.blocks = []  # (start, stop, {sex: (locus_cm, cm_start, total_cm)})
        start = 0
        while start < self.n_loci:
            stop = start
            while stop < self.n_loci and self.chrom[stop] == self.chrom[start]:
                stop += 1
            per_sex = {}
            for sex, name in ((MALE, "male"), (FEMALE, "female")):
                cmap = gmap.get(self.chrom[start], name)
                pos = self.positions[start:stop]
                if pos[0] < cmap.start or pos[-1] > cmap.end:
                    raise ConfigurationError(
                        f"loci on chromosome {self.chrom[start]} fall outside the genetic map")
                per_sex[sex] = (cmap.to_cm(pos), float(cmap.cm[0]), cmap.total_cm)
            self.blocks.append((start, stop, per_sex))
            start = stop

    @classmethod
    def spread(cls, n_loci, gmap):
        """Evenly spaced loci over the map's chromosomes, proportional to physical length."""
        chroms = gmap.chromosomes
        spans = [(gmap.get(c, "male").start, gmap.get(c, "male").end) for c in chroms]
        lengths = np.array([e - s for s, e in spans], dtype=np.float64)
        share = np.floor(n_loci * lengths / lengths.sum()).astype(int)
        share[: n_loci - share.sum()] += 1
        chrom, positions = [], []
        for c, (s, e), k in zip(chroms, spans, share):
            if k == 0:
                continue
            pos = np.floor(s + (np.arange(k) + 0.5) * (e - s) / k).astype(np.int64)
            if np.any(np.diff(pos) <= 0):
                raise ConfigurationError(f"chromosome {c} is too short for {k} loci")
            chrom.extend([c] * k)
            positions.extend(pos.tolist())
        return cls(chrom, positions, gmap)

    def locus_ids(self):
        return [f"{c}:{p}" for c, p in zip(self.chrom, self.positions.tolist())]


def synth_founders(counts, freq_profile, n_loci, seed, shared=False, divergence=None,
                   ancestral_beta=(0.5, 0.5)):
    """Synthetic generation-0 haplotypes with Beta-distributed allele frequencies.

    ``freq_profile`` maps deme -> ``(alpha, beta)``, or is one pair for
    every deme (``None`` means ``(0.5, 0.5)``).  With ``shared`` one
    frequency vector (drawn from the first deme's profile, all profiles
    must agree) serves every deme.  With ``divergence`` F0 in (0, 1), an
    ancestral vector drawn from ``ancestral_beta`` is perturbed per deme
    with Balding-Nichols ``Beta(p(1-F0)/F0, (1-p)(1-F0)/F0)`` draws.

    Returns ``(sex, deme_names, alleles, freqs)``; ``alleles`` has two rows
    per founder; sexes alternate male/female within each deme.
    """
    demes = list(counts)
    for d in demes:
        n = int(counts[d])
        if n < 2:
            raise ConfigurationError(f"deme {d!r} needs at least 2 founders (one of each sex)")
    rng = stream(seed, 1)
    if divergence is not None:
        f0 = float(divergence)
        if not 0.0 < f0 < 1.0:
            raise ConfigurationError("founder divergence must lie in (0, 1)")
        a, b = _beta_params(ancestral_beta, "ancestral")
        anc = np.clip(rng.beta(a, b, size=n_loci), 1e-6, 1 - 1e-6)
        scale = (1.0 - f0) / f0
        freqs = {d: rng.beta(anc * scale, (1.0 - anc) * scale) for d in demes}
    else:
        if freq_profile is None:
            freq_profile = (0.5, 0.5)
        profiles = {d: _beta_params(freq_profile[d] if isinstance(freq_profile, dict) else freq_profile, d)
                    for d in demes}
        if shared:
            if len(set(profiles.values())) != 1:
                raise ConfigurationError("shared frequencies need identical Beta profiles")
            common = rng.beta(*profiles[demes[0]], size=n_loci)
            freqs = {d: common for d in demes}
        else:
            freqs = {d: rng.beta(*profiles[d], size=n_loci) for d in demes}
    sex, names, rows = [], [], []
    for d in demes:
        n = int(counts[d])
        sex.extend(MALE if k % 2 == 0 else FEMALE for k in range(n))
        names.extend([d] * n)
        rows.append((rng.random((2 * n, n_loci)) < freqs[d]).astype(np.uint8))
    alleles = np.vstack(rows) if rows else np.zeros((0, n_loci), np.uint8)
    return np.asarray(sex, np.int8), names, alleles, freqs


def _beta_params(pair, label):
    try:
        a, b = (float(x) for x in pair)
    except (TypeError, ValueError):
        raise ConfigurationError(f"Beta profile for {label!r} must be a pair of numbers") from None
    if not (a > 0 and b > 0):
        raise ConfigurationError(f"Beta parameters for {label!r} must be positive")
    return a, b


def founders_from_panel(panel, demes):
    """Founders from an external panel: populations are demes, samples are individuals."""
    rows_by_sample = {}
    for r, (s, h, p) in enumerate(zip(panel.sample_ids, panel.hap_index.tolist(), panel.populations)):
        rows_by_sample.setdefault((p, s), [None, None])[h] = r
    sex, names, order = [], [], []
    per_deme = {d: 0 for d in demes}
    for (p, s), pair in rows_by_sample.items():
        if p not in per_deme:
            continue
        if None in pair:
            raise ConfigurationError(f"founder sample {s!r} does not have two haplotypes")
        sex.append(MALE if per_deme[p] % 2 == 0 else FEMALE)
        per_deme[p] += 1
        names.append(p)
        order.extend(pair)
    for d, n in per_deme.items():
        if n < 2:
            raise ConfigurationError(f"deme {d!r} needs at least 2 founder samples in the panel")
    return np.asarray(sex, np.int8), names, panel.alleles[order]


# ---------------------------------------------------------------------------
# pairing
# ---------------------------------------------------------------------------

class _Pool:
    """Set of ids supporting O(1) uniform sampling and removal."""

    __slots__ = ("items", "where")

    def __init__(self, items=()):
        self.items = list(items)
        self.where = {x: i for i, x in enumerate(self.items)}

    def __len__(self):
        return len(self.items)

    def remove(self, x):
        i = self.where.pop(x)
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.where[last] = i


def _choose(pools, ok, rng):
    """Uniform choice among ids in ``pools`` that satisfy ``ok``; None when there are none."""
    sizes = [len(p) for p in pools]
    total = sum(sizes)
    if total == 0:
        return None
    for _ in range(REJECTION_TRIES):
        r = int(rng.integers(total))
        for pool, n in zip(pools, sizes):
            if r < n:
                cand = pool.items[r]
                break
            r -= n
        if ok(cand):
            return cand
    everyone = sorted(x for pool in pools for x in pool.items)
    good = [x for x in everyone if ok(x)]
    if not good:
        return None
    return good[int(rng.integers(len(good)))]


def pair_generation(ped, generation, schedule, rng, depth=KINSHIP_DEPTH):
    """Single-pass monogamous matching of one generation.

    Returns a list of ``(father, mother)`` couples in formation order.  The
    visitor's deme decides, with probability rho, whether partners are sought
    in other demes; the alternative pool is tried once when the first has
    no eligible candidate, provided its own selection probability is
    non-zero (so rho = 0 never yields a cross-deme union and rho = 1 never
    a within-deme one).
    """
    members = ped.members(generation)
    if not members:
        return []
    demes = schedule.demes
    pools = {(d, s): _Pool() for d in demes for s in (MALE, FEMALE)}
    for i in members:
        key = (ped.deme[i], ped.sex[i])
        if key not in pools:
            raise ConfigurationError(f"individual {i} belongs to unknown deme {ped.deme[i]!r}")
        pools[key].items.append(i)
    for p in pools.values():
        p.where = {x: k for k, x in enumerate(p.items)}
    ancestors = {i: ped.ancestor_set(i, depth) for i in members}
    order = np.asarray(members)[rng.permutation(len(members))]
    matched = set()
    couples = []
    for v in order.tolist():
        if v in matched:
            continue
        deme, sex = ped.deme[v], ped.sex[v]
        other_sex = FEMALE if sex == MALE else MALE
        rho = schedule.rho(deme, generation)
        within = [pools[(deme, other_sex)]]
        across = [pools[(d, other_sex)] for d in demes if d != deme]
        go_across = rng.random() < rho
        first, second = (across, within) if go_across else (within, across)
        second_allowed = (rho < 1.0) if go_across else (rho > 0.0)

        def ok(c, v=v):
            return mate_eligibility(ped, v, c, depth, ancestors).eligible

        partner = _choose(first, ok, rng)
        if partner is None and second_allowed:
            partner = _choose(second, ok, rng)
        if partner is None:
            continue
        pools[(deme, sex)].remove(v)
        pools[(ped.deme[partner], other_sex)].remove(partner)
        matched.add(v)
        matched.add(partner)
        couple = (v, partner) if sex == MALE else (partner, v)
        couples.append(couple)
        ped.add_union(*couple)
    return couples


# ---------------------------------------------------------------------------
# recombination
# ---------------------------------------------------------------------------

@dataclass
class GametePlan:
    """Recombination draws for a batch of gametes.

    ``first[g, b]`` is the parental haplotype gamete ``g`` starts from on
    chromosome block ``b``; ``event_gamete``/``event_locus`` list crossovers,
    each flipping the source haplotype from that (global) locus index on
    until the end of its chromosome.
    """

    first: np.ndarray
    event_gamete: np.ndarray
    event_locus: np.ndarray

    def __len__(self):
        return self.first.shape[0]


def draw_gamete_plan(layout, sexes, rng):
    """Crossover draws for gametes formed by parents of the given sexes.

    Per chromosome the crossover count is Poisson(total cM / 100) under the
    parent's sex-specific map and positions are uniform on the cM axis.
    Draw order is fixed: starting haplotypes, counts, then positions.
    """
    sexes = np.asarray(sexes, dtype=np.int8)
    n, n_blocks = sexes.size, len(layout.blocks)
    first = rng.integers(0, 2, size=(n, n_blocks)).astype(np.uint8)
    lam = np.empty((n, n_blocks))
    for b, (_, _, per_sex) in enumerate(layout.blocks):
        for sex in (MALE, FEMALE):
            lam[sexes == sex, b] = per_sex[sex][2] / 100.0
    k = rng.poisson(lam)
    u = rng.random(int(k.sum()))
    gam = np.repeat(np.repeat(np.arange(n), n_blocks), k.ravel())
    blk = np.repeat(np.tile(np.arange(n_blocks), n), k.ravel())
    loci = np.full(u.size, -1, np.int64)
    for b, (start, stop, per_sex) in enumerate(layout.blocks):
        for sex in (MALE, FEMALE):
            sel = (blk == b) & (sexes[gam] == sex)
            if not sel.any():
                continue
            locus_cm, cm0, total = per_sex[sex]
            idx = np.searchsorted(locus_cm, cm0 + u[sel] * total, side="right")
            loci[sel] = np.where(idx < stop - start, start + idx, -1)
    keep = loci >= 0
    return GametePlan(first, gam[keep], loci[keep])


def _selector_packed(layout, plan, lo, hi):
    """Bit-packed source selector (1 = second parental haplotype) for gametes lo..hi-1."""
    n = hi - lo
    n_blocks = len(layout.blocks)
    block_start = np.asarray([s for s, _, _ in layout.blocks], np.int64)
    sg = np.repeat(np.arange(n), n_blocks)
    sb = np.tile(np.arange(n_blocks), n)
    in_range = (plan.event_gamete >= lo) & (plan.event_gamete < hi)
    eg = plan.event_gamete[in_range] - lo
    el = plan.event_locus[in_range]
    eb = np.searchsorted(block_start, el, side="right") - 1
    gam = np.concatenate([sg, eg])
    pos = np.concatenate([np.tile(block_start, n), el])
    blk = np.concatenate([sb, eb])
    kind = np.concatenate([np.zeros(sg.size, np.int8), np.ones(eg.size, np.int8)])
    order = np.lexsort((kind, pos, gam))
    gam, pos, blk = gam[order], pos[order], blk[order]
    group = gam * n_blocks + blk
    rank = np.arange(group.size) - np.searchsorted(group, group, side="left")
    value = plan.first[lo + gam, blk] ^ (rank & 1).astype(np.uint8)
    nxt = np.empty_like(pos)
    nxt[:-1] = pos[1:]
    last = np.ones(gam.size, bool)
    last[:-1] = gam[1:] != gam[:-1]
    nxt[last] = layout.n_loci
    flat = np.repeat(value, nxt - pos)
    return np.packbits(flat.reshape(n, layout.n_loci), axis=1)


def assemble_gametes(parent_packed, layout, parent_rows, plan):
    """Packed gametes; ``parent_rows[g]`` is the row of the parent's first haplotype
    (its second haplotype is the next row)."""
    n = len(plan)
    out = np.zeros((n, (layout.n_loci + 7) // 8), np.uint8)
    rows = np.asarray(parent_rows, dtype=np.intp)
    step = max(1, GAMETE_CELL_BUDGET // max(layout.n_loci, 1))
    for s in range(0, n, step):
        e = min(n, s + step)
        h0 = parent_packed[rows[s:e]]
        h1 = parent_packed[rows[s:e] + 1]
        out[s:e] = h0 ^ (_selector_packed(layout, plan, s, e) & (h0 ^ h1))
    return out


def make_gamete(haplotypes, layout, sex, rng):
    """One recombinant gamete from a parent's ``(2, n_loci)`` 0/1 haplotypes."""
    haplotypes = np.asarray(haplotypes, dtype=np.uint8)
    plan = draw_gamete_plan(layout, [sex], rng)
    packed = np.packbits(haplotypes, axis=1)
    return np.unpackbits(assemble_gametes(packed, layout, [0], plan), axis=1,
                         count=layout.n_loci)[0]


# ---------------------------------------------------------------------------
# generations
# ---------------------------------------------------------------------------

@dataclass
class StepResult:
    generation: Optional[Generation]
    couples: list
    n_children: int

    @property
    def extinct(self):
        return self.generation is None or len(self.generation) == 0


def step_generation(ped, current, config, layout, deme_names):
    """Pair generation ``current.index`` and produce the next generation.

    Reproduction draws come from one stream per generation laid out by
    couple index: offspring counts for every couple, then child sexes, then
    the gamete plan (maternal and paternal gamete of each child in turn).
    """
    g = current.index
    couples = pair_generation(ped, g, config.schedule, stream(config.seed, 2, g), config.kinship_depth)
    if not couples:
        return StepResult(None, couples, 0)
    rng = stream(config.seed, 3, g)
    n_kids = rng.poisson(config.offspring_lambda, size=len(couples))
    total = int(n_kids.sum())
    if total == 0:
        return StepResult(None, couples, 0)
    child_sex = np.where(rng.random(total) < 0.5, FEMALE, MALE).astype(np.int8)
    row_of = {int(i): 2 * k for k, i in enumerate(current.ids.tolist())}
    deme_index = {d: k for k, d in enumerate(deme_names)}
    ids = np.empty(total, np.int64)
    demes = np.empty(total, np.int64)
    parent_rows = np.empty(2 * total, np.int64)
    k = 0
    for (father, mother), n in zip(couples, n_kids.tolist()):
        for _ in range(n):
            ids[k] = ped.add(int(child_sex[k]), ped.deme[mother], mother, father)
            demes[k] = deme_index[ped.deme[mother]]
            parent_rows[2 * k] = row_of[mother]
            parent_rows[2 * k + 1] = row_of[father]
            k += 1
    parent_sex = np.tile(np.array([FEMALE, MALE], np.int8), total)
    plan = draw_gamete_plan(layout, parent_sex, rng)
    packed = assemble_gametes(current.packed, layout, parent_rows, plan)
    nxt = Generation(g + 1, ids, child_sex, demes, packed)
    return StepResult(nxt, couples, total)


def generation_panel(gen, layout, deme_names, locus_ids=None):
    ids = gen.ids.tolist()
    return HaplotypePanel(
        gen.packed, layout.n_loci,
        sample_ids=[str(i) for i in ids for _ in (0, 1)],
        hap_index=np.tile(np.array([0, 1], np.int8), len(ids)),
        populations=[deme_names[d] for d in gen.deme.tolist() for _ in (0, 1)],
        chrom=layout.chrom, positions=layout.positions,
        locus_ids=locus_ids if locus_ids is not None else layout.locus_ids())


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

@dataclass
class SimulationResult:
    records: list = field(default_factory=list)
    status: str = "completed"
    last_generation: int = 0
    pedigree: Pedigree = None
    census: dict = field(default_factory=dict)

    def series(self, statistic, deme, q=None):
        """Values of one statistic for one deme, keyed by generation."""
        out = {}
        for r in self.records:
            if r["statistic"] == statistic and r["deme"] == deme and (q is None or r["q"] == q):
                out[r["generation"]] = r["value"]
        return out


def generation_statistics(panel, deme_names, q_grid):
    """Per-deme OVR F_q and LOO delta-F_q with equal deme weights."""
    present = [d for d in deme_names if d in set(panel.populations)]
    out = []
    counts = RegionCounts(panel, present) if len(present) >= 2 else None
    for q in q_grid:
        for d in deme_names:
            ovr = loo = math.nan
            if counts is not None and d in present:
                try:
                    ovr = counts.ovr(d, q).value
                    loo = counts.loo(d, q)
                except UndefinedStatisticError:
                    pass
            out.append((d, "ovr_fq", q, ovr))
            out.append((d, "loo_delta_fq", q, loo))
    return out


def run_experiment(config, on_generation: Optional[Callable] = None):
    """Run the configured simulation and collect per-generation statistics.

    ``on_generation(index, panel)`` is called for every generation,
    founders included.  Extinction stops the run with ``status="extinct"``.
    """
    deme_names = list(config.demes)
    if len(deme_names) < 2:
        raise ConfigurationError("one-vs-rest statistics need at least two demes")
    spec = config.founders
    if config.founder_panel is not None:
        panel0 = config.founder_panel
        layout = LocusLayout(panel0.chrom, panel0.positions, config.genetic_map)
        sex, names, alleles = founders_from_panel(panel0, deme_names)
        locus_ids = list(panel0.locus_ids)
    else:
        missing = set(deme_names) ^ set(spec.counts)
        if missing:
            raise ConfigurationError(f"founder counts and schedule demes differ: {sorted(missing)}")
        layout = LocusLayout.spread(int(spec.n_loci), config.genetic_map)
        sex, names, alleles, _ = synth_founders(
            {d: spec.counts[d] for d in deme_names}, spec.beta, layout.n_loci, config.seed,
            shared=spec.shared_frequencies, divergence=spec.divergence,
            ancestral_beta=spec.ancestral_beta)
        locus_ids = layout.locus_ids()
    ped = Pedigree()
    ids = np.asarray([ped.add(int(s), n) for s, n in zip(sex, names)], np.int64)
    deme_index = {d: k for k, d in enumerate(deme_names)}
    current = Generation(0, ids, np.asarray(sex, np.int8),
                         np.asarray([deme_index[n] for n in names], np.int64),
                         np.packbits(alleles, axis=1))
    result = SimulationResult(pedigree=ped)
    while True:
        g = current.index
        panel = generation_panel(current, layout, deme_names, locus_ids)
        _record(result, g, current, panel, deme_names, config.q_grid)
        if on_generation is not None:
            on_generation(g, panel)
        result.last_generation = g
        if g >= config.n_generations:
            break
        step = step_generation(ped, current, config, layout, deme_names)
        log.info("generation %d: %d couples, %d children", g, len(step.couples), step.n_children)
        if step.extinct:
            result.status = "extinct"
            break
        current = step.generation
    return result


def _record(result, g, gen, panel, deme_names, q_grid):
    counts = np.bincount(gen.deme, minlength=len(deme_names))
    result.census[g] = {d: int(n) for d, n in zip(deme_names, counts)}
    for d, n in zip(deme_names, counts):
        result.records.append({"generation": g, "deme": d, "statistic": "census_haplotypes",
                               "q": None, "value": float(2 * n)})
    for d, stat, q, value in generation_statistics(panel, deme_names, q_grid):
        result.records.append({"generation": g, "deme": d, "statistic": stat, "q": q, "value": value})
