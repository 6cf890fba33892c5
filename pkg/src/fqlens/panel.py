"""Bit-packed biallelic haplotype panel.

Rows are haplotypes, columns are loci.  Alleles are stored eight loci per
byte, first locus in the most significant bit, rows zero-padded to a whole
byte.  Everything that needs allele counts goes through
:meth:`HaplotypePanel.allele_counts`, which unpacks a bounded block of
columns at a time so memory stays at the packed matrix plus a constant.
"""

import hashlib
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FormatError

#: Upper bound on unpacked cells held in memory by the counting kernels.
UNPACK_BUDGET = 1 << 24

# _BYTE_BITS[v, k] is bit k (most significant first) of byte value v
_BYTE_BITS = np.unpackbits(np.arange(256, dtype=np.uint8)[:, None], axis=1).astype(np.int64)


def chrom_key(name):
    """Natural sort key for chromosome names: ``chr2 < chr10 < chrX``."""
    stem = re.sub(r"^chr", "", str(name), flags=re.IGNORECASE)
    if stem.isdigit():
        return (0, int(stem), "")
    return (1, 0, stem)


def _as_str_tuple(values):
    return tuple(str(v) for v in values)


@dataclass(frozen=True, eq=False)
class HaplotypePanel:
    packed: np.ndarray
    n_loci: int
    sample_ids: tuple
    hap_index: np.ndarray
    populations: tuple
    chrom: tuple
    positions: np.ndarray
    locus_ids: tuple

    def __post_init__(self):
        packed = np.ascontiguousarray(self.packed, dtype=np.uint8)
        if packed.ndim != 2:
            raise FormatError("packed allele matrix must be two-dimensional")
        object.__setattr__(self, "packed", packed)
        object.__setattr__(self, "n_loci", int(self.n_loci))
        object.__setattr__(self, "sample_ids", _as_str_tuple(self.sample_ids))
        object.__setattr__(self, "populations", _as_str_tuple(self.populations))
        object.__setattr__(self, "chrom", _as_str_tuple(self.chrom))
        object.__setattr__(self, "locus_ids", _as_str_tuple(self.locus_ids))
        object.__setattr__(self, "hap_index", np.asarray(self.hap_index, dtype=np.int8))
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=np.int64))
        self.validate()

    @classmethod
    def from_alleles(cls, alleles, sample_ids, hap_index, populations,
                     chrom=None, positions=None, locus_ids=None):
        """Build a panel from a dense 0/1 matrix (rows haplotypes, columns loci).

        Missing locus metadata defaults to a single chromosome ``"1"`` with
        positions ``1..n_loci``.
        """
        alleles = np.asarray(alleles)
        if alleles.ndim != 2:
            raise FormatError("allele matrix must be two-dimensional")
        if alleles.size and not np.all((alleles == 0) | (alleles == 1)):
            raise FormatError("allele matrix entries must be 0 or 1")
        n_loci = alleles.shape[1]
        if chrom is None:
            chrom = ["1"] * n_loci
        if positions is None:
            positions = np.arange(1, n_loci + 1)
        if locus_ids is None:
            locus_ids = [f"{c}:{p}" for c, p in zip(chrom, positions)]
        packed = np.packbits(alleles.astype(np.uint8, copy=False), axis=1)
        if packed.shape[1] != (n_loci + 7) // 8:
            packed = np.zeros((alleles.shape[0], (n_loci + 7) // 8), np.uint8)
        return cls(packed, n_loci, sample_ids, hap_index, populations,
                   chrom, positions, locus_ids)

    def validate(self):
        n_hap, row_bytes = self.packed.shape
        if row_bytes != (self.n_loci + 7) // 8:
            raise FormatError(
                f"packed rows hold {row_bytes} bytes, expected {(self.n_loci + 7) // 8}")
        for name in ("sample_ids", "hap_index", "populations"):
            if len(getattr(self, name)) != n_hap:
                raise FormatError(f"{name} has {len(getattr(self, name))} entries for {n_hap} haplotypes")
        for name in ("chrom", "positions", "locus_ids"):
            if len(getattr(self, name)) != self.n_loci:
                raise FormatError(f"{name} has {len(getattr(self, name))} entries for {self.n_loci} loci")
        if n_hap and not np.all((self.hap_index == 0) | (self.hap_index == 1)):
            raise FormatError("haplotype index must be 0 or 1")
        pad = row_bytes * 8 - self.n_loci
        if pad and n_hap and np.any(self.packed[:, -1] & np.uint8((1 << pad) - 1)):
            raise FormatError("padding bits of the allele matrix must be zero")
        if self.n_loci > 1:
            names = sorted(set(self.chrom), key=chrom_key)
            rank = {name: i for i, name in enumerate(names)}
            crank = np.fromiter((rank[c] for c in self.chrom), np.int64, self.n_loci)
            dc, dp = np.diff(crank), np.diff(self.positions)
            bad = np.flatnonzero((dc < 0) | ((dc == 0) & (dp <= 0)))
            if bad.size:
                i = bad[0] + 1
                raise FormatError(
                    f"loci not strictly ordered at {self.chrom[i]}:{self.positions[i]} "
                    f"(after {self.chrom[i - 1]}:{self.positions[i - 1]})")

    # -- basic views -------------------------------------------------------

    @property
    def n_haplotypes(self):
        return self.packed.shape[0]

    @property
    def alleles(self):
        """Dense ``uint8`` allele matrix.  Allocates ``n_hap * n_loci`` bytes."""
        return np.unpackbits(self.packed, axis=1, count=self.n_loci)

    @property
    def population_ids(self):
        """Population labels in order of first appearance."""
        return tuple(dict.fromkeys(self.populations))

    def population_sizes(self):
        sizes = {}
        for pop in self.populations:
            sizes[pop] = sizes.get(pop, 0) + 1
        return sizes

    def rows_of(self, population):
        rows = np.flatnonzero(np.asarray(self.populations, dtype=object) == population)
        if rows.size == 0:
            raise ConfigurationError(f"population {population!r} has no haplotypes in the panel")
        return rows

    def digest(self):
        """SHA-256 over allele bits and all metadata."""
        h = hashlib.sha256()
        h.update(np.asarray([self.n_haplotypes, self.n_loci], "<u8").tobytes())
        h.update(self.packed.tobytes())
        for col in (self.sample_ids, self.populations, self.chrom, self.locus_ids):
            h.update("\x1f".join(col).encode())
            h.update(b"\x1e")
        h.update(self.hap_index.tobytes())
        h.update(self.positions.astype("<i8").tobytes())
        return h.hexdigest()

    def equals(self, other):
        return (
            isinstance(other, HaplotypePanel)
            and self.n_loci == other.n_loci
            and np.array_equal(self.packed, other.packed)
            and self.sample_ids == other.sample_ids
            and np.array_equal(self.hap_index, other.hap_index)
            and self.populations == other.populations
            and self.chrom == other.chrom
            and np.array_equal(self.positions, other.positions)
            and self.locus_ids == other.locus_ids
        )

    # -- derived panels ----------------------------------------------------

    def take(self, rows):
        """Panel restricted to (possibly repeated) haplotype rows."""
        rows = np.asarray(rows, dtype=np.intp)
        return HaplotypePanel(
            self.packed[rows], self.n_loci,
            [self.sample_ids[r] for r in rows], self.hap_index[rows],
            [self.populations[r] for r in rows],
            self.chrom, self.positions, self.locus_ids)

    def select_populations(self, populations):
        wanted = set(populations)
        missing = wanted.difference(self.populations)
        if missing:
            raise ConfigurationError(f"populations absent from panel: {sorted(missing)}")
        rows = [i for i, p in enumerate(self.populations) if p in wanted]
        return self.take(rows)

    def filter_loci(self, keep):
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != (self.n_loci,):
            raise ConfigurationError("locus mask length does not match the panel")
        cols = np.flatnonzero(keep)
        kept = np.zeros((self.n_haplotypes, cols.size), np.uint8)
        for start, stop, block in self._column_blocks():
            sel = cols[(cols >= start) & (cols < stop)]
            kept[:, np.searchsorted(cols, sel)] = block[:, sel - start]
        return HaplotypePanel.from_alleles(
            kept, self.sample_ids, self.hap_index, self.populations,
            [self.chrom[c] for c in cols], self.positions[cols],
            [self.locus_ids[c] for c in cols])

    def filter_maf(self, min_maf):
        """Drop loci whose pooled minor-allele frequency is below ``min_maf``."""
        if min_maf <= 0:
            return self
        alt, _ = self.allele_counts([None])
        freq = alt[0] / max(self.n_haplotypes, 1)
        maf = np.minimum(freq, 1.0 - freq)
        return self.filter_loci(maf >= min_maf)

    # -- counting kernel ---------------------------------------------------

    def _column_blocks(self):
        n_hap, row_bytes = self.packed.shape
        step = max(1, UNPACK_BUDGET // max(8 * n_hap, 1))
        for b0 in range(0, row_bytes, step):
            b1 = min(row_bytes, b0 + step)
            start, stop = 8 * b0, min(8 * b1, self.n_loci)
            block = np.unpackbits(self.packed[:, b0:b1], axis=1, count=stop - start)
            yield start, stop, block

    def _counts_for_rows(self, rows):
        # per-column histogram of byte values, then bits of each byte value
        row_bytes = self.packed.shape[1]
        hist = np.zeros(row_bytes * 256, np.int64)
        if row_bytes == 0:
            return np.zeros(self.n_loci, np.int64)
        offsets = np.arange(row_bytes, dtype=np.int64) * 256
        step = max(1, UNPACK_BUDGET // (8 * row_bytes))
        for r0 in range(0, rows.size, step):
            sub = self.packed[rows[r0:r0 + step]]
            hist += np.bincount((sub + offsets).ravel(), minlength=row_bytes * 256)
        return (hist.reshape(row_bytes, 256) @ _BYTE_BITS).ravel()[: self.n_loci]

    def allele_counts(self, groups=None):
        """Alternate-allele counts per group and locus.

        ``groups`` is a sequence whose items are a population id, a
        collection of population ids (pooled), or ``None`` (all haplotypes).
        Defaults to one group per population in :attr:`population_ids`.
        Returns ``(counts, sizes)`` with ``counts`` shaped ``(G, n_loci)``.
        """
        if groups is None:
            groups = self.population_ids
        pops = np.asarray(self.populations, dtype=object)
        members = []
        for grp in groups:
            if grp is None:
                members.append(tuple(self.population_ids))
            elif isinstance(grp, str):
                members.append((grp,))
            else:
                members.append(tuple(grp))
        needed = dict.fromkeys(p for m in members for p in m)
        per_pop = {}
        for p in needed:
            rows = np.flatnonzero(pops == p)
            per_pop[p] = (self._counts_for_rows(rows), rows.size)
        counts = np.zeros((len(groups), self.n_loci), np.int64)
        sizes = np.zeros(len(groups), np.int64)
        for g, m in enumerate(members):
            for p in m:
                c, n = per_pop[p]
                counts[g] += c
                sizes[g] += n
        return counts, sizes

    def allele_frequencies(self, groups=None):
        counts, sizes = self.allele_counts(groups)
        if np.any(sizes == 0):
            raise ConfigurationError("cannot compute frequencies for an empty group")
        return counts / sizes[:, None], sizes

    def summary(self):
        return {
            "haplotypes": self.n_haplotypes,
            "loci": self.n_loci,
            "populations": {p: n for p, n in self.population_sizes().items()},
        }
