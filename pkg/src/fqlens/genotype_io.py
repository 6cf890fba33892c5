"""Readers and writers for panels, sample maps, genetic maps and region specs.

Native container layout (``FQL1``), all integers little-endian::

    magic        4 bytes   b"FQL1"
    n_hap        u64
    n_loci       u64
    alleles      n_hap * ceil(n_loci / 8) bytes, row-major, first locus in
                 the most significant bit, rows zero-padded
    haplotypes   u64 byte length + UTF-8 text, one line per haplotype:
                 sample_id <TAB> haplotype_index <TAB> population_id
    loci         u64 byte length + UTF-8 text, one line per locus:
                 chromosome <TAB> position <TAB> locus_id
"""

import csv
import gzip
import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError, ParseError
from .panel import HaplotypePanel, chrom_key

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

MAGIC = b"FQL1"
_U64 = struct.Struct("<Q")
_MAX_COUNT = 1 << 48

_GT = {"0|0": (0, 0), "0|1": (0, 1), "1|0": (1, 0), "1|1": (1, 1)}


# ---------------------------------------------------------------------------
# sample map / region spec
# ---------------------------------------------------------------------------

def read_sample_map(path):
    """Two-column TSV ``sample_id <TAB> population_id``; ``#`` lines ignored."""
    mapping = {}
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 2 or not fields[0] or not fields[1]:
                raise ParseError("expected 'sample_id<TAB>population_id'", lineno, path)
            if fields[0] in mapping and mapping[fields[0]] != fields[1]:
                raise ParseError(f"sample {fields[0]!r} mapped to two populations", lineno, path)
            mapping[fields[0]] = fields[1]
    if not mapping:
        raise ConfigurationError(f"sample map {path} is empty")
    return mapping


def load_config(path):
    """Parse a TOML or JSON config file (chosen by extension, TOML otherwise)."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            return json.loads(path.read_text())
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ParseError(f"invalid config: {exc}", path=path) from exc


def read_region_spec(path):
    """Region id -> ordered tuple of population ids.

    Accepts ``{"regions": {...}}`` or a bare top-level mapping.
    """
    data = load_config(path)
    return parse_region_spec(data.get("regions", data))


def parse_region_spec(regions):
    if not isinstance(regions, dict) or not regions:
        raise ConfigurationError("region spec must map region ids to population lists")
    seen = {}
    out = {}
    for rid, pops in regions.items():
        if isinstance(pops, str) or not pops:
            raise ConfigurationError(f"region {rid!r} needs a non-empty list of populations")
        pops = tuple(str(p) for p in pops)
        if len(set(pops)) != len(pops):
            raise ConfigurationError(f"region {rid!r} lists a population twice")
        for p in pops:
            if p in seen:
                raise ConfigurationError(f"population {p!r} appears in regions {seen[p]!r} and {rid!r}")
            seen[p] = rid
        out[str(rid)] = pops
    return out


# ---------------------------------------------------------------------------
# variant text files
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariantRecord:
    chrom: str
    pos: int
    id: str
    haplotypes: np.ndarray  # uint8, two entries per sample
    line: int


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), newline="")
    return open(path, newline="")


def iter_vcf(path):
    """Stream phased biallelic records in file order.

    Yields the sample list first (as a tuple), then one
    :class:`VariantRecord` per data line.  Memory per record is bounded by
    the number of samples.
    """
    samples = None
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if line.startswith("##") or not line:
                continue
            if line.startswith("#"):
                header = line[1:].split("\t")
                if header[:9] != ["CHROM", "POS", "ID", "REF", "ALT", "QUAL", "FILTER", "INFO", "FORMAT"]:
                    raise ParseError("header must start with the nine fixed columns including FORMAT",
                                     lineno, path)
                samples = tuple(header[9:])
                if len(set(samples)) != len(samples):
                    raise ParseError("duplicate sample ids in header", lineno, path)
                yield samples
                continue
            if samples is None:
                raise ParseError("data line before the #CHROM header", lineno, path)
            yield _parse_record(line, lineno, path, len(samples))
    if samples is None:
        raise ParseError("no #CHROM header line found", path=path)


def _parse_record(line, lineno, path, n_samples):
    fields = line.split("\t")
    if len(fields) != 9 + n_samples:
        raise ParseError(f"expected {9 + n_samples} columns, found {len(fields)}", lineno, path)
    chrom, pos, vid, ref, alt = fields[:5]
    where = f"{chrom}:{pos}"
    try:
        pos = int(pos)
    except ValueError:
        raise ParseError(f"non-integer position {pos!r}", lineno, path) from None
    if pos < 0:
        raise ParseError(f"negative position at {where}", lineno, path)
    if not ref or ref == "." or not alt or alt == "." or "," in alt:
        raise ParseError(f"record at {where} is not biallelic (REF={ref!r}, ALT={alt!r})", lineno, path)
    fmt = fields[8].split(":")
    if "GT" not in fmt:
        raise ParseError(f"FORMAT at {where} has no GT field", lineno, path)
    gt_at = fmt.index("GT")
    haps = np.empty(2 * n_samples, np.uint8)
    for s, cell in enumerate(fields[9:]):
        parts = cell.split(":")
        gt = parts[gt_at] if gt_at < len(parts) else ""
        pair = _GT.get(gt)
        if pair is None:
            if "/" in gt:
                problem = f"unphased genotype {gt!r}"
            elif "." in gt:
                problem = f"missing genotype {gt!r}"
            else:
                problem = f"unsupported genotype {gt!r}"
            raise ParseError(f"{problem} at {where} (sample column {s + 1})", lineno, path)
        haps[2 * s], haps[2 * s + 1] = pair
    return VariantRecord(chrom, pos, vid if vid != "." else where, haps, lineno)


def read_vcf_subset(path, sample_map, min_maf=0.0):
    """Read a phased biallelic variant file into a :class:`HaplotypePanel`.

    ``sample_map`` is a path to the sample TSV or an already-loaded mapping.
    Each sample contributes two rows; haplotype index 0 is the allele left
    of the ``|``.  Loci are sorted by (chromosome, position); duplicated
    coordinates are rejected.  No locus filtering happens unless
    ``min_maf > 0``.
    """
    mapping = sample_map if isinstance(sample_map, dict) else read_sample_map(sample_map)
    stream = iter_vcf(path)
    samples = next(stream)
    missing = [s for s in samples if s not in mapping]
    if missing:
        raise ParseError(f"samples missing from sample map: {missing[:5]}", path=path)
    records = list(stream)
    order = sorted(range(len(records)), key=lambda i: (chrom_key(records[i].chrom), records[i].pos))
    for a, b in zip(order, order[1:]):
        ra, rb = records[a], records[b]
        if ra.chrom == rb.chrom and ra.pos == rb.pos:
            raise ParseError(f"duplicate record at {rb.chrom}:{rb.pos}", rb.line, path)
    n = len(samples)
    alleles = np.zeros((2 * n, len(records)), np.uint8)
    for col, i in enumerate(order):
        alleles[:, col] = records[i].haplotypes
    panel = HaplotypePanel.from_alleles(
        alleles,
        sample_ids=[s for s in samples for _ in (0, 1)],
        hap_index=[h for _ in samples for h in (0, 1)],
        populations=[mapping[s] for s in samples for _ in (0, 1)],
        chrom=[records[i].chrom for i in order],
        positions=[records[i].pos for i in order],
        locus_ids=[records[i].id for i in order],
    )
    return panel.filter_maf(min_maf)


# ---------------------------------------------------------------------------
# native container
# ---------------------------------------------------------------------------

def _table_bytes(rows):
    out = []
    for row in rows:
        cells = [str(c) for c in row]
        if any("\t" in c or "\n" in c or "\r" in c for c in cells):
            raise FormatError(f"metadata field contains a tab or newline: {cells}")
        out.append("\t".join(cells))
    text = "".join(line + "\n" for line in out)
    return text.encode("utf-8")


def write_native(panel, path):
    path = Path(path)
    hap_rows = zip(panel.sample_ids, panel.hap_index.tolist(), panel.populations)
    locus_rows = zip(panel.chrom, panel.positions.tolist(), panel.locus_ids)
    hap_bytes = _table_bytes(hap_rows)
    locus_bytes = _table_bytes(locus_rows)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_U64.pack(panel.n_haplotypes))
        fh.write(_U64.pack(panel.n_loci))
        fh.write(panel.packed.tobytes())
        fh.write(_U64.pack(len(hap_bytes)))
        fh.write(hap_bytes)
        fh.write(_U64.pack(len(locus_bytes)))
        fh.write(locus_bytes)
    return path


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated payload while reading {what}")
    return data


def _read_table(fh, n_rows, n_cols, what):
    (length,) = _U64.unpack(_read_exact(fh, 8, f"{what} length"))
    if length > _MAX_COUNT:
        raise FormatError(f"{what} length {length} overflows")
    try:
        text = _read_exact(fh, length, what).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{what} is not valid UTF-8") from exc
    lines = text.split("\n")
    if lines[-1] != "":
        raise FormatError(f"{what} does not end with a newline")
    lines = lines[:-1]
    if len(lines) != n_rows:
        raise FormatError(f"{what} holds {len(lines)} rows, header says {n_rows}")
    rows = [line.split("\t") for line in lines]
    if any(len(r) != n_cols for r in rows):
        raise FormatError(f"{what} rows must have {n_cols} fields")
    return rows


def read_native(path):
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise FormatError(f"{path} is not an FQL1 container (bad magic)")
        (n_hap,) = _U64.unpack(_read_exact(fh, 8, "haplotype count"))
        (n_loci,) = _U64.unpack(_read_exact(fh, 8, "locus count"))
        if n_hap > _MAX_COUNT or n_loci > _MAX_COUNT:
            raise FormatError("count overflow in header")
        row_bytes = (n_loci + 7) // 8
        matrix_bytes = n_hap * row_bytes
        if 20 + matrix_bytes > size:
            raise FormatError("truncated payload: allele matrix extends past end of file")
        packed = np.frombuffer(_read_exact(fh, matrix_bytes, "allele matrix"), np.uint8)
        packed = packed.reshape(n_hap, row_bytes).copy()
        haps = _read_table(fh, n_hap, 3, "haplotype table")
        loci = _read_table(fh, n_loci, 3, "locus table")
        if fh.read(1):
            raise FormatError("trailing bytes after locus table")
    try:
        hap_index = [int(r[1]) for r in haps]
        positions = [int(r[1]) for r in loci]
    except ValueError as exc:
        raise FormatError(f"non-integer field in metadata: {exc}") from exc
    return HaplotypePanel(
        packed, n_loci,
        sample_ids=[r[0] for r in haps], hap_index=hap_index,
        populations=[r[2] for r in haps],
        chrom=[r[0] for r in loci], positions=positions, locus_ids=[r[2] for r in loci])


def read_panel(path, sample_map=None, min_maf=0.0):
    """Open a native container, or a variant text file when ``sample_map`` is given."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_native(path).filter_maf(min_maf)
    if sample_map is None:
        raise ConfigurationError(f"{path} is not an FQL1 container; pass a sample map to read it as VCF")
    return read_vcf_subset(path, sample_map, min_maf=min_maf)


# ---------------------------------------------------------------------------
# genetic maps
# ---------------------------------------------------------------------------

SEXES = ("male", "female")


@dataclass(frozen=True)
class ChromosomeMap:
    """Piecewise-linear map from base pairs to centimorgans for one chromosome and sex."""

    positions: np.ndarray
    cm: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        cm = np.asarray(self.cm, dtype=np.float64)
        if pos.ndim != 1 or pos.shape != cm.shape or pos.size == 0:
            raise FormatError("map needs matching, non-empty position and cM columns")
        if np.any(np.diff(pos) <= 0):
            raise FormatError("map positions must be strictly increasing")
        if np.any(np.diff(cm) < 0):
            raise FormatError("map cM values must be non-decreasing")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "cm", cm)

    @property
    def start(self):
        return self.positions[0]

    @property
    def end(self):
        return self.positions[-1]

    @property
    def total_cm(self):
        return float(self.cm[-1] - self.cm[0])

    def to_cm(self, position):
        """Linear interpolation between knots, constant beyond either end."""
        return np.interp(position, self.positions, self.cm)

    def to_bp(self, cm):
        """Inverse lookup; on flat stretches returns the left end of the stretch."""
        cm = np.asarray(cm, dtype=np.float64)
        idx = np.searchsorted(self.cm, cm, side="left")
        idx = np.clip(idx, 1, self.cm.size - 1) if self.cm.size > 1 else np.zeros_like(idx)
        if self.cm.size == 1:
            return np.full(cm.shape, self.positions[0]) if cm.ndim else float(self.positions[0])
        c0, c1 = self.cm[idx - 1], self.cm[idx]
        p0, p1 = self.positions[idx - 1], self.positions[idx]
        span = np.where(c1 > c0, c1 - c0, 1.0)
        frac = np.where(c1 > c0, (cm - c0) / span, 0.0)
        out = np.where(cm <= self.cm[0], self.positions[0],
                       np.where(cm >= self.cm[-1], self.positions[-1], p0 + frac * (p1 - p0)))
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class GeneticMap:
    """Sex-specific maps keyed by ``(chromosome, sex)``."""

    maps: dict

    @property
    def chromosomes(self):
        return tuple(sorted({c for c, _ in self.maps}, key=chrom_key))

    def get(self, chrom, sex):
        try:
            return self.maps[(str(chrom), sex)]
        except KeyError:
            raise ConfigurationError(f"genetic map has no {sex} map for chromosome {chrom}") from None

    def to_cm(self, chrom, position, sex):
        return self.get(chrom, sex).to_cm(position)

    @classmethod
    def uniform(cls, lengths_bp, male_cm_per_mb=1.0, female_cm_per_mb=1.0):
        """Constant-rate map; ``lengths_bp`` maps chromosome -> length in bp."""
        maps = {}
        for chrom, length in lengths_bp.items():
            pos = np.array([0.0, float(length)])
            for sex, rate in (("male", male_cm_per_mb), ("female", female_cm_per_mb)):
                maps[(str(chrom), sex)] = ChromosomeMap(pos, pos * rate / 1e6)
        return cls(maps)


def read_genetic_map(path):
    """TSV with columns ``chromosome position_bp cM_male cM_female`` (header optional)."""
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        for lineno, row in enumerate(reader, 1):
            if not row or row[0].startswith("#"):
                continue
            if lineno == 1 and row[0].lower() in ("chromosome", "chrom", "chr"):
                continue
            if len(row) != 4:
                raise FormatError(f"expected 4 columns, found {len(row)}", lineno, path)
            try:
                pos, cm_m, cm_f = int(row[1]), float(row[2]), float(row[3])
            except ValueError:
                raise FormatError(f"non-numeric map row {row}", lineno, path) from None
            knots = rows.setdefault(row[0], [])
            if knots and pos <= knots[-1][0]:
                raise FormatError(f"positions not increasing on chromosome {row[0]}", lineno, path)
            if knots and (cm_m < knots[-1][1] or cm_f < knots[-1][2]):
                raise FormatError(f"decreasing cM on chromosome {row[0]}", lineno, path)
            knots.append((pos, cm_m, cm_f))
    if not rows:
        raise FormatError("genetic map is empty", path=path)
    maps = {}
    for chrom, knots in rows.items():
        arr = np.asarray(knots, dtype=np.float64)
        maps[(chrom, "male")] = ChromosomeMap(arr[:, 0], arr[:, 1])
        maps[(chrom, "female")] = ChromosomeMap(arr[:, 0], arr[:, 2])
    return GeneticMap(maps)


def write_genetic_map(gmap, path):
    with open(path, "w", newline="") as fh:
        fh.write("chromosome\tposition_bp\tcM_male\tcM_female\n")
        for chrom in gmap.chromosomes:
            male, female = gmap.get(chrom, "male"), gmap.get(chrom, "female")
            positions = np.union1d(male.positions, female.positions)
            for pos in positions:
                fh.write(f"{chrom}\t{int(pos)}\t{male.to_cm(pos):.10g}\t{female.to_cm(pos):.10g}\n")
    return path
