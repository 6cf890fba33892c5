"""Command-line interface: ``fqlens {convert,compute,ovr,loo,simulate}``.

Every table written by a command starts with ``#`` comment lines naming
the tool version, seed, units and the run manifest (a JSON file holding
the resolved configuration, input digests and timestamps).  Numbers are
printed with 17 significant digits so they round-trip through a double.

Exit codes: 0 success, 2 configuration error, 3 parse error,
4 undefined statistic, 5 extinction.
"""

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, FqlensError, UndefinedStatisticError
from .genotype_io import read_panel, read_region_spec, read_sample_map, read_vcf_subset, write_native
from .resampling import RNG_ALGORITHM, BootstrapConfig, bootstrap_statistic
from .stats import DEFAULT_Q_GRID, RegionCounts, check_q_grid, per_locus_fq

log = logging.getLogger("fqlens")

EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_UNDEFINED, EXIT_EXTINCT = 0, 2, 3, 4, 5

#: Bumped whenever a command's column set changes.
COLUMNS_VERSION = 1

COLUMNS = {
    "compute": ("region", "q", "F_q", "ci_low", "ci_high", "n_loci_used", "n_loci_skipped"),
    "compute_per_locus": ("region", "chrom", "pos", "locus_id", "q", "F_q"),
    "ovr": ("region", "focal", "q", "F_q", "ci_low", "ci_high", "n_loci_used", "n_loci_skipped"),
    "loo": ("region", "population", "q", "delta_F_q", "ci_low", "ci_high",
            "n_loci_used", "n_loci_skipped"),
    "simulate": ("generation", "deme", "statistic", "q", "value"),
}

LOO_SIGN_NOTE = ("delta_F_q = F_q(region) - F_q(region without population); "
                 "positive: population drives regional structure, negative: it homogenises")


# ---------------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------------

def fmt_num(x):
    """17-significant-digit text for floats, plain text for everything else."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return "%.17g" % x
    return str(x)


def _json_value(x):
    if x is None or (isinstance(x, (float, np.floating)) and math.isnan(float(x))):
        return "null"
    if isinstance(x, (int, np.integer, float, np.floating)) and not isinstance(x, bool):
        return fmt_num(x)
    return json.dumps(x)


def render_table(rows, columns, fmt, header_lines):
    """Render rows (sequences aligned with ``columns``) as CSV or JSON text."""
    if fmt == "json":
        meta = dict(line.split("=", 1) for line in header_lines if "=" in line)
        parts = ["{", f'  "meta": {json.dumps(meta, sort_keys=True)},',
                 f'  "columns": {json.dumps(list(columns))},', '  "rows": [']
        body = ["    {" + ", ".join(f"{json.dumps(c)}: {_json_value(v)}" for c, v in zip(columns, r)) + "}"
                for r in rows]
        parts.append(",\n".join(body))
        parts += ["  ]", "}"]
        return "\n".join(p for p in parts if p) + "\n"
    out = [f"# {line}" for line in header_lines]
    out.append(",".join(columns))
    for r in rows:
        out.append(",".join(_csv_cell(fmt_num(v)) for v in r))
    return "\n".join(out) + "\n"


def _csv_cell(text):
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Provenance record written next to every output."""

    def __init__(self, command, args):
        self.data = {
            "tool": "fqlens",
            "version": __version__,
            "command": command,
            "argv": list(args.argv) if getattr(args, "argv", None) else [],
            "seed": args.seed,
            "rng_algorithm": RNG_ALGORITHM,
            "columns_version": COLUMNS_VERSION,
            "columns": {},
            "config": {},
            "inputs": {},
            "outputs": [],
            "skipped_loci": {},
            "started": _now(),
            "finished": None,
            "status": "running",
        }

    def add_input(self, role, path, panel=None):
        entry = {"path": str(path), "sha256": file_digest(path)}
        if panel is not None:
            entry["panel_sha256"] = panel.digest()
        self.data["inputs"][role] = entry

    def write(self, path, status="ok"):
        self.data["finished"] = _now()
        self.data["status"] = status
        Path(path).write_text(json.dumps(self.data, indent=2, sort_keys=True, default=str) + "\n")
        return path


def manifest_path_for(args, default_dir=None):
    if args.manifest:
        return Path(args.manifest)
    if default_dir is not None:
        return Path(default_dir) / "manifest.json"
    if getattr(args, "output", None):
        return Path(str(args.output) + ".manifest.json")
    return None


def _header(args, manifest_path, extra=()):
    lines = [f"fqlens {__version__}", f"seed={args.seed}",
             f"manifest={manifest_path if manifest_path else 'none'}",
             f"columns_version={COLUMNS_VERSION}",
             "units=nats (entropies use the natural logarithm; F_q is dimensionless)"]
    return lines + list(extra)


def _emit(text, output):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# shared analysis helpers
# ---------------------------------------------------------------------------

def parse_q_grid(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"--q-grid expects comma-separated numbers, got {text!r}") from None
    return check_q_grid(values)


def _load_inputs(args, manifest):
    panel = read_panel(args.panel, args.sample_map, min_maf=args.min_maf)
    manifest.add_input("panel", args.panel, panel)
    if args.sample_map:
        manifest.add_input("sample_map", args.sample_map)
    if args.regions:
        regions = read_region_spec(args.regions)
        manifest.add_input("regions", args.regions)
    else:
        regions = {"all": panel.population_ids}
    q_grid = parse_q_grid(args.q_grid) if args.q_grid else DEFAULT_Q_GRID
    manifest.data["config"].update({
        "q_grid": list(q_grid), "regions": {k: list(v) for k, v in regions.items()},
        "min_maf": args.min_maf, "bootstrap": args.bootstrap, "replicates": args.replicates,
        "per_pop_cap": args.cap, "ci_level": args.ci, "threads": args.threads,
        "format": args.format})
    log.info("panel: %d haplotypes x %d loci", panel.n_haplotypes, panel.n_loci)
    return panel, regions, q_grid


def _bootstrap_cfg(args):
    return BootstrapConfig(n_replicates=args.replicates, per_pop_cap=args.cap,
                           ci_level=args.ci, seed=args.seed, threads=args.threads)


def _region_rows(panel, region, units, q_grid, evaluate, args):
    """Point values (and optional bands) for ``units x q_grid`` within one region.

    ``evaluate(counts, unit, q)`` returns a GenomeAggregate-like value; the
    output is a list of ``(unit, q, value, lo, hi, n_used, n_skipped)``.
    """
    sub = panel.select_populations(region)
    counts = RegionCounts(sub, region)
    point = []
    for unit in units:
        for q in q_grid:
            point.append(evaluate(counts, unit, q))
    lows = highs = [None] * len(point)
    if args.bootstrap:
        def stat(p):
            c = RegionCounts(p, region)
            return np.array([evaluate(c, u, q)[0] for u in units for q in q_grid])
        summary = bootstrap_statistic(sub, stat, _bootstrap_cfg(args))
        lows = np.atleast_1d(summary.ci_low).tolist()
        highs = np.atleast_1d(summary.ci_high).tolist()
        if not summary.reliable:
            log.warning("bootstrap for %s: %d of %d replicates undefined; bands unreliable",
                        "+".join(region), summary.n_missing, args.replicates)
    rows = []
    k = 0
    for unit in units:
        for q in q_grid:
            value, n_used, n_skipped = point[k]
            rows.append((unit, q, value, lows[k], highs[k], n_used, n_skipped))
            k += 1
    return rows


def _write_result(args, command, rows, extra_header=()):
    manifest = args._manifest
    mpath = manifest_path_for(args)
    manifest.data["columns"][command] = list(COLUMNS[command])
    text = render_table(rows, COLUMNS[command], args.format, _header(args, mpath, extra_header))
    _emit(text, args.output)
    if args.output:
        manifest.data["outputs"].append(str(args.output))
    return mpath


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_convert(args):
    manifest = args._manifest
    sample_map = read_sample_map(args.sample_map)
    panel = read_vcf_subset(args.vcf, sample_map, min_maf=args.min_maf)
    write_native(panel, args.output)
    manifest.add_input("vcf", args.vcf)
    manifest.add_input("sample_map", args.sample_map)
    manifest.data["config"].update({"min_maf": args.min_maf})
    manifest.data["outputs"].append(str(args.output))
    summary = dict(panel.summary(), panel_sha256=panel.digest(), output=str(args.output))
    manifest.data["panel"] = summary
    print(f"haplotypes\t{panel.n_haplotypes}")
    print(f"loci\t{panel.n_loci}")
    for pop, n in panel.population_sizes().items():
        print(f"population\t{pop}\t{n}")
    print(f"sha256\t{summary['panel_sha256']}")
    return EXIT_OK


def cmd_compute(args):
    manifest = args._manifest
    panel, regions, q_grid = _load_inputs(args, manifest)

    def evaluate(counts, _unit, q):
        agg = counts.regional(q)
        return agg.value, agg.n_used, agg.n_skipped

    rows = []
    for rid, region in regions.items():
        for _, q, v, lo, hi, nu, ns in _region_rows(panel, region, [rid], q_grid, evaluate, args):
            rows.append((rid, q, v, lo, hi, nu, ns))
            manifest.data["skipped_loci"][f"{rid}@q={fmt_num(q)}"] = ns
    mpath = _write_result(args, "compute", rows)
    if args.per_locus:
        manifest.data["columns"]["compute_per_locus"] = list(COLUMNS["compute_per_locus"])
        plrows = []
        for rid, region in regions.items():
            counts = RegionCounts(panel.select_populations(region), region)
            freqs = counts.population_freqs()
            weights = np.full(len(region), 1.0 / len(region))
            for q in q_grid:
                vals = (per_locus_fq(freqs, weights, q) if len(region) > 1
                        else np.zeros(panel.n_loci))
                for j, v in enumerate(vals.tolist()):
                    plrows.append((rid, panel.chrom[j], int(panel.positions[j]),
                                   panel.locus_ids[j], q, v))
        text = render_table(plrows, COLUMNS["compute_per_locus"], args.format, _header(args, mpath))
        Path(args.per_locus).write_text(text)
        manifest.data["outputs"].append(str(args.per_locus))
    return EXIT_OK


def cmd_ovr(args):
    manifest = args._manifest
    panel, regions, q_grid = _load_inputs(args, manifest)

    def evaluate(counts, focal, q):
        agg = counts.ovr(focal, q)
        return agg.value, agg.n_used, agg.n_skipped

    rows = []
    for rid, region in regions.items():
        if args.focal:
            focals = [p for p in args.focal if p in region]
        else:
            focals = list(region)
        if not focals:
            continue
        if len(region) < 2:
            raise ConfigurationError(f"region {rid!r} has a single population; one-vs-rest is undefined")
        for focal, q, v, lo, hi, nu, ns in _region_rows(panel, region, focals, q_grid, evaluate, args):
            rows.append((rid, focal, q, v, lo, hi, nu, ns))
            manifest.data["skipped_loci"][f"{rid}/{focal}@q={fmt_num(q)}"] = ns
    if args.focal:
        known = {p for r in regions.values() for p in r}
        unknown = [p for p in args.focal if p not in known]
        if unknown:
            raise ConfigurationError(f"focal populations not in any region: {unknown}")
    _write_result(args, "ovr", rows)
    return EXIT_OK


def cmd_loo(args):
    manifest = args._manifest
    panel, regions, q_grid = _load_inputs(args, manifest)

    def evaluate(counts, pop, q):
        full = counts.regional(q)
        return counts.loo(pop, q), full.n_used, full.n_skipped

    rows = []
    for rid, region in regions.items():
        if len(region) < 2:
            raise ConfigurationError(f"region {rid!r} needs at least two populations for leave-one-out")
        for pop, q, v, lo, hi, nu, ns in _region_rows(panel, region, list(region), q_grid, evaluate, args):
            rows.append((rid, pop, q, v, lo, hi, nu, ns))
            manifest.data["skipped_loci"][f"{rid}@q={fmt_num(q)}"] = ns
    _write_result(args, "loo", rows, extra_header=[f"sign={LOO_SIGN_NOTE}"])
    return EXIT_OK


def _sim_config_summary(cfg):
    gmap = cfg.genetic_map
    return {
        "seed": cfg.seed,
        "n_generations": cfg.n_generations,
        "offspring_lambda": cfg.offspring_lambda,
        "q": list(cfg.q_grid),
        "kinship_depth": cfg.kinship_depth,
        "schedule": [{"from_generation": g, "rho": r} for g, r in cfg.schedule.entries],
        "founders": {
            "counts": dict(cfg.founders.counts),
            "n_loci": cfg.founders.n_loci,
            "beta": cfg.founders.beta,
            "shared_frequencies": cfg.founders.shared_frequencies,
            "ancestral_beta": list(cfg.founders.ancestral_beta),
            "divergence": cfg.founders.divergence,
            "external_panel": cfg.founder_panel is not None,
        },
        "map_total_cM": {f"{c}/{sex}": m.total_cm for (c, sex), m in sorted(gmap.maps.items())},
    }


def cmd_simulate(args):
    from .simulator import load_sim_config, write_pedigree
    from .simulator import run_experiment

    manifest = args._manifest
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = load_sim_config(args.config, seed=args.seed)
    if args.q_grid:
        cfg.q_grid = parse_q_grid(args.q_grid)
    args.seed = cfg.seed
    manifest.data["seed"] = cfg.seed
    manifest.add_input("config", args.config)
    manifest.data["config"] = _sim_config_summary(cfg)
    mpath = manifest_path_for(args, default_dir=outdir)

    panel_dir = outdir / "panels"
    on_generation = None
    if args.panels:
        panel_dir.mkdir(exist_ok=True)

        def on_generation(g, panel):
            path = panel_dir / f"generation_{g:03d}.fql"
            write_native(panel, path)
            manifest.data["outputs"].append(str(path))

    result = run_experiment(cfg, on_generation=on_generation)
    rows = [(r["generation"], r["deme"], r["statistic"], r["q"], r["value"]) for r in result.records]
    manifest.data["columns"]["simulate"] = list(COLUMNS["simulate"])
    header = _header(args, mpath, [f"status={result.status}",
                                   f"last_generation={result.last_generation}",
                                   f"loo={LOO_SIGN_NOTE}"])
    series = outdir / ("timeseries.json" if args.format == "json" else "timeseries.csv")
    series.write_text(render_table(rows, COLUMNS["simulate"], args.format, header))
    ped_path = write_pedigree(result.pedigree, outdir / "pedigree.tsv")
    manifest.data["outputs"] += [str(series), str(ped_path)]
    manifest.data["census"] = {str(g): c for g, c in result.census.items()}
    manifest.data["simulation_status"] = result.status
    args._manifest_target = mpath
    if result.status == "extinct":
        print(f"fqlens: population extinct after generation {result.last_generation}; "
              f"partial outputs in {outdir}", file=sys.stderr)
        return EXIT_EXTINCT
    print(f"completed {result.last_generation} generations; outputs in {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=_seed, default=None,
                   help="random seed (default 0; simulate defaults to the config's seed)")
    g.add_argument("--threads", type=_positive_int, default=1, help="worker threads (results do not depend on it)")
    g.add_argument("--q-grid", default=None, help="comma-separated orders q (default %s)"
                   % ",".join(fmt_num(q) for q in DEFAULT_Q_GRID))
    g.add_argument("--bootstrap", action="store_true", help="attach percentile bands")
    g.add_argument("--replicates", type=_positive_int, default=100, help="bootstrap replicates (default 100)")
    g.add_argument("--cap", type=_positive_int, default=40,
                   help="haplotypes drawn per population per replicate (default 40)")
    g.add_argument("--ci", type=float, default=0.95, help="confidence level (default 0.95)")
    g.add_argument("--min-maf", type=float, default=0.0, help="drop loci with pooled MAF below this (default 0)")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--manifest", default=None, help="manifest path (default <output>.manifest.json)")

    parser = argparse.ArgumentParser(
        prog="fqlens", description="Tsallis-order differentiation statistics for haplotype panels.",
        epilog="Set FQLENS_LOG=debug|info|warning|error for diagnostics on stderr.")
    parser.add_argument("--version", action="version", version=f"fqlens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("convert", parents=[common], help="phased VCF + sample map -> native panel")
    p.add_argument("vcf")
    p.add_argument("sample_map")
    p.add_argument("-o", "--output", required=True, help="native panel to write")
    p.set_defaults(func=cmd_convert)

    def analysis(name, helptext, func):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("panel", help="native panel, or VCF together with --sample-map")
        p.add_argument("--sample-map", default=None)
        p.add_argument("--regions", default=None,
                       help="TOML/JSON region spec (default: one region with every population)")
        p.add_argument("-o", "--output", default=None, help="output file (default stdout)")
        p.set_defaults(func=func)
        return p

    p = analysis("compute", "regional F_q per region", cmd_compute)
    p.add_argument("--per-locus", default=None, help="also write per-locus F_q to this file")
    p = analysis("ovr", "one-vs-rest F_q per focal population", cmd_ovr)
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--focal", action="append", default=None, help="focal population (repeatable)")
    grp.add_argument("--all", action="store_true", help="every population of every region (default)")
    analysis("loo", "leave-one-out influence on regional F_q", cmd_loo)

    p = sub.add_parser("simulate", parents=[common], help="forward-time simulation from a config")
    p.add_argument("config", help="TOML/JSON simulation config")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--panels", action="store_true", help="write every generation's native panel")
    p.set_defaults(func=cmd_simulate)
    return parser


def _configure_logging():
    level = os.environ.get("FQLENS_LOG", "warning").strip().upper() or "WARNING"
    if level.isdigit():
        numeric = int(level)
    else:
        numeric = getattr(logging, level, None)
        if not isinstance(numeric, int):
            numeric = logging.WARNING
    logging.basicConfig(level=numeric, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None):
    _configure_logging()
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    if args.command != "simulate" and args.seed is None:
        args.seed = 0
    if not 0.0 < args.ci < 1.0:
        parser.error("--ci must lie strictly between 0 and 1")
    if not 0.0 <= args.min_maf <= 0.5:
        parser.error("--min-maf must lie in [0, 0.5]")
    args._manifest = RunManifest(args.command, args)
    args._manifest_target = None
    status = "ok"
    try:
        code = args.func(args)
    except UndefinedStatisticError as exc:
        print(f"fqlens: undefined statistic: {exc}", file=sys.stderr)
        code, status = EXIT_UNDEFINED, "undefined statistic"
    except FqlensError as exc:
        print(f"fqlens: error: {exc}", file=sys.stderr)
        code, status = exc.exit_code, type(exc).__name__
    except OSError as exc:
        print(f"fqlens: error: {exc}", file=sys.stderr)
        code, status = EXIT_CONFIG, "io error"
    if code == EXIT_EXTINCT:
        status = "extinct"
    target = args._manifest_target or manifest_path_for(args)
    if args.command == "convert" and code == EXIT_OK and target is None:
        target = Path(str(args.output) + ".manifest.json")
    if target is not None and (code in (EXIT_OK, EXIT_EXTINCT) or target.parent.exists()):
        try:
            args._manifest.write(target, status)
        except OSError as exc:
            print(f"fqlens: could not write manifest: {exc}", file=sys.stderr)
            code = code or EXIT_CONFIG
    return code


def console_main():
    sys.exit(main())


if __name__ == "__main__":
    console_main()
