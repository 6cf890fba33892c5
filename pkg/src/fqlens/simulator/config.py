"""SimConfig files (TOML or JSON).

Example::

    seed = 7
    n_generations = 17
    offspring_lambda = 3.0
    q = [1.0, 2.0]

    [founders]
    counts = { WA = 60, EA = 60, CSN = 60 }
    n_loci = 5000
    ancestral_beta = [0.5, 0.5]
    divergence = 0.01          # or: beta = { WA = [0.5, 0.5], ... }

    [map]                      # or: path = "map.tsv"
    chromosomes = 4
    length_bp = 100_000_000
    male_cM_per_Mb = 1.0
    female_cM_per_Mb = 1.6

    [[schedule]]
    from_generation = 0
    rho = { WA = 0.5, EA = 0.5, CSN = 0.5 }

Relative paths are resolved against the config file's directory.
"""

from pathlib import Path

from ..errors import ConfigurationError
from ..genotype_io import GeneticMap, load_config, read_genetic_map, read_panel
from .engine import FounderSpec, PanmixiaSchedule, SimConfig, default_map

_TOP_KEYS = {"seed", "n_generations", "offspring_lambda", "q", "founders", "map", "schedule",
             "kinship_depth", "name", "description"}


def _map_from(section, base):
    if not section:
        return default_map()
    if "path" in section:
        return read_genetic_map(base / section["path"])
    n = int(section.get("chromosomes", 4))
    length = float(section.get("length_bp", 100_000_000))
    return GeneticMap.uniform({str(c): length for c in range(1, n + 1)},
                              float(section.get("male_cM_per_Mb", 1.0)),
                              float(section.get("female_cM_per_Mb", 1.6)))


def sim_config_from_dict(data, base=Path("."), seed=None):
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    try:
        schedule = PanmixiaSchedule(tuple((e["from_generation"], e["rho"]) for e in data["schedule"]))
        f = data["founders"]
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"config is missing a required entry: {exc}") from None
    founder_panel = None
    if "panel" in f:
        founder_panel = read_panel(base / f["panel"],
                                   base / f["sample_map"] if "sample_map" in f else None)
        counts = {d: 0 for d in schedule.demes}
    else:
        counts = f.get("counts")
        if not isinstance(counts, dict):
            raise ConfigurationError("founders.counts must map deme -> number of founders")
    beta = f.get("beta", (0.5, 0.5))
    founders = FounderSpec(
        counts=counts, n_loci=int(f.get("n_loci", 1000)), beta=beta,
        shared_frequencies=bool(f.get("shared_frequencies", False)),
        ancestral_beta=tuple(f.get("ancestral_beta", (0.5, 0.5))),
        divergence=f.get("divergence"))
    return SimConfig(
        founders=founders, schedule=schedule,
        n_generations=int(data.get("n_generations", 17)),
        offspring_lambda=float(data.get("offspring_lambda", 3.0)),
        seed=int(data.get("seed", 0) if seed is None else seed),
        q_grid=tuple(data.get("q", (1.0, 2.0))),
        genetic_map=_map_from(data.get("map"), base),
        kinship_depth=int(data.get("kinship_depth", 3)),
        founder_panel=founder_panel)


def load_sim_config(path, seed=None):
    path = Path(path)
    return sim_config_from_dict(load_config(path), path.parent, seed=seed)
