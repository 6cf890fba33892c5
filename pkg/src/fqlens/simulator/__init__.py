"""Forward-time genealogical simulator."""

from .config import load_sim_config, sim_config_from_dict
from .engine import (FounderSpec, Generation, LocusLayout, PanmixiaSchedule, SimConfig,
                     SimulationResult, assemble_gametes, draw_gamete_plan, make_gamete, pair_generation,
                     run_experiment, step_generation, synth_founders)
from .pedigree import (FEMALE, MALE, Individual, MateCheck, Pedigree, audit_unions,
                       kinship_coefficient, mate_eligibility, read_pedigree, write_pedigree)
