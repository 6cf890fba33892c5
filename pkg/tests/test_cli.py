import csv
import json
from pathlib import Path

import numpy as np
import pytest

from fqlens.cli import fmt_num, main
from fqlens.genotype_io import read_native, write_native
from fqlens.panel import HaplotypePanel

DATA = Path(__file__).parent / "data"
GOLDEN_DIGEST = "ca822b56ed57bc395009c45d97df67000058400977e66746bed1407eef0b5aee"


def read_csv(path):
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def freq_panel(tmp_path, pop_freqs, n=20, name="p.fql"):
    rows, pops = [], []
    for pop, freqs in pop_freqs.items():
        block = np.zeros((n, len(freqs)), np.uint8)
        for j, p in enumerate(freqs):
            block[: int(round(p * n)), j] = 1
        rows.append(block)
        pops += [pop] * n
    alleles = np.vstack(rows)
    panel = HaplotypePanel.from_alleles(alleles, [f"s{i // 2}" for i in range(len(pops))],
                                        [i % 2 for i in range(len(pops))], pops)
    return write_native(panel, tmp_path / name)


def regions_file(tmp_path, regions):
    path = tmp_path / "regions.json"
    path.write_text(json.dumps({"regions": regions}))
    return path


def test_fmt_num_round_trips():
    for x in (0.1, 1 / 3, 2.0 ** -40, 123456789.123456789):
        assert float(fmt_num(x)) == x
    assert fmt_num(float("nan")) == "nan" and fmt_num(None) == "" and fmt_num(3) == "3"


def test_convert_golden(tmp_path, capsys):
    out = tmp_path / "g.fql"
    assert main(["convert", str(DATA / "golden.vcf"), str(DATA / "golden_samples.tsv"), "-o", str(out)]) == 0
    text = capsys.readouterr().out
    assert "haplotypes\t6" in text and "loci\t2" in text and GOLDEN_DIGEST in text
    assert read_native(out).digest() == GOLDEN_DIGEST
    manifest = json.loads(Path(str(out) + ".manifest.json").read_text())
    assert manifest["panel"]["panel_sha256"] == GOLDEN_DIGEST and manifest["status"] == "ok"
    # reconverting is idempotent
    again = tmp_path / "g2.fql"
    main(["convert", str(DATA / "golden.vcf"), str(DATA / "golden_samples.tsv"), "-o", str(again)])
    assert again.read_bytes() == out.read_bytes()


def test_convert_errors(tmp_path, capsys):
    empty = tmp_path / "empty.tsv"
    empty.write_text("")
    assert main(["convert", str(DATA / "golden.vcf"), str(empty), "-o", str(tmp_path / "x.fql")]) == 2
    bad = tmp_path / "bad.vcf"
    bad.write_text((DATA / "golden.vcf").read_text().replace("0|1\t1|1", "0/1\t1|1"))
    assert main(["convert", str(bad), str(DATA / "golden_samples.tsv"), "-o", str(tmp_path / "y.fql")]) == 3
    assert "line 4" in capsys.readouterr().err


def test_compute_fixtures(tmp_path):
    opp = freq_panel(tmp_path, {"A": [1.0, 0.0], "B": [0.0, 1.0]}, name="opp.fql")
    out = tmp_path / "opp.csv"
    assert main(["compute", str(opp), "--q-grid", "0.5,1,2,3", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert [float(r["F_q"]) for r in rows] == [1.0] * 4
    assert rows[0].keys() == {"region", "q", "F_q", "ci_low", "ci_high", "n_loci_used", "n_loci_skipped"}
    three = freq_panel(tmp_path, {"P1": [0.2], "P2": [0.4], "P3": [0.6]}, name="three.fql")
    out = tmp_path / "three.csv"
    main(["compute", str(three), "--q-grid", "2", "-o", str(out)])
    assert float(read_csv(out)[0]["F_q"]) == pytest.approx(0.111111, abs=5e-7)
    same = freq_panel(tmp_path, {"A": [0.3, 0.5], "B": [0.3, 0.5]}, name="same.fql")
    out = tmp_path / "same.csv"
    main(["compute", str(same), "--q-grid", "1,2", "-o", str(out), "--per-locus", str(tmp_path / "pl.csv")])
    assert [float(r["F_q"]) for r in read_csv(out)] == [0.0, 0.0]
    assert len(read_csv(tmp_path / "pl.csv")) == 4


def test_header_and_manifest(tmp_path):
    panel = freq_panel(tmp_path, {"A": [0.1, 0.0], "B": [0.9, 0.0]})
    out = tmp_path / "o.csv"
    main(["compute", str(panel), "--seed", "17", "-o", str(out)])
    head = [l for l in out.read_text().splitlines() if l.startswith("#")]
    assert "# seed=17" in head and f"# manifest={out}.manifest.json" in head
    assert any("nats" in l for l in head)
    m = json.loads(Path(f"{out}.manifest.json").read_text())
    for key in ("version", "config", "inputs", "seed", "started", "finished", "skipped_loci",
                "columns_version", "rng_algorithm"):
        assert key in m
    assert m["seed"] == 17 and m["inputs"]["panel"]["sha256"]
    assert m["skipped_loci"]["all@q=1"] == 1


def test_ovr_and_loo(tmp_path):
    panel = freq_panel(tmp_path, {"P1": [0.2], "P2": [0.4], "P3": [0.6]})
    regions = regions_file(tmp_path, {"R": ["P1", "P2", "P3"]})
    out = tmp_path / "loo.csv"
    assert main(["loo", str(panel), "--regions", str(regions), "--q-grid", "2", "-o", str(out)]) == 0
    assert "sign=" in out.read_text()
    loo = {r["population"]: float(r["delta_F_q"]) for r in read_csv(out)}
    assert loo["P3"] == pytest.approx(0.063492, abs=5e-7)
    out = tmp_path / "ovr.csv"
    assert main(["ovr", str(panel), "--regions", str(regions), "--focal", "P1", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert {r["focal"] for r in rows} == {"P1"} and len(rows) == 9
    out = tmp_path / "ovr_all.json"
    assert main(["ovr", str(panel), "--all", "--format", "json", "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert len(data["rows"]) == 27 and data["meta"]["seed"] == "0"


def test_two_population_loo_matches_compute(tmp_path):
    panel = freq_panel(tmp_path, {"A": [0.1, 0.7], "B": [0.4, 0.5]})
    main(["loo", str(panel), "--q-grid", "1,2", "-o", str(tmp_path / "l.csv")])
    main(["compute", str(panel), "--q-grid", "1,2", "-o", str(tmp_path / "c.csv")])
    comp = [r["F_q"] for r in read_csv(tmp_path / "c.csv")]
    loo = read_csv(tmp_path / "l.csv")
    assert [r["delta_F_q"] for r in loo if r["population"] == "A"] == comp
    assert [r["delta_F_q"] for r in loo if r["population"] == "B"] == comp


def test_bootstrap_is_byte_reproducible(tmp_path):
    rng = np.random.default_rng(0)
    alleles = (rng.random((80, 60)) < 0.4).astype(np.uint8)
    pops = ["A"] * 40 + ["B"] * 40
    panel = write_native(HaplotypePanel.from_alleles(alleles, [f"s{i}" for i in range(80)], [0] * 80, pops),
                         tmp_path / "r.fql")
    args = ["ovr", str(panel), "--bootstrap", "--replicates", "25", "--seed", "5", "--q-grid", "1,2"]
    main(args + ["-o", str(tmp_path / "a.csv")])
    main(args + ["-o", str(tmp_path / "b.csv"), "--threads", "3"])
    a, b = read_csv(tmp_path / "a.csv"), read_csv(tmp_path / "b.csv")
    assert a == b
    assert all(float(r["ci_low"]) <= float(r["ci_high"]) for r in a)


def test_error_exit_codes(tmp_path, capsys):
    mono = freq_panel(tmp_path, {"A": [0.0, 1.0], "B": [0.0, 1.0]})
    assert main(["compute", str(mono)]) == 4
    assert "undefined" in capsys.readouterr().err
    single = regions_file(tmp_path, {"R": ["A"]})
    assert main(["loo", str(mono), "--regions", str(single)]) == 2
    assert main(["compute", str(tmp_path / "missing.fql")]) == 2
    garbage = tmp_path / "garbage.fql"
    garbage.write_bytes(b"FQL1\x01")
    assert main(["compute", str(garbage)]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["compute"])
    assert exc.value.code == 2


SMALL_SIM = """
seed = 3
n_generations = 3
q = [1.0, 2.0]
[founders]
counts = {{ A = 10, B = 10 }}
n_loci = 200
divergence = 0.05
[map]
chromosomes = 2
length_bp = 50_000_000
[[schedule]]
from_generation = 0
rho = {{ A = {rho}, B = {rho} }}
"""


def test_simulate_outputs_and_replay(tmp_path):
    cfg = tmp_path / "sim.toml"
    cfg.write_text(SMALL_SIM.format(rho=0.3))
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert main(["simulate", str(cfg), "-o", str(out1), "--panels"]) == 0
    assert main(["simulate", str(cfg), "-o", str(out2)]) == 0
    series1 = (out1 / "timeseries.csv").read_text()
    assert series1.replace(str(out1), "") == (out2 / "timeseries.csv").read_text().replace(str(out2), "")
    rows = read_csv(out1 / "timeseries.csv")
    assert rows[0].keys() == {"generation", "deme", "statistic", "q", "value"}
    assert {r["statistic"] for r in rows} == {"census_haplotypes", "ovr_fq", "loo_delta_fq"}
    assert (out1 / "pedigree.tsv").read_text().startswith("id\tsex\tdeme\tgeneration\tmother\tfather")
    assert len(list((out1 / "panels").glob("*.fql"))) == 4
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 3 and manifest["simulation_status"] == "completed"
    # --seed overrides the config
    assert main(["simulate", str(cfg), "-o", str(tmp_path / "run3"), "--seed", "4"]) == 0
    assert (tmp_path / "run3" / "timeseries.csv").read_text() != series1


def test_simulate_extinction_and_bad_config(tmp_path):
    cfg = tmp_path / "dead.toml"
    cfg.write_text(SMALL_SIM.format(rho=0.3).replace("n_generations = 3",
                                                      "n_generations = 12\noffspring_lambda = 0.01"))
    assert main(["simulate", str(cfg), "-o", str(tmp_path / "dead")]) == 5
    assert (tmp_path / "dead" / "timeseries.csv").exists()
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL_SIM.format(rho=1.5))
    assert main(["simulate", str(bad), "-o", str(tmp_path / "bad")]) == 2
    broken = tmp_path / "broken.toml"
    broken.write_text("seed = [")
    assert main(["simulate", str(broken), "-o", str(tmp_path / "broken")]) == 3


def test_shipped_configs_load():
    from fqlens.simulator import load_sim_config
    root = Path(__file__).resolve().parents[1] / "configs"
    pulse = load_sim_config(root / "isolation_pulse.toml")
    assert [g for g, _ in pulse.schedule.entries] == [0, 8, 14]
    assert pulse.schedule.rho("WA", 8) == 0.05 and pulse.schedule.rho("CSN", 14) == 0.9
    base = load_sim_config(root / "baseline_drift.toml")
    assert base.schedule.entries[0][1] == {"WA": 0.3, "EA": 0.5, "CSN": 0.1}
    assert base.schedule.entries[1][1] == {"WA": 0.1, "EA": 0.6, "CSN": 0.3}
