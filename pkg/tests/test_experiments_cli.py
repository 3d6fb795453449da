"""Command-line scenarios: argument resolution, cache discipline, output
layout, and reproducibility of the written artifacts."""

import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from adhocmimo.experiments_cli import (
    ExperimentSpec,
    UsageError,
    main,
    run_experiment,
    spec_from_args,
    table_filename,
)

from conftest import CACHE_DIR


def seed_tables(out_dir: Path) -> None:
    """Copy the suite's cached rate tables into a scenario output tree."""
    table_dir = out_dir / "tables"
    table_dir.mkdir(parents=True, exist_ok=True)
    for path in CACHE_DIR.glob("rates_*.json"):
        shutil.copy(path, table_dir / path.name)


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


# ---------------------------------------------------------------------------
# argument resolution


def test_spec_defaults_per_scenario():
    spec = spec_from_args(["mst-sweep"])
    assert spec.k_values == (2, 6, 10)
    assert spec.n_rx_values == (1, 2, 4)
    assert spec.flag_names == ("ideal", "imp")
    assert spec.n_trials == 200 and spec.seed == 0 and spec.jobs == 1

    spec = spec_from_args(["loss-ratio"])
    assert spec.k_values == (10,)
    assert spec.n_rx_values == (4,)
    assert spec.flag_names == ("ideal", "imp", "pn", "ce", "rfo")

    spec = spec_from_args(["dprc-sweep"])
    assert spec.k_values == (2, 6, 10)
    assert spec.n_rx_values == (4,)

    spec = spec_from_args(["sinr-map"])
    assert spec.k_values == () and spec.n_rx_values == ()


def test_spec_overrides():
    spec = spec_from_args(
        ["mst-sweep", "--k", "3", "4", "--nrx", "2", "--trials", "7",
         "--seed", "9", "--out", "elsewhere"]
    )
    assert spec.k_values == (3, 4)
    assert spec.n_rx_values == (2,)
    assert spec.n_trials == 7 and spec.seed == 9
    assert spec.out_dir == Path("elsewhere")


def test_paper_flag_sets_full_trial_count():
    assert spec_from_args(["mst-sweep", "--paper"]).n_trials == 1000
    # an explicit trial count loses to --paper
    assert spec_from_args(["mst-sweep", "--paper", "--trials", "3"]).n_trials == 1000


def test_spec_validation():
    with pytest.raises(UsageError):
        spec_from_args(["mst-sweep", "--trials", "0"])
    with pytest.raises(UsageError):
        spec_from_args(["mst-sweep", "--jobs", "0"])


def test_main_exit_codes_for_usage_errors(tmp_path, capsys):
    assert main(["no-such-scenario"]) == 1
    assert main(["sinr-map", "--config", str(tmp_path / "nope.cfg")]) == 1
    err = capsys.readouterr().err
    assert "simcli:" in err


# ---------------------------------------------------------------------------
# table cache discipline


def test_missing_table_cache_is_a_runtime_failure(tmp_path, capsys):
    code = main(
        ["mst-sweep", "--k", "2", "--nrx", "1", "--trials", "1",
         "--out", str(tmp_path / "out")]
    )
    assert code == 2
    assert "missing rate table cache" in capsys.readouterr().err


def test_stale_table_cache_is_reported(tmp_path, capsys):
    out = tmp_path / "out"
    seed_tables(out)
    doc = json.loads((out / "tables" / table_filename(1, "ideal")).read_text())
    doc["build"]["n_draws"] = 999
    (out / "tables" / table_filename(1, "ideal")).write_text(json.dumps(doc))
    code = main(
        ["mst-sweep", "--k", "2", "--nrx", "1", "--trials", "1",
         "--out", str(out)]
    )
    assert code == 2
    assert "built with different settings" in capsys.readouterr().err


def test_rate_table_scenario_is_idempotent(tmp_path):
    out = tmp_path / "out"
    argv = ["rate-table", "--nrx", "1", "--table-draws", "60",
            "--out", str(out)]
    assert main(argv) == 0
    path = out / "tables" / table_filename(1, "ideal")
    first = path.read_bytes()
    doc = json.loads(first)
    assert doc["build"]["n_draws"] == 60
    assert all(e["m"] == 1 for e in doc["entries"])
    assert len(doc["entries"]) <= 4
    # rerun leaves fresh caches untouched
    assert main(argv) == 0
    assert path.read_bytes() == first


# ---------------------------------------------------------------------------
# scenario outputs


def test_sinr_map_outputs_and_reproducibility(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["sinr-map", "--out", str(out)]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert str(out / "manifest.json") in printed
    assert str(out / "sinr_map.csv") in printed

    header, rows = read_csv(out / "sinr_map.csv")
    assert header == ["sinr_in_db", "sinr_b_db"]
    s_in = np.array([float(r[0]) for r in rows])
    s_b = np.array([float(r[1]) for r in rows])
    assert s_in[0] == -10.0 and s_in[-1] == 60.0
    assert np.all(np.diff(s_b) > 0.0)
    assert s_b[-1] == pytest.approx(28.886, abs=0.01)

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["scenario"] == "sinr-map"
    assert manifest["outputs"] == ["sinr_map.csv"]

    # the scenario has no timing column, so a rerun is byte-identical
    before = {p.name: p.read_bytes() for p in out.iterdir() if p.is_file()}
    assert main(["sinr-map", "--out", str(out)]) == 0
    after = {p.name: p.read_bytes() for p in out.iterdir() if p.is_file()}
    assert before == after


def drop_column(rows: list[list[str]], idx: int) -> list[list[str]]:
    return [r[:idx] + r[idx + 1:] for r in rows]


def test_mst_sweep_outputs_and_jobs_equivalence(tmp_path):
    outs = []
    for jobs in ("1", "2"):
        out = tmp_path / f"out{jobs}"
        seed_tables(out)
        assert main(
            ["mst-sweep", "--k", "2", "--nrx", "1", "--trials", "2",
             "--jobs", jobs, "--out", str(out)]
        ) == 0
        outs.append(out)

    header, rows = read_csv(outs[0] / "mst_trials.csv")
    assert header == ["trial_id", "K", "n_rx", "impaired", "mst_bps",
                      "runtime_ms"]
    assert len(rows) == 2 * 2            # trials x flag sets
    assert {r[3] for r in rows} == {"true", "false"}
    assert all(float(r[4]) >= 0.0 for r in rows)

    # worker fan-out changes only the timing column
    _, rows2 = read_csv(outs[1] / "mst_trials.csv")
    t_idx = header.index("runtime_ms")
    assert drop_column(rows, t_idx) == drop_column(rows2, t_idx)
    agg1 = json.loads((outs[0] / "mst_aggregate.json").read_text())
    agg2 = json.loads((outs[1] / "mst_aggregate.json").read_text())
    assert agg1 == agg2
    assert {e["flags"] for e in agg1["mean_mst"]} == {"ideal", "imp"}


def test_loss_ratio_outputs(tmp_path):
    out = tmp_path / "out"
    seed_tables(out)
    assert main(
        ["loss-ratio", "--k", "2", "--trials", "1", "--out", str(out)]
    ) == 0
    agg = json.loads((out / "loss_aggregate.json").read_text())
    assert {e["flags"] for e in agg["mean_mst"]} == {
        "ideal", "imp", "pn", "ce", "rfo"
    }
    ratios = {e["flags"]: e["loss_ratio"] for e in agg["loss_ratios"]}
    assert set(ratios) == {"imp", "pn", "ce", "rfo"}
    means = {e["flags"]: e["mean_bps"] for e in agg["mean_mst"]}
    for name, ratio in ratios.items():
        assert ratio == pytest.approx(
            (means["ideal"] - means[name]) / means["ideal"], rel=1e-12
        )


def test_dprc_sweep_outputs_and_traces(tmp_path):
    out = tmp_path / "out"
    seed_tables(out)
    assert main(
        ["dprc-sweep", "--k", "2", "--trials", "1", "--out", str(out)]
    ) == 0
    header, rows = read_csv(out / "dprc_trials.csv")
    assert header == ["trial_id", "K", "n_rx", "impaired", "dprc_bps",
                      "mst_bps", "runtime_ms"]
    for r in rows:
        assert float(r[4]) <= float(r[5])    # distributed never beats central
    for name in ("ideal", "imp"):
        trace = out / f"dprc_trace_k2_n4_{name}_t0.csv"
        t_header, t_rows = read_csv(trace)
        assert t_header == ["iteration", "pair", "power_dbm", "sinr_db",
                            "rate_bps"]
        assert t_rows
    manifest = json.loads((out / "manifest.json").read_text())
    assert "dprc_trials.csv" in manifest["outputs"]
    assert manifest["outputs"] == sorted(manifest["outputs"])


def test_run_experiment_returns_written_paths(tmp_path):
    spec = ExperimentSpec(
        scenario="sinr-map",
        params=spec_from_args(["sinr-map"]).params,
        k_values=(),
        n_rx_values=(),
        flag_names=(),
        n_trials=1,
        seed=0,
        out_dir=tmp_path / "out",
    )
    paths = run_experiment(spec)
    assert paths[0].name == "manifest.json"
    assert all(p.exists() for p in paths)
