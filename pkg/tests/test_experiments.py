import math
from pathlib import Path

import numpy as np
import pytest
import yaml

import softprice.equilibrium
from softprice.cli import main
from softprice.experiments import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_config,
    run_base_case,
    run_sweep,
    run_verify,
    rows_to_csv,
    write_csv,
)
from softprice.model import UserType

FAST_RUN = {
    "product": {"n_max": 3, "m": 2},
    "integration": {"v_nodes": 201},
    "de": {"population_size": 12, "generations": 20, "restarts": 2,
           "stall_generations": 15, "search_v_nodes": 101},
}


def test_defaults_match_standard_values():
    config = parse_config({})
    assert config.population.x_a == 5.0
    assert config.population.x_gamma == 0.8
    assert config.population.x_delta == 0.5
    assert config.population.sigma == 10.0
    assert config.product.q1 == 1.0 and config.product.q2 == 0.5
    assert config.product.m == 6 and config.product.n_max == 12
    assert config.integration.v_nodes == 2001
    assert config.de.restarts == 15


@pytest.mark.parametrize(
    "data,key",
    [
        ({"population": {"x_delta": 1.5}}, "population"),
        ({"population": {"bogus": 1}}, "population.bogus"),
        ({"typo_section": {}}, "typo_section"),
        ({"sweep": {"param": "nope"}}, "sweep.param"),
        ({"run": {"regimes": ["NotARegime"]}}, "run.regimes"),
        ({"run": {"seed": -1}}, "run.seed"),
        ({"prices": {"p2": "soon"}}, "prices.p2"),
    ],
)
def test_config_errors_name_offending_key(data, key):
    with pytest.raises(ConfigError) as err:
        parse_config(data)
    assert key in str(err.value)


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump({"population": {"x_a": 2.5}, "run": {"seed": 7}}))
    config = load_config(path)
    assert config.population.x_a == 2.5 and config.seed == 7
    assert load_config(None) == parse_config({})


def test_prices_accept_na_token():
    config = parse_config({"prices": {"p1_pre": "NA", "p_s": 12.5}})
    assert config.prices.p1_pre is None and config.prices.p_s == 12.5


def test_base_case_rows_and_relative_revenue():
    config = parse_config(FAST_RUN)
    rows = run_base_case(config)
    assert [r.regime.value for r in rows] == ["BuyOnly", "SubOnly", "Both", "BothGivenBuy"]
    buy = rows[0]
    assert buy.relative_revenue == 1.0
    for row in rows:
        assert row.overall_welfare == pytest.approx(row.revenue + row.user_welfare, abs=1e-12)
    both = rows[2]
    assert both.revenue >= buy.revenue - 5e-3


def test_single_regime_run():
    config = parse_config({**FAST_RUN, "run": {"regimes": ["SubOnly"]}})
    rows = run_base_case(config)
    assert len(rows) == 1
    assert rows[0].regime.value == "SubOnly"
    assert rows[0].relative_revenue is None
    assert rows[0].menu.p1_pre is None and rows[0].menu.p_s is not None


def test_sweep_rows_cover_values_and_regimes():
    config = parse_config({**FAST_RUN,
                           "run": {"regimes": ["BuyOnly", "Both"]},
                           "sweep": {"param": "x_delta", "values": [0.4, 0.6]}})
    rows = run_sweep(config)
    assert len(rows) == 4
    assert sorted({r.sweep_value for r in rows}) == [0.4, 0.6]
    for row in rows:
        if row.regime.value == "BuyOnly":
            assert row.relative_revenue == 1.0


def test_sweep_single_value():
    config = parse_config({**FAST_RUN, "run": {"regimes": ["SubOnly", "BuyOnly"]},
                           "sweep": {"param": "sigma", "values": [8.0]}})
    rows = run_sweep(config)
    assert len(rows) == 2 and rows[0].sweep_value == 8.0


def test_csv_schema_and_na_tokens(tmp_path):
    config = parse_config({**FAST_RUN, "run": {"regimes": ["SubOnly"]}})
    rows = run_base_case(config)
    text = rows_to_csv(rows, config)
    lines = text.strip().split("\n")
    assert lines[0].startswith("# softprice=")
    assert "config_sha256=" in lines[0] and "seed=0" in lines[0]
    assert lines[1] == ("sweep_param,sweep_value,regime,revenue,user_welfare,overall_welfare,"
                        "p1_pre,p1_post,p2,p_s,relative_revenue")
    fields = lines[2].split(",")
    assert fields[0] == "base_case" and fields[1] == "NA"
    assert fields[6] == fields[7] == fields[8] == "NA"  # buy prices not offered
    assert fields[10] == "NA"  # no BuyOnly baseline requested
    float(fields[9])  # subscription price is numeric


def test_csv_deterministic_across_runs_and_workers(tmp_path):
    base = {**FAST_RUN, "run": {"regimes": ["BuyOnly", "SubOnly"], "seed": 3}}
    config1 = parse_config(base)
    config2 = parse_config({**base, "run": {**base["run"], "workers": 2}})
    csv1 = rows_to_csv(run_base_case(config1), config1)
    csv2 = rows_to_csv(run_base_case(config1), config1)
    csv3 = rows_to_csv(run_base_case(config2), config2)
    assert csv1 == csv2
    assert csv1 == csv3  # worker count changes neither numbers nor provenance


def test_run_verify_tiny_grid_passes_quickly():
    config = parse_config({"verify": {"instances": 10, "mc_pairs": 1, "mc_samples": 2000}})
    report = run_verify(config)
    assert report.passed
    assert report.oracle_max_rel_err < 1e-6
    assert report.elapsed < 5.0


def test_run_verify_detects_corrupted_closed_form(monkeypatch):
    true_w_post = softprice.equilibrium.w_post

    def corrupted(n_from, n_to, o, user, cfg):
        val = true_w_post(n_from, n_to, o, user, cfg)
        return val * 1.02 + 0.01  # deliberately wrong

    monkeypatch.setattr(softprice.equilibrium, "w_post", corrupted)
    config = parse_config({"verify": {"instances": 40, "mc_pairs": 0, "mc_samples": 100}})
    report = run_verify(config)
    assert not report.passed
    assert report.oracle_failures > 0


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _write_cfg(tmp_path: Path, extra: dict) -> Path:
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(extra))
    return path


def test_cli_base_case_writes_csv(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, {**FAST_RUN, "run": {"regimes": ["SubOnly"]}})
    code = main(["base-case", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "SubOnly" in out
    assert (tmp_path / "base_case.csv").exists()


def test_cli_bad_config_exits_2(tmp_path):
    cfg = _write_cfg(tmp_path, {"population": {"x_delta": 2.0}})
    assert main(["base-case", "--config", str(cfg)]) == 2
    assert main(["base-case", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["sweep", "--values", "not,a,number"]) == 2


def test_cli_evaluate_prints_report(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, {"prices": {"p1_pre": 45.82, "p1_post": 21.8, "p2": 18.06, "p_s": "NA"},
                                "integration": {"v_nodes": 401}})
    assert main(["evaluate", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "revenue" in out and "class shares" in out


def test_cli_evaluate_quadrature_failure_exits_4(tmp_path):
    cfg = _write_cfg(tmp_path, {"prices": {"p1_pre": 45.82, "p1_post": 21.8, "p2": 18.06, "p_s": 14.66},
                                "integration": {"v_nodes": 101, "refinement": 1.0e-16}})
    assert main(["evaluate", "--config", str(cfg), "--check-quadrature"]) == 4


def test_cli_verify_exit_codes(tmp_path, monkeypatch):
    cfg = _write_cfg(tmp_path, {"verify": {"instances": 8, "mc_pairs": 0, "mc_samples": 100}})
    assert main(["verify", "--config", str(cfg)]) == 0

    true_w_post = softprice.equilibrium.w_post
    monkeypatch.setattr(softprice.equilibrium, "w_post",
                        lambda *a, **k: true_w_post(*a, **k) * 1.05 + 0.1)
    assert main(["verify", "--config", str(cfg)]) == 3


def test_cli_sweep_writes_named_csv(tmp_path):
    cfg = _write_cfg(tmp_path, {**FAST_RUN,
                                "run": {"regimes": ["BuyOnly"]},
                                "sweep": {"param": "x_a", "values": [2.0, 5.0]}})
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "sweep_x_a.csv").exists()
