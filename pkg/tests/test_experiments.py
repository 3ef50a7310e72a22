"""Tests for experiment configs, criteria evaluation, CSV IO, and suites."""

import json

import numpy as np
import pytest

from robust_submod import (ConfigError, ContractError, DomainError, FormatError,
                           ExperimentRecord, config_from_dict,
                           default_config, evaluate_criteria, kl_divergence,
                           load_config, local_worst_case, make_distribution,
                           read_csv, robust_value, run_suite, write_csv)
from robust_submod.experiments import ConstellationSettings
from robust_submod.objective import TaskFamily
from robust_submod.verification import lattice_inner_minimum


def coverage_family(n_ground=8, n_tasks=3, seed=0, cells=10):
    rng = np.random.default_rng(seed)
    covers = rng.integers(0, 2, (n_tasks, n_ground, cells)).astype(bool)

    def values_fn(mask):
        out = np.zeros(n_tasks)
        idx = [e for e in range(n_ground) if mask >> e & 1]
        for i in range(n_tasks):
            full = covers[i].any(axis=0).sum()
            if full:
                out[i] = covers[i][idx].any(axis=0).sum() / full if idx else 0.0
        return out

    return TaskFamily(n_ground, n_tasks, values_fn)


def tiny_config(suite="satsel", runs=2, seed=0, **scenario_over):
    config = default_config(suite)
    config.runs = runs
    config.seed = seed
    config.solver.k = 2
    config.solver.sample_size = 4
    config.solver.t_w = 2
    config.solver.gamma = 0.5
    config.scenario.constellation = ConstellationSettings(
        total_sats=12, planes=3, phasing=1, fov_half_angle_deg=45.0)
    config.scenario.steps = 2 if suite != "online" else 5
    config.scenario.n_reading_tasks = 2
    config.scenario.points_per_task = 2
    config.scenario.image_count = 25
    config.scenario.image_dim = 5
    config.scenario.k_values = [2, 3]
    if suite == "imgsum":
        config.solver.sample_size = None
    for key, value in scenario_over.items():
        setattr(config.scenario, key, value)
    return config


class TestConfigLoading:
    def test_load_round_trip(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({
            "suite": "swp",
            "runs": 3,
            "seed": 11,
            "solver": {"k": 4, "lam": 0.2},
            "scenario": {"steps": 6, "constellation": {"total_sats": 12, "planes": 3}},
        }))
        config = load_config(path)
        assert config.suite == "swp" and config.runs == 3 and config.seed == 11
        assert config.solver.k == 4 and config.solver.lam == 0.2
        assert config.solver.epsilon == 0.1  # defaults preserved
        assert config.scenario.steps == 6
        assert config.scenario.constellation.total_sats == 12

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match=r"unknown key\(s\) \['budget'\]"):
            config_from_dict({"suite": "satsel", "budget": 5})

    def test_unknown_nested_key_is_located(self):
        data = {"suite": "satsel",
                "scenario": {"constellation": {"n_planes": 3}}}
        with pytest.raises(ConfigError, match=r"config\.scenario\.constellation.*n_planes"):
            config_from_dict(data)

    def test_missing_suite(self):
        with pytest.raises(ConfigError):
            config_from_dict({"runs": 2})

    def test_verify_is_not_an_experiment_suite(self):
        with pytest.raises(ConfigError, match="robust-submod verify"):
            config_from_dict({"suite": "verify"})

    def test_unknown_suite(self):
        with pytest.raises(ConfigError, match="unknown suite"):
            config_from_dict({"suite": "satself"})

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            load_config(tmp_path / "absent.json")

    def test_validation_ranges(self):
        with pytest.raises(ConfigError, match="solver.k"):
            config_from_dict({"suite": "satsel", "solver": {"k": 0}})
        with pytest.raises(ConfigError, match="epsilon"):
            config_from_dict({"suite": "satsel", "solver": {"epsilon": 1.0}})
        with pytest.raises(ConfigError, match="gamma"):
            config_from_dict({"suite": "online", "solver": {"gamma": 1.5}})
        with pytest.raises(ConfigError, match="k_values"):
            config_from_dict({"suite": "imgsum", "scenario": {"k_values": []}})
        with pytest.raises(ConfigError, match="runs"):
            config_from_dict({"suite": "swp", "runs": 0})

    def test_defaults(self):
        satsel = default_config("satsel")
        assert satsel.solver.sample_size == 24
        assert satsel.scenario.constellation.total_sats == 240
        assert default_config("imgsum").solver.sample_size is None


class TestEvaluateCriteria:
    def test_equal_spectrum_collapses(self):
        fam = TaskFamily(4, 3, lambda mask: np.full(3, 0.25 * bin(mask).count("1")))
        q = make_distribution([0.2, 0.3, 0.5])
        f1, f2, f3, elapsed = evaluate_criteria(fam, q, 0.1, 0b0110, elapsed=1.5)
        assert f1 == f2 == f3 == pytest.approx(0.5, abs=1e-15)
        assert elapsed == 1.5

    def test_large_lambda_matches_average(self):
        fam = coverage_family(seed=1)
        q = make_distribution([0.5, 0.25, 0.25])
        f1, _, f3, _ = evaluate_criteria(fam, q, 1e6, 0b1011)
        assert abs(f3 - f1) <= 1e-6

    def test_zero_lambda_matches_min(self):
        fam = coverage_family(seed=2)
        q = make_distribution([0.5, 0.25, 0.25])
        _, f2, f3, _ = evaluate_criteria(fam, q, 0.0, 0b0111)
        assert f3 == pytest.approx(f2, abs=1e-9)

    def test_ordering_always_holds(self):
        rng = np.random.default_rng(3)
        fam = coverage_family(seed=3, n_tasks=4)
        for _ in range(40):
            q = make_distribution(rng.dirichlet(np.ones(4)))
            lam = float(rng.uniform(0.01, 2.0))
            mask = int(rng.integers(1, 1 << 8))
            f1, f2, f3, _ = evaluate_criteria(fam, q, lam, mask)
            assert f2 <= f3 + 1e-12 <= f1 + 2e-12

    def test_worst_case_weighting_solves_the_dual(self):
        # F3 plus the KL penalty of the worst-case weights reproduces the
        # robust objective, and both match an exhaustive lattice search
        fam = coverage_family(seed=4, n_tasks=4)
        q = make_distribution([0.4, 0.3, 0.2, 0.1])
        lam = 0.15
        mask = 0b10110
        vals = fam.values(mask)
        f1, f2, f3, _ = evaluate_criteria(fam, q, lam, mask)
        p_star = local_worst_case(vals, q, lam)
        g = robust_value(vals, q, lam)
        assert f3 + lam * kl_divergence(p_star, q) == pytest.approx(g, abs=1e-10)
        lattice_val, lattice_p = lattice_inner_minimum(vals, q, lam, base_step=1e-2,
                                                       return_point=True)
        assert lattice_val == pytest.approx(g, abs=1e-5)
        assert float(lattice_p @ vals) == pytest.approx(f3, abs=5e-4)


class TestRecordCsv:
    def test_round_trip_exact(self, tmp_path):
        records = [
            ExperimentRecord(0, 0, "Local", 1, 1.0 / 3.0),
            ExperimentRecord(0, 0, "Local", 2, 1e-17),
            ExperimentRecord(1, 3, "Saturate", 3, 0.1 + 0.2),
        ]
        path = tmp_path / "r.csv"
        write_csv(records, path)
        assert read_csv(path) == records

    def test_rows_sorted_on_write(self, tmp_path):
        records = [
            ExperimentRecord(1, 0, "B", 2, 0.5),
            ExperimentRecord(0, 1, "A", 1, 0.25),
            ExperimentRecord(0, 0, "B", 1, 0.125),
            ExperimentRecord(0, 0, "A", 3, 0.75),
        ]
        path = tmp_path / "r.csv"
        write_csv(records, path)
        back = read_csv(path)
        assert back == sorted(back, key=lambda r: (r.run, r.step, r.algorithm, r.criterion))
        assert back[0] == ExperimentRecord(0, 0, "A", 3, 0.75)

    def test_file_shape(self, tmp_path):
        path = tmp_path / "one.csv"
        write_csv([ExperimentRecord(0, 0, "X", 1, 0.5)], path)
        text = path.read_bytes().decode()
        assert text == "run,step,algorithm,criterion,value\n0,0,X,1,0.5\n"

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(DomainError):
            write_csv([], tmp_path / "e.csv")

    def test_read_rejects_bad_header(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("run,step,alg,criterion,value\n")
        with pytest.raises(FormatError, match="expected header"):
            read_csv(path)

    def test_read_rejects_short_row(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("run,step,algorithm,criterion,value\n0,0,X,1\n")
        with pytest.raises(FormatError, match="line 2"):
            read_csv(path)

    def test_read_rejects_non_numeric(self, tmp_path):
        path = tmp_path / "n.csv"
        path.write_text("run,step,algorithm,criterion,value\n0,0,X,1,abc\n")
        with pytest.raises(FormatError, match="line 2"):
            read_csv(path)


class TestSuiteRuns:
    def test_satsel_rows_and_files(self, tmp_path):
        config = tiny_config("satsel")
        result = run_suite(config, output_dir=tmp_path)
        labels = sorted({r.algorithm for r in result.records})
        assert labels == ["Local", "Reference", "Saturate"]
        # per (run, step, algorithm): criteria 1-3 in the main file and the
        # wall time in the timing file -> algorithms x 4 rows per step
        for label in labels:
            main = read_csv(tmp_path / f"satsel_{label.lower()}.csv")
            timing = read_csv(tmp_path / f"satsel_{label.lower()}_timing.csv")
            assert len(main) == config.runs * config.scenario.steps * 3
            assert len(timing) == config.runs * config.scenario.steps * 1
            assert {r.criterion for r in main} == {1, 2, 3}
            assert all(0.0 <= r.value <= 1.0 for r in main)
            assert {r.criterion for r in timing} == {4}
            assert all(r.value >= 0.0 for r in timing)
        assert (tmp_path / "satsel_selections.csv").exists()
        assert (tmp_path / "satsel_runs.csv").exists()
        assert sorted(result.paths) == sorted(
            str(tmp_path / name) for name in (
                "satsel_local.csv", "satsel_local_timing.csv",
                "satsel_reference.csv", "satsel_reference_timing.csv",
                "satsel_saturate.csv", "satsel_saturate_timing.csv",
                "satsel_selections.csv", "satsel_runs.csv"))

    def test_selection_sizes_respect_budget(self, tmp_path):
        config = tiny_config("satsel", runs=1)
        result = run_suite(config, write=False)
        for sel in result.selections:
            assert len(sel.indices) <= config.solver.k
            assert list(sel.indices) == sorted(sel.indices)

    def test_run_seeds_follow_ladder(self):
        config = tiny_config("swp", runs=3, seed=40)
        result = run_suite(config, write=False)
        assert [(run, seed) for run, seed, _ in result.run_seeds] == [
            (0, 40), (1, 41), (2, 42)]

    def test_seed_ladder_reproduces_single_runs(self):
        full = run_suite(tiny_config("swp", runs=2, seed=7), write=False)
        single = run_suite(tiny_config("swp", runs=1, seed=8), write=False)
        wanted = sorted((r.step, r.algorithm, r.criterion, r.value)
                        for r in full.records if r.run == 1)
        got = sorted((r.step, r.algorithm, r.criterion, r.value)
                     for r in single.records)
        assert wanted == got

    def test_rerun_byte_identical_excluding_timing(self, tmp_path):
        config = tiny_config("satsel", runs=1)
        a, b = tmp_path / "a", tmp_path / "b"
        run_suite(config, output_dir=a)
        run_suite(config, output_dir=b)
        names = sorted(p.name for p in a.iterdir())
        assert names == sorted(p.name for p in b.iterdir())
        for name in names:
            if name.endswith("_timing.csv"):
                continue
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_swp_records_top2_criterion(self):
        result = run_suite(tiny_config("swp", runs=1), write=False)
        by_alg = {r.algorithm for r in result.records if r.criterion == 5}
        assert by_alg == {"SSA", "SwP"}

    def test_online_distinct_counts_monotone(self):
        result = run_suite(tiny_config("online", runs=1), write=False)
        for alg in ("TR", "Regular"):
            counts = [r.value for r in sorted(result.records,
                                              key=lambda r: r.step)
                      if r.algorithm == alg and r.criterion == 6]
            assert len(counts) == 5
            assert all(x <= y for x, y in zip(counts, counts[1:]))

    def test_imgsum_step_column_is_k(self):
        result = run_suite(tiny_config("imgsum", runs=1), write=False)
        assert sorted({r.step for r in result.records}) == [2, 3]

    def test_imgsum_budget_exceeding_ground_set(self):
        config = tiny_config("imgsum", runs=1, image_count=10, k_values=[11])
        with pytest.raises(ConfigError):
            run_suite(config, write=False)

    def test_write_false_writes_nothing(self, tmp_path):
        result = run_suite(tiny_config("swp", runs=1), write=False)
        assert result.paths == []
        assert list(tmp_path.iterdir()) == []

    def test_ordering_contract_enforced(self):
        from robust_submod.experiments import _check_criteria_ordering
        bad = [ExperimentRecord(0, 0, "X", 1, 0.2),
               ExperimentRecord(0, 0, "X", 2, 0.9),
               ExperimentRecord(0, 0, "X", 3, 0.5)]
        with pytest.raises(ContractError, match="ordering"):
            _check_criteria_ordering(bad)
