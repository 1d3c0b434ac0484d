"""Experiment harness tests: scripted corridor run, batch plumbing,
aggregation, and the landmark/map regression."""

import numpy as np
import pytest

from uncmap import (
    FrontierParams,
    MalformedFile,
    RegressionFit,
    ScenarioConfig,
    aggregate_boxplots,
    extract_frontiers,
    fit_landmark_um,
    fit_line,
    fixture_world,
    group_records,
    landmark_um_pairs,
    load_fixture,
    read_summary,
    run_corridor_script,
    run_scenario,
    run_single,
    save_record,
    write_boxplots_csv,
    write_summary,
)
from uncmap.experiment import run_name


@pytest.fixture(scope="module")
def corridor():
    return run_corridor_script(t_h=0.3, seed=0)


@pytest.fixture(scope="module")
def corridor_runs():
    config = ScenarioConfig(fixture="corridor", layout="L3", pps=1,
                            repeats=2, max_steps=1200)
    return config, run_scenario(config)


class TestFixtures:
    def test_known_fixtures_load(self):
        for name in ("corridor", "warehouse"):
            data = load_fixture(name)
            assert {"walls", "landmarks", "extent"} <= set(data)
            world = fixture_world(name)
            assert world.walls.shape[1] == 4

    def test_unknown_fixture(self):
        with pytest.raises(MalformedFile):
            load_fixture("atlantis")


class TestScenarioConfig:
    def test_defaults_resolve_sigma_max(self):
        assert ScenarioConfig(pps=1).sigma_max == 1.0
        assert ScenarioConfig(pps=3).sigma_max == 0.6

    def test_sigma_override_guard(self):
        with pytest.raises(ValueError):
            ScenarioConfig(pps=4, sigma_max=0.5)
        cfg = ScenarioConfig(pps=4, sigma_max=0.5, sigma_override=True)
        assert cfg.sigma_max == 0.5
        # Classical-frontier systems take any sigma_max freely.
        assert ScenarioConfig(pps=1, sigma_max=0.7).sigma_max == 0.7

    def test_invalid_cells_rejected(self):
        with pytest.raises(ValueError):
            ScenarioConfig(layout="L9")
        with pytest.raises(ValueError):
            ScenarioConfig(pps=7)
        with pytest.raises(ValueError):
            ScenarioConfig(repeats=0)

    def test_explicit_seeds_win(self):
        cfg = ScenarioConfig(seeds=(3, 5), repeats=4)
        assert cfg.run_seeds == (3, 5)
        assert ScenarioConfig(repeats=3).run_seeds == (0, 1, 2)


class TestCorridorScript:
    def test_produces_uncertainty_structure(self, corridor):
        fs = corridor["frontiers"]
        assert len(fs.uf_clusters) >= 3
        # The interior seam is surrounded by explored cells; the coverage
        # boundaries at the open ends are not.
        explored = corridor["explored"]
        h, w = explored.shape

        def unexplored_neighbors(cluster):
            n = 0
            for cell in cluster.cells:
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        r, c = cell.row + dr, cell.col + dc
                        if 0 <= r < h and 0 <= c < w and not explored[r, c]:
                            n += 1
            return n

        counts = [unexplored_neighbors(cl) for cl in fs.uf_clusters]
        assert any(n == 0 for n in counts)
        assert any(n > 0 for n in counts)

    def test_classical_frontiers_only_at_open_ends(self, corridor):
        fs = corridor["frontiers"]
        assert len(fs.cf_clusters) >= 1
        fixture = load_fixture("corridor")
        xs = [p[0] for leg in fixture["script"]["scan_legs"]
              for p in (leg["from"], leg["to"])]
        # Coverage boundaries lie beyond the traveled interval, never at
        # the interior uncertainty seam.
        for cl in fs.cf_clusters:
            assert cl.centroid[0] < min(xs) or cl.centroid[0] > max(xs)

    def test_raising_threshold_removes_weakest(self, corridor):
        fs = corridor["frontiers"]
        jumps = sorted(cl.mean_jump for cl in fs.uf_clusters)
        t_mid = 0.5 * (jumps[0] + jumps[1])
        params = FrontierParams(t_h=t_mid, u_beta=corridor["params"].u_beta,
                                obstacle_clearance=0.5, raw_gradient=True)
        higher = extract_frontiers(corridor["um"], corridor["occupancy"],
                                   corridor["explored"], params)
        assert len(higher.uf_clusters) < len(fs.uf_clusters)
        assert min(cl.mean_jump for cl in higher.uf_clusters) > jumps[0]

    def test_siren_trace_monotone_start(self, corridor):
        trace = corridor["siren_trace"]
        assert len(trace) >= 3
        assert trace[-1] > trace[0]

    def test_deterministic(self, corridor):
        again = run_corridor_script(t_h=0.3, seed=0)
        assert np.array_equal(again["dp"].values, corridor["dp"].values)
        assert np.array_equal(again["explored"], corridor["explored"])


class TestRunSingle:
    def test_corridor_smoke(self, corridor_runs):
        _, records = corridor_runs
        rec = records[0]
        assert rec.stopping_reason in ("no_objectives", "iteration_cap")
        assert rec.error == ""
        assert rec.coverage > 0.1
        assert rec.trajectory.shape[1] == 4
        assert len(rec.siren_trace) > 0
        assert np.isfinite(rec.final_siren)
        assert rec.landmark_sigmas  # corridor has landmarks

    def test_bit_identical_determinism(self, corridor_runs):
        config, records = corridor_runs
        again = run_single(config, seed=records[0].seed)
        assert np.array_equal(again.trajectory, records[0].trajectory)
        assert np.array_equal(again.dp.values, records[0].dp.values)
        assert np.array_equal(again.siren_trace, records[0].siren_trace)
        assert again.landmark_sigmas == records[0].landmark_sigmas
        assert again.stopping_reason == records[0].stopping_reason

    def test_save_and_summary_round_trip(self, corridor_runs, tmp_path):
        config, records = corridor_runs
        for rec in records:
            save_record(rec, tmp_path / run_name(rec))
        write_summary(records, tmp_path / "summary.csv")
        rows = read_summary(tmp_path / "summary.csv")
        assert len(rows) == len(records)
        by_seed = {int(r["seed"]): r for r in rows}
        for rec in records:
            row = by_seed[rec.seed]
            assert float(row["final_siren"]) == pytest.approx(
                rec.final_siren, rel=1e-8)
            assert row["stopping_reason"] == rec.stopping_reason
        run_dir = tmp_path / run_name(records[0])
        for stem in ("dp", "um", "occupancy", "explored"):
            assert (run_dir / f"{stem}.f64").exists()
            assert (run_dir / f"{stem}.json").exists()
        assert (run_dir / "trajectory.csv").exists()
        assert (run_dir / "record.json").exists()


class TestAggregation:
    def test_five_number_summary(self):
        rows = aggregate_boxplots({("L1", 1): [1.0, 2.0, 3.0, 4.0, 5.0]})
        row = rows[0]
        assert row["q1"] == 2.0 and row["median"] == 3.0 \
            and row["q3"] == 4.0
        assert row["min"] == 1.0 and row["max"] == 5.0
        assert row["iqr"] == 2.0 and row["n"] == 5

    def test_degenerate_group(self):
        row = aggregate_boxplots({("L1", 1): [0.7, 0.7, 0.7]})[0]
        assert row["iqr"] == 0.0 and row["median"] == 0.7

    def test_empty_group_rejected(self):
        with pytest.raises(ValueError):
            aggregate_boxplots({("L1", 1): []})

    def test_group_records_and_csv(self, corridor_runs, tmp_path):
        _, records = corridor_runs
        groups = group_records(records)
        assert set(groups) == {("L3", 1)}
        assert len(groups[("L3", 1)]) == len(records)
        rows = aggregate_boxplots(groups)
        write_boxplots_csv(rows, tmp_path / "box.csv")
        text = (tmp_path / "box.csv").read_text()
        assert "layout,pps,n,min,q1,median,q3,max,iqr" in text
        assert "L3,1," in text


class TestRegression:
    def test_collinear_points_exact(self):
        x = np.array([0.0, 1.0, 2.0, 3.0])
        fit = fit_line(x, 2.0 * x + 1.0)
        assert fit.slope == pytest.approx(2.0, abs=1e-12)
        assert fit.intercept == pytest.approx(1.0, abs=1e-12)
        assert fit.pearson_r == pytest.approx(1.0, abs=1e-12)

    def test_noisy_unit_slope(self, rng):
        x = rng.uniform(0.0, 1.0, 400)
        y = x + rng.normal(0.0, 0.01, 400)
        fit = fit_line(x, y)
        assert fit.slope == pytest.approx(1.0, abs=0.02)
        assert fit.pearson_r > 0.99

    def test_guards(self):
        with pytest.raises(ValueError):
            fit_line([1.0], [2.0])
        with pytest.raises(ValueError):
            RegressionFit(slope=1.0, intercept=0.0, pearson_r=1.5, n=3)

    def test_landmark_pairs_from_runs(self, corridor_runs):
        _, records = corridor_runs
        x, y = landmark_um_pairs(records)
        assert x.size == y.size > 0
        assert np.all(x > 0.0) and np.all(y > 0.0)
        if x.size >= 3:
            fit = fit_landmark_um(records)
            assert fit.n == x.size
