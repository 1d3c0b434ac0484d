"""End-to-end acceptance gate.

Each test evaluates one numbered criterion, stores a PASS/FAIL line in
RESULTS (printed in the terminal summary by conftest), then asserts.
The warehouse battery behind criteria 7 and 8 runs once per session and
dominates the suite's wall clock.
"""

import gc
import math
import time

import numpy as np
import pytest
from scipy import stats

from uncmap import (
    FrontierParams,
    GaussianBelief,
    GridGeometry,
    GridLayer,
    KfState,
    NoiseParams,
    PolarMeasurement,
    PriorSpec,
    RectangleSpec,
    ScenarioConfig,
    Simulator,
    WorldModel,
    bound_constant,
    build_uncertainty_map,
    derive_prior,
    extract_uncertainty_frontiers,
    fit_landmark_um,
    fit_line,
    gauss_bound,
    geometric_mean_sigma,
    propagate_polar,
    rectangle_probability,
    rectangle_probability_with_error,
    run_corridor_script,
    run_scenario,
    siren,
    siren_curve,
)
from uncmap.belief import apply_fov
from uncmap.sim import Scan, pose_belief

RESULTS = {}

GOLDEN_SPEC = PriorSpec(sigma_max_per_axis=np.array([2.0, 2.0, 0.02]),
                        sides=RectangleSpec(np.array([0.1, 0.1, 0.002])))

COMPLETE_LAYOUTS = ("L3", "L4")
INCOMPLETE_LAYOUTS = ("L1", "L2")


def record(num, ok, detail):
    RESULTS[num] = (bool(ok), detail)
    assert ok, f"criterion {num}: {detail}"


def planar_prior():
    return derive_prior(PriorSpec(
        sigma_max_per_axis=np.array([1.0, 1.0]),
        sides=RectangleSpec(np.array([0.1, 0.1]))))


@pytest.fixture(scope="module")
def corridor():
    return run_corridor_script(t_h=0.3, seed=0)


@pytest.fixture(scope="module")
def battery():
    """5 seeds for each cell of {1..4 planning systems} x {L1..L4}."""
    t0 = time.perf_counter()
    records = []
    for layout in ("L1", "L2", "L3", "L4"):
        for pps in (1, 2, 3, 4):
            config = ScenarioConfig(fixture="warehouse", layout=layout,
                                    pps=pps, repeats=5)
            records.extend(run_scenario(config))
    return records, time.perf_counter() - t0


def test_criterion_01_prior_constants():
    t0 = time.perf_counter()
    prior = derive_prior(GOLDEN_SPEC)
    elapsed = time.perf_counter() - t0
    targets = {"beta": 1.5863e-5, "ell_beta": -11.051, "a": 7.8358e-3,
               "u_beta": 0.31186, "sigma_tilde_max": 0.43089}
    errs = {k: abs(getattr(prior, k) - v) / abs(v)
            for k, v in targets.items()}
    worst = max(errs, key=errs.get)
    ok = max(errs.values()) < 5e-4 and elapsed < 1.0
    record(1, ok,
           f"five constants to 4 significant figures (worst {worst} "
           f"rel err {errs[worst]:.1e}), {elapsed * 1e3:.0f} ms")


def test_criterion_02_bound_property_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    n_pairs = 10_000
    violations = 0
    for i in range(n_pairs):
        n = int(rng.integers(1, 5))
        sig = np.exp(rng.uniform(math.log(0.03), math.log(3.0), n))
        sides = rng.uniform(0.05, 1.0, n) * 4.0 * sig / math.sqrt(3.0)
        belief = GaussianBelief(np.zeros(n), np.diag(sig ** 2))
        rect = RectangleSpec(sides)
        if i % 20 == 0:  # exercise the quadrature path and its stderr
            p, err = rectangle_probability_with_error(
                belief, rect, method="qmc", samples=4096, seed=i)
        else:
            p, err = rectangle_probability_with_error(belief, rect)
        if p < gauss_bound(belief, rect) - 3.0 * err - 1e-15:
            violations += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 60.0
    record(2, ok,
           f"{violations} violations over {n_pairs} in-domain pairs, "
           f"{elapsed:.1f} s")


def test_criterion_03_dead_reckoning_bound_trace():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    rect = RectangleSpec([0.1, 0.1])
    a2 = bound_constant(rect)
    sensor = np.diag([0.02 ** 2, math.radians(0.1) ** 2])
    var, q = 0.01, 4e-3
    u_trace, sigma_trace = [], []
    bound_held = True
    for _ in range(150):
        var += q  # dead reckoning only inflates the pose
        pose = GaussianBelief(np.array([0.0, 0.0, 0.3]),
                              np.diag([var, var, 1e-4]))
        meas = PolarMeasurement(1.0 + 0.5 * rng.random(),
                                rng.uniform(-math.pi, math.pi))
        belief = propagate_polar(pose, meas, sensor)
        sigma = geometric_mean_sigma(belief)
        u = a2 / math.sqrt(rectangle_probability(belief, rect))
        if u > sigma + 1e-12:
            bound_held = False
        u_trace.append(u)
        sigma_trace.append(sigma)
    rho = float(stats.spearmanr(u_trace, sigma_trace).statistic)
    elapsed = time.perf_counter() - t0
    ok = bound_held and rho >= 0.95 and elapsed < 30.0
    record(3, ok,
           f"U_k <= sigma~_k at all 150 steps: {bound_held}, "
           f"Spearman {rho:.4f}, {elapsed:.1f} s")


def test_criterion_04_curve_shape():
    t0 = time.perf_counter()
    sigma_max = 1.0
    curve = siren_curve(np.array([sigma_max]), sigma_max=sigma_max)
    zero_ok = curve[0, 1] == pytest.approx(0.0, abs=1e-14)
    sig = np.linspace(0.05, 3.0, 500)
    terms = siren_curve(sig, sigma_max=sigma_max)[:, 1]
    signs_ok = (np.all(terms[sig < sigma_max - 1e-9] > 0.0)
                and np.all(terms[sig > sigma_max + 1e-9] < 0.0))
    deltas = np.arange(0.01, 0.5001, 0.01)
    below = np.abs(siren_curve(sigma_max * (1.0 - deltas),
                               sigma_max=sigma_max)[:, 1])
    above = np.abs(siren_curve(sigma_max * (1.0 + deltas),
                               sigma_max=sigma_max)[:, 1])
    asym_ok = bool(np.all(below > above))
    elapsed = time.perf_counter() - t0
    ok = zero_ok and signs_ok and asym_ok and elapsed < 5.0
    record(4, ok,
           f"zero at sigma_max: {zero_ok}, sign structure: {signs_ok}, "
           f"asymmetry over delta in (0,0.5]: {asym_ok}")


def test_criterion_05_score_structure():
    t0 = time.perf_counter()
    prior = planar_prior()
    # (a) all-unknown map scores exactly zero
    unknown = GridLayer.filled(
        GridGeometry(resolution_c=0.1, origin=(0.0, 0.0),
                     width=24, height=24), prior.ell_beta, "log_odds")
    all_unknown_ok = siren(unknown, prior).total == 0.0

    # (b) padding a map with unknown cells never moves the score
    rng = np.random.default_rng(3)
    n = 30
    p_small = rng.uniform(prior.beta * 1.5, 0.9, (n, n))
    ell_small = np.log(p_small / (1.0 - p_small))
    small = GridLayer(GridGeometry(0.1, (0.0, 0.0), n, n),
                      ell_small, "log_odds")
    padded_vals = np.full((3 * n, 3 * n), prior.ell_beta)
    padded_vals[n:2 * n, n:2 * n] = ell_small
    padded = GridLayer(GridGeometry(0.1, (0.0, 0.0), 3 * n, 3 * n),
                       padded_vals, "log_odds")
    padding_ok = siren(padded, prior).total == siren(small, prior).total

    # (c) halving the resolution of a fixed smooth field moves the
    # score by < 2%
    def field_score(c):
        m = int(round(4.0 / c))
        xs = (np.arange(m) + 0.5) * c
        gx, gy = np.meshgrid(xs, xs)
        p = prior.beta + (0.5 - prior.beta) * (
            0.5 + 0.5 * np.sin(2.0 * np.pi * gx / 4.0)
            * np.sin(2.0 * np.pi * gy / 4.0))
        layer = GridLayer(GridGeometry(c, (0.0, 0.0), m, m),
                          np.log(p / (1.0 - p)), "log_odds")
        return siren(layer, prior).total

    d_coarse = field_score(0.1)
    d_fine = field_score(0.05)
    rel = abs(d_fine - d_coarse) / abs(d_coarse)
    resolution_ok = rel < 0.02
    elapsed = time.perf_counter() - t0
    ok = (all_unknown_ok and padding_ok and resolution_ok
          and elapsed < 30.0)
    record(5, ok,
           f"all-unknown zero: {all_unknown_ok}, unknown padding "
           f"inert: {padding_ok}, halving shift {rel * 100:.3f}% < 2%")


def test_criterion_06_frontier_semantics(corridor):
    fs = corridor["frontiers"]
    explored = corridor["explored"]
    h, w = explored.shape

    def unexplored_neighbors(cluster):
        count = 0
        for cell in cluster.cells:
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    r, c = cell.row + dr, cell.col + dc
                    if 0 <= r < h and 0 <= c < w and not explored[r, c]:
                        count += 1
        return count

    n_uf = len(fs.uf_clusters)
    neighbor_counts = [unexplored_neighbors(cl) for cl in fs.uf_clusters]
    seam_ok = n_uf >= 3 and any(c == 0 for c in neighbor_counts)

    # Coverage frontiers appear only past the traveled interval, never
    # at the interior seam (the seam cluster with zero unexplored
    # neighbors has no coverage cluster nearby).
    seam_x = [cl.centroid[0] for cl, c in zip(fs.uf_clusters,
                                              neighbor_counts) if c == 0]
    cf_ok = len(fs.cf_clusters) >= 1 and all(
        min(abs(cf.centroid[0] - sx) for sx in seam_x) > 1.0
        for cf in fs.cf_clusters)
    open_ended = all(
        any(abs(cf.centroid[0] - uf.centroid[0]) < 0.5
            and unexplored_neighbors(uf) > 0 for uf in fs.uf_clusters)
        for cf in fs.cf_clusters)

    jumps = sorted(cl.mean_jump for cl in fs.uf_clusters)
    ordering_ok = all(b > a for a, b in zip(jumps, jumps[1:]))

    # raising the threshold just above the weakest jump removes exactly
    # that cluster
    t_mid = 0.5 * (jumps[0] + jumps[1])
    params = FrontierParams(t_h=t_mid, u_beta=corridor["params"].u_beta,
                            obstacle_clearance=0.5, raw_gradient=True)
    higher = extract_uncertainty_frontiers(
        corridor["um"], corridor["occupancy"], params)
    survivors = sorted(cl.mean_jump for cl in higher.uf_clusters)
    removal_ok = (len(survivors) == n_uf - 1
                  and min(survivors) > jumps[0])

    ok = seam_ok and cf_ok and open_ended and ordering_ok and removal_ok
    record(6, ok,
           f"{n_uf} discontinuity clusters (one interior seam): "
           f"{seam_ok}, coverage clusters open-ended only: "
           f"{cf_ok and open_ended}, strict jump ordering: {ordering_ok}, "
           f"threshold raise removes weakest: {removal_ok}")


def test_criterion_07_comparative_study(battery):
    records, elapsed = battery
    no_errors = all(r.error == "" for r in records)

    def scores(pps, layouts):
        return [r.final_siren for r in records
                if r.config["pps"] == pps and r.config["layout"] in layouts]

    median4 = float(np.median(scores(4, COMPLETE_LAYOUTS)))
    median1 = float(np.median(scores(1, COMPLETE_LAYOUTS)))
    median_ok = median4 > median1

    def group_iqrs(pps_set):
        iqrs = []
        for layout in ("L1", "L2", "L3", "L4"):
            for pps in pps_set:
                vals = scores(pps, (layout,))
                q1, q3 = np.quantile(vals, [0.25, 0.75])
                iqrs.append(float(q3 - q1))
        return iqrs

    # spread comparison per (layout, system) group: the two planning
    # systems in each family use different map priors, so pooling raw
    # scores across systems would compare scales, not dispersion
    iqr_aware = float(np.mean(group_iqrs((3, 4))))
    iqr_classic = float(np.mean(group_iqrs((1, 2))))
    iqr_ok = iqr_aware < iqr_classic

    incomplete = [r for r in records if r.config["pps"] == 3
                  and r.config["layout"] in INCOMPLETE_LAYOUTS]
    stops_ok = all(r.stopping_reason == "no_objectives"
                   and r.coverage < 1.0 for r in incomplete)
    time_ok = elapsed < 1800.0
    ok = no_errors and median_ok and iqr_ok and stops_ok and time_ok
    record(7, ok,
           f"complete-layout median score {median4:.0f} (system 4) > "
           f"{median1:.0f} (system 1): {median_ok}, "
           f"mean group IQR {iqr_aware:.1f} "
           f"(aware) < {iqr_classic:.1f} (classic): {iqr_ok}, system 3 "
           f"halts with unexplored cells: {stops_ok}, "
           f"batch {elapsed / 60:.1f} min < 30 min")


def test_criterion_08_landmark_map_regression(battery):
    records, _ = battery
    aware = [r for r in records if r.config["pps"] in (3, 4)]
    fit = fit_landmark_um(aware)
    ok = 0.8 <= fit.slope <= 1.2 and fit.pearson_r >= 0.9
    record(8, ok,
           f"slope {fit.slope:.4f} in [0.8, 1.2], Pearson r "
           f"{fit.pearson_r:.4f} >= 0.9, n={fit.n}")


def test_criterion_09_complexity_budget():
    t0 = time.perf_counter()
    prior = planar_prior()
    sensor = np.diag([0.02 ** 2, math.radians(0.1) ** 2])

    # touched-cell count of a single beam is linear in its range
    geom = GridGeometry(resolution_c=0.1, origin=(-45.0, -45.0),
                        width=900, height=900)
    belief = pose_belief(KfState.initial([0.0, 0.0],
                                         NoiseParams(p0=1e-6 * np.eye(2))))
    ranges = np.linspace(2.0, 40.0, 12)
    counts = []
    for r in ranges:
        dp = GridLayer.filled(geom, prior.ell_beta, "log_odds")
        occ = GridLayer.filled(geom, 0.0, "occupancy")
        scan = Scan(np.array([r]), np.array([0.4]),
                    np.array([False]))
        counts.append(len(apply_fov(dp, occ, belief, scan, sensor,
                                    prior)))
    r2_touched = fit_line(ranges, counts).pearson_r ** 2

    # map-score and frontier-extraction passes are linear in cell count
    def tmin(fn, reps=7, batch=4):
        # CPU time of a min-of-reps batch resists scheduler noise; gc
        # stays off so collection pauses don't land inside a window
        best = math.inf
        gc.disable()
        try:
            for _ in range(reps):
                start = time.process_time()
                for _ in range(batch):
                    fn()
                best = min(best, time.process_time() - start)
        finally:
            gc.enable()
            gc.collect()
        return best / batch

    sizes = (100, 200, 300, 400, 566, 800)
    cells, t_score, t_uf = [], [], []
    for n in sizes:
        g = GridGeometry(resolution_c=0.1, origin=(0.0, 0.0),
                         width=n, height=n)
        # seams every 1.6 m at every size, so the frontier workload
        # (masked cells, clusters) grows with cell count like the field
        band = (np.arange(n) // 16) % 2
        u = 0.1 + 0.08 * band
        um = GridLayer(g, np.tile(u, (n, 1)), "uncertainty")
        p = (prior.a / um.values) ** 2
        dp = GridLayer(g, np.log(p / (1.0 - p)), "log_odds")
        occ = GridLayer(g, np.zeros((n, n)), "occupancy")
        params = FrontierParams(t_h=0.3, u_beta=prior.u_beta,
                                raw_gradient=True)
        t_score.append(tmin(lambda: siren(dp, prior)))
        t_uf.append(tmin(lambda: extract_uncertainty_frontiers(
            um, occ, params), reps=5, batch=2))
        cells.append(n * n)
    r2_score = fit_line(cells, t_score).pearson_r ** 2
    r2_uf = fit_line(cells, t_uf).pearson_r ** 2
    elapsed = time.perf_counter() - t0
    ok = (r2_touched > 0.98 and r2_score > 0.98 and r2_uf > 0.98
          and elapsed < 120.0)
    record(9, ok,
           f"touched-vs-range R2 {r2_touched:.4f}, score-pass R2 "
           f"{r2_score:.4f}, frontier-pass R2 {r2_uf:.4f} (all > 0.98), "
           f"{elapsed:.0f} s")


def test_criterion_10_filter_consistency():
    t0 = time.perf_counter()
    walls = np.array([[-3.0, -3.0, 3.0, -3.0], [3.0, -3.0, 3.0, 3.0],
                      [3.0, 3.0, -3.0, 3.0], [-3.0, 3.0, -3.0, -3.0]])
    world = WorldModel(walls, {"a": (1.0, 1.0), "b": (-1.0, 0.5)},
                       (-3, -3, 3, 3))
    lo, hi = stats.chi2.ppf([0.025, 0.975], df=2)
    inside = 0
    for seed in range(100):
        sim = Simulator.create(world, [0.0, 0.0], seed)
        for _ in range(30):
            sim.step([0.05, 0.03])
            sim.update_filter()
        if lo <= sim.nees() <= hi:
            inside += 1
    elapsed = time.perf_counter() - t0
    ok = inside >= 90 and elapsed < 120.0
    record(10, ok,
           f"NEES inside 95% chi-square band [{lo:.3f}, {hi:.3f}] in "
           f"{inside}/100 runs, {elapsed:.1f} s")
