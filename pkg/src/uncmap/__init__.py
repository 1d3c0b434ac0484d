"""Dispersion-probability grid mapping, uncertainty frontiers, and an
uncertainty-aware exploration study harness."""

from ._kernels import USING_NUMBA
from .analysis import (FrontierCluster, FrontierParams, FrontierSet,
                       SirenParams, SirenReport, build_uncertainty_map,
                       extract_classical_frontiers, extract_frontiers,
                       extract_uncertainty_frontiers, kl_term_dp,
                       kl_term_sigma, siren, siren_curve)
from .belief import (ELL_FLOOR, PriorConstants, PriorSpec, apply_fov,
                     blend_update, derive_prior, gated_update,
                     logodds_to_prob, prob_to_logodds)
from .dispersion import (GaussianBelief, PolarMeasurement, RectangleSpec,
                         bound_constant, gauss_bound, geometric_mean_sigma,
                         polar_jacobians, propagate_polar,
                         rectangle_probability,
                         rectangle_probability_with_error)
from .errors import (BoundDomainViolation, DegenerateBelief, DegenerateGrid,
                     DomainError, GeometryMismatch, InvalidCovariance,
                     MalformedFile, NoPathFound, OutOfBounds, UncmapError)
from .experiment import (LAYOUTS, PPS_MODE, PPS_SIGMA_MAX, RegressionFit,
                         RunRecord, ScenarioConfig, aggregate_boxplots,
                         fit_landmark_um, fit_line, fixture_world,
                         group_records, landmark_um_pairs, load_fixture,
                         read_summary, run_corridor_script, run_scenario,
                         run_single, save_record, write_boxplots_csv,
                         write_summary)
from .grid import (CellIndex, GridGeometry, GridLayer, cell_to_world,
                   central_gradient, export_pgm, load_layer, save_layer,
                   world_to_cell)
from .planning import (Objective, Path, PlannerParams, PlanNode, PlanSpace,
                       node_cost, plan_greedy_rrt,
                       plan_rrt_star_uncertainty, select_objective,
                       stopping_criterion)
from .sim import (KfState, LidarSpec, NoiseParams, Scan, Simulator,
                  WorldModel, kf_predict, kf_update, pose_belief,
                  raycast_scan, segment_blocked, visible_landmarks)

__version__ = "0.1.0"
