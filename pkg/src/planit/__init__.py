"""Learning spatial activity-preference costs from weak trajectory labels.

The package fits per-activity spatial kernels (circular, edge, distance) to
bad-labeled trajectory waypoints by EM over a latent activity assignment,
rasterizes the learned mixture into planning cost maps, plans with a
cost-aware RRT, and evaluates against clearance/interference heuristics.
"""

from .affordance import (
    ActivityModel,
    AttributePairModel,
    ContextObject,
    ModelParameters,
    activity_cost,
    log_trajectory_cost,
    manipulation_waypoint_cost,
    marginal_waypoint_cost,
    trajectory_cost,
)
from .distributions import (
    BetaParams,
    GaussianParams,
    VonMisesParams,
    beta_pdf,
    fit_beta_weighted,
    fit_gaussian_weighted,
    fit_vonmises_weighted,
    gaussian_pdf,
    vonmises_pdf,
)
from .em import EMConfig, EMTrace, TrainingSet, build_training_set, e_step, fit, log_likelihood, m_step
from .env import (
    ActivityInstance,
    Bounds,
    Environment,
    LabeledSegment,
    SceneObject,
    Trajectory,
    extract_features,
    extract_height_feature,
)
from .evaluation import (
    GroundTruthScore,
    SynthConfig,
    baseline_cost,
    ground_truth_scores,
    misclassification_rate,
    ndcg,
    rank_trajectories,
    synthesize_feedback,
)
from .planner import CostMap, PlanRequest, plan, rasterize, sample_diverse

__version__ = "0.1.0"
