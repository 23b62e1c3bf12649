"""Pareto-guided pursuer placement for pursuit-evasion games.

The package simulates pursuit-evasion games under closed-form control laws,
searches the three-feature objective space for Pareto-optimal pursuer
configurations with NSGA-II, trains a small graph convolutional network
against the stacked fronts, generates "hot start" placements from it, and
compares them to uniform-random starts with survival analysis.
"""

from .controllers import (Assignment, ValueGrid, evader_escape_control,
                          evader_weakest_link, hji_update, hungarian_assign,
                          hybrid_cost_matrix, make_policies,
                          pursuer_hybrid_control, pursuer_intercept_heading,
                          upwind_gradient)
from .features import (Configuration, FeatureVector, ParetoFront,
                       aggregate_features, dominates, evader_position_samples,
                       pareto_front, u_capture, u_distance, u_heading)
from .gcn import (GcnModel, HotStart, TrainConfig, gcn_forward,
                  generate_hot_starts, pareto_loss, train)
from .geometry import containment, heatmap_accumulate
from .graphs import ConfigGraph, build_graph
from .indicators import IndicatorReport, gd_family, hypervolume
from .nsga2 import nsga2_optimize
from .pipeline import PipelineConfig, run_all, run_stage
from .survival import SurvivalCurve, kaplan_meier, log_rank
from .world import (AgentState, EpisodeLog, Scenario, detect_captures,
                    integrate_step, run_episode)

__version__ = "0.1.0"
