"""Dynamic handover toolkit.

Predicts the giver's wrist trajectory from live receiver motion by blending
the most similar stored human-to-human handovers (flow-model similarity on
sparse GPs), simulates Cartesian impedance tracking with force-threshold
release, and tunes the four handover parameters from pairwise preferences.
"""

from .dataset import (GeneratorConfig, GiverPose, HandoverDataset, HandoverPair,
                      ReceiverPose, Trajectory, generate_synthetic, load, save,
                      stratified_kfold)
from .evaluation import (EvalReport, estimate_tracking_lag, rms_error,
                         run_kfold_eval, run_sample_efficiency, run_tradeoff)
from .impedance import (EndEffectorState, Gripper, HandoverParams, ImpedanceGains,
                        LEARNED_PARAMS, ReceiverScenario, RolloutResult,
                        check_release, impedance_force, rollout, rollout_to_dict,
                        scenario_away, scenario_id, scenario_ood, scenario_static,
                        step)
from .prediction import (EnsembleBuffer, HandoverComplete, PredictedTrajectory,
                         PredictionContext, align_time, ensemble_push_and_query,
                         fit_context, forecast_pose, predict_trajectory)
from .preference import (ActionGrid, PreferenceKernel, PreferencePosterior,
                         PreferenceRecord, laplace_posterior, log_likelihood,
                         preference_likelihood, select_query, synthetic_oracle,
                         update)
from .service import (PreferenceSession, create_app, replay_session_log,
                      simulate_sessions)
from .similarity import (ObservedTrajectory, SimilarityConfig, cosine_distance,
                         rank_all, similarity, trajectory_distance)
from .spgp import (FlowBank, FlowModel, KernelParams, finite_difference_velocities,
                   fit_flow, fit_kernel_params)

__version__ = "0.1.0"
