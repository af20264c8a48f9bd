"""Interference alignment on the K-user MIMO interference channel under
quantized Grassmannian CSI feedback: numerics, feedback pipelines, analytic
bounds and a Monte-Carlo experiment harness."""

from .channel import (ChannelRealization, RankDeficientChannel,
                      RowSpaceFactorization, SystemDims, concat_interference,
                      gen_channel, row_space_qr, split_interference)
from .feedback import (BitSchedule, FeedbackReport, feedback_ncq,
                       feedback_perfect, feedback_perturbed,
                       feedback_proposed, ncq_bit_slope, proposed_bit_slope,
                       schedule_bits, surrogate_grid)
from .grassmann import (BITS_CAP, Codebook, ManifoldConstants,
                        ball_volume_coeff, chordal_distance,
                        composite_constants, composite_distance,
                        distortion_moment_bounds, grassmann_constants,
                        haar_point, haar_points, load_codebook,
                        ncq_constants, packing_radius, perturb, perturb_at,
                        perturbation_params, quantize, rvq_codebook,
                        save_codebook, subspace_constants)
from .harness import (CurveRow, ExperimentConfig, SchemeSpec,
                      SolverFailureBudgetExceeded, emit_csv, emit_plot,
                      preset, read_csv, run_experiment)
from .ia import (IASolution, IASolverError, build_receive_filter,
                 dof_feasible, solve_ia, solve_ia_altmin,
                 solve_ia_closed_form, surrogate_residual)
from .metrics import (RatePoint, estimate_dof, leakage,
                      leakage_bound_theorem_curve, ncq_leakage_bound,
                      rate_pair_hypothetical, rvq_rate_loss_lower_bound,
                      snr_db_to_linear, sum_rate_optimal, sum_rate_projected)

__version__ = "0.1.0"
