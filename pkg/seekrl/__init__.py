# Rewards, return estimators and losses
from seekrl.losses import policy_loss, prediction_loss, td_lambda_loss
from seekrl.returns import (
    delta_sum_advantages, gae_advantages, gae_weights, k_step_return, lambda_targets,
    weighted_advantages,
)
from seekrl.rewards import (
    extrinsic_label_reward, intrinsic_level, label_log_likelihood, per_question_intrinsic,
    reconstruction_log_likelihood,
)
from seekrl.schemas import HyperParams, RewardSpec
from seekrl.trace import EpisodeTrace
