# flake8: noqa
from iota_rl.agents.policy import (
    PolicyError, EpsilonSchedule, shift_mask_values, masked_argmax,
    select_action,
)
from iota_rl.agents.targets import (
    target_simple, target_double, goal_value, affordance_loss, total_loss,
    td_loss_simple, baseline_target, baseline_double_target, BOOTSTRAPS,
    LITERAL, PERMITTED,
)
from iota_rl.agents.replay import ReplayBuffer, ReplayError, Transition, Batch
from iota_rl.agents.trainer import (
    AgentKind, AgentConfig, Schedule, UnitResult, Evaluation, Trainer, AGENTS,
    agent_kind, train, EPISODE, EPOCH, DEFAULT_LAMBDA,
)
