"""Transformer double-DQN design agent."""

from .network import (  # noqa: F401
    NetConfig,
    encode_history,
    init_params,
    layer_norm,
    param_groups,
    qnet_backward,
    qnet_forward,
    qnet_q_final,
)
from .agent import (  # noqa: F401
    LearnedPolicy,
    ReplayBuffer,
    TrainResult,
    TrainState,
    TrlConfig,
    act,
    ddqn_target,
    optimizer_step,
    proxy_reward,
    soft_update,
    td_loss_and_grads,
    train,
)
