from .losses import (
    LossWeights,
    NonFiniteLoss,
    cosine_loss,
    stage_loss,
    total_loss,
    transition_labels,
    transition_loss,
)
from .loop import GRID_R_A, GRID_R_E, TrainConfig, TrainResult, load_params, make_windows, train
from .optim import OptimState, ScheduleConfig, lion_step, lr_at
