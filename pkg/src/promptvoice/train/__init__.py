from promptvoice.train.batching import CollatedBatch, batch_by_frames, collate
from promptvoice.train.checkpoint import (
    MelStats,
    load_checkpoint,
    restore_model,
    save_checkpoint,
)
from promptvoice.train.loop import TrainingError, TrainingExample, TrainResult, train
from promptvoice.train.loss import LossBreakdown, total_loss
from promptvoice.train.schedule import lr_schedule

__all__ = [
    "CollatedBatch",
    "batch_by_frames",
    "collate",
    "MelStats",
    "load_checkpoint",
    "restore_model",
    "save_checkpoint",
    "TrainingError",
    "TrainingExample",
    "TrainResult",
    "train",
    "LossBreakdown",
    "total_loss",
    "lr_schedule",
]
