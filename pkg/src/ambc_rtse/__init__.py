"""Energy detection for ambient backscatter links with residual timing error."""
from .mathkit import ConvergenceError, DomainError
from .model import SystemParams, ChannelState, SourceKind, derive_channel_state, synthesize_stream, window
from .detector import Threshold, test_statistic, decide, detect_block

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DomainError",
    "SystemParams",
    "ChannelState",
    "SourceKind",
    "derive_channel_state",
    "synthesize_stream",
    "window",
    "Threshold",
    "test_statistic",
    "decide",
    "detect_block",
]
