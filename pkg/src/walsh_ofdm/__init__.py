"""Walsh/Fourier MIMO-OFDM link simulation with CFO-aware detectors."""

from .channel import ChannelConfig, draw_channel, effective_matrix, interference_matrix
from .equalizers import (
    JlcozfParams,
    StackedModel,
    jlcozf_sic_detect,
    lmmse_detect,
    lzf_detect,
    mmse_sic_detect,
)
from .errors import (
    ConditioningError,
    ConfigError,
    ConvergenceError,
    DimensionError,
    SingularMatrixError,
)
from .harness import Equalizer, SimConfig, run_ber, run_sweep, run_trial
from .transforms import TransformKind, TransformPlan, fwht, walsh_matrix

__version__ = "0.1.0"
