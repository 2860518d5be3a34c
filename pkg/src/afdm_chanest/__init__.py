"""Pilot-aided channel estimation for affine frequency division multiplexing (AFDM)."""

from ._kernels import BACKEND
from .channel import apply_channel, build_effective_channel, build_time_channel, transmit
from .daft import DaftFrame, Domain, add_cpp, daft_matrix, demodulate, modulate, remove_cpp
from .equalize import equalize, lmmse_matrix, qam_alphabet, qam_demap, qam_map
from .estimate import (
    EstimateReport,
    EstimatorOptions,
    FractionMethod,
    GfsParams,
    baseline_threshold_ls,
    gfn,
    gfs_optimize,
    mf_ce_fdfd,
    mf_ce_idfd,
    resolve_path,
)
from .harness import ExperimentConfig, OrthogonalityConfig, ResultRow, nmse_a_sweep, run_sweep, run_trial
from .iorel import equivalent_shift, sinr_loss, sinr_per_subcarrier
from .params import (
    ChannelPath,
    ChannelSpec,
    ConfigError,
    GridLimits,
    GuardDoesNotFitError,
    WaveformConfig,
    check_doubly_underspread,
    derive_limits,
    draw_channel,
    reference_setup,
)
from .pilot import PilotFrame, build_dual_frames, build_pilot_frame, mutual_coherence, nmse_a, truncate

__version__ = "0.1.0"
