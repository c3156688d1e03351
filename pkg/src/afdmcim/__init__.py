"""GCIM-AFDM-SS transceiver simulation: DAFT, mapping, channel, detectors, bounds, Monte Carlo."""

from .daft import DaftParams, add_cpp, build_daft_matrix, daft, default_c1, default_c2, idaft, remove_cpp
from .mapping import (ConstellationKind, GcimConfig, Scheme, build_constellation, demap_gcim,
                      map_bits_baseline, map_bits_gcim, spectral_efficiency, walsh_codebook)
from .channel import (ChannelRealization, PathSpec, apply_channel_time, build_effective_matrix,
                      build_time_matrix, corrupt_csi, sample_channel)
from .detectors import Detector, EqualizerKind, SizingError, detect_baseline, ml_detect, mrc_detect
from .analysis import (PepInputs, abep_profile_average, abep_upper_bound, pep_conditional,
                       pep_high_snr, pep_unconditional, q_approx, upsilon_matrix)
from .sim import BerPoint, SimConfig, run_ber_sweep, run_trial

__version__ = "0.1.0"
