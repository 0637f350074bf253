"""Simulation toolkit for SDI video carried over a VCSEL optical-wireless link."""

from .errors import (ConfigError, DegradedSignalError, InvalidArgumentError,
                     LowConfidenceError, NotFoundError, OwlinkError)
from .codec import (BitStream, LfsrSpec, descramble, generate_prbs, nrzi_decode,
                    nrzi_encode, prbs15, scramble)
from .waveform import PulseSpec, Waveform, add_dc_bias, resample, synthesize
from .analysis import (ComplianceReport, EyeDiagram, EyeMetrics, build_eye,
                       count_bit_errors, mask_check, q_factor, waveform_metrics)
from .channel import (CeqSpec, LinkConfig, PhotoreceiverSpec, VcselSpec,
                      cable_equalizer, photoreceiver_transfer, run_chain, vcsel_transfer)
from .budget import (crash_knee_check, min_bandwidth, q_to_ber, q_to_snr_db,
                     variant_lookup)

__version__ = "0.1.0"
