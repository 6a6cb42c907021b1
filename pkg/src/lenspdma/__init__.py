"""Uplink multi-user mmWave simulation with a full-dimensional lens array at the
base station: path division multiple access (PDMA) with delay compensation,
MRC/MMSE transceivers and low-overhead channel estimation."""

from .channel import (
    ChannelRealization,
    DiscreteChannel,
    EffectiveChannels,
    PathLossConfig,
    ScenarioConfig,
    discretize,
    effective_matrices,
    sample_channel,
)
from .codebook import Codebook, beamsteering_codebook, omni_beamformer, training_matrix
from .estimation import TrainingConfig, estimate_channel, training_overhead
from .lens_array import (
    AntennaIndex,
    LensArrayConfig,
    UpaConfig,
    antenna_grid,
    aperture_integration_oracle,
    lens_response,
    upa_response,
)
from .linksim import SimConfig, measure_sinr, run_experiment, transmit_receive
from .pdma import BeamformerSet, exhaustive_p1_oracle, mmse_design, mrc_design, select_antennas, sinr_eq21

__version__ = "0.1.0"

__all__ = [
    "AntennaIndex",
    "BeamformerSet",
    "ChannelRealization",
    "Codebook",
    "DiscreteChannel",
    "EffectiveChannels",
    "LensArrayConfig",
    "PathLossConfig",
    "ScenarioConfig",
    "SimConfig",
    "TrainingConfig",
    "UpaConfig",
    "antenna_grid",
    "aperture_integration_oracle",
    "beamsteering_codebook",
    "discretize",
    "effective_matrices",
    "estimate_channel",
    "exhaustive_p1_oracle",
    "lens_response",
    "measure_sinr",
    "mmse_design",
    "mrc_design",
    "omni_beamformer",
    "run_experiment",
    "sample_channel",
    "select_antennas",
    "sinr_eq21",
    "training_matrix",
    "training_overhead",
    "transmit_receive",
    "upa_response",
]
