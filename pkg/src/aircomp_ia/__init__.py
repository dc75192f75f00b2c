"""
Interference alignment for multi-cluster over-the-air computation.

Clusters of transmitters, neighbours possibly sharing transmitters, send
modulo-p messages over diagonal channels; each receiver recovers the
modulo-p sum of its own cluster's messages while interference from the
other clusters is aligned into a common subspace.
"""
from .alignment import (AlignmentReport, RankVerdict, assemble_lambda, blocklength, check_containment,
                        dof_accounting, rank_check_exact, rank_check_float, verify_alignment)
from .channel import ChannelParams, ChannelSet, ScalarMode, apply_channel, draw_channels
from .config import SimConfig, parse_config
from .oracles import (BaselineReport, LemmaInstance, baseline_ia_only, baseline_tdma, lemma_matrix,
                      lemma_trial_campaign)
from .precoding import PrecoderSet, build_iav, build_iaw, build_precoders, tx_signal
from .topology import Scheme, Topology, build_topology, gamma_single, gamma_two, scheme_selector
from .transceiver import (MessageSet, TrialResult, TrialSpec, demodulate_sum, encode_all, modulate,
                          run_campaign, run_trial, zf_decode)

__version__ = "0.1.0"
