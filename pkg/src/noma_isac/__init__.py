"""Two-user uplink NOMA with radar superposition: pair-wise detection analysis.

Modules
-------
specfun        Q-function, incomplete gamma, Gauss 2F1, quadrature.
constellation  Two-period combined alphabet, distances, decision geometry.
channel        System constants, Rayleigh and radar channels, noise.
sim            Monte-Carlo engine for the ZF and JML receivers.
analytic       Semi-analytical BER, union bounds and outage closed forms.
cli            Command-line sweeps and validation.
"""

from .analytic import (
    conditional_ber_oracle,
    conditional_ber_zf,
    outage_jml,
    outage_zf,
    semi_analytic_ber_zf,
    upper_ber_jml,
    upper_ber_zf,
)
from .channel import SystemParams, dbm_to_watt, radar_channel, sample_comm_channel
from .constellation import build_combined, decision_geometry, default_constellation, distance_sets, nearest_symbol
from .sim import run_ber, run_outage

__version__ = "0.1.0"

__all__ = [
    "SystemParams",
    "dbm_to_watt",
    "build_combined",
    "default_constellation",
    "distance_sets",
    "nearest_symbol",
    "decision_geometry",
    "sample_comm_channel",
    "radar_channel",
    "conditional_ber_zf",
    "conditional_ber_oracle",
    "semi_analytic_ber_zf",
    "upper_ber_zf",
    "upper_ber_jml",
    "outage_zf",
    "outage_jml",
    "run_ber",
    "run_outage",
]
