"""Entanglement routing and state transfer through ac-driven qubit chains.

The drive switches between two amplitudes on a four-periodic splitting
profile; coherent destruction of tunneling then opens every second bond in
turn and the excitation ratchets two sites per period towards one end.
"""
__version__ = "0.1.0"

from .model import (  # noqa: E402
    ChainSpec,
    DegenerateProtocolError,
    DriveProtocol,
    ErrorModel,
    bob_site,
    charlie_site,
    drive_field,
    effective_coupling,
    hamiltonian,
    ratchet_profile,
    ratchet_protocol,
    stage_durations,
)
from .dynamics import (  # noqa: E402
    PropagationError,
    SubspaceDensity,
    Trajectory,
    WaveFunction,
    propagate_effective,
    propagate_lindblad,
    propagate_pure,
)
from .special import XI0, bessel_j0  # noqa: E402
