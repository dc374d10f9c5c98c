"""Chain description, ratchet splitting profile and the two-stage ac drive.

Units: energies in J, times in 1/J, hbar = 1.

Basis of the single-excitation subspace (dimension N + 1): index 0 is the
reference state (Alice's qubit excited with the chain empty in routing mode, or
the chain vacuum in state-transfer mode); index n >= 1 is the excitation on
chain site n. Index 0 is uncoupled and carries zero on-site energy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .special import XI0, bessel_j0, nearest_j0_zero

__all__ = [
    "ChainSpec",
    "DriveProtocol",
    "ErrorModel",
    "DegenerateProtocolError",
    "ratchet_profile",
    "drive_field",
    "hamiltonian",
    "effective_coupling",
    "stage_durations",
    "ratchet_protocol",
    "bob_site",
    "charlie_site",
]


class DegenerateProtocolError(ValueError):
    """A stage would need infinite time because its active coupling vanishes."""


@dataclass(frozen=True)
class ChainSpec:
    """Static description of the driven chain.

    ``couplings`` holds the N - 1 bond strengths J_n (units of J).
    ``splittings`` optionally overrides the ratchet profile, which is how
    fabrication errors on the field amplitudes enter.
    """

    n_sites: int
    couplings: tuple[float, ...]
    base_splitting: float
    lambda1: float
    lambda2: float
    node_index: int
    include_alice: bool = True
    splittings: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple(float(c) for c in self.couplings))
        if self.splittings is not None:
            object.__setattr__(self, "splittings", tuple(float(b) for b in self.splittings))
        if int(self.n_sites) != self.n_sites or self.n_sites < 1:
            raise ValueError(f"n_sites must be a positive integer, got {self.n_sites}")
        if len(self.couplings) != self.n_sites - 1:
            raise ValueError(
                f"need {self.n_sites - 1} couplings for {self.n_sites} sites, got {len(self.couplings)}"
            )
        if any(not c > 0 for c in self.couplings):
            raise ValueError("all couplings must be positive")
        if not 1 <= self.node_index <= self.n_sites:
            raise ValueError(f"node_index {self.node_index} outside 1..{self.n_sites}")
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ValueError("lambda1 and lambda2 must be positive")
        if self.lambda1 == self.lambda2:
            raise ValueError("degenerate ratchet: lambda1 == lambda2")
        if self.splittings is not None and len(self.splittings) != self.n_sites:
            raise ValueError("splittings override must have one entry per site")

    @classmethod
    def uniform(
        cls,
        n_sites: int,
        lambda1: float,
        lambda2: float,
        node_index: int | None = None,
        base_splitting: float = 1.0,
        coupling: float = 1.0,
        include_alice: bool = True,
    ) -> "ChainSpec":
        """Chain with identical bonds; the node defaults to the central site."""
        if node_index is None:
            node_index = (n_sites + 1) // 2
        return cls(
            n_sites=n_sites,
            couplings=(coupling,) * (n_sites - 1),
            base_splitting=base_splitting,
            lambda1=lambda1,
            lambda2=lambda2,
            node_index=node_index,
            include_alice=include_alice,
        )

    @property
    def profile(self) -> np.ndarray:
        """On-site splittings b_1..b_N actually used (override or ratchet)."""
        if self.splittings is not None:
            return np.array(self.splittings)
        return ratchet_profile(self)

    def with_(self, **changes) -> "ChainSpec":
        return replace(self, **changes)


def ratchet_profile(spec: ChainSpec) -> np.ndarray:
    """Four-periodic splittings b, b+L1, b+L1+L2, b+L2 starting at site 1.

    Neighbour differences run L1, L2, -L1, -L2, ...
    """
    b, l1, l2 = spec.base_splitting, spec.lambda1, spec.lambda2
    pattern = np.array([b, b + l1, b + l1 + l2, b + l2])
    return pattern[np.arange(spec.n_sites) % 4]


def bob_site(spec: ChainSpec) -> int:
    """The end the excitation reaches when the drive starts in stage 1.

    With the profile anchored at site 1, stage 1 leaves only the L2 bonds
    open; from a node at an odd site the open bond points towards site 1,
    from an even site towards site N.
    """
    return 1 if (spec.node_index - 1) % 2 == 0 else spec.n_sites


def charlie_site(spec: ChainSpec) -> int:
    return spec.n_sites if bob_site(spec) == 1 else 1


@dataclass(frozen=True)
class ErrorModel:
    """Half-widths of the uniform fabrication errors plus the RNG seed."""

    eps_J: float = 0.0
    eps_b: float = 0.0
    eps_T: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("eps_J", "eps_b", "eps_T"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def is_zero(self) -> bool:
        return self.eps_J == 0 and self.eps_b == 0 and self.eps_T == 0


@dataclass(frozen=True)
class DriveProtocol:
    """Two-stage ac drive, periodically continued.

    The stage at time t is set by ``(t + start_offset) mod (T1 + T2)``:
    amplitude xi0*omega/lambda1 during stage 1, xi0*omega/lambda2 during
    stage 2, times cos(omega*t + carrier_phase). ``switch_jitter[k]`` delays the k-th switch of the run (and
    every later one) by that amount, so the schedule drifts cumulatively.
    """

    omega: float
    stage_durations: tuple[float, float]
    start_offset: float = 0.0
    n_cycles: int | None = None
    xi0: float = XI0
    snap_to_period: bool = False
    switch_jitter: tuple[float, ...] = field(default=())
    carrier_phase: float = 0.0

    def __post_init__(self):
        t1, t2 = (float(t) for t in self.stage_durations)
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not (t1 > 0 and t2 > 0) or not (math.isfinite(t1) and math.isfinite(t2)):
            raise ValueError("stage durations must be positive and finite")
        if self.snap_to_period:
            tau = 2 * math.pi / self.omega
            t1 = max(1, round(t1 / tau)) * tau
            t2 = max(1, round(t2 / tau)) * tau
        object.__setattr__(self, "stage_durations", (t1, t2))
        object.__setattr__(self, "switch_jitter", tuple(float(j) for j in self.switch_jitter))
        if self.n_cycles is not None and self.n_cycles < 0:
            raise ValueError("n_cycles must be non-negative")
        if self.start_offset < 0:
            raise ValueError("start_offset must be non-negative")

    @property
    def period(self) -> float:
        return self.stage_durations[0] + self.stage_durations[1]

    def with_(self, **changes) -> "DriveProtocol":
        return replace(self, **changes)

    def switch_times(self, t_final: float) -> np.ndarray:
        """Times in (0, t_final) at which the amplitude switches, jitter included."""
        t1, t2 = self.stage_durations
        period = t1 + t2
        phase = self.start_offset % period
        first = t1 - phase if phase < t1 else period - phase
        times = []
        t = first
        stage_len = (t2, t1) if phase < t1 else (t1, t2)
        k = 0
        drift = 0.0
        while True:
            if k < len(self.switch_jitter):
                drift += self.switch_jitter[k]
            actual = t + drift
            if actual >= t_final:
                break
            if actual > 0:
                times.append(actual)
            t += stage_len[k % 2]
            k += 1
        return np.array(times)

    def initial_stage(self) -> int:
        t1, _ = self.stage_durations
        return 1 if (self.start_offset % self.period) < t1 else 2

    def stage_at(self, t: float) -> int:
        """Active stage (1 or 2) at time t >= 0."""
        if not self.switch_jitter:
            return 1 if ((t + self.start_offset) % self.period) < self.stage_durations[0] else 2
        n_switches = int(np.searchsorted(self.switch_times(t + self.period), t, side="right"))
        return self.initial_stage() if n_switches % 2 == 0 else 3 - self.initial_stage()


def _amplitude_scale(spec: ChainSpec, protocol: DriveProtocol, stage: int) -> float:
    """xi0 / Lambda_s, the prefactor of omega * b_n * cos(omega t)."""
    return protocol.xi0 / (spec.lambda1 if stage == 1 else spec.lambda2)


def drive_field(spec: ChainSpec, protocol: DriveProtocol, t: float) -> np.ndarray:
    """Instantaneous on-site fields h_n(t) for n = 1..N."""
    if t < 0:
        raise ValueError("drive_field is defined for t >= 0")
    scale = _amplitude_scale(spec, protocol, protocol.stage_at(t))
    return scale * protocol.omega * spec.profile * math.cos(protocol.omega * t + protocol.carrier_phase)


def hamiltonian(spec: ChainSpec, protocol: DriveProtocol, t: float) -> np.ndarray:
    """Real symmetric (N+1)x(N+1) tight-binding Hamiltonian at time t.

    Diagonal: 0 for the reference index, h_n(t) on the chain; hopping J_n/2.
    """
    n = spec.n_sites
    h = np.zeros((n + 1, n + 1))
    h[np.arange(1, n + 1), np.arange(1, n + 1)] = drive_field(spec, protocol, t)
    hop = 0.5 * np.asarray(spec.couplings)
    idx = np.arange(1, n)
    h[idx, idx + 1] = hop
    h[idx + 1, idx] = hop
    return h


def effective_coupling(J_n: float, b_n: float, b_m: float, A_scale: float, omega: float) -> float:
    """High-frequency renormalised bond J_n * J0(A (b_n - b_m) / omega)."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    return J_n * bessel_j0(A_scale * (b_n - b_m) / omega)


def stage_durations(J: float, lambda1: float, lambda2: float, xi0: float = XI0) -> tuple[float, float]:
    """Half tunnel cycles (T1, T2) of the two stages.

    Stage 1 freezes the L1 bonds and leaves the L2 bonds open with
    J * J0(xi0 * L2 / L1); stage 2 is the mirror image.
    """
    if not (lambda1 > 0 and lambda2 > 0) or lambda1 == lambda2:
        raise ValueError("need distinct positive lambda1, lambda2")
    out = []
    for open_, frozen in ((lambda2, lambda1), (lambda1, lambda2)):
        arg = xi0 * open_ / frozen
        if abs(arg - nearest_j0_zero(arg)) < 1e-6:
            raise DegenerateProtocolError(
                f"degenerate protocol: J0({arg:.9g}) = 0, the open bonds are frozen as well"
            )
        out.append(math.pi / abs(J * bessel_j0(arg)))
    return out[0], out[1]


def ratchet_protocol(
    spec: ChainSpec,
    omega: float,
    start_offset: float = 0.0,
    n_cycles: int | None = None,
    J: float = 1.0,
    **kwargs,
) -> DriveProtocol:
    """DriveProtocol whose stage durations are the half tunnel cycles of ``spec``."""
    return DriveProtocol(
        omega=omega,
        stage_durations=stage_durations(J, spec.lambda1, spec.lambda2),
        start_offset=start_offset,
        n_cycles=n_cycles,
        **kwargs,
    )
