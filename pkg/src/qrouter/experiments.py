"""Numerical studies built on the propagators.

Routing and splitting runs, frequency/length sweeps, the stage-ratio
optimiser, the fabrication-error Monte Carlo and decoherence sweeps.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    SubspaceDensity,
    Trajectory,
    WaveFunction,
    propagate_lindblad,
    propagate_pure,
)
from .metrics import (
    TransferReport,
    fidelity_deco_exact,
    fidelity_fab,
    fidelity_from_concurrence,
    fidelity_from_rhoB,
    readout,
    wrap_phase,
)
from .model import (
    ChainSpec,
    DriveProtocol,
    ErrorModel,
    bob_site,
    charlie_site,
    ratchet_protocol,
)
from .special import XI0, bessel_j0, j0_zeros

__all__ = [
    "RoutingResult",
    "SweepResult",
    "EnsembleResult",
    "RealizationRecord",
    "routing_target",
    "routing_cycles",
    "run_routing",
    "run_transfer",
    "sweep_frequency_length",
    "ratio_objective",
    "optimize_ratio",
    "sample_realization",
    "run_realization",
    "run_ensemble",
    "tau_AB",
    "decoherence_sweep",
    "HISTOGRAM_BIN",
]

HISTOGRAM_BIN = 1e-3


# ---------------------------------------------------------------- routing


def routing_target(spec: ChainSpec, protocol: DriveProtocol) -> int:
    """End site the excitation is sent to, given the stage active at t = 0.

    Offsets that start inside stage 1 target Bob; offsets inside stage 2
    target Charlie. A split (offset T1/2) counts as stage 1.
    """
    return bob_site(spec) if protocol.initial_stage() == 1 else charlie_site(spec)


def routing_cycles(spec: ChainSpec, target: int) -> int:
    """ceil(distance / 2) + 1 protocol periods: two sites per period plus one of margin."""
    return math.ceil(abs(spec.node_index - target) / 2) + 1


@dataclass
class RoutingResult:
    """One routing run: trajectory plus the readout at both chain ends."""

    trajectory: Trajectory
    bob: int
    charlie: int
    C_bob: float
    C_charlie: float
    t_bob: float
    t_charlie: float
    n_cycles: int

    def to_dict(self) -> dict:
        return {
            "bob_site": self.bob,
            "charlie_site": self.charlie,
            "C_bob": self.C_bob,
            "C_charlie": self.C_charlie,
            "t_readout_bob": self.t_bob,
            "t_readout_charlie": self.t_charlie,
            "n_cycles": self.n_cycles,
            "t_final": self.trajectory.t_final,
            "max_norm_drift": self.trajectory.max_drift,
        }


def _end_readout(traj: Trajectory, site: int, source: int) -> tuple[float, float]:
    r = readout(traj, site, source, min_population=0.0)
    return r.concurrence, r.time


def _run_length(spec: ChainSpec, protocol: DriveProtocol) -> tuple[int, float]:
    if protocol.n_cycles is not None:
        n_cycles = protocol.n_cycles
    else:
        n_cycles = routing_cycles(spec, routing_target(spec, protocol))
    return n_cycles, n_cycles * protocol.period


def run_routing(
    spec: ChainSpec,
    protocol: DriveProtocol,
    arrival_offset: float | None = None,
    gamma: float = 0.0,
    dt_max: float | None = None,
    stride: int = 16,
    method: str = "rk8",
) -> RoutingResult:
    """Send Alice's Bell partner from the node to the chain ends.

    ``arrival_offset`` (if given) replaces ``protocol.start_offset``: 0 routes
    to Bob, T1 to Charlie, T1/2 splits. With ``gamma > 0`` the run uses the
    master equation with Alice's qubit dephasing as well.
    """
    if arrival_offset is not None:
        protocol = protocol.with_(start_offset=arrival_offset)
    n_cycles, t_final = _run_length(spec, protocol)
    psi0 = WaveFunction.bell(spec.n_sites, spec.node_index)
    dense_from = t_final - protocol.period
    if gamma > 0:
        traj = propagate_lindblad(
            SubspaceDensity.from_wavefunction(psi0, dephase_alice=True),
            spec, protocol, gamma, t_final, dt_max=dt_max, stride=stride, dense_from=dense_from, method=method,
        )
    else:
        traj = propagate_pure(psi0, spec, protocol, t_final, dt_max=dt_max, stride=stride,
                              dense_from=dense_from, method=method)
    bob, charlie = bob_site(spec), charlie_site(spec)
    c_b, t_b = _end_readout(traj, bob, spec.node_index)
    c_c, t_c = _end_readout(traj, charlie, spec.node_index)
    return RoutingResult(traj, bob, charlie, c_b, c_c, t_b, t_c, n_cycles)


def run_transfer(
    spec: ChainSpec,
    protocol: DriveProtocol,
    alpha: complex = 1 / math.sqrt(2),
    beta: complex = 1 / math.sqrt(2),
    gamma: float = 0.0,
    delta_theta: float = 0.0,
    dt_max: float | None = None,
    stride: int = 16,
) -> TransferReport:
    """Send alpha|0> + beta|1> from the node to Bob (state-transfer mode).

    Index 0 is the chain vacuum; only chain qubits dephase. Bob undoes the
    transfer phase up to the residual ``delta_theta``; the fidelity is then
    evaluated on the simulated Bob state.
    """
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-9:
        raise ValueError("need |alpha|^2 + |beta|^2 = 1")
    if spec.include_alice:
        spec = spec.with_(include_alice=False)
    n_cycles, t_final = _run_length(spec, protocol)
    bob = routing_target(spec, protocol)
    psi0 = WaveFunction.transfer(spec.n_sites, spec.node_index, alpha, beta)
    dense_from = t_final - protocol.period
    if gamma > 0:
        traj = propagate_lindblad(
            SubspaceDensity.from_wavefunction(psi0, dephase_alice=False),
            spec, protocol, gamma, t_final, dt_max=dt_max, stride=stride, dense_from=dense_from,
        )
    else:
        traj = propagate_pure(psi0, spec, protocol, t_final, dt_max=dt_max, stride=stride, dense_from=dense_from)
    r = readout(traj, bob, spec.node_index)
    rho11 = r.population
    rho10 = np.conj(r.coherence)  # <1_B|rho|0_B> = rho_{B,vac}
    # Bob's single-site view: populations and coherence scale as |beta|^2 |c_B|^2, alpha* beta c_B
    ab = abs(alpha * beta)
    c_mod = math.sqrt(rho11) / abs(beta) if abs(beta) > 0 else 0.0
    fid = fidelity_deco_exact(rho11, rho10, abs(alpha), abs(beta), delta_theta)
    fid_printed = None
    if gamma == 0 and delta_theta == 0:
        fid_printed = fidelity_from_rhoB(alpha, beta, c_mod, variant="as_printed")
    return TransferReport(
        c_B_modulus=min(c_mod, 1.0),
        theta=r.theta,
        concurrence=float(abs(rho10) / ab) if ab > 0 else 0.0,
        fidelity=fid,
        alpha=complex(alpha),
        beta=complex(beta),
        readout_time=r.time,
        fidelity_as_printed=fid_printed,
    )


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepResult:
    """Grid of final C_{A,B} (and F at |beta|^2 = 1/2) with an analytic overlay.

    ``axes`` maps axis names to strictly increasing value arrays; ``C``,
    ``F`` and ``estimate`` have one dimension per axis in the same order.
    """

    axes: dict[str, np.ndarray]
    C: np.ndarray
    F: np.ndarray
    estimate: np.ndarray
    extra: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        names = list(self.axes)
        out = []
        for idx in np.ndindex(self.C.shape):
            row = {name: float(self.axes[name][i]) for name, i in zip(names, idx)}
            row.update(C_sim=float(self.C[idx]), F=float(self.F[idx]), C_estimate=float(self.estimate[idx]))
            out.append(row)
        return out


def _strict_axis(values, name) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0 or np.any(np.diff(arr) <= 0):
        raise ValueError(f"{name} must be a non-empty strictly increasing sequence")
    return arr


def sweep_frequency_length(
    lambda1: float,
    lambda2: float,
    omegas,
    lengths,
    base_splitting: float = 1.0,
    dt_max: float | None = None,
) -> SweepResult:
    """Final C_{A,B} on a (omega, N) grid, node at the chain centre, offset 0.

    The overlay is the ideal value 1 (perfect routing).
    """
    om = _strict_axis(omegas, "omegas")
    ns = _strict_axis(lengths, "lengths")
    C = np.empty((om.size, ns.size))
    for i, w in enumerate(om):
        for j, n in enumerate(ns):
            spec = ChainSpec.uniform(int(n), lambda1, lambda2, base_splitting=base_splitting)
            res = run_routing(spec, ratchet_protocol(spec, float(w)), 0.0, dt_max=dt_max)
            C[i, j] = res.C_bob
    F = np.vectorize(lambda c: fidelity_from_concurrence(c, 1 / math.sqrt(2)))(C)
    return SweepResult({"omega": om, "N": ns}, C, F, np.ones_like(C))


def tau_AB(T1: float, T2: float, N: int) -> float:
    """Routing time (T1 + T2) N / 4: the signal advances two sites per period."""
    return (T1 + T2) * N / 4


def decoherence_sweep(
    spec: ChainSpec,
    protocol: DriveProtocol,
    gammas,
    lengths,
    dt_max: float | None = None,
) -> SweepResult:
    """Final C_{A,B} under pure dephasing on a (gamma, N) grid.

    ``spec`` and ``protocol`` are templates: each length N uses a uniform
    chain with the template's splittings and a centred node, driven at the
    template's omega. gamma = 0 runs are pure-state; the overlay is
    C(0) exp(-2 gamma tau_AB).
    """
    gs = _strict_axis(gammas, "gammas")
    ns = _strict_axis(lengths, "lengths")
    if gs[0] < 0:
        raise ValueError("gammas must be non-negative")
    C = np.empty((gs.size, ns.size))
    est = np.empty_like(C)
    c0 = {}
    for j, n in enumerate(ns):
        chain = ChainSpec.uniform(
            int(n), spec.lambda1, spec.lambda2, base_splitting=spec.base_splitting
        )
        drive = ratchet_protocol(chain, protocol.omega, xi0=protocol.xi0)
        tau = tau_AB(*drive.stage_durations, int(n))
        base = run_routing(chain, drive, 0.0, dt_max=dt_max).C_bob
        c0[int(n)] = base
        for i, g in enumerate(gs):
            C[i, j] = base if g == 0 else run_routing(chain, drive, 0.0, gamma=float(g), dt_max=dt_max).C_bob
            est[i, j] = base * math.exp(-2 * g * tau)
    F = np.vectorize(lambda c: fidelity_from_concurrence(c, 1 / math.sqrt(2)))(C)
    return SweepResult({"gamma": gs, "N": ns}, C, F, est, extra={"C0": c0})


# ---------------------------------------------------------------- ratio optimiser

_GOLDEN = (math.sqrt(5) - 1) / 2


def ratio_objective(r: float, xi0: float = XI0) -> float:
    """(T1 + T2) J / pi as a function of r = Lambda2 / Lambda1."""
    return 1 / abs(bessel_j0(xi0 * r)) + 1 / abs(bessel_j0(xi0 / r))


def _golden(f, a: float, b: float, tol: float = 1e-10) -> float:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimize_ratio(lo: float = 0.1, hi: float = 1.0, xi0: float = XI0) -> tuple[float, float]:
    """Minimise the stage-duration sum over r in (lo, hi).

    The objective has poles wherever xi0 * r or xi0 / r hits a zero of J0.
    The interval is split at every pole and each pole-free piece is searched
    separately; the best local minimum wins.

    Returns
    -------
    (r_star, f(r_star))
    """
    if not 0 < lo < hi <= 1:
        raise ValueError("need 0 < lo < hi <= 1")
    zeros = j0_zeros(int(xi0 / lo / math.pi) + 3)
    poles = sorted({xi0 / z for z in zeros if lo < xi0 / z < hi} | {z / xi0 for z in zeros if lo < z / xi0 < hi})
    edges = [lo, *poles, hi]
    margin = 1e-9
    best = None
    for a, b in zip(edges[:-1], edges[1:]):
        r = _golden(lambda x: ratio_objective(x, xi0), a + margin, b - margin)
        val = ratio_objective(r, xi0)
        if best is None or val < best[1]:
            best = (r, val)
    return best


# ---------------------------------------------------------------- fabrication errors


def sample_realization(
    spec: ChainSpec,
    protocol: DriveProtocol,
    error_model: ErrorModel,
    index: int,
) -> tuple[ChainSpec, DriveProtocol]:
    """Perturbed copy of (spec, protocol) for realization ``index``.

    The generator is seeded from (base seed, index), so any realization can
    be replayed on its own. Draw order is fixed: couplings, splittings,
    switch jitter; all three are drawn even when a width is zero.
    """
    if error_model.is_zero:
        return spec, protocol
    rng = np.random.default_rng([int(error_model.seed), int(index)])
    n = spec.n_sites
    u_j = rng.uniform(-1.0, 1.0, n - 1)
    u_b = rng.uniform(-1.0, 1.0, n)
    u_t = rng.uniform(-1.0, 1.0, 2 * n + 8)
    couplings = tuple(np.asarray(spec.couplings) + error_model.eps_J * u_j)
    splittings = tuple(spec.profile + error_model.eps_b * u_b)
    jitter = tuple(error_model.eps_T * u_t)
    return spec.with_(couplings=couplings, splittings=splittings), protocol.with_(switch_jitter=jitter)


@dataclass(frozen=True)
class RealizationRecord:
    index: int
    couplings: tuple[float, ...]
    splittings: tuple[float, ...]
    switch_times: tuple[float, ...]
    C: float
    theta: float
    F: float = float("nan")
    rho11: float = float("nan")


@dataclass
class EnsembleResult:
    """Monte Carlo outcome; ``records`` are ordered by realization index."""

    records: list[RealizationRecord]
    theta_mean: float
    bin_width: float
    bin_left: np.ndarray
    counts: np.ndarray
    std_F: float
    std_C: float
    M: int
    seed: int
    compensation: str

    @property
    def C(self) -> np.ndarray:
        return np.array([r.C for r in self.records])

    @property
    def F(self) -> np.ndarray:
        return np.array([r.F for r in self.records])

    @property
    def theta(self) -> np.ndarray:
        return np.array([r.theta for r in self.records])

    @property
    def mode_F(self) -> float:
        """Centre of the most populated histogram bin."""
        return float(self.bin_left[int(np.argmax(self.counts))] + 0.5 * self.bin_width)

    def summary(self) -> dict:
        return {
            "M": self.M,
            "seed": self.seed,
            "theta_mean": self.theta_mean,
            "std_F": self.std_F,
            "std_C": self.std_C,
            "mean_C": float(self.C.mean()),
            "mean_F": float(self.F.mean()),
            "mode_F": self.mode_F,
            "bin_width": self.bin_width,
            "compensation": self.compensation,
        }


def run_realization(
    spec: ChainSpec,
    protocol: DriveProtocol,
    error_model: ErrorModel,
    index: int,
    gamma: float = 0.0,
    dt_max: float | None = None,
) -> RealizationRecord:
    """Propagate one perturbed chain and read C_{A,B} and theta at Bob's end.

    Pure runs start from the Bell pair; with ``gamma > 0`` the state-transfer
    input (|0> + |node>)/sqrt(2) is propagated with chain-only dephasing and
    C is reported as 2|rho_{0B}|, which equals the pure-state concurrence
    for gamma = 0.
    """
    s, p = sample_realization(spec, protocol, error_model, index)
    n_cycles, t_final = _run_length(s, p)
    target = routing_target(s, p)
    dense_from = t_final - p.period
    if gamma > 0:
        s_t = s.with_(include_alice=False)
        rho0 = SubspaceDensity.from_wavefunction(WaveFunction.bell(s.n_sites, s.node_index), dephase_alice=False)
        traj = propagate_lindblad(rho0, s_t, p, gamma, t_final, dt_max=dt_max, dense_from=dense_from)
    else:
        traj = propagate_pure(WaveFunction.bell(s.n_sites, s.node_index), s, p, t_final,
                              dt_max=dt_max, dense_from=dense_from)
    r = readout(traj, target, s.node_index)
    return RealizationRecord(
        index=int(index),
        couplings=s.couplings,
        splittings=tuple(s.profile.tolist()),
        switch_times=tuple(p.switch_times(t_final).tolist()),
        C=r.concurrence,
        theta=r.theta,
        rho11=r.population,
    )


def _realization_task(args):
    return run_realization(*args)


def run_ensemble(
    spec: ChainSpec,
    protocol: DriveProtocol,
    error_model: ErrorModel,
    M: int,
    gamma: float = 0.0,
    beta: complex = 1 / math.sqrt(2),
    workers: int | None = 1,
    compensation: str = "global",
    dt_max: float | None = None,
) -> EnsembleResult:
    """Fabrication-error Monte Carlo over M realizations.

    Each realization yields (C, theta). The calibration phase is the
    circular mean of theta; the fidelity uses the residual
    Delta theta = theta - theta_mean (``compensation="global"``) or zero
    (``"per_realization"``). Pure runs use the phase-error fidelity formula;
    dephased runs evaluate the Bob state directly. Fidelities are binned
    with width 1e-3 on a grid anchored at 0.

    ``workers`` > 1 runs realizations in a process pool; results do not
    depend on the worker count. ``None`` uses every available CPU.
    """
    if M < 2:
        raise ValueError("an ensemble needs M >= 2 realizations")
    if compensation not in ("global", "per_realization"):
        raise ValueError("compensation must be 'global' or 'per_realization'")
    if workers is None:
        workers = os.cpu_count() or 1
    tasks = [(spec, protocol, error_model, i, gamma, dt_max) for i in range(M)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_realization_task, tasks, chunksize=max(1, M // (4 * workers))))
    else:
        records = [_realization_task(t) for t in tasks]
    records.sort(key=lambda r: r.index)

    thetas = np.array([r.theta for r in records])
    theta_mean = wrap_phase(float(np.angle(np.exp(1j * thetas).sum())))
    alpha = math.sqrt(max(0.0, 1 - abs(beta) ** 2))
    out = []
    for r in records:
        dtheta = 0.0 if compensation == "per_realization" else wrap_phase(r.theta - theta_mean)
        if gamma > 0:
            # Bell input: |c_B|^2 = 2 rho11, coherence |rho_{B,vac}| = C/2 at |alpha beta| = 1/2
            c2 = 2.0 * r.rho11
            f = fidelity_deco_exact(abs(beta) ** 2 * c2, alpha * abs(beta) * r.C, alpha, abs(beta), dtheta)
        else:
            f = fidelity_fab(r.C, beta, dtheta)
        out.append(RealizationRecord(r.index, r.couplings, r.splittings, r.switch_times, r.C, r.theta, f, r.rho11))

    F = np.array([r.F for r in out])
    C = np.array([r.C for r in out])
    bins = np.floor(F / HISTOGRAM_BIN + 1e-9).astype(int)
    lo, hi = bins.min(), bins.max()
    counts = np.bincount(bins - lo, minlength=hi - lo + 1)
    return EnsembleResult(
        records=out,
        theta_mean=theta_mean,
        bin_width=HISTOGRAM_BIN,
        bin_left=np.arange(lo, hi + 1) * HISTOGRAM_BIN,
        counts=counts,
        std_F=float(F.std(ddof=1)),
        std_C=float(C.std(ddof=1)),
        M=M,
        seed=error_model.seed,
        compensation=compensation,
    )
