"""Propagation of the driven chain in the single-excitation subspace.

The full-drive propagators integrate in the interaction picture of the
diagonal drive: with ``c_n = exp(-1j * b_n * phase(t)) * d_n`` and
``phase(t) = integral of xi0*omega*cos(omega*s)/Lambda_s ds`` (known in closed
form), only the J/2 hopping terms remain, dressed by oscillating phases. The
step then has to resolve the carrier, not on-site rotations of size
~xi0*omega*b_n/Lambda. Stored samples are transformed back to the lab frame.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._tableaus import TABLEAUS
from .model import ChainSpec, DriveProtocol, effective_coupling
from .special import bessel_j0

__all__ = [
    "WaveFunction",
    "SubspaceDensity",
    "Trajectory",
    "PropagationError",
    "propagate_pure",
    "propagate_lindblad",
    "propagate_effective",
    "bessel_j0",
    "default_dt_max",
    "drive_phase",
]

NORM_ABORT = 1e-6


class PropagationError(RuntimeError):
    """Norm or trace drift beyond the abort threshold."""


@dataclass(frozen=True)
class WaveFunction:
    """Amplitudes c_0..c_N over the single-excitation basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", np.asarray(self.amplitudes, dtype=complex).copy())

    @classmethod
    def bell(cls, n_sites: int, site: int) -> "WaveFunction":
        """(|0> + |site>)/sqrt(2): Alice entangled with chain qubit ``site``."""
        c = np.zeros(n_sites + 1, complex)
        c[0] = c[site] = 1 / math.sqrt(2)
        return cls(c)

    @classmethod
    def transfer(cls, n_sites: int, site: int, alpha: complex, beta: complex) -> "WaveFunction":
        """alpha|vacuum> + beta|site>, the state-transfer input."""
        c = np.zeros(n_sites + 1, complex)
        c[0], c[site] = alpha, beta
        return cls(c)

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class SubspaceDensity:
    """Density matrix over the single-excitation basis.

    ``dephase_alice`` adds Alice's qubit to the dephasing channels: index 0
    then differs from every chain index in two qubits instead of one.
    """

    rho: np.ndarray
    dephase_alice: bool = True

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex).copy()
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("rho must be a square matrix")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_wavefunction(cls, psi: WaveFunction, dephase_alice: bool = True) -> "SubspaceDensity":
        c = psi.amplitudes
        return cls(np.outer(c, c.conj()), dephase_alice)

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()


@dataclass
class Trajectory:
    """Sampled propagation output.

    ``states`` holds lab-frame amplitudes (pure runs). Density runs keep the
    populations and row 0 of rho (``coherences[:, n] = rho[0, n]``), which is
    all the pairwise metrics need, plus the full final matrix.
    """

    times: np.ndarray
    populations: np.ndarray
    coherences: np.ndarray
    kind: str
    states: np.ndarray | None = None
    final_rho: np.ndarray | None = None
    drift_log: list[tuple[float, float]] = field(default_factory=list)
    dt_max: float = float("nan")
    period: float = float("nan")
    t_final: float = float("nan")

    @property
    def concurrences(self) -> np.ndarray:
        """C_{A,n}(t) = 2|rho_0n| for n = 1..N, shape (samples, N)."""
        return 2.0 * np.abs(self.coherences[:, 1:])

    @property
    def max_drift(self) -> float:
        return max((abs(d) for _, d in self.drift_log), default=0.0)

    @property
    def final_state(self):
        if self.kind == "density":
            return SubspaceDensity(self.final_rho)
        return WaveFunction(self.states[-1])

    def to_csv(self, path, stride: int = 1) -> None:
        """One row per (sample, site): time, site, population, C_{A,site}."""
        conc = self.concurrences
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t[1/J]", "site", "population", "concurrence"])
            for k in range(0, len(self.times), stride):
                t = self.times[k]
                for n in range(1, self.populations.shape[1]):
                    w.writerow([f"{t:.10g}", n, f"{self.populations[k, n]:.12e}", f"{conc[k, n - 1]:.12e}"])


def default_dt_max(omega: float) -> float:
    return 2 * math.pi / omega / 64


def _basis_arrays(spec: ChainSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Splittings on the full basis, bond phase weights and half-couplings."""
    n = spec.n_sites
    b_full = np.concatenate([[0.0], spec.profile])
    db = b_full[:-1] - b_full[1:]
    hop = np.zeros(n)
    hop[1:] = 0.5 * np.asarray(spec.couplings)
    db[0] = 0.0
    return b_full, db, hop


@dataclass(frozen=True)
class _Segment:
    t_a: float
    t_b: float
    kappa: float
    offset: float  # phase(t) = offset + kappa*sin(omega*t + carrier_phase)
    stride: int
    carrier_phase: float = 0.0


def _segments(spec, protocol, t_final, stride, dense_from) -> list[_Segment]:
    cuts = [0.0, *protocol.switch_times(t_final).tolist(), t_final]
    stage = protocol.initial_stage()
    omega = protocol.omega
    phase = 0.0
    out = []
    for t_a, t_b in zip(cuts[:-1], cuts[1:]):
        kappa = protocol.xi0 / (spec.lambda1 if stage == 1 else spec.lambda2)
        offset = phase - kappa * math.sin(omega * t_a + protocol.carrier_phase)
        pieces = [(t_a, t_b)]
        if dense_from is not None and t_a < dense_from < t_b:
            pieces = [(t_a, dense_from), (dense_from, t_b)]
        for a, b in pieces:
            dense = dense_from is not None and a >= dense_from
            out.append(_Segment(a, b, kappa, offset, 1 if dense else stride, protocol.carrier_phase))
        phase = offset + kappa * math.sin(omega * t_b + protocol.carrier_phase)
        stage = 3 - stage
    return out


def drive_phase(spec: ChainSpec, protocol: DriveProtocol, t) -> np.ndarray:
    """Accumulated drive phase per unit splitting, integral_0^t h_n(s)/b_n ds."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    segs = _segments(spec, protocol, float(t.max()) + 1e-12, 1, None)
    starts = np.array([s.t_a for s in segs])
    idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(segs) - 1)
    kappa = np.array([s.kappa for s in segs])[idx]
    offset = np.array([s.offset for s in segs])[idx]
    return offset + kappa * np.sin(protocol.omega * t + protocol.carrier_phase)


def _check_dt(protocol: DriveProtocol, dt_max: float | None) -> float:
    limit = 2 * math.pi / protocol.omega / 32
    if dt_max is None:
        return default_dt_max(protocol.omega)
    if not 0 < dt_max <= limit * (1 + 1e-12):
        raise ValueError(f"dt_max={dt_max} must lie in (0, {limit:.6g}] (32 steps per carrier period)")
    return dt_max


@dataclass
class _Block:
    """A run of equal steps sharing one bond-factor table."""

    table: np.ndarray
    dt: float
    nsteps: int
    stride: int
    record_times: np.ndarray


def _blocks(seg: _Segment, omega: float, dt_max: float, db, hop, c_nodes):
    """Split a segment into full carrier-commensurate steps plus one closing step.

    The step is carrier_period / m with m = ceil(carrier_period / dt_max), so
    the bond factors repeat every m steps and are tabulated once.
    """
    carrier = 2 * math.pi / omega
    m = math.ceil(carrier / dt_max - 1e-9)
    dt = carrier / m
    length = seg.t_b - seg.t_a
    nfull = int(math.floor(length / dt + 1e-9))
    if nfull * dt >= length - 1e-9 * dt:
        nfull -= 1
    last = length - nfull * dt

    def table(t_start, step, rows):
        tau = t_start + (np.arange(rows)[:, None] + c_nodes[None, :]) * step
        phase = seg.offset + seg.kappa * np.sin(omega * tau + seg.carrier_phase)
        return hop * np.exp(1j * db * phase[..., None])

    out = []
    if nfull > 0:
        idx = np.arange(nfull)
        rec = idx[((idx + 1) % seg.stride == 0) | (idx == nfull - 1)]
        out.append(_Block(table(seg.t_a, dt, min(m, nfull)), dt, nfull, seg.stride, seg.t_a + (rec + 1) * dt))
    out.append(_Block(table(seg.t_a + nfull * dt, last, 1), last, 1, 1, np.array([seg.t_b])))
    return out


def _drift_error(kind, value, t, dt_max):
    return PropagationError(
        f"{kind} drift {value:.3e} at t={t:.6g} exceeds {NORM_ABORT:g}; "
        f"reduce dt_max (currently {dt_max:.4g})"
    )


def propagate_pure(
    psi0: WaveFunction,
    spec: ChainSpec,
    protocol: DriveProtocol,
    t_final: float,
    dt_max: float | None = None,
    stride: int = 16,
    dense_from: float | None = None,
    method: str = "rk8",
) -> Trajectory:
    """Integrate i dc/dt = H(t) c with a fixed-step explicit Runge-Kutta scheme.

    ``method`` is ``"rk8"`` (12-stage, 8th order; default) or ``"rk4"``.
    Every stage switch is a step endpoint and no step exceeds ``dt_max``
    (default: carrier period / 64). Samples are kept every ``stride`` steps,
    at every stage end, and at every step after ``dense_from``.

    Raises
    ------
    PropagationError
        If the norm drifts by more than 1e-6.
    """
    dt_max = _check_dt(protocol, dt_max)
    d = np.array(psi0.amplitudes, dtype=complex)
    if d.size != spec.n_sites + 1:
        raise ValueError("wave function dimension does not match the chain")
    if abs(psi0.norm - 1) > 1e-9:
        raise ValueError("initial state must be normalised")
    a, b, c = TABLEAUS[method]
    b_full, db, hop = _basis_arrays(spec)
    norm0 = psi0.norm
    times = [np.zeros(1)]
    states = [d[None, :].copy()]
    drift = []
    for seg in _segments(spec, protocol, t_final, stride, dense_from):
        for blk in _blocks(seg, protocol.omega, dt_max, db, hop, c):
            out = np.empty((blk.record_times.size, d.size), complex)
            _kernels.rk_pure(d, blk.table, blk.dt, blk.nsteps, blk.stride, a, b, out)
            times.append(blk.record_times)
            states.append(out)
        err = float(np.vdot(d, d).real) - norm0
        drift.append((seg.t_b, err))
        if abs(err) > NORM_ABORT:
            raise _drift_error("norm", err, seg.t_b, dt_max)
    times = np.concatenate(times)
    phase = drive_phase(spec, protocol, times)
    states = np.concatenate(states) * np.exp(-1j * np.outer(phase, b_full))
    return Trajectory(
        times=times,
        populations=np.abs(states) ** 2,
        coherences=states[:, :1] * states.conj(),
        kind="pure",
        states=states,
        drift_log=drift,
        dt_max=dt_max,
        period=protocol.period,
        t_final=t_final,
    )


def dephasing_weights(n_sites: int, dephase_alice: bool) -> np.ndarray:
    """Number of qubits in which basis states n and m differ."""
    d = np.full((n_sites + 1, n_sites + 1), 2.0)
    np.fill_diagonal(d, 0.0)
    d[0, 1:] = d[1:, 0] = 2.0 if dephase_alice else 1.0
    return d


def propagate_lindblad(
    rho0: SubspaceDensity,
    spec: ChainSpec,
    protocol: DriveProtocol,
    gamma: float,
    t_final: float,
    dt_max: float | None = None,
    stride: int = 16,
    dense_from: float | None = None,
    method: str = "rk8",
) -> Trajectory:
    """Integrate d rho/dt = -i[H, rho] - gamma * d(n,m) * rho_nm.

    Pure dephasing is diagonal in this basis, so the dissipator is applied as
    element-wise damping with d(n, m) the number of qubits in which the basis
    states differ. Only the upper triangle is evolved and the lower one is
    mirrored from it. Stepping and sampling follow :func:`propagate_pure`.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if rho0.dephase_alice and not spec.include_alice:
        raise ValueError("dephase_alice needs the routing basis (include_alice=True)")
    dt_max = _check_dt(protocol, dt_max)
    rho = np.array(rho0.rho, dtype=complex)
    if rho.shape[0] != spec.n_sites + 1:
        raise ValueError("density matrix dimension does not match the chain")
    if abs(np.trace(rho).real - 1) > 1e-9:
        raise ValueError("initial density matrix must have unit trace")
    a, b, c = TABLEAUS[method]
    b_full, db, hop = _basis_arrays(spec)
    damp = gamma * dephasing_weights(spec.n_sites, rho0.dephase_alice)
    tr0 = float(np.trace(rho).real)
    dim = rho.shape[0]

    times = [np.zeros(1)]
    diags = [np.real(np.diag(rho))[None, :].copy()]
    rows = [rho[:1].copy()]
    drift = []
    for seg in _segments(spec, protocol, t_final, stride, dense_from):
        for blk in _blocks(seg, protocol.omega, dt_max, db, hop, c):
            out_diag = np.empty((blk.record_times.size, dim))
            out_row = np.empty((blk.record_times.size, dim), complex)
            _kernels.rk_lindblad(rho, blk.table, damp, blk.dt, blk.nsteps, blk.stride, a, b, out_diag, out_row)
            times.append(blk.record_times)
            diags.append(out_diag)
            rows.append(out_row)
        err = float(np.trace(rho).real) - tr0
        drift.append((seg.t_b, err))
        if abs(err) > NORM_ABORT:
            raise _drift_error("trace", err, seg.t_b, dt_max)
    times = np.concatenate(times)
    phase = drive_phase(spec, protocol, times)
    # rho_0n = exp(+i phi_n) * rho~_0n, phi_0 = 0
    rows = np.concatenate(rows) * np.exp(1j * np.outer(phase, b_full))
    phi_final = phase[-1] * b_full
    final = rho * np.exp(-1j * (phi_final[:, None] - phi_final[None, :]))
    return Trajectory(
        times=times,
        populations=np.concatenate(diags),
        coherences=rows,
        kind="density",
        final_rho=final,
        drift_log=drift,
        dt_max=dt_max,
        period=protocol.period,
        t_final=t_final,
    )


def effective_hamiltonian(spec: ChainSpec, protocol: DriveProtocol, stage: int) -> np.ndarray:
    """Static high-frequency Hamiltonian of one stage: renormalised hopping, zero diagonal."""
    b = spec.profile
    scale = protocol.xi0 * protocol.omega / (spec.lambda1 if stage == 1 else spec.lambda2)
    n = spec.n_sites
    h = np.zeros((n + 1, n + 1))
    for i in range(1, n):
        j_eff = effective_coupling(spec.couplings[i - 1], b[i - 1], b[i], scale, protocol.omega)
        h[i, i + 1] = h[i + 1, i] = 0.5 * j_eff
    return h


def propagate_effective(
    psi0: WaveFunction,
    spec: ChainSpec,
    protocol: DriveProtocol,
    t_final: float,
    samples_per_stage: int = 32,
) -> Trajectory:
    """Exact evolution under the piecewise-static effective Hamiltonian."""
    props = {}
    for stage in (1, 2):
        w, v = np.linalg.eigh(effective_hamiltonian(spec, protocol, stage))
        props[stage] = (w, v)
    cuts = [0.0, *protocol.switch_times(t_final).tolist(), t_final]
    stage = protocol.initial_stage()
    c = psi0.amplitudes.copy()
    times = [0.0]
    states = [c.copy()]
    for t_a, t_b in zip(cuts[:-1], cuts[1:]):
        w, v = props[stage]
        coeff = v.T @ c
        for tau in np.linspace(t_a, t_b, samples_per_stage + 1)[1:]:
            states.append(v @ (np.exp(-1j * w * (tau - t_a)) * coeff))
            times.append(tau)
        c = states[-1].copy()
        stage = 3 - stage
    states = np.array(states)
    return Trajectory(
        times=np.array(times),
        populations=np.abs(states) ** 2,
        coherences=states[:, :1] * states.conj(),
        kind="pure",
        states=states,
        drift_log=[(t_final, float(np.vdot(c, c).real) - psi0.norm)],
        period=protocol.period,
        t_final=t_final,
    )
