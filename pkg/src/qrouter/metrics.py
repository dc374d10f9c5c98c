"""Entanglement and state-transfer figures of merit.

Concurrence of the (Alice, chain-site) pair, Bob's transfer fidelity in its
exact and closed-form variants, and phase readout from a trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import SubspaceDensity, Trajectory, WaveFunction

__all__ = [
    "ReducedPair",
    "TransferReport",
    "Readout",
    "NoSignalError",
    "concurrence_pure",
    "concurrence_mixed",
    "wootters_concurrence",
    "reduced_pair",
    "bob_density",
    "fidelity_from_rhoB",
    "fidelity_from_concurrence",
    "fidelity_fab",
    "fidelity_deco_approx",
    "fidelity_deco_exact",
    "readout",
    "extract_phase",
    "wrap_phase",
]

CLIP_TOL = 1e-9
_SIGMA_YY = np.fliplr(np.diag([-1.0, 1.0, 1.0, -1.0]))


class NoSignalError(RuntimeError):
    """The readout site carries (almost) no excitation."""


@dataclass(frozen=True)
class ReducedPair:
    """4x4 state of Alice's qubit and chain qubit ``site``.

    Basis order: |0_A 0_n>, |0_A 1_n>, |1_A 0_n>, |1_A 1_n>.
    """

    matrix: np.ndarray
    site: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("a reduced pair is a 4x4 matrix")
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])


@dataclass(frozen=True)
class TransferReport:
    """Outcome of sending alpha|0> + beta|1> from the node to Bob."""

    c_B_modulus: float
    theta: float
    concurrence: float
    fidelity: float
    alpha: complex
    beta: complex
    readout_time: float = float("nan")
    fidelity_as_printed: float | None = None

    def to_dict(self) -> dict:
        out = {
            "c_B_modulus": self.c_B_modulus,
            "theta": self.theta,
            "concurrence": self.concurrence,
            "fidelity": self.fidelity,
            "alpha": [float(np.real(self.alpha)), float(np.imag(self.alpha))],
            "beta": [float(np.real(self.beta)), float(np.imag(self.beta))],
            "readout_time": self.readout_time,
        }
        if self.fidelity_as_printed is not None:
            out["fidelity_as_printed"] = self.fidelity_as_printed
        return out


def _check_site(n_sites: int, n: int) -> None:
    if not 1 <= n <= n_sites:
        raise ValueError(f"site {n} outside 1..{n_sites}")


def concurrence_pure(c: WaveFunction, n: int) -> float:
    """C_{A,n} = 2|c_0 c_n| for a single-excitation pure state."""
    amp = c.amplitudes
    _check_site(amp.size - 1, n)
    return 2.0 * abs(amp[0] * amp[n])


def reduced_pair(state, n: int) -> ReducedPair:
    """Trace out every chain qubit except ``n``.

    ``state`` is a :class:`WaveFunction` or a :class:`SubspaceDensity`.
    """
    rho = state.rho if isinstance(state, SubspaceDensity) else np.outer(state.amplitudes, state.amplitudes.conj())
    _check_site(rho.shape[0] - 1, n)
    m = np.zeros((4, 4), complex)
    m[0, 0] = np.trace(rho).real - rho[0, 0].real - rho[n, n].real
    m[1, 1] = rho[n, n].real
    m[2, 2] = rho[0, 0].real
    m[1, 2] = rho[n, 0]
    m[2, 1] = rho[0, n]
    return ReducedPair(m, n)


def wootters_concurrence(pair: ReducedPair) -> float:
    """max(0, l1 - l2 - l3 - l4), l_i the decreasing square roots of eig(rho rho~).

    The l_i are taken as singular values of sqrt(rho) sqrt(rho~), which
    avoids square roots of rounding noise in the vanishing eigenvalues of
    rho rho~. Eigenvalues of rho below 1e-14 (relative) are set to zero first.
    """
    rho = 0.5 * (pair.matrix + pair.matrix.conj().T)
    w, v = np.linalg.eigh(rho)
    if w[0] < -CLIP_TOL:
        raise ValueError(f"reduced state has eigenvalue {w[0]:.3e} < -1e-9; propagation defect")
    w = np.where(w > 1e-14 * max(w[-1], 1e-300), w, 0.0)
    root = (v * np.sqrt(w)) @ v.conj().T
    root_tilde = _SIGMA_YY @ root.conj() @ _SIGMA_YY
    lam = np.linalg.svd(root @ root_tilde, compute_uv=False)
    return max(0.0, float(lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_mixed(rho: SubspaceDensity, n: int) -> float:
    """Concurrence of the reduced (Alice, n) state.

    Both the Wootters construction and the X-state shortcut 2|rho_0n| are
    evaluated; they must agree within 1e-9.
    """
    pair = reduced_pair(rho, n)
    m = pair.matrix
    # X state with empty |1_A 1_n>: the |0 0>/|1 1> branch is -2 sqrt(rho00*rho33) <= 0
    fast = 2.0 * abs(m[1, 2]) - 2.0 * math.sqrt(max(m[0, 0].real, 0.0) * max(m[3, 3].real, 0.0))
    if fast < -CLIP_TOL:
        raise ValueError(f"negative concurrence {fast:.3e}")
    fast = max(fast, 0.0)
    full = wootters_concurrence(pair)
    if abs(full - fast) > CLIP_TOL:
        raise ValueError(f"Wootters ({full:.12g}) and X-state ({fast:.12g}) concurrences disagree")
    return fast


def _norm_check(alpha, beta) -> None:
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-9:
        raise ValueError("need |alpha|^2 + |beta|^2 = 1")


def bob_density(alpha: complex, beta: complex, c_B: complex, variant: str = "exact") -> np.ndarray:
    """Bob's qubit after the transfer, in the basis |0>, |1>.

    ``variant="exact"`` is the excitation-conserving reduced state with
    excited population |beta|^2 |c_B|^2. ``"as_printed"`` uses |c_B| instead
    of its square, the form sometimes quoted in the literature; it is kept
    for comparison only.
    """
    p = abs(beta) ** 2 * (abs(c_B) ** 2 if variant == "exact" else abs(c_B))
    if variant not in ("exact", "as_printed"):
        raise ValueError(f"unknown variant {variant!r}")
    coh = alpha * np.conj(beta) * np.conj(c_B)
    return np.array([[1 - p, coh], [np.conj(coh), p]], complex)


def fidelity_from_rhoB(alpha: complex, beta: complex, c_B: complex, variant: str = "exact") -> float:
    """<psi_A| rho_B |psi_A> after Bob has undone the known phase arg(c_B)."""
    _norm_check(alpha, beta)
    rho = bob_density(alpha, beta, abs(c_B), variant)
    psi = np.array([alpha, beta], complex)
    return float(abs(np.vdot(psi, rho @ psi)))


def fidelity_from_concurrence(C: float, beta) -> float:
    """F = 1 - (1 - C)|beta|^2 [1 - C(1 - 2|beta|^2)]."""
    p = abs(beta) ** 2
    return 1.0 - (1.0 - C) * p * (1.0 - C * (1.0 - 2.0 * p))


def fidelity_fab(C: float, beta, delta_theta: float) -> float:
    """Fidelity with a residual phase error delta_theta after calibration."""
    p = abs(beta) ** 2
    cd = math.cos(delta_theta)
    return 1.0 - p * (1.0 - 2.0 * C * cd + C * C) + 2.0 * p * p * C * (C - cd)


def fidelity_deco_approx(beta, delta_theta: float, gamma: float, tau_AB: float) -> float:
    """F = 1 - 2(|beta|^2 - |beta|^4)[1 - cos(delta_theta) exp(-gamma tau_AB)]."""
    p = abs(beta) ** 2
    return 1.0 - 2.0 * (p - p * p) * (1.0 - math.cos(delta_theta) * math.exp(-gamma * tau_AB))


def fidelity_deco_exact(rho11: float, rho10: complex, alpha, beta, delta_theta: float) -> float:
    """F = 1 - rho11 + |beta|^2 (2 rho11 - 1) + 2|rho10| Re(alpha beta e^{i delta_theta})."""
    p = abs(beta) ** 2
    return float(
        1.0 - rho11 + p * (2.0 * rho11 - 1.0) + 2.0 * abs(rho10) * np.real(alpha * beta * np.exp(1j * delta_theta))
    )


def wrap_phase(theta):
    """Map onto (-pi, pi]."""
    w = np.angle(np.exp(1j * np.asarray(theta, dtype=float)))
    w = np.where(w <= -math.pi, w + 2 * math.pi, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class Readout:
    """Sample at which Bob reads: the population maximum in the final period."""

    index: int
    time: float
    population: float
    concurrence: float
    coherence: complex
    theta: float


def readout(trajectory: Trajectory, site: int, source: int | None = None, min_population: float = 1e-3) -> Readout:
    """Locate the readout sample of ``site`` and its phase.

    The readout time maximises the site population over the last
    (T1 + T2) of the run. With rho_{0n} = c_0 conj(c_n), the phase is
    arg(c_site) - arg(c_0) at that time minus the same quantity for
    ``source`` at t = 0; ``source`` defaults to the initially most populated
    chain site.

    Raises
    ------
    NoSignalError
        If the population at the readout time is below ``min_population``.
    """
    pops = trajectory.populations
    _check_site(pops.shape[1] - 1, site)
    times = trajectory.times
    t_end = times[-1]
    window = trajectory.period if math.isfinite(trajectory.period) else t_end
    idx = np.flatnonzero(times >= t_end - window - 1e-12)
    k = int(idx[np.argmax(pops[idx, site])])
    if source is None:
        source = int(np.argmax(pops[0, 1:])) + 1
    coh_k = trajectory.coherences[:, site]
    t_star, pop, mod, phase = _refine_peak(times, pops[:, site], coh_k, k, idx[0], idx[-1])
    if pop < min_population:
        raise NoSignalError(f"no signal arrived at site {site}: population {pop:.2e} < {min_population:g}")
    coh = mod * np.exp(1j * phase)
    ref = complex(trajectory.coherences[0, source])
    theta = wrap_phase(np.angle(ref) - phase)
    return Readout(
        index=k,
        time=t_star,
        population=pop,
        concurrence=2.0 * mod,
        coherence=complex(coh),
        theta=theta,
    )


def _refine_peak(times, pop, coh, k, lo, hi):
    """Locate the population maximum between samples by local interpolation.

    A polynomial through up to five samples around ``k`` (degree <= 4) is
    maximised on [t_{k-1}, t_{k+1}]; |coherence| and its unwrapped phase are
    interpolated at the same time. This keeps the readout independent of the
    sampling grid, so halving the step does not move it by a grid spacing.
    """
    # walk outwards from k, skipping samples that nearly coincide in time
    # (the short step closing a stage) so the fit stays well conditioned
    spacing = np.median(np.diff(times[max(lo, k - 8): min(hi, k + 8) + 1]))
    sel = [k]
    for step in (-1, 1):
        j, taken = k + step, 0
        while lo <= j <= hi and taken < 2:
            if abs(times[j] - times[sel[-1] if step > 0 else sel[0]]) > 0.25 * spacing:
                sel = sel + [j] if step > 0 else [j] + sel
                taken += 1
            j += step
    sel = np.array(sel)
    if sel.size < 3:
        return float(times[k]), float(pop[k]), float(abs(coh[k])), float(np.angle(coh[k]))
    t0 = times[k]
    h = max(times[sel[-1]] - times[sel[0]], 1e-300)
    x = (times[sel] - t0) / h
    deg = sel.size - 1
    p_pop = np.polynomial.Polynomial.fit(x, pop[sel], deg, domain=[-1, 1], window=[-1, 1])
    pos = int(np.flatnonzero(sel == k)[0])
    left = x[max(0, pos - 1)]
    right = x[min(sel.size - 1, pos + 1)]
    cand = [0.0, left, right]
    cand += [r.real for r in p_pop.deriv().roots() if abs(r.imag) < 1e-12 and left <= r.real <= right]
    xs = max(cand, key=p_pop)
    if not pop[k] <= p_pop(xs) <= pop[k] + 1e-3:
        # the sampled maximum is already as good as the interpolant can tell
        xs = 0.0
    p_mod = np.polynomial.Polynomial.fit(x, np.abs(coh[sel]), deg, domain=[-1, 1], window=[-1, 1])
    p_arg = np.polynomial.Polynomial.fit(x, np.unwrap(np.angle(coh[sel])), deg, domain=[-1, 1], window=[-1, 1])
    return float(t0 + xs * h), float(p_pop(xs)), float(max(p_mod(xs), 0.0)), float(p_arg(xs))


def extract_phase(trajectory: Trajectory, site: int, source: int | None = None) -> float:
    """Transfer phase theta at the readout time of ``site`` (see :func:`readout`)."""
    return readout(trajectory, site, source).theta
